//! Weighted target distributions and the Jensen-Shannon divergence between them.

use diffsub::densities::{fit_discrete, fit_kde, js_divergence, js_pmf, TargetDensity};

fn main() -> diffsub::Result<()> {
    let p = [0.7, 0.2, 0.1];
    let q = [0.1, 0.3, 0.6];
    println!("JS(p, q) = {:.4} nats (max ln 2 = {:.4})", js_pmf(&p, &q)?, std::f64::consts::LN_2);

    // soft memberships act as sample weights
    let labels = [0, 0, 1, 2, 2, 2];
    let m = [1.0, 0.9, 0.5, 0.1, 0.1, 0.0];
    let pmf = fit_discrete(&labels, &m, 3)?;
    println!("weighted PMF: {:.3} {:.3} {:.3}", pmf.prob(0), pmf.prob(1), pmf.prob(2));

    let y0: Vec<f64> = (0..200).map(|i| (i as f64 / 200.0 - 0.5) * 2.0).collect();
    let y1: Vec<f64> = y0.iter().map(|v| v + 1.5).collect();
    let w = vec![1.0; 200];
    let k0 = fit_kde(&y0, &w)?;
    let k1 = fit_kde(&y1, &w)?;
    println!("KDE bandwidths {:.3} / {:.3}, effective n {:.0}", k0.bandwidth, k1.bandwidth, k0.n_eff);

    let (d0, d1) = (TargetDensity::Continuous(k0), TargetDensity::Continuous(k1));
    let est = js_divergence(&d0, &d1, &y0, &w, &y1, &w)?;
    println!("sample JS estimate for a shift of 1.5: {:.4}", est.value);
    let est_same = js_divergence(&d0, &d0, &y0, &w, &y0, &w)?;
    println!("same distribution: {:.4}", est_same.value);
    Ok(())
}
