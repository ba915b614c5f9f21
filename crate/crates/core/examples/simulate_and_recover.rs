//! Plant a subgroup in synthetic data, discover it and score the result.
//!
//! `cargo run --release --example simulate_and_recover -- randomized 4`

use diffsub::eval::{effect_metrics_for, recovery};
use diffsub::synth::{generate, Setting, SynthConfig};
use diffsub::trainer::{discover, TrainConfig};

fn main() -> diffsub::Result<()> {
    let mut args = std::env::args().skip(1);
    let setting: Setting = args.next().as_deref().unwrap_or("observational").parse()?;
    let tau: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(4.0);

    let (ds, truth) = generate(&SynthConfig {
        setting,
        tau,
        seed: 1,
        ..Default::default()
    })?;
    let [f0, f1] = truth.features;
    println!(
        "planted: x{f0} in ({:.3}, {:.3}) & x{f1} in ({:.3}, {:.3}), coverage {:.3}",
        truth.bounds[0].0, truth.bounds[0].1, truth.bounds[1].0, truth.bounds[1].1, truth.coverage
    );

    let report = discover(&ds, &TrainConfig { seed: 1, ..Default::default() })?;
    println!("found:   {}", report.rule.text);

    let member = report.rule.membership(&ds)?;
    let rec = recovery(&member, &truth.membership)?;
    println!("F1 {:.3}  precision {:.3}  recall {:.3}", rec.f1, rec.precision, rec.recall);
    let eff = effect_metrics_for(&ds, &member)?;
    println!("tau_hat {:.3} (true {tau})  in-subgroup PEHE {:.3}", eff.tau_hat, eff.pehe);
    Ok(())
}
