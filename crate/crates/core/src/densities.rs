//! Membership-weighted target distributions and the Jensen-Shannon exceptionality.
//!
//! Discrete targets use a weighted empirical PMF, continuous targets a
//! weighted Gaussian KDE with Scott's bandwidth computed from the Kish
//! effective sample size. Fitted estimators are plain values: the
//! exceptionality gradient treats them as constants and flows only through
//! the explicit membership weights.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability floor added to every PMF entry before renormalizing.
pub const PMF_FLOOR: f64 = 1e-9;
/// Floor applied to KDE evaluations before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Kernels farther than this many bandwidths from a query are skipped
/// (their contribution is below 1e-21 of the kernel peak).
const KERNEL_CUTOFF: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedEmpiricalPMF {
    pub probs: Vec<f64>,
    pub total_weight: f64,
}

impl WeightedEmpiricalPMF {
    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    /// Probability of class `label`; labels outside the support get the floor mass.
    pub fn prob(&self, label: usize) -> f64 {
        self.probs
            .get(label)
            .copied()
            .unwrap_or(PMF_FLOOR / (1.0 + self.probs.len() as f64 * PMF_FLOOR))
    }
}

/// `P(Y = l) = Σ m_i 1(y_i = l) / Σ m_i`, floored at [`PMF_FLOOR`] and renormalized.
pub fn fit_discrete(y: &[usize], m: &[f64], n_classes: usize) -> Result<WeightedEmpiricalPMF> {
    if y.len() != m.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: m.len(),
        });
    }
    let mut counts = vec![0.0; n_classes];
    let mut total = 0.0;
    for (&label, &w) in y.iter().zip(m) {
        let slot = counts.get_mut(label).ok_or(Error::IndexOutOfRange {
            index: label,
            len: n_classes,
        })?;
        *slot += w;
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    let norm = 1.0 + n_classes as f64 * PMF_FLOOR;
    let probs = counts.iter().map(|c| (c / total + PMF_FLOOR) / norm).collect();
    Ok(WeightedEmpiricalPMF {
        probs,
        total_weight: total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedKDE {
    /// Sample values with positive weight, ascending.
    pub centers: Vec<f64>,
    /// Normalized weights aligned with `centers`.
    pub weights: Vec<f64>,
    pub bandwidth: f64,
    /// Kish effective sample size `(Σm)² / Σm²`.
    pub n_eff: f64,
    /// Set when the weighted variance vanished and the fallback bandwidth was used.
    pub degenerate: bool,
}

impl WeightedKDE {
    pub fn density(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.centers.partition_point(|&c| c < y - KERNEL_CUTOFF * h);
        let hi = self.centers.partition_point(|&c| c <= y + KERNEL_CUTOFF * h);
        let norm = 1.0 / (h * (2.0 * PI).sqrt());
        let mut acc = 0.0;
        for k in lo..hi {
            let z = (y - self.centers[k]) / h;
            acc += self.weights[k] * (-0.5 * z * z).exp();
        }
        acc * norm
    }

    pub fn mean(&self) -> f64 {
        self.centers.iter().zip(&self.weights).map(|(c, w)| c * w).sum()
    }

    pub fn std(&self) -> f64 {
        let mu = self.mean();
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (c - mu) * (c - mu))
            .sum::<f64>()
            .sqrt()
    }
}

/// Weighted Gaussian KDE with bandwidth `n_eff^{-1/5} · σ_w`.
pub fn fit_kde(y: &[f64], m: &[f64]) -> Result<WeightedKDE> {
    if y.len() != m.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: m.len(),
        });
    }
    let mut pairs: Vec<(f64, f64)> = y
        .iter()
        .zip(m)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if pairs.is_empty() || !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    let centers: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
    let n_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let mean: f64 = centers.iter().zip(&weights).map(|(c, w)| c * w).sum();
    let var: f64 = centers
        .iter()
        .zip(&weights)
        .map(|(c, w)| w * (c - mean) * (c - mean))
        .sum();
    let (bandwidth, degenerate) = if var < 1e-12 {
        (1e-6 * (1.0 + mean.abs()), true)
    } else {
        (n_eff.powf(-0.2) * var.sqrt(), false)
    };
    Ok(WeightedKDE {
        centers,
        weights,
        bandwidth,
        n_eff,
        degenerate,
    })
}

/// A fitted subgroup target distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetDensity {
    Discrete(WeightedEmpiricalPMF),
    Continuous(WeightedKDE),
}

impl TargetDensity {
    /// Floored probability (discrete) or density (continuous) at `y`.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            TargetDensity::Discrete(p) => {
                if y >= 0.0 && y.fract() == 0.0 {
                    p.prob(y as usize)
                } else {
                    p.prob(usize::MAX)
                }
            }
            TargetDensity::Continuous(k) => k.density(y).max(DENSITY_FLOOR),
        }
    }

    fn same_kind(&self, other: &TargetDensity) -> bool {
        matches!(
            (self, other),
            (TargetDensity::Discrete(_), TargetDensity::Discrete(_))
                | (TargetDensity::Continuous(_), TargetDensity::Continuous(_))
        )
    }
}

/// `m(y) = (p_0(y) + p_1(y)) / 2`.
#[derive(Clone, Copy, Debug)]
pub struct MixtureDensity<'a> {
    pub left: &'a TargetDensity,
    pub right: &'a TargetDensity,
}

impl<'a> MixtureDensity<'a> {
    pub fn new(left: &'a TargetDensity, right: &'a TargetDensity) -> Result<Self> {
        if !left.same_kind(right) {
            return Err(Error::TaskMismatch);
        }
        Ok(Self { left, right })
    }

    pub fn eval(&self, y: f64) -> f64 {
        0.5 * (self.left.eval(y) + self.right.eval(y))
    }
}

/// Exact Jensen-Shannon divergence (nats) between two PMFs on the same support.
pub fn js_pmf(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let kl_to_mix = |x: f64, mix: f64| if x > 0.0 { x * (x / mix).ln() } else { 0.0 };
    let mut js = 0.0;
    for (&pl, &ql) in p.iter().zip(q) {
        let mix = 0.5 * (pl + ql);
        js += 0.5 * kl_to_mix(pl, mix) + 0.5 * kl_to_mix(ql, mix);
    }
    Ok(js.clamp(0.0, LN_2))
}

/// Sample approximation of the JS divergence under soft membership.
#[derive(Clone, Debug, PartialEq)]
pub struct JsEstimate {
    /// Estimate clamped at zero.
    pub value: f64,
    pub raw: f64,
    /// `∂E/∂m_i` for each sample of group 0, in input order.
    pub coef0: Vec<f64>,
    /// `∂E/∂m_i` for each sample of group 1.
    pub coef1: Vec<f64>,
}

/// `½ Σ_a (1/n_a) Σ_{i∈a} m_i log(p_a(y_i) / m(y_i))` with the fitted
/// densities held fixed. Coefficients are zero when the raw estimate is
/// clamped.
pub fn js_divergence(
    p0: &TargetDensity,
    p1: &TargetDensity,
    y0: &[f64],
    m0: &[f64],
    y1: &[f64],
    m1: &[f64],
) -> Result<JsEstimate> {
    for (y, m) in [(y0, m0), (y1, m1)] {
        if y.len() != m.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: m.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::ZeroTotalWeight);
        }
    }
    let mix = MixtureDensity::new(p0, p1)?;
    let half_coefs = |own: &TargetDensity, ys: &[f64]| -> Vec<f64> {
        let scale = 0.5 / ys.len() as f64;
        ys.iter().map(|&y| scale * (own.eval(y) / mix.eval(y)).ln()).collect()
    };
    let mut coef0 = half_coefs(p0, y0);
    let mut coef1 = half_coefs(p1, y1);
    let raw: f64 = coef0.iter().zip(m0).map(|(c, m)| c * m).sum::<f64>()
        + coef1.iter().zip(m1).map(|(c, m)| c * m).sum::<f64>();
    let value = if raw > 0.0 {
        raw
    } else {
        coef0.iter_mut().chain(coef1.iter_mut()).for_each(|c| *c = 0.0);
        0.0
    };
    Ok(JsEstimate {
        value,
        raw,
        coef0,
        coef1,
    })
}

/// `Σ m_i y_i / Σ m_i`.
pub fn weighted_mean(y: &[f64], m: &[f64]) -> Result<f64> {
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalWeight);
    }
    Ok(y.iter().zip(m).map(|(y, m)| y * m).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn pmf_uniform_weights() {
        let p = fit_discrete(&[0, 0, 1, 1], &[1.0; 4], 2).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-12);
        assert!((p.probs[1] - 0.5).abs() < 1e-12);
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_single_effective_sample() {
        let p = fit_discrete(&[0, 0, 1, 1], &[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert!((p.probs[0] - 1.0).abs() < 1e-8);
        assert!(p.probs[1] < 1e-8 && p.probs[1] > 0.0);
    }

    #[test]
    fn pmf_weighted_counts() {
        // class 0 gets 0.5 + 0.5, class 1 gets 1 + 0
        let p = fit_discrete(&[0, 0, 1, 1], &[0.5, 0.5, 1.0, 0.0], 2).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-12);
        assert!((p.probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pmf_errors() {
        assert!(matches!(fit_discrete(&[0, 1], &[0.0, 0.0], 2), Err(Error::ZeroTotalWeight)));
        assert!(matches!(fit_discrete(&[0, 3], &[1.0, 1.0], 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn kde_equal_weights_use_n() {
        let y: Vec<f64> = (0..50).map(|i| i as f64 / 7.0).collect();
        let k = fit_kde(&y, &vec![0.3; 50]).unwrap();
        assert!((k.n_eff - 50.0).abs() < 1e-9);
        let mean = y.iter().sum::<f64>() / 50.0;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0).sqrt();
        assert!((k.bandwidth - 50f64.powf(-0.2) * sd).abs() < 1e-12);
    }

    #[test]
    fn kde_degenerate_support() {
        let k = fit_kde(&[2.0, 5.0], &[1.0, 1e-12]).unwrap();
        assert!((k.n_eff - 1.0).abs() < 1e-9);
        let k = fit_kde(&[2.0, 5.0], &[1.0, 0.0]).unwrap();
        assert!(k.degenerate);
        assert_eq!(k.centers, vec![2.0]);
        assert!((k.bandwidth - 3e-6).abs() < 1e-18);
        assert!(matches!(fit_kde(&[1.0], &[0.0]), Err(Error::ZeroTotalWeight)));
    }

    #[test]
    fn kde_standard_normal_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let k = fit_kde(&y, &vec![1.0; 1000]).unwrap();
        assert!((k.density(0.0) - 0.3989).abs() < 0.05);
    }

    #[test]
    fn kde_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..300).map(|_| rng.gen_range(-2.0..5.0)).collect();
        let m: Vec<f64> = (0..300).map(|_| rng.gen_range(0.0..1.0)).collect();
        let k = fit_kde(&y, &m).unwrap();
        let lo = k.centers[0] - 6.0 * k.bandwidth;
        let hi = k.centers[k.centers.len() - 1] + 6.0 * k.bandwidth;
        let steps = 20_000;
        let dx = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for s in 0..=steps {
            let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
            integral += w * k.density(lo + s as f64 * dx);
        }
        integral *= dx;
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
    }

    #[test]
    fn refit_is_bitwise_stable() {
        let y = [0.3, -1.2, 4.4, 2.0, 0.1];
        let m = [0.2, 0.9, 0.5, 0.7, 0.05];
        assert_eq!(fit_kde(&y, &m).unwrap(), fit_kde(&y, &m).unwrap());
    }

    #[test]
    fn js_identical_is_zero() {
        let p = TargetDensity::Discrete(fit_discrete(&[0, 1, 1], &[1.0; 3], 2).unwrap());
        let y0 = [0.0, 1.0, 1.0];
        let est = js_divergence(&p, &p, &y0, &[1.0; 3], &y0, &[1.0; 3]).unwrap();
        assert!(est.value.abs() < 1e-10);
        assert!(js_pmf(&[0.3, 0.7], &[0.3, 0.7]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn js_disjoint_supports_is_ln2() {
        let y0 = [0.0; 4];
        let y1 = [1.0; 4];
        let l0 = [0usize; 4];
        let l1 = [1usize; 4];
        let p0 = TargetDensity::Discrete(fit_discrete(&l0, &[1.0; 4], 2).unwrap());
        let p1 = TargetDensity::Discrete(fit_discrete(&l1, &[1.0; 4], 2).unwrap());
        let est = js_divergence(&p0, &p1, &y0, &[1.0; 4], &y1, &[1.0; 4]).unwrap();
        assert!((est.value - LN_2).abs() < 1e-6);
        assert!((js_pmf(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn js_half_vs_point_mass() {
        assert!((js_pmf(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.2158).abs() < 1e-4);
        // same value from samples that realize the PMFs exactly
        let l0 = [0usize, 1];
        let l1 = [0usize, 0];
        let p0 = TargetDensity::Discrete(fit_discrete(&l0, &[1.0; 2], 2).unwrap());
        let p1 = TargetDensity::Discrete(fit_discrete(&l1, &[1.0; 2], 2).unwrap());
        let est = js_divergence(&p0, &p1, &[0.0, 1.0], &[1.0; 2], &[0.0, 0.0], &[1.0; 2]).unwrap();
        assert!((est.value - 0.2158).abs() < 1e-4);
    }

    #[test]
    fn js_coefficients_are_the_gradient() {
        let l0 = [0usize, 1, 2, 1];
        let l1 = [2usize, 2, 0, 1, 2];
        let m0 = [0.9, 0.4, 0.2, 0.7];
        let m1 = [0.3, 0.8, 0.5, 0.1, 0.6];
        let p0 = TargetDensity::Discrete(fit_discrete(&l0, &m0, 3).unwrap());
        let p1 = TargetDensity::Discrete(fit_discrete(&l1, &m1, 3).unwrap());
        let y0: Vec<f64> = l0.iter().map(|&l| l as f64).collect();
        let y1: Vec<f64> = l1.iter().map(|&l| l as f64).collect();
        let base = js_divergence(&p0, &p1, &y0, &m0, &y1, &m1).unwrap();
        let h = 1e-6;
        for i in 0..m0.len() {
            let mut mp = m0;
            mp[i] += h;
            let up = js_divergence(&p0, &p1, &y0, &mp, &y1, &m1).unwrap().value;
            assert!(((up - base.value) / h - base.coef0[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn js_rejects_mixed_kinds() {
        let p0 = TargetDensity::Discrete(fit_discrete(&[0], &[1.0], 1).unwrap());
        let p1 = TargetDensity::Continuous(fit_kde(&[0.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(matches!(
            js_divergence(&p0, &p1, &[0.0], &[1.0], &[0.0], &[1.0]),
            Err(Error::TaskMismatch)
        ));
    }

    #[test]
    fn weighted_kde_js_is_nonnegative_for_separated_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y0: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y1: Vec<f64> = (0..200)
            .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 4.0 + z })
            .collect();
        let m = vec![1.0; 200];
        let p0 = TargetDensity::Continuous(fit_kde(&y0, &m).unwrap());
        let p1 = TargetDensity::Continuous(fit_kde(&y1, &m).unwrap());
        let est = js_divergence(&p0, &p1, &y0, &m, &y1, &m).unwrap();
        assert!(est.value > 0.6 && est.value < LN_2 + 0.05, "{}", est.value);
    }

    proptest! {
        #[test]
        fn js_symmetric_and_bounded(raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8)) {
            let sp: f64 = raw.iter().map(|r| r.0).sum();
            let sq: f64 = raw.iter().map(|r| r.1).sum();
            prop_assume!(sp > 1e-6 && sq > 1e-6);
            let p: Vec<f64> = raw.iter().map(|r| r.0 / sp).collect();
            let q: Vec<f64> = raw.iter().map(|r| r.1 / sq).collect();
            let a = js_pmf(&p, &q).unwrap();
            let b = js_pmf(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0 && a <= LN_2 + 1e-9);
        }
    }
}
