//! The training objective `L = G_γ · (±E) − λ C` and its gradient with
//! respect to the soft rule parameters.
//!
//! Target densities, subgroup means and the local divergences `c_i` are
//! fitted into a [`TargetSnapshot`] every few epochs and held constant in
//! between. Within one snapshot, `E` and `C` are linear in the memberships,
//! so the loss is cheap to evaluate and its gradient is exact.

use serde::{Deserialize, Serialize};

use crate::data::{group_slices, Dataset, Target};
use crate::densities::{fit_discrete, fit_kde, weighted_mean, TargetDensity};
use crate::error::{Error, Result};
use crate::forest::{
    local_divergence_continuous_from, local_divergence_discrete_from, ForestModel, LocalDivergence, Task,
};
use crate::rules::{membership_batch, MembershipBatch, SoftRule};

/// Floor on group-mean coverage inside the generality gradient.
const COVERAGE_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Regions where the populations differ most.
    #[default]
    Maximize,
    /// Regions where the populations agree (`D = −D_JS`).
    Minimize,
}

/// How `Σ m_i c_i` is normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateNorm {
    /// `(1/n) Σ m_i c_i`
    #[default]
    Mean,
    /// `Σ m_i c_i`
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub direction: Direction,
    pub covariate_norm: CovariateNorm,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            lambda: 0.5,
            direction: Direction::Maximize,
            covariate_norm: CovariateNorm::Mean,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveState {
    pub generality: f64,
    /// Clamped exceptionality estimate (always >= 0).
    pub exceptionality: f64,
    pub exceptionality_raw: f64,
    pub covariate_dep: f64,
    pub loss: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
    pub grad_rho: Vec<f64>,
}

/// Generality value and `∂G/∂m_i` per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Generality {
    pub value: f64,
    pub coef: Vec<f64>,
}

/// `G = (mean_{A=0} m · mean_{A=1} m)^{γ/2}`.
pub fn generality(m: &[f64], ds: &Dataset, gamma: f64) -> Result<Generality> {
    if m.len() != ds.n() {
        return Err(Error::LengthMismatch {
            left: m.len(),
            right: ds.n(),
        });
    }
    let attr = ds.attribute();
    let (mut s0, mut s1) = (0.0, 0.0);
    for (&mi, &a) in m.iter().zip(attr) {
        if a {
            s1 += mi;
        } else {
            s0 += mi;
        }
    }
    let (n0, n1) = (ds.n0() as f64, ds.n1() as f64);
    let (mu0, mu1) = (s0 / n0, s1 / n1);
    if gamma == 0.0 {
        return Ok(Generality {
            value: 1.0,
            coef: vec![0.0; m.len()],
        });
    }
    let value = (mu0 * mu1).powf(gamma / 2.0);
    let c0 = 0.5 * gamma * value / (mu0.max(COVERAGE_FLOOR) * n0);
    let c1 = 0.5 * gamma * value / (mu1.max(COVERAGE_FLOOR) * n1);
    let coef = attr.iter().map(|&a| if a { c1 } else { c0 }).collect();
    Ok(Generality { value, coef })
}

/// Forest predictions for every row, computed once per run.
#[derive(Clone, Debug, PartialEq)]
pub enum CovariateModel {
    ClassProbs(Vec<Vec<f64>>),
    Means(Vec<f64>),
}

impl CovariateModel {
    pub fn from_forest(forest: &ForestModel, ds: &Dataset) -> Result<Self> {
        let expected = Task::for_target(ds.target());
        if forest.task != expected {
            return Err(Error::TaskMismatch);
        }
        let preds = forest.predict(ds);
        Ok(match forest.task {
            Task::Classify => CovariateModel::ClassProbs(preds),
            Task::Regress => CovariateModel::Means(preds.into_iter().map(|p| p[0]).collect()),
        })
    }

    /// Constant predictor: every row predicts `value` (continuous targets).
    pub fn constant(n: usize, value: f64) -> Self {
        CovariateModel::Means(vec![value; n])
    }
}

/// Everything held fixed between density refits.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSnapshot {
    pub p0: TargetDensity,
    pub p1: TargetDensity,
    /// Membership-weighted target means of each group.
    pub mean0: f64,
    pub mean1: f64,
    /// `∂E/∂m_i` per row (row order), before clamping.
    pub js_coef: Vec<f64>,
    pub local: LocalDivergence,
    /// Epoch at which the snapshot was fitted.
    pub epoch: usize,
}

impl TargetSnapshot {
    /// Fits both group densities with weights `m` and precomputes the
    /// per-row coefficients of `E` and `C`.
    pub fn fit(ds: &Dataset, m: &[f64], covariates: &CovariateModel, epoch: usize) -> Result<Self> {
        if m.len() != ds.n() {
            return Err(Error::LengthMismatch {
                left: m.len(),
                right: ds.n(),
            });
        }
        let (g0, g1) = group_slices(ds);
        let pick = |idx: &[usize], v: &dyn Fn(usize) -> f64| idx.iter().map(|&i| v(i)).collect::<Vec<f64>>();
        let m0 = pick(&g0, &|i| m[i]);
        let m1 = pick(&g1, &|i| m[i]);
        let y0 = pick(&g0, &|i| ds.target().value(i));
        let y1 = pick(&g1, &|i| ds.target().value(i));

        let (p0, p1) = match ds.target() {
            Target::Discrete { labels, n_classes } => {
                let l0: Vec<usize> = g0.iter().map(|&i| labels[i]).collect();
                let l1: Vec<usize> = g1.iter().map(|&i| labels[i]).collect();
                (
                    TargetDensity::Discrete(fit_discrete(&l0, &m0, *n_classes)?),
                    TargetDensity::Discrete(fit_discrete(&l1, &m1, *n_classes)?),
                )
            }
            Target::Continuous(_) => (
                TargetDensity::Continuous(fit_kde(&y0, &m0)?),
                TargetDensity::Continuous(fit_kde(&y1, &m1)?),
            ),
        };
        let mean0 = weighted_mean(&y0, &m0)?;
        let mean1 = weighted_mean(&y1, &m1)?;

        let js_coef = js_coefficients(ds, &p0, &p1, &g0, &g1);

        let local = match (covariates, &p0, &p1) {
            (CovariateModel::ClassProbs(probs), TargetDensity::Discrete(q0), TargetDensity::Discrete(q1)) => {
                local_divergence_discrete_from(probs, ds.attribute(), q0, q1)?
            }
            (CovariateModel::Means(preds), TargetDensity::Continuous(_), TargetDensity::Continuous(_)) => {
                local_divergence_continuous_from(preds, ds.attribute(), mean0, mean1)?
            }
            _ => return Err(Error::TaskMismatch),
        };
        Ok(Self {
            p0,
            p1,
            mean0,
            mean1,
            js_coef,
            local,
            epoch,
        })
    }
}

/// `∂E/∂m_i = ½ log(p_a(y_i)/mix(y_i)) / n_a`, independent of `m` for fixed densities.
fn js_coefficients(
    ds: &Dataset,
    p0: &TargetDensity,
    p1: &TargetDensity,
    g0: &[usize],
    g1: &[usize],
) -> Vec<f64> {
    let mut coef = vec![0.0; ds.n()];
    for (idx, own) in [(g0, p0), (g1, p1)] {
        let scale = 0.5 / idx.len() as f64;
        for &i in idx {
            let y = ds.target().value(i);
            let mix = 0.5 * (p0.eval(y) + p1.eval(y));
            coef[i] = scale * (own.eval(y) / mix).ln();
        }
    }
    coef
}

/// Assembles the objective from a membership batch and a snapshot.
pub fn evaluate(
    mb: &MembershipBatch,
    ds: &Dataset,
    cfg: &ObjectiveConfig,
    snapshot: &TargetSnapshot,
) -> Result<ObjectiveState> {
    let n = ds.n();
    if mb.m.len() != n || snapshot.js_coef.len() != n {
        return Err(Error::LengthMismatch {
            left: mb.m.len(),
            right: n,
        });
    }
    let g = generality(&mb.m, ds, cfg.gamma)?;
    let e_raw: f64 = mb.m.iter().zip(&snapshot.js_coef).map(|(m, c)| m * c).sum();
    let clamped = e_raw <= 0.0;
    let e = e_raw.max(0.0);
    let sign = match cfg.direction {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let norm = match cfg.covariate_norm {
        CovariateNorm::Mean => 1.0 / n as f64,
        CovariateNorm::Sum => 1.0,
    };
    let c_val = norm * mb.m.iter().zip(&snapshot.local.c).map(|(m, c)| m * c).sum::<f64>();
    let loss = g.value * sign * e - cfg.lambda * c_val;

    let dl_dm: Vec<f64> = (0..n)
        .map(|i| {
            let de = if clamped { 0.0 } else { snapshot.js_coef[i] };
            g.coef[i] * sign * e + g.value * sign * de - cfg.lambda * norm * snapshot.local.c[i]
        })
        .collect();
    let (grad_a, grad_b, grad_rho) = mb.pullback(&dl_dm);
    Ok(ObjectiveState {
        generality: g.value,
        exceptionality: e,
        exceptionality_raw: e_raw,
        covariate_dep: c_val,
        loss,
        grad_a,
        grad_b,
        grad_rho,
    })
}

/// Loss and gradient for `rule` at `epoch`, refusing snapshots older than `max_age` epochs.
pub fn loss_and_grad(
    rule: &SoftRule,
    ds: &Dataset,
    cfg: &ObjectiveConfig,
    snapshot: &TargetSnapshot,
    epoch: usize,
    max_age: usize,
) -> Result<ObjectiveState> {
    let age = epoch.saturating_sub(snapshot.epoch);
    if age > max_age {
        return Err(Error::StaleDensities { age, max: max_age });
    }
    let mb = membership_batch(rule, ds)?;
    evaluate(&mb, ds, cfg, snapshot)
}

/// Exceptionality of a hard 0/1 membership with freshly fitted densities.
/// Returns 0 when the subgroup is empty in either group.
pub fn hard_exceptionality(ds: &Dataset, member: &[bool]) -> Result<f64> {
    let m: Vec<f64> = member.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (g0, g1) = group_slices(ds);
    if g0.iter().all(|&i| !member[i]) || g1.iter().all(|&i| !member[i]) {
        return Ok(0.0);
    }
    let snap = match TargetSnapshot::fit(ds, &m, &CovariateModel::constant_for(ds), 0) {
        Ok(s) => s,
        Err(Error::ZeroTotalWeight) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let raw: f64 = m.iter().zip(&snap.js_coef).map(|(m, c)| m * c).sum();
    Ok(raw.max(0.0))
}

impl CovariateModel {
    /// Predicts the marginal target distribution (mean) for every row.
    pub fn constant_for(ds: &Dataset) -> Self {
        match ds.target() {
            Target::Discrete { labels, n_classes } => {
                let mut p = vec![0.0; *n_classes];
                for &l in labels {
                    p[l] += 1.0 / labels.len() as f64;
                }
                CovariateModel::ClassProbs(vec![p; ds.n()])
            }
            Target::Continuous(v) => Self::constant(ds.n(), v.iter().sum::<f64>() / v.len() as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{numeric_schema, ColumnData, LoadOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ds(n: usize, d: usize, seed: u64, discrete: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
        let mut cols: Vec<ColumnData> = (0..d)
            .map(|_| ColumnData::Numeric((0..n).map(|_| rng.gen::<f64>()).collect()))
            .collect();
        cols.push(ColumnData::Attribute((0..n).map(|i| i % 2 == 1).collect()));
        if discrete {
            cols.push(ColumnData::TargetDiscrete((0..n).map(|i| (i * 7 + 3) % 3).collect()));
        } else {
            cols.push(ColumnData::TargetContinuous(
                (0..n).map(|i| rng.gen::<f64>() + (i % 2) as f64).collect(),
            ));
        }
        Dataset::from_columns(numeric_schema(&names, "a", "y", !discrete), cols, LoadOptions::default()).unwrap()
    }

    fn attr_ds(attr: Vec<bool>) -> Dataset {
        let n = attr.len();
        Dataset::from_columns(
            numeric_schema(&["x".into()], "a", "y", true),
            vec![
                ColumnData::Numeric((0..n).map(|i| i as f64).collect()),
                ColumnData::Attribute(attr),
                ColumnData::TargetContinuous(vec![0.0; n]),
            ],
            LoadOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn generality_closed_forms() {
        let ds = attr_ds(vec![false, false, false, false, true, true, true, true, true]);
        let g = generality(&[1.0; 9], &ds, 0.7).unwrap();
        assert!((g.value - 1.0).abs() < 1e-15);

        let m = [0.3, 0.1, 0.9, 0.2, 0.5, 0.5, 0.1, 0.0, 0.4];
        let g = generality(&m, &ds, 0.0).unwrap();
        assert_eq!(g.value, 1.0);
        assert!(g.coef.iter().all(|&c| c == 0.0));

        // group means 0.25 and 0.36 -> sqrt(0.09) = 0.3
        let m = [0.25, 0.25, 0.25, 0.25, 0.36, 0.36, 0.36, 0.36, 0.36];
        let g = generality(&m, &ds, 1.0).unwrap();
        assert!((g.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn generality_gradient_matches_difference_quotient() {
        let ds = attr_ds(vec![false, true, false, true, true]);
        let m = [0.2, 0.7, 0.4, 0.1, 0.9];
        let gamma = 0.4;
        let g = generality(&m, &ds, gamma).unwrap();
        let h = 1e-7;
        for i in 0..m.len() {
            let mut up = m;
            up[i] += h;
            let mut dn = m;
            dn[i] -= h;
            let fd = (generality(&up, &ds, gamma).unwrap().value - generality(&dn, &ds, gamma).unwrap().value)
                / (2.0 * h);
            assert!((fd - g.coef[i]).abs() < 1e-7);
        }
    }

    fn setup(seed: u64, discrete: bool) -> (Dataset, SoftRule, TargetSnapshot) {
        let ds = random_ds(30, 3, seed, discrete);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let rule = SoftRule::initialize(&ds, 0.2, &mut rng).unwrap();
        let mb = membership_batch(&rule, &ds).unwrap();
        let forest = crate::forest::fit_forest_with(&ds, Task::for_target(ds.target()), seed, 10).unwrap();
        let cov = CovariateModel::from_forest(&forest, &ds).unwrap();
        let snap = TargetSnapshot::fit(&ds, &mb.m, &cov, 0).unwrap();
        (ds, rule, snap)
    }

    #[test]
    fn lambda_zero_is_generality_times_exceptionality() {
        let (ds, rule, snap) = setup(1, false);
        let cfg = ObjectiveConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let s = loss_and_grad(&rule, &ds, &cfg, &snap, 0, 10).unwrap();
        assert_eq!(s.loss, s.generality * s.exceptionality);
    }

    #[test]
    fn direction_flip_negates_exceptionality_term() {
        let (ds, rule, snap) = setup(2, true);
        let max = ObjectiveConfig::default();
        let min = ObjectiveConfig {
            direction: Direction::Minimize,
            ..max
        };
        let a = loss_and_grad(&rule, &ds, &max, &snap, 0, 10).unwrap();
        let b = loss_and_grad(&rule, &ds, &min, &snap, 0, 10).unwrap();
        assert_eq!(a.generality, b.generality);
        assert_eq!(a.covariate_dep, b.covariate_dep);
        assert_eq!(a.exceptionality, b.exceptionality);
        let lc = max.lambda * a.covariate_dep;
        assert!((b.loss - (-a.generality * a.exceptionality - lc)).abs() < 1e-15);
    }

    #[test]
    fn stale_snapshot_rejected() {
        let (ds, rule, snap) = setup(3, false);
        let cfg = ObjectiveConfig::default();
        assert!(loss_and_grad(&rule, &ds, &cfg, &snap, 10, 10).is_ok());
        assert!(matches!(
            loss_and_grad(&rule, &ds, &cfg, &snap, 11, 10),
            Err(Error::StaleDensities { age: 11, max: 10 })
        ));
    }

    #[test]
    fn state_ranges() {
        for seed in 0..5 {
            for discrete in [false, true] {
                let (ds, rule, snap) = setup(seed, discrete);
                let s = loss_and_grad(&rule, &ds, &ObjectiveConfig::default(), &snap, 0, 10).unwrap();
                assert!((0.0..=1.0).contains(&s.generality));
                assert!(s.covariate_dep >= 0.0);
                assert!(s.exceptionality >= 0.0);
                assert!(s.grad_a.iter().chain(&s.grad_b).chain(&s.grad_rho).all(|g| g.is_finite()));
            }
        }
    }

    #[test]
    fn sum_normalization_scales_by_n() {
        let (ds, rule, snap) = setup(4, false);
        let mean = loss_and_grad(&rule, &ds, &ObjectiveConfig::default(), &snap, 0, 10).unwrap();
        let cfg = ObjectiveConfig {
            covariate_norm: CovariateNorm::Sum,
            ..Default::default()
        };
        let sum = loss_and_grad(&rule, &ds, &cfg, &snap, 0, 10).unwrap();
        assert!((sum.covariate_dep - mean.covariate_dep * ds.n() as f64).abs() < 1e-10);
    }

    #[test]
    fn identical_groups_have_no_exceptionality() {
        // both groups share the same targets row-for-row
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| (i / 2) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i / 2) % 5) as f64).collect();
        let ds = Dataset::from_columns(
            numeric_schema(&["x".into()], "a", "y", true),
            vec![
                ColumnData::Numeric(x),
                ColumnData::Attribute((0..n).map(|i| i % 2 == 1).collect()),
                ColumnData::TargetContinuous(y),
            ],
            LoadOptions::default(),
        )
        .unwrap();
        let rule = SoftRule::new(vec![0.2], vec![0.8], vec![1.0], 0.1).unwrap();
        let mb = membership_batch(&rule, &ds).unwrap();
        let snap = TargetSnapshot::fit(&ds, &mb.m, &CovariateModel::constant_for(&ds), 0).unwrap();
        let cfg = ObjectiveConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let s = evaluate(&mb, &ds, &cfg, &snap).unwrap();
        assert!(s.loss.abs() < 1e-12);
    }

    #[test]
    fn loss_gradient_matches_central_differences() {
        let h = 1e-6;
        for seed in 0..10 {
            for discrete in [false, true] {
                let (ds, rule, snap) = setup(seed, discrete);
                let cfg = ObjectiveConfig::default();
                let s = loss_and_grad(&rule, &ds, &cfg, &snap, 0, 10).unwrap();
                let d = ds.d();
                for j in 0..d {
                    for (which, an) in [(0, s.grad_a[j]), (1, s.grad_b[j]), (2, s.grad_rho[j])] {
                        let shifted = |delta: f64| {
                            let mut r = rule.clone();
                            match which {
                                0 => r.a[j] += delta,
                                1 => r.b[j] += delta,
                                _ => r.rho[j] += delta,
                            }
                            loss_and_grad(&r, &ds, &cfg, &snap, 0, 10).unwrap().loss
                        };
                        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                        let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-6);
                        assert!(rel < 1e-3, "seed {seed} param {which} j={j}: fd {fd} vs {an}");
                    }
                }
            }
        }
    }
}
