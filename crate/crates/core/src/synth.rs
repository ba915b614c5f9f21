//! Synthetic benchmarks with a planted two-feature box subgroup.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{numeric_schema, ColumnData, ColumnKind, ColumnSchema, Dataset, LoadOptions};
use crate::error::{Error, Result};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;
pub const COVERAGE_TOLERANCE: f64 = 0.05;
pub const ATTRIBUTE_COLUMN: &str = "a";
pub const TARGET_COLUMN: &str = "y";
pub const TRUTH_MEMBERSHIP_COLUMN: &str = "true_membership";
pub const TRUTH_EFFECT_COLUMN: &str = "true_effect";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// `P(A=1|X) = σ(β_Aᵀ X)`.
    Observational,
    /// `P(A=1) = 0.5`.
    Randomized,
    /// `P(A=1) = 0.5`, `X += μ` for `A = 1`.
    Demographic,
    /// Demographic shift of `X` with no direct effect of `A` on `Y`.
    FullMediationControl,
    /// Randomized with `τ = η = 0`.
    NullEffectControl,
}

impl Setting {
    pub const ALL: [Setting; 5] = [
        Setting::Observational,
        Setting::Randomized,
        Setting::Demographic,
        Setting::FullMediationControl,
        Setting::NullEffectControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::Observational => "observational",
            Setting::Randomized => "randomized",
            Setting::Demographic => "demographic",
            Setting::FullMediationControl => "full-mediation-control",
            Setting::NullEffectControl => "null-effect-control",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown setting `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub setting: Setting,
    pub tau: f64,
    pub eta: f64,
    pub sigma2: f64,
    pub target_coverage: f64,
    /// Half-width of the range `μ` is drawn from.
    pub mu_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 5,
            setting: Setting::Observational,
            tau: 4.0,
            eta: 1.0,
            sigma2: 0.5,
            target_coverage: 0.3,
            mu_scale: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if !(self.target_coverage > 0.0 && self.target_coverage < 1.0) {
            return bad(format!("target_coverage must lie in (0, 1), got {}", self.target_coverage));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be >= 0, got {}", self.sigma2));
        }
        if !(self.tau.is_finite() && self.eta.is_finite() && self.mu_scale.is_finite() && self.mu_scale >= 0.0) {
            return bad("tau, eta and mu_scale must be finite (mu_scale >= 0)".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub setting: Setting,
    /// Indices of the two features defining the planted box.
    pub features: [usize; 2],
    pub bounds: [(f64, f64); 2],
    pub membership: Vec<bool>,
    /// Per-row effect of `A`: `τ` inside the box, `η` outside.
    pub effect: Vec<f64>,
    pub coverage: f64,
    pub placement_attempts: usize,
    pub beta_y: Vec<f64>,
    pub beta_a: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
}

impl SynthTruth {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn in_box(x: &[Vec<f64>], i: usize, features: [usize; 2], bounds: &[(f64, f64); 2]) -> bool {
    (0..2).all(|k| {
        let v = x[features[k]][i];
        v > bounds[k].0 && v < bounds[k].1
    })
}

fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Schema of the generated CSV, truth columns included.
pub fn synth_schema(d: usize) -> Vec<ColumnSchema> {
    let mut schema = numeric_schema(&feature_names(d), ATTRIBUTE_COLUMN, TARGET_COLUMN, true);
    schema.push(ColumnSchema::new(TRUTH_MEMBERSHIP_COLUMN, ColumnKind::TruthMembership));
    schema.push(ColumnSchema::new(TRUTH_EFFECT_COLUMN, ColumnKind::TruthEffect));
    schema
}

/// Draws a dataset for `cfg.setting` together with its ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, SynthTruth)> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // column-major features
    let mut x: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
    let beta_y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();

    let (tau, eta, direct) = match cfg.setting {
        Setting::NullEffectControl => (0.0, 0.0, true),
        Setting::FullMediationControl => (0.0, 0.0, false),
        _ => (cfg.tau, cfg.eta, true),
    };

    let mut beta_a = None;
    let mut mu = None;
    let attribute: Vec<bool> = match cfg.setting {
        Setting::Observational => {
            let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let a = (0..n)
                .map(|i| {
                    let z: f64 = (0..d).map(|j| b[j] * x[j][i]).sum();
                    rng.gen_bool(sigmoid(z))
                })
                .collect();
            beta_a = Some(b);
            a
        }
        Setting::Randomized | Setting::NullEffectControl => (0..n).map(|_| rng.gen_bool(0.5)).collect(),
        Setting::Demographic | Setting::FullMediationControl => {
            let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-cfg.mu_scale..=cfg.mu_scale)).collect();
            let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            for (j, col) in x.iter_mut().enumerate() {
                for (v, &ai) in col.iter_mut().zip(&a) {
                    if ai {
                        *v += shift[j];
                    }
                }
            }
            mu = Some(shift);
            a
        }
    };

    // box placement, retried on the fixed features until coverage is close enough
    let width = cfg.target_coverage.sqrt();
    let mut placed = None;
    for attempt in 1..=MAX_PLACEMENT_ATTEMPTS {
        let f0 = rng.gen_range(0..d);
        let mut f1 = rng.gen_range(0..d - 1);
        if f1 >= f0 {
            f1 += 1;
        }
        let features = [f0, f1];
        let bounds = [0, 1].map(|_| {
            let lo = rng.gen_range(0.0..=1.0 - width);
            (lo, lo + width)
        });
        let covered = (0..n).filter(|&i| in_box(&x, i, features, &bounds)).count();
        let coverage = covered as f64 / n as f64;
        if (coverage - cfg.target_coverage).abs() <= COVERAGE_TOLERANCE {
            placed = Some((features, bounds, coverage, attempt));
            break;
        }
    }
    let (features, bounds, coverage, attempts) = placed.ok_or(Error::CoverageCalibrationFailure {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })?;
    let membership: Vec<bool> = (0..n).map(|i| in_box(&x, i, features, &bounds)).collect();

    let noise = Normal::new(0.0, cfg.sigma2.sqrt()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut y = Vec::with_capacity(n);
    let mut effect = Vec::with_capacity(n);
    for i in 0..n {
        let base: f64 = (0..d).map(|j| beta_y[j] * x[j][i]).sum();
        let size = if membership[i] { tau } else { eta };
        let sign = if attribute[i] { 0.5 } else { -0.5 };
        let direct_term = if direct { sign * size } else { 0.0 };
        y.push(base + direct_term + noise.sample(&mut rng));
        effect.push(size);
    }

    let mut cols: Vec<ColumnData> = x.into_iter().map(ColumnData::Numeric).collect();
    cols.push(ColumnData::Attribute(attribute));
    cols.push(ColumnData::TargetContinuous(y));
    cols.push(ColumnData::TruthMembership(membership.clone()));
    cols.push(ColumnData::TruthEffect(effect.clone()));
    let ds = Dataset::from_columns(synth_schema(d), cols, LoadOptions::default())?;
    let truth = SynthTruth {
        setting: cfg.setting,
        features,
        bounds,
        membership,
        effect,
        coverage,
        placement_attempts: attempts,
        beta_y,
        beta_a,
        mu,
    };
    Ok((ds, truth))
}

/// Full-mediation data: `A` shifts `X`, and `Y` depends on `X` only.
pub fn generate_full_mediation(cfg: &SynthConfig) -> Result<Dataset> {
    let cfg = SynthConfig {
        setting: Setting::FullMediationControl,
        ..cfg.clone()
    };
    generate(&cfg).map(|(ds, _)| ds)
}

/// Writes `data.csv`, `schema.json` and `truth.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, ds: &Dataset, truth: &SynthTruth) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    ds.write_csv(dir.join("data.csv"))?;
    fs::write(dir.join("schema.json"), serde_json::to_string_pretty(ds.schema())?)?;
    truth.write_json(dir.join("truth.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::subgroup_effect;

    fn cfg(setting: Setting, seed: u64) -> SynthConfig {
        SynthConfig {
            setting,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (a, ta) = generate(&cfg(Setting::Demographic, 3)).unwrap();
        let (b, tb) = generate(&cfg(Setting::Demographic, 3)).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.target(), b.target());
        assert_eq!(ta, tb);
        let (c, _) = generate(&cfg(Setting::Demographic, 4)).unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn coverage_near_target() {
        for setting in [Setting::Observational, Setting::Randomized, Setting::Demographic] {
            for seed in 0..5 {
                let (_, t) = generate(&cfg(setting, seed)).unwrap();
                assert!((0.25..=0.35).contains(&t.coverage), "{setting} seed {seed}: {}", t.coverage);
                assert!(t.bounds.iter().all(|&(lo, hi)| lo >= 0.0 && hi <= 1.0));
                assert_ne!(t.features[0], t.features[1]);
            }
        }
    }

    #[test]
    fn noiseless_oracle_effect_is_exact() {
        let c = SynthConfig {
            sigma2: 0.0,
            setting: Setting::Randomized,
            ..cfg(Setting::Randomized, 1)
        };
        let (ds, t) = generate(&c).unwrap();
        // β_Yᵀ X differs between the groups, so compare against the effect column instead
        let eff: Vec<f64> = t.effect.iter().zip(&t.membership).filter(|(_, &m)| m).map(|(e, _)| *e).collect();
        assert!(eff.iter().all(|&e| e == 4.0));
        let outside = t.effect.iter().zip(&t.membership).filter(|(_, &m)| !m).all(|(e, _)| *e == 1.0);
        assert!(outside);
        assert_eq!(ds.truth_membership().unwrap(), &t.membership[..]);
    }

    #[test]
    fn tau_equal_eta_has_constant_effect() {
        let c = SynthConfig {
            tau: 1.0,
            eta: 1.0,
            ..cfg(Setting::Randomized, 2)
        };
        let (_, t) = generate(&c).unwrap();
        assert!(t.effect.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn oracle_effect_converges() {
        let c = SynthConfig {
            n: 20000,
            ..cfg(Setting::Randomized, 7)
        };
        let (ds, t) = generate(&c).unwrap();
        let eff = subgroup_effect(&ds, &t.membership).unwrap();
        let bound = 4.0 * c.sigma2.sqrt() * (2.0 / (0.3 * c.n as f64 / 2.0)).sqrt();
        // β_Yᵀ X has the same law in both groups under randomization; its spread adds variance
        assert!((eff.tau_hat - 4.0).abs() < bound + 0.05, "{} vs bound {bound}", eff.tau_hat);
    }

    #[test]
    fn observational_overlap() {
        for (d, seed) in (0..20).flat_map(|s| [(2, s), (5, s)]) {
            let c = SynthConfig {
                d,
                n: 5000,
                ..cfg(Setting::Observational, seed)
            };
            let (ds, t) = generate(&c).unwrap();
            let b = t.beta_a.unwrap();
            let mut scored: Vec<(f64, bool)> = (0..ds.n())
                .map(|i| {
                    let z: f64 = (0..c.d).map(|j| b[j] * ds.original_value(i, j)).sum();
                    (z, ds.attribute()[i])
                })
                .collect();
            scored.sort_by(|p, q| p.0.total_cmp(&q.0));
            for bin in scored.chunks(ds.n() / 10) {
                let p = bin.iter().filter(|(_, a)| *a).count() as f64 / bin.len() as f64;
                assert!(p > 0.05 && p < 0.95, "seed {seed}: {p}");
            }
        }
    }

    /// Held-out permutation importance of `A` for a forest fit on the first half.
    fn attribute_importance(ds: &Dataset) -> f64 {
        let half = ds.n() / 2;
        let train = ds.subset(&(0..half).collect::<Vec<_>>()).unwrap();
        let test = ds.subset(&(half..ds.n()).collect::<Vec<_>>()).unwrap();
        let forest = crate::forest::fit_forest_with(&train, crate::forest::Task::Regress, 1, 30).unwrap();
        forest.permutation_importance(&test, test.d(), 2).unwrap()
    }

    #[test]
    fn full_mediation_has_no_direct_dependence() {
        let c = SynthConfig {
            n: 4000,
            ..cfg(Setting::Demographic, 11)
        };
        let mediated = attribute_importance(&generate_full_mediation(&c).unwrap());
        let (direct, _) = generate(&SynthConfig { tau: 1.0, ..c }).unwrap();
        let direct = attribute_importance(&direct);
        // a unit direct effect raises the squared error by about 1 when A is scrambled
        assert!(mediated.abs() < 0.05, "mediated importance {mediated}");
        assert!(direct > 0.3, "direct importance {direct}");
    }

    #[test]
    fn mediation_shifts_marginals_only_with_nonzero_mu() {
        let c = SynthConfig {
            n: 4000,
            ..cfg(Setting::FullMediationControl, 5)
        };
        let (ds, t) = generate(&c).unwrap();
        let by_group = |ds: &Dataset, g: bool| {
            let v: Vec<f64> = (0..ds.n()).filter(|&i| ds.attribute()[i] == g).map(|i| ds.target().value(i)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let shift: f64 = t.mu.as_ref().unwrap().iter().zip(&t.beta_y).map(|(m, b)| m * b).sum();
        let diff = by_group(&ds, true) - by_group(&ds, false);
        assert!((diff - shift).abs() < 0.1, "{diff} vs {shift}");

        let flat = SynthConfig { mu_scale: 0.0, ..c };
        let (ds, _) = generate(&flat).unwrap();
        assert!((by_group(&ds, true) - by_group(&ds, false)).abs() < 0.1);
    }

    #[test]
    fn invalid_configs() {
        assert!(generate(&SynthConfig { n: 5, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig { d: 1, ..Default::default() }).is_err());
        assert!(generate(&SynthConfig {
            target_coverage: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            sigma2: -1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn setting_names_round_trip() {
        for s in Setting::ALL {
            assert_eq!(s.name().parse::<Setting>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("nope".parse::<Setting>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, t) = generate(&SynthConfig {
            n: 50,
            ..cfg(Setting::Randomized, 1)
        })
        .unwrap();
        write_outputs(dir.path(), &ds, &t).unwrap();
        let schema: Vec<ColumnSchema> =
            serde_json::from_str(&fs::read_to_string(dir.path().join("schema.json")).unwrap()).unwrap();
        let back = crate::data::load_csv(dir.path().join("data.csv"), &schema, LoadOptions::default()).unwrap();
        for (u, v) in back.features().iter().zip(ds.features()) {
            assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        assert_eq!(back.target(), ds.target());
        assert_eq!(back.truth_effect(), ds.truth_effect());
        let tj: SynthTruth =
            serde_json::from_str(&fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
        assert_eq!(tj, t);
    }
}
