//! Conjunctive box rules: the hard rule `∧_j 1(a_j < x_j < b_j)` and its
//! differentiable relaxation, a weighted harmonic mean of sigmoid-pair
//! interval predicates.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Logits are clamped to this magnitude before exponentiation.
pub const LOGIT_CLAMP: f64 = 30.0;
/// Default weight below which a feature is dropped during extraction.
pub const WEIGHT_EPS: f64 = 1e-3;
/// Default minimum fraction of observed values a kept condition must exclude.
pub const VACUOUS_MARGIN: f64 = 0.01;

/// `exp(z)` with `z` clamped to `±LOGIT_CLAMP`; the second value is `d exp/dz`
/// (zero in the clamped region).
#[inline]
fn clamped_exp(z: f64) -> (f64, f64) {
    if z > LOGIT_CLAMP {
        (LOGIT_CLAMP.exp(), 0.0)
    } else if z < -LOGIT_CLAMP {
        ((-LOGIT_CLAMP).exp(), 0.0)
    } else {
        let e = z.exp();
        (e, e)
    }
}

/// Value and partial derivatives `(π, ∂π/∂a, ∂π/∂b)` of the soft interval predicate.
#[inline]
pub(crate) fn predicate_with_grad(x: f64, a: f64, b: f64, t: f64) -> (f64, f64, f64) {
    let (u, du) = clamped_exp(-(x - a) / t);
    let (v, dv) = clamped_exp(-(b - x) / t);
    let p = 1.0 / (1.0 + u + v);
    let p2 = p * p;
    // ∂u/∂a = u/t, ∂v/∂b = -v/t
    (p, -p2 * du / t, p2 * dv / t)
}

/// Soft version of `1(a < x < b)`: `1 / (1 + e^{-(x-a)/t} + e^{-(b-x)/t})`.
pub fn soft_predicate(x: f64, a: f64, b: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTemperature(t));
    }
    Ok(predicate_with_grad(x, a, b, t).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftRule {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Unconstrained weight parameters; the conjunction uses `max(0, rho_j)`.
    pub rho: Vec<f64>,
    pub t: f64,
}

impl SoftRule {
    pub fn new(a: Vec<f64>, b: Vec<f64>, rho: Vec<f64>, t: f64) -> Result<Self> {
        if a.len() != b.len() || a.len() != rho.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: if a.len() != b.len() { b.len() } else { rho.len() },
            });
        }
        if !(t > 0.0) {
            return Err(Error::NonPositiveTemperature(t));
        }
        Ok(Self { a, b, rho, t })
    }

    /// Thresholds at the 15th/85th percentile of every feature with ±2% range
    /// jitter, all weights 0.5. One-hot columns start vacuous at (-0.5, 1.5).
    pub fn initialize<R: Rng + ?Sized>(ds: &Dataset, t: f64, rng: &mut R) -> Result<Self> {
        let d = ds.d();
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = ds.features().column(j).to_vec();
            col.sort_by(f64::total_cmp);
            let (min, max) = (col[0], col[col.len() - 1]);
            let range = (max - min).max(1e-12);
            let one_hot = matches!(ds.columns()[j].encoding, crate::data::FeatureEncoding::OneHot { .. });
            let (mut lo, mut hi) = if one_hot {
                (-0.5, 1.5)
            } else {
                (quantile_sorted(&col, 0.15), quantile_sorted(&col, 0.85))
            };
            if hi - lo < 0.05 * range {
                // heavy ties: start from the full observed range instead
                lo = min - 0.05 * range;
                hi = max + 0.05 * range;
            }
            lo += rng.gen_range(-0.02..=0.02) * range;
            hi += rng.gen_range(-0.02..=0.02) * range;
            a.push(lo);
            b.push(hi);
        }
        Self::new(a, b, vec![0.5; d], t)
    }

    /// Random sub-box for restarts: each numeric feature gets an interval
    /// spanning a uniform 30-90% of its quantile range at a random offset.
    pub fn initialize_random<R: Rng + ?Sized>(ds: &Dataset, t: f64, rng: &mut R) -> Result<Self> {
        let d = ds.d();
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        for j in 0..d {
            let (lo, hi) = if is_one_hot(ds, j) { (-0.5, 1.5) } else { random_interval(ds, j, rng) };
            a.push(lo);
            b.push(hi);
        }
        Self::new(a, b, vec![0.5; d], t)
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.rho[j].max(0.0)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r.max(0.0)).collect()
    }
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn is_one_hot(ds: &Dataset, j: usize) -> bool {
    matches!(ds.columns()[j].encoding, crate::data::FeatureEncoding::OneHot { .. })
}

/// Interval over a uniform 30-90% quantile span of column `j`.
fn random_interval<R: Rng + ?Sized>(ds: &Dataset, j: usize, rng: &mut R) -> (f64, f64) {
    let mut col: Vec<f64> = ds.features().column(j).to_vec();
    col.sort_by(f64::total_cmp);
    let width = rng.gen_range(0.3..=0.9);
    let lo_q = rng.gen_range(0.0..=1.0 - width);
    let (lo, hi) = (quantile_sorted(&col, lo_q), quantile_sorted(&col, lo_q + width));
    if hi - lo < 1e-9 {
        let range = (col[col.len() - 1] - col[0]).max(1e-12);
        (col[0] - 0.05 * range, col[col.len() - 1] + 0.05 * range)
    } else {
        (lo, hi)
    }
}

/// Weighted harmonic mean of the soft predicates over features with positive weight.
pub fn soft_membership(rule: &SoftRule, x: &[f64]) -> Result<f64> {
    if x.len() != rule.d() {
        return Err(Error::DimensionMismatch {
            expected: rule.d(),
            found: x.len(),
        });
    }
    if !(rule.t > 0.0) {
        return Err(Error::NonPositiveTemperature(rule.t));
    }
    let mut wsum = 0.0;
    let mut denom = 0.0;
    for j in 0..rule.d() {
        let w = rule.weight(j);
        if w > 0.0 {
            let p = predicate_with_grad(x[j], rule.a[j], rule.b[j], rule.t).0;
            wsum += w;
            denom += w / p;
        }
    }
    if wsum == 0.0 {
        return Err(Error::AllWeightsZero);
    }
    Ok(wsum / denom)
}

/// Memberships of every row plus their Jacobians with respect to `a`, `b`, `rho`.
#[derive(Clone, Debug)]
pub struct MembershipBatch {
    pub m: Vec<f64>,
    pub dm_da: Array2<f64>,
    pub dm_db: Array2<f64>,
    pub dm_drho: Array2<f64>,
}

impl MembershipBatch {
    /// Chains per-row loss sensitivities `dl_dm` through the Jacobians.
    pub fn pullback(&self, dl_dm: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.dm_da.ncols();
        let mut ga = vec![0.0; d];
        let mut gb = vec![0.0; d];
        let mut gr = vec![0.0; d];
        for (i, &g) in dl_dm.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let (ra, rb, rr) = (self.dm_da.row(i), self.dm_db.row(i), self.dm_drho.row(i));
            for j in 0..d {
                ga[j] += g * ra[j];
                gb[j] += g * rb[j];
                gr[j] += g * rr[j];
            }
        }
        (ga, gb, gr)
    }
}

/// Evaluates the soft rule on every row of `ds` with analytic gradients.
pub fn membership_batch(rule: &SoftRule, ds: &Dataset) -> Result<MembershipBatch> {
    let d = rule.d();
    if ds.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: ds.d(),
        });
    }
    if !(rule.t > 0.0) {
        return Err(Error::NonPositiveTemperature(rule.t));
    }
    let w = rule.weights();
    let wsum: f64 = w.iter().sum();
    if wsum == 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let n = ds.n();
    let mut m = vec![0.0; n];
    let mut dm_da = Array2::zeros((n, d));
    let mut dm_db = Array2::zeros((n, d));
    let mut dm_drho = Array2::zeros((n, d));
    let mut p = vec![0.0; d];
    let mut pa = vec![0.0; d];
    let mut pb = vec![0.0; d];
    for i in 0..n {
        let x = ds.row(i);
        let mut denom = 0.0;
        for j in 0..d {
            if w[j] > 0.0 {
                let (pj, da, db) = predicate_with_grad(x[j], rule.a[j], rule.b[j], rule.t);
                p[j] = pj;
                pa[j] = da;
                pb[j] = db;
                denom += w[j] / pj;
            }
        }
        let s = wsum / denom;
        m[i] = s;
        for j in 0..d {
            if w[j] > 0.0 {
                // ∂s/∂π_j = s² w_j / (W π_j²);  ∂s/∂w_j = (s/W)(1 - s/π_j)
                let ds_dp = s * s * w[j] / (wsum * p[j] * p[j]);
                dm_da[[i, j]] = ds_dp * pa[j];
                dm_db[[i, j]] = ds_dp * pb[j];
                dm_drho[[i, j]] = (s / wsum) * (1.0 - s / p[j]);
            }
        }
    }
    Ok(MembershipBatch {
        m,
        dm_da,
        dm_db,
        dm_drho,
    })
}

mod bound {
    //! `±inf` bounds serialize as `null`.
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn lower<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    pub fn upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// `lo < x < hi` on one feature, in the feature's original units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Encoded feature name, used to bind the rule to other datasets.
    pub feature: String,
    pub index: usize,
    #[serde(serialize_with = "bound::serialize", deserialize_with = "bound::lower")]
    pub lo: f64,
    #[serde(serialize_with = "bound::serialize", deserialize_with = "bound::upper")]
    pub hi: f64,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HardRule {
    pub conditions: Vec<Condition>,
    pub text: String,
}

impl HardRule {
    pub fn new(conditions: Vec<Condition>) -> Self {
        let text = if conditions.is_empty() {
            "(all)".to_string()
        } else {
            conditions
                .iter()
                .map(|c| c.text.as_str())
                .collect::<Vec<_>>()
                .join(" & ")
        };
        Self { conditions, text }
    }

    /// Builds a rule from encoded-unit intervals on `ds`'s features.
    pub fn from_intervals(ds: &Dataset, intervals: &[(usize, f64, f64)]) -> Result<Self> {
        let mut conditions = Vec::new();
        for &(j, lo, hi) in intervals {
            let dec = ds.decode_interval(j, lo, hi)?;
            let info = &ds.columns()[j];
            conditions.push(Condition {
                feature: info.name.clone(),
                index: j,
                lo: dec.lo.unwrap_or(f64::NEG_INFINITY),
                hi: dec.hi.unwrap_or(f64::INFINITY),
                text: dec.text,
            });
        }
        Ok(Self::new(conditions))
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Active feature indices.
    pub fn active(&self) -> Vec<usize> {
        self.conditions.iter().map(|c| c.index).collect()
    }

    /// 0/1 membership of every row, matching features by name.
    pub fn membership(&self, ds: &Dataset) -> Result<Vec<bool>> {
        let mut cols = Vec::with_capacity(self.conditions.len());
        for c in &self.conditions {
            let j = ds
                .feature_index(&c.feature)
                .ok_or_else(|| Error::SchemaMismatch(format!("rule feature `{}` not in dataset", c.feature)))?;
            cols.push(j);
        }
        Ok((0..ds.n())
            .map(|i| {
                self.conditions.iter().zip(&cols).all(|(c, &j)| {
                    let v = ds.original_value(i, j);
                    c.lo < v && v < c.hi
                })
            })
            .collect())
    }
}

/// Extracts a hard rule: keeps features with weight above `weight_eps` whose
/// interval excludes at least `vacuous_margin` of the observed values.
/// Bounds beyond the observed range are dropped (open side).
pub fn harden(rule: &SoftRule, weight_eps: f64, vacuous_margin: f64, ds: &Dataset) -> Result<HardRule> {
    if ds.d() != rule.d() {
        return Err(Error::DimensionMismatch {
            expected: rule.d(),
            found: ds.d(),
        });
    }
    let n = ds.n() as f64;
    let mut intervals = Vec::new();
    for j in 0..rule.d() {
        if rule.weight(j) <= weight_eps {
            continue;
        }
        let (a, b) = (rule.a[j], rule.b[j]);
        let col = ds.features().column(j);
        let excluded = col.iter().filter(|&&v| !(a < v && v < b)).count() as f64;
        if excluded / n < vacuous_margin {
            continue;
        }
        intervals.push((j, a, b));
    }
    HardRule::from_intervals(ds, &intervals)
}
