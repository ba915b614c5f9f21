//! Gradient-ascent training of a soft rule, restarts, and sequential
//! discovery of several subgroups.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target};
use crate::densities::TargetDensity;
use crate::error::{Error, Result};
use crate::forest::{fit_forest_with, Task, DEFAULT_TREES};
use crate::objective::{evaluate, hard_exceptionality, CovariateModel, ObjectiveConfig, TargetSnapshot};
use crate::rules::{harden, membership_batch, HardRule, SoftRule, VACUOUS_MARGIN, WEIGHT_EPS};

/// Smallest residual dataset on which sequential discovery keeps going.
pub const MIN_RESIDUAL_ROWS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub temp_start: f64,
    pub temp_end: f64,
    /// Fraction of epochs over which the gradient's `lambda` ramps up from 0,
    /// used by the warm-up restarts of [`discover`]. Selection and the trace
    /// always use the full `lambda`.
    pub lambda_warmup: f64,
    pub refit_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub restarts: usize,
    pub seed: u64,
    pub n_trees: usize,
    pub weight_eps: f64,
    pub vacuous_margin: f64,
    pub objective: ObjectiveConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.005,
            temp_start: 0.2,
            temp_end: 0.05,
            lambda_warmup: 0.3,
            refit_every: 10,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            restarts: 10,
            seed: 0,
            n_trees: DEFAULT_TREES,
            weight_eps: WEIGHT_EPS,
            vacuous_margin: VACUOUS_MARGIN,
            objective: ObjectiveConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.lambda_warmup) {
            return bad(format!("lambda_warmup must lie in [0, 1], got {}", self.lambda_warmup));
        }
        if !(self.temp_start > 0.0 && self.temp_end > 0.0 && self.temp_start.is_finite()) {
            return bad(format!(
                "temperatures must be positive, got {} -> {}",
                self.temp_start, self.temp_end
            ));
        }
        if self.refit_every == 0 {
            return bad("refit_every must be positive".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        if self.n_trees == 0 {
            return bad("n_trees must be positive".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        self.objective.validate()
    }

    /// Multiplier on `lambda` for the gradient at `epoch`.
    pub fn lambda_scale(&self, epoch: usize) -> f64 {
        let span = self.lambda_warmup * self.epochs as f64;
        if span <= 0.0 {
            1.0
        } else {
            (epoch as f64 / span).min(1.0)
        }
    }

    /// Temperature used at `epoch`; linear from `temp_start` to `temp_end` over all epochs.
    pub fn temperature(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.temp_end;
        }
        let frac = epoch.min(self.epochs) as f64 / self.epochs as f64;
        self.temp_start + (self.temp_end - self.temp_start) * frac
    }
}

/// Adam ascent on a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// Moves `params` uphill along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] += self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub t: f64,
    #[serde(rename = "G")]
    pub generality: f64,
    #[serde(rename = "E")]
    pub exceptionality: f64,
    #[serde(rename = "C")]
    pub covariate_dep: f64,
    pub loss: f64,
}

/// Objective terms of the selected soft iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftScores {
    pub generality: f64,
    pub exceptionality: f64,
    pub covariate_dep: f64,
    pub loss: f64,
    pub t: f64,
}

/// Outcome-difference summary for a hard subgroup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEffect {
    /// `mean(Y | A=1, S=1) − mean(Y | A=0, S=1)`.
    pub tau_hat: f64,
    pub mean0: f64,
    pub mean1: f64,
    pub n0: usize,
    pub n1: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDistributions {
    pub group0: TargetDensity,
    pub group1: TargetDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub rule: HardRule,
    pub soft_rule: SoftRule,
    pub seed: u64,
    pub best_epoch: usize,
    pub scores: SoftScores,
    /// Members of the hard rule in group 0 and group 1.
    pub n_members: [usize; 2],
    /// Fraction of each group covered by the hard rule.
    pub coverage: [f64; 2],
    /// Exceptionality of the hard subgroup with freshly fitted densities.
    pub hard_exceptionality: f64,
    pub effect: Option<SubgroupEffect>,
    /// Target distributions of the hard subgroup in each group.
    pub distributions: Option<GroupDistributions>,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

/// Fits the covariate model used by `C`, once per dataset.
pub fn covariate_model(ds: &Dataset, cfg: &TrainConfig) -> Result<CovariateModel> {
    let forest = fit_forest_with(ds, Task::for_target(ds.target()), cfg.seed, cfg.n_trees)?;
    CovariateModel::from_forest(&forest, ds)
}

struct Candidate {
    rule: SoftRule,
    scores: SoftScores,
    epoch: usize,
}

/// How a run picks its starting box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// 15th-85th percentile box on every feature.
    Quantile,
    /// Random quantile sub-box, see [`SoftRule::initialize_random`].
    RandomBox,
}

impl Init {
    /// Start and λ warm-up for restart `r`: restart 0 uses the percentile box,
    /// restarts 1, 4, 7, ... the percentile box with warm-up, the rest random
    /// boxes.
    pub fn for_restart(r: u64) -> (Self, bool) {
        match r {
            0 => (Init::Quantile, false),
            r if r % 3 == 1 => (Init::Quantile, true),
            _ => (Init::RandomBox, false),
        }
    }
}

/// One optimization run from the initialization drawn with `seed`.
pub fn train_once(
    ds: &Dataset,
    cfg: &TrainConfig,
    covariates: &CovariateModel,
    seed: u64,
    init: Init,
    deadline: Option<Instant>,
) -> Result<DiscoveryReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rule = match init {
        Init::Quantile => SoftRule::initialize(ds, cfg.temp_start, &mut rng)?,
        Init::RandomBox => SoftRule::initialize_random(ds, cfg.temp_start, &mut rng)?,
    };
    let d = ds.d();
    let mut adam = Adam::new(3 * d, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut params = vec![0.0; 3 * d];
    let mut grad = vec![0.0; 3 * d];
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    let mut warnings = Vec::new();
    let mut snapshot: Option<TargetSnapshot> = None;
    let mut best: Option<Candidate> = None;

    let consider = |best: &mut Option<Candidate>, rule: &SoftRule, scores: SoftScores, epoch: usize| {
        if best.as_ref().map_or(true, |b| scores.loss > b.scores.loss) {
            *best = Some(Candidate {
                rule: rule.clone(),
                scores,
                epoch,
            });
        }
    };

    let mut finished = true;
    for epoch in 0..cfg.epochs {
        if deadline.is_some_and(|dl| Instant::now() >= dl) {
            return Err(Error::Timeout);
        }
        rule.t = cfg.temperature(epoch);
        let mb = match membership_batch(&rule, ds) {
            Ok(mb) => mb,
            Err(Error::AllWeightsZero) => {
                warnings.push(format!("all rule weights reached zero at epoch {epoch}; stopped early"));
                finished = false;
                break;
            }
            Err(e) => return Err(e),
        };
        let refit = epoch % cfg.refit_every == 0;
        if refit {
            snapshot = Some(TargetSnapshot::fit(ds, &mb.m, covariates, epoch)?);
        }
        let snap = snapshot.as_ref().expect("snapshot fitted at epoch 0");
        let step_cfg = ObjectiveConfig {
            lambda: cfg.objective.lambda * cfg.lambda_scale(epoch),
            ..cfg.objective.clone()
        };
        let mut state = evaluate(&mb, ds, &step_cfg, snap)?;
        state.loss -= (cfg.objective.lambda - step_cfg.lambda) * state.covariate_dep;
        if !state.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(TraceEntry {
            epoch,
            t: rule.t,
            generality: state.generality,
            exceptionality: state.exceptionality,
            covariate_dep: state.covariate_dep,
            loss: state.loss,
        });
        if refit {
            consider(&mut best, &rule, scores_of(&state, rule.t), epoch);
        }

        params[..d].copy_from_slice(&rule.a);
        params[d..2 * d].copy_from_slice(&rule.b);
        params[2 * d..].copy_from_slice(&rule.rho);
        grad[..d].copy_from_slice(&state.grad_a);
        grad[d..2 * d].copy_from_slice(&state.grad_b);
        grad[2 * d..].copy_from_slice(&state.grad_rho);
        adam.ascend(&mut params, &grad);
        rule.a.copy_from_slice(&params[..d]);
        rule.b.copy_from_slice(&params[d..2 * d]);
        rule.rho.copy_from_slice(&params[2 * d..]);
    }

    if finished {
        rule.t = cfg.temperature(cfg.epochs);
        match membership_batch(&rule, ds) {
            Ok(mb) => {
                let snap = TargetSnapshot::fit(ds, &mb.m, covariates, cfg.epochs)?;
                let state = evaluate(&mb, ds, &cfg.objective, &snap)?;
                if !state.loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
                }
                trace.push(TraceEntry {
                    epoch: cfg.epochs,
                    t: rule.t,
                    generality: state.generality,
                    exceptionality: state.exceptionality,
                    covariate_dep: state.covariate_dep,
                    loss: state.loss,
                });
                consider(&mut best, &rule, scores_of(&state, rule.t), cfg.epochs);
            }
            Err(Error::AllWeightsZero) => {
                warnings.push("all rule weights reached zero after the last update".into());
            }
            Err(e) => return Err(e),
        }
    }

    let best = best.ok_or(Error::AllWeightsZero)?;
    let hard = harden(&best.rule, cfg.weight_eps, cfg.vacuous_margin, ds)?;
    finish_report(ds, hard, best.rule, best.scores, best.epoch, seed, trace, warnings)
}

fn scores_of(state: &crate::objective::ObjectiveState, t: f64) -> SoftScores {
    SoftScores {
        generality: state.generality,
        exceptionality: state.exceptionality,
        covariate_dep: state.covariate_dep,
        loss: state.loss,
        t,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    ds: &Dataset,
    rule: HardRule,
    soft_rule: SoftRule,
    scores: SoftScores,
    best_epoch: usize,
    seed: u64,
    trace: Vec<TraceEntry>,
    mut warnings: Vec<String>,
) -> Result<DiscoveryReport> {
    let member = rule.membership(ds)?;
    let mut n_members = [0usize; 2];
    for (&m, &a) in member.iter().zip(ds.attribute()) {
        if m {
            n_members[a as usize] += 1;
        }
    }
    let coverage = [
        n_members[0] as f64 / ds.n0() as f64,
        n_members[1] as f64 / ds.n1() as f64,
    ];
    let hard_e = hard_exceptionality(ds, &member)?;
    let (effect, distributions) = if n_members[0] > 0 && n_members[1] > 0 {
        let w: Vec<f64> = member.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let snap = TargetSnapshot::fit(ds, &w, &CovariateModel::constant_for(ds), 0)?;
        (
            Some(subgroup_effect(ds, &member)?),
            Some(GroupDistributions {
                group0: snap.p0,
                group1: snap.p1,
            }),
        )
    } else {
        warnings.push("hard subgroup is empty in one group".into());
        (None, None)
    };
    Ok(DiscoveryReport {
        rule,
        soft_rule,
        seed,
        best_epoch,
        scores,
        n_members,
        coverage,
        hard_exceptionality: hard_e,
        effect,
        distributions,
        trace,
        warnings,
    })
}

/// Difference in mean outcome between the groups inside the subgroup.
/// Discrete targets use their class index as the outcome value.
pub fn subgroup_effect(ds: &Dataset, member: &[bool]) -> Result<SubgroupEffect> {
    if member.len() != ds.n() {
        return Err(Error::LengthMismatch {
            left: member.len(),
            right: ds.n(),
        });
    }
    let mut sum = [0.0; 2];
    let mut cnt = [0usize; 2];
    for i in 0..ds.n() {
        if member[i] {
            let g = ds.attribute()[i] as usize;
            sum[g] += ds.target().value(i);
            cnt[g] += 1;
        }
    }
    for g in 0..2 {
        if cnt[g] == 0 {
            return Err(Error::EmptySubgroupInGroup { group: g as u8 });
        }
    }
    let mean0 = sum[0] / cnt[0] as f64;
    let mean1 = sum[1] / cnt[1] as f64;
    Ok(SubgroupEffect {
        tau_hat: mean1 - mean0,
        mean0,
        mean1,
        n0: cnt[0],
        n1: cnt[1],
    })
}

/// Runs `cfg.restarts` optimizations (seeds `seed`, `seed+1`, ...) and
/// keeps the one with the highest selected loss; ties go to the lowest seed.
/// Starts and warm-up follow [`Init::for_restart`].
pub fn discover(ds: &Dataset, cfg: &TrainConfig) -> Result<DiscoveryReport> {
    discover_until(ds, cfg, None)
}

pub fn discover_until(ds: &Dataset, cfg: &TrainConfig, deadline: Option<Instant>) -> Result<DiscoveryReport> {
    cfg.validate()?;
    let cov = covariate_model(ds, cfg)?;
    let runs: Vec<Result<DiscoveryReport>> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let (init, warm) = Init::for_restart(r);
            let run_cfg = TrainConfig {
                lambda_warmup: if warm { cfg.lambda_warmup } else { 0.0 },
                ..cfg.clone()
            };
            train_once(ds, &run_cfg, &cov, cfg.seed.wrapping_add(r), init, deadline)
        })
        .collect();
    let mut best: Option<DiscoveryReport> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().map_or(true, |b| run.scores.loss > b.scores.loss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiDiscovery {
    pub reports: Vec<DiscoveryReport>,
    /// Why discovery ended before `count` subgroups, if it did.
    pub stopped_early: Option<String>,
}

/// Finds up to `count` subgroups, removing the rows covered by each one
/// before searching for the next.
pub fn discover_multiple(ds: &Dataset, cfg: &TrainConfig, count: usize) -> Result<MultiDiscovery> {
    cfg.validate()?;
    let mut reports = Vec::new();
    let mut rows: Vec<usize> = (0..ds.n()).collect();
    let mut stopped_early = None;
    for k in 0..count {
        let residual = ds.subset(&rows)?;
        if residual.n() < MIN_RESIDUAL_ROWS {
            stopped_early = Some(format!(
                "stopped after {k} subgroup(s): {} rows remain (minimum {MIN_RESIDUAL_ROWS})",
                residual.n()
            ));
            break;
        }
        if residual.n0() == 0 || residual.n1() == 0 {
            let g = if residual.n0() == 0 { 0 } else { 1 };
            stopped_early = Some(format!("stopped after {k} subgroup(s): group {g} has no rows left"));
            break;
        }
        let mut sub_cfg = cfg.clone();
        sub_cfg.seed = cfg.seed.wrapping_add(1000 * k as u64);
        let report = discover(&residual, &sub_cfg)?;
        let member = report.rule.membership(&residual)?;
        if !member.iter().any(|&m| m) {
            stopped_early = Some(format!("stopped after {k} subgroup(s): the next rule covers no rows"));
            break;
        }
        rows = rows
            .iter()
            .zip(&member)
            .filter(|(_, &m)| !m)
            .map(|(&r, _)| r)
            .collect();
        reports.push(report);
    }
    if let Some(msg) = &stopped_early {
        log::warn!("{msg}");
    }
    Ok(MultiDiscovery { reports, stopped_early })
}

/// Target kind label used in reports.
pub fn target_kind(ds: &Dataset) -> &'static str {
    match ds.target() {
        Target::Discrete { .. } => "discrete",
        Target::Continuous(_) => "continuous",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{numeric_schema, ColumnData, LoadOptions};
    use rand::Rng;

    /// Group 1 is shifted by +3 inside x0 ∈ (0.3, 0.7).
    fn planted(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let x1: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let inside = x0[i] > 0.3 && x0[i] < 0.7;
                let shift = if inside && a[i] { 3.0 } else { 0.0 };
                shift + rng.gen::<f64>() * 0.5
            })
            .collect();
        Dataset::from_columns(
            numeric_schema(&["x0".into(), "x1".into()], "a", "y", true),
            vec![
                ColumnData::Numeric(x0),
                ColumnData::Numeric(x1),
                ColumnData::Attribute(a),
                ColumnData::TargetContinuous(y),
            ],
            LoadOptions::default(),
        )
        .unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 150,
            lr: 0.02,
            n_trees: 10,
            ..Default::default()
        }
    }

    #[test]
    fn temperature_schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.temperature(0), 0.2);
        assert!((cfg.temperature(500) - 0.05).abs() < 1e-15);
        assert!((cfg.temperature(250) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn lambda_warmup_ramps_then_holds() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lambda_scale(0), 0.0);
        assert!((cfg.lambda_scale(75) - 0.5).abs() < 1e-15);
        assert_eq!(cfg.lambda_scale(150), 1.0);
        assert_eq!(cfg.lambda_scale(499), 1.0);
        let off = TrainConfig { lambda_warmup: 0.0, ..cfg.clone() };
        assert_eq!(off.lambda_scale(0), 1.0);
        assert!(TrainConfig { lambda_warmup: 1.5, ..cfg }.validate().is_err());
    }

    #[test]
    fn restart_plan() {
        let plan: Vec<(Init, bool)> = (0..5).map(Init::for_restart).collect();
        assert_eq!(
            plan,
            [
                (Init::Quantile, false),
                (Init::Quantile, true),
                (Init::RandomBox, false),
                (Init::RandomBox, false),
                (Init::Quantile, true)
            ]
        );
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut adam = Adam::new(2, 0.1, 0.9, 0.999, 1e-8);
        let mut p = [0.0, 0.0];
        adam.ascend(&mut p, &[5.0, -0.01]);
        assert!((p[0] - 0.1).abs() < 1e-6);
        assert!((p[1] + 0.1).abs() < 1e-4);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { lr: -1.0, ..Default::default() },
            TrainConfig { refit_every: 0, ..Default::default() },
            TrainConfig { temp_end: 0.0, ..Default::default() },
            TrainConfig { restarts: 0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn recovers_planted_interval() {
        let ds = planted(400, 5);
        let rep = discover(&ds, &quick()).unwrap();
        let member = rep.rule.membership(&ds).unwrap();
        let truth: Vec<bool> = (0..ds.n())
            .map(|i| {
                let x = ds.original_value(i, 0);
                x > 0.3 && x < 0.7
            })
            .collect();
        let agree = member.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(agree as f64 / ds.n() as f64 > 0.85, "rule {}", rep.rule.text);
        assert!(rep.effect.unwrap().tau_hat > 2.0);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = planted(200, 9);
        let cfg = TrainConfig { epochs: 40, ..quick() };
        let a = discover(&ds, &cfg).unwrap();
        let b = discover(&ds, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn trace_has_one_entry_per_epoch_plus_final() {
        let ds = planted(120, 2);
        let cfg = TrainConfig { epochs: 25, ..quick() };
        let rep = discover(&ds, &cfg).unwrap();
        assert_eq!(rep.trace.len(), 26);
        assert!(rep.best_epoch % cfg.refit_every == 0 || rep.best_epoch == cfg.epochs);
        assert!(rep.trace.iter().all(|e| e.loss.is_finite()));
    }

    #[test]
    fn effect_requires_both_groups() {
        let ds = planted(60, 3);
        let member: Vec<bool> = ds.attribute().to_vec();
        assert!(matches!(
            subgroup_effect(&ds, &member),
            Err(Error::EmptySubgroupInGroup { group: 0 })
        ));
    }

    #[test]
    fn multiple_stops_on_small_data() {
        let ds = planted(80, 4);
        let cfg = TrainConfig { epochs: 30, ..quick() };
        let res = discover_multiple(&ds, &cfg, 5).unwrap();
        assert!(res.reports.len() < 5);
        assert!(res.stopped_early.is_some());
    }

    #[test]
    fn single_subgroup_request() {
        let ds = planted(100, 6);
        let cfg = TrainConfig { epochs: 20, ..quick() };
        let res = discover_multiple(&ds, &cfg, 1).unwrap();
        assert_eq!(res.reports.len(), 1);
        assert!(res.stopped_early.is_none());
    }
}
