//! Scoring discovered subgroups against planted ground truth, and the
//! synthetic benchmark grid.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rules::HardRule;
use crate::synth::{generate, Setting, SynthConfig};
use crate::trainer::{discover_until, subgroup_effect, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
    pub accuracy: f64,
    /// 0 when nothing was predicted positive (see `precision_defined`).
    pub precision: f64,
    /// 0 when the truth has no positives (see `recall_defined`).
    pub recall: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

/// Confusion counts and the usual scores of `pred` against `truth`.
pub fn recovery(pred: &[bool], truth: &[bool]) -> Result<RecoveryMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(RecoveryMetrics {
        tp,
        fp,
        tn,
        fn_,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        accuracy: ratio(tp + tn, pred.len()),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        precision_defined: tp + fp > 0,
        recall_defined: tp + fn_ > 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectMetrics {
    pub tau_hat: f64,
    /// Root mean squared error of `tau_hat` against per-row true effects inside the subgroup.
    pub pehe: f64,
    pub n0: usize,
    pub n1: usize,
}

/// In-subgroup effect estimate of `rule` and its PEHE against the truth column.
pub fn effect_metrics(ds: &Dataset, rule: &HardRule) -> Result<EffectMetrics> {
    effect_metrics_for(ds, &rule.membership(ds)?)
}

pub fn effect_metrics_for(ds: &Dataset, member: &[bool]) -> Result<EffectMetrics> {
    let truth = ds.truth_effect().ok_or(Error::MissingTruth("true effect"))?;
    let eff = subgroup_effect(ds, member)?;
    let (sq, cnt) = member
        .iter()
        .zip(truth)
        .filter(|(&m, _)| m)
        .fold((0.0, 0usize), |(s, c), (_, &t)| (s + (eff.tau_hat - t).powi(2), c + 1));
    Ok(EffectMetrics {
        tau_hat: eff.tau_hat,
        pehe: (sq / cnt as f64).sqrt(),
        n0: eff.n0,
        n1: eff.n1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub settings: Vec<Setting>,
    pub taus: Vec<f64>,
    pub replicates: usize,
    /// Replicate `r` uses seed `seed + r` for both data and training.
    pub seed: u64,
    pub timeout_s: f64,
    /// Template for every cell; `setting`, `tau` and `seed` are overwritten.
    pub synth: SynthConfig,
    pub train: TrainConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            settings: vec![Setting::Observational, Setting::Randomized, Setting::Demographic],
            taus: vec![1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            replicates: 10,
            seed: 0,
            timeout_s: 600.0,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.settings.is_empty() || self.taus.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one setting and one tau".into()));
        }
        if !(self.timeout_s > 0.0) {
            return Err(Error::InvalidConfig("timeout_s must be positive".into()));
        }
        self.synth.validate()?;
        self.train.validate()
    }
}

/// One (setting, tau, replicate) run. Metric fields are `None` when the cell failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub setting: Setting,
    pub tau: f64,
    pub replicate: usize,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub tau_hat: Option<f64>,
    pub pehe: Option<f64>,
    pub runtime_s: f64,
    pub rule: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Mean and standard error of the mean; `se` is 0 for a single value.
pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSe { mean, se, n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub setting: Setting,
    pub tau: f64,
    pub failures: usize,
    pub f1: Option<MeanSe>,
    pub accuracy: Option<MeanSe>,
    pub precision: Option<MeanSe>,
    pub recall: Option<MeanSe>,
    pub pehe: Option<MeanSe>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Vec<CellSummary>,
}

/// Runs one replicate of one cell.
pub fn run_cell(grid: &GridConfig, setting: Setting, tau: f64, replicate: usize) -> BenchmarkRow {
    let start = Instant::now();
    let seed = grid.seed.wrapping_add(replicate as u64);
    let deadline = start + Duration::from_secs_f64(grid.timeout_s);
    let outcome = (|| -> Result<_> {
        let synth = SynthConfig {
            setting,
            tau,
            seed,
            ..grid.synth.clone()
        };
        let (ds, truth) = generate(&synth)?;
        let train = TrainConfig {
            seed,
            ..grid.train.clone()
        };
        let report = discover_until(&ds, &train, Some(deadline))?;
        let member = report.rule.membership(&ds)?;
        let rec = recovery(&member, &truth.membership)?;
        let eff = effect_metrics_for(&ds, &member).ok();
        Ok((rec, eff, report.rule.text))
    })();
    let runtime_s = start.elapsed().as_secs_f64();
    let mut row = BenchmarkRow {
        setting,
        tau,
        replicate,
        f1: None,
        accuracy: None,
        precision: None,
        recall: None,
        tau_hat: None,
        pehe: None,
        runtime_s,
        rule: None,
        error: None,
    };
    match outcome {
        Ok((rec, eff, text)) => {
            row.f1 = Some(rec.f1);
            row.accuracy = Some(rec.accuracy);
            row.precision = Some(rec.precision);
            row.recall = Some(rec.recall);
            row.tau_hat = eff.map(|e| e.tau_hat);
            row.pehe = eff.map(|e| e.pehe);
            row.rule = Some(text);
        }
        Err(e) => row.error = Some(format!("{}: {e}", e.kind())),
    }
    row
}

/// Runs every (setting, tau, replicate) cell; rows come back in grid order
/// whatever the thread count.
pub fn benchmark(grid: &GridConfig) -> Result<BenchmarkResult> {
    grid.validate()?;
    let jobs: Vec<(Setting, f64, usize)> = grid
        .settings
        .iter()
        .flat_map(|&s| grid.taus.iter().flat_map(move |&t| (0..grid.replicates).map(move |r| (s, t, r))))
        .collect();
    let rows: Vec<BenchmarkRow> = jobs.par_iter().map(|&(s, t, r)| run_cell(grid, s, t, r)).collect();
    let summary = summarize(&rows);
    Ok(BenchmarkResult { rows, summary })
}

pub fn summarize(rows: &[BenchmarkRow]) -> Vec<CellSummary> {
    let mut cells: Vec<(Setting, f64)> = Vec::new();
    for r in rows {
        if !cells.iter().any(|&(s, t)| s == r.setting && t == r.tau) {
            cells.push((r.setting, r.tau));
        }
    }
    cells
        .into_iter()
        .map(|(setting, tau)| {
            let cell: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.setting == setting && r.tau == tau).collect();
            let pick = |f: fn(&BenchmarkRow) -> Option<f64>| mean_se(&cell.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                setting,
                tau,
                failures: cell.iter().filter(|r| r.error.is_some()).count(),
                f1: pick(|r| r.f1),
                accuracy: pick(|r| r.accuracy),
                precision: pick(|r| r.precision),
                recall: pick(|r| r.recall),
                pehe: pick(|r| r.pehe),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Per-replicate CSV. `runtime_s` varies between runs; pass `false` to leave it out.
pub fn write_rows_csv(path: impl AsRef<Path>, rows: &[BenchmarkRow], with_runtime: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "setting", "tau", "replicate", "f1", "accuracy", "precision", "recall", "tau_hat", "pehe",
    ];
    if with_runtime {
        header.push("runtime_s");
    }
    header.push("error");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.setting.to_string(),
            format!("{:?}", r.tau),
            r.replicate.to_string(),
            opt(r.f1),
            opt(r.accuracy),
            opt(r.precision),
            opt(r.recall),
            opt(r.tau_hat),
            opt(r.pehe),
        ];
        if with_runtime {
            rec.push(format!("{:.3}", r.runtime_s));
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean ± standard error per cell.
pub fn write_summary_csv(path: impl AsRef<Path>, summary: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "setting", "tau", "n", "failures", "f1_mean", "f1_se", "accuracy_mean", "accuracy_se", "precision_mean",
        "precision_se", "recall_mean", "recall_se", "pehe_mean", "pehe_se",
    ])?;
    for c in summary {
        let ms = |m: &Option<MeanSe>| match m {
            Some(m) => [format!("{:?}", m.mean), format!("{:?}", m.se)],
            None => [String::new(), String::new()],
        };
        let mut rec = vec![
            c.setting.to_string(),
            format!("{:?}", c.tau),
            c.f1.as_ref().map_or(0, |m| m.n).to_string(),
            c.failures.to_string(),
        ];
        for m in [&c.f1, &c.accuracy, &c.precision, &c.recall, &c.pehe] {
            rec.extend(ms(m));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
