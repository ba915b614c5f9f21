//! Random forest (bagged CART) for the conditional outcome model `f(x, a)`.
//!
//! The group attribute is appended to the features as one extra input column.
//! Classification trees split on Gini impurity and store class-probability
//! leaves; regression trees split on variance reduction and store leaf means.
//! Trees grow to purity and each one draws its randomness from a stream
//! derived from `(seed, tree index)`, so the fitted forest does not depend
//! on the number of worker threads.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target};
use crate::densities::WeightedEmpiricalPMF;
use crate::error::{Error, Result};

pub const DEFAULT_TREES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Regress,
}

impl Task {
    pub fn for_target(target: &Target) -> Self {
        if target.is_discrete() {
            Task::Classify
        } else {
            Task::Regress
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Offset into the tree's flat leaf-value buffer.
    Leaf(usize),
}

#[derive(Clone, Debug, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

impl Tree {
    fn leaf<'a>(&'a self, x: &[f64], width: usize) -> &'a [f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(off) => return &self.values[*off..*off + width],
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    pub n_trees: usize,
    pub task: Task,
    /// Number of classes (classification) or 1 (regression).
    pub n_outputs: usize,
    pub rng_seed: u64,
}

/// Training matrix: dataset features with the attribute appended as a last column.
fn design_matrix(ds: &Dataset) -> (Vec<f64>, usize) {
    let (n, d) = (ds.n(), ds.d());
    let width = d + 1;
    let mut x = Vec::with_capacity(n * width);
    for i in 0..n {
        x.extend(ds.row(i).iter());
        x.push(if ds.attribute()[i] { 1.0 } else { 0.0 });
    }
    (x, width)
}

struct Trainer<'a> {
    x: &'a [f64],
    width: usize,
    y: &'a [f64],
    task: Task,
    n_outputs: usize,
    mtry: usize,
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    pos: usize,
}

impl Trainer<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.width + j]
    }

    fn leaf_values(&self, idx: &[usize], out: &mut Vec<f64>) {
        match self.task {
            Task::Classify => {
                let start = out.len();
                out.resize(start + self.n_outputs, 0.0);
                for &i in idx {
                    out[start + self.y[i] as usize] += 1.0;
                }
                let n = idx.len() as f64;
                out[start..].iter_mut().for_each(|v| *v /= n);
            }
            Task::Regress => out.push(idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64),
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let y0 = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == y0)
    }

    /// Best split of `idx` on feature `j`, with `idx` left sorted by that feature.
    fn best_on_feature(&self, idx: &mut [usize], j: usize, scratch: &mut Vec<f64>) -> Option<Split> {
        idx.sort_by(|&l, &r| self.value(l, j).total_cmp(&self.value(r, j)).then(l.cmp(&r)));
        let n = idx.len();
        if self.value(idx[0], j) == self.value(idx[n - 1], j) {
            return None;
        }
        let mut best: Option<Split> = None;
        let mut consider = |pos: usize, gain: f64| {
            let (lv, rv) = (self.value(idx[pos - 1], j), self.value(idx[pos], j));
            if lv == rv {
                return;
            }
            if best.map_or(true, |b| gain > b.gain) {
                let mut threshold = 0.5 * (lv + rv);
                if threshold >= rv {
                    threshold = lv;
                }
                best = Some(Split {
                    feature: j,
                    threshold,
                    gain,
                    pos,
                });
            }
        };
        match self.task {
            Task::Classify => {
                let k = self.n_outputs;
                scratch.clear();
                scratch.resize(2 * k, 0.0);
                let (left, right) = scratch.split_at_mut(k);
                for &i in idx.iter() {
                    right[self.y[i] as usize] += 1.0;
                }
                let nf = n as f64;
                let gini = |c: &[f64], m: f64| 1.0 - c.iter().map(|v| (v / m) * (v / m)).sum::<f64>();
                let parent = gini(right, nf);
                let mut sq_l = 0.0;
                let mut sq_r: f64 = right.iter().map(|v| v * v).sum();
                for pos in 1..n {
                    let c = self.y[idx[pos - 1]] as usize;
                    sq_l += 2.0 * left[c] + 1.0;
                    sq_r -= 2.0 * right[c] - 1.0;
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    let (nl, nr) = (pos as f64, (n - pos) as f64);
                    let child = nl / nf * (1.0 - sq_l / (nl * nl)) + nr / nf * (1.0 - sq_r / (nr * nr));
                    consider(pos, parent - child);
                }
            }
            Task::Regress => {
                let (mut sum_r, mut sq_r) = (0.0, 0.0);
                for &i in idx.iter() {
                    sum_r += self.y[i];
                    sq_r += self.y[i] * self.y[i];
                }
                let nf = n as f64;
                let parent = sq_r / nf - (sum_r / nf).powi(2);
                let (mut sum_l, mut sq_l) = (0.0, 0.0);
                for pos in 1..n {
                    let v = self.y[idx[pos - 1]];
                    sum_l += v;
                    sq_l += v * v;
                    sum_r -= v;
                    sq_r -= v * v;
                    let (nl, nr) = (pos as f64, (n - pos) as f64);
                    let var_l = sq_l / nl - (sum_l / nl).powi(2);
                    let var_r = sq_r / nr - (sum_r / nr).powi(2);
                    consider(pos, parent - (nl / nf) * var_l - (nr / nf) * var_r);
                }
            }
        }
        best
    }

    fn grow(&self, rng: &mut ChaCha8Rng, sample: Vec<usize>) -> Tree {
        let mut tree = Tree {
            nodes: Vec::new(),
            values: Vec::new(),
        };
        let mut features: Vec<usize> = (0..self.width).collect();
        let mut scratch = Vec::new();
        // (node slot, indices)
        let mut stack = vec![(0usize, sample)];
        tree.nodes.push(Node::Leaf(0));
        while let Some((slot, mut idx)) = stack.pop() {
            let split = if idx.len() < 2 || self.is_pure(&idx) {
                None
            } else {
                self.find_split(rng, &mut idx, &mut features, &mut scratch)
            };
            match split {
                None => {
                    let off = tree.values.len();
                    self.leaf_values(&idx, &mut tree.values);
                    tree.nodes[slot] = Node::Leaf(off);
                }
                Some(s) => {
                    idx.sort_by(|&l, &r| {
                        self.value(l, s.feature)
                            .total_cmp(&self.value(r, s.feature))
                            .then(l.cmp(&r))
                    });
                    let right_idx = idx.split_off(s.pos);
                    let left = tree.nodes.len();
                    tree.nodes.push(Node::Leaf(0));
                    let right = tree.nodes.len();
                    tree.nodes.push(Node::Leaf(0));
                    tree.nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    stack.push((right, right_idx));
                    stack.push((left, idx));
                }
            }
        }
        tree
    }

    /// Draws features without replacement until `mtry` non-constant ones were
    /// evaluated. Ties in gain go to the lowest feature index, then the lowest
    /// threshold.
    fn find_split(
        &self,
        rng: &mut ChaCha8Rng,
        idx: &mut [usize],
        features: &mut [usize],
        scratch: &mut Vec<f64>,
    ) -> Option<Split> {
        features.shuffle(rng);
        let mut evaluated = 0;
        let mut best: Option<Split> = None;
        for &j in features.iter() {
            if evaluated == self.mtry {
                break;
            }
            let Some(s) = self.best_on_feature(idx, j, scratch) else {
                continue;
            };
            evaluated += 1;
            let better = match best {
                None => true,
                Some(b) => {
                    s.gain > b.gain
                        || (s.gain == b.gain
                            && (s.feature < b.feature || (s.feature == b.feature && s.threshold < b.threshold)))
                }
            };
            if better {
                best = Some(s);
            }
        }
        best
    }
}

/// Fits `DEFAULT_TREES` bootstrap trees on `(X, A) -> Y`.
pub fn fit_forest(ds: &Dataset, task: Task, seed: u64) -> Result<ForestModel> {
    fit_forest_with(ds, task, seed, DEFAULT_TREES)
}

pub fn fit_forest_with(ds: &Dataset, task: Task, seed: u64, n_trees: usize) -> Result<ForestModel> {
    let n = ds.n();
    if n < 2 {
        return Err(Error::InsufficientData(format!("forest needs at least 2 rows, got {n}")));
    }
    if n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let (y, n_outputs) = match (task, ds.target()) {
        (Task::Classify, Target::Discrete { labels, n_classes }) => {
            (labels.iter().map(|&l| l as f64).collect::<Vec<_>>(), (*n_classes).max(1))
        }
        (Task::Regress, Target::Continuous(v)) => (v.clone(), 1),
        _ => return Err(Error::TaskMismatch),
    };
    let (x, width) = design_matrix(ds);
    // scikit-learn defaults: sqrt(p) rounded down for classification, all features for regression
    let mtry = match task {
        Task::Classify => (width as f64).sqrt().floor() as usize,
        Task::Regress => width,
    }
    .clamp(1, width);
    let trainer = Trainer {
        x: &x,
        width,
        y: &y,
        task,
        n_outputs,
        mtry,
    };
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            trainer.grow(&mut rng, sample)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_trees,
        task,
        n_outputs,
        rng_seed: seed,
    })
}

impl ForestModel {
    /// Averaged leaf payload for one input row (`x` already includes the attribute).
    pub fn predict_row(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.leaf(x, self.n_outputs)) {
                *o += v;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }

    /// Predictions for every row of `ds`, row-major `n × n_outputs`.
    pub fn predict(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        let (x, width) = design_matrix(ds);
        x.par_chunks(width).map(|row| self.predict_row(row)).collect()
    }

    /// Increase in mean squared error (regression) or Brier score
    /// (classification) on `ds` when input column `column` is permuted;
    /// `column == ds.d()` addresses the attribute.
    pub fn permutation_importance(&self, ds: &Dataset, column: usize, seed: u64) -> Result<f64> {
        let (mut x, width) = design_matrix(ds);
        if column >= width {
            return Err(Error::IndexOutOfRange {
                index: column,
                len: width,
            });
        }
        let y: Vec<f64> = (0..ds.n()).map(|i| ds.target().value(i)).collect();
        let loss = |x: &[f64]| -> f64 {
            let total: f64 = x
                .chunks(width)
                .zip(&y)
                .map(|(row, &yi)| {
                    let p = self.predict_row(row);
                    match self.task {
                        Task::Regress => (p[0] - yi).powi(2),
                        Task::Classify => p
                            .iter()
                            .enumerate()
                            .map(|(l, &pl)| (pl - if l == yi as usize { 1.0 } else { 0.0 }).powi(2))
                            .sum(),
                    }
                })
                .sum();
            total / y.len() as f64
        };
        let base = loss(&x);
        let mut col: Vec<f64> = x.chunks(width).map(|r| r[column]).collect();
        col.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (row, v) in x.chunks_mut(width).zip(col) {
            row[column] = v;
        }
        Ok(loss(&x) - base)
    }
}

/// Per-row local divergence `c(x_i, a_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDivergence {
    pub c: Vec<f64>,
}

/// KL of each row's predicted class distribution against its group's subgroup PMF.
pub fn local_divergence_discrete(
    model: &ForestModel,
    ds: &Dataset,
    pmf0: &WeightedEmpiricalPMF,
    pmf1: &WeightedEmpiricalPMF,
) -> Result<LocalDivergence> {
    if model.task != Task::Classify {
        return Err(Error::TaskMismatch);
    }
    local_divergence_discrete_from(&model.predict(ds), ds.attribute(), pmf0, pmf1)
}

/// Same as [`local_divergence_discrete`] on precomputed class probabilities.
pub fn local_divergence_discrete_from(
    probs: &[Vec<f64>],
    attribute: &[bool],
    pmf0: &WeightedEmpiricalPMF,
    pmf1: &WeightedEmpiricalPMF,
) -> Result<LocalDivergence> {
    if probs.len() != attribute.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: attribute.len(),
        });
    }
    let c = probs
        .iter()
        .zip(attribute)
        .map(|(p, &a)| {
            let pmf = if a { pmf1 } else { pmf0 };
            let kl: f64 = p
                .iter()
                .enumerate()
                .filter(|(_, &pl)| pl > 0.0)
                .map(|(l, &pl)| pl * (pl / pmf.prob(l)).ln())
                .sum();
            kl.max(0.0)
        })
        .collect();
    Ok(LocalDivergence { c })
}

/// Squared difference between each row's predicted mean and its group's subgroup mean.
pub fn local_divergence_continuous(model: &ForestModel, ds: &Dataset, mu0: f64, mu1: f64) -> Result<LocalDivergence> {
    if model.task != Task::Regress {
        return Err(Error::TaskMismatch);
    }
    let preds: Vec<f64> = model.predict(ds).into_iter().map(|p| p[0]).collect();
    local_divergence_continuous_from(&preds, ds.attribute(), mu0, mu1)
}

pub fn local_divergence_continuous_from(
    preds: &[f64],
    attribute: &[bool],
    mu0: f64,
    mu1: f64,
) -> Result<LocalDivergence> {
    if preds.len() != attribute.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: attribute.len(),
        });
    }
    let c = preds
        .iter()
        .zip(attribute)
        .map(|(&f, &a)| {
            let mu = if a { mu1 } else { mu0 };
            (f - mu) * (f - mu)
        })
        .collect();
    Ok(LocalDivergence { c })
}
