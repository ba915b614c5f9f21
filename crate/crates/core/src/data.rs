//! Tabular datasets: schema validation, CSV loading, one-hot encoding and
//! min-max scaling of numeric features.
//!
//! A [`Dataset`] is immutable once built. Features are stored post-encoding
//! (one-hot columns for categoricals, optionally scaled numerics); the
//! per-column [`FeatureInfo`] keeps what is needed to report rules in the
//! original units.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// The binary group attribute A.
    Attribute,
    TargetDiscrete,
    TargetContinuous,
    /// Ground-truth subgroup membership (0/1), used only for evaluation.
    TruthMembership,
    /// Ground-truth per-row effect, used only for evaluation.
    TruthEffect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            categories: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, categories: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Checks the schema invariants: exactly one attribute column, exactly one
/// target column, unique column names and well-formed category lists.
pub fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let mut names = HashSet::new();
    for col in schema {
        if !names.insert(col.name.as_str()) {
            return Err(Error::InvalidSchema(format!("duplicate column `{}`", col.name)));
        }
        match col.kind {
            ColumnKind::Categorical => {
                if col.categories.is_empty() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical column `{}` has no categories",
                        col.name
                    )));
                }
                let mut seen = HashSet::new();
                for c in &col.categories {
                    if !seen.insert(c.as_str()) {
                        return Err(Error::InvalidSchema(format!(
                            "categorical column `{}` repeats level `{c}`",
                            col.name
                        )));
                    }
                }
            }
            _ if !col.categories.is_empty() => {
                return Err(Error::InvalidSchema(format!(
                    "column `{}` is not categorical but lists categories",
                    col.name
                )));
            }
            _ => {}
        }
    }
    let count = |pred: fn(ColumnKind) -> bool| schema.iter().filter(|c| pred(c.kind)).count();
    let n_attr = count(|k| k == ColumnKind::Attribute);
    if n_attr != 1 {
        return Err(Error::InvalidSchema(format!(
            "expected exactly one attribute column, found {n_attr}"
        )));
    }
    let n_target = count(|k| matches!(k, ColumnKind::TargetDiscrete | ColumnKind::TargetContinuous));
    if n_target != 1 {
        return Err(Error::InvalidSchema(format!(
            "expected exactly one target column, found {n_target}"
        )));
    }
    for kind in [ColumnKind::TruthMembership, ColumnKind::TruthEffect] {
        if schema.iter().filter(|c| c.kind == kind).count() > 1 {
            return Err(Error::InvalidSchema(format!("more than one {kind:?} column")));
        }
    }
    let n_features = count(|k| matches!(k, ColumnKind::Numeric | ColumnKind::Categorical));
    if n_features == 0 {
        return Err(Error::InvalidSchema("no feature columns".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureEncoding {
    /// Raw column with observed `(min, max)`; values are encoded as
    /// `(v - offset) / scale`.
    Numeric { min: f64, max: f64, offset: f64, scale: f64 },
    /// Indicator column for one level of a categorical source column.
    OneHot { level: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    /// Encoded column name (`source` for numerics, `source=level` for one-hot).
    pub name: String,
    pub source: String,
    pub encoding: FeatureEncoding,
}

impl FeatureInfo {
    /// Maps an encoded value back to the raw column's units.
    pub fn to_original(&self, v: f64) -> f64 {
        match &self.encoding {
            FeatureEncoding::Numeric { offset, scale, .. } if v.is_finite() => offset + v * scale,
            _ => v,
        }
    }

    pub fn to_encoded(&self, v: f64) -> f64 {
        match &self.encoding {
            FeatureEncoding::Numeric { offset, scale, .. } if v.is_finite() => (v - offset) / scale,
            _ => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Discrete { labels: Vec<usize>, n_classes: usize },
    Continuous(Vec<f64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Discrete { labels, .. } => labels.len(),
            Target::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Target::Discrete { .. })
    }

    /// Target value as a real number (class labels map to their index).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Target::Discrete { labels, .. } => labels[i] as f64,
            Target::Continuous(v) => v[i],
        }
    }

    fn subset(&self, rows: &[usize]) -> Target {
        match self {
            Target::Discrete { labels, n_classes } => Target::Discrete {
                labels: rows.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
            Target::Continuous(v) => Target::Continuous(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Raw, unencoded column values in schema order.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    /// Level indices into the schema's category list.
    Categorical(Vec<usize>),
    Attribute(Vec<bool>),
    TargetDiscrete(Vec<usize>),
    TargetContinuous(Vec<f64>),
    TruthMembership(Vec<bool>),
    TruthEffect(Vec<f64>),
}

impl ColumnData {
    fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) | ColumnData::TargetContinuous(v) | ColumnData::TruthEffect(v) => v.len(),
            ColumnData::Categorical(v) | ColumnData::TargetDiscrete(v) => v.len(),
            ColumnData::Attribute(v) | ColumnData::TruthMembership(v) => v.len(),
        }
    }

    fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Attribute(_) => ColumnKind::Attribute,
            ColumnData::TargetDiscrete(_) => ColumnKind::TargetDiscrete,
            ColumnData::TargetContinuous(_) => ColumnKind::TargetContinuous,
            ColumnData::TruthMembership(_) => ColumnKind::TruthMembership,
            ColumnData::TruthEffect(_) => ColumnKind::TruthEffect,
        }
    }
}

/// How numeric features are rescaled before rule learning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Keep raw values.
    None,
    /// Map `[min, max]` to `[0, 1]`.
    MinMax,
    /// Zero mean, unit (population) standard deviation.
    #[default]
    Standardize,
}

impl Scaling {
    /// `(offset, scale)` for a column; constant columns encode to 0.
    fn params(self, v: &[f64], min: f64, max: f64) -> (f64, f64) {
        let (offset, scale) = match self {
            Scaling::None => return (0.0, 1.0),
            Scaling::MinMax => (min, max - min),
            Scaling::Standardize => {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
        };
        if scale > 0.0 {
            (offset, scale)
        } else {
            (offset, 1.0)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub scaling: Scaling,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    features: Array2<f64>,
    attribute: Vec<bool>,
    target: Target,
    n0: usize,
    n1: usize,
    columns: Vec<FeatureInfo>,
    schema: Vec<ColumnSchema>,
    truth_membership: Option<Vec<bool>>,
    truth_effect: Option<Vec<f64>>,
}

impl Dataset {
    /// Encodes raw columns (given in schema order) into a validated dataset.
    pub fn from_columns(schema: Vec<ColumnSchema>, data: Vec<ColumnData>, opts: LoadOptions) -> Result<Self> {
        validate_schema(&schema)?;
        if schema.len() != data.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} schema columns but {} data columns",
                schema.len(),
                data.len()
            )));
        }
        let n = data.first().map(ColumnData::len).unwrap_or(0);
        for (col, values) in schema.iter().zip(&data) {
            if values.kind() != col.kind {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` declared {:?} but data is {:?}",
                    col.name,
                    col.kind,
                    values.kind()
                )));
            }
            if values.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: values.len(),
                });
            }
        }

        let mut columns = Vec::new();
        let mut encoded: Vec<Vec<f64>> = Vec::new();
        let mut attribute = Vec::new();
        let mut target = None;
        let mut truth_membership = None;
        let mut truth_effect = None;

        for (col, values) in schema.iter().zip(data) {
            match values {
                ColumnData::Numeric(v) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::Parse {
                            row,
                            column: col.name.clone(),
                            message: "non-finite value".into(),
                        });
                    }
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let info = FeatureInfo {
                        name: col.name.clone(),
                        source: col.name.clone(),
                        encoding: {
                            let (offset, scale) = opts.scaling.params(&v, min, max);
                            FeatureEncoding::Numeric {
                                min,
                                max,
                                offset,
                                scale,
                            }
                        },
                    };
                    encoded.push(v.iter().map(|&x| info.to_encoded(x)).collect());
                    columns.push(info);
                }
                ColumnData::Categorical(levels) => {
                    for (l, level) in col.categories.iter().enumerate() {
                        columns.push(FeatureInfo {
                            name: format!("{}={}", col.name, level),
                            source: col.name.clone(),
                            encoding: FeatureEncoding::OneHot { level: level.clone() },
                        });
                        encoded.push(levels.iter().map(|&x| if x == l { 1.0 } else { 0.0 }).collect());
                    }
                    if let Some(row) = levels.iter().position(|&x| x >= col.categories.len()) {
                        return Err(Error::Parse {
                            row,
                            column: col.name.clone(),
                            message: "level index out of range".into(),
                        });
                    }
                }
                ColumnData::Attribute(a) => attribute = a,
                ColumnData::TargetDiscrete(labels) => {
                    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
                    target = Some(Target::Discrete { labels, n_classes });
                }
                ColumnData::TargetContinuous(v) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::Parse {
                            row,
                            column: col.name.clone(),
                            message: "non-finite target".into(),
                        });
                    }
                    target = Some(Target::Continuous(v));
                }
                ColumnData::TruthMembership(v) => truth_membership = Some(v),
                ColumnData::TruthEffect(v) => truth_effect = Some(v),
            }
        }

        let d = encoded.len();
        let mut features = Array2::<f64>::zeros((n, d));
        for (j, col) in encoded.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                features[[i, j]] = v;
            }
        }
        let target = target.expect("validated schema has a target");
        Self::assemble(features, attribute, target, columns, schema, truth_membership, truth_effect)
    }

    fn assemble(
        features: Array2<f64>,
        attribute: Vec<bool>,
        target: Target,
        columns: Vec<FeatureInfo>,
        schema: Vec<ColumnSchema>,
        truth_membership: Option<Vec<bool>>,
        truth_effect: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n1 = attribute.iter().filter(|&&a| a).count();
        let n0 = attribute.len() - n1;
        if n0 == 0 {
            return Err(Error::EmptyGroup { group: 0 });
        }
        if n1 == 0 {
            return Err(Error::EmptyGroup { group: 1 });
        }
        Ok(Self {
            features,
            attribute,
            target,
            n0,
            n1,
            columns,
            schema,
            truth_membership,
            truth_effect,
        })
    }

    /// Restricts the dataset to `rows`, keeping the encoding of the parent.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), rows);
        Self::assemble(
            features,
            rows.iter().map(|&i| self.attribute[i]).collect(),
            self.target.subset(rows),
            self.columns.clone(),
            self.schema.clone(),
            self.truth_membership
                .as_ref()
                .map(|t| rows.iter().map(|&i| t[i]).collect()),
            self.truth_effect.as_ref().map(|t| rows.iter().map(|&i| t[i]).collect()),
        )
    }

    pub fn n(&self) -> usize {
        self.attribute.len()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn group_size(&self, group: bool) -> usize {
        if group {
            self.n1
        } else {
            self.n0
        }
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn attribute(&self) -> &[bool] {
        &self.attribute
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub fn columns(&self) -> &[FeatureInfo] {
        &self.columns
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Categorical source column -> `(level, encoded column index)` in level order.
    pub fn encode_map(&self) -> BTreeMap<String, Vec<(String, usize)>> {
        let mut map: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
        for (j, c) in self.columns.iter().enumerate() {
            if let FeatureEncoding::OneHot { level } = &c.encoding {
                map.entry(c.source.clone()).or_default().push((level.clone(), j));
            }
        }
        map
    }

    pub fn truth_membership(&self) -> Option<&[bool]> {
        self.truth_membership.as_deref()
    }

    pub fn truth_effect(&self) -> Option<&[f64]> {
        self.truth_effect.as_deref()
    }

    /// Feature value of row `i`, column `j` in the raw column's units.
    pub fn original_value(&self, i: usize, j: usize) -> f64 {
        self.columns[j].to_original(self.features[[i, j]])
    }

    /// Observed `(min, max)` of encoded column `j`.
    pub fn observed_range(&self, j: usize) -> (f64, f64) {
        self.features
            .column(j)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Renders the condition `lo < x_j < hi` (encoded units) in the original units.
    pub fn decode_interval(&self, feature: usize, lo: f64, hi: f64) -> Result<DecodedInterval> {
        let info = self.columns.get(feature).ok_or(Error::IndexOutOfRange {
            index: feature,
            len: self.columns.len(),
        })?;
        let (min, max) = self.observed_range(feature);
        Ok(decode_with(info, lo, hi, min, max))
    }

    /// Writes the dataset in its original units, one column per schema entry.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.iter().map(|c| c.name.as_str()))?;
        let encode_map = self.encode_map();
        let mut record = Vec::with_capacity(self.schema.len());
        for i in 0..self.n() {
            record.clear();
            for col in &self.schema {
                let field = match col.kind {
                    ColumnKind::Numeric => {
                        let j = self.feature_index(&col.name).expect("numeric column encoded");
                        fmt_f64(self.original_value(i, j))
                    }
                    ColumnKind::Categorical => {
                        let levels = &encode_map[&col.name];
                        levels
                            .iter()
                            .find(|(_, j)| self.features[[i, *j]] > 0.5)
                            .map(|(l, _)| l.clone())
                            .unwrap_or_default()
                    }
                    ColumnKind::Attribute => (self.attribute[i] as u8).to_string(),
                    ColumnKind::TargetDiscrete | ColumnKind::TargetContinuous => match &self.target {
                        Target::Discrete { labels, .. } => labels[i].to_string(),
                        Target::Continuous(v) => fmt_f64(v[i]),
                    },
                    ColumnKind::TruthMembership => {
                        (self.truth_membership.as_ref().expect("schema lists truth")[i] as u8).to_string()
                    }
                    ColumnKind::TruthEffect => fmt_f64(self.truth_effect.as_ref().expect("schema lists truth")[i]),
                };
                record.push(field);
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest decimal that round-trips.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedInterval {
    pub text: String,
    /// The interval admits every observed value.
    pub vacuous: bool,
    /// Bounds in original units; `None` when that side admits all observed values.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

fn decode_with(info: &FeatureInfo, lo: f64, hi: f64, min: f64, max: f64) -> DecodedInterval {
    match &info.encoding {
        FeatureEncoding::OneHot { level } => {
            let has_one = lo < 1.0 && 1.0 < hi;
            let has_zero = lo < 0.0 && 0.0 < hi;
            let text = match (has_zero, has_one) {
                (true, true) => format!("{}: any", info.name),
                (false, true) => format!("{} = {}", info.source, level),
                (true, false) => format!("{} ≠ {}", info.source, level),
                (false, false) => format!("{}: none", info.name),
            };
            DecodedInterval {
                text,
                vacuous: has_zero && has_one,
                lo: Some(lo),
                hi: Some(hi),
            }
        }
        FeatureEncoding::Numeric { .. } => {
            let lo_open = lo <= min;
            let hi_open = hi >= max;
            let lo_o = (!lo_open).then(|| info.to_original(lo));
            let hi_o = (!hi_open).then(|| info.to_original(hi));
            let name = &info.name;
            let text = match (lo_o, hi_o) {
                (Some(l), Some(h)) => format!("{name} ∈ ({}, {})", fmt_bound(l), fmt_bound(h)),
                (Some(l), None) => format!("{name} > {}", fmt_bound(l)),
                (None, Some(h)) => format!("{name} < {}", fmt_bound(h)),
                (None, None) => format!("{name}: any"),
            };
            DecodedInterval {
                text,
                vacuous: lo_open && hi_open,
                lo: lo_o,
                hi: hi_o,
            }
        }
    }
}

/// Up to four decimals, trailing zeros removed.
pub(crate) fn fmt_bound(v: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{v:.4}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Row indices of group A=0 and A=1, each in row order.
pub fn group_slices(ds: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut g0 = Vec::with_capacity(ds.n0);
    let mut g1 = Vec::with_capacity(ds.n1);
    for (i, &a) in ds.attribute.iter().enumerate() {
        if a {
            g1.push(i);
        } else {
            g0.push(i);
        }
    }
    (g0, g1)
}

/// Loads a headered, comma-delimited UTF-8 CSV according to `schema`.
///
/// Header columns must match the schema names exactly (order may differ).
/// Rows with empty fields are rejected.
pub fn load_csv(path: impl AsRef<Path>, schema: &[ColumnSchema], opts: LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    validate_schema(schema)?;
    if !path.exists() {
        return Err(Error::NotFound(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();

    let mut positions = Vec::with_capacity(schema.len());
    for col in schema {
        let pos = headers
            .iter()
            .position(|h| h.trim() == col.name)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{}`", col.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = headers.iter().find(|h| !schema.iter().any(|c| c.name == h.trim())) {
        return Err(Error::SchemaMismatch(format!("unexpected column `{extra}`")));
    }

    let mut data: Vec<ColumnData> = schema
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
            ColumnKind::Attribute => ColumnData::Attribute(Vec::new()),
            ColumnKind::TargetDiscrete => ColumnData::TargetDiscrete(Vec::new()),
            ColumnKind::TargetContinuous => ColumnData::TargetContinuous(Vec::new()),
            ColumnKind::TruthMembership => ColumnData::TruthMembership(Vec::new()),
            ColumnKind::TruthEffect => ColumnData::TruthEffect(Vec::new()),
        })
        .collect();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for ((col, &pos), out) in schema.iter().zip(&positions).zip(data.iter_mut()) {
            let raw = record.get(pos).unwrap_or("").trim();
            let err = |message: &str| Error::Parse {
                row,
                column: col.name.clone(),
                message: format!("{message}: `{raw}`"),
            };
            if raw.is_empty() {
                return Err(err("missing value"));
            }
            let parse_real = || -> Result<f64> {
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err("expected a finite number"))
            };
            let parse_bit = || -> Result<bool> {
                match raw {
                    "0" | "0.0" | "false" => Ok(false),
                    "1" | "1.0" | "true" => Ok(true),
                    _ => Err(err("expected 0 or 1")),
                }
            };
            match out {
                ColumnData::Numeric(v) | ColumnData::TargetContinuous(v) | ColumnData::TruthEffect(v) => {
                    v.push(parse_real()?)
                }
                ColumnData::Categorical(v) => {
                    let idx = col
                        .categories
                        .iter()
                        .position(|c| c == raw)
                        .ok_or_else(|| err("unknown category"))?;
                    v.push(idx);
                }
                ColumnData::Attribute(v) | ColumnData::TruthMembership(v) => v.push(parse_bit()?),
                ColumnData::TargetDiscrete(v) => {
                    let label = raw
                        .parse::<usize>()
                        .ok()
                        .or_else(|| {
                            raw.parse::<f64>()
                                .ok()
                                .filter(|f| f.fract() == 0.0 && *f >= 0.0)
                                .map(|f| f as usize)
                        })
                        .ok_or_else(|| err("expected a non-negative class label"))?;
                    v.push(label);
                }
            }
        }
    }
    Dataset::from_columns(schema.to_vec(), data, opts)
}

/// Schema for a CSV with numeric features and a continuous target, as written
/// by the synthetic generators.
pub fn numeric_schema(features: &[String], attribute: &str, target: &str, continuous: bool) -> Vec<ColumnSchema> {
    let mut schema: Vec<ColumnSchema> = features
        .iter()
        .map(|f| ColumnSchema::new(f.clone(), ColumnKind::Numeric))
        .collect();
    schema.push(ColumnSchema::new(attribute, ColumnKind::Attribute));
    schema.push(ColumnSchema::new(
        target,
        if continuous {
            ColumnKind::TargetContinuous
        } else {
            ColumnKind::TargetDiscrete
        },
    ));
    schema
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn basic_schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::new("x", ColumnKind::Numeric),
            ColumnSchema::categorical("color", &["red", "blue"]),
            ColumnSchema::new("a", ColumnKind::Attribute),
            ColumnSchema::new("y", ColumnKind::TargetContinuous),
        ]
    }

    #[test]
    fn empty_group_rejected() {
        let f = write_tmp("x,color,a,y\n1,red,0,0.5\n2,blue,0,0.1\n3,red,0,0.2\n");
        let err = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup { group: 1 }));
    }

    #[test]
    fn categorical_expands_in_level_order() {
        let f = write_tmp("x,color,a,y\n10,blue,0,0.5\n20,red,1,0.1\n30,blue,1,0.2\n");
        let ds = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap();
        assert_eq!(ds.feature_names(), vec!["x", "color=red", "color=blue"]);
        assert_eq!(ds.features().column(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.features().column(2).to_vec(), vec![1.0, 0.0, 1.0]);
        let map = ds.encode_map();
        assert_eq!(map["color"], vec![("red".to_string(), 1), ("blue".to_string(), 2)]);
        // one-hot groups sum to one per row and to n per column group
        let total: f64 = ds.features().column(1).sum() + ds.features().column(2).sum();
        assert_eq!(total, ds.n() as f64);
    }

    #[test]
    fn numeric_midpoint_scales_to_half() {
        let f = write_tmp("x,color,a,y\n10,blue,0,0.5\n20,red,1,0.1\n30,blue,1,0.2\n");
        let opts = LoadOptions {
            scaling: Scaling::MinMax,
        };
        let ds = load_csv(f.path(), &basic_schema(), opts).unwrap();
        assert_eq!(ds.features()[[1, 0]], 0.5);
        assert_eq!(
            ds.columns()[0].encoding,
            FeatureEncoding::Numeric {
                min: 10.0,
                max: 30.0,
                offset: 10.0,
                scale: 20.0
            }
        );
    }

    #[test]
    fn standardized_column_has_zero_mean_unit_variance() {
        let f = write_tmp("x,color,a,y\n10,blue,0,0.5\n20,red,1,0.1\n30,blue,1,0.2\n");
        let ds = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap();
        let col = ds.features().column(0).to_vec();
        let sd = (200.0f64 / 3.0).sqrt();
        assert_eq!(col, vec![-10.0 / sd, 0.0, 10.0 / sd]);
        assert!((ds.original_value(2, 0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_can_be_disabled() {
        let f = write_tmp("x,color,a,y\n10,blue,0,0.5\n20,red,1,0.1\n30,blue,1,0.2\n");
        let ds = load_csv(f.path(), &basic_schema(), LoadOptions { scaling: Scaling::None }).unwrap();
        assert_eq!(ds.features()[[1, 0]], 20.0);
        assert_eq!(ds.original_value(1, 0), 20.0);
    }

    #[test]
    fn missing_and_extra_columns() {
        let f = write_tmp("x,a,y\n1,0,0\n2,1,1\n");
        let err = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "SchemaMismatch");

        let f = write_tmp("x,color,a,y,z\n1,red,0,0,4\n2,red,1,1,4\n");
        let err = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "SchemaMismatch");
    }

    #[test]
    fn parse_errors_identify_row_and_column() {
        let f = write_tmp("x,color,a,y\n1,red,0,0\n2,red,2,1\n");
        match load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "a");
            }
            e => panic!("unexpected {e}"),
        }
        let f = write_tmp("x,color,a,y\n1,red,0,0\n,red,1,1\n");
        assert_eq!(
            load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err().kind(),
            "ParseError"
        );
        let f = write_tmp("x,color,a,y\n1,green,0,0\n3,red,1,1\n");
        assert_eq!(
            load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap_err().kind(),
            "ParseError"
        );
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_csv("/nonexistent/file.csv", &basic_schema(), LoadOptions::default()).unwrap_err();
        assert_eq!(err.kind(), "NotFound");
    }

    #[test]
    fn schema_invariants() {
        let mut s = basic_schema();
        s.push(ColumnSchema::new("a2", ColumnKind::Attribute));
        assert!(validate_schema(&s).is_err());
        let s = vec![
            ColumnSchema::new("x", ColumnKind::Numeric),
            ColumnSchema::new("a", ColumnKind::Attribute),
        ];
        assert!(validate_schema(&s).is_err());
        let mut s = basic_schema();
        s[1].categories = vec!["r".into(), "r".into()];
        assert!(validate_schema(&s).is_err());
    }

    #[test]
    fn group_slices_partition_in_row_order() {
        let schema = numeric_schema(&["x".into()], "a", "y", true);
        let ds = Dataset::from_columns(
            schema,
            vec![
                ColumnData::Numeric(vec![0.0, 1.0, 2.0]),
                ColumnData::Attribute(vec![false, true, false]),
                ColumnData::TargetContinuous(vec![0.0, 0.0, 0.0]),
            ],
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(group_slices(&ds), (vec![0, 2], vec![1]));
    }

    #[test]
    fn decode_scaled_interval() {
        let schema = numeric_schema(&["x".into()], "a", "y", true);
        let ds = Dataset::from_columns(
            schema,
            vec![
                ColumnData::Numeric(vec![10.0, 20.0, 30.0]),
                ColumnData::Attribute(vec![false, true, false]),
                ColumnData::TargetContinuous(vec![0.0, 0.0, 0.0]),
            ],
            LoadOptions {
                scaling: Scaling::MinMax,
            },
        )
        .unwrap();
        let d = ds.decode_interval(0, 0.25, 0.75).unwrap();
        assert_eq!(d.text, "x ∈ (15, 25)");
        assert!(!d.vacuous);
        let d = ds.decode_interval(0, 0.0, 1.0).unwrap();
        assert!(d.vacuous);
        let d = ds.decode_interval(0, -0.3, 0.5).unwrap();
        assert_eq!(d.text, "x < 20");
        assert!(matches!(ds.decode_interval(3, 0.0, 1.0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn decode_one_hot() {
        let schema = vec![
            ColumnSchema::categorical("race", &["white", "black"]),
            ColumnSchema::new("a", ColumnKind::Attribute),
            ColumnSchema::new("y", ColumnKind::TargetDiscrete),
        ];
        let ds = Dataset::from_columns(
            schema,
            vec![
                ColumnData::Categorical(vec![0, 1, 1]),
                ColumnData::Attribute(vec![false, true, false]),
                ColumnData::TargetDiscrete(vec![0, 1, 0]),
            ],
            LoadOptions::default(),
        )
        .unwrap();
        let j = ds.feature_index("race=black").unwrap();
        assert_eq!(ds.decode_interval(j, 0.5, 1.5).unwrap().text, "race = black");
        assert_eq!(ds.decode_interval(j, -0.5, 0.5).unwrap().text, "race ≠ black");
        assert!(ds.decode_interval(j, -0.5, 1.5).unwrap().vacuous);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let f = write_tmp("x,color,a,y\n10.5,blue,0,0.5\n20,red,1,0.1\n-3,blue,1,0.2\n");
        let ds = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        ds.write_csv(out.path()).unwrap();
        let back = load_csv(out.path(), &basic_schema(), LoadOptions::default()).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.target(), ds.target());
        assert_eq!(back.attribute(), ds.attribute());
    }

    #[test]
    fn subset_keeps_encoding() {
        let f = write_tmp("x,color,a,y\n10,blue,0,0.5\n20,red,1,0.1\n30,blue,1,0.2\n");
        let ds = load_csv(f.path(), &basic_schema(), LoadOptions::default()).unwrap();
        let sub = ds.subset(&[0, 2]).unwrap();
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.original_value(1, 0), 30.0);
        assert!(matches!(ds.subset(&[1, 2]), Err(Error::EmptyGroup { group: 0 })));
    }

    proptest::proptest! {
        #[test]
        fn decode_inverts_encode(min in -1e3f64..1e3, span in 1e-3f64..1e4, u in 0.0f64..1.0) {
            let info = FeatureInfo {
                name: "x".into(),
                source: "x".into(),
                encoding: FeatureEncoding::Numeric { min, max: min + span, offset: min, scale: span },
            };
            let v = min + u * span;
            let back = info.to_original(info.to_encoded(v));
            proptest::prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(span).max(1.0));
        }
    }
}
