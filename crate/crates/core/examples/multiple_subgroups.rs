//! Sequential discovery of two disjoint planted regions that no single box can cover.

use diffsub::data::{numeric_schema, ColumnData, Dataset, LoadOptions};
use diffsub::trainer::{discover_multiple, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> diffsub::Result<()> {
    let n = 3000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let x: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
    let a: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let box1 = x[0][i] < 0.45 && x[1][i] < 0.5;
            let box2 = x[0][i] > 0.55 && x[1][i] > 0.5;
            let effect = if box1 || box2 { 3.0 } else { 0.0 };
            let sign = if a[i] { 0.5 } else { -0.5 };
            x[2][i] + sign * effect + noise.sample(&mut rng)
        })
        .collect();
    let mut cols: Vec<ColumnData> = x.into_iter().map(ColumnData::Numeric).collect();
    cols.push(ColumnData::Attribute(a));
    cols.push(ColumnData::TargetContinuous(y));
    let names = ["x0", "x1", "x2"].map(String::from);
    let ds = Dataset::from_columns(numeric_schema(&names, "a", "y", true), cols, LoadOptions::default())?;

    let found = discover_multiple(&ds, &TrainConfig::default(), 3)?;
    for (k, rep) in found.reports.iter().enumerate() {
        let tau = rep.effect.as_ref().map(|e| e.tau_hat).unwrap_or(f64::NAN);
        println!("subgroup {}: {}  (tau_hat {tau:.2})", k + 1, rep.rule.text);
    }
    if let Some(why) = &found.stopped_early {
        println!("{why}");
    }
    Ok(())
}
