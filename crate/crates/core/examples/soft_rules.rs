//! Soft box rules: evaluate memberships, inspect gradients, harden to a readable rule.

use diffsub::data::{numeric_schema, ColumnData, Dataset, LoadOptions};
use diffsub::rules::{harden, membership_batch, soft_membership, soft_predicate, SoftRule, VACUOUS_MARGIN, WEIGHT_EPS};

fn main() -> diffsub::Result<()> {
    // interval (0.2, 0.6) at a few temperatures
    for t in [0.2, 0.05, 0.01] {
        let vals: Vec<String> = [0.0, 0.2, 0.4, 0.6, 0.8]
            .iter()
            .map(|&x| format!("{:.3}", soft_predicate(x, 0.2, 0.6, t).unwrap()))
            .collect();
        println!("t={t:<5} pi(x) at 0, .2, .4, .6, .8: {}", vals.join(" "));
    }

    // two active features, one switched off by a negative weight
    let rule = SoftRule::new(vec![0.2, 0.0, 0.5], vec![0.6, 0.5, 0.9], vec![1.0, 0.5, -0.3], 0.05)?;
    println!("m(0.4, 0.25, 0.0) = {:.4}", soft_membership(&rule, &[0.4, 0.25, 0.0])?);
    println!("m(0.4, 0.45, 0.0) = {:.4}", soft_membership(&rule, &[0.4, 0.45, 0.0])?);

    let n = 200;
    let cols: Vec<ColumnData> = (0..3)
        .map(|j| ColumnData::Numeric((0..n).map(|i| ((i * (j + 3)) % n) as f64 / n as f64).collect()))
        .chain([
            ColumnData::Attribute((0..n).map(|i| i % 2 == 0).collect()),
            ColumnData::TargetContinuous((0..n).map(|i| (i % 7) as f64).collect()),
        ])
        .collect();
    let names = ["age", "income", "score"].map(String::from);
    let ds = Dataset::from_columns(numeric_schema(&names, "group", "outcome", true), cols, LoadOptions::default())?;

    // thresholds live in the standardized feature space of the dataset
    let rule = SoftRule::new(vec![-1.0, -0.5, 0.0], vec![0.5, 1.0, 1.0], vec![1.0, 0.8, 0.0], 0.1)?;
    let mb = membership_batch(&rule, &ds)?;
    let mean_m = mb.m.iter().sum::<f64>() / n as f64;
    println!("mean membership {mean_m:.3}, dm/da for row 0: {:?}", mb.dm_da.row(0).to_vec());

    let hard = harden(&rule, WEIGHT_EPS, VACUOUS_MARGIN, &ds)?;
    let covered = hard.membership(&ds)?.iter().filter(|&&m| m).count();
    println!("hard rule: {}  ({covered}/{n} rows)", hard.text);
    Ok(())
}
