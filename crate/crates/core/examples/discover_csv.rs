//! Discover a subgroup in a CSV file with a categorical feature and a discrete target.

use std::fmt::Write as _;

use diffsub::data::{load_csv, ColumnKind, ColumnSchema, LoadOptions};
use diffsub::trainer::{discover, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> diffsub::Result<()> {
    // clinic A and clinic B treat patients the same way except older smokers
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut csv = String::from("age,bmi,smoker,clinic,outcome\n");
    for _ in 0..1500 {
        let age: f64 = rng.gen_range(20.0..80.0);
        let bmi: f64 = rng.gen_range(18.0..35.0);
        let smoker = if rng.gen_bool(0.4) { "yes" } else { "no" };
        let clinic = rng.gen_bool(0.5);
        let mut p_good = 0.6;
        if age > 55.0 && smoker == "yes" {
            p_good = if clinic { 0.9 } else { 0.2 };
        }
        let outcome = if rng.gen_bool(p_good) { 1 } else { 0 };
        writeln!(csv, "{age:.1},{bmi:.1},{smoker},{},{outcome}", clinic as u8).unwrap();
    }
    let dir = std::env::temp_dir().join("diffsub_discover_csv");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("patients.csv");
    std::fs::write(&path, csv)?;

    let schema = vec![
        ColumnSchema::new("age", ColumnKind::Numeric),
        ColumnSchema::new("bmi", ColumnKind::Numeric),
        ColumnSchema::categorical("smoker", &["no", "yes"]),
        ColumnSchema::new("clinic", ColumnKind::Attribute),
        ColumnSchema::new("outcome", ColumnKind::TargetDiscrete),
    ];
    let ds = load_csv(&path, &schema, LoadOptions::default())?;
    println!("loaded {} rows, encoded features {:?}", ds.n(), ds.feature_names());

    let report = discover(&ds, &TrainConfig::default())?;
    println!("rule: {}", report.rule.text);
    println!(
        "coverage clinic0 {:.3}, clinic1 {:.3}; exceptionality {:.4}",
        report.coverage[0], report.coverage[1], report.hard_exceptionality
    );
    if let Some(d) = &report.distributions {
        println!("outcome distributions in the subgroup: {:?} vs {:?}", d.group0, d.group1);
    }
    Ok(())
}
