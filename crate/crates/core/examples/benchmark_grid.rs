//! A small recovery grid over settings and effect sizes, written as CSV.

use diffsub::eval::{benchmark, write_rows_csv, write_summary_csv, GridConfig};
use diffsub::synth::{Setting, SynthConfig};
use diffsub::trainer::TrainConfig;

fn main() -> diffsub::Result<()> {
    let grid = GridConfig {
        settings: vec![Setting::Observational, Setting::Randomized],
        taus: vec![1.5, 4.0],
        replicates: 2,
        synth: SynthConfig {
            n: 1000,
            ..Default::default()
        },
        train: TrainConfig {
            epochs: 200,
            restarts: 2,
            ..Default::default()
        },
        ..Default::default()
    };
    let res = benchmark(&grid)?;
    for c in &res.summary {
        let f1 = c.f1.as_ref().map(|m| format!("{:.3} ± {:.3}", m.mean, m.se)).unwrap_or_default();
        println!("{:<14} tau={:<4} F1 {f1}", c.setting.name(), c.tau);
    }
    let dir = std::env::temp_dir().join("diffsub_benchmark_grid");
    std::fs::create_dir_all(&dir)?;
    write_rows_csv(dir.join("results.csv"), &res.rows, true)?;
    write_summary_csv(dir.join("summary.csv"), &res.summary)?;
    println!("wrote {}", dir.display());
    Ok(())
}
