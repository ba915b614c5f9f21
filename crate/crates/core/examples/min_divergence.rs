//! Minimizing mode: find a large region where both groups behave alike.

use diffsub::objective::Direction;
use diffsub::synth::{generate, Setting, SynthConfig};
use diffsub::trainer::{discover, TrainConfig};

fn main() -> diffsub::Result<()> {
    // eta = 0: outside the planted box the groups agree
    let (ds, truth) = generate(&SynthConfig {
        setting: Setting::Randomized,
        tau: 4.0,
        eta: 0.0,
        seed: 4,
        ..Default::default()
    })?;
    let mut cfg = TrainConfig::default();
    let max = discover(&ds, &cfg)?;
    cfg.objective.direction = Direction::Minimize;
    let min = discover(&ds, &cfg)?;

    for (label, rep) in [("maximize", &max), ("minimize", &min)] {
        let member = rep.rule.membership(&ds)?;
        let inside_box = member.iter().zip(&truth.membership).filter(|(m, t)| **m && **t).count();
        let size = member.iter().filter(|&&m| m).count();
        println!(
            "{label}: {}  | {size} rows, {inside_box} in the planted box, E={:.4}",
            rep.rule.text, rep.hard_exceptionality
        );
    }
    Ok(())
}
