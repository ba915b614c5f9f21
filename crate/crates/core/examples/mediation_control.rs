//! Covariate dependence in action: when the group effect runs entirely through
//! the features, a strong regularizer leaves little exceptionality to find.

use diffsub::synth::{generate, generate_full_mediation, Setting, SynthConfig};
use diffsub::trainer::{discover, TrainConfig};

fn main() -> diffsub::Result<()> {
    let base = SynthConfig {
        setting: Setting::Demographic,
        tau: 2.0,
        seed: 2,
        ..Default::default()
    };
    let mediated = generate_full_mediation(&base)?;
    let (direct, _) = generate(&base)?;
    for lambda in [0.0, 1.0] {
        let mut cfg = TrainConfig::default();
        cfg.objective.lambda = lambda;
        let m = discover(&mediated, &cfg)?;
        let d = discover(&direct, &cfg)?;
        println!(
            "lambda={lambda}: E mediated {:.4} ({}), E direct {:.4} ({})",
            m.hard_exceptionality, m.rule.text, d.hard_exceptionality, d.rule.text
        );
    }
    Ok(())
}
