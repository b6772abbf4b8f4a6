//! Runs the MMD pseudo-label loop on a synthetic closed-set task and prints how
//! many target labels change per iteration.
//!
//! cargo run --release --example pseudo_label_loop -- [seed]

use idsp::data::{generate_synth, SynthTaskSpec};
use idsp::diagnostics::accuracy;
use idsp::solver::{Setting, SolverConfig};

fn main() -> idsp::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ds = generate_synth(&SynthTaskSpec::standard_uda(seed))?;
    let truth = ds.target_truth.clone().unwrap();

    let plain = idsp::fit(&ds, &SolverConfig::defaults_for(Setting::Uda))?;
    println!("without MMD: accuracy {:.4}", accuracy(plain.target_predictions(), &truth)?);

    let config = SolverConfig::jda_defaults_for(Setting::Uda);
    let model = idsp::fit(&ds, &config)?;
    let outcome = model.jda.as_ref().expect("eta > 0");
    for (it, labels) in outcome.history.iter().enumerate() {
        let changed = match it {
            0 => labels.len(),
            _ => labels.iter().zip(&outcome.history[it - 1]).filter(|(a, b)| a != b).count(),
        };
        println!("iteration {it}: {changed:>3} labels changed, accuracy {:.4}", accuracy(labels, &truth)?);
    }
    println!(
        "with MMD (eta {}, gamma {}): {} after {} iterations",
        config.eta,
        config.gamma,
        if outcome.converged { "stable" } else { "not stable" },
        outcome.iterations()
    );
    Ok(())
}
