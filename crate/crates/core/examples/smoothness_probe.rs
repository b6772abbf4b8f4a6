//! Measures how much the fitted score function can change within small
//! ∞-norm balls around the target points, for a linear and an rbf kernel.
//!
//! cargo run --release --example smoothness_probe

use idsp::data::{generate_synth, SynthTaskSpec};
use idsp::diagnostics::smoothness_profile;
use idsp::kernels::KernelSpec;
use idsp::solver::{Setting, SolverConfig};

fn main() -> idsp::Result<()> {
    let ds = generate_synth(&SynthTaskSpec::standard_pda(3))?;
    let radii = [0.0, 0.05, 0.1, 0.25, 0.5, 1.0];
    for kernel in [KernelSpec::Linear, KernelSpec::rbf_median()] {
        let config = SolverConfig {
            kernel,
            ..SolverConfig::defaults_for(Setting::Pda)
        };
        let model = idsp::fit(&ds, &config)?;
        let profile = smoothness_profile(|q| model.scores(q), ds.target_features(), &radii, 64, 7)?;
        println!("kernel {}", model.config.kernel);
        for rep in profile {
            println!("  r = {:<5} epsilon = {:.5}", rep.r, rep.epsilon_hat);
        }
    }
    Ok(())
}
