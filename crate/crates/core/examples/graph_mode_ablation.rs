//! Compares the four graph modes (no graph, target only, per domain, full)
//! across seeds with the kernel and kNN graph shared between modes.
//!
//! cargo run --release --example graph_mode_ablation -- [seeds] [kernel]

use idsp::data::{generate_synth, SynthTaskSpec};
use idsp::diagnostics::accuracy;
use idsp::graph::GraphMode;
use idsp::kernels::KernelSpec;
use idsp::solver::{Setting, SolverConfig};
use idsp::Prepared;

fn main() -> idsp::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let kernel: KernelSpec = match args.next() {
        Some(s) => s.parse()?,
        None => KernelSpec::Linear,
    };
    let config = SolverConfig {
        kernel,
        ..SolverConfig::defaults_for(Setting::Pda)
    };

    let mut totals = [0.0; 4];
    println!("seed      np       t      st     cst");
    for seed in 0..seeds {
        let ds = generate_synth(&SynthTaskSpec::standard_pda(seed))?;
        let truth = ds.target_truth.clone().unwrap();
        let prep = Prepared::new(&ds, config.p, &config.kernel)?;
        let mut row = String::new();
        for (k, mode) in GraphMode::ALL.into_iter().enumerate() {
            let model = prep.fit(&SolverConfig { mode, ..config.clone() })?;
            let acc = accuracy(model.target_predictions(), &truth)?;
            totals[k] += acc;
            row.push_str(&format!("  {acc:.4}"));
        }
        println!("{seed:>4}{row}");
    }
    let means: Vec<String> = totals.iter().map(|t| format!("{:.4}", t / seeds as f64)).collect();
    println!("mean  {}  (kernel {kernel})", means.join("  "));
    Ok(())
}
