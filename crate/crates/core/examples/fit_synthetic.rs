//! Fits the default model on a synthetic partial domain adaptation task and
//! classifies a few fresh points out of sample.
//!
//! cargo run --release --example fit_synthetic -- [seed]

use idsp::data::{generate_synth, split_counts, SynthTaskSpec};
use idsp::diagnostics::accuracy;
use idsp::solver::{Setting, SolverConfig};
use ndarray::s;

fn main() -> idsp::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let ds = generate_synth(&SynthTaskSpec::standard_pda(seed))?;
    let summary = split_counts(&ds);
    println!(
        "source {} / target {} samples, {} classes, target classes per count {:?}",
        summary.n, summary.m, summary.class_count, summary.target_per_class
    );

    let config = SolverConfig::defaults_for(Setting::Pda);
    let model = idsp::fit(&ds, &config)?;
    let truth = ds.target_truth.as_ref().expect("synthetic tasks carry target labels");
    println!("target accuracy: {:.4}", accuracy(model.target_predictions(), truth)?);
    println!(
        "time: graph {:?}, kernel {:?}, solve {:?}",
        model.timings.graph, model.timings.kernel, model.timings.solve
    );

    // a second draw of the same task stands in for unseen target data
    let fresh = generate_synth(&SynthTaskSpec::standard_pda(seed + 1000))?;
    let query = fresh.target_features().slice_move(s![..5, ..]);
    let predicted = model.predict(query)?;
    let fresh_truth = &fresh.target_truth.as_ref().unwrap()[..5];
    println!("out-of-sample: predicted {:?}, truth {:?}", predicted.labels, fresh_truth);
    Ok(())
}
