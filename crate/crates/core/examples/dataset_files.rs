//! Writes a synthetic task to CSV, reads it back the way user-supplied
//! feature files are read, fits it and writes `id,pred` predictions.
//!
//! cargo run --release --example dataset_files -- [output-dir]

use std::path::PathBuf;

use idsp::data::{generate_synth, load_dataset, save_dataset, save_predictions, SynthTaskSpec};
use idsp::solver::{Setting, SolverConfig};

fn main() -> idsp::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("idsp-dataset-files"));
    std::fs::create_dir_all(&dir).map_err(|e| idsp::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    let features = dir.join("task.csv");
    save_dataset(&generate_synth(&SynthTaskSpec::standard_pda(5))?, &features)?;
    let ds = load_dataset(&features)?;
    println!(
        "{}: {} source, {} target, d = {}, {} classes",
        features.display(),
        ds.n_source(),
        ds.n_target(),
        ds.dim(),
        ds.class_count
    );

    let model = idsp::fit(&ds, &SolverConfig::defaults_for(Setting::Pda))?;
    let predictions = dir.join("predictions.csv");
    save_predictions(&predictions, ds.target_ids(), model.target_predictions())?;
    println!("wrote {}", predictions.display());
    Ok(())
}
