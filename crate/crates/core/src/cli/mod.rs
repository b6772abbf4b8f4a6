//! Command-line workflows behind the `idsp` binary: `fit`, `ablate`, `synth`
//! and `probe`.
//!
//! Every command writes its outputs into a directory (or file, for `synth`)
//! only after all computation succeeded. Reports contain no timings so that
//! identical inputs give byte-identical reports; per-phase wall-clock times
//! go to a separate `timings.csv`.

mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{self, generate_synth, load_dataset, split_counts, Dataset, SynthTaskSpec};
use crate::diagnostics::{accuracy, gd_oracle, smoothness_profile, GdControls, GD_ORACLE_MAX_ORDER};
use crate::error::{Error, Result};
use crate::graph::GraphMode;
use crate::kernels::KernelSpec;
use crate::model::{FittedModel, Prepared};
use crate::solver::{mmd_matrix, Problem, Setting, SolverConfig, Weights};

pub use report::{RunReport, Table};

#[derive(Debug, Parser)]
#[command(name = "idsp", version, about = "Intra-domain structure preserving domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write target predictions and a report.
    Fit(FitArgs),
    /// Compare the four graph modes (np, t, st, cst) on shared kernels.
    Ablate(AblateArgs),
    /// Generate a synthetic domain-adaptation dataset CSV.
    Synth(SynthArgs),
    /// Fit, then measure score smoothness on target points at several radii.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 4 classes (2 source-private), 60 per class and domain, d=10, shift 1.5.
    Pda,
    /// Same geometry with identical label spaces and shift 1.0.
    Uda,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Dataset CSV (id,domain,label,f0,...).
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    pub data: Option<PathBuf>,
    /// Use a built-in synthetic task instead of a file.
    #[arg(long, value_enum)]
    pub synth: Option<Preset>,
    /// Seed of the synthetic task and of the smoothness probe.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the inferred class count.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// RKHS-norm weight.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Laplacian weight [default: 5 for PDA, 1 for UDA; 10 / 2 with --jda].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// MMD weight; a positive value enables the pseudo-label loop [default: 0; 0.01 PDA / 0.5 UDA with --jda].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Enable the MMD pseudo-label loop with its default weights.
    #[arg(long)]
    pub jda: bool,
    /// Neighbour count of the kNN graph.
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Graph mode: np, t, st or cst.
    #[arg(long, default_value = "t")]
    pub mode: GraphMode,
    /// Kernel: linear, cosine, rbf (median heuristic) or rbf:<sigma>.
    #[arg(long, default_value = "linear")]
    pub kernel: KernelSpec,
    /// Iteration cap of the pseudo-label loop.
    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,
    /// Treat the task as partial domain adaptation when choosing defaults.
    #[arg(long, conflicts_with = "uda")]
    pub pda: bool,
    /// Treat the task as unsupervised (closed-set) domain adaptation.
    #[arg(long)]
    pub uda: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Cross-check the closed form against gradient descent (n+m <= 50).
    #[arg(long)]
    pub oracle_check: bool,
    /// Output directory.
    #[arg(long, default_value = "idsp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Number of consecutive synthetic seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value = "idsp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// Classes present only in the source domain.
    #[arg(long, default_value_t = 2)]
    pub private: usize,
    /// Samples per class per domain.
    #[arg(long, default_value_t = 60)]
    pub per_class: usize,
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    /// Distance between class means.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Norm of the shared target displacement.
    #[arg(long, default_value_t = 1.5)]
    pub shift: f64,
    /// Per-coordinate noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Comma-separated perturbation radii (∞-norm).
    #[arg(long, default_value = "0,0.1,0.5,1", value_delimiter = ',')]
    pub radii: Vec<f64>,
    /// Perturbations per target point.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value = "idsp-out")]
    pub out: PathBuf,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args).map(|_| ()),
        Command::Ablate(args) => cmd_ablate(&args).map(|_| ()),
        Command::Synth(args) => cmd_synth(&args),
        Command::Probe(args) => cmd_probe(&args).map(|_| ()),
    }
}

/// How the PDA/UDA setting used for defaults was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettingSource {
    Flag,
    DetectedFromTruth,
    /// Neither flag given and no target truth to inspect.
    Assumed,
}

impl InputArgs {
    fn describe(&self, seed: u64) -> String {
        match (&self.data, self.synth) {
            (Some(p), _) => format!("file {}", p.display()),
            (None, Some(preset)) => format!("synthetic {preset:?} seed {seed}").to_lowercase(),
            (None, None) => "none".into(),
        }
    }

    fn load(&self, seed: u64) -> Result<Dataset> {
        let ds = match (&self.data, self.synth) {
            (Some(path), _) => load_dataset(path)?,
            (None, Some(preset)) => generate_synth(&preset_spec(preset, seed))?,
            (None, None) => return Err(Error::Input("either --data or --synth is required".into())),
        };
        match self.classes {
            Some(c) => ds.with_class_count(c),
            None => Ok(ds),
        }
    }
}

pub fn preset_spec(preset: Preset, seed: u64) -> SynthTaskSpec {
    match preset {
        Preset::Pda => SynthTaskSpec::standard_pda(seed),
        Preset::Uda => SynthTaskSpec::standard_uda(seed),
    }
}

/// Resolves every solver default against the dataset.
pub fn resolve_config(args: &SolverArgs, ds: &Dataset) -> (SolverConfig, Setting, SettingSource) {
    let (setting, source) = if args.pda {
        (Setting::Pda, SettingSource::Flag)
    } else if args.uda {
        (Setting::Uda, SettingSource::Flag)
    } else {
        match split_counts(ds).is_pda {
            Some(true) => (Setting::Pda, SettingSource::DetectedFromTruth),
            Some(false) => (Setting::Uda, SettingSource::DetectedFromTruth),
            None => (Setting::Uda, SettingSource::Assumed),
        }
    };
    let jda = args.jda || args.eta.is_some_and(|e| e > 0.0);
    let base = if jda {
        SolverConfig::jda_defaults_for(setting)
    } else {
        SolverConfig::defaults_for(setting)
    };
    let config = SolverConfig {
        lambda: args.lambda,
        gamma: args.gamma.unwrap_or(base.gamma),
        eta: args.eta.unwrap_or(base.eta),
        p: args.p,
        mode: args.mode,
        kernel: args.kernel,
        max_iter: args.max_iter,
        stop_on_stable_labels: true,
    };
    (config, setting, source)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    data::write_atomically(path, |w| std::io::Write::write_all(w, text.as_bytes()))
}

/// `‖α_closed - α_gd‖∞` for the problem the model solved last.
pub fn oracle_gap(prep: &Prepared<'_>, model: &FittedModel) -> Result<(f64, bool)> {
    let n = prep.kernel.order();
    if n > GD_ORACLE_MAX_ORDER {
        return Err(Error::Parameter(format!(
            "--oracle-check is limited to n+m <= {GD_ORACLE_MAX_ORDER}, dataset has {n}"
        )));
    }
    let cfg = &model.config;
    let mmd = match &model.jda {
        Some(j) => {
            let pseudo = &j.history[j.history.len() - 2];
            Some(mmd_matrix(&prep.labels.source_labels, pseudo, prep.labels.class_count())?)
        }
        None => None,
    };
    let eta = if mmd.is_some() { cfg.eta } else { 0.0 };
    let problem = Problem {
        kernel: &prep.kernel,
        laplacian: &model.laplacian,
        labels: &prep.labels,
        weights: Weights::new(cfg.lambda, cfg.gamma).with_eta(eta),
        mmd: mmd.as_ref(),
    };
    let gd = gd_oracle(&problem, GdControls::default())?;
    let gap = (&gd.alpha - &model.coefficients.alpha)
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok((gap, gd.converged))
}

/// Output of [`cmd_fit`].
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub report: RunReport,
    pub predictions: Vec<usize>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitOutput> {
    let ds = args.input.load(args.input.seed)?;
    let (config, setting, source) = resolve_config(&args.solver, &ds);
    let prep = Prepared::new(&ds, config.p, &config.kernel)?;
    let model = prep.fit(&config)?;

    let mut report = RunReport::new("fit", &args.input.describe(args.input.seed), &model.config, setting, source, &ds);
    if let Some(truth) = &ds.target_truth {
        let acc = accuracy(model.target_predictions(), truth)?;
        report.tables.push(Table::accuracy(&[(model.config.mode, acc)]));
    }
    if let Some(jda) = &model.jda {
        report.tables.push(Table::jda_history(jda, ds.target_truth.as_deref())?);
    }
    if args.oracle_check {
        let (gap, converged) = oracle_gap(&prep, &model)?;
        report.notes.push(format!(
            "oracle check: max |alpha_closed - alpha_gd| = {gap:.3e} (gd converged: {converged})"
        ));
    }
    report.timings = Some(model.timings);

    prepare_out_dir(&args.out)?;
    report.write(&args.out)?;
    data::save_predictions(args.out.join("predictions.csv"), ds.target_ids(), model.target_predictions())?;
    print!("{}", report.render());
    Ok(FitOutput {
        report,
        predictions: model.target_predictions().to_vec(),
    })
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<RunReport> {
    if args.seeds == 0 {
        return Err(Error::Parameter("--seeds must be at least 1".into()));
    }
    if args.input.data.is_some() && args.seeds > 1 {
        return Err(Error::Parameter("--seeds > 1 needs a synthetic input (--synth)".into()));
    }
    let mut rows = Vec::new();
    let mut header = None;
    for seed in args.input.seed..args.input.seed + args.seeds {
        let ds = args.input.load(seed)?;
        let truth = ds
            .target_truth
            .clone()
            .ok_or_else(|| Error::Input("ablation needs target ground truth to score modes".into()))?;
        let (config, setting, source) = resolve_config(&args.solver, &ds);
        let prep = Prepared::new(&ds, config.p, &config.kernel)?;
        let mut accs = Vec::new();
        for mode in GraphMode::ALL {
            let model = prep.fit(&SolverConfig { mode, ..config.clone() })?;
            accs.push((mode, accuracy(model.target_predictions(), &truth)?));
        }
        if header.is_none() {
            let mut r = RunReport::new("ablate", &args.input.describe(args.input.seed), &SolverConfig {
                kernel: prep.kernel.spec,
                ..config
            }, setting, source, &ds);
            r.notes.push(format!("seeds: {}..{}", args.input.seed, args.input.seed + args.seeds - 1));
            header = Some(r);
        }
        rows.push((seed, accs));
    }
    let mut report = header.expect("at least one seed");
    report.tables.push(Table::ablation(&rows));
    prepare_out_dir(&args.out)?;
    report.write(&args.out)?;
    print!("{}", report.render());
    Ok(report)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthTaskSpec {
        class_count: args.classes,
        private_source_classes: args.private,
        samples_per_class: args.per_class,
        dim: args.dim,
        separation: args.separation,
        shift: args.shift,
        noise: args.noise,
        seed: args.seed,
    };
    let ds = generate_synth(&spec)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out_dir(dir)?;
    }
    data::save_dataset(&ds, &args.out)?;
    let s = split_counts(&ds);
    println!(
        "wrote {}: n={} m={} C={} pda={}",
        args.out.display(),
        s.n,
        s.m,
        s.class_count,
        s.is_pda.unwrap_or(false)
    );
    Ok(())
}

pub fn cmd_probe(args: &ProbeArgs) -> Result<RunReport> {
    if args.radii.is_empty() {
        return Err(Error::Parameter("--radii needs at least one value".into()));
    }
    let ds = args.input.load(args.input.seed)?;
    let (config, setting, source) = resolve_config(&args.solver, &ds);
    let prep = Prepared::new(&ds, config.p, &config.kernel)?;
    let model = prep.fit(&config)?;
    let probes = smoothness_profile(
        |q| model.scores(q),
        ds.target_features(),
        &args.radii,
        args.samples,
        args.input.seed,
    )?;
    let mut report = RunReport::new("probe", &args.input.describe(args.input.seed), &model.config, setting, source, &ds);
    if let Some(truth) = &ds.target_truth {
        let acc = accuracy(model.target_predictions(), truth)?;
        report.tables.push(Table::accuracy(&[(model.config.mode, acc)]));
    }
    report.tables.push(Table::smoothness(&probes));
    report.timings = Some(model.timings);
    prepare_out_dir(&args.out)?;
    report.write(&args.out)?;
    print!("{}", report.render());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("idsp").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_resolve_per_setting() {
        let Command::Fit(fit) = parse(&["fit", "--synth", "pda"]).command else {
            panic!()
        };
        assert_eq!(fit.solver.mode, GraphMode::T);
        assert_eq!(fit.solver.kernel, KernelSpec::Linear);
        let pda = fit.input.load(0).unwrap();
        let (cfg, setting, source) = resolve_config(&fit.solver, &pda);
        assert_eq!((setting, source), (Setting::Pda, SettingSource::DetectedFromTruth));
        assert_eq!((cfg.lambda, cfg.gamma, cfg.eta, cfg.p), (0.1, 5.0, 0.0, 10));

        let uda = generate_synth(&SynthTaskSpec::standard_uda(0)).unwrap();
        assert_eq!(resolve_config(&fit.solver, &uda).0.gamma, 1.0);

        let Command::Fit(jda) = parse(&["fit", "--synth", "uda", "--jda"]).command else {
            panic!()
        };
        let (cfg, ..) = resolve_config(&jda.solver, &uda);
        assert_eq!((cfg.gamma, cfg.eta), (2.0, 0.5));
        let (cfg, ..) = resolve_config(&jda.solver, &pda);
        assert_eq!((cfg.gamma, cfg.eta), (10.0, 0.01));
    }

    #[test]
    fn explicit_flags_win() {
        let Command::Fit(fit) = parse(&[
            "fit", "--data", "x.csv", "--gamma", "3", "--uda", "--kernel", "rbf:2", "--mode", "cst", "--p", "4",
        ])
        .command
        else {
            panic!()
        };
        let pda = generate_synth(&SynthTaskSpec::standard_pda(0)).unwrap();
        let (cfg, setting, source) = resolve_config(&fit.solver, &pda);
        assert_eq!((setting, source), (Setting::Uda, SettingSource::Flag));
        assert_eq!(cfg.gamma, 3.0);
        assert_eq!(cfg.kernel, KernelSpec::rbf(2.0));
        assert_eq!(cfg.mode, GraphMode::Cst);
        assert_eq!(cfg.p, 4);
    }

    #[test]
    fn conflicting_or_missing_inputs_rejected() {
        let try_parse = |a: &[&str]| Cli::try_parse_from(std::iter::once("idsp").chain(a.iter().copied()));
        assert!(try_parse(&["fit"]).is_err());
        assert!(try_parse(&["fit", "--data", "a.csv", "--synth", "pda"]).is_err());
        assert!(try_parse(&["fit", "--synth", "pda", "--pda", "--uda"]).is_err());
        assert!(try_parse(&["fit", "--synth", "pda", "--mode", "xyz"]).is_err());
        assert!(try_parse(&["synth"]).is_err());
    }
}
