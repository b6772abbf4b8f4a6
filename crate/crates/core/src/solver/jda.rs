use ndarray::ArrayView2;

use super::{mmd_matrix, predict_in_sample, Coefficients, LabelEncoding, Problem, SolverConfig, Weights};
use crate::error::{Error, Result};
use crate::graph::{self, Laplacian};
use crate::kernels::{build_kernel_matrix, KernelMatrix};

/// Result of the pseudo-label loop.
#[derive(Debug, Clone, PartialEq)]
pub struct JdaOutcome {
    pub coefficients: Coefficients,
    /// Target pseudo-labels: entry 0 from the plain (η = 0) solve, then one
    /// entry per MMD-regularised solve.
    pub history: Vec<Vec<usize>>,
    /// The last solve reproduced the previous pseudo-labels.
    pub converged: bool,
}

impl JdaOutcome {
    /// Number of MMD-regularised solves performed.
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn final_labels(&self) -> &[usize] {
        self.history.last().map_or(&[], Vec::as_slice)
    }
}

/// Builds the graph and kernel from `x`, then runs [`jda_iterate`].
pub fn solve_jda(x: ArrayView2<'_, f64>, labels: &LabelEncoding, config: &SolverConfig) -> Result<JdaOutcome> {
    config.validate()?;
    if x.nrows() != labels.order() {
        return Err(Error::Input(format!(
            "{} feature rows for {} encoded samples",
            x.nrows(),
            labels.order()
        )));
    }
    let g = graph::knn_affinity(x, config.p)?;
    let g = graph::apply_mode(&g, &labels.domains(), config.mode)?;
    let l = graph::laplacian(&g)?;
    let k = build_kernel_matrix(x, &config.kernel)?;
    jda_iterate(&k, &l, labels, config)
}

/// Alternates MMD construction from the current target pseudo-labels with the
/// extended closed-form solve. `K`, `L`, `V` and `Y` stay fixed; only `M`
/// changes between iterations.
pub fn jda_iterate(
    kernel: &KernelMatrix,
    laplacian: &Laplacian,
    labels: &LabelEncoding,
    config: &SolverConfig,
) -> Result<JdaOutcome> {
    config.validate()?;
    if config.eta <= 0.0 {
        return Err(Error::Parameter("the JDA loop needs eta > 0".into()));
    }
    let n = labels.n_source();
    let weights = Weights::new(config.lambda, config.gamma);
    let target_labels = |c: &Coefficients| -> Result<Vec<usize>> {
        Ok(predict_in_sample(c, kernel)?.labels.split_off(n))
    };

    let base = Problem::new(kernel, laplacian, labels, weights);
    let mut coefficients = base.solve()?;
    let mut history = vec![target_labels(&coefficients)?];
    let mut converged = false;

    for _ in 0..config.max_iter {
        let pseudo = history.last().expect("history starts non-empty");
        let mmd = mmd_matrix(&labels.source_labels, pseudo, labels.class_count())?;
        coefficients = Problem::new(kernel, laplacian, labels, weights.with_eta(config.eta))
            .with_mmd(&mmd)
            .solve()?;
        let next = target_labels(&coefficients)?;
        let stable = &next == pseudo;
        history.push(next);
        converged = stable;
        if stable && config.stop_on_stable_labels {
            break;
        }
    }
    Ok(JdaOutcome {
        coefficients,
        history,
        converged,
    })
}
