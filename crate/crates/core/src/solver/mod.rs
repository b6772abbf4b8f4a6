//! Closed-form IDSP solve.
//!
//! With `F = Kα` the objective is
//!
//! ```text
//! J(α) = ‖(Y - αᵀK) V‖²_F + λ tr(αᵀKα) + tr(αᵀK(γL + ηM)Kα)
//! ```
//!
//! and its minimiser solves `((V + γL + ηM) K + λI) α = V Yᵀ`. The system
//! matrix is not symmetric, so it is factorised with partial-pivoting LU.

mod jda;
mod mmd;

pub use jda::{jda_iterate, solve_jda, JdaOutcome};
pub use mmd::{mmd_matrix, MmdBlock, MmdMatrix};

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};

use crate::data::Domain;
use crate::error::{Error, Result};
use crate::graph::{GraphMode, Laplacian};
use crate::kernels::{cross_kernel, KernelMatrix, KernelSpec};

/// Transfer setting; selects hyperparameter defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Source label space strictly contains the target one.
    Pda,
    /// Identical label spaces.
    Uda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the RKHS norm. Must be positive.
    pub lambda: f64,
    /// Weight of the graph Laplacian term.
    pub gamma: f64,
    /// Weight of the MMD term; 0 disables the JDA loop.
    pub eta: f64,
    /// Neighbour count of the kNN graph.
    pub p: usize,
    pub mode: GraphMode,
    pub kernel: KernelSpec,
    pub max_iter: usize,
    pub stop_on_stable_labels: bool,
}

impl SolverConfig {
    /// λ = 0.1, p = 10, mode T, linear kernel; γ = 5 for PDA and 1 for UDA.
    pub fn defaults_for(setting: Setting) -> Self {
        SolverConfig {
            lambda: 0.1,
            gamma: match setting {
                Setting::Pda => 5.0,
                Setting::Uda => 1.0,
            },
            eta: 0.0,
            p: 10,
            mode: GraphMode::T,
            kernel: KernelSpec::Linear,
            max_iter: 10,
            stop_on_stable_labels: true,
        }
    }

    /// JDA defaults: γ = 2, η = 0.5 for UDA; γ = 10, η = 0.01 for PDA.
    pub fn jda_defaults_for(setting: Setting) -> Self {
        let (gamma, eta) = match setting {
            Setting::Pda => (10.0, 0.01),
            Setting::Uda => (2.0, 0.5),
        };
        SolverConfig {
            gamma,
            eta,
            ..Self::defaults_for(setting)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Parameter(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Parameter(format!("eta must be nonnegative, got {}", self.eta)));
        }
        if self.p == 0 {
            return Err(Error::Parameter("p must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// One-hot source labels `Y` (`C × (n+m)`, zero target columns) and the
/// source indicator `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEncoding {
    pub y: Array2<f64>,
    /// Diagonal of `V`: true for source samples.
    pub source_mask: Vec<bool>,
    pub source_labels: Vec<usize>,
}

impl LabelEncoding {
    pub fn class_count(&self) -> usize {
        self.y.nrows()
    }

    pub fn order(&self) -> usize {
        self.source_mask.len()
    }

    pub fn n_source(&self) -> usize {
        self.source_labels.len()
    }

    pub fn n_target(&self) -> usize {
        self.order() - self.n_source()
    }

    pub fn domains(&self) -> Vec<Domain> {
        self.source_mask
            .iter()
            .map(|&s| if s { Domain::Source } else { Domain::Target })
            .collect()
    }

    /// Dense `V`.
    pub fn indicator(&self) -> Array2<f64> {
        Array2::from_diag(&ndarray::Array1::from_iter(
            self.source_mask.iter().map(|&s| if s { 1.0 } else { 0.0 }),
        ))
    }
}

/// Encodes `n` source labels followed by `target_count` unlabeled targets.
pub fn encode_labels(source_labels: &[usize], class_count: usize, target_count: usize) -> Result<LabelEncoding> {
    if class_count == 0 {
        return Err(Error::Input("class count must be at least 1".into()));
    }
    let n = source_labels.len();
    let mut y = Array2::zeros((class_count, n + target_count));
    for (i, &l) in source_labels.iter().enumerate() {
        if l >= class_count {
            return Err(Error::Input(format!(
                "source label {l} at index {i} outside [0, {class_count})"
            )));
        }
        y[[l, i]] = 1.0;
    }
    Ok(LabelEncoding {
        y,
        source_mask: (0..n + target_count).map(|i| i < n).collect(),
        source_labels: source_labels.to_vec(),
    })
}

/// Representer weights `α` (`(n+m) × C`) with the kernel they were fit with.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub alpha: Array2<f64>,
    pub kernel: KernelSpec,
}

/// Regularisation weights of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub lambda: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Weights {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        Weights { lambda, gamma, eta: 0.0 }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Weights { eta, ..self }
    }
}

/// Everything the objective depends on besides `α`.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub kernel: &'a KernelMatrix,
    pub laplacian: &'a Laplacian,
    pub labels: &'a LabelEncoding,
    pub weights: Weights,
    /// Required exactly when `weights.eta > 0`.
    pub mmd: Option<&'a MmdMatrix>,
}

impl<'a> Problem<'a> {
    pub fn new(
        kernel: &'a KernelMatrix,
        laplacian: &'a Laplacian,
        labels: &'a LabelEncoding,
        weights: Weights,
    ) -> Self {
        Problem {
            kernel,
            laplacian,
            labels,
            weights,
            mmd: None,
        }
    }

    pub fn with_mmd(self, mmd: &'a MmdMatrix) -> Self {
        Problem { mmd: Some(mmd), ..self }
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        let w = self.weights;
        if !(w.lambda.is_finite() && w.lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda must be positive, got {}", w.lambda)));
        }
        if !(w.gamma.is_finite() && w.gamma >= 0.0 && w.eta.is_finite() && w.eta >= 0.0) {
            return Err(Error::Parameter(format!(
                "gamma and eta must be nonnegative, got {} and {}",
                w.gamma, w.eta
            )));
        }
        if self.laplacian.order() != n || self.labels.order() != n {
            return Err(Error::Input(format!(
                "order mismatch: kernel {n}, laplacian {}, labels {}",
                self.laplacian.order(),
                self.labels.order()
            )));
        }
        match (w.eta > 0.0, self.mmd) {
            (true, None) => Err(Error::Parameter("eta > 0 requires an MMD matrix".into())),
            (_, Some(m)) if m.order() != n => Err(Error::Input(format!(
                "MMD matrix of order {} for a problem of order {n}",
                m.order()
            ))),
            _ => Ok(()),
        }
    }

    fn mmd_term(&self) -> Option<&MmdMatrix> {
        self.mmd.filter(|_| self.weights.eta > 0.0)
    }

    /// Solves `((V + γL + ηM) K + λI) α = V Yᵀ`.
    pub fn solve(&self) -> Result<Coefficients> {
        self.validate()?;
        let n = self.order();
        let c = self.labels.class_count();
        let k = &self.kernel.values;
        let w = self.weights;

        let mut system = if w.gamma > 0.0 && !self.laplacian.is_zero() {
            let mut lk = self.laplacian.mul_dense(k.view());
            lk *= w.gamma;
            lk
        } else {
            Array2::zeros((n, n))
        };
        if let Some(mmd) = self.mmd_term() {
            system.scaled_add(w.eta, &mmd.mul_dense(k.view()));
        }
        for (i, &is_source) in self.labels.source_mask.iter().enumerate() {
            if is_source {
                let mut row = system.row_mut(i);
                row += &k.row(i);
            }
            system[[i, i]] += w.lambda;
        }

        let a = DMatrix::from_fn(n, n, |i, j| system[[i, j]]);
        let b = DMatrix::from_fn(n, c, |i, j| {
            if self.labels.source_mask[i] {
                self.labels.y[[j, i]]
            } else {
                0.0
            }
        });
        let lu = a.lu();
        let singular = || Error::Singular { order: n, lambda: w.lambda };
        let u = lu.u();
        let pivots = u.diagonal().map(f64::abs);
        let (lo, hi) = (pivots.min(), pivots.max());
        if !(hi.is_finite() && lo > hi * f64::EPSILON * n as f64) {
            return Err(singular());
        }
        let x = lu.solve(&b).ok_or_else(singular)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(singular());
        }
        Ok(Coefficients {
            alpha: Array2::from_shape_fn((n, c), |(i, j)| x[(i, j)]),
            kernel: self.kernel.spec,
        })
    }

    /// Value of the objective at `alpha`.
    pub fn objective(&self, alpha: ArrayView2<'_, f64>) -> Result<f64> {
        self.validate()?;
        let n = self.order();
        let c = self.labels.class_count();
        if alpha.dim() != (n, c) {
            return Err(Error::Input(format!(
                "alpha has shape {:?}, expected ({n}, {c})",
                alpha.dim()
            )));
        }
        let w = self.weights;
        let f = self.kernel.values.dot(&alpha);
        let fit: f64 = self
            .labels
            .source_mask
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| {
                f.row(i)
                    .iter()
                    .zip(self.labels.y.column(i))
                    .map(|(fi, yi)| (yi - fi) * (yi - fi))
                    .sum::<f64>()
            })
            .sum();
        let ridge = w.lambda * (&alpha * &f).sum();
        let graph = if w.gamma > 0.0 {
            w.gamma * self.laplacian.trace_form(f.view())
        } else {
            0.0
        };
        let mmd = self
            .mmd_term()
            .map_or(0.0, |m| w.eta * m.trace_form(f.view()));
        Ok(fit + ridge + graph + mmd)
    }
}

/// `α = ((V + γL) K + λI)⁻¹ V Yᵀ`.
pub fn solve_closed_form(
    kernel: &KernelMatrix,
    laplacian: &Laplacian,
    labels: &LabelEncoding,
    lambda: f64,
    gamma: f64,
) -> Result<Coefficients> {
    Problem::new(kernel, laplacian, labels, Weights::new(lambda, gamma)).solve()
}

/// Objective value at `alpha`; `mmd` must be given when `weights.eta > 0`.
pub fn objective_value(
    alpha: ArrayView2<'_, f64>,
    kernel: &KernelMatrix,
    laplacian: &Laplacian,
    labels: &LabelEncoding,
    weights: Weights,
    mmd: Option<&MmdMatrix>,
) -> Result<f64> {
    let problem = Problem {
        kernel,
        laplacian,
        labels,
        weights,
        mmd,
    };
    problem.objective(alpha)
}

/// Class scores and argmax labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub scores: Array2<f64>,
    pub labels: Vec<usize>,
}

/// Per-row argmax; ties go to the lower class index.
pub fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Scores `Kα` at the training samples.
pub fn predict_in_sample(coefficients: &Coefficients, kernel: &KernelMatrix) -> Result<Predictions> {
    if coefficients.alpha.nrows() != kernel.order() {
        return Err(Error::Input(format!(
            "alpha has {} rows for a kernel of order {}",
            coefficients.alpha.nrows(),
            kernel.order()
        )));
    }
    let scores = kernel.values.dot(&coefficients.alpha);
    let labels = argmax_rows(scores.view());
    Ok(Predictions { scores, labels })
}

/// Scores `Σ_i α_i K(x_i, q)` at new query rows.
pub fn predict_out_of_sample(
    coefficients: &Coefficients,
    x_train: ArrayView2<'_, f64>,
    x_query: ArrayView2<'_, f64>,
) -> Result<Predictions> {
    if coefficients.alpha.nrows() != x_train.nrows() {
        return Err(Error::Input(format!(
            "alpha has {} rows for {} training samples",
            coefficients.alpha.nrows(),
            x_train.nrows()
        )));
    }
    let classes = coefficients.alpha.ncols();
    if x_query.nrows() == 0 {
        return Ok(Predictions {
            scores: Array2::zeros((0, classes)),
            labels: Vec::new(),
        });
    }
    let cross = cross_kernel(x_train, x_query, &coefficients.kernel)?;
    let scores = cross.t().dot(&coefficients.alpha);
    let labels = argmax_rows(scores.view());
    Ok(Predictions { scores, labels })
}
