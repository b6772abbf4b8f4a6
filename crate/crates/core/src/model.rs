//! End-to-end fitting: graph, kernel, solve, predict.

use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{self, AffinityGraph, GraphMode, Laplacian};
use crate::kernels::{build_kernel_matrix, KernelMatrix, KernelSpec};
use crate::solver::{
    encode_labels, jda_iterate, predict_in_sample, predict_out_of_sample, Coefficients, JdaOutcome,
    LabelEncoding, Predictions, Problem, SolverConfig, Weights,
};

/// Wall-clock time spent in each phase of a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub graph: Duration,
    pub kernel: Duration,
    pub solve: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.graph + self.kernel + self.solve
    }
}

/// Mode-independent pieces of a fit: the full kNN graph, the Gram matrix and
/// the label encoding. Ablations reuse one of these across graph modes.
#[derive(Debug, Clone)]
pub struct Prepared<'d> {
    pub dataset: &'d Dataset,
    pub knn: AffinityGraph,
    pub kernel: KernelMatrix,
    pub labels: LabelEncoding,
    pub timings: Timings,
}

impl<'d> Prepared<'d> {
    pub fn new(dataset: &'d Dataset, p: usize, kernel: &KernelSpec) -> Result<Self> {
        let labels = encode_labels(&dataset.source_labels, dataset.class_count, dataset.n_target())?;
        let start = Instant::now();
        let knn = graph::knn_affinity(dataset.x.view(), p)?;
        let graph_time = start.elapsed();
        let start = Instant::now();
        let kernel = build_kernel_matrix(dataset.x.view(), kernel)?;
        let kernel_time = start.elapsed();
        Ok(Prepared {
            dataset,
            knn,
            kernel,
            labels,
            timings: Timings {
                graph: graph_time,
                kernel: kernel_time,
                solve: Duration::ZERO,
            },
        })
    }

    pub fn laplacian(&self, mode: GraphMode) -> Result<Laplacian> {
        let g = graph::apply_mode(&self.knn, &self.dataset.domains, mode)?;
        graph::laplacian(&g)
    }

    /// Solves with the graph restricted to `config.mode`; runs the
    /// pseudo-label loop when `config.eta > 0`.
    pub fn fit(&self, config: &SolverConfig) -> Result<FittedModel> {
        config.validate()?;
        if config.p != self.knn.p {
            return Err(Error::Invariant(format!(
                "prepared graph uses p = {}, config asks for p = {}",
                self.knn.p, config.p
            )));
        }
        let mut timings = self.timings;
        let start = Instant::now();
        let laplacian = self.laplacian(config.mode)?;
        timings.graph += start.elapsed();

        let start = Instant::now();
        let (coefficients, jda) = if config.eta > 0.0 {
            let outcome = jda_iterate(&self.kernel, &laplacian, &self.labels, config)?;
            (outcome.coefficients.clone(), Some(outcome))
        } else {
            let weights = Weights::new(config.lambda, config.gamma);
            let c = Problem::new(&self.kernel, &laplacian, &self.labels, weights).solve()?;
            (c, None)
        };
        let in_sample = predict_in_sample(&coefficients, &self.kernel)?;
        timings.solve = start.elapsed();

        Ok(FittedModel {
            config: SolverConfig {
                kernel: self.kernel.spec,
                ..config.clone()
            },
            coefficients,
            in_sample,
            jda,
            laplacian,
            timings,
            x_train: self.dataset.x.clone(),
            n_source: self.dataset.n_source(),
        })
    }
}

/// A solved model together with its in-sample predictions.
#[derive(Debug, Clone)]
pub struct FittedModel {
    /// Configuration with the kernel bandwidth resolved.
    pub config: SolverConfig,
    pub coefficients: Coefficients,
    pub in_sample: Predictions,
    pub jda: Option<JdaOutcome>,
    pub laplacian: Laplacian,
    pub timings: Timings,
    x_train: Array2<f64>,
    n_source: usize,
}

impl FittedModel {
    /// Predicted classes of the target samples, in dataset order.
    pub fn target_predictions(&self) -> &[usize] {
        &self.in_sample.labels[self.n_source..]
    }

    pub fn predict(&self, query: ArrayView2<'_, f64>) -> Result<Predictions> {
        predict_out_of_sample(&self.coefficients, self.x_train.view(), query)
    }

    /// Class scores of arbitrary points; the form the smoothness probe takes.
    pub fn scores(&self, query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.predict(query)?.scores)
    }
}

/// Builds everything from scratch and fits one configuration.
pub fn fit(dataset: &Dataset, config: &SolverConfig) -> Result<FittedModel> {
    config.validate()?;
    Prepared::new(dataset, config.p, &config.kernel)?.fit(config)
}
