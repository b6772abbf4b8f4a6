//! Gram matrices and out-of-sample kernel rows for the representer-form
//! classifier `f(x) = Σ α_i K(x_i, x)`.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// How an RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Fixed bandwidth in units of feature distance. Must be positive.
    Explicit(f64),
    /// Median of the pairwise Euclidean distances over distinct sample pairs,
    /// resolved when the Gram matrix is built.
    MedianHeuristic,
}

/// Kernel function used to build `K`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum KernelSpec {
    /// `⟨x, y⟩`
    #[default]
    Linear,
    /// `exp(-‖x - y‖² / (2σ²))`
    Rbf(Bandwidth),
    /// `⟨x, y⟩ / (‖x‖ ‖y‖)`
    Cosine,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Self {
        KernelSpec::Rbf(Bandwidth::Explicit(bandwidth))
    }

    pub fn rbf_median() -> Self {
        KernelSpec::Rbf(Bandwidth::MedianHeuristic)
    }

    /// Returns the bandwidth if this spec is fully resolved (no median rule
    /// left pending).
    pub fn is_resolved(&self) -> bool {
        !matches!(self, KernelSpec::Rbf(Bandwidth::MedianHeuristic))
    }

    fn validate(&self) -> Result<()> {
        if let KernelSpec::Rbf(Bandwidth::Explicit(bw)) = self {
            if !(bw.is_finite() && *bw > 0.0) {
                return Err(Error::Parameter(format!(
                    "rbf bandwidth must be positive and finite, got {bw}"
                )));
            }
        }
        Ok(())
    }

    /// Resolves the median heuristic against `x`, returning a spec that
    /// evaluates identically on any later query.
    pub fn resolve(&self, x: ArrayView2<'_, f64>) -> Result<KernelSpec> {
        self.validate()?;
        match self {
            KernelSpec::Rbf(Bandwidth::MedianHeuristic) => {
                Ok(KernelSpec::rbf(median_pairwise_distance(x)?))
            }
            other => Ok(*other),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Cosine => write!(f, "cosine"),
            KernelSpec::Rbf(Bandwidth::MedianHeuristic) => write!(f, "rbf:median"),
            KernelSpec::Rbf(Bandwidth::Explicit(bw)) => write!(f, "rbf:{bw}"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// Parses `linear`, `cosine`, `rbf` (median heuristic), `rbf:median` or
    /// `rbf:<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.trim() {
            "linear" => KernelSpec::Linear,
            "cosine" => KernelSpec::Cosine,
            "rbf" | "rbf:median" => KernelSpec::rbf_median(),
            other => match other.strip_prefix("rbf:") {
                Some(bw) => KernelSpec::rbf(bw.parse().map_err(|_| {
                    Error::Parameter(format!("invalid rbf bandwidth {bw:?}"))
                })?),
                None => return Err(Error::Parameter(format!("unknown kernel {other:?}"))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Dense Gram matrix together with the resolved spec that produced it.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub values: Array2<f64>,
    /// Always resolved: a median-heuristic request is frozen to its bandwidth.
    pub spec: KernelSpec,
}

impl KernelMatrix {
    pub fn order(&self) -> usize {
        self.values.nrows()
    }
}

/// Builds the Gram matrix of the rows of `x`.
///
/// Every unordered pair is evaluated once and mirrored, so the result is
/// symmetric bit for bit.
pub fn build_kernel_matrix(x: ArrayView2<'_, f64>, spec: &KernelSpec) -> Result<KernelMatrix> {
    check_features(x)?;
    let spec = spec.resolve(x)?;
    let eval = Evaluator::new(&spec, x)?;
    let n = x.nrows();
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = eval.pair(x.row(i), i, x.row(j), eval.norm(j));
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(KernelMatrix { values, spec })
}

/// Kernel evaluations between training rows and query rows; entry `(i, j)` is
/// `K(train_i, query_j)`.
///
/// `spec` must already be resolved (use the spec stored on the training
/// [`KernelMatrix`]).
pub fn cross_kernel(
    x_train: ArrayView2<'_, f64>,
    x_query: ArrayView2<'_, f64>,
    spec: &KernelSpec,
) -> Result<Array2<f64>> {
    if !spec.is_resolved() {
        return Err(Error::Parameter(
            "rbf median bandwidth must be resolved at fit time before out-of-sample use".into(),
        ));
    }
    spec.validate()?;
    if x_query.nrows() > 0 && x_train.ncols() != x_query.ncols() {
        return Err(Error::Input(format!(
            "dimension mismatch: training rows have {} features, query rows have {}",
            x_train.ncols(),
            x_query.ncols()
        )));
    }
    check_features(x_train)?;
    if x_query.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite query feature".into()));
    }
    let eval = Evaluator::new(spec, x_train)?;
    let query_norms = match spec {
        KernelSpec::Cosine => row_norms(x_query, "query")?,
        _ => Vec::new(),
    };
    let mut out = Array2::zeros((x_train.nrows(), x_query.nrows()));
    for (j, q) in x_query.rows().into_iter().enumerate() {
        let qn = query_norms.get(j).copied().unwrap_or(0.0);
        for (i, t) in x_train.rows().into_iter().enumerate() {
            out[[i, j]] = eval.pair(t, i, q, qn);
        }
    }
    Ok(out)
}

/// Median of `‖x_i - x_j‖` over `i < j`.
pub fn median_pairwise_distance(x: ArrayView2<'_, f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DegenerateBandwidth(
            "median heuristic needs at least two samples".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(x.row(i), x.row(j)).sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if dists.len() % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 && median.is_finite() {
        Ok(median)
    } else {
        Err(Error::DegenerateBandwidth(
            "median pairwise distance is zero (rows are identical or mostly duplicated)".into(),
        ))
    }
}

pub(crate) fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_features(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Input(format!(
            "feature matrix must be non-empty, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite feature in row {}",
            pos / x.ncols()
        )));
    }
    Ok(())
}

fn row_norms(x: ArrayView2<'_, f64>, what: &str) -> Result<Vec<f64>> {
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let n = r.dot(&r).sqrt();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::Input(format!(
                    "{what} row {i} has zero norm; cosine similarity is undefined"
                )))
            }
        })
        .collect()
}

/// Pairwise evaluation with per-row quantities precomputed.
struct Evaluator {
    kind: KernelSpec,
    norms: Vec<f64>,
}

impl Evaluator {
    fn new(spec: &KernelSpec, x: ArrayView2<'_, f64>) -> Result<Self> {
        let norms = match spec {
            KernelSpec::Cosine => row_norms(x, "feature")?,
            _ => Vec::new(),
        };
        Ok(Evaluator { kind: *spec, norms })
    }

    fn norm(&self, i: usize) -> f64 {
        self.norms.get(i).copied().unwrap_or(0.0)
    }

    fn pair(&self, a: ArrayView1<'_, f64>, a_idx: usize, b: ArrayView1<'_, f64>, b_norm: f64) -> f64 {
        match self.kind {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Cosine => (a.dot(&b) / (self.norm(a_idx) * b_norm)).clamp(-1.0, 1.0),
            KernelSpec::Rbf(Bandwidth::Explicit(bw)) => {
                (-squared_distance(a, b) / (2.0 * bw * bw)).exp()
            }
            KernelSpec::Rbf(Bandwidth::MedianHeuristic) => {
                unreachable!("median bandwidth resolved before evaluation")
            }
        }
    }
}
