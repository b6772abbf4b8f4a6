#![allow(dead_code)]

use idsp::data::Domain;
use idsp::graph::{self, GraphMode, Laplacian};
use idsp::kernels::{build_kernel_matrix, KernelMatrix, KernelSpec};
use idsp::solver::{encode_labels, LabelEncoding};
use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

pub fn to_nalgebra(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn min_eigenvalue(a: ArrayView2<'_, f64>) -> f64 {
    to_nalgebra(a).symmetric_eigen().eigenvalues.min()
}

pub fn inf_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// A small solver instance: features, kernel, Laplacian for one mode, labels.
pub struct Instance {
    pub x: Array2<f64>,
    pub kernel: KernelMatrix,
    pub laplacian: Laplacian,
    pub labels: LabelEncoding,
    pub lambda: f64,
    pub gamma: f64,
    pub mode: GraphMode,
}

pub fn random_instance(seed: u64, mode: GraphMode) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(2..=20);
    let m = r.random_range(1..=10);
    let d = r.random_range(1..=5);
    let c = r.random_range(1..=4);
    let x = gaussian(&mut r, n + m, d);
    let source_labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
    let spec = match r.random_range(0..3) {
        0 => KernelSpec::Linear,
        1 => KernelSpec::rbf_median(),
        _ => KernelSpec::Cosine,
    };
    let p = r.random_range(1..=5.min(n + m - 1));
    let lambda = r.random_range(0.01..=1.0);
    let gamma = r.random_range(0.0..=5.0);
    let labels = encode_labels(&source_labels, c, m).unwrap();
    let knn = graph::knn_affinity(x.view(), p).unwrap();
    let domains: Vec<Domain> = labels.domains();
    let g = graph::apply_mode(&knn, &domains, mode).unwrap();
    let laplacian = graph::laplacian(&g).unwrap();
    let kernel = build_kernel_matrix(x.view(), &spec).unwrap();
    Instance {
        x,
        kernel,
        laplacian,
        labels,
        lambda,
        gamma,
        mode,
    }
}

/// `Σ u uᵀ` over the marginal group and each class, with `u = 1/n_g` on the
/// group's source members and `-1/m_g` on its target members.
pub fn explicit_mmd(source: &[usize], pseudo: &[usize], classes: usize) -> Array2<f64> {
    let (n, total) = (source.len(), source.len() + pseudo.len());
    let label = |i: usize| if i < n { source[i] } else { pseudo[i - n] };
    let groups = std::iter::once(None).chain((0..classes).map(Some));
    let mut out = Array2::zeros((total, total));
    for group in groups {
        let member = |i: usize| group.is_none_or(|c| label(i) == c);
        let ns = (0..n).filter(|&i| member(i)).count();
        let nt = (n..total).filter(|&i| member(i)).count();
        if ns == 0 || nt == 0 {
            continue;
        }
        let u: Vec<f64> = (0..total)
            .map(|i| match (member(i), i < n) {
                (false, _) => 0.0,
                (true, true) => 1.0 / ns as f64,
                (true, false) => -1.0 / nt as f64,
            })
            .collect();
        for i in 0..total {
            for j in 0..total {
                out[[i, j]] += u[i] * u[j];
            }
        }
    }
    out
}
