//! p-nearest-neighbour cosine affinity graphs, domain masking and the
//! unnormalised graph Laplacian `L = D - G`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::data::Domain;
use crate::error::{Error, Result};

/// Which part of the neighbourhood structure is preserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GraphMode {
    /// No structure preserving: the graph is empty.
    Np,
    /// Target-target edges only.
    #[default]
    T,
    /// Source-source and target-target edges.
    St,
    /// Every edge of the kNN graph.
    Cst,
}

impl GraphMode {
    pub const ALL: [GraphMode; 4] = [GraphMode::Np, GraphMode::T, GraphMode::St, GraphMode::Cst];

    fn keeps(self, a: Domain, b: Domain) -> bool {
        match self {
            GraphMode::Np => false,
            GraphMode::T => a == Domain::Target && b == Domain::Target,
            GraphMode::St => a == b,
            GraphMode::Cst => true,
        }
    }
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphMode::Np => "np",
            GraphMode::T => "t",
            GraphMode::St => "st",
            GraphMode::Cst => "cst",
        })
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "np" => Ok(GraphMode::Np),
            "t" => Ok(GraphMode::T),
            "st" => Ok(GraphMode::St),
            "cst" => Ok(GraphMode::Cst),
            other => Err(Error::Parameter(format!(
                "unknown graph mode {other:?} (expected np, t, st or cst)"
            ))),
        }
    }
}

/// Sparse symmetric nonnegative affinity matrix.
///
/// Rows are stored as `(column, weight)` lists sorted by column. Only strictly
/// positive weights are stored and the diagonal is always empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    rows: Vec<Vec<(usize, f64)>>,
    pub p: usize,
    /// `None` until a mode has been applied (the full kNN graph).
    pub mode: Option<GraphMode>,
}

impl AffinityGraph {
    /// Builds a graph from explicit rows. Rows are sorted and zero weights
    /// dropped; symmetry is checked later by [`laplacian`].
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, p: usize) -> Result<Self> {
        let order = rows.len();
        let mut out = Vec::with_capacity(order);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(_, w)| w != 0.0);
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Input(format!("duplicate edge ({i}, {})", w[0].0)));
                }
            }
            for &(j, w) in &row {
                if j >= order {
                    return Err(Error::Input(format!("edge ({i}, {j}) out of range {order}")));
                }
                if j == i {
                    return Err(Error::Input(format!("self loop at {i}")));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::Input(format!("edge ({i}, {j}) has weight {w}")));
                }
            }
            out.push(row);
        }
        Ok(AffinityGraph {
            rows: out,
            p,
            mode: None,
        })
    }

    pub fn from_dense(g: ArrayView2<'_, f64>, p: usize) -> Result<Self> {
        let rows = g
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, w)| w != 0.0).collect())
            .collect();
        Self::from_rows(rows, p)
    }

    pub fn empty(order: usize) -> Self {
        AffinityGraph {
            rows: vec![Vec::new(); order],
            p: 0,
            mode: None,
        }
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    /// Number of stored (nonzero) entries, counting both orientations.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.order();
        let mut g = Array2::zeros((n, n));
        for (i, j, w) in self.edges() {
            g[[i, j]] = w;
        }
        g
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j, w)| self.weight(j, i) == w)
    }
}

/// Cosine p-nearest-neighbour affinity over all samples.
///
/// Edge `{i, j}` exists when either endpoint ranks the other among its `p`
/// most similar samples; its weight is `max(0, cos(x_i, x_j))`. Ranking ties
/// go to the lower sample index.
pub fn knn_affinity(x: ArrayView2<'_, f64>, p: usize) -> Result<AffinityGraph> {
    let n = x.nrows();
    if p == 0 {
        return Err(Error::Parameter("neighbour count p must be at least 1".into()));
    }
    if p >= n {
        return Err(Error::Parameter(format!(
            "neighbour count p = {p} must be smaller than the sample count {n}"
        )));
    }
    let sim = cosine_similarities(x)?;

    let mut selected = vec![vec![false; n]; n];
    let mut candidates: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i));
        let row = sim.row(i);
        let by_rank =
            |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then_with(|| a.cmp(b));
        if p < candidates.len() {
            candidates.select_nth_unstable_by(p - 1, by_rank);
        }
        for &j in &candidates[..p] {
            selected[i][j] = true;
            selected[j][i] = true;
        }
    }

    let rows = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| selected[i][j])
                .map(|j| (j, sim[[i, j]].max(0.0)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    Ok(AffinityGraph {
        rows,
        p,
        mode: None,
    })
}

/// Pairwise cosine similarities, computed once per unordered pair.
pub(crate) fn cosine_similarities(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    let mut unit = x.to_owned();
    for (i, mut r) in unit.rows_mut().into_iter().enumerate() {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite feature in row {i}")));
        }
        let norm = r.dot(&r).sqrt();
        if norm == 0.0 {
            return Err(Error::Input(format!(
                "row {i} has zero norm; cosine similarity is undefined"
            )));
        }
        r.mapv_inplace(|v| v / norm);
    }
    let mut sim = Array2::zeros((n, n));
    for i in 0..n {
        sim[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let s = unit.row(i).dot(&unit.row(j)).clamp(-1.0, 1.0);
            sim[[i, j]] = s;
            sim[[j, i]] = s;
        }
    }
    Ok(sim)
}

/// Restricts `graph` to the edges `mode` preserves.
pub fn apply_mode(graph: &AffinityGraph, domains: &[Domain], mode: GraphMode) -> Result<AffinityGraph> {
    if domains.len() != graph.order() {
        return Err(Error::Input(format!(
            "{} domain tags for a graph of order {}",
            domains.len(),
            graph.order()
        )));
    }
    let rows = graph
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .copied()
                .filter(|&(j, _)| mode.keeps(domains[i], domains[j]))
                .collect()
        })
        .collect();
    Ok(AffinityGraph {
        rows,
        p: graph.p,
        mode: Some(mode),
    })
}

/// Sparse `L = D - G`, stored row-wise with the diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Laplacian {
    pub fn zeros(order: usize) -> Self {
        Laplacian {
            rows: vec![Vec::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.order();
        let mut l = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                l[[i, j]] = v;
            }
        }
        l
    }

    /// `L · b` for a dense right-hand side with `order` rows.
    pub fn mul_dense(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.order(), b.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut o = out.row_mut(i);
            for &(j, v) in row {
                o.scaled_add(v, &b.row(j));
            }
        }
        out
    }

    /// `tr(fᵀ L f)`.
    pub fn trace_form(&self, f: ArrayView2<'_, f64>) -> f64 {
        let lf = self.mul_dense(f);
        (&lf * &f).sum()
    }
}

/// Forms `L = D - G` with `D_ii = Σ_j G_ij`.
///
/// Fails with an invariant error if `graph` is not exactly symmetric.
pub fn laplacian(graph: &AffinityGraph) -> Result<Laplacian> {
    if let Some((i, j, w)) = graph.edges().find(|&(i, j, w)| graph.weight(j, i) != w) {
        return Err(Error::Invariant(format!(
            "affinity graph is not symmetric: G[{i},{j}] = {w}, G[{j},{i}] = {}",
            graph.weight(j, i)
        )));
    }
    let rows = graph
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.is_empty() {
                return Vec::new();
            }
            let degree: f64 = row.iter().map(|&(_, w)| w).sum();
            let mut out: Vec<(usize, f64)> = row.iter().map(|&(j, w)| (j, -w)).collect();
            let at = out.partition_point(|&(j, _)| j < i);
            out.insert(at, (i, degree));
            out
        })
        .collect();
    Ok(Laplacian { rows })
}

/// `Σ_ij ‖f_i - f_j‖² G_ij` over ordered pairs, i.e. `2 tr(fᵀ L f)`.
pub fn laplacian_quadratic(f: ArrayView2<'_, f64>, graph: &AffinityGraph) -> Result<f64> {
    if f.nrows() != graph.order() {
        return Err(Error::Input(format!(
            "score matrix has {} rows for a graph of order {}",
            f.nrows(),
            graph.order()
        )));
    }
    Ok(graph
        .edges()
        .map(|(i, j, w)| {
            let d: f64 = f
                .row(i)
                .iter()
                .zip(f.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d * w
        })
        .sum())
}
