use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// One rank-one block `u uᵀ` of the MMD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdBlock {
    /// `None` for the marginal block `M₀`.
    pub class: Option<usize>,
    pub source_count: usize,
    pub target_count: usize,
    /// `1/n_c` on source members, `-1/m_c` on target members, 0 elsewhere.
    pub u: Array1<f64>,
}

/// `M = M₀ + Σ_c M_c` over samples ordered source-then-target.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdMatrix {
    pub values: Array2<f64>,
    pub blocks: Vec<MmdBlock>,
}

impl MmdMatrix {
    pub fn order(&self) -> usize {
        self.values.nrows()
    }

    /// `M · b`, evaluated through the rank-one blocks.
    pub fn mul_dense(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.order(), b.ncols()));
        for block in &self.blocks {
            let ub = block.u.dot(&b);
            for (i, &ui) in block.u.iter().enumerate() {
                if ui != 0.0 {
                    out.row_mut(i).scaled_add(ui, &ub);
                }
            }
        }
        out
    }

    /// `tr(fᵀ M f) = Σ_blocks ‖uᵀ f‖²`.
    pub fn trace_form(&self, f: ArrayView2<'_, f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let uf = b.u.dot(&f);
                uf.dot(&uf)
            })
            .sum()
    }
}

/// Builds the marginal block and one block per class from source labels and
/// target pseudo-labels. A class with no source member or no target member
/// contributes nothing.
pub fn mmd_matrix(source_labels: &[usize], pseudo_labels: &[usize], class_count: usize) -> Result<MmdMatrix> {
    let n = source_labels.len();
    let m = pseudo_labels.len();
    let total = n + m;
    if let Some(&bad) = source_labels.iter().chain(pseudo_labels).find(|&&l| l >= class_count) {
        return Err(Error::Input(format!("label {bad} outside [0, {class_count})")));
    }

    // class of each sample; None marks the marginal pass
    let groups = std::iter::once(None).chain((0..class_count).map(Some));
    let mut blocks = Vec::new();
    let mut values = Array2::zeros((total, total));
    for class in groups {
        let in_source = |i: usize| class.is_none_or(|c| source_labels[i] == c);
        let in_target = |j: usize| class.is_none_or(|c| pseudo_labels[j] == c);
        let src: Vec<usize> = (0..n).filter(|&i| in_source(i)).collect();
        let tgt: Vec<usize> = (0..m).filter(|&j| in_target(j)).map(|j| n + j).collect();
        if src.is_empty() || tgt.is_empty() {
            continue;
        }
        let (nc, mc) = (src.len() as f64, tgt.len() as f64);
        let ss = 1.0 / (nc * nc);
        let tt = 1.0 / (mc * mc);
        let st = -1.0 / (nc * mc);
        for &i in &src {
            for &j in &src {
                values[[i, j]] += ss;
            }
            for &j in &tgt {
                values[[i, j]] += st;
                values[[j, i]] += st;
            }
        }
        for &i in &tgt {
            for &j in &tgt {
                values[[i, j]] += tt;
            }
        }
        let mut u = Array1::zeros(total);
        for &i in &src {
            u[i] = 1.0 / nc;
        }
        for &j in &tgt {
            u[j] = -1.0 / mc;
        }
        blocks.push(MmdBlock {
            class,
            source_count: src.len(),
            target_count: tgt.len(),
            u,
        });
    }
    Ok(MmdMatrix { values, blocks })
}
