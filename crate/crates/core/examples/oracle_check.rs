//! Assembles a small problem from its parts (Gram matrix, target-only graph
//! Laplacian, label encoding), solves it in closed form and compares against
//! the gradient-descent oracle.
//!
//! cargo run --release --example oracle_check

use idsp::data::{generate_synth, SynthTaskSpec};
use idsp::diagnostics::{gd_oracle, GdControls};
use idsp::graph::{self, GraphMode};
use idsp::kernels::{build_kernel_matrix, KernelSpec};
use idsp::solver::{encode_labels, Problem, Weights};

fn main() -> idsp::Result<()> {
    let ds = generate_synth(&SynthTaskSpec {
        samples_per_class: 4,
        ..SynthTaskSpec::standard_pda(1)
    })?;
    let labels = encode_labels(&ds.source_labels, ds.class_count, ds.n_target())?;
    let knn = graph::knn_affinity(ds.x.view(), 3)?;
    let laplacian = graph::laplacian(&graph::apply_mode(&knn, &ds.domains, GraphMode::T)?)?;

    for kernel in [KernelSpec::Linear, KernelSpec::rbf_median(), KernelSpec::Cosine] {
        let gram = build_kernel_matrix(ds.x.view(), &kernel)?;
        let problem = Problem::new(&gram, &laplacian, &labels, Weights::new(0.1, 5.0));
        let closed = problem.solve()?;
        let gd = gd_oracle(&problem, GdControls::default())?;
        let gap = (&closed.alpha - &gd.alpha).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        println!(
            "{:<16} order {}: |alpha_closed - alpha_gd|_inf = {gap:.2e} after {} gd iterations, objective {:.6}",
            gram.spec.to_string(),
            gram.order(),
            gd.iterations,
            problem.objective(closed.alpha.view())?
        );
    }
    Ok(())
}
