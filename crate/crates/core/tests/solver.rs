mod common;

use common::{gaussian, inf_norm, random_instance, rng};
use idsp::data::{generate_synth, Dataset, SynthTaskSpec};
use idsp::diagnostics::{gd_oracle, GdControls};
use idsp::graph::{self, GraphMode, Laplacian};
use idsp::kernels::{build_kernel_matrix, KernelSpec};
use idsp::solver::{
    encode_labels, jda_iterate, mmd_matrix, objective_value, predict_in_sample, predict_out_of_sample,
    solve_closed_form, solve_jda, Problem, Setting, SolverConfig, Weights,
};
use ndarray::{array, s, Array2};
use rand::Rng;

/// Three labeled source points (classes 0, 0, 1) and two targets in 2-d.
fn toy() -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(5);
    let means = [[3.0, 0.5], [3.0, 0.5], [0.5, 3.0], [3.5, 1.0], [1.0, 3.5]];
    let x = Array2::from_shape_fn((5, 2), |(i, j)| means[i][j] + 0.3 * r.random_range(-1.0..1.0));
    (x, vec![0, 0, 1])
}

fn toy_problem_parts() -> (idsp::kernels::KernelMatrix, Laplacian, idsp::solver::LabelEncoding) {
    let (x, labels) = toy();
    let enc = encode_labels(&labels, 2, 2).unwrap();
    let g = graph::knn_affinity(x.view(), 1).unwrap();
    let g = graph::apply_mode(&g, &enc.domains(), GraphMode::T).unwrap();
    let l = graph::laplacian(&g).unwrap();
    let k = build_kernel_matrix(x.view(), &KernelSpec::Linear).unwrap();
    (k, l, enc)
}

#[test]
fn toy_closed_form_matches_gradient_descent() {
    let (k, l, enc) = toy_problem_parts();
    let closed = solve_closed_form(&k, &l, &enc, 0.1, 1.0).unwrap();
    let problem = Problem::new(&k, &l, &enc, Weights::new(0.1, 1.0));
    let gd = gd_oracle(&problem, GdControls::default()).unwrap();
    assert!(gd.converged);
    assert!(inf_norm((&closed.alpha - &gd.alpha).view()) < 1e-5);
    let in_sample = predict_in_sample(&closed, &k).unwrap();
    let gd_scores = k.values.dot(&gd.alpha);
    assert_eq!(in_sample.labels, idsp::solver::argmax_rows(gd_scores.view()));
    let closed_value = problem.objective(closed.alpha.view()).unwrap();
    assert!(problem.objective(gd.alpha.view()).unwrap() >= closed_value - 1e-8);
}

#[test]
fn gd_oracle_recovers_ridge_solution() {
    let mut r = rng(8);
    let x = gaussian(&mut r, 12, 3);
    let k = build_kernel_matrix(x.view(), &KernelSpec::rbf(1.0)).unwrap();
    let enc = encode_labels(&(0..12).map(|i| i % 3).collect::<Vec<_>>(), 3, 0).unwrap();
    let l = Laplacian::zeros(12);
    let problem = Problem::new(&k, &l, &enc, Weights::new(0.3, 0.0));
    let gd = gd_oracle(&problem, GdControls::default()).unwrap();
    let closed = problem.solve().unwrap();
    assert!(inf_norm((&gd.alpha - &closed.alpha).view()) < 1e-6);
}

#[test]
fn gd_oracle_rejects_large_instances() {
    let x = gaussian(&mut rng(1), 51, 2);
    let k = build_kernel_matrix(x.view(), &KernelSpec::Linear).unwrap();
    let enc = encode_labels(&[0; 51], 1, 0).unwrap();
    let l = Laplacian::zeros(51);
    let problem = Problem::new(&k, &l, &enc, Weights::new(0.1, 0.0));
    assert!(gd_oracle(&problem, GdControls::default()).is_err());
}

#[test]
fn gd_oracle_reports_iteration_cap() {
    let inst = random_instance(77, GraphMode::T);
    let problem = Problem::new(&inst.kernel, &inst.laplacian, &inst.labels, Weights::new(0.05, 3.0));
    let out = gd_oracle(&problem, GdControls { max_iter: 2, ..GdControls::default() }).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 2);
}

/// Objective assembled sample by sample from the scores `f = Kα`.
fn samplewise_objective(
    alpha: &Array2<f64>,
    k: &Array2<f64>,
    g: &Array2<f64>,
    labels: &[usize],
    classes: usize,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let total = k.nrows();
    let score = |i: usize, c: usize| (0..total).map(|j| alpha[[j, c]] * k[[j, i]]).sum::<f64>();
    let mut loss = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..classes {
            let y = if c == l { 1.0 } else { 0.0 };
            loss += (y - score(i, c)).powi(2);
        }
    }
    let mut norm = 0.0;
    for c in 0..classes {
        for i in 0..total {
            for j in 0..total {
                norm += alpha[[i, c]] * alpha[[j, c]] * k[[i, j]];
            }
        }
    }
    let mut smooth = 0.0;
    for i in 0..total {
        for j in 0..total {
            for c in 0..classes {
                smooth += 0.5 * g[[i, j]] * (score(i, c) - score(j, c)).powi(2);
            }
        }
    }
    loss + lambda * norm + gamma * smooth
}

#[test]
fn objective_matches_samplewise_sums() {
    for seed in 0..6u64 {
        let mut r = rng(700 + seed);
        let (n, m, c) = (r.random_range(2..10), r.random_range(1..8), r.random_range(1..4));
        let x = gaussian(&mut r, n + m, 3);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let enc = encode_labels(&labels, c, m).unwrap();
        let g = graph::knn_affinity(x.view(), 2).unwrap();
        let g = graph::apply_mode(&g, &enc.domains(), GraphMode::ALL[seed as usize % 4]).unwrap();
        let l = graph::laplacian(&g).unwrap();
        let k = build_kernel_matrix(x.view(), &KernelSpec::rbf(1.5)).unwrap();
        let alpha = gaussian(&mut r, n + m, c);
        let (lambda, gamma) = (r.random_range(0.01..1.0), r.random_range(0.0..5.0));
        let got = objective_value(alpha.view(), &k, &l, &enc, Weights::new(lambda, gamma), None).unwrap();
        let expected = samplewise_objective(&alpha, &k.values, &g.to_dense(), &labels, c, lambda, gamma);
        assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn objective_at_zero_counts_sources() {
    let (k, l, enc) = toy_problem_parts();
    let zero = Array2::zeros((5, 2));
    let v = objective_value(zero.view(), &k, &l, &enc, Weights::new(0.1, 1.0), None).unwrap();
    assert_eq!(v, 3.0);
}

/// Linear-kernel primal objective of weights `w` (d × C).
fn primal_objective(w: &Array2<f64>, x: &Array2<f64>, y: &Array2<f64>, n: usize, lap: &Array2<f64>, lambda: f64, gamma: f64) -> f64 {
    let f = x.dot(w);
    let resid = &f.slice(s![..n, ..]) - &y.t().slice(s![..n, ..]);
    let fit = resid.iter().map(|v| v * v).sum::<f64>();
    let ridge = lambda * w.iter().map(|v| v * v).sum::<f64>();
    let smooth = gamma * (&f * &lap.dot(&f)).sum();
    fit + ridge + smooth
}

#[test]
fn restricting_weights_to_training_span_never_increases_objective() {
    for seed in 0..10u64 {
        let mut r = rng(800 + seed);
        let (n, m, d, c) = (4, 3, 10, 2);
        let x = gaussian(&mut r, n + m, d);
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let enc = encode_labels(&labels, c, m).unwrap();
        let g = graph::knn_affinity(x.view(), 2).unwrap();
        let g = graph::apply_mode(&g, &enc.domains(), GraphMode::Cst).unwrap();
        let lap = graph::laplacian(&g).unwrap().to_dense();
        let (lambda, gamma) = (0.2, 1.5);

        // projector onto the row space of X
        let xn = common::to_nalgebra(x.view());
        let svd = xn.clone().svd(false, true);
        let vt = svd.v_t.unwrap();
        let basis = Array2::from_shape_fn((d, vt.nrows()), |(i, j)| vt[(j, i)]);
        let projector = basis.dot(&basis.t());

        let w = gaussian(&mut r, d, c);
        let projected = projector.dot(&w);
        assert!(inf_norm((&w - &projected).view()) > 1e-3);
        let full = primal_objective(&w, &x, &enc.y, n, &lap, lambda, gamma);
        let restricted = primal_objective(&projected, &x, &enc.y, n, &lap, lambda, gamma);
        assert!(restricted <= full, "seed {seed}: {restricted} > {full}");

        // the kernel solution is the primal optimum written as W = Xᵀα
        let k = build_kernel_matrix(x.view(), &KernelSpec::Linear).unwrap();
        let l = graph::laplacian(&g).unwrap();
        let alpha = solve_closed_form(&k, &l, &enc, lambda, gamma).unwrap().alpha;
        let w_star = x.t().dot(&alpha);
        let at_star = primal_objective(&w_star, &x, &enc.y, n, &lap, lambda, gamma);
        let dual = objective_value(alpha.view(), &k, &l, &enc, Weights::new(lambda, gamma), None).unwrap();
        assert!((at_star - dual).abs() <= 1e-9 * dual.max(1.0));
        assert!(at_star <= restricted + 1e-12 && at_star <= full);
    }
}

#[test]
fn coefficient_norm_shrinks_as_lambda_grows() {
    for seed in 0..5u64 {
        let inst = random_instance(900 + seed, GraphMode::T);
        let norms: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4]
            .iter()
            .map(|&lambda| {
                let a = solve_closed_form(&inst.kernel, &inst.laplacian, &inst.labels, lambda, inst.gamma)
                    .unwrap()
                    .alpha;
                a.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
        assert!(*norms.last().unwrap() < 1e-3);
    }
}

#[test]
fn out_of_sample_predictions_follow_nearest_centroid() {
    let (x, labels) = toy();
    let enc = encode_labels(&labels, 2, 2).unwrap();
    let g = graph::knn_affinity(x.view(), 1).unwrap();
    let g = graph::apply_mode(&g, &enc.domains(), GraphMode::T).unwrap();
    let l = graph::laplacian(&g).unwrap();
    let k = build_kernel_matrix(x.view(), &KernelSpec::Linear).unwrap();
    let coef = solve_closed_form(&k, &l, &enc, 0.1, 1.0).unwrap();

    let centroids = [
        (x.row(0).to_owned() + x.row(1)) / 2.0,
        x.row(2).to_owned(),
    ];
    let mut r = rng(5);
    let query = Array2::from_shape_fn((2, 2), |(i, j)| centroids[i][j] + 0.1 * r.random_range(-1.0..1.0));
    let nearest: Vec<usize> = query
        .rows()
        .into_iter()
        .map(|q| {
            let d = |c: &ndarray::Array1<f64>| (&q - c).mapv(|v| v * v).sum();
            if d(&centroids[0]) <= d(&centroids[1]) { 0 } else { 1 }
        })
        .collect();
    assert_eq!(nearest, vec![0, 1]);
    let pred = predict_out_of_sample(&coef, x.view(), query.view()).unwrap();
    assert_eq!(pred.labels, nearest);

    let own = predict_out_of_sample(&coef, x.view(), x.slice(s![3..4, ..])).unwrap();
    assert_eq!(own.labels[0], predict_in_sample(&coef, &k).unwrap().labels[3]);
}

fn two_class_uda(seed: u64) -> Dataset {
    generate_synth(&SynthTaskSpec {
        class_count: 2,
        samples_per_class: 30,
        dim: 4,
        ..SynthTaskSpec::standard_uda(seed)
    })
    .unwrap()
}

#[test]
fn pseudo_label_loop_stabilises_on_two_class_blobs() {
    let ds = two_class_uda(13);
    let enc = encode_labels(&ds.source_labels, ds.class_count, ds.n_target()).unwrap();
    let out = solve_jda(ds.x.view(), &enc, &SolverConfig::jda_defaults_for(Setting::Uda)).unwrap();
    assert!(out.converged);
    assert!(out.iterations() <= 10);
    assert_eq!(out.history.len(), out.iterations() + 1);
    assert_eq!(out.final_labels(), &out.history[out.history.len() - 2][..]);
}

#[test]
fn stable_pseudo_labels_exit_after_one_extended_solve() {
    let ds = generate_synth(&SynthTaskSpec {
        class_count: 2,
        samples_per_class: 20,
        dim: 4,
        separation: 12.0,
        shift: 0.0,
        noise: 0.5,
        ..SynthTaskSpec::standard_uda(3)
    })
    .unwrap();
    let enc = encode_labels(&ds.source_labels, 2, ds.n_target()).unwrap();
    let cfg = SolverConfig::jda_defaults_for(Setting::Uda);
    let out = solve_jda(ds.x.view(), &enc, &cfg).unwrap();
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.history[0], out.history[1]);
    assert!(out.converged);
}

#[test]
fn max_iter_caps_extended_solves() {
    let ds = generate_synth(&SynthTaskSpec::standard_uda(4)).unwrap();
    let enc = encode_labels(&ds.source_labels, ds.class_count, ds.n_target()).unwrap();
    let k = build_kernel_matrix(ds.x.view(), &KernelSpec::Linear).unwrap();
    let g = graph::knn_affinity(ds.x.view(), 10).unwrap();
    let l = graph::laplacian(&graph::apply_mode(&g, &enc.domains(), GraphMode::T).unwrap()).unwrap();
    let base = SolverConfig::jda_defaults_for(Setting::Uda);

    let one = jda_iterate(&k, &l, &enc, &SolverConfig { max_iter: 1, ..base.clone() }).unwrap();
    assert_eq!(one.iterations(), 1);

    let all = jda_iterate(&k, &l, &enc, &SolverConfig { max_iter: 4, stop_on_stable_labels: false, ..base.clone() }).unwrap();
    assert_eq!(all.iterations(), 4);

    // the final coefficients solve the extended system for the last MMD matrix
    let pseudo = &all.history[all.history.len() - 2];
    let mmd = mmd_matrix(&enc.source_labels, pseudo, enc.class_count()).unwrap();
    let problem = Problem::new(&k, &l, &enc, Weights::new(base.lambda, base.gamma).with_eta(base.eta)).with_mmd(&mmd);
    assert_eq!(problem.solve().unwrap(), all.coefficients);
}

#[test]
fn jda_requires_positive_eta() {
    let ds = two_class_uda(1);
    let enc = encode_labels(&ds.source_labels, 2, ds.n_target()).unwrap();
    let cfg = SolverConfig::defaults_for(Setting::Uda);
    assert!(solve_jda(ds.x.view(), &enc, &cfg).is_err());
}

#[test]
fn mmd_example_with_seed_nine() {
    let mut r = rng(9);
    let source: Vec<usize> = (0..6).map(|_| r.random_range(0..3)).collect();
    let pseudo: Vec<usize> = (0..4).map(|_| r.random_range(0..3)).collect();
    let m = mmd_matrix(&source, &pseudo, 3).unwrap();
    let expected = common::explicit_mmd(&source, &pseudo, 3);
    assert!(inf_norm((&m.values - &expected).view()) < 1e-12);
}

#[test]
fn jda_objective_includes_mmd_term() {
    let (k, l, enc) = toy_problem_parts();
    let mmd = mmd_matrix(&enc.source_labels, &[0, 1], 2).unwrap();
    let alpha = array![[0.1, -0.2], [0.0, 0.3], [0.2, 0.1], [-0.1, 0.0], [0.05, 0.05]];
    let w = Weights::new(0.1, 1.0);
    let plain = objective_value(alpha.view(), &k, &l, &enc, w, None).unwrap();
    let with = objective_value(alpha.view(), &k, &l, &enc, w.with_eta(0.7), Some(&mmd)).unwrap();
    let f = k.values.dot(&alpha);
    let extra = 0.7 * (&f * &mmd.values.dot(&f)).sum();
    assert!((with - plain - extra).abs() < 1e-12);
}
