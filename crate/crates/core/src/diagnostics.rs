//! Accuracy, the model-smoothness probe, and an independent first-order
//! minimiser of the IDSP objective used to cross-check the closed form.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::solver::Problem;

/// Fraction of positions where `pred` and `truth` agree.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "accuracy needs equal non-empty inputs, got {} predictions and {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Estimate of `E_x sup_{‖δ‖∞ ≤ r} ‖f(x + δ) - f(x)‖∞` at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    pub r: f64,
    pub epsilon_hat: f64,
    pub samples_per_point: usize,
    pub points_used: usize,
}

/// Probes the score function at a single radius. See [`smoothness_profile`].
pub fn smoothness_probe<F>(
    score: F,
    x: ArrayView2<'_, f64>,
    r: f64,
    samples_per_point: usize,
    seed: u64,
) -> Result<SmoothnessReport>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array2<f64>>,
{
    Ok(smoothness_profile(score, x, &[r], samples_per_point, seed)?.remove(0))
}

/// Probes the score function at each radius in `radii`.
///
/// Each point draws `samples_per_point` unit-cube directions `u` from its own
/// seeded stream; when `2^d ≤ samples_per_point` they start with all cube
/// corners, otherwise with the `2d` axis points `±e_k` when those fit. A
/// radius `r` evaluates `x + r·u` for every direction, and its per-point
/// estimate is the largest change seen at any radius `≤ r`, so the estimates
/// are nondecreasing in `r` for any score function.
///
/// The score function maps a batch of points (rows) to a batch of score
/// vectors.
pub fn smoothness_profile<F>(
    score: F,
    x: ArrayView2<'_, f64>,
    radii: &[f64],
    samples_per_point: usize,
    seed: u64,
) -> Result<Vec<SmoothnessReport>>
where
    F: Fn(ArrayView2<'_, f64>) -> Result<Array2<f64>>,
{
    if samples_per_point == 0 {
        return Err(Error::Parameter("samples_per_point must be at least 1".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Parameter(format!("radius must be finite and nonnegative, got {r}")));
    }
    let d = x.ncols();
    let points = x.nrows();
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));

    let mut totals = vec![0.0; radii.len()];
    for (p, point) in x.rows().into_iter().enumerate() {
        let directions = probe_directions(d, samples_per_point, seed, p as u64);
        let base = score(point.insert_axis(ndarray::Axis(0)))?;
        let mut running = 0.0_f64;
        for &k in &order {
            let r = radii[k];
            if r > 0.0 {
                let mut batch = directions.mapv(|u| u * r);
                batch += &point;
                let scores = score(batch.view())?;
                if scores.nrows() != samples_per_point || scores.ncols() != base.ncols() {
                    return Err(Error::Invariant("score function changed output shape".into()));
                }
                for row in scores.rows() {
                    let change = row
                        .iter()
                        .zip(base.row(0))
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    running = running.max(change);
                }
            }
            totals[k] += running;
        }
    }
    Ok(radii
        .iter()
        .zip(totals)
        .map(|(&r, total)| SmoothnessReport {
            r,
            epsilon_hat: if points == 0 { 0.0 } else { total / points as f64 },
            samples_per_point,
            points_used: points,
        })
        .collect())
}

fn probe_directions(d: usize, samples: usize, seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut dirs = Array2::zeros((samples, d));
    let mut filled = 0;
    let corners = (d < usize::BITS as usize).then(|| 1usize << d).filter(|&c| c <= samples);
    if let Some(count) = corners {
        for code in 0..count {
            for k in 0..d {
                dirs[[code, k]] = if code >> k & 1 == 1 { 1.0 } else { -1.0 };
            }
        }
        filled = count;
    } else if 2 * d <= samples {
        for k in 0..d {
            dirs[[2 * k, k]] = 1.0;
            dirs[[2 * k + 1, k]] = -1.0;
        }
        filled = 2 * d;
    }
    for i in filled..samples {
        for k in 0..d {
            dirs[[i, k]] = rng.random_range(-1.0..=1.0);
        }
    }
    dirs
}

/// Stopping rule for [`gd_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdControls {
    /// Stop once the gradient ∞-norm falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for GdControls {
    fn default() -> Self {
        GdControls {
            tolerance: 1e-8,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome {
    pub alpha: Array2<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// False when the iteration cap was hit first.
    pub converged: bool,
}

/// Largest problem the oracle accepts.
pub const GD_ORACLE_MAX_ORDER: usize = 50;

/// Minimises the objective by accelerated gradient descent with backtracking.
///
/// The gradient is taken with respect to `f` in the kernel's Hilbert space:
/// `g(α) = V(Kα - Yᵀ) + λα + (γL + ηM)Kα`, for which the Euclidean gradient
/// is `2Kg`. Its zero is the unique stationary point even when `K` is
/// singular, and stepping along `-g` is plain steepest descent in the
/// coordinates `K^{1/2}α`. The step size comes from doubling a curvature
/// estimate until the sufficient-decrease condition holds; momentum restarts
/// whenever it stops pointing downhill.
///
/// Everything here is computed from dense copies of the problem matrices and
/// shares no code with the LU path.
pub fn gd_oracle(problem: &Problem<'_>, controls: GdControls) -> Result<GdOutcome> {
    problem.validate()?;
    let n = problem.order();
    if n > GD_ORACLE_MAX_ORDER {
        return Err(Error::Parameter(format!(
            "gradient-descent oracle is limited to n+m <= {GD_ORACLE_MAX_ORDER}, got {n}"
        )));
    }
    let c = problem.labels.class_count();
    let k = problem.kernel.values.clone();
    let w = problem.weights;
    let mask: Array1<f64> = problem
        .labels
        .source_mask
        .iter()
        .map(|&s| if s { 1.0 } else { 0.0 })
        .collect();
    let targets: Array2<f64> = problem.labels.y.t().to_owned() * mask.view().insert_axis(ndarray::Axis(1));
    let mut penalty = problem.laplacian.to_dense() * w.gamma;
    if w.eta > 0.0 {
        if let Some(m) = problem.mmd {
            penalty.scaled_add(w.eta, &m.values);
        }
    }
    let masked = |a: &Array2<f64>| a * &mask.view().insert_axis(ndarray::Axis(1));

    let gradient = |alpha: &Array2<f64>| -> Array2<f64> {
        let f = k.dot(alpha);
        let mut g = masked(&f) - &targets;
        g.scaled_add(w.lambda, alpha);
        g += &penalty.dot(&f);
        g
    };
    // second-order coefficient of J along direction g: J(α + s g) has
    // s²‖V K g‖² + s² λ gᵀKg + s² (Kg)ᵀP(Kg)
    let curvature = |g: &Array2<f64>, kg: &Array2<f64>| -> f64 {
        let vkg = masked(kg);
        (&vkg * &vkg).sum() + w.lambda * (g * kg).sum() + (kg * &penalty.dot(kg)).sum()
    };
    let inf_norm = |a: &Array2<f64>| a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));

    let mut alpha = Array2::<f64>::zeros((n, c));
    let mut previous = alpha.clone();
    let mut momentum = 1.0_f64;
    let mut lipschitz = 1e-12_f64;
    let mut grad_norm = inf_norm(&gradient(&alpha));
    if grad_norm < controls.tolerance {
        return Ok(GdOutcome {
            alpha,
            iterations: 0,
            gradient_norm: grad_norm,
            converged: true,
        });
    }

    for it in 1..=controls.max_iter {
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let y = &alpha + &((&alpha - &previous) * beta);
        let g = gradient(&y);
        let kg = k.dot(&g);
        let descent = (&g * &kg).sum();
        let step = if descent > 0.0 {
            // sufficient decrease J(y - s g) <= J(y) - s gᵀKg with s = 2/lipschitz
            // holds iff lipschitz >= 2 q / gᵀKg
            let needed = 2.0 * curvature(&g, &kg) / descent;
            while lipschitz < needed {
                lipschitz *= 2.0;
            }
            2.0 / lipschitz
        } else {
            // g lies in the null space of K: J is flat along it, only the
            // λα term moves the iterate
            1.0 / w.lambda
        };
        let candidate = &y - &(&g * step);

        // gradient restart: drop momentum once the step points uphill
        let restart = (&kg * &(&candidate - &alpha)).sum() > 0.0;
        previous = std::mem::replace(&mut alpha, candidate);
        momentum = if restart { 1.0 } else { next_momentum };

        if it % 8 == 0 {
            grad_norm = inf_norm(&gradient(&alpha));
            if grad_norm < controls.tolerance {
                return Ok(GdOutcome {
                    alpha,
                    iterations: it,
                    gradient_norm: grad_norm,
                    converged: true,
                });
            }
        }
    }
    grad_norm = inf_norm(&gradient(&alpha));
    Ok(GdOutcome {
        converged: grad_norm < controls.tolerance,
        alpha,
        iterations: controls.max_iter,
        gradient_norm: grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    fn linear(w: Array1<f64>) -> impl Fn(ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        move |x| Ok(x.dot(&w).insert_axis(ndarray::Axis(1)))
    }

    #[test]
    fn zero_radius_gives_zero() {
        let x = array![[0.3, -1.0], [2.0, 0.5]];
        let rep = smoothness_probe(linear(array![1.0, -3.0]), x.view(), 0.0, 16, 1).unwrap();
        assert_eq!(rep.epsilon_hat, 0.0);
        assert_eq!(rep.points_used, 2);
    }

    #[test]
    fn constant_scores_give_zero() {
        let x = array![[0.3, -1.0, 4.0]];
        let constant = |b: ArrayView2<'_, f64>| Ok(Array2::from_elem((b.nrows(), 3), 7.0));
        let rep = smoothness_probe(constant, x.view(), 2.5, 10, 9).unwrap();
        assert_eq!(rep.epsilon_hat, 0.0);
    }

    #[test]
    fn linear_score_corner_value() {
        let w = array![0.75, -2.0];
        let x = array![[0.1, 0.2], [-1.0, 3.0], [5.0, 5.0]];
        for r in [0.1, 0.5, 1.0] {
            let rep = smoothness_probe(linear(w.clone()), x.view(), r, 4, 3).unwrap();
            assert!((rep.epsilon_hat - r * 2.75).abs() < 1e-12, "{r}: {}", rep.epsilon_hat);
        }
    }

    #[test]
    fn directions_cover_corners_or_axes() {
        let d = probe_directions(2, 6, 0, 0);
        let rows: Vec<Vec<f64>> = d.rows().into_iter().take(4).map(|r| r.to_vec()).collect();
        assert_eq!(rows, [vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]]);
        assert!(d.iter().all(|v| v.abs() <= 1.0));
        let d = probe_directions(4, 9, 0, 0);
        assert_eq!(d.row(0).to_vec(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.row(7).to_vec(), [0.0, 0.0, 0.0, -1.0]);
        assert_eq!(probe_directions(3, 5, 4, 2), probe_directions(3, 5, 4, 2));
        assert_ne!(probe_directions(3, 5, 4, 2), probe_directions(3, 5, 4, 3));
    }

    #[test]
    fn profile_is_monotone_for_oscillating_scores() {
        let x = array![[0.0, 0.0], [1.0, -0.5]];
        let wavy = |b: ArrayView2<'_, f64>| Ok(b.map_axis(ndarray::Axis(1), |r| (7.0 * r[0]).sin() + r[1].cos()).insert_axis(ndarray::Axis(1)));
        let radii = [1.0, 0.0, 0.5, 0.1, 2.0];
        let reps = smoothness_profile(wavy, x.view(), &radii, 12, 5).unwrap();
        let mut sorted: Vec<_> = reps.iter().map(|r| (r.r, r.epsilon_hat)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(sorted[0].1, 0.0);
        assert!(sorted.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn probe_parameter_errors() {
        let x = array![[0.0]];
        assert!(smoothness_probe(linear(array![1.0]), x.view(), -1.0, 2, 0).is_err());
        assert!(smoothness_probe(linear(array![1.0]), x.view(), 1.0, 0, 0).is_err());
    }
}
