//! Intra-domain structure preserving (IDSP) classifier for partial and
//! unsupervised domain adaptation.
//!
//! A kernel least-squares classifier is fit on labeled source samples and
//! regularised by a graph Laplacian built only from target-target
//! neighbourhoods, so the target manifold shapes the decision function
//! without any source/target distribution alignment. The objective has a
//! closed-form minimiser over the representer weights:
//!
//! ```text
//! α = ((V + γL) K + λI)⁻¹ V Yᵀ,     f(x) = Σ_i α_i K(x_i, x)
//! ```
//!
//! Modules follow the pipeline: [`kernels`] and [`graph`] build `K` and `L`,
//! [`solver`] solves for `α` (optionally with an MMD term and pseudo-label
//! iteration), [`data`] loads or synthesises tasks, [`diagnostics`] holds
//! accuracy, the smoothness probe and a gradient-descent oracle, and [`cli`]
//! wires it into the `idsp` binary.
//!
//! ```
//! use idsp::data::{generate_synth, SynthTaskSpec};
//! use idsp::diagnostics::accuracy;
//! use idsp::solver::{Setting, SolverConfig};
//!
//! let spec = SynthTaskSpec { samples_per_class: 20, ..SynthTaskSpec::standard_pda(0) };
//! let ds = generate_synth(&spec).unwrap();
//! let model = idsp::fit(&ds, &SolverConfig::defaults_for(Setting::Pda)).unwrap();
//! let acc = accuracy(model.target_predictions(), ds.target_truth.as_ref().unwrap()).unwrap();
//! assert!(acc > 0.5);
//! ```

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use model::{fit, FittedModel, Prepared};
