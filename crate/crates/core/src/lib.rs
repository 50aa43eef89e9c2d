//! Universe-free multi-matching and clustering.
//!
//! Binary assignment matrices are relaxed to matrices whose rows lie on the
//! non-negative unit sphere. For a scalar `alpha` the quadratic form
//! `g(alpha, W, U) = (1 - alpha) tr(U^T W U) - alpha tr(U^T 1 1^T U)` is
//! maximized by conditional power iterations. Sweeping `alpha` from 1 towards
//! 0 and watching how fast the objective settles lets the solver pick `alpha`
//! without knowing the universe size (or number of clusters); the chosen
//! solution is then rounded to discrete assignments.
//!
//! ```
//! use nnsphere::{problems, rounding, evaluation, sweep};
//!
//! let inst = problems::gen_binary_clustering(24, 3, 0.0, 0.0, 1).unwrap();
//! let sol = sweep::solve(&inst.w, &sweep::SweepParams::with_k(30)).unwrap();
//! let labels = rounding::round_clustering(&sol.u);
//! let score = evaluation::score_clustering(&labels, &inst.ground_truth).unwrap();
//! assert!(score.f_score > 0.0);
//! ```

pub mod error;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod problems;
pub mod relaxation;
pub mod rounding;
pub mod sweep;

pub use error::{Error, Result};
pub use linalg::{QuadraticFormMatrix, SimilarityMatrix};
pub use relaxation::SphereMatrix;
pub use sweep::{solve, Solution, SweepParams, SweepTrace};
