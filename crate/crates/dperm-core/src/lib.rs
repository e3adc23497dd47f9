//! Differentially private convex empirical risk minimization.
//!
//! Given a dataset `D = {d_1, ..., d_n}` and a per-example convex loss
//! `l(theta; d)` over a bounded convex set `C`, the library privately
//! approximates `argmin_C sum_i l(theta; d_i)` under four mechanism
//! families:
//!
//! * noisy stochastic gradient descent ([`mechanisms::noise_gd`]),
//! * exponential sampling, both an exact small-dimension reference and an
//!   efficient grid-walk variant with a multiplicative sampling guarantee
//!   ([`mechanisms::ExactExpMech`], [`mechanisms::EffExpMech`]),
//! * localization via output perturbation ([`mechanisms::localized_exp_mech`]),
//! * objective perturbation for smooth losses
//!   ([`mechanisms::objective_perturbation`]).
//!
//! The [`lowerbounds`] module generates the packing-based hard instances on
//! which the excess risk of any private algorithm provably bottoms out, so
//! mechanism risk curves can be compared empirically against both upper and
//! lower envelopes. [`harness`] turns all of the above into seeded,
//! reproducible experiments with CSV output; the `accept` module runs the
//! acceptance battery.

pub mod accept;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod lowerbounds;
pub mod mechanisms;
pub mod objective;
pub mod privacy;
pub mod sampler;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{ConvexBody, ConvexSet};
pub use losses::{Dataset, Loss, Record};
pub use privacy::PrivacyParams;
