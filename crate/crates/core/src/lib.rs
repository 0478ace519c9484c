//! Spectral NLS toolkit on commutative and Moyal-deformed periodic spaces.
//!
//! * [`spectral`]: grids, transforms, derivatives and band limits.
//! * [`moyal`]: θ-tensors and the ⋆-product.
//! * [`quasilattice`]: exact frequencies, quasiperiodic potentials, lifts.
//! * [`dynamics`]: split-step integration of the four NLS variants.
//! * [`envelope`]: envelope extraction and the envelope experiments.

pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod moyal;
pub mod quasilattice;
pub mod spectral;

pub use num_complex::Complex64;

pub use dynamics::{energy, evolve, mass, step, EquationSpec, SimResult, Variant};
pub use envelope::{
    diagram_commutation_experiment, effective_limit_experiment, extract_envelope, limit_run_for,
    ComparisonReport, DiagramConfig, EnvelopeSpec, LimitConfig, LimitRun, Window,
};
pub use error::{Error, Result};
pub use moyal::{star_cubic, star_cubic_first_order, star_product, ThetaTensor};
pub use quasilattice::{
    build_theta, build_theta_multifrequency, rational_approximants, theta_entry, ExactFrequency,
    QuasiPotentialSpec, Rational,
};
pub use spectral::{forward_transform, inverse_transform, ComplexField, Grid, Spectrum};
