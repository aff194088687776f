//! Local large deviations for conditional Gibbs measures on mixing subshifts
//! of finite type.
//!
//! The crate is organised bottom-up:
//!
//! * [`sft`] and [`point`]: the subshift as a Smale space (words, potentials,
//!   eventually periodic points, the bracket and its axioms);
//! * [`thermo`]: transfer matrices, pressure, Gibbs measures, entropy;
//! * [`leaf`]: conditional Gibbs measures on unstable leaves;
//! * [`ldp`]: rate functions, growth estimates and deviation-set masses;
//! * [`system`]: the JSON system-file format.

pub mod error;
pub mod leaf;
pub mod ldp;
pub mod point;
pub mod rng;
pub mod sft;
pub mod system;
pub mod thermo;

pub use error::{Error, Result};
pub use ldp::{
    contraction_check, deviation_mass_exact, deviation_mass_mc, deviation_series_exact, ergodic_range, growth_estimate,
    q_derivative, q_value, rate_fit, rate_measure, rate_scalar, DeviationSeries, Interval, RateCurve, RateFit, TiltFamily,
};
pub use leaf::{leaf_measure, leaf_measure_with_block, GibbsRatioReport, LeafMeasure};
pub use point::{axioms_check, bracket, distance, shift, AxiomReport, PointRep};
pub use sft::{birkhoff_sum, orbital_empirical, unstable_leaf_words, validate_spec, EmpiricalMeasure, Potential, SubshiftSpec, Symbol};
pub use system::{load_spec, System};
pub use thermo::{
    entropy, gibbs_measure, integrate, pressure, recode, rpf_solve, transfer_matrix, variational_gap, MarkovMeasure,
    RecodedChain, RpfData, WeightedMatrix,
};

/// Version string echoed in reproducibility headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
