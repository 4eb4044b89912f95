//! Construction of 3x3 magic squares of distinct primes containing a
//! prescribed prime q0 >= 5, together with the measurable side of the
//! supporting analytic machinery: local densities and singular series,
//! cutoff-weighted lattice masses, sieve discrepancies, and a smoothed
//! variance probe for primes in progressions.
//!
//! Modules follow the pipeline:
//!
//! * [`algebra`] — universal square parametrization, the eight forms, the
//!   core/residual split, verification;
//! * [`geometry`] — the region K, dilations, distinctness chain, cutoff chi;
//! * [`primes`] — deterministic 64-bit primality, sieves, weights;
//! * [`local`] — the W-trick, admissibility, exact local densities;
//! * [`search`] — deterministic construction of witnesses;
//! * [`stats`] — empirical masses, discrepancies, diagonal transfer, variance.

pub mod algebra;
pub mod geometry;
pub mod local;
pub mod primes;
pub mod search;
pub mod stats;

pub use algebra::{
    forms_for, params_from_square, square_from_center_params, verify_prime_magic, AffineForm,
    AlgebraError, FormSystem, MagicSquare, ParamTriple, VerificationReport,
};
pub use geometry::{
    chain_check, enumerate_dilation, in_dilation, in_region, support_shift_check,
    support_shift_threshold, Cutoff, GeometryError,
};
pub use local::{
    admissibility_witness, compute_w_normalization, g_multiplicative, g_star, local_core_count,
    local_density_table, singular_series, LocalDensityTable, LocalError, NormalizedForms,
    SeriesKind, SingularSeries, Star, WNormalization,
};
pub use primes::{is_prime, prime_power_scan, sieve_range, weight, PrimesError, WeightKind};
pub use search::{
    find_solution, positivity_witness, positivity_witness_doubling, scan_primes, PositivityWitness,
    ScanRow, ScanSummary, SearchError, SearchOutcome, SearchStrategy, SolutionRecord,
};
pub use stats::{
    bdh_variance, core_mass, cutoff_integral, diagonal_direction_check, diagonal_mass_check,
    discrepancy_sum, joint_functional, lattice_marginals, restricted_mass, DiagonalReport,
    DiscrepancyReport, DiscrepancyRow, MassReport, StatsError, VarianceReport,
};
