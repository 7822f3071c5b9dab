//! Blind ptychographic reconstruction from Fourier magnitude measurements.
//!
//! A probe `x` and object `y` are recovered jointly from diffraction
//! magnitudes `b_j = |F(S_j(x) . y)|` taken at overlapping cyclic scan
//! shifts `S_j`, by minimizing the coupling objective
//! `F(x, y, z) = sum_j ||S_j(x) . y - z_j||^2` over constraint sets on all
//! three blocks. The crate provides:
//!
//! - [`field`]: complex 2-D fields, unitary FFTs, cyclic shift operators;
//! - [`model`]: the objective, its partial gradients, and their exact
//!   per-pixel / per-block / global Lipschitz moduli;
//! - [`projections`]: closed-form projectors onto the constraint sets and
//!   the proximal exit-wave step;
//! - [`solvers`]: proximal block descent in whole-block, sequential, and
//!   parallel per-pixel form (with per-iteration decrease certificates), an
//!   approximate Douglas-Rachford scheme, and a cyclic single-measurement
//!   scheme;
//! - [`simulate`]: synthetic instances with the standard scan / disk probe /
//!   smooth object protocol and Poisson counting noise;
//! - [`metrics`]: R-factor, registration-invariant RMS error, certificate
//!   verification;
//! - [`io`]: CIMG/RIMG stack formats and the JSON instance sidecar.

pub mod field;
pub mod io;
pub mod metrics;
pub mod model;
pub mod projections;
pub mod simulate;
pub mod solvers;

pub use field::{fft2, hadamard, ifft2, real_inner, shift, shift_adjoint, ComplexImage, RealImage, ScanGeometry};
pub use model::{
    grad_x, grad_y, lipschitz_block, lipschitz_x_block, lipschitz_x_global,
    lipschitz_x_pixel, lipschitz_y_block, lipschitz_y_global, lipschitz_y_pixel, objective, MeasurementSet, ObjectConstraint, ProbeConstraint,
    ProblemInstance,
};
pub use projections::{project_modulus, project_object, project_probe, z_update};
pub use solvers::{
    run, run_from, trace_to_csv, IterationTrace, RunOutcome, SolverConfig, SolverError,
    SolverState, Variant,
};
