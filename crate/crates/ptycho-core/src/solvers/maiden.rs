//! Cyclic single-measurement scheme: simultaneous probe and object steps
//! scaled by the whole-block sup-norm moduli, followed by a modulus
//! projection onto one measurement set per iteration, visited cyclically.
//!
//! The update sums over every frame while holding a single exit-wave image,
//! exactly as the scheme is defined; the frame schedule `I(k) = k mod m`
//! revisits every measurement infinitely often.

use super::StepDiagnostics;
use crate::field::{hadamard, shift, shift_adjoint, ComplexImage, RealImage, ScanGeometry};
use crate::model::{object_quadratic_weights, probe_quadratic_weights, ProblemInstance};
use crate::projections::{object_pixel, probe_pixel, project_modulus};

/// Frame schedule for the single-measurement scheme. The cyclic map
/// `I(k) = k mod m` revisits every frame index infinitely often, which is
/// all the scheme asks of its schedule.
#[derive(Clone, Copy, Debug)]
pub struct CyclicSchedule {
    num_frames: usize,
}

impl CyclicSchedule {
    pub fn new(num_frames: usize) -> Self {
        assert!(num_frames >= 1, "schedule needs at least one frame");
        Self { num_frames }
    }

    /// Frame index visited at iteration `k`.
    pub fn frame(&self, k: usize) -> usize {
        k % self.num_frames
    }
}

/// Sup-norm step scalar `alpha * max(||sum_j S_j*(conj(y) . y)||_inf, eta)`.
/// With `alpha = 2` this equals the floored whole-block Lipschitz modulus of
/// the probe gradient.
pub fn mr_step_scalar(weights: &RealImage, alpha: f64, eta: f64) -> f64 {
    alpha * weights.max().max(eta)
}

/// `sum_j S_j*(conj(y) . z)` for a single exit-wave image shared by all
/// frames.
fn probe_linear_single(
    y: &ComplexImage,
    z: &ComplexImage,
    geom: &ScanGeometry,
) -> ComplexImage {
    let yz = hadamard(&y.conj(), z);
    let mut acc = ComplexImage::zeros(y.side());
    for j in 0..geom.num_frames() {
        let term = shift_adjoint(&yz, j, geom);
        for (a, t) in acc.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *a += t;
        }
    }
    acc
}

/// `sum_j S_j(conj(x)) . z = (sum_j S_j(conj(x))) . z` for a single shared
/// exit-wave image.
fn object_linear_single(
    x: &ComplexImage,
    z: &ComplexImage,
    geom: &ScanGeometry,
) -> ComplexImage {
    let xc = x.conj();
    let mut acc = ComplexImage::zeros(x.side());
    for j in 0..geom.num_frames() {
        let term = shift(&xc, j, geom);
        for (a, t) in acc.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *a += t;
        }
    }
    hadamard(&acc, z)
}

/// One cyclic iteration at step counter `k`: probe and object updates both
/// read the incoming pair (they commute and may run in parallel), then the
/// single exit wave is reprojected onto measurement `k mod m`.
pub(crate) fn iterate(
    state: &mut super::SolverState,
    problem: &ProblemInstance,
    cfg: &super::SolverConfig,
    k: usize,
    update_probe: bool,
) -> StepDiagnostics {
    let geom = problem.geometry();
    debug_assert_eq!(state.z.len(), 1, "cyclic scheme holds a single exit wave");
    let z_cur = state.z[0].clone();
    let x_old = state.x.clone();
    let y_old = state.y.clone();

    let (x_new, t_x) = if update_probe {
        let weights = probe_quadratic_weights(&y_old, geom);
        let scalar = mr_step_scalar(&weights, cfg.alpha, cfg.eta_x);
        let linear = probe_linear_single(&y_old, &z_cur, geom);
        let mut out = x_old.clone();
        for i in 0..out.len() {
            let vi = out.as_slice()[i];
            let half_grad = weights.as_slice()[i] * vi - linear.as_slice()[i];
            let stepped = vi - (2.0 / scalar) * half_grad;
            out.as_mut_slice()[i] =
                probe_pixel(stepped, problem.probe_c.support[i], problem.probe_c.amplitude_cap);
        }
        (out, scalar)
    } else {
        (x_old.clone(), 0.0)
    };

    // Object step from the *old* probe: the two updates are simultaneous.
    let weights = object_quadratic_weights(&x_old, geom);
    let scalar_y = mr_step_scalar(&weights, cfg.beta, cfg.eta_y);
    let linear = object_linear_single(&x_old, &z_cur, geom);
    let mut y_new = y_old.clone();
    for i in 0..y_new.len() {
        let vi = y_new.as_slice()[i];
        let half_grad = weights.as_slice()[i] * vi - linear.as_slice()[i];
        let stepped = vi - (2.0 / scalar_y) * half_grad;
        y_new.as_mut_slice()[i] = object_pixel(
            stepped,
            problem.object_c.support[i],
            problem.object_c.amp_lo,
            problem.object_c.amp_hi,
        );
    }

    let frame = CyclicSchedule::new(geom.num_frames()).frame(k);
    let exit = hadamard(&shift(&x_new, frame, geom), &y_new);
    let z_new = project_modulus(&exit, &problem.meas.mags[frame]);

    let step_sq = x_new.sub(&x_old).norm_sq()
        + y_new.sub(&y_old).norm_sq()
        + z_new.sub(&z_cur).norm_sq();
    let f_new =
        super::variant_objective(super::Variant::MaidenRodenburg, &x_new, &y_new, &[], problem);

    let side = x_new.side();
    state.x = x_new;
    state.y = y_new;
    state.z = vec![z_new];
    state.f_curr = f_new;
    state.last_step_sq = step_sq;
    state.step_x = Some(RealImage::constant(side, t_x));
    state.step_y = Some(RealImage::constant(side, scalar_y));
    StepDiagnostics { path_ratio: None }
}
