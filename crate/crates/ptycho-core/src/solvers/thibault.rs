//! Approximate Douglas-Rachford iteration on the exit-wave block: the
//! product-set reflector is replaced by a heuristic nearest-point map built
//! from alternating exact blockwise least squares on the probe and object.
//! The probe/object pair produced inside that map is the monitored (shadow)
//! iterate.
//!
//! Inside the solver the half-steps are projected onto the probe/object
//! constraint sets (the quadratic in each pixel is radially symmetric about
//! its unconstrained minimizer, so the projected point is still the exact
//! blockwise minimizer over the constraint). This puts the a-priori
//! constraints into the product set the reflector approximates — with a
//! misspecified pupil the resulting feasibility problem turns inconsistent,
//! which is precisely the regime where this scheme degrades. The free-space
//! [`heuristic_pd`] used on its own keeps the plain unconstrained form.

use super::{stack_diff_sq, StepDiagnostics};
use crate::field::{hadamard, shift, ComplexImage, ScanGeometry};
use crate::model::{
    objective, object_linear_term, object_quadratic_weights, probe_linear_term,
    probe_quadratic_weights, ProblemInstance,
};
use crate::projections::{object_pixel, probe_pixel, project_modulus};
use num_complex::Complex64;

/// Alternating blockwise least squares toward the set of exit-wave stacks
/// generated by a probe-object pair, with a per-pixel post-map applied to
/// each half-step (identity for the unconstrained form).
fn alternating_ls(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
    rounds: usize,
    floor: f64,
    update_probe: bool,
    map_x: impl Fn(Complex64, usize) -> Complex64,
    map_y: impl Fn(Complex64, usize) -> Complex64,
) -> (ComplexImage, ComplexImage, Vec<ComplexImage>) {
    assert!(rounds >= 1, "at least one inner round required");
    let mut xh = x.clone();
    let mut yh = y.clone();
    for _ in 0..rounds {
        if update_probe {
            let denom = probe_quadratic_weights(&yh, geom);
            let numer = probe_linear_term(&yh, z, geom);
            for i in 0..xh.len() {
                let d = denom.as_slice()[i];
                if d >= floor {
                    xh.as_mut_slice()[i] = map_x(numer.as_slice()[i] / d, i);
                }
            }
        }
        let denom = object_quadratic_weights(&xh, geom);
        let numer = object_linear_term(&xh, z, geom);
        for i in 0..yh.len() {
            let d = denom.as_slice()[i];
            if d >= floor {
                yh.as_mut_slice()[i] = map_y(numer.as_slice()[i] / d, i);
            }
        }
    }
    let v = (0..geom.num_frames())
        .map(|j| hadamard(&shift(&xh, j, geom), &yh))
        .collect();
    (xh, yh, v)
}

/// Alternating exact blockwise least squares toward the set of exit-wave
/// stacks generated by some unconstrained probe-object pair.
///
/// Each round solves the per-pixel least-squares problem for the probe given
/// the current object, then for the object given the fresh probe, so the
/// inner objective `sum_j ||S_j(xh) . yh - z_j||^2` never increases. Pixels
/// whose denominator falls below `floor` keep their previous value. Returns
/// the updated pair and the exit-wave stack it generates.
pub fn heuristic_pd(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
    rounds: usize,
    floor: f64,
) -> (ComplexImage, ComplexImage, Vec<ComplexImage>) {
    alternating_ls(x, y, z, geom, rounds, floor, true, |v, _| v, |v, _| v)
}

/// Constrained form used by the solver: every half-step lands in the
/// probe/object constraint set.
pub(crate) fn heuristic_pd_constrained(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    problem: &ProblemInstance,
    rounds: usize,
    floor: f64,
    update_probe: bool,
) -> (ComplexImage, ComplexImage, Vec<ComplexImage>) {
    let pc = &problem.probe_c;
    let oc = &problem.object_c;
    alternating_ls(
        x,
        y,
        z,
        problem.geometry(),
        rounds,
        floor,
        update_probe,
        |v, i| probe_pixel(v, pc.support[i], pc.amplitude_cap),
        |v, i| object_pixel(v, oc.support[i], oc.amp_lo, oc.amp_hi),
    )
}

/// The objective the inner rounds drive down, for monitoring and tests.
pub fn inner_objective(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> f64 {
    objective(x, y, z, geom)
}

/// One Douglas-Rachford step on the exit-wave stack:
/// `v ~ P_D(z)`, `zh in P_Z(2v - z)`, `z <- z + zh - v`, with the shadow
/// pair from the reflector stored as the monitored probe/object.
pub(crate) fn iterate(
    state: &mut super::SolverState,
    problem: &ProblemInstance,
    cfg: &super::SolverConfig,
    update_probe: bool,
) -> StepDiagnostics {
    let geom = problem.geometry();
    let z_old = std::mem::take(&mut state.z);

    let (x_new, y_new, v) = heuristic_pd_constrained(
        &state.x,
        &state.y,
        &z_old,
        problem,
        cfg.inner_rounds,
        cfg.eta_x.min(cfg.eta_y),
        update_probe,
    );

    let z_new: Vec<ComplexImage> = z_old
        .iter()
        .zip(&v)
        .enumerate()
        .map(|(j, (zj, vj))| {
            let reflected = vj.scale(2.0).sub(zj);
            let zh = project_modulus(&reflected, &problem.meas.mags[j]);
            zj.add_scaled(1.0, &zh).add_scaled(-1.0, vj)
        })
        .collect();

    let step_sq = x_new.sub(&state.x).norm_sq()
        + y_new.sub(&state.y).norm_sq()
        + stack_diff_sq(&z_new, &z_old);
    let f_new = objective(&x_new, &y_new, &z_new, geom);

    state.x = x_new;
    state.y = y_new;
    state.z = z_new;
    state.f_curr = f_new;
    state.last_step_sq = step_sq;
    state.step_x = None;
    state.step_y = None;
    StepDiagnostics { path_ratio: None }
}
