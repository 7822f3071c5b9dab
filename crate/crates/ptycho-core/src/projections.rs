//! Exact projectors onto the probe, object, and Fourier-magnitude constraint
//! sets, plus the proximal exit-wave update.
//!
//! The true projectors are set-valued at isolated points (zero pixels); the
//! implementations here are single-valued via a fixed phase-0 tie-break so
//! that every run is reproducible.

use crate::field::{fft2, hadamard, ifft2, shift, ComplexImage, RealImage, ScanGeometry};
use crate::model::{MeasurementSet, ObjectConstraint, ProbeConstraint};
use num_complex::Complex64;
use rayon::prelude::*;

/// Nearest point of one probe pixel set: the disk `|v| <= cap` on support,
/// `{0}` off support.
#[inline]
pub(crate) fn probe_pixel(z: Complex64, inside: bool, cap: f64) -> Complex64 {
    if !inside {
        return Complex64::new(0.0, 0.0);
    }
    let mag = z.norm();
    if mag <= cap {
        z
    } else {
        z * (cap / mag)
    }
}

/// Nearest point of one object pixel set: the annulus `lo <= |v| <= hi` on
/// support (a zero pixel with lo > 0 breaks the tie at phase 0), `{0}` off
/// support.
#[inline]
pub(crate) fn object_pixel(z: Complex64, inside: bool, lo: f64, hi: f64) -> Complex64 {
    if !inside {
        return Complex64::new(0.0, 0.0);
    }
    let mag = z.norm();
    if mag == 0.0 {
        Complex64::new(lo, 0.0)
    } else if mag < lo {
        z * (lo / mag)
    } else if mag > hi {
        z * (hi / mag)
    } else {
        z
    }
}

/// Projects onto the probe set: per supported pixel the disk `|v| <= R`
/// (radial rescale, phase kept), zero off support. Idempotent.
pub fn project_probe(v: &ComplexImage, c: &ProbeConstraint) -> ComplexImage {
    assert_eq!(v.len(), c.support.len(), "support mask size mismatch");
    let data = v
        .as_slice()
        .iter()
        .zip(&c.support)
        .map(|(&z, &inside)| probe_pixel(z, inside, c.amplitude_cap))
        .collect();
    ComplexImage::from_vec(v.side(), data).expect("size preserved")
}

/// Projects onto the object set: per supported pixel the annulus
/// `lo <= |v| <= hi` (magnitude clamp, phase kept; a zero pixel with lo > 0
/// maps to `lo` at phase 0), zero off support. Idempotent.
pub fn project_object(v: &ComplexImage, c: &ObjectConstraint) -> ComplexImage {
    assert_eq!(v.len(), c.support.len(), "support mask size mismatch");
    let data = v
        .as_slice()
        .iter()
        .zip(&c.support)
        .map(|(&z, &inside)| object_pixel(z, inside, c.amp_lo, c.amp_hi))
        .collect();
    ComplexImage::from_vec(v.side(), data).expect("size preserved")
}

/// Projects onto the Fourier-magnitude set `{ u : |F(u)| = b }`.
///
/// The transform is unitary, so rescaling each Fourier coefficient onto the
/// circle of radius `b_k` (keeping its phase; `b_k` itself at zeros) is the
/// exact nearest point. The result satisfies `|F(result)| = b`.
pub fn project_modulus(v: &ComplexImage, b: &RealImage) -> ComplexImage {
    assert_eq!(v.side(), b.side(), "magnitude image side mismatch");
    let mut spectrum = fft2(v);
    for (z, &mag) in spectrum.as_mut_slice().iter_mut().zip(b.as_slice()) {
        let cur = z.norm();
        *z = if cur == 0.0 {
            Complex64::new(mag, 0.0)
        } else {
            *z * (mag / cur)
        };
    }
    ifft2(&spectrum)
}

/// Proximal exit-wave step: for each frame, the modulus projection of the
/// convex combination `2/(2+gamma) S_j(x) . y + gamma/(2+gamma) z_j`.
pub fn z_update(
    x: &ComplexImage,
    y: &ComplexImage,
    z_prev: &[ComplexImage],
    geom: &ScanGeometry,
    meas: &MeasurementSet,
    gamma: f64,
) -> Vec<ComplexImage> {
    assert!(gamma > 0.0, "gamma must be positive");
    assert_eq!(z_prev.len(), geom.num_frames(), "exit-wave stack frame count mismatch");
    assert_eq!(meas.num_frames(), geom.num_frames(), "measurement frame count mismatch");
    let w_new = 2.0 / (2.0 + gamma);
    let w_old = gamma / (2.0 + gamma);
    z_prev
        .par_iter()
        .enumerate()
        .map(|(j, zj)| {
            let exit = hadamard(&shift(x, j, geom), y);
            let blended = exit.scale(w_new).add_scaled(w_old, zj);
            project_modulus(&blended, &meas.mags[j])
        })
        .collect()
}
