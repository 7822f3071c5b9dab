//! Synthetic instance generation: scan grids, disk probes, a smooth default
//! object, exact forward measurements, and Poisson counting noise.
//!
//! Noise model: the measured magnitude `b` is treated as the square root of
//! an intensity `I = b^2`. Counts are drawn as `Poisson(lambda_scale * I)`
//! and the noisy magnitude is `sqrt(counts / lambda_scale)`. A "mean
//! count of about 2 per bright pixel" regime is obtained by choosing
//! `lambda_scale ~ 2 / I_bright`; large `lambda_scale` recovers the
//! noiseless data.

use crate::field::{fft2, hadamard, shift, ComplexImage, RealImage, ScanGeometry};
use crate::model::{MeasurementSet, ObjectConstraint, ProbeConstraint};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum SimulateError {
    #[error("noise scale must be positive, got {0}")]
    BadNoiseScale(f64),
}

/// Regular `g x g` grid of scan offsets with the given stride, reduced
/// mod N. Offsets are enumerated row-major: `(0,0), (0,s), ..., (s,0), ...`
pub fn make_scan_grid(side: usize, grid: usize, stride: usize) -> ScanGeometry {
    assert!(grid >= 1, "grid must have at least one position");
    let mut offsets = Vec::with_capacity(grid * grid);
    for gr in 0..grid {
        for gc in 0..grid {
            offsets.push(((gr * stride) as i64, (gc * stride) as i64));
        }
    }
    ScanGeometry::new(side, &offsets).expect("nonempty grid")
}

/// Indicator-disk probe of constant amplitude and phase, centered in the
/// field, together with a matching support/amplitude constraint.
///
/// `constraint_radius` may differ from the true radius; a smaller value
/// models an over-restrictive pupil under which the true probe is
/// infeasible.
pub fn make_probe_disk(
    side: usize,
    radius: f64,
    amplitude: f64,
    constraint_radius: f64,
) -> (ComplexImage, ProbeConstraint) {
    let probe = ComplexImage::from_fn(side, |r, c| {
        if in_disk(side, r, c, radius) {
            Complex64::new(amplitude, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut support = vec![false; side * side];
    for r in 0..side {
        for c in 0..side {
            if in_disk(side, r, c, constraint_radius) {
                support[r * side + c] = true;
            }
        }
    }
    (probe, ProbeConstraint { support, amplitude_cap: amplitude })
}

fn in_disk(side: usize, r: usize, c: usize, radius: f64) -> bool {
    let center = (side / 2) as f64;
    let dr = r as f64 - center;
    let dc = c as f64 - center;
    dr * dr + dc * dc <= radius * radius
}

/// Smooth synthetic ground-truth object: radial amplitude gradient spanning
/// the constraint's amplitude window and a linear phase ramp. Feasible for
/// the given constraint by construction.
pub fn make_object_truth(side: usize, c: &ObjectConstraint) -> ComplexImage {
    let center = (side / 2) as f64;
    let d_max = (2.0f64).sqrt() * center.max(1.0);
    ComplexImage::from_fn(side, |r, c_| {
        let i = r * side + c_;
        if !c.support[i] {
            return Complex64::new(0.0, 0.0);
        }
        let dr = r as f64 - center;
        let dc = c_ as f64 - center;
        let d = (dr * dr + dc * dc).sqrt() / d_max;
        let amp = c.amp_hi - (c.amp_hi - c.amp_lo) * d.min(1.0);
        let phase = 2.0 * std::f64::consts::PI * (0.3 * r as f64 + 0.2 * c_ as f64)
            / side as f64;
        Complex64::from_polar(amp, phase)
    })
}

/// Exact noiseless Fourier magnitudes `b_j = |F(S_j(x) . y)|`.
pub fn forward_measurements(
    x: &ComplexImage,
    y: &ComplexImage,
    geom: &ScanGeometry,
) -> MeasurementSet {
    let mags: Vec<RealImage> = (0..geom.num_frames())
        .into_par_iter()
        .map(|j| fft2(&hadamard(&shift(x, j, geom), y)).abs())
        .collect();
    MeasurementSet { mags, geometry: geom.clone() }
}

/// Derives a stream-separated seed for one frame of a stack.
fn frame_seed(seed: u64, j: usize) -> u64 {
    // splitmix-style spreading keeps per-frame streams independent
    let mut s = seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    s ^= s >> 30;
    s = s.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    s ^= s >> 27;
    s
}

/// Applies Poisson counting noise to a measurement set.
///
/// Per pixel: `I = b^2`, `counts ~ Poisson(lambda_scale * I)`, noisy
/// magnitude `sqrt(counts / lambda_scale)`. Zero magnitudes stay exactly
/// zero. Deterministic per seed, with per-frame derived streams.
pub fn add_poisson_noise(
    meas: &MeasurementSet,
    lambda_scale: f64,
    seed: u64,
) -> Result<MeasurementSet, SimulateError> {
    if !(lambda_scale > 0.0) {
        return Err(SimulateError::BadNoiseScale(lambda_scale));
    }
    let mags = meas
        .mags
        .par_iter()
        .enumerate()
        .map(|(j, b)| {
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, j));
            let data = b
                .as_slice()
                .iter()
                .map(|&mag| {
                    let rate = lambda_scale * mag * mag;
                    if rate == 0.0 {
                        return 0.0;
                    }
                    let counts = Poisson::new(rate)
                        .expect("positive rate")
                        .sample(&mut rng);
                    (counts / lambda_scale).sqrt()
                })
                .collect();
            RealImage::from_vec(b.side(), data).expect("size preserved")
        })
        .collect();
    Ok(MeasurementSet { mags, geometry: meas.geometry.clone() })
}

/// Random feasible object: per supported pixel a uniform magnitude in
/// `[lo, hi]` and uniform phase; zero off support. Deterministic per seed.
pub fn random_object_init(side: usize, c: &ObjectConstraint, seed: u64) -> ComplexImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = c
        .support
        .iter()
        .map(|&inside| {
            if !inside {
                return Complex64::new(0.0, 0.0);
            }
            let mag = rng.gen_range(c.amp_lo..=c.amp_hi);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(mag, phase)
        })
        .collect();
    ComplexImage::from_vec(side, data).expect("mask length is side^2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::project_object;

    #[test]
    fn scan_grid_shapes() {
        let g = make_scan_grid(16, 1, 4);
        assert_eq!(g.num_frames(), 1);
        assert_eq!(g.offset(0), (0, 0));

        let g = make_scan_grid(64, 3, 8);
        assert_eq!(g.num_frames(), 9);
        let mut offsets: Vec<_> = g.offsets().to_vec();
        offsets.sort_unstable();
        let mut expected = vec![];
        for r in [0usize, 8, 16] {
            for c in [0usize, 8, 16] {
                expected.push((r, c));
            }
        }
        expected.sort_unstable();
        assert_eq!(offsets, expected);
    }

    #[test]
    fn adjacent_scan_positions_overlap() {
        // With stride below the probe diameter, supports of neighboring
        // shifted probes intersect; count the intersection directly.
        let side = 32;
        let radius = 6.0;
        let stride = 8; // diameter 12 > stride
        let (probe, _) = make_probe_disk(side, radius, 1.0, radius);
        let geom = make_scan_grid(side, 2, stride);
        let a = shift(&probe, 0, &geom);
        let b = shift(&probe, 1, &geom);
        let overlap = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .filter(|(u, v)| u.norm() > 0.0 && v.norm() > 0.0)
            .count();
        assert!(overlap > 0, "adjacent probe supports must overlap");
    }

    #[test]
    fn probe_disk_cases() {
        // Radius 0 keeps only the center pixel.
        let (probe, c) = make_probe_disk(8, 0.0, 1.0, 0.0);
        let nonzero = probe.as_slice().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
        assert!(probe[(4, 4)].norm() > 0.0);
        assert_eq!(c.support.iter().filter(|&&s| s).count(), 1);

        // All probe energy sits inside the constraint support.
        let (probe, c) = make_probe_disk(32, 5.0, 1.0, 6.0);
        for (z, &inside) in probe.as_slice().iter().zip(&c.support) {
            if z.norm() > 0.0 {
                assert!(inside);
            }
        }

        // Over-restrictive pupil: the true probe violates its constraint.
        let (probe, tight) = make_probe_disk(32, 5.0, 1.0, 4.0);
        let projected = crate::projections::project_probe(&probe, &tight);
        assert!(projected.sub(&probe).norm() > 0.0);
    }

    #[test]
    fn object_truth_is_feasible() {
        let c = ObjectConstraint::full(16, 0.5, 1.5);
        let y = make_object_truth(16, &c);
        assert!(project_object(&y, &c).sub(&y).norm() <= 1e-12);
    }

    #[test]
    fn forward_measurements_basics() {
        let side = 8;
        let geom = make_scan_grid(side, 2, 3);
        let (x, _) = make_probe_disk(side, 2.0, 1.0, 2.0);
        let y = make_object_truth(side, &ObjectConstraint::full(side, 0.5, 1.5));

        // Zero probe or object kills every frame.
        let zeros = ComplexImage::zeros(side);
        let meas = forward_measurements(&zeros, &y, &geom);
        assert!(meas.mags.iter().all(|b| b.sum() == 0.0));

        // The truth is exactly feasible for its own measurements.
        let meas = forward_measurements(&x, &y, &geom);
        for (j, b) in meas.mags.iter().enumerate() {
            let achieved = fft2(&hadamard(&shift(&x, j, &geom), &y)).abs();
            for (a, e) in achieved.as_slice().iter().zip(b.as_slice()) {
                assert_eq!(a, e);
            }
        }
    }

    #[test]
    fn forward_measurements_match_naive_dft() {
        use crate::model::test_support::{random_geometry, random_image};
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let geom = random_geometry(4, 2, &mut rng);
        let x = random_image(4, &mut rng);
        let y = random_image(4, &mut rng);
        let meas = forward_measurements(&x, &y, &geom);
        for (j, b) in meas.mags.iter().enumerate() {
            let exit = hadamard(&shift(&x, j, &geom), &y);
            // direct DFT summation per output pixel
            let n = 4usize;
            for kr in 0..n {
                for kc in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..n {
                        for c in 0..n {
                            let ph = -2.0 * std::f64::consts::PI
                                * ((kr * r + kc * c) as f64)
                                / n as f64;
                            acc += exit[(r, c)] * Complex64::new(0.0, ph).exp();
                        }
                    }
                    let expected = (acc / n as f64).norm();
                    assert!((b[(kr, kc)] - expected).abs() <= 1e-12 * expected.max(1.0));
                }
            }
        }
    }

    #[test]
    fn poisson_noise_contract() {
        let side = 4;
        let geom = ScanGeometry::identity(side);
        let mut b = RealImage::zeros(side);
        b[(0, 0)] = 2.0; // intensity 4
        b[(1, 1)] = 0.0;
        let meas = MeasurementSet { mags: vec![b], geometry: geom };

        assert!(add_poisson_noise(&meas, 0.0, 1).is_err());
        assert!(add_poisson_noise(&meas, -1.0, 1).is_err());

        let noisy = add_poisson_noise(&meas, 10.0, 7).unwrap();
        // Zero stays zero: Poisson(0) has no mass.
        assert_eq!(noisy.mags[0][(1, 1)], 0.0);

        // Determinism and seed isolation.
        let again = add_poisson_noise(&meas, 10.0, 7).unwrap();
        assert_eq!(noisy.mags[0].as_slice(), again.mags[0].as_slice());
        let other = add_poisson_noise(&meas, 10.0, 8).unwrap();
        assert_ne!(noisy.mags[0].as_slice(), other.mags[0].as_slice());
    }

    #[test]
    fn poisson_noise_statistics() {
        // Sample mean of counts over many draws approaches lambda * I within
        // 3 sigma, and large lambda gives small relative magnitude error.
        let side = 1;
        let geom = ScanGeometry::identity(side);
        let mag = 3.0;
        let intensity = mag * mag;
        let b = RealImage::constant(side, mag);
        let meas = MeasurementSet { mags: vec![b], geometry: geom };

        let lambda = 50.0;
        let rate = lambda * intensity;
        let draws = 10_000usize;
        let mut count_sum = 0.0;
        let mut mag_err_sum = 0.0;
        for s in 0..draws {
            let noisy = add_poisson_noise(&meas, lambda, s as u64).unwrap();
            let noisy_mag = noisy.mags[0][(0, 0)];
            count_sum += lambda * noisy_mag * noisy_mag;
            mag_err_sum += (noisy_mag - mag).abs() / mag;
        }
        let mean_count = count_sum / draws as f64;
        let sigma = (rate / draws as f64).sqrt();
        assert!(
            (mean_count - rate).abs() <= 3.0 * sigma,
            "count mean {mean_count} vs rate {rate} (sigma {sigma})"
        );
        // Relative error is O(1/sqrt(rate)) ~ 0.021; allow a loose bound.
        assert!(mag_err_sum / draws as f64 <= 0.05);
    }

    #[test]
    fn random_object_init_contract() {
        let c = ObjectConstraint::full(8, 0.4, 1.1);
        let y = random_object_init(8, &c, 5);
        assert!(project_object(&y, &c).sub(&y).norm() <= 1e-12);

        // Constant-magnitude case.
        let c2 = ObjectConstraint::full(8, 0.7, 0.7);
        let y2 = random_object_init(8, &c2, 5);
        for z in y2.as_slice() {
            assert!((z.norm() - 0.7).abs() <= 1e-12);
        }

        // Determinism and seed separation.
        assert_eq!(random_object_init(8, &c, 9), random_object_init(8, &c, 9));
        assert_ne!(random_object_init(8, &c, 9), random_object_init(8, &c, 10));
    }
}
