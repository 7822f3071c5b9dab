//! The coupled least-squares objective
//! `F(x, y, z) = sum_j ||S_j(x) . y - z_j||^2`,
//! its partial gradients with respect to the probe and object blocks, and
//! the exact per-pixel / per-block / global Lipschitz moduli of those
//! gradients.
//!
//! Gradients are taken with respect to the real coordinates (re, im) of each
//! pixel under the real inner product, and are returned as [`ComplexImage`]s
//! whose pixel values encode the two real partial derivatives.

use crate::field::{
    hadamard, shift, shift_adjoint, ComplexImage, RealImage, ScanGeometry,
};


/// Probe constraint set X: per supported pixel a disk `|x_i| <= R`, zero
/// elsewhere.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ProbeConstraint {
    /// Support mask, true where the probe may be nonzero.
    pub support: Vec<bool>,
    /// Amplitude cap R.
    pub amplitude_cap: f64,
}

impl ProbeConstraint {
    /// Full-field support with the given cap.
    pub fn full(side: usize, amplitude_cap: f64) -> Self {
        Self { support: vec![true; side * side], amplitude_cap }
    }

    pub fn validate(&self, side: usize) -> Result<(), ModelError> {
        if self.support.len() != side * side {
            return Err(ModelError::SupportSize { expected: side * side, got: self.support.len() });
        }
        if !self.support.iter().any(|&s| s) {
            return Err(ModelError::EmptySupport("probe"));
        }
        if !(self.amplitude_cap.is_finite() && self.amplitude_cap > 0.0) {
            return Err(ModelError::BadBound("probe amplitude cap must be finite positive"));
        }
        Ok(())
    }
}

/// Object constraint set Y: per supported pixel an annulus
/// `lo <= |y_i| <= hi`, zero elsewhere.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ObjectConstraint {
    pub support: Vec<bool>,
    /// Lower amplitude bound (>= 0).
    pub amp_lo: f64,
    /// Upper amplitude bound (>= amp_lo).
    pub amp_hi: f64,
}

impl ObjectConstraint {
    pub fn full(side: usize, amp_lo: f64, amp_hi: f64) -> Self {
        Self { support: vec![true; side * side], amp_lo, amp_hi }
    }

    pub fn validate(&self, side: usize) -> Result<(), ModelError> {
        if self.support.len() != side * side {
            return Err(ModelError::SupportSize { expected: side * side, got: self.support.len() });
        }
        if !self.support.iter().any(|&s| s) {
            return Err(ModelError::EmptySupport("object"));
        }
        if !(self.amp_lo.is_finite() && self.amp_hi.is_finite()) {
            return Err(ModelError::BadBound("object amplitude bounds must be finite"));
        }
        if self.amp_lo < 0.0 || self.amp_hi < self.amp_lo {
            return Err(ModelError::BadBound("object bounds need 0 <= lo <= hi"));
        }
        Ok(())
    }
}

/// Measured Fourier magnitudes, one nonnegative real image per frame.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    pub mags: Vec<RealImage>,
    pub geometry: ScanGeometry,
}

impl MeasurementSet {
    pub fn num_frames(&self) -> usize {
        self.mags.len()
    }

    pub fn side(&self) -> usize {
        self.geometry.side()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mags.len() != self.geometry.num_frames() {
            return Err(ModelError::FrameCount {
                expected: self.geometry.num_frames(),
                got: self.mags.len(),
            });
        }
        for (j, b) in self.mags.iter().enumerate() {
            if b.side() != self.geometry.side() {
                return Err(ModelError::SideMismatch);
            }
            if !b.as_slice().iter().all(|&v| v.is_finite() && v >= 0.0) {
                return Err(ModelError::BadMeasurement(j));
            }
        }
        Ok(())
    }
}

/// A complete reconstruction problem: constraints, data, and the step floors
/// that keep projected-gradient steps finite where the probe or object is
/// locally zero.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub probe_c: ProbeConstraint,
    pub object_c: ObjectConstraint,
    pub meas: MeasurementSet,
    /// Lipschitz floor for probe steps.
    pub eta_x: f64,
    /// Lipschitz floor for object steps.
    pub eta_y: f64,
}

/// Default value of the step floors. Small enough never to bind where the
/// true modulus is meaningful, large enough to prevent division blow-up.
pub const DEFAULT_ETA: f64 = 1e-12;

impl ProblemInstance {
    pub fn new(
        probe_c: ProbeConstraint,
        object_c: ObjectConstraint,
        meas: MeasurementSet,
    ) -> Result<Self, ModelError> {
        let inst = Self { probe_c, object_c, meas, eta_x: DEFAULT_ETA, eta_y: DEFAULT_ETA };
        inst.validate()?;
        Ok(inst)
    }

    pub fn side(&self) -> usize {
        self.meas.side()
    }

    pub fn num_frames(&self) -> usize {
        self.meas.num_frames()
    }

    pub fn geometry(&self) -> &ScanGeometry {
        &self.meas.geometry
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let side = self.meas.side();
        self.probe_c.validate(side)?;
        self.object_c.validate(side)?;
        self.meas.validate()?;
        if !(self.eta_x > 0.0 && self.eta_y > 0.0) {
            return Err(ModelError::BadBound("step floors must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("support mask length {got} does not match field size {expected}")]
    SupportSize { expected: usize, got: usize },
    #[error("{0} support is empty")]
    EmptySupport(&'static str),
    #[error("{0}")]
    BadBound(&'static str),
    #[error("measurement count {got} does not match geometry frame count {expected}")]
    FrameCount { expected: usize, got: usize },
    #[error("measurement frame {0} has negative or non-finite entries")]
    BadMeasurement(usize),
    #[error("field sides are inconsistent across problem parts")]
    SideMismatch,
}

fn check_stack(x: &ComplexImage, y: &ComplexImage, z: &[ComplexImage], geom: &ScanGeometry) {
    assert_eq!(x.side(), y.side(), "probe/object side mismatch");
    assert_eq!(x.side(), geom.side(), "field side mismatch with geometry");
    assert_eq!(z.len(), geom.num_frames(), "exit-wave stack has wrong frame count");
    for zj in z {
        assert_eq!(zj.side(), x.side(), "exit-wave side mismatch");
    }
}

/// Coupling objective `F(x, y, z) = sum_j ||S_j(x) . y - z_j||^2`.
///
/// Nonnegative; zero exactly when every exit wave matches its probe-object
/// product.
pub fn objective(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> f64 {
    check_stack(x, y, z, geom);
    let mut total = 0.0;
    for (j, zj) in z.iter().enumerate() {
        let exit = hadamard(&shift(x, j, geom), y);
        total += exit.sub(zj).norm_sq();
    }
    total
}

/// Shared factor of the probe gradient and its moduli:
/// `sum_j S_j*(conj(y) . y)`, a real nonnegative image.
pub fn probe_quadratic_weights(y: &ComplexImage, geom: &ScanGeometry) -> RealImage {
    let y_sq = y.abs_sq();
    let n = y.side();
    let mut acc = RealImage::zeros(n);
    // shift_adjoint on a real image, done inline to avoid complex round trips
    for j in 0..geom.num_frames() {
        let (dr, dc) = geom.offset(j);
        for r in 0..n {
            let sr = (r + dr) % n;
            for c in 0..n {
                let sc = (c + dc) % n;
                acc[(r, c)] += y_sq[(sr, sc)];
            }
        }
    }
    acc
}

/// Shared factor of the object gradient and its moduli:
/// `sum_j S_j(conj(x) . x)`.
pub fn object_quadratic_weights(x: &ComplexImage, geom: &ScanGeometry) -> RealImage {
    let x_sq = x.abs_sq();
    let n = x.side();
    let mut acc = RealImage::zeros(n);
    for j in 0..geom.num_frames() {
        let (dr, dc) = geom.offset(j);
        for r in 0..n {
            let tr = (r + dr) % n;
            for c in 0..n {
                let tc = (c + dc) % n;
                acc[(tr, tc)] += x_sq[(r, c)];
            }
        }
    }
    acc
}

/// Linear term of the probe gradient: `sum_j S_j*(conj(y) . z_j)`.
pub fn probe_linear_term(
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> ComplexImage {
    let y_conj = y.conj();
    let n = y.side();
    let mut acc = ComplexImage::zeros(n);
    for (j, zj) in z.iter().enumerate() {
        let term = shift_adjoint(&hadamard(&y_conj, zj), j, geom);
        for (a, t) in acc.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *a += t;
        }
    }
    acc
}

/// Linear term of the object gradient: `sum_j S_j(conj(x)) . z_j`.
pub fn object_linear_term(
    x: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> ComplexImage {
    let x_conj = x.conj();
    let n = x.side();
    let mut acc = ComplexImage::zeros(n);
    for (j, zj) in z.iter().enumerate() {
        let term = hadamard(&shift(&x_conj, j, geom), zj);
        for (a, t) in acc.as_mut_slice().iter_mut().zip(term.as_slice()) {
            *a += t;
        }
    }
    acc
}

/// Partial gradient of F in the probe block:
/// `2 sum_j [ S_j*(conj(y) . y) . x - S_j*(conj(y) . z_j) ]`.
pub fn grad_x(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> ComplexImage {
    check_stack(x, y, z, geom);
    let weights = probe_quadratic_weights(y, geom);
    let linear = probe_linear_term(y, z, geom);
    gradient_from_parts(x, &weights, &linear)
}

/// Partial gradient of F in the object block:
/// `2 sum_j [ S_j(conj(x) . x) . y - S_j(conj(x)) . z_j ]`.
pub fn grad_y(
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    geom: &ScanGeometry,
) -> ComplexImage {
    check_stack(x, y, z, geom);
    let weights = object_quadratic_weights(x, geom);
    let linear = object_linear_term(x, z, geom);
    gradient_from_parts(y, &weights, &linear)
}

/// `2 (w . v - l)` pixelwise; the gradient is affine in its own block.
pub fn gradient_from_parts(
    v: &ComplexImage,
    weights: &RealImage,
    linear: &ComplexImage,
) -> ComplexImage {
    assert_eq!(v.side(), weights.side(), "image side mismatch");
    assert_eq!(v.side(), linear.side(), "image side mismatch");
    let data = v
        .as_slice()
        .iter()
        .zip(weights.as_slice())
        .zip(linear.as_slice())
        .map(|((&vi, &wi), &li)| 2.0 * (wi * vi - li))
        .collect();
    ComplexImage::from_vec(v.side(), data).expect("sizes checked")
}

/// Exact per-pixel Lipschitz moduli of the probe gradient:
/// `L_{x_i} = 2 (sum_j S_j*(conj(y) . y))_i`.
pub fn lipschitz_x_pixel(y: &ComplexImage, geom: &ScanGeometry) -> RealImage {
    let mut w = probe_quadratic_weights(y, geom);
    for v in w.as_mut_slice() {
        *v *= 2.0;
    }
    w
}

/// Exact per-pixel Lipschitz moduli of the object gradient:
/// `L_{y_i} = 2 (sum_j S_j(conj(x) . x))_i`.
pub fn lipschitz_y_pixel(x: &ComplexImage, geom: &ScanGeometry) -> RealImage {
    let mut w = object_quadratic_weights(x, geom);
    for v in w.as_mut_slice() {
        *v *= 2.0;
    }
    w
}

/// Whole-block modulus: the sup norm of the per-pixel moduli.
pub fn lipschitz_x_global(y: &ComplexImage, geom: &ScanGeometry) -> f64 {
    lipschitz_x_pixel(y, geom).max()
}

/// Whole-block modulus for the object gradient.
pub fn lipschitz_y_global(x: &ComplexImage, geom: &ScanGeometry) -> f64 {
    lipschitz_y_pixel(x, geom).max()
}

/// Modulus restricted to a sub-block of pixels: the sup norm of the pixel
/// moduli over the block. Reduces to the pixel value for singletons and to
/// the global value for the full block.
pub fn lipschitz_block(pixel_moduli: &RealImage, block: &[usize]) -> f64 {
    assert!(!block.is_empty(), "block must be nonempty");
    block
        .iter()
        .map(|&i| pixel_moduli.as_slice()[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Probe-gradient modulus over one sub-block.
pub fn lipschitz_x_block(y: &ComplexImage, geom: &ScanGeometry, block: &[usize]) -> f64 {
    lipschitz_block(&lipschitz_x_pixel(y, geom), block)
}

/// Object-gradient modulus over one sub-block.
pub fn lipschitz_y_block(x: &ComplexImage, geom: &ScanGeometry, block: &[usize]) -> f64 {
    lipschitz_block(&lipschitz_y_pixel(x, geom), block)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use num_complex::Complex64;
    use rand::prelude::*;

    pub fn random_image(side: usize, rng: &mut impl Rng) -> ComplexImage {
        ComplexImage::from_fn(side, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn random_stack(side: usize, m: usize, rng: &mut impl Rng) -> Vec<ComplexImage> {
        (0..m).map(|_| random_image(side, rng)).collect()
    }

    pub fn random_geometry(side: usize, m: usize, rng: &mut impl Rng) -> ScanGeometry {
        let offs: Vec<(i64, i64)> = (0..m)
            .map(|_| (rng.gen_range(0..side as i64), rng.gen_range(0..side as i64)))
            .collect();
        ScanGeometry::new(side, &offs).unwrap()
    }

    /// Scalar double-loop evaluation of F, the independent oracle.
    pub fn objective_naive(
        x: &ComplexImage,
        y: &ComplexImage,
        z: &[ComplexImage],
        geom: &ScanGeometry,
    ) -> f64 {
        let n = x.side();
        let mut total = 0.0;
        for (j, zj) in z.iter().enumerate() {
            let (dr, dc) = geom.offset(j);
            for r in 0..n {
                for c in 0..n {
                    // (S_j x)(r, c) = x((r - dr) mod n, (c - dc) mod n)
                    let sr = (r + n - dr) % n;
                    let sc = (c + n - dc) % n;
                    let d = x[(sr, sc)] * y[(r, c)] - zj[(r, c)];
                    total += d.norm_sqr();
                }
            }
        }
        total
    }

    /// Central finite differences of F in the real coordinates of one block.
    pub fn finite_diff_grad(
        mut eval: impl FnMut(&ComplexImage) -> f64,
        at: &ComplexImage,
        h: f64,
    ) -> ComplexImage {
        let n = at.side();
        let mut g = ComplexImage::zeros(n);
        for i in 0..at.len() {
            let mut plus = at.clone();
            let mut minus = at.clone();
            plus.as_mut_slice()[i].re += h;
            minus.as_mut_slice()[i].re -= h;
            let dre = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let mut plus = at.clone();
            let mut minus = at.clone();
            plus.as_mut_slice()[i].im += h;
            minus.as_mut_slice()[i].im -= h;
            let dim = (eval(&plus) - eval(&minus)) / (2.0 * h);
            g.as_mut_slice()[i] = Complex64::new(dre, dim);
        }
        g
    }
}
