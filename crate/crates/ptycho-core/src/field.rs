//! Complex 2-D field arithmetic: unitary Fourier transforms, cyclic shift
//! operators and their adjoints, Hadamard products, and the real inner
//! product that defines the geometry everywhere else in this crate.
//!
//! All fields are square `N x N` grids stored row-major as a flat vector of
//! `Complex64`. The pair (re, im) at each pixel is the `R^2` coordinate of
//! that pixel, so gradients of real-valued objectives are themselves
//! represented as [`ComplexImage`]s.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

/// Errors from constructing field-level values out of untrusted data.
#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("image side must be positive, got {0}")]
    ZeroSide(usize),
    #[error("data length {len} does not match side {side} (expected {expected})")]
    BadLength { side: usize, len: usize, expected: usize },
    #[error("scan geometry needs at least one shift offset")]
    EmptyGeometry,
    #[error("non-finite value at pixel {0}")]
    NonFinite(usize),
}

/// A square complex-valued field, row-major, side `N`, `n = N^2` pixels.
#[derive(Clone, PartialEq)]
pub struct ComplexImage {
    side: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexImage({}x{})", self.side, self.side)
    }
}

impl ComplexImage {
    /// All-zero field of the given side.
    pub fn zeros(side: usize) -> Self {
        assert!(side > 0, "image side must be positive");
        Self { side, data: vec![Complex64::new(0.0, 0.0); side * side] }
    }

    /// Constant field.
    pub fn constant(side: usize, value: Complex64) -> Self {
        assert!(side > 0, "image side must be positive");
        Self { side, data: vec![value; side * side] }
    }

    /// All-ones field.
    pub fn ones(side: usize) -> Self {
        Self::constant(side, Complex64::new(1.0, 0.0))
    }

    /// Unit impulse at `(row, col)`.
    pub fn delta(side: usize, row: usize, col: usize) -> Self {
        let mut img = Self::zeros(side);
        img[(row, col)] = Complex64::new(1.0, 0.0);
        img
    }

    /// Wraps a row-major vector, validating the length.
    pub fn from_vec(side: usize, data: Vec<Complex64>) -> Result<Self, FieldError> {
        if side == 0 {
            return Err(FieldError::ZeroSide(side));
        }
        if data.len() != side * side {
            return Err(FieldError::BadLength { side, len: data.len(), expected: side * side });
        }
        Ok(Self { side, data })
    }

    /// Builds a field by evaluating `f(row, col)`.
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(side > 0, "image side must be positive");
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                data.push(f(r, c));
            }
        }
        Self { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of pixels `n = N^2`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // side > 0 is a construction invariant
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Flat index of `(row, col)`.
    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.side && col < self.side);
        row * self.side + col
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self { side: self.side, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    /// Elementwise squared magnitudes `|v_i|^2` as a real image.
    pub fn abs_sq(&self) -> RealImage {
        RealImage { side: self.side, data: self.data.iter().map(|z| z.norm_sqr()).collect() }
    }

    /// Elementwise magnitudes `|v_i|` as a real image.
    pub fn abs(&self) -> RealImage {
        RealImage { side: self.side, data: self.data.iter().map(|z| z.norm()).collect() }
    }

    /// Euclidean norm under the real inner product.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.side, other.side, "image side mismatch");
        Self {
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Self {
        assert_eq!(self.side, other.side, "image side mismatch");
        Self {
            side: self.side,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + scale * b).collect(),
        }
    }

    /// `scale * self` for a real scalar.
    pub fn scale(&self, scale: f64) -> Self {
        Self { side: self.side, data: self.data.iter().map(|z| scale * z).collect() }
    }

    /// True when every coordinate is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexImage {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.side + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexImage {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.side + c]
    }
}

/// A square real-valued field with the same layout as [`ComplexImage`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealImage {
    side: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn zeros(side: usize) -> Self {
        assert!(side > 0, "image side must be positive");
        Self { side, data: vec![0.0; side * side] }
    }

    pub fn constant(side: usize, value: f64) -> Self {
        assert!(side > 0, "image side must be positive");
        Self { side, data: vec![value; side * side] }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self, FieldError> {
        if side == 0 {
            return Err(FieldError::ZeroSide(side));
        }
        if data.len() != side * side {
            return Err(FieldError::BadLength { side, len: data.len(), expected: side * side });
        }
        Ok(Self { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Largest entry; zero pixels dominate nothing since values are >= 0 in
    /// every use here, but the implementation is plain max.
    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for RealImage {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.side + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealImage {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.side + c]
    }
}

/// Cyclic scan geometry: `m` integer (row, col) offsets on an `N x N` field.
///
/// Frame `j` corresponds to the shift operator that translates pixel `p` to
/// `p + offset_j (mod N)`. The adjoint of each shift is its inverse, so the
/// operators are norm-preserving permutations.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScanGeometry {
    side: usize,
    shifts: Vec<(usize, usize)>,
}

impl ScanGeometry {
    /// Builds a geometry from raw integer offsets, reducing them mod `N`.
    pub fn new(side: usize, offsets: &[(i64, i64)]) -> Result<Self, FieldError> {
        if side == 0 {
            return Err(FieldError::ZeroSide(side));
        }
        if offsets.is_empty() {
            return Err(FieldError::EmptyGeometry);
        }
        let n = side as i64;
        let shifts = offsets
            .iter()
            .map(|&(r, c)| ((r.rem_euclid(n)) as usize, (c.rem_euclid(n)) as usize))
            .collect();
        Ok(Self { side, shifts })
    }

    /// Single identity shift.
    pub fn identity(side: usize) -> Self {
        Self::new(side, &[(0, 0)]).expect("identity geometry is valid")
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of frames `m`.
    pub fn num_frames(&self) -> usize {
        self.shifts.len()
    }

    /// The reduced (row, col) offset of frame `j`.
    pub fn offset(&self, j: usize) -> (usize, usize) {
        self.shifts[j]
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.shifts
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn rustfft::Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Runs 1-D transforms along rows, then columns, scaling by `1/N` so the 2-D
/// transform is unitary.
fn fft2_impl(img: &ComplexImage, inverse: bool) -> ComplexImage {
    let n = img.side();
    let fft = plan(n, inverse);
    let mut data = img.data.clone();

    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }

    // Columns via transpose so rustfft sees contiguous slices.
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            t[c * n + r] = data[r * n + c];
        }
    }
    for row in t.chunks_exact_mut(n) {
        fft.process(row);
    }
    let scale = 1.0 / n as f64;
    for r in 0..n {
        for c in 0..n {
            data[r * n + c] = t[c * n + r] * scale;
        }
    }

    ComplexImage { side: n, data }
}

/// Unitary 2-D discrete Fourier transform.
///
/// `ifft2(fft2(v)) == v` and `||fft2(v)|| == ||v||` (Parseval) hold to
/// machine precision.
pub fn fft2(img: &ComplexImage) -> ComplexImage {
    fft2_impl(img, false)
}

/// Inverse of [`fft2`], also unitary.
pub fn ifft2(img: &ComplexImage) -> ComplexImage {
    fft2_impl(img, true)
}

/// Applies the cyclic shift operator of frame `j`: pixel `p` moves to
/// `p + offset_j (mod N)`.
pub fn shift(img: &ComplexImage, j: usize, geom: &ScanGeometry) -> ComplexImage {
    assert_eq!(img.side(), geom.side(), "image side mismatch with geometry");
    assert!(j < geom.num_frames(), "frame index {j} out of range (m = {})", geom.num_frames());
    let n = img.side();
    let (dr, dc) = geom.offset(j);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        let tr = (r + dr) % n;
        for c in 0..n {
            let tc = (c + dc) % n;
            out[tr * n + tc] = img.data[r * n + c];
        }
    }
    ComplexImage { side: n, data: out }
}

/// Adjoint (= inverse) of [`shift`]: pixel `p + offset_j` moves back to `p`.
pub fn shift_adjoint(img: &ComplexImage, j: usize, geom: &ScanGeometry) -> ComplexImage {
    assert_eq!(img.side(), geom.side(), "image side mismatch with geometry");
    assert!(j < geom.num_frames(), "frame index {j} out of range (m = {})", geom.num_frames());
    let n = img.side();
    let (dr, dc) = geom.offset(j);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for r in 0..n {
        let sr = (r + dr) % n;
        for c in 0..n {
            let sc = (c + dc) % n;
            out[r * n + c] = img.data[sr * n + sc];
        }
    }
    ComplexImage { side: n, data: out }
}

/// Elementwise (Hadamard) complex product.
pub fn hadamard(a: &ComplexImage, b: &ComplexImage) -> ComplexImage {
    assert_eq!(a.side(), b.side(), "image side mismatch");
    ComplexImage {
        side: a.side,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    }
}

/// Real inner product on the `(R^2)^n` identification of `C^n`:
/// `sum_i (Re a_i Re b_i + Im a_i Im b_i)`.
pub fn real_inner(a: &ComplexImage, b: &ComplexImage) -> f64 {
    assert_eq!(a.side(), b.side(), "image side mismatch");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}
