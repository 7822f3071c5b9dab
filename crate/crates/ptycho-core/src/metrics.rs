//! Reconstruction quality metrics: the R-factor data-fidelity score, RMS
//! error up to the trivial ambiguities (cyclic translation, global phase and
//! scale), and verification of the per-iteration convergence certificates
//! recorded in a solver trace.

use crate::field::{fft2, hadamard, ifft2, shift, ComplexImage, ScanGeometry};
use crate::model::MeasurementSet;
use crate::solvers::IterationTrace;
use num_complex::Complex64;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("all-zero measurements: R-factor undefined")]
    AllZeroMeasurements,
    #[error("zero ground truth: relative error undefined")]
    ZeroTruth,
}

/// Normalized l1 residual between measured and model Fourier magnitudes:
/// `sum_j ||b_j - |F(S_j(x) . y)|||_1 / sum_j ||b_j||_1`.
///
/// Zero exactly when the magnitudes match; computable without ground truth.
pub fn r_factor(
    x: &ComplexImage,
    y: &ComplexImage,
    geom: &ScanGeometry,
    meas: &MeasurementSet,
) -> Result<f64, MetricsError> {
    assert_eq!(meas.num_frames(), geom.num_frames(), "frame count mismatch");
    let denom: f64 = meas.mags.iter().map(|b| b.sum()).sum();
    if denom == 0.0 {
        return Err(MetricsError::AllZeroMeasurements);
    }
    let mut numer = 0.0;
    for (j, b) in meas.mags.iter().enumerate() {
        let model = fft2(&hadamard(&shift(x, j, geom), y)).abs();
        numer += b
            .as_slice()
            .iter()
            .zip(model.as_slice())
            .map(|(&m, &p)| (m - p).abs())
            .sum::<f64>();
    }
    Ok(numer / denom)
}

/// Relative RMS error of `est` against `truth`, minimized over integer
/// cyclic translations and a global complex scale (which absorbs any global
/// phase).
///
/// The translation is located at the cross-correlation peak (computed by
/// FFT), which is exactly the translation minimizing the scale-optimal
/// residual; the scale is then the closed-form least-squares fit.
pub fn rms_error_registered(
    est: &ComplexImage,
    truth: &ComplexImage,
) -> Result<f64, MetricsError> {
    assert_eq!(est.side(), truth.side(), "image side mismatch");
    let truth_norm_sq = truth.norm_sq();
    if truth_norm_sq == 0.0 {
        return Err(MetricsError::ZeroTruth);
    }
    if est.norm_sq() == 0.0 {
        return Ok(1.0); // best scale is 0; residual is all of truth
    }

    // r(s) = <truth, T_s est>_C surfaces as ifft2(fft2(truth) .* conj(fft2(est)))
    // up to a positive factor; only the argmax matters.
    let ft = fft2(truth);
    let fe = fft2(est);
    let cross = ComplexImage::from_fn(est.side(), |r, c| ft[(r, c)] * fe[(r, c)].conj());
    let corr = ifft2(&cross);
    let n = est.side();
    let mut best = (0usize, 0usize);
    let mut best_mag = -1.0;
    for r in 0..n {
        for c in 0..n {
            let mag = corr[(r, c)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = (r, c);
            }
        }
    }

    let geom = ScanGeometry::new(n, &[(best.0 as i64, best.1 as i64)]).expect("valid");
    let aligned = shift(est, 0, &geom);
    Ok(scaled_residual(&aligned, truth, truth_norm_sq))
}

/// `min_c ||c u - t|| / ||t||` with the closed-form complex scale.
fn scaled_residual(u: &ComplexImage, t: &ComplexImage, t_norm_sq: f64) -> f64 {
    let mut dot = Complex64::new(0.0, 0.0); // <t, u>_C
    let mut u_norm_sq = 0.0;
    for (ti, ui) in t.as_slice().iter().zip(u.as_slice()) {
        dot += ti * ui.conj();
        u_norm_sq += ui.norm_sqr();
    }
    if u_norm_sq == 0.0 {
        return 1.0;
    }
    let c = dot / u_norm_sq;
    let mut resid_sq = 0.0;
    for (ti, ui) in t.as_slice().iter().zip(u.as_slice()) {
        resid_sq += (c * ui - ti).norm_sqr();
    }
    (resid_sq.max(0.0)).sqrt() / t_norm_sq.sqrt()
}

/// Verification of the decrease certificates over a recorded trace.
#[derive(Clone, Debug)]
pub struct CertificateReport {
    /// Number of iteration rows checked (excludes the k = 0 snapshot).
    pub iterations: usize,
    /// Iterations where F increased beyond the floating-point allowance.
    pub monotonicity_violations: usize,
    /// Iterations where `F(u+) <= F(u) - lambda ||du||^2` failed beyond the
    /// allowance.
    pub decrease_violations: usize,
    /// Most negative certificate slack observed.
    pub worst_slack: f64,
    /// Right-hand side of the asymptotic-regularity bound
    /// `(F(u^1) - F(u^{N+1})) / (N lambda)`.
    pub rate_bound: Option<f64>,
    /// Smallest squared step among s^2 .. s^{N+1}; must not exceed the bound.
    pub min_step_sq: Option<f64>,
    pub rate_bound_holds: bool,
    /// Largest observed `||A^k|| / ||u^k - u^{k-1}||` ratio, when recorded.
    pub max_path_ratio: Option<f64>,
    pub lambda_minus: f64,
}

/// Floating-point allowance for the decrease inequalities.
pub fn decrease_tolerance(f_prev: f64) -> f64 {
    1e-9 * (1.0 + f_prev.abs())
}

/// Checks monotonicity, the per-iteration sufficient-decrease inequality
/// with modulus `lambda_minus`, and the asymptotic-regularity rate bound
/// against a trace that starts with its k = 0 snapshot row.
pub fn certificate_report(trace: &[IterationTrace], lambda_minus: f64) -> CertificateReport {
    let mut monotonicity_violations = 0;
    let mut decrease_violations = 0;
    let mut worst_slack = f64::INFINITY;
    let mut max_path_ratio: Option<f64> = None;

    for w in trace.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let tol = decrease_tolerance(prev.f_value);
        if cur.f_value > prev.f_value + tol {
            monotonicity_violations += 1;
        }
        let slack = prev.f_value - cur.f_value - lambda_minus * cur.step_sq;
        worst_slack = worst_slack.min(slack);
        if slack < -tol {
            decrease_violations += 1;
        }
        if let Some(ratio) = cur.path_ratio {
            max_path_ratio = Some(max_path_ratio.map_or(ratio, |m: f64| m.max(ratio)));
        }
    }

    // Rate bound: min_{k=1..N} ||s^{k+1}||^2 <= (F(u^1) - F(u^{N+1})) / (N lambda).
    // Rows: index 0 is u^0; row k holds F(u^k) and ||s^k||^2.
    let (rate_bound, min_step_sq) = if trace.len() >= 3 && lambda_minus > 0.0 {
        let f1 = trace[1].f_value;
        let f_last = trace[trace.len() - 1].f_value;
        let n = (trace.len() - 2) as f64;
        let bound = (f1 - f_last) / (n * lambda_minus);
        let min_step = trace[2..]
            .iter()
            .map(|row| row.step_sq)
            .fold(f64::INFINITY, f64::min);
        (Some(bound), Some(min_step))
    } else {
        (None, None)
    };
    let rate_bound_holds = match (rate_bound, min_step_sq) {
        (Some(b), Some(s)) => s <= b + 1e-12 * (1.0 + b.abs()),
        _ => true,
    };

    CertificateReport {
        iterations: trace.len().saturating_sub(1),
        monotonicity_violations,
        decrease_violations,
        worst_slack: if worst_slack.is_finite() { worst_slack } else { 0.0 },
        rate_bound,
        min_step_sq,
        rate_bound_holds,
        max_path_ratio,
        lambda_minus,
    }
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.monotonicity_violations == 0 && self.decrease_violations == 0 && self.rate_bound_holds
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate summary ({} iterations, lambda- = {:.3e})", self.iterations, self.lambda_minus)?;
        writeln!(f, "  monotonicity violations : {}", self.monotonicity_violations)?;
        writeln!(f, "  decrease violations     : {}", self.decrease_violations)?;
        writeln!(f, "  worst slack             : {:.6e}", self.worst_slack)?;
        match (self.rate_bound, self.min_step_sq) {
            (Some(b), Some(s)) => {
                writeln!(f, "  rate bound (Cor. style) : min step^2 {:.6e} <= {:.6e} : {}", s, b,
                    if self.rate_bound_holds { "ok" } else { "VIOLATED" })?;
            }
            _ => writeln!(f, "  rate bound              : not applicable")?,
        }
        match self.max_path_ratio {
            Some(r) => writeln!(f, "  max ||A||/||du|| ratio  : {r:.6e}")?,
            None => writeln!(f, "  max ||A||/||du|| ratio  : not recorded")?,
        }
        Ok(())
    }
}
