//! 8-bit portable graymap quick-looks of complex fields, for eyeballing
//! results. Display only; never read back.

use anyhow::Result;
use ptycho_core::ComplexImage;
use std::io::Write;
use std::path::Path;

fn write_pgm(path: &Path, side: usize, bytes: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{side} {side}\n255\n")?;
    f.write_all(bytes)?;
    Ok(())
}

/// Amplitude image, normalized so the brightest pixel maps to 255.
pub fn write_amplitude_pgm(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    let mags: Vec<f64> = img.as_slice().iter().map(|z| z.norm()).collect();
    let max = mags.iter().cloned().fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = mags.iter().map(|m| (m * scale).round() as u8).collect();
    write_pgm(path.as_ref(), img.side(), &bytes)
}

/// Phase image mapping [-pi, pi] onto [0, 255].
pub fn write_phase_pgm(path: impl AsRef<Path>, img: &ComplexImage) -> Result<()> {
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|z| {
            let t = (z.arg() + std::f64::consts::PI) / std::f64::consts::TAU;
            (t * 255.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    write_pgm(path.as_ref(), img.side(), &bytes)
}
