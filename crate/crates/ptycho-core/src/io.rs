//! On-disk formats: the CIMG/RIMG binary image stacks and the JSON sidecar
//! that makes a saved instance self-describing.
//!
//! CIMG: ASCII magic `CIMG1\n`, one header line `N m\n` (decimal side and
//! frame count), then `m * N^2` little-endian f64 (re, im) pairs, row-major
//! per image, images concatenated. RIMG is identical with magic `RIMG1\n`
//! and a single f64 per pixel.

use crate::field::{ComplexImage, FieldError, RealImage, ScanGeometry};
use crate::model::{
    MeasurementSet, ModelError, ObjectConstraint, ProbeConstraint, ProblemInstance,
};
use num_complex::Complex64;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const CIMG_MAGIC: &[u8] = b"CIMG1\n";
const RIMG_MAGIC: &[u8] = b"RIMG1\n";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected}")]
    BadMagic { expected: &'static str },
    #[error("malformed header line: {0:?}")]
    BadHeader(String),
    #[error("image stack is empty or has mismatched sides")]
    BadStack,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn write_header(w: &mut impl Write, magic: &[u8], side: usize, frames: usize) -> Result<(), IoError> {
    w.write_all(magic)?;
    writeln!(w, "{side} {frames}")?;
    Ok(())
}

fn read_header(r: &mut impl BufRead, magic: &'static [u8]) -> Result<(usize, usize), IoError> {
    let mut got = [0u8; 6];
    r.read_exact(&mut got)?;
    if got != magic {
        return Err(IoError::BadMagic {
            expected: std::str::from_utf8(magic).unwrap_or("?"),
        });
    }
    let mut line = String::new();
    r.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let side = parts.next().and_then(|s| s.parse().ok());
    let frames = parts.next().and_then(|s| s.parse().ok());
    match (side, frames, parts.next()) {
        (Some(side), Some(frames), None) if side > 0 && frames > 0 => Ok((side, frames)),
        _ => Err(IoError::BadHeader(line)),
    }
}

fn stack_side<T>(images: &[T], side_of: impl Fn(&T) -> usize) -> Result<usize, IoError> {
    let first = images.first().ok_or(IoError::BadStack)?;
    let side = side_of(first);
    if images.iter().any(|img| side_of(img) != side) {
        return Err(IoError::BadStack);
    }
    Ok(side)
}

/// Writes a stack of complex images to a CIMG stream.
pub fn write_cimg_to(w: impl Write, images: &[ComplexImage]) -> Result<(), IoError> {
    let side = stack_side(images, |i| i.side())?;
    let mut w = BufWriter::new(w);
    write_header(&mut w, CIMG_MAGIC, side, images.len())?;
    for img in images {
        for z in img.as_slice() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a CIMG stream back into a stack of complex images.
pub fn read_cimg_from(r: impl Read) -> Result<Vec<ComplexImage>, IoError> {
    let mut r = BufReader::new(r);
    let (side, frames) = read_header(&mut r, CIMG_MAGIC)?;
    let mut images = Vec::with_capacity(frames);
    let mut buf = [0u8; 16];
    for _ in 0..frames {
        let mut data = Vec::with_capacity(side * side);
        for _ in 0..side * side {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        images.push(ComplexImage::from_vec(side, data)?);
    }
    Ok(images)
}

pub fn write_cimg(path: impl AsRef<Path>, images: &[ComplexImage]) -> Result<(), IoError> {
    write_cimg_to(std::fs::File::create(path)?, images)
}

pub fn read_cimg(path: impl AsRef<Path>) -> Result<Vec<ComplexImage>, IoError> {
    read_cimg_from(std::fs::File::open(path)?)
}

/// Writes a stack of real images to an RIMG stream.
pub fn write_rimg_to(w: impl Write, images: &[RealImage]) -> Result<(), IoError> {
    let side = stack_side(images, |i| i.side())?;
    let mut w = BufWriter::new(w);
    write_header(&mut w, RIMG_MAGIC, side, images.len())?;
    for img in images {
        for v in img.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an RIMG stream back into a stack of real images.
pub fn read_rimg_from(r: impl Read) -> Result<Vec<RealImage>, IoError> {
    let mut r = BufReader::new(r);
    let (side, frames) = read_header(&mut r, RIMG_MAGIC)?;
    let mut images = Vec::with_capacity(frames);
    let mut buf = [0u8; 8];
    for _ in 0..frames {
        let mut data = Vec::with_capacity(side * side);
        for _ in 0..side * side {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        images.push(RealImage::from_vec(side, data)?);
    }
    Ok(images)
}

pub fn write_rimg(path: impl AsRef<Path>, images: &[RealImage]) -> Result<(), IoError> {
    write_rimg_to(std::fs::File::create(path)?, images)
}

pub fn read_rimg(path: impl AsRef<Path>) -> Result<Vec<RealImage>, IoError> {
    read_rimg_from(std::fs::File::open(path)?)
}

/// Self-describing record of a saved instance: geometry, constraints, seeds,
/// and the relative file names of the image stacks next to it.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct InstanceSidecar {
    pub side: usize,
    pub geometry: ScanGeometry,
    /// Indices of supported probe pixels, row-major.
    pub probe_support: Vec<usize>,
    pub probe_amplitude_cap: f64,
    pub object_support: Vec<usize>,
    pub object_amp_lo: f64,
    pub object_amp_hi: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub seed: u64,
    pub noise_lambda_scale: Option<f64>,
    pub measurements_file: String,
    pub truth_probe_file: Option<String>,
    pub truth_object_file: Option<String>,
}

fn mask_to_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &s)| s.then_some(i)).collect()
}

fn indices_to_mask(indices: &[usize], len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &i in indices {
        if i < len {
            mask[i] = true;
        }
    }
    mask
}

impl InstanceSidecar {
    pub fn describe(
        problem: &ProblemInstance,
        seed: u64,
        noise_lambda_scale: Option<f64>,
        measurements_file: &str,
    ) -> Self {
        Self {
            side: problem.side(),
            geometry: problem.geometry().clone(),
            probe_support: mask_to_indices(&problem.probe_c.support),
            probe_amplitude_cap: problem.probe_c.amplitude_cap,
            object_support: mask_to_indices(&problem.object_c.support),
            object_amp_lo: problem.object_c.amp_lo,
            object_amp_hi: problem.object_c.amp_hi,
            eta_x: problem.eta_x,
            eta_y: problem.eta_y,
            seed,
            noise_lambda_scale,
            measurements_file: measurements_file.to_string(),
            truth_probe_file: None,
            truth_object_file: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    /// Rebuilds the problem, reading the measurement stack relative to the
    /// sidecar's directory.
    pub fn into_problem(&self, sidecar_path: impl AsRef<Path>) -> Result<ProblemInstance, IoError> {
        let dir = sidecar_path.as_ref().parent().unwrap_or_else(|| Path::new("."));
        let mags = read_rimg(dir.join(&self.measurements_file))?;
        let n = self.side * self.side;
        let probe_c = ProbeConstraint {
            support: indices_to_mask(&self.probe_support, n),
            amplitude_cap: self.probe_amplitude_cap,
        };
        let object_c = ObjectConstraint {
            support: indices_to_mask(&self.object_support, n),
            amp_lo: self.object_amp_lo,
            amp_hi: self.object_amp_hi,
        };
        let meas = MeasurementSet { mags, geometry: self.geometry.clone() };
        let mut problem = ProblemInstance::new(probe_c, object_c, meas)?;
        problem.eta_x = self.eta_x;
        problem.eta_y = self.eta_y;
        problem.validate()?;
        Ok(problem)
    }
}
