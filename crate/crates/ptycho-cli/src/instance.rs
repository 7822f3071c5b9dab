//! Builds a problem instance from a config: either a synthetic simulation
//! or a previously saved sidecar + measurement stack.

use crate::config::Config;
use anyhow::{bail, Context, Result};
use ptycho_core::io::{read_cimg, InstanceSidecar};
use ptycho_core::simulate::{
    add_poisson_noise, forward_measurements, make_object_truth, make_probe_disk, make_scan_grid,
};
use ptycho_core::{ComplexImage, ObjectConstraint, ProblemInstance};
use std::path::Path;

pub struct BuiltInstance {
    pub problem: ProblemInstance,
    pub truth_probe: Option<ComplexImage>,
    pub truth_object: Option<ComplexImage>,
    pub noise_lambda: Option<f64>,
}

pub fn build_instance(cfg: &Config, config_dir: &Path, seed: u64) -> Result<BuiltInstance> {
    match cfg.instance.source.as_str() {
        "simulate" => simulate_instance(cfg, seed),
        "files" => load_instance(cfg, config_dir),
        other => bail!("unknown instance source {other:?}"),
    }
}

pub fn simulate_instance(cfg: &Config, seed: u64) -> Result<BuiltInstance> {
    let ic = &cfg.instance;
    let (probe, probe_c) = make_probe_disk(
        ic.side,
        ic.probe_radius,
        ic.probe_amplitude,
        cfg.pupil_radius(),
    );
    let object_c = ObjectConstraint::full(ic.side, ic.object_amp_lo, ic.object_amp_hi);
    let object = make_object_truth(ic.side, &object_c);
    let geom = make_scan_grid(ic.side, ic.grid, ic.stride);
    let mut meas = forward_measurements(&probe, &object, &geom);
    let mut noise_lambda = None;
    if let Some(noise) = &ic.noise {
        meas = add_poisson_noise(&meas, noise.lambda_scale, seed)
            .context("applying Poisson noise")?;
        noise_lambda = Some(noise.lambda_scale);
    }
    let problem = ProblemInstance::new(probe_c, object_c, meas)?;
    Ok(BuiltInstance {
        problem,
        truth_probe: Some(probe),
        truth_object: Some(object),
        noise_lambda,
    })
}

fn load_instance(cfg: &Config, config_dir: &Path) -> Result<BuiltInstance> {
    let rel = cfg.instance.sidecar.as_ref().expect("validated");
    let sidecar_path = config_dir.join(rel);
    let sidecar = InstanceSidecar::load(&sidecar_path)
        .with_context(|| format!("loading sidecar {}", sidecar_path.display()))?;
    let problem = sidecar.into_problem(&sidecar_path)?;
    let dir = sidecar_path.parent().unwrap_or_else(|| Path::new("."));
    let load_truth = |file: &Option<String>| -> Result<Option<ComplexImage>> {
        match file {
            Some(f) => {
                let mut stack = read_cimg(dir.join(f))?;
                if stack.len() != 1 {
                    bail!("truth image stack {f} must hold exactly one image");
                }
                Ok(Some(stack.remove(0)))
            }
            None => Ok(None),
        }
    };
    let truth_probe = load_truth(&sidecar.truth_probe_file)?;
    let truth_object = load_truth(&sidecar.truth_object_file)?;
    Ok(BuiltInstance {
        problem,
        truth_probe,
        truth_object,
        noise_lambda: sidecar.noise_lambda_scale,
    })
}
