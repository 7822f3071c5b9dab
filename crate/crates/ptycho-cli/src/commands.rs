//! The four subcommands: simulate, reconstruct, benchmark, metrics.

use crate::config::Config;
use crate::instance::{build_instance, BuiltInstance};
use crate::pgm::{write_amplitude_pgm, write_phase_pgm};
use anyhow::{bail, Context, Result};
use ptycho_core::io::{read_cimg, write_cimg, write_rimg, InstanceSidecar};
use ptycho_core::metrics::{certificate_report, r_factor, rms_error_registered};
use ptycho_core::{trace_to_csv, ComplexImage, ProblemInstance, RunOutcome, SolverError};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Final metrics of one run, in the canonical report column order.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub f_final: f64,
    pub step_sq_final: f64,
    pub rms_object: f64,
    pub rms_probe: f64,
    pub r_factor: f64,
    pub time_s: f64,
}

const SUMMARY_HEADER: &str = "F,step_sq,rms_object,rms_probe,r_factor,time_s";

impl RunSummary {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.f_final,
            self.step_sq_final,
            self.rms_object,
            self.rms_probe,
            self.r_factor,
            self.time_s
        )
    }

    fn text_row(&self) -> String {
        format!(
            "F = {:.6e}  |du|^2 = {:.6e}  RMS-object = {:.4}  RMS-probe = {:.4}  R-factor = {:.4}  time = {:.2}s",
            self.f_final, self.step_sq_final, self.rms_object, self.rms_probe, self.r_factor, self.time_s
        )
    }
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))
}

/// Writes the instance (sidecar, measurements, truth when known) into `out`
/// so the directory is self-contained.
fn save_instance(out: &Path, built: &BuiltInstance, seed: u64) -> Result<()> {
    write_rimg(out.join("measurements.rimg"), &built.problem.meas.mags)?;
    let mut sidecar =
        InstanceSidecar::describe(&built.problem, seed, built.noise_lambda, "measurements.rimg");
    if let Some(probe) = &built.truth_probe {
        write_cimg(out.join("truth_probe.cimg"), std::slice::from_ref(probe))?;
        sidecar.truth_probe_file = Some("truth_probe.cimg".into());
    }
    if let Some(object) = &built.truth_object {
        write_cimg(out.join("truth_object.cimg"), std::slice::from_ref(object))?;
        sidecar.truth_object_file = Some("truth_object.cimg".into());
    }
    sidecar.save(out.join("instance.json"))?;
    Ok(())
}

pub fn simulate(cfg: &Config, out: &Path, seed: u64) -> Result<()> {
    if cfg.instance.source != "simulate" {
        bail!("simulate requires instance.source = \"simulate\"");
    }
    ensure_out(out)?;
    let built = crate::instance::simulate_instance(cfg, seed)?;
    save_instance(out, &built, seed)?;
    if let Some(probe) = &built.truth_probe {
        write_amplitude_pgm(out.join("truth_probe_amp.pgm"), probe)?;
        write_phase_pgm(out.join("truth_probe_phase.pgm"), probe)?;
    }
    if let Some(object) = &built.truth_object {
        write_amplitude_pgm(out.join("truth_object_amp.pgm"), object)?;
        write_phase_pgm(out.join("truth_object_phase.pgm"), object)?;
    }
    println!(
        "simulated {}x{} instance, {} frames{} -> {}",
        built.problem.side(),
        built.problem.side(),
        built.problem.num_frames(),
        if built.noise_lambda.is_some() { " (noisy)" } else { "" },
        out.display()
    );
    Ok(())
}

fn summarize(
    out_state: &ptycho_core::SolverState,
    problem: &ProblemInstance,
    built: &BuiltInstance,
    time_s: f64,
) -> Result<RunSummary> {
    let r = r_factor(&out_state.x, &out_state.y, problem.geometry(), &problem.meas)?;
    let rms = |truth: &Option<ComplexImage>, est: &ComplexImage| -> Result<f64> {
        match truth {
            Some(t) => Ok(rms_error_registered(est, t)?),
            None => Ok(f64::NAN),
        }
    };
    Ok(RunSummary {
        f_final: out_state.f_curr,
        step_sq_final: out_state.last_step_sq,
        rms_object: rms(&built.truth_object, &out_state.y)?,
        rms_probe: rms(&built.truth_probe, &out_state.x)?,
        r_factor: r,
        time_s,
    })
}

pub fn reconstruct(
    cfg: &Config,
    config_dir: &Path,
    out: &Path,
    seed: Option<u64>,
    variant: Option<&str>,
) -> Result<()> {
    ensure_out(out)?;
    let solver_cfg = cfg.solver_config(variant, seed)?;
    let built = build_instance(cfg, config_dir, solver_cfg.seed)?;
    let problem = &built.problem;

    let started = Instant::now();
    let outcome = match ptycho_core::run(problem, &solver_cfg) {
        Ok(outcome) => outcome,
        Err(SolverError::NonFinite { k, trace }) => {
            // Leave the diagnostic trace behind before aborting.
            std::fs::write(out.join("trace.csv"), trace_to_csv(&trace))?;
            return Err(SolverError::NonFinite { k, trace: Vec::new() }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let time_s = started.elapsed().as_secs_f64();
    let RunOutcome { state, trace, warnings } = outcome;

    for w in &warnings {
        eprintln!("warning: {w}");
    }

    save_instance(out, &built, solver_cfg.seed)?;
    write_cimg(out.join("probe.cimg"), std::slice::from_ref(&state.x))?;
    write_cimg(out.join("object.cimg"), std::slice::from_ref(&state.y))?;
    write_amplitude_pgm(out.join("probe_amp.pgm"), &state.x)?;
    write_phase_pgm(out.join("probe_phase.pgm"), &state.x)?;
    write_amplitude_pgm(out.join("object_amp.pgm"), &state.y)?;
    write_phase_pgm(out.join("object_phase.pgm"), &state.y)?;
    std::fs::write(out.join("trace.csv"), trace_to_csv(&trace))?;

    let cert_text = match solver_cfg.lambda_minus() {
        Some(lm) => format!("{}", certificate_report(&trace, lm)),
        None => format!(
            "variant {} carries no decrease certificate; trace recorded only\n",
            solver_cfg.variant.name()
        ),
    };
    std::fs::write(out.join("certificates.txt"), &cert_text)?;

    let summary = summarize(&state, problem, &built, time_s)?;
    std::fs::write(
        out.join("summary.csv"),
        format!("{SUMMARY_HEADER}\n{}\n", summary.csv_row()),
    )?;
    std::fs::write(out.join("summary.txt"), format!("{}\n", summary.text_row()))?;

    println!(
        "{} finished {} iterations: {}",
        solver_cfg.variant.name(),
        trace.len().saturating_sub(1),
        summary.text_row()
    );
    print!("{cert_text}");
    Ok(())
}

pub fn benchmark(
    cfg: &Config,
    config_dir: &Path,
    out: &Path,
    seed: Option<u64>,
    variant: Option<&str>,
) -> Result<()> {
    ensure_out(out)?;
    let base_seed = seed.unwrap_or(cfg.seed);
    let built = build_instance(cfg, config_dir, base_seed)?;
    if built.truth_object.is_none() {
        bail!("benchmark needs ground truth (simulate source or sidecar with truth files)");
    }
    let variant_names: Vec<String> = match variant {
        Some(v) => vec![v.to_string()],
        None => cfg.benchmark.variants.clone(),
    };
    let trials = cfg.benchmark.trials.max(1);

    // Every (variant, trial) pair is an isolated run with a derived seed;
    // output assembly below is order-independent.
    let mut jobs = Vec::new();
    for name in &variant_names {
        for t in 0..trials {
            jobs.push((name.clone(), t));
        }
    }
    let results: Result<Vec<(String, usize, RunSummary)>> = jobs
        .par_iter()
        .map(|(name, t)| {
            let mut sc = cfg.solver_config(Some(name), None)?;
            sc.seed = base_seed.wrapping_add(*t as u64);
            let started = Instant::now();
            let outcome = ptycho_core::run(&built.problem, &sc)?;
            let time_s = started.elapsed().as_secs_f64();
            let summary = summarize(&outcome.state, &built.problem, &built, time_s)?;
            Ok((name.clone(), *t, summary))
        })
        .collect();
    let results = results?;

    let mut csv = String::from(
        "variant,F_mean,F_worst,step_sq_mean,step_sq_worst,rms_object_mean,rms_object_worst,\
         rms_probe_mean,rms_probe_worst,r_factor_mean,r_factor_worst,time_s_mean,time_s_worst\n",
    );
    let mut text = String::new();
    writeln!(
        text,
        "{:<18} {:>24} {:>24} {:>19} {:>19} {:>19} {:>17}",
        "Algorithm", "F(u^K)", "|u^K - u^(K-1)|^2", "RMS-Object", "RMS-Probe", "R-factor", "Time (s)"
    )?;
    for name in &variant_names {
        let rows: Vec<&RunSummary> = results
            .iter()
            .filter(|(n, _, _)| n == name)
            .map(|(_, _, s)| s)
            .collect();
        let agg = |f: fn(&RunSummary) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = rows.iter().map(|s| f(s)).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let worst = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (mean, worst)
        };
        let f = agg(|s| s.f_final);
        let st = agg(|s| s.step_sq_final);
        let ro = agg(|s| s.rms_object);
        let rp = agg(|s| s.rms_probe);
        let rf = agg(|s| s.r_factor);
        let tm = agg(|s| s.time_s);
        writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.0, f.1, st.0, st.1, ro.0, ro.1, rp.0, rp.1, rf.0, rf.1, tm.0, tm.1
        )
        .ok();
        writeln!(
            text,
            "{:<18} {:>11.4e} ({:.4e}) {:>11.4e} ({:.4e}) {:>9.4} ({:.4}) {:>9.4} ({:.4}) {:>9.4} ({:.4}) {:>8.2} ({:.2})",
            name, f.0, f.1, st.0, st.1, ro.0, ro.1, rp.0, rp.1, rf.0, rf.1, tm.0, tm.1
        )?;
    }
    std::fs::write(out.join("benchmark.csv"), &csv)?;
    std::fs::write(out.join("benchmark.txt"), &text)?;
    println!("benchmark: {} variants x {} trials", variant_names.len(), trials);
    print!("{text}");
    Ok(())
}

pub fn metrics(out: &Path) -> Result<()> {
    let sidecar_path = out.join("instance.json");
    let sidecar = InstanceSidecar::load(&sidecar_path)
        .with_context(|| format!("loading {}", sidecar_path.display()))?;
    let problem = sidecar.into_problem(&sidecar_path)?;

    let load_one = |name: &str| -> Result<ComplexImage> {
        let mut stack = read_cimg(out.join(name))?;
        if stack.len() != 1 {
            bail!("{name} must hold exactly one image");
        }
        Ok(stack.remove(0))
    };
    let probe = load_one("probe.cimg")?;
    let object = load_one("object.cimg")?;

    let r = r_factor(&probe, &object, problem.geometry(), &problem.meas)?;
    let rms_vs = |file: &Option<String>, est: &ComplexImage| -> Result<f64> {
        match file {
            Some(f) => {
                let truth = read_cimg(out.join(f))?.remove(0);
                Ok(rms_error_registered(est, &truth)?)
            }
            None => Ok(f64::NAN),
        }
    };
    let rms_probe = rms_vs(&sidecar.truth_probe_file, &probe)?;
    let rms_object = rms_vs(&sidecar.truth_object_file, &object)?;

    let csv = format!("r_factor,rms_object,rms_probe\n{r},{rms_object},{rms_probe}\n");
    let text = format!("R-factor = {r:.6}  RMS-object = {rms_object:.6}  RMS-probe = {rms_probe:.6}\n");
    std::fs::write(out.join("metrics.csv"), &csv)?;
    std::fs::write(out.join("metrics.txt"), &text)?;
    print!("{text}");
    Ok(())
}
