//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with
//! `cargo test -p ptycho-core --test acceptance -- --nocapture`.

use num_complex::Complex64;
use ptycho_core::field::{fft2, hadamard, shift};
use ptycho_core::metrics::{certificate_report, r_factor, rms_error_registered};
use ptycho_core::projections::{project_modulus, project_object, project_probe};
use ptycho_core::simulate::{
    forward_measurements, make_object_truth, make_probe_disk, make_scan_grid,
};
use ptycho_core::solvers::heuristic_pd;
use ptycho_core::{
    grad_x, grad_y, lipschitz_x_global, lipschitz_x_pixel, objective, run, trace_to_csv,
    ComplexImage, MeasurementSet, ObjectConstraint, ProbeConstraint, ProblemInstance,
    SolverConfig, Variant,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn report(name: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name} failed: {detail}");
}

fn random_image(side: usize, rng: &mut impl Rng) -> ComplexImage {
    ComplexImage::from_fn(side, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn random_geometry(side: usize, m: usize, rng: &mut impl Rng) -> ptycho_core::ScanGeometry {
    let offs: Vec<(i64, i64)> = (0..m)
        .map(|_| (rng.gen_range(0..side as i64), rng.gen_range(0..side as i64)))
        .collect();
    ptycho_core::ScanGeometry::new(side, &offs).unwrap()
}

fn random_stack(side: usize, m: usize, rng: &mut impl Rng) -> Vec<ComplexImage> {
    (0..m).map(|_| random_image(side, rng)).collect()
}

/// Central finite differences of F in the real coordinates of one block.
fn finite_diff(
    mut eval: impl FnMut(&ComplexImage) -> f64,
    at: &ComplexImage,
    h: f64,
) -> ComplexImage {
    let mut g = ComplexImage::zeros(at.side());
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

/// Noiseless synthetic instance shared by the certificate criteria:
/// 32 x 32 field, 3 x 3 grid (m = 9).
fn instance_32() -> ProblemInstance {
    let side = 32;
    let (probe, probe_c) = make_probe_disk(side, 10.0, 1.0, 11.0);
    let object_c = ObjectConstraint::full(side, 0.6, 1.4);
    let object = make_object_truth(side, &object_c);
    let geom = make_scan_grid(side, 3, 9);
    let meas = forward_measurements(&probe, &object, &geom);
    ProblemInstance::new(probe_c, object_c, meas).unwrap()
}

/// Full-scale recovery instance: 64 x 64, 5 x 5 grid, stride coprime to the
/// side, strongly overlapping disk probe.
fn instance_64(pupil_factor: f64) -> (ProblemInstance, ComplexImage, ComplexImage) {
    let side = 64;
    let radius = 20.0;
    let (probe, probe_c) = make_probe_disk(side, radius, 1.0, radius * pupil_factor);
    let object_c = ObjectConstraint::full(side, 0.6, 1.4);
    let object = make_object_truth(side, &object_c);
    let geom = make_scan_grid(side, 5, 13);
    let meas = forward_measurements(&probe, &object, &geom);
    (ProblemInstance::new(probe_c, object_c, meas).unwrap(), probe, object)
}

#[test]
fn gradient_correctness() {
    // grad_x / grad_y match central finite differences of the objective on
    // 20 random instances (N = 8, m = 4), relative error <= 1e-6, < 10 s.
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let geom = random_geometry(8, 4, &mut rng);
        let x = random_image(8, &mut rng);
        let y = random_image(8, &mut rng);
        let z = random_stack(8, 4, &mut rng);

        let gx = grad_x(&x, &y, &z, &geom);
        let fd = finite_diff(|v| objective(v, &y, &z, &geom), &x, 1e-6);
        worst = worst.max(gx.sub(&fd).norm() / gx.norm().max(1e-12));

        let gy = grad_y(&x, &y, &z, &geom);
        let fd = finite_diff(|v| objective(&x, v, &z, &geom), &y, 1e-6);
        worst = worst.max(gy.sub(&fd).norm() / gy.norm().max(1e-12));
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "gradient-correctness",
        worst <= 1e-6 && elapsed < 10.0,
        &format!("worst rel err {worst:.3e}, {elapsed:.2}s"),
    );
}

#[test]
fn lipschitz_tightness() {
    // For 20 random y the coordinate difference quotient equals the
    // per-pixel modulus at the argmax pixel within 1e-9, and no sampled
    // quotient exceeds the global modulus.
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst_gap = 0.0f64;
    let mut max_excess = 0.0f64;
    for _ in 0..20 {
        let geom = random_geometry(8, 4, &mut rng);
        let y = random_image(8, &mut rng);
        let z = random_stack(8, 4, &mut rng);
        let moduli = lipschitz_x_pixel(&y, &geom);
        let global = lipschitz_x_global(&y, &geom);
        let x = random_image(8, &mut rng);
        let g = grad_x(&x, &y, &z, &geom);

        let argmax = moduli
            .as_slice()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        for i in 0..x.len() {
            let mut x2 = x.clone();
            x2.as_mut_slice()[i] += Complex64::new(0.61, -0.29);
            let g2 = grad_x(&x2, &y, &z, &geom);
            let quotient = (g.as_slice()[i] - g2.as_slice()[i]).norm()
                / (x.as_slice()[i] - x2.as_slice()[i]).norm();
            max_excess = max_excess.max(quotient - global);
            if i == argmax {
                worst_gap = worst_gap.max((quotient - moduli.as_slice()[i]).abs());
            }
        }
    }
    report(
        "lipschitz-tightness",
        worst_gap <= 1e-9 && max_excess <= 1e-9,
        &format!("argmax gap {worst_gap:.3e}, max excess over global {max_excess:.3e}"),
    );
}

#[test]
fn projector_optimality() {
    // Each projector beats 1000 random feasible candidates on 10 random
    // inputs; idempotency <= 1e-12; achieved magnitudes within 1e-10.
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let side = 4;
    let pc = ProbeConstraint {
        support: (0..16).map(|i| i % 5 != 2).collect(),
        amplitude_cap: 0.8,
    };
    let oc = ObjectConstraint {
        support: (0..16).map(|i| i % 7 != 3).collect(),
        amp_lo: 0.3,
        amp_hi: 1.2,
    };
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..10 {
        let v = random_image(side, &mut rng).scale(2.0);

        let p = project_probe(&v, &pc);
        let q = project_object(&v, &oc);
        let b = random_image(side, &mut rng).abs();
        let m = project_modulus(&v, &b);

        // Idempotency.
        let idem = project_probe(&p, &pc).sub(&p).norm()
            + project_object(&q, &oc).sub(&q).norm()
            + project_modulus(&m, &b).sub(&m).norm();
        if idem > 1e-12 * (1.0 + m.norm()) {
            ok = false;
            detail = format!("idempotency residual {idem:.3e} at case {case}");
        }

        // Magnitude feasibility of the modulus projection.
        let achieved = fft2(&m).abs();
        for (a, e) in achieved.as_slice().iter().zip(b.as_slice()) {
            if (a - e).abs() > 1e-10 {
                ok = false;
                detail = format!("|F(Pv)| off by {:.3e}", (a - e).abs());
            }
        }

        // Distance optimality against random feasible candidates.
        let dp = p.sub(&v).norm();
        let dq = q.sub(&v).norm();
        let dm = m.sub(&v).norm();
        for _ in 0..1000 {
            let cand = ComplexImage::from_vec(
                side,
                pc.support
                    .iter()
                    .map(|&s| {
                        if s {
                            Complex64::from_polar(
                                rng.gen_range(0.0..=pc.amplitude_cap),
                                rng.gen_range(0.0..std::f64::consts::TAU),
                            )
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect(),
            )
            .unwrap();
            if cand.sub(&v).norm() < dp - 1e-12 {
                ok = false;
                detail = "probe candidate beat projector".into();
            }

            let cand = ComplexImage::from_vec(
                side,
                oc.support
                    .iter()
                    .map(|&s| {
                        if s {
                            Complex64::from_polar(
                                rng.gen_range(oc.amp_lo..=oc.amp_hi),
                                rng.gen_range(0.0..std::f64::consts::TAU),
                            )
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect(),
            )
            .unwrap();
            if cand.sub(&v).norm() < dq - 1e-12 {
                ok = false;
                detail = "object candidate beat projector".into();
            }

            // Feasible spectra: measured magnitudes with random phases.
            let mut spec = ComplexImage::zeros(side);
            for (s, &mag) in spec.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *s = Complex64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU));
            }
            let cand = ptycho_core::ifft2(&spec);
            if cand.sub(&v).norm() < dm - 1e-10 {
                ok = false;
                detail = "modulus candidate beat projector".into();
            }
        }
    }
    report("projector-optimality", ok, if detail.is_empty() { "all checks" } else { &detail });
}

#[test]
fn sufficient_decrease() {
    // Both proximal variants keep the per-iteration decrease certificate at
    // every one of 200 iterations on the noiseless 32x32, m = 9 instance.
    let problem = instance_32();
    let mut ok = true;
    let mut detail = String::new();
    for variant in [Variant::PhebieWhole, Variant::PhebieParallel] {
        let mut cfg = SolverConfig::defaults(variant);
        cfg.warmup_iters = 0;
        cfg.max_iters = 200;
        cfg.seed = 11;
        let out = run(&problem, &cfg).unwrap();
        let lm = cfg.lambda_minus().unwrap();
        let rep = certificate_report(&out.trace, lm);
        if rep.decrease_violations != 0 || rep.monotonicity_violations != 0 {
            ok = false;
            detail = format!(
                "{}: {} decrease / {} monotonicity violations",
                variant.name(),
                rep.decrease_violations,
                rep.monotonicity_violations
            );
        }
    }
    report(
        "sufficient-decrease",
        ok,
        if detail.is_empty() { "zero violations over 200 iterations x 2 variants" } else { &detail },
    );
}

#[test]
fn rate_bound() {
    // The asymptotic-regularity bound holds on every proximal run.
    let problem = instance_32();
    let mut ok = true;
    let mut detail = String::new();
    for variant in [Variant::PhebieWhole, Variant::PhebieSeq, Variant::PhebieParallel] {
        for seed in [0u64, 7] {
            let mut cfg = SolverConfig::defaults(variant);
            cfg.warmup_iters = 5;
            cfg.max_iters = 60;
            cfg.seed = seed;
            let out = run(&problem, &cfg).unwrap();
            let rep = certificate_report(&out.trace, cfg.lambda_minus().unwrap());
            if !rep.rate_bound_holds {
                ok = false;
                detail = format!(
                    "{} seed {seed}: min step^2 {:?} > bound {:?}",
                    variant.name(),
                    rep.min_step_sq,
                    rep.rate_bound
                );
            }
        }
    }
    report("rate-bound", ok, if detail.is_empty() { "holds on 6 runs" } else { &detail });
}

#[test]
fn mode_equivalence() {
    // Sequential singleton blocks and parallel per-pixel steps produce the
    // same iterates to 1e-12 over 50 iterations on 5 random instances.
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let side = 16;
        let geom = random_geometry(side, 4, &mut rng);
        let truth_x = random_image(side, &mut rng);
        let truth_y = random_image(side, &mut rng);
        let mags = (0..4)
            .map(|j| fft2(&hadamard(&shift(&truth_x, j, &geom), &truth_y)).abs())
            .collect();
        let meas = MeasurementSet { mags, geometry: geom };
        let pc = ProbeConstraint {
            support: (0..side * side).map(|i| i % 11 != 5).collect(),
            amplitude_cap: 1.1,
        };
        let oc = ObjectConstraint::full(side, 0.2, 1.5);
        let problem = ProblemInstance::new(pc, oc, meas).unwrap();

        let mut cfg = SolverConfig::defaults(Variant::PhebieSeq);
        cfg.seq_tile = 1;
        cfg.warmup_iters = 0;
        cfg.max_iters = 50;
        cfg.seed = 100 + trial;
        let seq = run(&problem, &cfg).unwrap();
        cfg.variant = Variant::PhebieParallel;
        let par = run(&problem, &cfg).unwrap();

        let dx = seq.state.x.sub(&par.state.x).norm();
        let dy = seq.state.y.sub(&par.state.y).norm();
        let dz: f64 = seq
            .state
            .z
            .iter()
            .zip(&par.state.z)
            .map(|(a, b)| a.sub(b).norm())
            .sum();
        worst = worst.max(dx).max(dy).max(dz);
        for (a, b) in seq.trace.iter().zip(&par.trace) {
            worst = worst.max((a.f_value - b.f_value).abs());
        }
    }
    report("mode-equivalence", worst <= 1e-12, &format!("worst deviation {worst:.3e}"));
}

#[test]
fn end_to_end_recovery() {
    // Parallel per-pixel variant on the noiseless 64x64, 5x5-grid instance,
    // warm-up 10 + 300 iterations: R-factor <= 0.05 and registered
    // RMS-object <= 0.15 on at least 4 of 5 seeds, each run single-threaded
    // within 60 s.
    let (problem, _probe, object) = instance_64(1.1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut passes = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let mut cfg = SolverConfig::defaults(Variant::PhebieParallel);
        cfg.warmup_iters = 10;
        cfg.max_iters = 300;
        cfg.seed = seed;
        let started = Instant::now();
        let out = pool.install(|| run(&problem, &cfg)).unwrap();
        let elapsed = started.elapsed().as_secs_f64();
        let r = r_factor(&out.state.x, &out.state.y, problem.geometry(), &problem.meas).unwrap();
        let rms = rms_error_registered(&out.state.y, &object).unwrap();
        let good = r <= 0.05 && rms <= 0.15 && elapsed <= 60.0;
        if good {
            passes += 1;
        }
        lines.push(format!("seed {seed}: R {r:.4}, RMS {rms:.4}, {elapsed:.1}s"));
    }
    report("end-to-end-recovery", passes >= 4, &format!("{passes}/5 [{}]", lines.join("; ")));
}

#[test]
fn robustness_ordering() {
    // With the pupil constraint at 80% of the true probe radius, both
    // proximal variants reach lower registered RMS-object than the
    // approximate Douglas-Rachford scheme on at least 4 of 5 seeds.
    let (problem, _probe, object) = instance_64(0.8);
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let rms_of = |variant: Variant| -> f64 {
            let mut cfg = SolverConfig::defaults(variant);
            cfg.warmup_iters = 10;
            cfg.max_iters = 300;
            cfg.seed = seed;
            let out = run(&problem, &cfg).unwrap();
            rms_error_registered(&out.state.y, &object).unwrap()
        };
        let parallel = rms_of(Variant::PhebieParallel);
        let whole = rms_of(Variant::PhebieWhole);
        let dm = rms_of(Variant::ThibaultDm);
        if parallel < dm && whole < dm {
            wins += 1;
        }
        lines.push(format!("seed {seed}: prox {parallel:.3}/{whole:.3} vs dm {dm:.3}"));
    }
    report("robustness-ordering", wins >= 4, &format!("{wins}/5 [{}]", lines.join("; ")));
}

#[test]
fn thibault_inner_monotonicity() {
    // The reflector's inner objective is nonincreasing across 3 rounds on
    // 20 random states.
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let mut ok = true;
    let mut detail = String::new();
    for case in 0..20 {
        let geom = random_geometry(8, 4, &mut rng);
        let mut x = random_image(8, &mut rng);
        let mut y = random_image(8, &mut rng);
        let z = random_stack(8, 4, &mut rng);
        let mut prev = objective(&x, &y, &z, &geom);
        for round in 0..3 {
            let (nx, ny, _) = heuristic_pd(&x, &y, &z, &geom, 1, 1e-12);
            let cur = objective(&nx, &ny, &z, &geom);
            if cur > prev + 1e-9 * (1.0 + prev.abs()) {
                ok = false;
                detail = format!("case {case} round {round}: {prev:.6e} -> {cur:.6e}");
            }
            prev = cur;
            x = nx;
            y = ny;
        }
    }
    report(
        "thibault-inner-monotonicity",
        ok,
        if detail.is_empty() { "nonincreasing on 20 states x 3 rounds" } else { &detail },
    );
}

#[test]
fn determinism() {
    // Identical config and seed reproduce the trace byte-identically
    // (the wall-time column is a measurement and is excluded).
    let problem = instance_32();
    let mut cfg = SolverConfig::defaults(Variant::PhebieParallel);
    cfg.warmup_iters = 3;
    cfg.max_iters = 40;
    cfg.seed = 21;
    let a = run(&problem, &cfg).unwrap();
    let b = run(&problem, &cfg).unwrap();

    let strip_time = |csv: &str| -> String {
        csv.lines()
            .map(|line| {
                let (content, _) = line.rsplit_once(',').unwrap();
                format!("{content}\n")
            })
            .collect()
    };
    let ca = strip_time(&trace_to_csv(&a.trace));
    let cb = strip_time(&trace_to_csv(&b.trace));
    let same_state = a.state.x == b.state.x
        && a.state.y == b.state.y
        && a.state.z == b.state.z;
    report(
        "determinism",
        ca == cb && same_state,
        &format!("{} trace rows compared, final states bitwise equal: {same_state}", a.trace.len()),
    );
}
