//! Reconstruction solvers: the proximal block algorithm in whole-block,
//! sequential sub-block, and parallel per-pixel forms, plus the approximate
//! Douglas-Rachford scheme and the single-frame cyclic scheme it is compared
//! against.
//!
//! Every variant runs under the same driver: an optional warm-up phase with
//! the probe update skipped, then the main loop, with a per-iteration trace
//! of objective, squared step norm, decrease-certificate slack, R-factor and
//! wall time.

mod maiden;
mod phebie;
mod thibault;

pub use maiden::{mr_step_scalar, CyclicSchedule};
pub use phebie::{x_update, y_update, BlockMode, StepScalars};
pub use thibault::{heuristic_pd, inner_objective};

use crate::field::{hadamard, shift, ComplexImage};
use crate::metrics::{decrease_tolerance, r_factor};
use crate::model::{objective, ModelError, ProblemInstance};
use crate::projections::{project_modulus, project_object, project_probe};
use crate::simulate::random_object_init;
use num_complex::Complex64;
use std::time::Instant;

/// Which reconstruction algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Whole-block proximal steps with the global sup-norm modulus.
    PhebieWhole,
    /// Sequential sub-block sweeps (singleton blocks by default).
    PhebieSeq,
    /// Fully parallel per-pixel steps.
    PhebieParallel,
    /// Approximate Douglas-Rachford with the heuristic product-set reflector.
    ThibaultDm,
    /// Single-measurement cyclic projected steps.
    MaidenRodenburg,
}

impl Variant {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "phebie_whole" => Some(Self::PhebieWhole),
            "phebie_seq" => Some(Self::PhebieSeq),
            "phebie_parallel" => Some(Self::PhebieParallel),
            "thibault_dm" => Some(Self::ThibaultDm),
            "maiden_rodenburg" => Some(Self::MaidenRodenburg),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PhebieWhole => "phebie_whole",
            Self::PhebieSeq => "phebie_seq",
            Self::PhebieParallel => "phebie_parallel",
            Self::ThibaultDm => "thibault_dm",
            Self::MaidenRodenburg => "maiden_rodenburg",
        }
    }

    pub const ALL: [Variant; 5] = [
        Self::PhebieWhole,
        Self::PhebieSeq,
        Self::PhebieParallel,
        Self::ThibaultDm,
        Self::MaidenRodenburg,
    ];

    fn is_phebie(&self) -> bool {
        matches!(self, Self::PhebieWhole | Self::PhebieSeq | Self::PhebieParallel)
    }
}

/// Solver hyperparameters. `alpha`/`beta` are the over-relaxation factors on
/// the step moduli (> 1 for the proximal variants, >= 2 for the cyclic
/// scheme as it defines its own scaling), `gamma` the proximal weight of the
/// exit-wave step, `inner_rounds` the number of alternating least-squares
/// rounds inside the heuristic reflector.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub inner_rounds: usize,
    pub warmup_iters: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Tile side of the sequential partition (1 = singleton pixel blocks).
    pub seq_tile: usize,
}

impl SolverConfig {
    /// Conventional defaults: proximal variants use alpha = beta = 1.1, the
    /// cyclic scheme its required 2.0; gamma = 1e-30, three inner rounds,
    /// ten warm-up iterations, 300 main iterations.
    pub fn defaults(variant: Variant) -> Self {
        let (alpha, beta) = if variant == Variant::MaidenRodenburg {
            (2.0, 2.0)
        } else {
            (1.1, 1.1)
        };
        Self {
            variant,
            alpha,
            beta,
            gamma: 1e-30,
            eta_x: crate::model::DEFAULT_ETA,
            eta_y: crate::model::DEFAULT_ETA,
            inner_rounds: 3,
            warmup_iters: 10,
            max_iters: 300,
            seed: 0,
            seq_tile: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::BadConfig(msg.to_string()));
        match self.variant {
            Variant::MaidenRodenburg => {
                if self.alpha < 2.0 || self.beta < 2.0 {
                    return bad("maiden_rodenburg requires alpha, beta >= 2");
                }
            }
            _ => {
                if self.alpha <= 1.0 || self.beta <= 1.0 {
                    return bad("alpha and beta must exceed 1");
                }
            }
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.eta_x > 0.0 && self.eta_y > 0.0) {
            return bad("step floors must be positive");
        }
        if self.inner_rounds < 1 {
            return bad("inner_rounds must be at least 1");
        }
        if self.seq_tile < 1 {
            return bad("seq_tile must be at least 1");
        }
        Ok(())
    }

    /// Decrease modulus `1/2 min{(alpha-1) eta_x, (beta-1) eta_y, gamma}` of
    /// the per-iteration certificate; only the proximal variants carry it.
    pub fn lambda_minus(&self) -> Option<f64> {
        if self.variant.is_phebie() {
            let a = (self.alpha - 1.0) * self.eta_x;
            let b = (self.beta - 1.0) * self.eta_y;
            Some(0.5 * a.min(b).min(self.gamma))
        } else {
            None
        }
    }

    fn block_mode(&self) -> BlockMode {
        match self.variant {
            Variant::PhebieWhole => BlockMode::Whole,
            Variant::PhebieSeq => BlockMode::Sequential { tile: self.seq_tile },
            _ => BlockMode::Parallel,
        }
    }
}

/// Current iterate of a solver run.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x: ComplexImage,
    pub y: ComplexImage,
    /// Exit-wave block: `m` frames for the proximal and Douglas-Rachford
    /// variants, a single active frame for the cyclic scheme.
    pub z: Vec<ComplexImage>,
    pub k: usize,
    pub f_curr: f64,
    pub last_step_sq: f64,
    /// Step scalars used by the most recent probe update, per pixel.
    pub step_x: Option<StepScalars>,
    /// Step scalars used by the most recent object update, per pixel.
    pub step_y: Option<StepScalars>,
}

/// One row of the per-iteration trace. `k = 0` is the initial snapshot.
#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub k: usize,
    pub f_value: f64,
    pub step_sq: f64,
    pub decrease_slack: f64,
    pub r_factor: f64,
    pub elapsed_ms: f64,
    /// Empirical `||A^k|| / ||u^k - u^{k-1}||` first-order residual ratio;
    /// recorded for proximal main-phase iterations with a nonzero step.
    pub path_ratio: Option<f64>,
}

/// Serializes a trace in the canonical column order.
pub fn trace_to_csv(trace: &[IterationTrace]) -> String {
    let mut out = String::from("k,F,step_sq,decrease_slack,r_factor,elapsed_ms\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.k, row.f_value, row.step_sq, row.decrease_slack, row.r_factor, row.elapsed_ms
        ));
    }
    out
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: SolverState,
    pub trace: Vec<IterationTrace>,
    /// Certificate grazes and similar non-fatal conditions.
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite iterate at iteration {k}")]
    NonFinite { k: usize, trace: Vec<IterationTrace> },
    #[error("metrics failure: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
}

/// Runs a solver from the protocol's default initialization: the probe
/// starts as the constant-amplitude constraint support, the object as a
/// random feasible field drawn from the config seed.
pub fn run(problem: &ProblemInstance, cfg: &SolverConfig) -> Result<RunOutcome, SolverError> {
    let side = problem.side();
    let cap = problem.probe_c.amplitude_cap;
    let x0 = ComplexImage::from_vec(
        side,
        problem
            .probe_c
            .support
            .iter()
            .map(|&s| if s { Complex64::new(cap, 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect(),
    )
    .expect("mask length is side^2");
    let y0 = random_object_init(side, &problem.object_c, cfg.seed);
    run_from(problem, cfg, &x0, &y0)
}

/// Runs a solver from an explicit initial guess. The guess is projected
/// onto the constraint sets, and the exit-wave block is initialized as the
/// modulus projection of the forward exit waves, so the starting point is
/// feasible.
pub fn run_from(
    problem: &ProblemInstance,
    cfg: &SolverConfig,
    x_init: &ComplexImage,
    y_init: &ComplexImage,
) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    problem.validate()?;

    let geom = problem.geometry().clone();
    let m = geom.num_frames();
    let x0 = project_probe(x_init, &problem.probe_c);
    let y0 = project_object(y_init, &problem.object_c);
    let z0: Vec<ComplexImage> = match cfg.variant {
        Variant::MaidenRodenburg => {
            let e = hadamard(&shift(&x0, 0, &geom), &y0);
            vec![project_modulus(&e, &problem.meas.mags[0])]
        }
        _ => (0..m)
            .map(|j| {
                let e = hadamard(&shift(&x0, j, &geom), &y0);
                project_modulus(&e, &problem.meas.mags[j])
            })
            .collect(),
    };

    let f0 = variant_objective(cfg.variant, &x0, &y0, &z0, problem);
    let r0 = r_factor(&x0, &y0, &geom, &problem.meas)?;
    let mut state = SolverState {
        x: x0,
        y: y0,
        z: z0,
        k: 0,
        f_curr: f0,
        last_step_sq: 0.0,
        step_x: None,
        step_y: None,
    };
    let mut trace = Vec::with_capacity(cfg.warmup_iters + cfg.max_iters + 1);
    trace.push(IterationTrace {
        k: 0,
        f_value: f0,
        step_sq: 0.0,
        decrease_slack: 0.0,
        r_factor: r0,
        elapsed_ms: 0.0,
        path_ratio: None,
    });

    let lambda_minus = cfg.lambda_minus().unwrap_or(0.0);
    let mut warnings = Vec::new();
    let started = Instant::now();
    let total = cfg.warmup_iters + cfg.max_iters;

    for k in 1..=total {
        let update_probe = k > cfg.warmup_iters;
        let f_prev = state.f_curr;

        let diag = match cfg.variant {
            Variant::PhebieWhole | Variant::PhebieSeq | Variant::PhebieParallel => {
                phebie::iterate(&mut state, problem, cfg, cfg.block_mode(), update_probe)
            }
            Variant::ThibaultDm => thibault::iterate(&mut state, problem, cfg, update_probe),
            Variant::MaidenRodenburg => maiden::iterate(&mut state, problem, cfg, k, update_probe),
        };
        state.k = k;

        if !(state.x.is_finite()
            && state.y.is_finite()
            && state.z.iter().all(|zj| zj.is_finite())
            && state.f_curr.is_finite())
        {
            return Err(SolverError::NonFinite { k, trace });
        }

        let slack = f_prev - state.f_curr - lambda_minus * state.last_step_sq;
        if cfg.variant.is_phebie() && slack < -decrease_tolerance(f_prev) {
            warnings.push(format!(
                "iteration {k}: decrease certificate grazed (slack {slack:.3e})"
            ));
        }
        let r = r_factor(&state.x, &state.y, &geom, &problem.meas)?;
        trace.push(IterationTrace {
            k,
            f_value: state.f_curr,
            step_sq: state.last_step_sq,
            decrease_slack: slack,
            r_factor: r,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            path_ratio: diag.path_ratio,
        });
    }

    Ok(RunOutcome { state, trace, warnings })
}

/// Per-iteration diagnostics returned by the variant steppers.
pub(crate) struct StepDiagnostics {
    pub path_ratio: Option<f64>,
}

/// The objective each variant reports in its trace: the coupling objective
/// for the proximal variants and the Douglas-Rachford shadow pair; for the
/// cyclic single-frame scheme, which has no full exit-wave block, the
/// squared distance of the forward exit waves to the measurement sets.
pub(crate) fn variant_objective(
    variant: Variant,
    x: &ComplexImage,
    y: &ComplexImage,
    z: &[ComplexImage],
    problem: &ProblemInstance,
) -> f64 {
    let geom = problem.geometry();
    match variant {
        Variant::MaidenRodenburg => {
            let mut total = 0.0;
            for j in 0..geom.num_frames() {
                let e = hadamard(&shift(x, j, geom), y);
                let p = project_modulus(&e, &problem.meas.mags[j]);
                total += e.sub(&p).norm_sq();
            }
            total
        }
        _ => objective(x, y, z, geom),
    }
}

pub(crate) fn stack_diff_sq(a: &[ComplexImage], b: &[ComplexImage]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.sub(v).norm_sq()).sum()
}
