//! Metropolis-adjusted HMC transitions and chain driver.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use crate::error::{check_finite, check_len, Error, Result};
use crate::integrators::{Convention, Dynamics, IntegratorKind, IntegratorSpec, PhaseState};
use crate::linalg::chol_sample_velocity;
use crate::rng::{RngStream, STREAM_ACCEPT, STREAM_MOMENTUM, STREAM_STEPSIZE};
use crate::targets::Target;

/// Lower end of the step-size jitter `ε ~ ε̄·U[0.8, 1]`.
pub const STEP_JITTER_LOW: f64 = 0.8;

/// The three per-chain streams.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    pub momentum: RngStream,
    pub stepsize: RngStream,
    pub accept: RngStream,
}

impl ChainStreams {
    /// Streams `offset + {1, 2, 3}` under `seed`.
    pub fn new(seed: u64, offset: u64) -> Self {
        Self {
            momentum: RngStream::new(seed, offset + STREAM_MOMENTUM),
            stepsize: RngStream::new(seed, offset + STREAM_STEPSIZE),
            accept: RngStream::new(seed, offset + STREAM_ACCEPT),
        }
    }
}

/// One proposal and its outcome.
#[derive(Debug, Clone)]
pub struct Transition {
    /// The chain's next state (the proposal if accepted).
    pub theta: Vec<f64>,
    pub potential: f64,
    /// Proposal end point.
    pub proposal: PhaseState,
    /// Momentum or velocity drawn at the start.
    pub initial_m: Vec<f64>,
    pub eps: f64,
    /// `H(end) − H(start)`; `+∞` for a divergent trajectory.
    pub delta_h: f64,
    pub accept_prob: f64,
    pub accepted: bool,
    pub divergent: bool,
    pub grad_evals: u64,
}

/// Draws fresh momentum (`N(0, I)`) or velocity (`B⁻ᵀz`, i.e. `N(0, J⁻¹)`).
pub fn draw_auxiliary<T: Target + ?Sized>(
    dynamics: &Dynamics<'_, T>,
    kind: IntegratorKind,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    let z = stream.normal(dynamics.dim());
    match kind.convention() {
        Convention::Momentum => Ok(z),
        Convention::Velocity => chol_sample_velocity(dynamics.require_reference(kind)?.cholesky(), &z),
    }
}

/// One HMC transition from `theta` (with potential `potential`).
pub fn hmc_step<T: Target + ?Sized>(
    dynamics: &Dynamics<'_, T>,
    spec: &IntegratorSpec,
    theta: &[f64],
    potential: f64,
    streams: &mut ChainStreams,
) -> Result<Transition> {
    let kind = spec.kind;
    let m0 = draw_auxiliary(dynamics, kind, &mut streams.momentum)?;
    let eps = spec.eps_bar * streams.stepsize.uniform(STEP_JITTER_LOW, 1.0)?;
    let start = PhaseState::new(theta.to_vec(), m0, kind.convention());
    let h0 = potential + dynamics.kinetic(&start);
    let traj = dynamics.trajectory(kind, &start, eps, spec.steps)?;

    let mut u1 = f64::INFINITY;
    let mut delta_h = f64::INFINITY;
    if !traj.divergent {
        u1 = dynamics.target().eval_potential(&traj.state.theta);
        let h1 = u1 + dynamics.kinetic(&traj.state);
        if h1.is_finite() {
            delta_h = h1 - h0;
        }
    }
    let divergent = traj.divergent || !delta_h.is_finite();
    let accept_prob = if delta_h <= 0.0 { 1.0 } else { (-delta_h).exp() };
    let accepted = streams.accept.bernoulli(accept_prob)?;
    let (theta_next, pot_next) = if accepted {
        (traj.state.theta.clone(), u1)
    } else {
        (theta.to_vec(), potential)
    };
    Ok(Transition {
        theta: theta_next,
        potential: pot_next,
        proposal: traj.state,
        initial_m: start.m,
        eps,
        delta_h,
        accept_prob,
        accepted,
        divergent,
        grad_evals: traj.grad_evals,
    })
}

/// Configuration of one chain.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub spec: IntegratorSpec,
    /// Recorded samples, after `discard`.
    pub n_samples: usize,
    pub seed: u64,
    /// Start point; defaults to `θ*` (or zero without a reference).
    pub initial_theta: Option<Vec<f64>>,
    /// Leading transitions not recorded.
    pub discard: usize,
    /// Added to every chain stream id (pilot chains use a non-zero offset).
    pub stream_offset: u64,
}

impl ChainConfig {
    pub fn new(spec: IntegratorSpec, n_samples: usize, seed: u64) -> Self {
        Self {
            spec,
            n_samples,
            seed,
            initial_theta: None,
            discard: 0,
            stream_offset: 0,
        }
    }
}

/// Recorded chain: samples are the states after each recorded transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub kind: IntegratorKind,
    pub eps_bar: f64,
    pub steps: usize,
    pub dim: usize,
    /// Row-major `n_samples × dim`.
    pub samples: Vec<f64>,
    pub accepted: Vec<bool>,
    pub energy_errors: Vec<f64>,
    pub divergences: usize,
    /// Over recorded and discarded transitions.
    pub grad_evals: u64,
    pub proposals: u64,
    pub wall_time_s: f64,
}

impl ChainOutput {
    pub fn n_samples(&self) -> usize {
        self.accepted.len()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.samples[k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim.max(1))
    }

    /// Coordinate `j` across samples.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples_iter().map(|s| s[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }

    /// `θ_0..θ_{d−1},accepted,delta_h` with one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let header: Vec<String> = (0..self.dim).map(|j| format!("theta_{j}")).collect();
        writeln!(w, "{},accepted,delta_h", header.join(","))?;
        for (k, s) in self.samples_iter().enumerate() {
            for x in s {
                write!(w, "{x},")?;
            }
            writeln!(w, "{},{}", u8::from(self.accepted[k]), self.energy_errors[k])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian: magic `SHMC`, u32 version, u64 dim, u64 n, `n·dim` f64
    /// samples, `n` u8 accept flags, `n` f64 energy errors.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.n_samples() as u64).to_le_bytes())?;
        for x in &self.samples {
            w.write_all(&x.to_le_bytes())?;
        }
        for a in &self.accepted {
            w.write_all(&[u8::from(*a)])?;
        }
        for e in &self.energy_errors {
            w.write_all(&e.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

const BINARY_MAGIC: &[u8; 4] = b"SHMC";
const BINARY_VERSION: u32 = 1;

/// Samples, accept flags and energy errors read back from [`ChainOutput::write_binary`].
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryChain {
    pub dim: usize,
    pub samples: Vec<f64>,
    pub accepted: Vec<bool>,
    pub energy_errors: Vec<f64>,
}

pub fn read_binary(path: &Path) -> Result<BinaryChain> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::InvalidArgument(format!("{}: not a chain file", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != BINARY_VERSION {
        return Err(Error::InvalidArgument(format!("{}: unsupported version", path.display())));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let dim = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            v.push(f64::from_le_bytes(b8));
        }
        Ok(v)
    };
    let samples = read_f64s(n * dim)?;
    let mut flags = vec![0u8; n];
    r.read_exact(&mut flags)?;
    let mut b8 = [0u8; 8];
    let mut energy_errors = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)?;
        energy_errors.push(f64::from_le_bytes(b8));
    }
    Ok(BinaryChain {
        dim,
        samples,
        accepted: flags.into_iter().map(|f| f != 0).collect(),
        energy_errors,
    })
}

/// Runs `discard + n_samples` transitions and records the last `n_samples`.
pub fn run_chain<T: Target + ?Sized>(dynamics: &Dynamics<'_, T>, cfg: &ChainConfig) -> Result<ChainOutput> {
    let spec = IntegratorSpec::new(cfg.spec.kind, cfg.spec.eps_bar, cfg.spec.steps)?;
    if cfg.spec.kind.needs_reference() {
        dynamics.require_reference(cfg.spec.kind)?;
    }
    let d = dynamics.dim();
    let mut theta = match (&cfg.initial_theta, dynamics.reference()) {
        (Some(t), _) => {
            check_len(d, t.len())?;
            check_finite(t, "initial θ")?;
            t.clone()
        }
        (None, Some(r)) => r.theta_star().to_vec(),
        (None, None) => vec![0.0; d],
    };
    let mut potential = dynamics.target().eval_potential(&theta);
    if !potential.is_finite() {
        return Err(Error::NonFinite("U at the initial state"));
    }
    let mut streams = ChainStreams::new(cfg.seed, cfg.stream_offset);
    let total = cfg.discard + cfg.n_samples;
    let mut out = ChainOutput {
        kind: spec.kind,
        eps_bar: spec.eps_bar,
        steps: spec.steps,
        dim: d,
        samples: Vec::with_capacity(cfg.n_samples * d),
        accepted: Vec::with_capacity(cfg.n_samples),
        energy_errors: Vec::with_capacity(cfg.n_samples),
        divergences: 0,
        grad_evals: 0,
        proposals: 0,
        wall_time_s: 0.0,
    };
    let clock = Instant::now();
    for k in 0..total {
        let t = hmc_step(dynamics, &spec, &theta, potential, &mut streams)?;
        out.grad_evals += t.grad_evals;
        out.proposals += 1;
        theta = t.theta;
        potential = t.potential;
        if k >= cfg.discard {
            out.samples.extend_from_slice(&theta);
            out.accepted.push(t.accepted);
            out.energy_errors.push(t.delta_h);
            out.divergences += usize::from(t.divergent);
        }
    }
    out.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(out)
}
