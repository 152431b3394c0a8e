//! Integrated autocorrelation times and per-run reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::ChainOutput;
use crate::targets::Target;

/// Window constant `c` in the automatic windowing rule `M ≥ c·τ(M)`.
pub const DEFAULT_WINDOW_C: f64 = 5.0;
pub const MIN_SERIES_LEN: usize = 2;

/// Normalized autocorrelation `ρ(0..n)` from the biased autocovariance,
/// computed by FFT with zero padding to a power of two `≥ 2n`.
pub fn autocorrelation(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: n, min: MIN_SERIES_LEN });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("series for autocorrelation"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64 * m as f64) {
        return Err(Error::ConstantSeries);
    }
    Ok(buf[..n].iter().map(|z| z.re / c0).collect())
}

/// Direct `O(n²)` autocorrelation; same normalization as [`autocorrelation`].
pub fn autocorrelation_direct(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort { len: n, min: MIN_SERIES_LEN });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c: Vec<f64> = (0..n)
        .map(|t| x[..n - t].iter().zip(&x[t..]).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    if !(c[0] > 0.0) {
        return Err(Error::ConstantSeries);
    }
    Ok(c.iter().map(|v| v / c[0]).collect())
}

/// `τ = 1 + 2 Σ_{t=1}^{M} ρ(t)` with the smallest `M` satisfying `M ≥ c·τ(M)`;
/// if no such `M` exists, the last window is used.
pub fn iac_from_acf(acf: &[f64], c: f64) -> f64 {
    let mut tau = 1.0;
    for (m, r) in acf.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if m as f64 >= c * tau {
            return tau;
        }
    }
    tau
}

/// Integrated autocorrelation time of a scalar series.
pub fn iac(values: &[f64]) -> Result<f64> {
    iac_with_window(values, DEFAULT_WINDOW_C)
}

pub fn iac_with_window(values: &[f64], c: f64) -> Result<f64> {
    Ok(iac_from_acf(&autocorrelation(values)?, c))
}

/// Scalar functionals tracked along a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    LogLikelihood,
    ThetaSquared,
    Component(usize),
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::LogLikelihood => "loglik".into(),
            Observable::ThetaSquared => "theta_sq".into(),
            Observable::Component(j) => format!("component_{j}"),
        }
    }
}

/// The observables reported for a target of dimension `d`: log-likelihood
/// (when available), `θᵀθ`, and every coordinate.
pub fn default_observables<T: Target + ?Sized>(target: &T) -> Vec<Observable> {
    let mut v = Vec::with_capacity(target.dim() + 2);
    if target.log_likelihood(&vec![0.0; target.dim()]).is_some() {
        v.push(Observable::LogLikelihood);
    }
    v.push(Observable::ThetaSquared);
    v.extend((0..target.dim()).map(Observable::Component));
    v
}

/// Evaluates `obs` along the chain.
pub fn observable_series<T: Target + ?Sized>(chain: &ChainOutput, target: &T, obs: Observable) -> Result<Vec<f64>> {
    chain
        .samples_iter()
        .map(|s| match obs {
            Observable::LogLikelihood => target
                .log_likelihood(s)
                .ok_or_else(|| Error::InvalidArgument("target has no log-likelihood".into())),
            Observable::ThetaSquared => Ok(s.iter().map(|x| x * x).sum()),
            Observable::Component(j) if j < s.len() => Ok(s[j]),
            Observable::Component(j) => Err(Error::DimensionMismatch { expected: s.len(), got: j }),
        })
        .collect()
}

/// IAC of one observable and its cost in the two work units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableCost {
    pub name: String,
    pub iac: f64,
    /// `τ·L`.
    pub steps_per_independent: f64,
    /// `τ·(grad evals per proposal)`.
    pub grads_per_independent: f64,
}

/// Everything reported for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub eps_bar: f64,
    pub steps: usize,
    pub duration: f64,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub divergences: usize,
    pub grad_evals: u64,
    pub grad_evals_per_proposal: f64,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub observables: Vec<ObservableCost>,
    pub tau_loglik: Option<f64>,
    pub tau_theta_sq: f64,
    /// Maximum over the coordinate series only.
    pub max_iac: f64,
    pub max_steps_per_independent: f64,
    pub max_grads_per_independent: f64,
    /// Wall-clock fields are omitted when byte-identical replays are wanted.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms_per_sample: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_wall_ms_per_independent: Option<f64>,
}

/// Descriptive fields that are not derivable from the chain itself.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub dataset: String,
    pub n: usize,
    pub seed: u64,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub include_wall_time: bool,
}

/// IACs of the default observables plus the chain summary.
pub fn report<T: Target + ?Sized>(chain: &ChainOutput, target: &T, info: &RunInfo) -> Result<RunReport> {
    let per_proposal = if chain.proposals == 0 {
        0.0
    } else {
        chain.grad_evals as f64 / chain.proposals as f64
    };
    let mut observables = Vec::new();
    let (mut tau_loglik, mut tau_theta_sq, mut max_iac) = (None, 0.0, 0.0f64);
    for obs in default_observables(target) {
        let series = observable_series(chain, target, obs)?;
        // A chain that never moved has no finite IAC.
        let tau = match iac(&series) {
            Ok(t) => t,
            Err(Error::ConstantSeries) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        match obs {
            Observable::LogLikelihood => tau_loglik = Some(tau),
            Observable::ThetaSquared => tau_theta_sq = tau,
            Observable::Component(_) => max_iac = max_iac.max(tau),
        }
        observables.push(ObservableCost {
            name: obs.name(),
            iac: tau,
            steps_per_independent: tau * chain.steps as f64,
            grads_per_independent: tau * per_proposal,
        });
    }
    let wall_ms_per_sample = (info.include_wall_time && chain.proposals > 0)
        .then(|| 1e3 * chain.wall_time_s / chain.proposals as f64);
    Ok(RunReport {
        method: chain.kind.label().into(),
        dataset: info.dataset.clone(),
        n: info.n,
        dim: chain.dim,
        seed: info.seed,
        eps_bar: chain.eps_bar,
        steps: chain.steps,
        duration: chain.eps_bar * chain.steps as f64,
        n_samples: chain.n_samples(),
        acceptance_rate: chain.acceptance_rate(),
        divergences: chain.divergences,
        grad_evals: chain.grad_evals,
        grad_evals_per_proposal: per_proposal,
        omega_min: info.omega_min,
        omega_max: info.omega_max,
        observables,
        tau_loglik,
        tau_theta_sq,
        max_iac,
        max_steps_per_independent: max_iac * chain.steps as f64,
        max_grads_per_independent: max_iac * per_proposal,
        wall_time_s: info.include_wall_time.then_some(chain.wall_time_s),
        wall_ms_per_sample,
        max_wall_ms_per_independent: wall_ms_per_sample.map(|w| w * max_iac),
    })
}

impl RunReport {
    pub fn table_header() -> &'static str {
        "method           L   eps_bar      tau_l  tau_th2  tau_max  tau_l*grads  tau_max*grads     AP"
    }

    /// One fixed-width row matching [`RunReport::table_header`].
    pub fn table_row(&self) -> String {
        let per = self.grad_evals_per_proposal;
        let tl = self.tau_loglik.unwrap_or(f64::NAN);
        let mut s = String::new();
        let _ = write!(
            s,
            "{:<14} {:>4} {:>9.5} {:>9.2} {:>8.2} {:>8.2} {:>12.1} {:>14.1} {:>6.3}",
            self.method,
            self.steps,
            self.eps_bar,
            tl,
            self.tau_theta_sq,
            self.max_iac,
            tl * per,
            self.max_grads_per_independent,
            self.acceptance_rate
        );
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// `lag,acf` CSV of the first `max_lag + 1` autocorrelations.
pub fn write_acf_csv(path: &Path, acf: &[f64], max_lag: usize) -> Result<()> {
    let mut s = String::from("lag,acf\n");
    for (t, r) in acf.iter().take(max_lag + 1).enumerate() {
        let _ = writeln!(s, "{t},{r}");
    }
    fs::write(path, s)?;
    Ok(())
}
