//! Experiment configuration, step-size protocol, and artifact writing for the
//! command-line runner.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    autocorrelation, default_observables, observable_series, report, write_acf_csv, RunInfo, RunReport,
};
use crate::error::{Error, Result};
use crate::integrators::{Dynamics, IntegratorKind, IntegratorSpec};
use crate::linalg::sym_eigen;
use crate::precompute::{build_reference_cached, QuadraticReference};
use crate::rng::{RngStream, PILOT_STREAM_STRIDE, STREAM_DATA, STREAM_FISHER};
use crate::sampler::{run_chain, ChainConfig, ChainOutput};
use crate::targets::{
    fisher_info_mc, generate_simdata, load_dataset, simdata_feature_variance, LogisticPosterior, Target,
    DEFAULT_PRIOR_VARIANCE,
};

/// Environment variable naming the directory searched for named datasets.
pub const DATA_DIR_ENV: &str = "SPLIT_HMC_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainFormat {
    #[default]
    Csv,
    Binary,
}

/// One experiment. Every key is optional in the TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `simdata`, a dataset name looked up in `data_dir`, or a file path.
    pub dataset: String,
    pub data_dir: Option<PathBuf>,
    pub n: usize,
    pub d_minus_1: usize,
    pub gamma2: f64,
    pub prior_variance: f64,
    pub method: IntegratorKind,
    pub eps_bar: Option<f64>,
    pub steps: Option<usize>,
    pub principled: bool,
    /// Overrides the duration `T` used by the principled protocol.
    pub duration: Option<f64>,
    pub target_acceptance: f64,
    pub pilot_samples: usize,
    pub n_samples: usize,
    pub discard: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub omit_wall_time: bool,
    pub chain_format: ChainFormat,
    pub acf_max_lag: usize,
    pub cache_dir: Option<PathBuf>,
    pub bvm: BvmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: "simdata".into(),
            data_dir: None,
            n: 10_000,
            d_minus_1: 100,
            gamma2: 1.0,
            prior_variance: DEFAULT_PRIOR_VARIANCE,
            method: IntegratorKind::PrecondRkr,
            eps_bar: None,
            steps: None,
            principled: true,
            duration: None,
            target_acceptance: 0.65,
            pilot_samples: 2000,
            n_samples: 50_000,
            discard: 0,
            seed: 0,
            out: PathBuf::from("out"),
            omit_wall_time: false,
            chain_format: ChainFormat::Csv,
            acf_max_lag: 1000,
            cache_dir: None,
            bvm: BvmConfig::default(),
        }
    }
}

/// Settings of the `n`-sweep experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvmConfig {
    pub n_list: Vec<usize>,
    pub n_samples: usize,
    pub fisher_mc: usize,
    pub methods: Vec<IntegratorKind>,
}

impl Default for BvmConfig {
    fn default() -> Self {
        Self {
            n_list: (7..=14).map(|k| 1usize << k).collect(),
            n_samples: 2000,
            fisher_mc: 200_000,
            methods: IntegratorKind::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    /// Explicit `(ε̄, L)` XOR principled.
    pub fn validate(&self) -> Result<()> {
        let explicit = self.eps_bar.is_some() || self.steps.is_some();
        if self.principled && explicit {
            return Err(Error::InvalidArgument(
                "give either an explicit (eps_bar, steps) pair or the principled protocol, not both".into(),
            ));
        }
        if !self.principled && (self.eps_bar.is_none() || self.steps.is_none()) {
            return Err(Error::InvalidArgument("explicit protocol needs both eps_bar and steps".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.target_acceptance) {
            return Err(Error::InvalidArgument("target_acceptance must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_simdata(&self) -> bool {
        self.dataset.eq_ignore_ascii_case("simdata")
    }

    /// Builds the posterior for the configured dataset.
    pub fn build_target(&self) -> Result<LogisticPosterior> {
        self.build_target_with_n(self.n)
    }

    fn build_target_with_n(&self, n: usize) -> Result<LogisticPosterior> {
        let data = if self.is_simdata() {
            let mut s = RngStream::new(self.seed, STREAM_DATA);
            generate_simdata(&mut s, n, self.d_minus_1, self.gamma2)?.dataset
        } else {
            load_dataset(&self.resolve_dataset_path()?)?
        };
        LogisticPosterior::new(data, self.prior_variance)
    }

    /// A path as given, or `<dir>/<name>.json` / `<dir>/<name>.csv` from
    /// `data_dir` or `$SPLIT_HMC_DATA_DIR`.
    pub fn resolve_dataset_path(&self) -> Result<PathBuf> {
        let direct = PathBuf::from(&self.dataset);
        if direct.is_file() {
            return Ok(direct);
        }
        let dir = self
            .data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
        if let Some(dir) = dir {
            for ext in ["json", "csv"] {
                let p = dir.join(format!("{}.{ext}", self.dataset));
                if p.is_file() {
                    return Ok(p);
                }
            }
        }
        Err(Error::InvalidArgument(format!(
            "dataset '{}' is neither a file nor a known name (set data_dir or ${DATA_DIR_ENV})",
            self.dataset
        )))
    }
}

/// Duration `T` of the principled protocol: a quarter of the longest
/// reference period.
pub fn principled_duration(kind: IntegratorKind, reference: &QuadraticReference) -> f64 {
    if kind.is_preconditioned() {
        FRAC_PI_2
    } else {
        FRAC_PI_2 / reference.omega_min()
    }
}

/// Divisors `k` of the sweep `ε̄ = T/k`: 1, 2, 3, 4, 6, 8, 12, …
pub fn sweep_divisors(max: usize) -> Vec<usize> {
    let mut v = vec![1];
    let mut p = 2;
    while p <= max {
        v.push(p);
        if p + p / 2 <= max && p >= 2 {
            v.push(p + p / 2);
        }
        p *= 2;
    }
    v.sort_unstable();
    v.dedup();
    v
}

const MAX_DIVISOR: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PilotRun {
    pub eps_bar: f64,
    pub steps: usize,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedProtocol {
    pub eps_bar: f64,
    pub steps: usize,
    pub duration: f64,
    pub pilots: Vec<PilotRun>,
}

/// `L = ⌈T/ε̄⌉`, immune to `T/(T/k)` rounding up past `k`.
fn steps_for(duration: f64, eps_bar: f64) -> usize {
    ((duration / eps_bar) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Explicit `(ε̄, L)` verbatim, or the largest `ε̄ = T/k` whose pilot chain
/// reaches the target acceptance.
pub fn resolve_protocol<T: Target + ?Sized>(cfg: &ExperimentConfig, dynamics: &Dynamics<'_, T>) -> Result<ResolvedProtocol> {
    cfg.validate()?;
    if !cfg.principled {
        let (e, l) = (cfg.eps_bar.unwrap(), cfg.steps.unwrap());
        IntegratorSpec::new(cfg.method, e, l)?;
        return Ok(ResolvedProtocol {
            eps_bar: e,
            steps: l,
            duration: e * l as f64,
            pilots: Vec::new(),
        });
    }
    let reference = dynamics.require_reference(IntegratorKind::PrecondRkr)?;
    let duration = cfg.duration.unwrap_or_else(|| principled_duration(cfg.method, reference));
    let mut pilots = Vec::new();
    for (idx, k) in sweep_divisors(MAX_DIVISOR).into_iter().enumerate() {
        let eps_bar = duration / k as f64;
        let steps = steps_for(duration, eps_bar);
        let mut pc = ChainConfig::new(IntegratorSpec::new(cfg.method, eps_bar, steps)?, cfg.pilot_samples, cfg.seed);
        pc.stream_offset = PILOT_STREAM_STRIDE * (idx as u64 + 1);
        let acceptance = run_chain(dynamics, &pc)?.acceptance_rate();
        pilots.push(PilotRun {
            eps_bar,
            steps,
            acceptance,
        });
        if acceptance >= cfg.target_acceptance {
            return Ok(ResolvedProtocol {
                eps_bar,
                steps,
                duration,
                pilots,
            });
        }
    }
    let sweep = pilots
        .iter()
        .map(|p| format!("{:.4e}:{:.3}", p.eps_bar, p.acceptance))
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::ProtocolSearch {
        target: cfg.target_acceptance,
        sweep,
    })
}

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: RunReport,
    pub protocol: ResolvedProtocol,
    pub chain: ChainOutput,
    pub omega_min: f64,
    pub omega_max: f64,
}

/// Builds target and reference, resolves the protocol, runs the chain and
/// writes `report.json`, `table_row.txt`, the chain file, `pilots.csv` and
/// one `acf_<observable>.csv` per observable into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let target = cfg.build_target()?;
    let reference = build_reference_cached(&target, cfg.cache_dir.as_deref())?;
    let dynamics = Dynamics::new(&target, Some(&reference))?;
    let protocol = resolve_protocol(cfg, &dynamics)?;

    let mut cc = ChainConfig::new(
        IntegratorSpec::new(cfg.method, protocol.eps_bar, protocol.steps)?,
        cfg.n_samples,
        cfg.seed,
    );
    cc.discard = cfg.discard;
    let chain = run_chain(&dynamics, &cc)?;
    let info = RunInfo {
        dataset: cfg.dataset.clone(),
        n: target.dataset().n(),
        seed: cfg.seed,
        omega_min: Some(reference.omega_min()),
        omega_max: Some(reference.omega_max()),
        include_wall_time: !cfg.omit_wall_time,
    };
    let rep = report(&chain, &target, &info)?;
    write_artifacts(&cfg.out, cfg, &rep, &protocol, &chain, &target)?;
    Ok(ExperimentOutcome {
        report: rep,
        protocol,
        chain,
        omega_min: reference.omega_min(),
        omega_max: reference.omega_max(),
    })
}

fn write_artifacts(
    out: &Path,
    cfg: &ExperimentConfig,
    rep: &RunReport,
    protocol: &ResolvedProtocol,
    chain: &ChainOutput,
    target: &LogisticPosterior,
) -> Result<()> {
    fs::create_dir_all(out)?;
    rep.write_json(&out.join("report.json"))?;
    fs::write(
        out.join("table_row.txt"),
        format!("{}\n{}\n", RunReport::table_header(), rep.table_row()),
    )?;
    match cfg.chain_format {
        ChainFormat::Csv => chain.write_csv(&out.join("chain.csv"))?,
        ChainFormat::Binary => chain.write_binary(&out.join("chain.bin"))?,
    }
    let mut pil = String::from("eps_bar,steps,acceptance\n");
    for p in &protocol.pilots {
        let _ = writeln!(pil, "{},{},{}", p.eps_bar, p.steps, p.acceptance);
    }
    fs::write(out.join("pilots.csv"), pil)?;
    for obs in default_observables(target) {
        let series = observable_series(chain, target, obs)?;
        if let Ok(acf) = autocorrelation(&series) {
            write_acf_csv(&out.join(format!("acf_{}.csv", obs.name())), &acf, cfg.acf_max_lag)?;
        }
    }
    Ok(())
}

/// Fixed `L` per method for the `n`-sweep.
pub fn bvm_steps(kind: IntegratorKind) -> usize {
    match kind {
        IntegratorKind::PrecondKrk | IntegratorKind::PrecondRkr => 2,
        IntegratorKind::PrecondVerlet => 3,
        IntegratorKind::Kdk | IntegratorKind::UncondKrk => 30,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvmMethodResult {
    pub method: IntegratorKind,
    pub steps: usize,
    pub eps_bar: f64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvmPoint {
    pub n: usize,
    /// `ωⱼ/√n`, ascending.
    pub scaled_omega: Vec<f64>,
    /// `√λⱼ` of the Fisher-information estimate, ascending.
    pub sqrt_fisher: Vec<f64>,
    /// `maxⱼ |ωⱼ/√n − √λⱼ|`.
    pub max_abs_deviation: f64,
    /// `maxⱼ |ωⱼ/√n − √λⱼ| / √λⱼ`.
    pub max_rel_deviation: f64,
    pub methods: Vec<BvmMethodResult>,
}

/// For every `n`, compares the scaled reference frequencies with the Fisher
/// spectrum and records each method's acceptance at fixed `L`. Writes
/// `spectra.csv`, `acceptance.csv` and `bvm.json` into `cfg.out`.
pub fn run_bvm_experiment(cfg: &ExperimentConfig) -> Result<Vec<BvmPoint>> {
    if !cfg.is_simdata() {
        return Err(Error::InvalidArgument("the n-sweep runs on simulated data only".into()));
    }
    let b = &cfg.bvm;
    if b.n_list.is_empty() || b.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be non-empty and strictly ascending".into()));
    }
    // θ̂ does not depend on n, so one Fisher estimate serves the whole sweep.
    let theta_hat = generate_simdata(&mut RngStream::new(cfg.seed, STREAM_DATA), 1, cfg.d_minus_1, cfg.gamma2)?.true_theta;
    let variances: Vec<f64> = (1..=cfg.d_minus_1).map(simdata_feature_variance).collect();
    let fisher = fisher_info_mc(&theta_hat, &mut RngStream::new(cfg.seed, STREAM_FISHER), b.fisher_mc, &variances)?;
    let sqrt_fisher: Vec<f64> = sym_eigen(&fisher)?.values().iter().map(|v| v.sqrt()).collect();

    let mut points = Vec::with_capacity(b.n_list.len());
    for &n in &b.n_list {
        let target = cfg.build_target_with_n(n)?;
        let reference = build_reference_cached(&target, cfg.cache_dir.as_deref())?;
        let rn = (n as f64).sqrt();
        let scaled_omega: Vec<f64> = reference.frequencies().iter().map(|w| w / rn).collect();
        let (mut abs_dev, mut rel_dev) = (0.0f64, 0.0f64);
        for (w, f) in scaled_omega.iter().zip(&sqrt_fisher) {
            abs_dev = abs_dev.max((w - f).abs());
            rel_dev = rel_dev.max((w - f).abs() / f);
        }
        let dynamics = Dynamics::new(&target, Some(&reference))?;
        let mut methods = Vec::with_capacity(b.methods.len());
        for &kind in &b.methods {
            let steps = bvm_steps(kind);
            let eps_bar = principled_duration(kind, &reference) / steps as f64;
            let cc = ChainConfig::new(IntegratorSpec::new(kind, eps_bar, steps)?, b.n_samples, cfg.seed);
            let acceptance = run_chain(&dynamics, &cc)?.acceptance_rate();
            methods.push(BvmMethodResult {
                method: kind,
                steps,
                eps_bar,
                acceptance,
            });
        }
        points.push(BvmPoint {
            n,
            scaled_omega,
            sqrt_fisher: sqrt_fisher.clone(),
            max_abs_deviation: abs_dev,
            max_rel_deviation: rel_dev,
            methods,
        });
    }
    write_bvm_artifacts(&cfg.out, &points)?;
    Ok(points)
}

fn write_bvm_artifacts(out: &Path, points: &[BvmPoint]) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut spectra = String::from("n,index,scaled_omega,sqrt_fisher\n");
    let mut acc = String::from("n,method,steps,eps_bar,acceptance\n");
    for p in points {
        for (j, (w, f)) in p.scaled_omega.iter().zip(&p.sqrt_fisher).enumerate() {
            let _ = writeln!(spectra, "{},{j},{w},{f}", p.n);
        }
        for m in &p.methods {
            let _ = writeln!(acc, "{},{},{},{},{}", p.n, m.method.cli_name(), m.steps, m.eps_bar, m.acceptance);
        }
    }
    fs::write(out.join("spectra.csv"), spectra)?;
    fs::write(out.join("acceptance.csv"), acc)?;
    fs::write(out.join("bvm.json"), serde_json::to_string_pretty(points)? + "\n")?;
    Ok(())
}
