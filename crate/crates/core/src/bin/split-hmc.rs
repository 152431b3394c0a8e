use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use split_hmc::experiment::{run_bvm_experiment, run_experiment, ChainFormat, ExperimentConfig};
use split_hmc::model::{rho_grid, stability_limit, write_rho_grid_csv, Scheme};
use split_hmc::IntegratorKind;

#[derive(Parser, Debug)]
#[command(name = "split-hmc", version, about = "HMC experiments with Gaussian-reference splitting integrators")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the ρ surface of KRK and RKR on the scalar model problem as CSV.
    RhoGrid(RhoGridArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `simdata`, a dataset name, or a CSV/JSON-manifest path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Rows of simulated data.
    #[arg(long)]
    n: Option<usize>,
    /// Features of simulated data (excluding the intercept).
    #[arg(long)]
    d_minus_1: Option<usize>,
    #[arg(long)]
    prior_variance: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, conflicts_with = "principled")]
    eps_bar: Option<f64>,
    #[arg(long, conflicts_with = "principled")]
    steps: Option<usize>,
    /// Choose (ε̄, L) by pilot chains at the target acceptance.
    #[arg(long)]
    principled: bool,
    #[arg(long)]
    pilot_samples: Option<usize>,
    #[arg(long)]
    discard: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    chain_format: Option<FormatArg>,
    /// Directory for cached MAP/Hessian results.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Leave wall-clock fields out of report.json (byte-identical replays).
    #[arg(long)]
    omit_wall_time: bool,
    /// Run the n-sweep (spectra and acceptance against n).
    #[arg(long)]
    bvm: bool,
    /// Comma-separated ascending n values for --bvm.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// Samples per method and n for --bvm.
    #[arg(long)]
    bvm_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct RhoGridArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = -0.9)]
    kappa_min: f64,
    #[arg(long, default_value_t = 10.0)]
    kappa_max: f64,
    #[arg(long, default_value_t = 100)]
    kappa_points: usize,
    #[arg(long, default_value_t = 3.1)]
    eps_max: f64,
    #[arg(long, default_value_t = 100)]
    eps_points: usize,
    /// Also write `<out>.limits.csv` with the stability limit per κ.
    #[arg(long)]
    limits: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Kdk,
    Ukrk,
    Pverlet,
    Pkrk,
    Prkr,
}

impl From<MethodArg> for IntegratorKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kdk => IntegratorKind::Kdk,
            MethodArg::Ukrk => IntegratorKind::UncondKrk,
            MethodArg::Pverlet => IntegratorKind::PrecondVerlet,
            MethodArg::Pkrk => IntegratorKind::PrecondKrk,
            MethodArg::Prkr => IntegratorKind::PrecondRkr,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Binary,
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::from_toml_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = &a.dataset {
        c.dataset = v.clone();
    }
    if let Some(v) = &a.data_dir {
        c.data_dir = Some(v.clone());
    }
    if let Some(v) = a.n {
        c.n = v;
    }
    if let Some(v) = a.d_minus_1 {
        c.d_minus_1 = v;
    }
    if let Some(v) = a.prior_variance {
        c.prior_variance = v;
    }
    if let Some(v) = a.method {
        c.method = v.into();
    }
    if let Some(v) = a.samples {
        c.n_samples = v;
    }
    if a.eps_bar.is_some() || a.steps.is_some() {
        c.principled = false;
        c.eps_bar = a.eps_bar.or(c.eps_bar);
        c.steps = a.steps.or(c.steps);
    }
    if a.principled {
        c.principled = true;
        c.eps_bar = None;
        c.steps = None;
    }
    if let Some(v) = a.pilot_samples {
        c.pilot_samples = v;
    }
    if let Some(v) = a.discard {
        c.discard = v;
    }
    if let Some(v) = &a.out {
        c.out = v.clone();
    }
    if let Some(v) = a.chain_format {
        c.chain_format = match v {
            FormatArg::Csv => ChainFormat::Csv,
            FormatArg::Binary => ChainFormat::Binary,
        };
    }
    if let Some(v) = &a.cache_dir {
        c.cache_dir = Some(v.clone());
    }
    if a.omit_wall_time {
        c.omit_wall_time = true;
    }
    if let Some(v) = &a.n_list {
        c.bvm.n_list = v.clone();
    }
    if let Some(v) = a.bvm_samples {
        c.bvm.n_samples = v;
    }
    Ok(c)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn rho_grid_cmd(a: &RhoGridArgs) -> Result<()> {
    let kappas: Vec<f64> = linspace(a.kappa_min, a.kappa_max, a.kappa_points)
        .into_iter()
        .filter(|k| *k != 0.0)
        .collect();
    let epss: Vec<f64> = (1..=a.eps_points).map(|i| a.eps_max * i as f64 / a.eps_points as f64).collect();
    let grid = rho_grid(&kappas, &epss)?;
    write_rho_grid_csv(&a.out, &grid)?;
    if a.limits {
        let mut s = String::from("kappa,limit_krk_rkr,limit_kdk\n");
        for k in &kappas {
            s.push_str(&format!(
                "{k},{},{}\n",
                stability_limit(&Scheme::Krk, *k)?,
                stability_limit(&Scheme::Kdk, *k)?
            ));
        }
        let mut p = a.out.clone().into_os_string();
        p.push(".limits.csv");
        std::fs::write(PathBuf::from(p), s)?;
    }
    eprintln!("wrote {} grid points to {}", grid.len(), a.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(Command::RhoGrid(a)) = &cli.command {
        return rho_grid_cmd(a);
    }
    let cfg = build_config(&cli.run)?;
    if cli.run.bvm {
        let points = run_bvm_experiment(&cfg)?;
        println!("{:>7} {:>10} {:>10}  acceptance by method", "n", "max|dev|", "max rel");
        for p in &points {
            let acc: Vec<String> = p
                .methods
                .iter()
                .map(|m| format!("{}={:.3}", m.method.cli_name(), m.acceptance))
                .collect();
            println!("{:>7} {:>10.4} {:>10.4}  {}", p.n, p.max_abs_deviation, p.max_rel_deviation, acc.join(" "));
        }
        return Ok(());
    }
    let outcome = run_experiment(&cfg)?;
    println!(
        "omega_min = {:.4}  omega_max = {:.4}  T = {:.4}",
        outcome.omega_min, outcome.omega_max, outcome.protocol.duration
    );
    println!("{}", split_hmc::diagnostics::RunReport::table_header());
    println!("{}", outcome.report.table_row());
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
