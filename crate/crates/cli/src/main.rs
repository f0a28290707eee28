use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covshift_cli::config::{parse_methods, parse_phi_modes, parse_seeds};
use covshift_cli::{cmd_estimate, cmd_inject, cmd_rank, cmd_run, cmd_toy, with_workers, CliError, CliResult, ExperimentConfig};
use covshift_core::toy::ToyConfig;
use covshift_core::{EstimatorSpec, Method, PhiMode};

#[derive(Parser)]
#[command(name = "covshift", version, about = "Covariate-shift importance estimation experiments")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = covshift_cli::WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build shifted train/test splits for every dataset and seed.
    Inject(ExperimentArgs),
    /// Evaluate every estimator × φ-mode on the injected splits (resumable).
    Run(ExperimentArgs),
    /// Friedman ranks of the φ-modes per method, from a report.
    Rank {
        #[arg(long)]
        report: PathBuf,
        /// Where ranks_<METHOD>.csv go (default: next to the report).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Synthetic toy: true vs estimated weights on φ(x) and φ(f(x)).
    Toy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "toy.csv")]
        out: PathBuf,
        #[arg(long)]
        shift: Option<f64>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long, default_value = "KLIEP")]
        method: Method,
        #[arg(long)]
        no_standardize: bool,
    },
    /// Importance weights for one train/test pair.
    Estimate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "KLIEP")]
        method: Method,
        #[arg(long, default_value = "C")]
        phi: PhiMode,
        /// Full estimator settings as JSON; --method/--phi override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "weights.csv")]
        out: PathBuf,
        #[arg(long)]
        no_standardize: bool,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra dataset CSVs (each with a sidecar manifest).
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Comma list or inclusive range, e.g. 2032..2036.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    variants: Option<usize>,
    /// Comma list of LR, KMM, EKMM, KDE, KLIEP.
    #[arg(long)]
    methods: Option<String>,
    /// Comma list of C, P, CP.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Feed raw covariates to the estimators.
    #[arg(long)]
    no_standardize: bool,
}

impl ExperimentArgs {
    fn resolve(self, workers: Option<usize>) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for path in self.datasets {
            cfg.datasets.push(covshift_cli::config::DatasetEntry { path: Some(path), ..Default::default() });
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(v) = self.variants {
            cfg.variants = v;
        }
        if let Some(s) = &self.methods {
            // Keep configured settings for methods that stay selected.
            let old = std::mem::take(&mut cfg.estimators);
            cfg.estimators = parse_methods(s)?
                .into_iter()
                .map(|m| old.iter().find(|e| e.method == m).cloned().unwrap_or_else(|| EstimatorSpec::new(m)))
                .collect();
        }
        if let Some(s) = &self.phi {
            cfg.phi_modes = parse_phi_modes(s)?;
        }
        if let Some(o) = self.out {
            cfg.out_dir = o;
        }
        if let Some(r) = self.report {
            cfg.report = Some(r);
        }
        if let Some(f) = self.folds {
            cfg.folds = f;
        }
        if let Some(t) = self.test_fraction {
            cfg.test_fraction = t;
        }
        if self.no_standardize {
            cfg.estimators.iter_mut().for_each(|e| e.standardize = false);
        }
        if workers.is_some() {
            cfg.workers = workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Inject(args) => {
            let cfg = args.resolve(workers)?;
            let s = with_workers(cfg.workers, || cmd_inject(&cfg))??;
            println!("wrote {} train and {} test files under {}", s.train_files, s.test_files, cfg.out_dir.display());
        }
        Command::Run(args) => {
            let cfg = args.resolve(workers)?;
            let s = with_workers(cfg.workers, || cmd_run(&cfg))??;
            println!(
                "{} cells computed ({} failed), {} already in {}",
                s.computed,
                s.failed,
                s.skipped,
                cfg.report_path().display()
            );
        }
        Command::Rank { report, out, alpha } => {
            let out = out.unwrap_or_else(|| report.parent().unwrap_or(Path::new(".")).to_path_buf());
            let (written, text) = cmd_rank(&report, &out, alpha)?;
            print!("{text}");
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Command::Toy { seed, out, shift, n_train, n_test, method, no_standardize } => {
            let mut cfg = ToyConfig::default();
            if let Some(s) = shift {
                cfg.shift = s;
            }
            if let Some(n) = n_train {
                cfg.n_train = n;
            }
            if let Some(n) = n_test {
                cfg.n_test = n;
            }
            let mut spec = EstimatorSpec::new(method);
            spec.standardize = !no_standardize;
            let r = with_workers(workers, || cmd_toy(&cfg, &spec, seed, &out))??;
            println!("MSLE phi(x)    {:.6}", r.msle_phi_x);
            println!("MSLE phi(f(x)) {:.6}", r.msle_phi_fx);
            println!("wrote {}", out.display());
        }
        Command::Estimate { train, test, method, phi, spec, seed, out, no_standardize } => {
            let mut s = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
                    EstimatorSpec::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
                }
                None => EstimatorSpec::new(method),
            };
            s.method = method;
            s.phi_mode = phi;
            if no_standardize {
                s.standardize = false;
            }
            s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let w = with_workers(workers, || cmd_estimate(&train, &test, &s, seed, &out))??;
            println!("{} weights (mean {:.4}) written to {}", w.len(), w.mean(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
