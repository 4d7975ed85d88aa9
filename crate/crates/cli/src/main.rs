//! fraclab: dimension reports, path sampling, family rebalancing,
//! percolation simulation, and the named ensemble experiments, driven
//! by TOML configs and emitting deterministic CSV artifacts.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fraclab_core::digit_sets::{DensityProfile, DigitSetSpec};
use fraclab_core::estimators::{minkowski_slopes, window_assouad, CoverHierarchy, DimEstimate, DimensionReport};
use fraclab_core::experiments::{self, ExperimentConfig};
use fraclab_core::fbm::sample_path;
use fraclab_core::percolation;
use fraclab_core::IntervalFamily;

use config::{ConfigFile, SetSpec};

#[derive(Parser)]
#[command(
    name = "fraclab",
    about = "Fractal dimension toolkit: exact and estimated dimensions, \
             fractional Brownian paths, balanced interval families, and \
             fractal percolation",
    long_about = None,
    version
)]
struct Cli {
    /// Worker threads for ensemble runs (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config path
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact dimension report for a configured set
    ///
    /// CSV schema (report.csv): dimension,value,method,uncertainty
    DimExact(ConfigArgs),
    /// Estimated dimensions from cover hierarchies
    ///
    /// CSV schema (report.csv): dimension,value,method,uncertainty;
    /// profile.csv: n,density,maxwin_eps_*
    DimEstimate(ConfigArgs),
    /// Sample a fractional Brownian path to CSV and binary
    ///
    /// CSV schema (path.csv): k,t,B
    SampleFbm {
        /// Hurst index in (0,1)
        #[arg(long)]
        alpha: f64,
        /// Dyadic grid order (<= 22)
        #[arg(long)]
        order: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebalance an interval family ("n p" lines) under an exponent
    Balance {
        /// Input family file, one "order index" pair per line
        #[arg(long)]
        input: PathBuf,
        /// Window-count exponent
        #[arg(long)]
        beta: f64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate fractal percolation
    ///
    /// Artifacts: tree.hex (per-level bitmaps), counts.csv (n,z),
    /// window.csv (n,max_q,count,threshold,pass)
    Percolation {
        /// Keep probability exponent, p = 2^-gamma
        #[arg(long)]
        gamma: f64,
        /// Tree depth (<= 24)
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        seed: u64,
        /// Window-event epsilon
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named ensemble experiment; exit 0 iff all assertions pass
    ///
    /// CSV schema depends on the experiment and is echoed as the header
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon_pool(workers) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn rayon_pool(workers: usize) -> Result<(), String> {
    fraclab_core::rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| e.to_string())
}

fn dispatch(cmd: Command) -> Result<bool, String> {
    match cmd {
        Command::DimExact(args) => dim_exact(&args),
        Command::DimEstimate(args) => dim_estimate(&args),
        Command::SampleFbm {
            alpha,
            order,
            seed,
            out,
        } => sample_fbm(alpha, order, seed, &out),
        Command::Balance { input, beta, out } => balance(&input, beta, out.as_deref()),
        Command::Percolation {
            gamma,
            depth,
            seed,
            eps,
            out,
        } => run_percolation(gamma, depth, seed, eps, out.as_deref()),
        Command::Experiment { config, seed, out } => experiment(&config, seed, out.as_deref()),
    }
}

fn write_artifact(dir: Option<&Path>, name: &str, content: &str) -> Result<(), String> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(())
}

fn dim_exact(args: &ConfigArgs) -> Result<bool, String> {
    let cfg = ConfigFile::load(&args.config)?;
    let report = match cfg.set()? {
        SetSpec::Digit(spec) => spec.exact_dims(),
        SetSpec::Ifs(ifs) => {
            // self-similar sets have equal Hausdorff/packing dimension;
            // the box estimators refine the Assouad-type entries
            let d = ifs.capped_dimension();
            DimensionReport::exact(d, d, d, d).map_err(|e| e.to_string())?
        }
    };
    println!("{}", report.to_json());
    write_artifact(
        args.out.as_deref(),
        "report.csv",
        &format!("{}\n{}", DimensionReport::CSV_HEADER, report.to_csv_rows()),
    )?;
    Ok(true)
}

fn dim_estimate(args: &ConfigArgs) -> Result<bool, String> {
    let cfg = ConfigFile::load(&args.config)?;
    let est = cfg.estimate_params();
    let covers: Vec<IntervalFamily> = match cfg.set()? {
        SetSpec::Digit(spec) => (est.n_lo..=est.n_hi)
            .map(|n| spec.cover(n, false).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        SetSpec::Ifs(ifs) => (est.n_lo..=est.n_hi)
            .map(|n| ifs.attractor_cover(n).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
    };
    let h = CoverHierarchy::new(est.n_lo, covers, true).map_err(|e| e.to_string())?;
    let mink = minkowski_slopes(&h, (est.n_lo, est.n_hi)).map_err(|e| e.to_string())?;
    let wa = window_assouad(&h, est.eps, est.min_len).map_err(|e| e.to_string())?;
    let box_est = DimEstimate::estimated(mink.slope, mink.uncertainty.max(0.02));
    // windowed estimate carries the spread to the box slope as its
    // uncertainty proxy
    let wa_est = DimEstimate::estimated(wa, (wa - mink.slope).abs().max(0.05));
    let report = DimensionReport::build(
        DimEstimate::estimated(mink.lower, mink.uncertainty.max(0.02) + (mink.slope - mink.lower).abs()),
        box_est,
        wa_est,
        wa_est,
    )
    .map_err(|e| e.to_string())?;
    println!("{}", report.to_json());
    write_artifact(
        args.out.as_deref(),
        "report.csv",
        &format!("{}\n{}", DimensionReport::CSV_HEADER, report.to_csv_rows()),
    )?;
    if let SetSpec::Digit(spec) = cfg.set()? {
        let profile = DensityProfile::compute(&spec, 10_000, &[0.5, 0.25, 0.125])
            .map_err(|e| e.to_string())?;
        write_artifact(args.out.as_deref(), "profile.csv", &profile.to_csv())?;
    }
    Ok(true)
}

fn sample_fbm(alpha: f64, order: u32, seed: u64, out: &Path) -> Result<bool, String> {
    let path = sample_path(alpha, order, seed).map_err(|e| e.to_string())?;
    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    fs::write(out.join("path.csv"), path.to_csv()).map_err(|e| e.to_string())?;
    fs::write(out.join("path.bin"), path.to_binary()).map_err(|e| e.to_string())?;
    println!(
        "wrote {} values (alpha {alpha}, order {order}, seed {seed}), holder stat {:.4}",
        path.values().len(),
        path.holder_stat()
    );
    Ok(true)
}

fn balance(input: &Path, beta: f64, out: Option<&Path>) -> Result<bool, String> {
    let text = fs::read_to_string(input).map_err(|e| e.to_string())?;
    let family = IntervalFamily::from_text(&text).map_err(|e| e.to_string())?;
    let balanced = family.balance(beta);
    let rendered = balanced.to_text();
    match out {
        Some(p) => fs::write(p, &rendered).map_err(|e| e.to_string())?,
        None => print!("{rendered}"),
    }
    eprintln!(
        "balanced {} -> {} intervals, content {:.6} -> {:.6}",
        family.len(),
        balanced.len(),
        family.content(beta),
        balanced.content(beta)
    );
    Ok(true)
}

fn run_percolation(
    gamma: f64,
    depth: u32,
    seed: u64,
    eps: f64,
    out: Option<&Path>,
) -> Result<bool, String> {
    let sample = percolation::simulate(gamma, depth, seed).map_err(|e| e.to_string())?;
    let counts = sample.survivor_counts();
    let mut counts_csv = String::from("n,z\n");
    for (i, z) in counts.iter().enumerate() {
        counts_csv.push_str(&format!("{},{z}\n", i + 1));
    }
    let report = sample.window_event(eps);
    write_artifact(out, "tree.hex", &sample.to_hex())?;
    write_artifact(out, "counts.csv", &counts_csv)?;
    write_artifact(out, "window.csv", &report.to_csv())?;
    println!(
        "gamma {gamma} depth {depth} seed {seed}: survives {}, Z_depth {}, window event {}",
        sample.survives(),
        counts.last().copied().unwrap_or(0),
        if report.pass { "pass" } else { "fail" }
    );
    Ok(true)
}

fn experiment(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<bool, String> {
    let cfg = ConfigFile::load(config)?;
    let exp = cfg.experiment()?;
    let mut params = ExperimentConfig::defaults_for(&exp.name);
    if let Some(a) = exp.alpha {
        params.alpha = a;
    }
    if let Some(o) = exp.order {
        params.order = o;
    }
    if let Some(e) = exp.ensemble {
        params.ensemble = e;
    }
    if let Some(g) = exp.gamma {
        params.gamma = g;
    }
    if let Some(e) = exp.eps {
        params.eps = e;
    }
    params.master_seed = seed.or(exp.master_seed).ok_or("a master seed is required \
        (config master_seed or --seed); there is no wall-clock default")?;
    let outcome = experiments::run(&exp.name, &params).map_err(|e| e.to_string())?;
    print!("{}", outcome.summary());
    write_artifact(out, &format!("{}.csv", outcome.name), &outcome.to_csv())?;
    write_artifact(out, "summary.txt", &outcome.summary())?;
    Ok(outcome.pass)
}
