//! Command-line entry point: prior profiling, proposition validation, IGMM
//! fitting, partition scoring, and dataset generation.
//!
//! Every command is deterministic given its full flag set (seed included).
//! Exit codes: 0 success, 1 tolerance/numerical failure, 2 usage error.
//! A JSON config file (`--config`) mirrors the flags; explicit flags win.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datasets::{self, LabeledDataset};
use crate::error::{Error, Result};
use crate::igmm::{self, NiwParams, StoppingRule};
use crate::metrics;
use crate::partition::Partition;
use crate::process::{self, ProcessSpec};
use crate::propositions::{self, PropRow, ValidationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "pcrp",
    about = "Seating-process simulation, powered Dirichlet machinery, and IGMM clustering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print predictive probabilities over a fixed population vector for a
    /// list of powers.
    PriorProfile(PriorProfileArgs),
    /// Run the Monte-Carlo validation protocol and emit per-proposition CSVs.
    Validate(ValidateArgs),
    /// Fit the infinite Gaussian mixture model to a point CSV.
    Fit(FitArgs),
    /// Compare two partition CSVs with every agreement metric.
    Score(ScoreArgs),
    /// Generate a synthetic dataset CSV.
    Gen(GenArgs),
}

/// Flag values mirrored by the JSON config file. Flags override the file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    process: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
    r: Option<f64>,
    n: Option<u64>,
    runs: Option<usize>,
    seed: Option<u64>,
    data: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    mu0: Option<Vec<f64>>,
    kappa0: Option<f64>,
    psi_scale: Option<f64>,
    nu0: Option<f64>,
    max_sweeps: Option<usize>,
    stability_tol: Option<f64>,
    r_list: Option<Vec<f64>>,
    populations: Option<Vec<u64>>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Input(format!("bad config file: {e}")))
            }
        }
    }
}

#[derive(Args, Debug)]
struct PriorProfileArgs {
    /// Table populations, e.g. --populations 1,2,5,9
    #[arg(long, value_delimiter = ',')]
    populations: Option<Vec<u64>>,
    /// Powers to profile.
    #[arg(long, value_delimiter = ',')]
    r_list: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Write prior_profile.csv here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Powers to validate.
    #[arg(long, value_delimiter = ',')]
    r_list: Option<Vec<f64>>,
    /// Customers per run.
    #[arg(long)]
    n: Option<u64>,
    /// Independent runs per power.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input point CSV (`id,x0,..[,label]`).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Seating prior: crp | py | uniform | powered.
    #[arg(long)]
    process: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Pitman-Yor discount.
    #[arg(long)]
    beta: Option<f64>,
    /// Power of the powered rule.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent chains.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Prior mean override, e.g. --mu0 0.0,0.0
    #[arg(long, value_delimiter = ',')]
    mu0: Option<Vec<f64>>,
    #[arg(long)]
    kappa0: Option<f64>,
    /// Multiplier on the data-variance diagonal used for Psi.
    #[arg(long)]
    psi_scale: Option<f64>,
    #[arg(long)]
    nu0: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    stability_tol: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// First partition CSV (`point_id,label`).
    #[arg(long)]
    a: PathBuf,
    /// Second (reference) partition CSV.
    #[arg(long)]
    b: PathBuf,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// multiscale | two-scale | grid
    #[arg(long)]
    generator: String,
    /// Tight clusters inside the dense region (multiscale).
    #[arg(long, default_value_t = 3)]
    dense: usize,
    /// Broad clusters around the dense region (multiscale).
    #[arg(long, default_value_t = 2)]
    sparse: usize,
    /// Tight clusters (two-scale).
    #[arg(long, default_value_t = 2)]
    tight: usize,
    /// Broad clusters (two-scale).
    #[arg(long, default_value_t = 2)]
    broad: usize,
    /// Clusters per side (grid).
    #[arg(long, default_value_t = 3)]
    side: usize,
    #[arg(long, default_value_t = 50)]
    points_per_cluster: usize,
    /// Broad-to-tight sigma ratio (multiscale, two-scale).
    #[arg(long, default_value_t = 10.0)]
    scale_ratio: f64,
    /// Center spacing in sigmas (grid).
    #[arg(long, default_value_t = 8.0)]
    spacing: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Parses argv, dispatches, and maps errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::PriorProfile(args) => cmd_prior_profile(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Score(args) => cmd_score(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => EXIT_TOLERANCE,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn build_spec(
    process: Option<&str>,
    alpha: Option<f64>,
    beta: Option<f64>,
    r: Option<f64>,
) -> Result<ProcessSpec> {
    let alpha = alpha.unwrap_or(1.0);
    match process.unwrap_or("powered") {
        "crp" => ProcessSpec::crp(alpha),
        "py" | "pitman-yor" => ProcessSpec::pitman_yor(alpha, beta.unwrap_or(0.0)),
        "uniform" => ProcessSpec::uniform(alpha),
        "powered" => ProcessSpec::powered(alpha, r.unwrap_or(1.0)),
        other => Err(Error::Input(format!(
            "unknown process '{other}' (expected crp|py|uniform|powered)"
        ))),
    }
}

fn cmd_prior_profile(args: PriorProfileArgs) -> Result<i32> {
    let file = FileConfig::load(args.config.as_deref())?;
    let populations = args
        .populations
        .or(file.populations)
        .ok_or_else(|| Error::Input("--populations is required".into()))?;
    let r_list = args
        .r_list
        .or(file.r_list)
        .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]);
    let alpha = args.alpha.or(file.alpha).unwrap_or(1.0);

    let mut table = String::from("r,cluster,population,probability\n");
    for &r in &r_list {
        let spec = ProcessSpec::powered(alpha, r)?;
        let probs = process::predictive_probs_from_populations(&populations, &spec)?;
        for (k, &p) in probs.iter().enumerate() {
            if k < populations.len() {
                table.push_str(&format!("{r},{k},{},{p}\n", populations[k]));
            } else {
                table.push_str(&format!("{r},new,0,{p}\n"));
            }
        }
    }
    match args.out_dir.or(file.out_dir) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("prior_profile.csv"), table)?;
        }
        None => print!("{table}"),
    }
    Ok(EXIT_OK)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_prop_csv(path: &Path, rows: &[&PropRow]) -> Result<()> {
    let mut out = String::from("r,N,mean_K,se_K,mean_sum_nkr,mean_gap,theory_value\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.r,
            row.n,
            fmt_opt(row.mean_k),
            fmt_opt(row.se_k),
            fmt_opt(row.mean_sum_nkr),
            fmt_opt(row.mean_gap),
            fmt_opt(row.theory_value),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = ValidationConfig::default();
    let cfg = ValidationConfig {
        r_list: args.r_list.or(file.r_list).unwrap_or(defaults.r_list),
        alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        n: args.n.or(file.n).unwrap_or(defaults.n),
        n_runs: args.runs.or(file.runs).unwrap_or(defaults.n_runs),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    if cfg.r_list.is_empty() {
        return Err(Error::Input("r list must be non-empty".into()));
    }
    let out_dir = args
        .out_dir
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("pcrp-out"));

    let report = propositions::run_validation(&cfg)?;

    std::fs::create_dir_all(&out_dir)?;
    for prop in 1..=3u8 {
        let rows: Vec<&PropRow> = report.rows_for(prop).collect();
        write_prop_csv(&out_dir.join(format!("prop{prop}.csv")), &rows)?;
    }

    let mut failures = 0usize;
    for check in &report.checks {
        let verdict = match check.passed {
            Some(true) => "PASS",
            Some(false) => {
                failures += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!(
            "[{verdict}] {} (observed {:.6}; requirement: {})",
            check.name, check.observed, check.requirement
        );
    }
    println!(
        "validate: {} checks, {} failed; CSVs in {}",
        report.checks.len(),
        failures,
        out_dir.display()
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_TOLERANCE })
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    adjusted_rand_index: f64,
    adjusted_mutual_info: f64,
    normalized_variation_of_information: f64,
    fowlkes_mallows: f64,
    cluster_count_deviation: f64,
    inferred_k: usize,
    reference_k: usize,
}

impl MetricsReport {
    fn compute(inferred: &Partition, reference: &Partition) -> Result<Self> {
        Ok(Self {
            adjusted_rand_index: metrics::adjusted_rand_index(inferred, reference)?,
            adjusted_mutual_info: metrics::adjusted_mutual_info(inferred, reference)?,
            normalized_variation_of_information: metrics::normalized_variation_of_information(
                inferred, reference,
            )?,
            fowlkes_mallows: metrics::fowlkes_mallows(inferred, reference)?,
            cluster_count_deviation: metrics::cluster_count_deviation(
                inferred.n_clusters(),
                reference.n_clusters(),
            ),
            inferred_k: inferred.n_clusters(),
            reference_k: reference.n_clusters(),
        })
    }
}

fn write_partition_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::from("point_id,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_partition_csv(path: &Path) -> Result<Partition> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "point_id,label" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header 'point_id,label', found '{header}'"),
            })
        }
        None => return Err(Error::Input("empty partition file".into())),
    }
    let mut raw = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (id, label) = (fields.next(), fields.next());
        match (id, label) {
            (Some(_), Some(l)) => {
                let l: i64 = l.trim().parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("cannot parse label '{l}'"),
                })?;
                raw.push(l);
            }
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected 'point_id,label'".into(),
                })
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::Input("partition file has no rows".into()));
    }
    Ok(Partition::from_raw_labels(&raw))
}

fn build_prior(
    points: &[DVector<f64>],
    mu0: Option<Vec<f64>>,
    kappa0: Option<f64>,
    psi_scale: Option<f64>,
    nu0: Option<f64>,
) -> Result<NiwParams> {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += p;
    }
    mean /= n;
    let mut var = DVector::from_element(d, 0.0);
    for p in points {
        for i in 0..d {
            var[i] += (p[i] - mean[i]).powi(2);
        }
    }
    var /= (points.len().max(2) - 1) as f64;

    let mu0 = match mu0 {
        Some(m) => {
            if m.len() != d {
                return Err(Error::Input(format!(
                    "--mu0 has {} entries for {d}-dimensional data",
                    m.len()
                )));
            }
            DVector::from_vec(m)
        }
        None => mean,
    };
    let scale = psi_scale.unwrap_or(1.0);
    if !(scale > 0.0) {
        return Err(Error::Parameter("psi scale must be positive".into()));
    }
    let psi = DMatrix::from_diagonal(&var.map(|v| (v * scale).max(1e-6)));
    NiwParams::new(mu0, kappa0.unwrap_or(0.01), psi, nu0.unwrap_or(d as f64 + 2.0))
}

fn cmd_fit(args: FitArgs) -> Result<i32> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data_path = args
        .data
        .or(file.data)
        .ok_or_else(|| Error::Input("--data is required".into()))?;
    let spec = build_spec(
        args.process.as_deref().or(file.process.as_deref()),
        args.alpha.or(file.alpha),
        args.beta.or(file.beta),
        args.r.or(file.r),
    )?;
    let stop = StoppingRule {
        window: 20,
        rel_tol: args.stability_tol.or(file.stability_tol).unwrap_or(1e-4),
        max_sweeps: args.max_sweeps.or(file.max_sweeps).unwrap_or(1000),
    };
    let chains = args.runs.or(file.runs).unwrap_or(1).max(1);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out_dir = args
        .out_dir
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("pcrp-out"));

    let has_labels = datasets::csv_has_label_column(&data_path)?;
    let dataset = datasets::load_csv(&data_path, has_labels)?;
    let points = igmm::vectors_from_rows(&dataset.points);
    let prior = build_prior(
        &points,
        args.mu0.or(file.mu0),
        args.kappa0.or(file.kappa0),
        args.psi_scale.or(file.psi_scale),
        args.nu0.or(file.nu0),
    )?;
    let truth = dataset
        .labels
        .as_ref()
        .map(|l| Partition::new(l.clone()))
        .transpose()?;

    let results = igmm::fit_many(&points, &prior, &spec, &stop, chains, seed)?;

    std::fs::create_dir_all(&out_dir)?;
    for (c, result) in results.iter().enumerate() {
        write_partition_csv(
            &out_dir.join(format!("partition_{c:03}.csv")),
            result.partition.labels(),
        )?;
        let mut trace = String::from("iteration,log_likelihood,K\n");
        for t in &result.trace {
            trace.push_str(&format!(
                "{},{},{}\n",
                t.iteration, t.log_likelihood, t.n_clusters
            ));
        }
        std::fs::write(out_dir.join(format!("trace_{c:03}.csv")), trace)?;
        if let Some(truth) = &truth {
            let report = MetricsReport::compute(&result.partition, truth)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Input(e.to_string()))?;
            std::fs::write(out_dir.join(format!("metrics_{c:03}.json")), json)?;
        }
        let status = if result.converged { "converged" } else { "hit sweep ceiling" };
        println!(
            "chain {c}: K = {}, log_joint = {:.4}, sweeps = {}, {status}",
            result.partition.n_clusters(),
            result.log_joint,
            result.trace.len()
        );
        if !result.converged {
            eprintln!("warning: chain {c} stopped at the sweep ceiling; best partition so far was emitted");
        }
    }
    println!("fit: outputs in {}", out_dir.display());
    Ok(EXIT_OK)
}

fn cmd_score(args: ScoreArgs) -> Result<i32> {
    let a = read_partition_csv(&args.a)?;
    let b = read_partition_csv(&args.b)?;
    let report = MetricsReport::compute(&a, &b)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Input(e.to_string()))?;
    match args.out {
        Some(path) => std::fs::write(path, json)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let dataset: LabeledDataset = match args.generator.as_str() {
        "multiscale" => datasets::gen_multiscale(
            args.dense,
            args.sparse,
            args.points_per_cluster,
            args.scale_ratio,
            args.seed,
        )?,
        "two-scale" => datasets::gen_two_scale(
            args.tight,
            args.broad,
            args.points_per_cluster,
            args.scale_ratio,
            args.seed,
        )?,
        "grid" => {
            datasets::gen_grid(args.side, args.points_per_cluster, args.spacing, args.seed)?
        }
        other => {
            return Err(Error::Input(format!(
                "unknown generator '{other}' (expected multiscale|two-scale|grid)"
            )))
        }
    };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    datasets::save_csv(&dataset, &args.out)?;
    println!(
        "gen: wrote {} points ({} clusters) to {}",
        dataset.len(),
        dataset.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1)).unwrap_or(0),
        args.out.display()
    );
    Ok(EXIT_OK)
}
