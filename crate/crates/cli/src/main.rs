use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rezone_core::lab::table::{allocation_rows, read_arms, read_design_file, read_district_values, write_records, TableSpec};
use rezone_core::lab::{
    assign_arms, compute_quintiles, fit_logistic, fit_negative_binomial, subject_line_catalog, CovarianceKind,
    FitOptions, GlmFit, Outcome,
};
use rezone_core::model::{load_district, save_district, synthesize_district, District, SynthesisSpec};
use rezone_core::scenario::{load_archive, run_batch, save_archive, ScenarioArchive, ScenarioGrid, ScenarioOutcome};
use rezone_core::solver::{solve, SolverConfig, SolverMode};
use rezone_service::{ExplorationCount, ServiceConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rezone", version, about = "School attendance boundary scenarios and outreach analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one district under one configuration.
    Solve(SolveArgs),
    /// Run the scenario grid over every district file in a directory.
    Batch(BatchArgs),
    /// Print the segregation report stored in an archive.
    Report(ReportArgs),
    /// Write a synthetic district file.
    Synth(SynthArgs),
    /// Outreach experiment tools.
    #[command(subcommand)]
    Lab(LabCommand),
    /// Serve archives over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    district: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    tau: f64,
    #[arg(long, default_value_t = 1.1)]
    sigma: f64,
    /// Time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    time: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// exact or local
    #[arg(long, default_value = "local")]
    mode: SolverMode,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Directory of district files (*.json).
    #[arg(long)]
    districts: PathBuf,
    /// Scenario grid as JSON; the default 2x2 grid when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Per-district budget in seconds, overriding the grid file.
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Emit JSON instead of the aligned table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    blocks: usize,
    #[arg(long, default_value_t = 3)]
    schools: usize,
    /// Segregation level in [0, 1].
    #[arg(long, default_value_t = 0.7)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LabCommand {
    /// Stratify districts into quintiles and randomize arms.
    Assign {
        /// CSV with district_id and dissimilarity columns.
        #[arg(long)]
        districts: PathBuf,
        /// CSV of arms; the built-in subject-line catalog when absent.
        #[arg(long)]
        arms: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Logistic regression of a binary outcome with cluster-robust errors.
    Fit {
        /// Numeric recipient-level CSV with a header row.
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        outcome: Outcome,
        /// Cluster label column.
        #[arg(long, default_value = "district")]
        cluster: String,
        /// Further columns to leave out of the regressors.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        /// cr1, cr0 or model
        #[arg(long, default_value = "cr1")]
        covariance: CovarianceKind,
        /// Family-wise alpha for the Bonferroni flags.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Negative binomial regression of per-district exploration counts.
    Negbin {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, default_value = "explorations")]
        response: String,
        #[arg(long, default_value = "district_id")]
        cluster: String,
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        #[arg(long, default_value = "cr1")]
        covariance: CovarianceKind,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "REZONE_ARCHIVE_DIR")]
    archives: PathBuf,
    /// Where event and survey logs are kept; memory only when absent.
    #[arg(long, env = "REZONE_DATA_DIR")]
    data: Option<PathBuf>,
    #[arg(long, env = "REZONE_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// On-demand solves allowed per session per minute.
    #[arg(long, env = "REZONE_SOLVES_PER_MINUTE", default_value_t = 6)]
    solves_per_minute: usize,
    /// Server-side cap on on-demand solve time, seconds.
    #[arg(long, env = "REZONE_SOLVE_CAP_SECS", default_value_t = 10.0)]
    solve_cap: f64,
    #[arg(long)]
    raw_enrollment: bool,
    /// distinct_session_selections, all_selections or all_events
    #[arg(long, default_value = "distinct_session_selections")]
    exploration_count: ExplorationCount,
    /// Replace the landing notice with the contents of this file.
    #[arg(long)]
    landing: Option<PathBuf>,
    #[arg(long)]
    no_landing: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Report(args) => cmd_report(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Lab(cmd) => cmd_lab(cmd),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let district = load_district(&args.district)?;
    let config = SolverConfig {
        time_limit_secs: args.time,
        seed: args.seed,
        ..SolverConfig::new(args.tau, args.sigma).with_mode(args.mode)
    };
    let result = solve(&district, &config)?;
    let r = &result.report;
    eprintln!(
        "{}: D {:.4} -> {:.4} ({:+.1}%), {:.1}% switched, {:?}",
        district.id,
        r.dissimilarity_status_quo,
        r.dissimilarity_proposed,
        100.0 * r.relative_change,
        100.0 * r.percent_switched,
        result.status
    );
    emit_json(&result, args.out.as_deref())
}

fn district_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn cmd_batch(args: BatchArgs) -> Result<()> {
    let mut grid: ScenarioGrid = match &args.grid {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => ScenarioGrid::default(),
    };
    if let Some(budget) = args.budget {
        grid = grid.with_budget(budget);
    }
    let mut districts: Vec<District> = Vec::new();
    for path in district_files(&args.districts)? {
        match load_district(&path) {
            Ok(d) => districts.push(d),
            Err(e) => eprintln!("skipping {}: {e}", path.display()),
        }
    }
    if districts.is_empty() {
        bail!("no readable district files in {}", args.districts.display());
    }
    fs::create_dir_all(&args.out)?;
    let output = run_batch(&districts, &grid, args.parallel)?;
    for entry in &output.entries {
        save_archive(&entry.archive, args.out.join(format!("{}.json", entry.district_id)))?;
        if let Some(e) = &entry.error {
            eprintln!("{}: {e}", entry.district_id);
        }
    }
    let summary = &output.summary;
    write_records(fs::File::create(args.out.join("summary.csv"))?, &summary.rows)?;
    emit_json(summary, Some(&args.out.join("summary.json")))?;
    let pct = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{:.2}%", 100.0 * v));
    println!(
        "{} districts, {} failed; median relative change {}, median switched {}",
        output.entries.len(),
        summary.failures.len(),
        summary
            .median_relative_change
            .map_or("n/a".to_owned(), |v| format!("{:+.2}%", 100.0 * v)),
        pct(summary.median_percent_switched)
    );
    Ok(())
}

#[derive(Serialize)]
struct ReportRow {
    config_index: usize,
    tau: f64,
    sigma: f64,
    status: String,
    dissimilarity_status_quo: Option<f64>,
    dissimilarity_proposed: Option<f64>,
    relative_change: Option<f64>,
    percent_switched: Option<f64>,
    error: Option<String>,
}

fn report_rows(archive: &ScenarioArchive) -> Vec<ReportRow> {
    archive
        .results
        .iter()
        .enumerate()
        .map(|(k, entry)| {
            let mut row = ReportRow {
                config_index: k,
                tau: entry.config.travel_increase_cap,
                sigma: entry.config.capacity_scale_cap,
                status: String::new(),
                dissimilarity_status_quo: None,
                dissimilarity_proposed: None,
                relative_change: None,
                percent_switched: None,
                error: None,
            };
            match &entry.outcome {
                ScenarioOutcome::Solved(r) => {
                    row.status = serde_json::to_value(r.status)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_default();
                    row.dissimilarity_status_quo = Some(r.report.dissimilarity_status_quo);
                    row.dissimilarity_proposed = Some(r.report.dissimilarity_proposed);
                    row.relative_change = Some(r.report.relative_change);
                    row.percent_switched = Some(r.report.percent_switched);
                }
                ScenarioOutcome::Failed { error } => {
                    row.status = "failed".into();
                    row.error = Some(error.clone());
                }
            }
            row
        })
        .collect()
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let archive = load_archive(&args.archive)?;
    let rows = report_rows(&archive);
    let selection = archive.default_selection();
    if args.json {
        #[derive(Serialize)]
        struct Report<'a> {
            district_id: &'a str,
            schema_version: &'a str,
            default_config: Option<usize>,
            scenarios: &'a [ReportRow],
        }
        return emit_json(
            &Report {
                district_id: &archive.district_id,
                schema_version: &archive.schema_version,
                default_config: selection.map(|(i, _)| i),
                scenarios: &rows,
            },
            None,
        );
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "district {} (schema {})", archive.district_id, archive.schema_version)?;
    writeln!(
        out,
        "{:>3}  {:>5}  {:>5}  {:<20}  {:>8}  {:>8}  {:>8}  {:>8}",
        "#", "tau", "sigma", "status", "D now", "D new", "change", "switched"
    )?;
    let num = |v: Option<f64>, pct: bool| match v {
        Some(v) if pct => format!("{:.1}%", 100.0 * v),
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    };
    for r in &rows {
        let mark = if selection.is_some_and(|(i, _)| i == r.config_index) { "*" } else { "" };
        writeln!(
            out,
            "{:>3}  {:>5.2}  {:>5.2}  {:<20}  {:>8}  {:>8}  {:>8}  {:>8}",
            format!("{mark}{}", r.config_index),
            r.tau,
            r.sigma,
            r.status,
            num(r.dissimilarity_status_quo, false),
            num(r.dissimilarity_proposed, false),
            num(r.relative_change, true),
            num(r.percent_switched, true),
        )?;
        if let Some(e) = &r.error {
            writeln!(out, "     {e}")?;
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let district = synthesize_district(&SynthesisSpec {
        num_blocks: args.blocks,
        num_schools: args.schools,
        segregation_level: args.level,
        seed: args.seed,
    })?;
    save_district(&district, &args.out)?;
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    #[serde(flatten)]
    fit: &'a GlmFit,
    bonferroni_alpha: f64,
    bonferroni_significant: Vec<(String, bool)>,
}

fn emit_fit(fit: &GlmFit, alpha: f64) -> Result<()> {
    let report = FitReport {
        fit,
        bonferroni_alpha: alpha,
        bonferroni_significant: fit.bonferroni(alpha)?,
    };
    emit_json(&report, None)
}

fn cmd_lab(cmd: LabCommand) -> Result<()> {
    match cmd {
        LabCommand::Assign {
            districts,
            arms,
            seed,
            out,
        } => {
            let values = read_district_values(&districts)?;
            let arms = match arms {
                Some(path) => read_arms(path)?,
                None => subject_line_catalog(),
            };
            let strata = compute_quintiles(&values)?;
            let plan = assign_arms(&strata, &arms, seed)?;
            let rows = allocation_rows(&plan);
            match out {
                Some(path) => write_records(fs::File::create(&path)?, &rows)?,
                None => write_records(std::io::stdout().lock(), &rows)?,
            }
            Ok(())
        }
        LabCommand::Fit {
            design,
            outcome,
            cluster,
            exclude,
            covariance,
            alpha,
        } => {
            let response = match outcome {
                Outcome::Opened => "opened",
                Outcome::Clicked => "clicked",
            };
            let mut skip: Vec<&str> = ["opened", "clicked", "delivered", "unsubscribed", "recipient_id", "id"]
                .into_iter()
                .filter(|c| *c != response)
                .collect();
            skip.extend(exclude.iter().map(String::as_str));
            let spec = TableSpec {
                response,
                cluster: Some(&cluster),
                exclude: &skip,
            };
            let (x, y) = read_design_file(&design, &spec)?;
            let fit = fit_logistic(&x, &y, FitOptions::default().with_covariance(covariance))?;
            emit_fit(&fit, alpha)
        }
        LabCommand::Negbin {
            counts,
            response,
            cluster,
            exclude,
            covariance,
            alpha,
        } => {
            let skip: Vec<&str> = exclude.iter().map(String::as_str).collect();
            let spec = TableSpec {
                response: &response,
                cluster: Some(&cluster),
                exclude: &skip,
            };
            let (mut x, y) = read_design_file(&counts, &spec)?;
            for dropped in x.drop_empty_columns() {
                eprintln!("dropping all-zero column `{dropped}`");
            }
            let fit = fit_negative_binomial(&x, &y, FitOptions::default().with_covariance(covariance))?;
            emit_fit(&fit, alpha)
        }
    }
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut config = ServiceConfig::new(&args.archives);
    config.data_dir = args.data;
    config.solves_per_minute = args.solves_per_minute;
    config.solve_time_cap_secs = args.solve_cap;
    config.raw_enrollment = args.raw_enrollment;
    config.exploration_count = args.exploration_count;
    config.show_landing = !args.no_landing;
    if let Some(path) = args.landing {
        config.landing_text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(rezone_service::serve(config, args.addr))?;
    Ok(())
}
