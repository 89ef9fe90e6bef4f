//! Command-line driver for the verification suites: runs a named suite or a
//! custom sweep, prints one line per check, and emits machine-readable
//! reports.
//!
//! Exit codes: 0 all checks pass, 1 check failure, 2 configuration error,
//! 3 budget exceeded.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use conelab::report::Report;
use conelab::restriction::{FamilyKind, RatioReport, SweepConfig};
use conelab::spectral::Exponent;
use conelab::suites;
use conelab::Budget;

#[derive(Parser)]
#[command(name = "conelab", version, about = "Finite-field cone extension and point-sphere incidence verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the named verification suites.
    Verify {
        /// gauss | cone-ift | restriction-sweep | l2-char | necessary |
        /// incidence | sharp | all
        suite: String,
        #[command(flatten)]
        opts: VerifyOpts,
    },
    /// Estimate the extension constant as a maximum over witness families.
    Sweep(SweepArgs),
    /// Flatten a sweep report into CSV rows for plotting.
    ExportPlot {
        /// Path of a sweep report JSON file.
        #[arg(long)]
        report: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct VerifyOpts {
    /// Field characteristic.
    #[arg(long, default_value_t = 3)]
    p: u64,
    /// Extension degree.
    #[arg(long, default_value_t = 1)]
    ell: u32,
    /// Modulus coefficients for ell > 1, constant first, e.g. "1,0,1".
    #[arg(long)]
    modulus: Option<String>,
    /// Ambient dimension of the cone.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Point/sphere dimension for incidence suites.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Shrink parameter for the sharp families.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Grid-cell budget.
    #[arg(long, default_value_t = Budget::default().max_cells)]
    budget: u64,
    /// Write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to CONELAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Load the whole configuration from a JSON file (other flags ignored).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Input exponent as an exact rational, e.g. "2" or "10/3".
    #[arg(long, default_value = "2")]
    p: String,
    /// Output exponent as an exact rational or "inf".
    #[arg(long, default_value = "3")]
    r: String,
    /// Comma-separated field sizes, e.g. "3,7,11".
    #[arg(long, default_value = "3,7,11")]
    q: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated family names; defaults to all.
    #[arg(long)]
    families: Option<String>,
    #[arg(long, default_value_t = Budget::default().max_cells)]
    budget: u64,
    /// Write the sweep report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write (q, ratio) plot rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    });
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(conelab::Error::BudgetExceeded { .. }) = err.downcast_ref::<conelab::Error>() {
        3
    } else {
        2
    }
}

fn init_threads(threads: Option<usize>) {
    let count = threads.or_else(|| {
        std::env::var("CONELAB_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(count) = count {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Verify { suite, opts } => {
            init_threads(opts.threads);
            run_verify(&suite, &opts)
        }
        Command::Sweep(args) => {
            init_threads(args.threads);
            run_sweep(&args)
        }
        Command::ExportPlot { report, out } => {
            let text = std::fs::read_to_string(&report)?;
            let parsed: RatioReport = serde_json::from_str(&text)
                .map_err(|e| anyhow::anyhow!("not a sweep report: {e}"))?;
            std::fs::write(&out, plot_csv(&parsed))?;
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn parse_modulus(opts: &VerifyOpts) -> anyhow::Result<Option<Vec<u64>>> {
    match &opts.modulus {
        None => Ok(None),
        Some(text) => {
            let coeffs: Result<Vec<u64>, _> =
                text.split(',').map(|c| c.trim().parse::<u64>()).collect();
            Ok(Some(coeffs.map_err(|e| anyhow::anyhow!("bad modulus: {e}"))?))
        }
    }
}

fn run_verify(suite: &str, opts: &VerifyOpts) -> anyhow::Result<i32> {
    let budget = Budget::new(opts.budget);
    let modulus = parse_modulus(opts)?;
    let result: conelab::Result<Vec<Report>> = match suite {
        "gauss" => suites::gauss_suite().map(|r| vec![r]),
        "cone-ift" => suites::cone_ift_suite(opts.p, opts.ell, modulus.as_deref(), opts.n, budget)
            .map(|r| vec![r]),
        "l2-char" => {
            suites::l2_char_suite(opts.p, opts.n, opts.trials, opts.seed, budget).map(|r| vec![r])
        }
        "necessary" => suites::necessary_suite(opts.p, opts.n, budget).map(|r| vec![r]),
        "incidence" => suites::incidence_suite(opts.d, opts.p, opts.trials, opts.seed, budget)
            .map(|r| vec![r]),
        "sharp" => suites::sharp_suite(opts.d, opts.p, opts.k, budget).map(|r| vec![r]),
        "restriction-sweep" => {
            let config = SweepConfig {
                qs: vec![3, 7, 11],
                n: opts.n,
                p: Exponent::from_int(2)?,
                r: Exponent::from_int(3)?,
                families: FamilyKind::all(),
                trials: opts.trials,
                seed: opts.seed,
                max_cells: opts.budget,
            };
            suites::sweep_suite(&config, Some(conelab::restriction::BOUNDED_SLOPE_MAX), None)
                .map(|(report, _)| vec![report])
        }
        "all" => suites::run_all(opts.seed, budget),
        other => anyhow::bail!("unknown suite '{other}'"),
    };

    // A budget overrun still yields a (partial) flagged report and the
    // dedicated exit code.
    let reports = match result {
        Ok(reports) => reports,
        Err(err @ conelab::Error::BudgetExceeded { .. }) => {
            vec![suites::budget_stub(suite, &err)]
        }
        Err(err) => return Err(err.into()),
    };

    let mut all_pass = true;
    let mut budget_hit = false;
    for report in &reports {
        print_report(report);
        all_pass &= report.all_pass();
        budget_hit |= report
            .checks
            .iter()
            .any(|c| c.flag.as_deref().is_some_and(|f| f.starts_with("budget exceeded")));
    }
    if let Some(path) = &opts.out {
        let json = if reports.len() == 1 {
            reports[0].to_json_pretty()
        } else {
            serde_json::to_string_pretty(&reports)?
        };
        std::fs::write(path, json)?;
        println!("report written to {}", path.display());
    }
    Ok(if budget_hit {
        3
    } else if all_pass {
        0
    } else {
        1
    })
}

fn print_report(report: &Report) {
    println!("== suite: {} ==", report.suite);
    for check in &report.checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        let flag = check.flag.as_deref().map(|f| format!(" [{f}]")).unwrap_or_default();
        println!(
            "[{status}] {}: lhs={:.6e} rhs={:.6e}{flag}",
            check.name, check.lhs, check.rhs
        );
    }
    for (name, value) in &report.constants {
        println!("       {name} = {value:.6}");
    }
    println!(
        "       {} checks, {} failures, {} ms",
        report.checks.len(),
        report.checks.iter().filter(|c| !c.pass).count(),
        report.timing_ms
    );
}

fn run_sweep(args: &SweepArgs) -> anyhow::Result<i32> {
    let config: SweepConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => {
            let qs: Result<Vec<u64>, _> =
                args.q.split(',').map(|s| s.trim().parse::<u64>()).collect();
            let families = match &args.families {
                None => FamilyKind::all(),
                Some(csv) => csv
                    .split(',')
                    .map(|s| s.parse::<FamilyKind>())
                    .collect::<conelab::Result<Vec<_>>>()?,
            };
            SweepConfig {
                qs: qs.map_err(|e| anyhow::anyhow!("bad q list: {e}"))?,
                n: args.n,
                p: Exponent::parse(&args.p)?,
                r: Exponent::parse(&args.r)?,
                families,
                trials: args.trials,
                seed: args.seed,
                max_cells: args.budget,
            }
        }
    };

    let report = conelab::restriction::sweep_restriction(&config)?;
    println!(
        "sweep n={} p={} r={} trials={} seed={}",
        report.n, report.p, report.r, report.trials, report.seed
    );
    for row in &report.per_q {
        println!(
            "  q={:3} cone={:6} max_ratio={:.6} argmax={}",
            row.q, row.cone_size, row.max_ratio, row.argmax
        );
    }
    println!(
        "  slope={:.4} r^2={:.4} classification={:?}",
        report.fit.slope, report.fit.r_squared, report.fit.classification
    );
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, plot_csv(&report))?;
        println!("plot data written to {}", path.display());
    }
    Ok(0)
}

/// One row per field size: the overall maximum followed by one column per
/// family.
fn plot_csv(report: &RatioReport) -> String {
    let mut families: Vec<String> = report
        .per_q
        .first()
        .map(|row| row.family_max.keys().cloned().collect())
        .unwrap_or_default();
    families.sort();
    let mut out = String::from("q,max_ratio");
    for f in &families {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for row in &report.per_q {
        out.push_str(&format!("{},{:e}", row.q, row.max_ratio));
        for f in &families {
            out.push_str(&format!(",{:e}", row.family_max.get(f).copied().unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    out
}
