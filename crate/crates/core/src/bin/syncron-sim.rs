use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use syncron::config::{expand, parse_sweep, RunConfig};
use syncron::report::{csv_header, csv_row, execute_all, write_outputs};

/// Simulate hardware synchronization on a near-data-processing system.
#[derive(Parser, Debug)]
#[command(name = "syncron-sim", version)]
struct Args {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    /// e.g. `microbench:lock:200`, `queue:50`
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    units: Option<String>,
    #[arg(long)]
    cores_per_unit: Option<String>,
    #[arg(long)]
    st_entries: Option<String>,
    #[arg(long)]
    link_latency_ns: Option<String>,
    #[arg(long)]
    memory: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for stats.json, stats.csv and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: bool,
    /// KEY=v1,v2,... ; repeat for a cartesian product.
    #[arg(long)]
    sweep: Vec<String>,
    /// Run the safety monitors; a failed monitor makes the exit code 1.
    #[arg(long)]
    verify: bool,
}

fn setup(args: &Args) -> Result<Vec<RunConfig>, String> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    let flags = [
        ("scheme", &args.scheme),
        ("workload", &args.workload),
        ("units", &args.units),
        ("cores-per-unit", &args.cores_per_unit),
        ("st-entries", &args.st_entries),
        ("link-latency-ns", &args.link_latency_ns),
        ("memory", &args.memory),
        ("seed", &args.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| e.to_string())?;
        }
    }
    cfg.trace |= args.trace;
    cfg.verify |= args.verify;
    if let Some(out) = &args.out {
        cfg.out = Some(out.display().to_string());
    }
    let sweeps = args
        .sweep
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let runs = expand(&cfg, &sweeps).map_err(|e| e.to_string())?;
    for r in &runs {
        r.validate().map_err(|e| e.to_string())?;
    }
    Ok(runs)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let runs = match setup(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut outs = Vec::with_capacity(runs.len());
    for r in execute_all(&runs) {
        match r {
            Ok(o) => outs.push(o),
            Err(e) => {
                let msg = e.to_string();
                eprintln!("error: {}", msg.lines().next().unwrap_or_default());
                return ExitCode::from(3);
            }
        }
    }
    println!("{}", csv_header());
    for o in &outs {
        println!("{}", csv_row(o));
    }
    if let Some(dir) = runs[0].out.as_deref() {
        if let Err(e) = write_outputs(dir.as_ref(), &outs) {
            eprintln!("error: writing {dir}: {e}");
            return ExitCode::from(2);
        }
    }
    let mut failed = false;
    for o in &outs {
        if let Some(report) = &o.verification {
            if !report.passed() {
                eprint!("{report}");
                failed = true;
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
