use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adhocsim::report::{DELAY_FILE, RECEIVED_LOST_FILE, THROUGHPUT_FILE};
use adhocsim::scenario::{self, builtin_names};
use adhocsim::{simulate, MetricWindows, PlotSet, Protocol, RunReport, ScenarioSpec, SimConfig, SimTime};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "adhocsim", version, about = "Discrete-event AODV/DSDV simulator for mobile ad-hoc networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario under one protocol.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "aodv")]
        protocol: Protocol,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run AODV and DSDV side by side over several seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Additional scenarios to compare in the same output.
        #[arg(long = "also")]
        also: Vec<String>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// Built-in scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Radio range in meters, overriding the scenario.
    #[arg(long)]
    range: Option<f64>,
    /// AODV hello interval in seconds; 0 disables hellos.
    #[arg(long)]
    hello_interval: Option<f64>,
    /// Throughput averaging window in seconds.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
}

struct Loaded {
    name: String,
    spec: ScenarioSpec,
}

fn load(arg: &str, range: Option<f64>) -> Result<Loaded> {
    let path = Path::new(arg);
    let (name, mut spec) = if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec = scenario::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let name = path.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
        (name, spec)
    } else if builtin_names().any(|n| n == arg) {
        (arg.to_string(), scenario::builtin(arg)?)
    } else {
        bail!(
            "cannot open scenario `{arg}`: no such file and not a built-in (built-ins: {})",
            builtin_names().collect::<Vec<_>>().join(", ")
        );
    };
    if let Some(r) = range {
        if !(r.is_finite() && r > 0.0) {
            bail!("--range must be a positive number of meters");
        }
        spec.radio.range = r;
    }
    Ok(Loaded { name, spec })
}

fn config(protocol: Protocol, seed: u64, common: &Common) -> Result<SimConfig> {
    let mut config = SimConfig::new(protocol, seed);
    if let Some(h) = common.hello_interval {
        if !(h.is_finite() && h >= 0.0) {
            bail!("--hello-interval must be a non-negative number of seconds");
        }
        config.aodv.hello_interval = (h > 0.0).then(|| SimTime::from_secs(h));
    }
    Ok(config)
}

fn windows(common: &Common) -> Result<MetricWindows> {
    if !(common.window.is_finite() && common.window > 0.0) {
        bail!("--window must be a positive number of seconds");
    }
    Ok(MetricWindows { window: SimTime::from_secs(common.window), ..MetricWindows::default() })
}

struct RunOutput {
    report: RunReport,
    plots: PlotSet,
}

/// Simulates and writes trace, report and plots under `dir`.
fn run_one(loaded: &Loaded, config: &SimConfig, windows: MetricWindows, dir: &Path) -> Result<RunOutput> {
    let outcome = simulate(&loaded.spec, config)?;
    let report = RunReport::build(&loaded.name, &loaded.spec, config, &outcome, windows);
    let plots = PlotSet::from_ledger(&outcome.ledger, windows, outcome.end);

    let plot_dir = dir.join("plots");
    fs::create_dir_all(&plot_dir).with_context(|| format!("creating {}", plot_dir.display()))?;
    write(&dir.join("trace.txt"), &outcome.ledger.to_trace())?;
    write(&dir.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let label = format!("{} {} seed {}", loaded.name, config.protocol, config.seed.0);
    for (file, text) in plots.render(&label) {
        write(&plot_dir.join(file), &text)?;
    }
    Ok(RunOutput { report, plots })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ComparisonRow {
    scenario: String,
    seed: u64,
    aodv: RunReport,
    dsdv: RunReport,
}

#[derive(Serialize)]
struct ComparisonReport {
    seeds: Vec<u64>,
    rows: Vec<ComparisonRow>,
}

fn compare(common: &Common, also: &[String], seeds: &[u64]) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        bail!("compare needs at least one seed");
    }
    let windows = windows(common)?;
    let mut scenarios = vec![load(&common.scenario, common.range)?];
    for s in also {
        scenarios.push(load(s, common.range)?);
    }

    let mut jobs = Vec::new();
    for (si, loaded) in scenarios.iter().enumerate() {
        for &seed in seeds {
            for protocol in [Protocol::Aodv, Protocol::Dsdv] {
                let dir = common.out.join(format!("{}-{protocol}-seed{seed}", loaded.name));
                jobs.push((si, seed, config(protocol, seed, common)?, dir));
            }
        }
    }
    // Independent engines writing disjoint directories.
    let results: Vec<Result<RunOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(si, _, config, dir)| s.spawn(|| run_one(&scenarios[*si], config, windows, dir)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    // Jobs come in (aodv, dsdv) pairs.
    let mut rows = Vec::new();
    for (pair, job) in results.chunks(2).zip(jobs.chunks(2)) {
        rows.push(ComparisonRow {
            scenario: scenarios[job[0].0].name.clone(),
            seed: job[0].1,
            aodv: pair[0].report.clone(),
            dsdv: pair[1].report.clone(),
        });
    }

    // Combined plots use the first seed of every scenario/protocol pair.
    let first: Vec<&PlotSet> = results
        .chunks(2 * seeds.len())
        .flat_map(|per_scenario| [&per_scenario[0].plots, &per_scenario[1].plots])
        .collect();
    let names: Vec<String> =
        scenarios.iter().flat_map(|l| [format!("{} aodv", l.name), format!("{} dsdv", l.name)]).collect();
    let plot_dir = common.out.join("plots");
    fs::create_dir_all(&plot_dir).with_context(|| format!("creating {}", plot_dir.display()))?;
    let title = format!("{} (seed {})", names.join(" | "), seeds[0]);
    for (file, text) in PlotSet::render_combined(&first, &title) {
        write(&plot_dir.join(file), &text)?;
    }

    let report = ComparisonReport { seeds: seeds.to_vec(), rows };
    write(&common.out.join("comparison.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(report)
}

fn comparison_table(report: &ComparisonReport) -> String {
    let header = [
        "scenario",
        "seed",
        "recv aodv",
        "recv dsdv",
        "lost aodv",
        "lost dsdv",
        "pdr aodv",
        "pdr dsdv",
        "delay aodv",
        "delay dsdv",
        "ctrl aodv",
        "ctrl dsdv",
    ];
    let delay = |d: Option<f64>| d.map_or_else(|| "n/a".to_string(), |d| format!("{d:.6}"));
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &report.rows {
        rows.push(vec![
            r.scenario.clone(),
            r.seed.to_string(),
            r.aodv.received.to_string(),
            r.dsdv.received.to_string(),
            r.aodv.lost.to_string(),
            r.dsdv.lost.to_string(),
            format!("{:.4}", r.aodv.delivery_ratio),
            format!("{:.4}", r.dsdv.delivery_ratio),
            delay(r.aodv.mean_delay_s),
            delay(r.dsdv.mean_delay_s),
            r.aodv.control_total.to_string(),
            r.dsdv.control_total.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run { common, protocol, seed } => {
            let loaded = load(&common.scenario, common.range)?;
            let config = config(protocol, seed, &common)?;
            let output = run_one(&loaded, &config, windows(&common)?, &common.out)?;
            let files = [
                "trace.txt".to_string(),
                "report.json".to_string(),
                format!("plots/{RECEIVED_LOST_FILE}"),
                format!("plots/{THROUGHPUT_FILE}"),
                format!("plots/{DELAY_FILE}"),
            ];
            Ok(format!("{}\nwrote {} in {}\n", output.report.to_text(), files.join(", "), common.out.display()))
        }
        Command::Compare { common, also, seeds } => {
            let report = compare(&common, &also, &seeds)?;
            Ok(format!("{}\nwrote comparison.json and plots/ in {}\n", comparison_table(&report), common.out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
