use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use eomsim::engine::{run_simulation, MarketConfig, SimulationInput};
use eomsim::fixtures::{pumped_storage, random_fleet, synthetic_series, ten_unit_fleet, SeriesShape};
use eomsim::io::{
    compare_summaries, fleet_to_csv, load_series_dir, parse_fleet, parse_storage, parse_summary, read_run_name,
    sha256_hex, storage_to_csv, write_run_dir, write_series_dir, SUMMARY_FILE,
};
use eomsim::report::{deficit_stats, price_stats, Calendar};
use eomsim::scenario::{apply_scenario, ScenarioSpec};

#[derive(Parser)]
#[command(name = "eomsim", version, about = "Quarter-hourly electricity market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its output directory.
    Simulate {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Fleet CSV.
        #[arg(long)]
        fleet: PathBuf,
        /// Storage CSV.
        #[arg(long)]
        storage: Option<PathBuf>,
        /// Directory holding demand.csv, vre_*.csv and the optional series.
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the price forward curve.
        #[arg(long)]
        dump_pfc: bool,
        /// Also write per-unit dispatch.
        #[arg(long)]
        dump_dispatch: bool,
    },
    /// Tabulate the summaries of several run directories side by side.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic fleet, storage and series set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "ten-unit")]
        fleet: FleetKind,
        /// Number of units for the random fleet.
        #[arg(long, default_value_t = 20)]
        units: usize,
        #[arg(long, default_value_t = 2017)]
        year: i32,
        /// Horizon in days; the whole year when omitted.
        #[arg(long)]
        days: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FleetKind {
    TenUnit,
    Random,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            scenario,
            fleet,
            storage,
            series,
            out,
            dump_pfc,
            dump_dispatch,
        } => simulate(
            &scenario,
            &fleet,
            storage.as_deref(),
            &series,
            &out,
            dump_pfc,
            dump_dispatch,
        ),
        Command::Compare { runs, out } => compare(&runs, &out),
        Command::Synth {
            out,
            fleet,
            units,
            year,
            days,
            seed,
        } => synth(&out, fleet, units, year, days, seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn read_input(path: &Path, key: &str, hashes: &mut BTreeMap<String, String>) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    hashes.insert(key.to_string(), sha256_hex(&bytes));
    String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn simulate(
    scenario: &Path,
    fleet: &Path,
    storage: Option<&Path>,
    series: &Path,
    out: &Path,
    dump_pfc: bool,
    dump_dispatch: bool,
) -> Result<()> {
    let mut hashes = BTreeMap::new();
    let spec_text = read_input(scenario, "scenario", &mut hashes)?;
    let spec = ScenarioSpec::parse(&spec_text).with_context(|| format!("scenario {}", scenario.display()))?;

    let fleet_text = read_input(fleet, "fleet", &mut hashes)?;
    let units = parse_fleet(&fleet_text, &file_name(fleet))?;
    let storage_units = match storage {
        Some(path) => parse_storage(&read_input(path, "storage", &mut hashes)?, &file_name(path))?,
        None => Vec::new(),
    };
    let mut series_hashes = BTreeMap::new();
    let series_set = load_series_dir(series, &mut series_hashes)
        .with_context(|| format!("series directory {}", series.display()))?;
    hashes.extend(series_hashes.into_iter().map(|(name, h)| (format!("series/{name}"), h)));

    let outcome = apply_scenario(&spec, &units, &series_set)?;
    info!(
        "scenario {}: {} units removed, {} added",
        spec.name,
        outcome.removed.len(),
        outcome.added.len()
    );
    let calendar = Calendar::new(spec.holidays.iter().copied());
    let input = SimulationInput {
        name: spec.name.clone(),
        fleet: outcome.fleet,
        storage: storage_units,
        series: outcome.series,
        market: MarketConfig {
            prices: spec.prices.clone(),
            bounds: spec.bounds,
            reserve: spec.reserve,
            unserved_heat_penalty: spec.unserved_heat_penalty,
        },
        calendar: calendar.clone(),
        record_dispatch: dump_dispatch,
        input_hashes: hashes,
    };
    let report = run_simulation(&input)?;
    write_run_dir(out, &report, &input.fleet, &calendar, dump_pfc)
        .with_context(|| format!("writing {}", out.display()))?;

    let deficit = deficit_stats(&report);
    let prices = price_stats(&report, &calendar);
    println!(
        "{}: {} intervals, base price {:.2} EUR/MWh, {} deficit intervals ({:.1} GWh), output in {}",
        spec.name,
        report.records.len(),
        prices.base,
        deficit.count,
        deficit.energy_gwh,
        out.display()
    );
    Ok(())
}

fn compare(runs: &[PathBuf], out: &Path) -> Result<()> {
    let mut table = Vec::with_capacity(runs.len());
    for dir in runs {
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let rows = parse_summary(&text, &path.display().to_string())?;
        let name = read_run_name(dir).unwrap_or_else(|_| file_name(dir));
        if table.iter().any(|(n, _)| *n == name) {
            bail!("two runs are named `{name}`");
        }
        table.push((name, rows));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(out, compare_summaries(&table)).with_context(|| format!("writing {}", out.display()))?;
    println!("compared {} runs into {}", table.len(), out.display());
    Ok(())
}

fn synth(out: &Path, kind: FleetKind, units: usize, year: i32, days: Option<usize>, seed: u64) -> Result<()> {
    let fleet = match kind {
        FleetKind::TenUnit => ten_unit_fleet(),
        FleetKind::Random => random_fleet(units, seed),
    };
    let capacity: f64 = fleet.iter().map(|u| u.nominal_capacity).sum();
    let len = match days {
        Some(d) => d * 96,
        None => eomsim::model::intervals_in_year(year),
    };
    let series = synthetic_series(year, len, SeriesShape::for_capacity(capacity), seed)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("fleet.csv"), fleet_to_csv(&fleet)?)?;
    fs::write(
        out.join("storage.csv"),
        storage_to_csv(&[pumped_storage("psh_1", (0.03 * capacity).round())])?,
    )?;
    write_series_dir(&out.join("series"), &series)?;
    println!(
        "wrote {} units ({capacity} MW) and {len} intervals to {}",
        fleet.len(),
        out.display()
    );
    Ok(())
}
