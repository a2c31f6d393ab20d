//! File formats: fleet and storage CSV, quarter-hour series CSV, and the
//! run output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDateTime};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::SeriesSet;
use crate::error::{Error, Result};
use crate::model::{interval_start, intervals_in_year, FuelKind, PlantUnit, SeriesUnit, StorageUnit, TimeSeries};
use crate::report::{
    deficit_stats, full_load_hours, generation_by_fuel, negative_residual_stats, price_stats, Calendar,
    SimulationReport,
};

pub const FLEET_COLUMNS: [&str; 18] = [
    "id",
    "name",
    "fuel",
    "owner_id",
    "nominal_capacity",
    "min_stable_output",
    "efficiency",
    "ramp_up",
    "ramp_down",
    "min_uptime",
    "min_downtime",
    "startup_cost",
    "other_variable_cost",
    "thermal_emission_factor",
    "chp_heat_capacity",
    "power_to_heat_ratio",
    "reserve_eligible",
    "commissioning_year",
];

pub const STORAGE_COLUMNS: [&str; 6] = [
    "id",
    "owner_id",
    "power_capacity",
    "energy_capacity",
    "round_trip_efficiency",
    "state_of_charge",
];

/// Accepted timestamp layouts of series files; the first is written.
const TIMESTAMP_FORMATS: [&str; 3] = ["%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S"];

pub const DEMAND_FILE: &str = "demand.csv";
pub const NET_EXPORTS_FILE: &str = "net_exports.csv";
pub const HEAT_DEMAND_FILE: &str = "heat_demand.csv";
pub const ACTIVATION_FILE: &str = "activation.csv";
/// Renewable series are `vre_<source>.csv`.
pub const VRE_PREFIX: &str = "vre_";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_error(source_name: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn read_table<T: DeserializeOwned>(text: &str, source_name: &str, columns: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(source_name, 1, e.to_string()))?
        .clone();
    if headers.iter().ne(columns.iter().copied()) {
        return Err(parse_error(
            source_name,
            1,
            format!("header must be `{}`", columns.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: T = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source_name, line, e.to_string())
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_table<T: Serialize>(rows: &[T], columns: &[&str]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(columns)?;
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn parse_fleet(text: &str, source_name: &str) -> Result<Vec<PlantUnit>> {
    read_table(text, source_name, &FLEET_COLUMNS)
}

pub fn fleet_to_csv(fleet: &[PlantUnit]) -> Result<String> {
    write_table(fleet, &FLEET_COLUMNS)
}

pub fn parse_storage(text: &str, source_name: &str) -> Result<Vec<StorageUnit>> {
    read_table(text, source_name, &STORAGE_COLUMNS)
}

pub fn storage_to_csv(storage: &[StorageUnit]) -> Result<String> {
    write_table(storage, &STORAGE_COLUMNS)
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMATS[0]).to_string()
}

/// Reads a `timestamp,value` series. Rows must be consecutive quarter
/// hours starting at 1 January 00:00 of one year.
pub fn parse_series(text: &str, source_name: &str, unit: SeriesUnit) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(source_name, 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "timestamp" {
        return Err(parse_error(source_name, 1, "header must be `timestamp,<value>`"));
    }
    let mut year = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source_name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_error(source_name, line, "expected two fields"));
        }
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| parse_error(source_name, line, format!("bad timestamp `{}`", &record[0])))?;
        let y = *year.get_or_insert(ts.year());
        if !(1..=9999).contains(&y) || values.len() >= intervals_in_year(y) || ts != interval_start(y, values.len()) {
            return Err(parse_error(
                source_name,
                line,
                format!("timestamp `{}` breaks the quarter-hour sequence", &record[0]),
            ));
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_error(source_name, line, format!("bad value `{}`", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_error(source_name, line, "value must be finite"));
        }
        values.push(value);
    }
    match year {
        Some(y) => TimeSeries::new(y, unit, values),
        None => Err(parse_error(source_name, 1, "series is empty")),
    }
}

pub fn series_to_csv(series: &TimeSeries, value_column: &str) -> String {
    let mut out = format!("timestamp,{value_column}\n");
    for (t, v) in series.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", format_timestamp(series.timestamp(t)), v));
    }
    out
}

/// Reads a file and records its hash under its file name.
pub fn read_hashed(path: &Path, hashes: &mut BTreeMap<String, String>) -> Result<String> {
    let bytes = fs::read(path)?;
    let name = path
        .file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    hashes.insert(name, sha256_hex(&bytes));
    String::from_utf8(bytes).map_err(|_| Error::Input(format!("{} is not UTF-8", path.display())))
}

/// Loads a series directory: `demand.csv` is required; net exports, heat
/// demand and activation default to zero; every `vre_<source>.csv` is one
/// renewable source.
pub fn load_series_dir(dir: &Path, hashes: &mut BTreeMap<String, String>) -> Result<SeriesSet> {
    let load = |name: &str, unit, hashes: &mut BTreeMap<String, String>| -> Result<TimeSeries> {
        let text = read_hashed(&dir.join(name), hashes)?;
        parse_series(&text, name, unit)
    };
    let demand_path = dir.join(DEMAND_FILE);
    if !demand_path.is_file() {
        return Err(Error::Input(format!("{} not found", demand_path.display())));
    }
    let mut set = SeriesSet::from_demand(load(DEMAND_FILE, SeriesUnit::Megawatt, hashes)?);
    if dir.join(NET_EXPORTS_FILE).is_file() {
        set.net_exports = load(NET_EXPORTS_FILE, SeriesUnit::Megawatt, hashes)?;
    }
    if dir.join(HEAT_DEMAND_FILE).is_file() {
        set.heat_demand = load(HEAT_DEMAND_FILE, SeriesUnit::MegawattThermal, hashes)?;
    }
    if dir.join(ACTIVATION_FILE).is_file() {
        set.activation = load(ACTIVATION_FILE, SeriesUnit::Megawatt, hashes)?;
    }
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(VRE_PREFIX) && n.ends_with(".csv"))
        .collect();
    names.sort();
    for name in names {
        let source = name[VRE_PREFIX.len()..name.len() - 4].to_string();
        set.vre.insert(source, load(&name, SeriesUnit::Megawatt, hashes)?);
    }
    set.validate()?;
    Ok(set)
}

/// Writes a series set in the layout [`load_series_dir`] reads.
pub fn write_series_dir(dir: &Path, series: &SeriesSet) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(DEMAND_FILE), series_to_csv(&series.demand, "demand_mw"))?;
    fs::write(
        dir.join(NET_EXPORTS_FILE),
        series_to_csv(&series.net_exports, "net_exports_mw"),
    )?;
    fs::write(
        dir.join(HEAT_DEMAND_FILE),
        series_to_csv(&series.heat_demand, "heat_demand_mwth"),
    )?;
    fs::write(
        dir.join(ACTIVATION_FILE),
        series_to_csv(&series.activation, "activation_mw"),
    )?;
    for (name, s) in &series.vre {
        fs::write(
            dir.join(format!("{VRE_PREFIX}{name}.csv")),
            series_to_csv(s, "feed_in_mw"),
        )?;
    }
    Ok(())
}

/// `(metric, value)` rows of a summary.
pub type SummaryRows = Vec<(String, Option<f64>)>;

/// Headline figures of one run; `None` marks an undefined value such as the
/// peak price of a weekend-only horizon.
pub fn summary_rows(report: &SimulationReport, fleet: &[PlantUnit], calendar: &Calendar) -> SummaryRows {
    let deficit = deficit_stats(report);
    let surplus = negative_residual_stats(report);
    let prices = price_stats(report, calendar);
    let generation = generation_by_fuel(report);
    let records = &report.records;
    let sum = |f: &dyn Fn(&crate::report::IntervalRecord) -> f64| records.iter().map(f).sum::<f64>();
    let mut rows: Vec<(String, Option<f64>)> = vec![
        ("intervals".into(), Some(records.len() as f64)),
        ("deficit_intervals".into(), Some(deficit.count as f64)),
        ("deficit_max_mw".into(), Some(deficit.max_mw)),
        ("deficit_energy_gwh".into(), Some(deficit.energy_gwh)),
        ("negative_residual_intervals".into(), Some(surplus.count as f64)),
        ("negative_residual_max_mw".into(), Some(surplus.max_mw)),
        ("negative_residual_energy_gwh".into(), Some(surplus.energy_gwh)),
        ("price_base".into(), Some(prices.base)),
        ("price_peak".into(), prices.peak),
        ("price_off_peak".into(), prices.off_peak),
        ("thermal_generation_twh".into(), Some(generation.twh.values().sum())),
        (
            "imbalance_abs_gwh".into(),
            Some(sum(&|r| r.imbalance_mw.abs()) * 0.25 / 1e3),
        ),
        (
            "reserve_shortfall_intervals".into(),
            Some(
                records
                    .iter()
                    .filter(|r| r.reserve_shortfall_pos_mw > 0.0 || r.reserve_shortfall_neg_mw > 0.0)
                    .count() as f64,
            ),
        ),
        (
            "activation_clipped_mwh".into(),
            Some(sum(&|r| r.activation_clipped_mw) * 0.25),
        ),
        (
            "heat_unserved_gwh".into(),
            Some(sum(&|r| r.heat_unserved_mwth) * 0.25 / 1e3),
        ),
        ("co2_mt".into(), Some(sum(&|r| r.co2_t) / 1e6)),
        (
            "startups".into(),
            Some(generation.startups.values().sum::<u64>() as f64),
        ),
        ("startup_cost_meur".into(), Some(sum(&|r| r.startup_cost_eur) / 1e6)),
        ("variable_cost_meur".into(), Some(sum(&|r| r.variable_cost_eur) / 1e6)),
        (
            "reserve_payment_meur".into(),
            Some(sum(&|r| r.reserve_payment_eur) / 1e6),
        ),
    ];
    for &fuel in report.installed_mw.keys() {
        rows.push((
            format!("full_load_hours_{fuel}"),
            Some(full_load_hours(report, fleet, fuel)),
        ));
    }
    rows
}

fn format_value(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_to_csv(rows: &[(String, Option<f64>)]) -> String {
    let mut out = String::from("metric,value\n");
    for (metric, value) in rows {
        out.push_str(&format!("{metric},{}\n", format_value(*value)));
    }
    out
}

pub fn parse_summary(text: &str, source_name: &str) -> Result<SummaryRows> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_error(source_name, 1, e.to_string()))?
        .clone();
    if headers.iter().ne(["metric", "value"]) {
        return Err(parse_error(source_name, 1, "header must be `metric,value`"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source_name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 || record[0].is_empty() {
            return Err(parse_error(source_name, line, "expected `metric,value`"));
        }
        let value = if record[1].is_empty() {
            None
        } else {
            Some(
                record[1]
                    .parse::<f64>()
                    .map_err(|_| parse_error(source_name, line, format!("bad value `{}`", &record[1])))?,
            )
        };
        rows.push((record[0].to_string(), value));
    }
    Ok(rows)
}

/// Side-by-side table of several run summaries: one row per metric, one
/// column per run. Metrics missing from a run are left empty.
pub fn compare_summaries(runs: &[(String, SummaryRows)]) -> String {
    let mut order: Vec<&str> = Vec::new();
    for (_, rows) in runs {
        for (metric, _) in rows {
            if !order.contains(&metric.as_str()) {
                order.push(metric);
            }
        }
    }
    let mut out = String::from("metric");
    for (name, _) in runs {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for metric in order {
        out.push_str(metric);
        for (_, rows) in runs {
            let value = rows.iter().find(|(m, _)| m == metric).and_then(|(_, v)| *v);
            out.push(',');
            out.push_str(&format_value(value));
        }
        out.push('\n');
    }
    out
}

pub fn intervals_to_csv(report: &SimulationReport) -> String {
    let mut out = String::from(
        "timestamp,demand_mw,vre_mw,net_exports_mw,residual_mw,clearing_price,deficit_mw,surplus_mw,\
         thermal_mw,imbalance_mw,storage_charge_mw,storage_discharge_mw,reserve_activation_mw,\
         activation_clipped_mw,reserve_shortfall_pos_mw,reserve_shortfall_neg_mw,heat_unserved_mwth",
    );
    for fuel in FuelKind::ALL {
        out.push_str(&format!(",generation_{fuel}_mwh"));
    }
    out.push('\n');
    for r in &report.records {
        let fields = [
            r.demand_mw,
            r.vre_mw,
            r.net_exports_mw,
            r.residual_mw,
            r.clearing_price,
            r.deficit_mw,
            r.surplus_mw,
            r.thermal_mw,
            r.imbalance_mw,
            r.storage_charge_mw,
            r.storage_discharge_mw,
            r.reserve_activation_mw,
            r.activation_clipped_mw,
            r.reserve_shortfall_pos_mw,
            r.reserve_shortfall_neg_mw,
            r.heat_unserved_mwth,
        ];
        out.push_str(&format_timestamp(r.timestamp));
        for v in fields.iter().chain(&r.generation_mwh) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn generation_to_csv(report: &SimulationReport) -> String {
    let generation = generation_by_fuel(report);
    let mut out = String::from("fuel,installed_mw,generation_twh,startups\n");
    for (fuel, twh) in &generation.twh {
        out.push_str(&format!(
            "{fuel},{},{twh},{}\n",
            report.installed_mw[fuel], generation.startups[fuel]
        ));
    }
    out
}

pub fn pfc_to_csv(report: &SimulationReport) -> String {
    let mut out = String::from("timestamp,residual_mw,price_eur_mwh\n");
    for (r, p) in report.records.iter().zip(&report.forward_curve) {
        out.push_str(&format!("{},{},{}\n", format_timestamp(r.timestamp), r.residual_mw, p));
    }
    out
}

/// `None` when the run kept no dispatch trace.
pub fn dispatch_to_csv(report: &SimulationReport) -> Option<String> {
    report.dispatch.as_ref()?;
    let mut out = String::from("timestamp,unit_id,awarded_mw,output_mw,activation_mw,online,started\n");
    for (t, r) in report.records.iter().enumerate() {
        let ts = format_timestamp(r.timestamp);
        let trace = report.unit_trace(t).expect("trace present");
        for (id, u) in report.unit_ids.iter().zip(trace) {
            out.push_str(&format!(
                "{ts},{id},{},{},{},{},{}\n",
                u.awarded,
                u.setpoint,
                u.activation,
                u8::from(u.online),
                u8::from(u.started)
            ));
        }
    }
    Some(out)
}

#[derive(Serialize, Deserialize)]
struct MetadataFile {
    scenario: String,
    year: i32,
    intervals: usize,
    input_hashes: BTreeMap<String, String>,
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const INTERVALS_FILE: &str = "intervals.csv";
pub const GENERATION_FILE: &str = "generation_by_fuel.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const PFC_FILE: &str = "pfc.csv";
pub const DISPATCH_FILE: &str = "dispatch.csv";

/// Writes the run directory and returns the paths written.
pub fn write_run_dir(
    dir: &Path,
    report: &SimulationReport,
    fleet: &[PlantUnit],
    calendar: &Calendar,
    dump_pfc: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let meta = MetadataFile {
        scenario: report.metadata.scenario.clone(),
        year: report.metadata.year,
        intervals: report.metadata.intervals,
        input_hashes: report.metadata.input_hashes.clone(),
    };
    let mut files = vec![
        (SUMMARY_FILE, summary_to_csv(&summary_rows(report, fleet, calendar))),
        (INTERVALS_FILE, intervals_to_csv(report)),
        (GENERATION_FILE, generation_to_csv(report)),
        (
            METADATA_FILE,
            toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?,
        ),
    ];
    if dump_pfc {
        files.push((PFC_FILE, pfc_to_csv(report)));
    }
    if let Some(text) = dispatch_to_csv(report) {
        files.push((DISPATCH_FILE, text));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Scenario name recorded in a run directory's metadata.
pub fn read_run_name(dir: &Path) -> Result<String> {
    let text = fs::read_to_string(dir.join(METADATA_FILE))?;
    let meta: MetadataFile = toml::from_str(&text)?;
    Ok(meta.scenario)
}
