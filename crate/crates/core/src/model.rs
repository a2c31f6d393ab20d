//! Plant, storage, price and time-series types shared by every market stage,
//! plus the cost and emissions arithmetic and fleet validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of one market interval in hours.
pub const INTERVAL_HOURS: f64 = 0.25;
/// Market intervals per day.
pub const INTERVALS_PER_DAY: usize = 96;

/// Fuel of a thermal unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelKind {
    Lignite,
    HardCoal,
    NaturalGas,
    Oil,
    Nuclear,
    OtherThermal,
}

impl FuelKind {
    pub const ALL: [FuelKind; 6] = [
        FuelKind::Lignite,
        FuelKind::HardCoal,
        FuelKind::NaturalGas,
        FuelKind::Oil,
        FuelKind::Nuclear,
        FuelKind::OtherThermal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FuelKind::Lignite => "lignite",
            FuelKind::HardCoal => "hard_coal",
            FuelKind::NaturalGas => "natural_gas",
            FuelKind::Oil => "oil",
            FuelKind::Nuclear => "nuclear",
            FuelKind::OtherThermal => "other_thermal",
        }
    }

    /// Position in [`FuelKind::ALL`], used for per-fuel arrays.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FuelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FuelKind::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown fuel `{s}`")))
    }
}

/// Static description of one thermal generating unit.
///
/// Ramps are expressed per 15-minute interval, up/down times in intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantUnit {
    pub id: String,
    pub name: String,
    pub fuel: FuelKind,
    pub owner_id: String,
    /// Net electric capacity, MW.
    pub nominal_capacity: f64,
    pub min_stable_output: f64,
    /// Net electric efficiency on a lower heating value basis.
    pub efficiency: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_uptime: u32,
    pub min_downtime: u32,
    /// EUR per start.
    pub startup_cost: f64,
    /// EUR/MWh electric, added on top of fuel and carbon cost.
    pub other_variable_cost: f64,
    /// tCO2 per MWh of thermal fuel input.
    pub thermal_emission_factor: f64,
    /// MW thermal; zero for units without heat extraction.
    pub chp_heat_capacity: f64,
    /// Electric MW forced per thermal MW served (backpressure coupling).
    pub power_to_heat_ratio: f64,
    pub reserve_eligible: bool,
    pub commissioning_year: i32,
}

impl PlantUnit {
    pub fn is_chp(&self) -> bool {
        self.chp_heat_capacity > 0.0
    }
}

/// Storage facility with symmetric charge/discharge power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub id: String,
    pub owner_id: String,
    pub power_capacity: f64,
    pub energy_capacity: f64,
    /// Applied entirely on the charging side.
    pub round_trip_efficiency: f64,
    pub state_of_charge: f64,
}

/// Fuel prices in EUR per MWh thermal and the carbon price in EUR per tonne.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuelPriceSet {
    #[serde(default)]
    pub fuel: BTreeMap<FuelKind, f64>,
    #[serde(rename = "co2")]
    pub co2_price: f64,
}

impl FuelPriceSet {
    pub fn new(co2_price: f64) -> Self {
        FuelPriceSet {
            fuel: BTreeMap::new(),
            co2_price,
        }
    }

    pub fn with(mut self, fuel: FuelKind, price: f64) -> Self {
        self.fuel.insert(fuel, price);
        self
    }

    pub fn price(&self, fuel: FuelKind) -> Result<f64> {
        self.fuel.get(&fuel).copied().ok_or(Error::MissingFuelPrice(fuel))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self
            .fuel
            .iter()
            .map(|(f, p)| (f.as_str(), *p))
            .chain(std::iter::once(("co2", self.co2_price)))
            .find(|(_, p)| !(p.is_finite() && *p >= 0.0));
        match bad {
            Some((name, p)) => Err(Error::Config(format!("price for {name} must be >= 0, got {p}"))),
            None => Ok(()),
        }
    }
}

/// Physical unit of a [`TimeSeries`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesUnit {
    Megawatt,
    MegawattThermal,
    EuroPerMwh,
    Dimensionless,
}

/// Number of quarter-hour intervals in a calendar year.
pub fn intervals_in_year(year: i32) -> usize {
    let days = if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366
    } else {
        365
    };
    days * INTERVALS_PER_DAY
}

/// Start time of interval `index` of `year`, local standard time without
/// daylight-saving shifts.
pub fn interval_start(year: i32, index: usize) -> NaiveDateTime {
    let jan1 = NaiveDate::from_ymd_opt(year, 1, 1)
        .expect("year within chrono range")
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    jan1 + Duration::minutes(15 * index as i64)
}

/// Quarter-hour series starting at 1 January 00:00 of `year`.
///
/// A full series covers the whole year; shorter series cover a prefix of it
/// and are used for desk-scale horizons.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    year: i32,
    unit: SeriesUnit,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(year: i32, unit: SeriesUnit, values: Vec<f64>) -> Result<Self> {
        if !(1..=9999).contains(&year) {
            return Err(Error::Input(format!("year {year} out of range")));
        }
        let max = intervals_in_year(year);
        if values.is_empty() || values.len() > max {
            return Err(Error::Input(format!(
                "series for {year} must hold between 1 and {max} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at interval {i}")));
        }
        Ok(TimeSeries { year, unit, values })
    }

    pub fn full_year(year: i32, unit: SeriesUnit, values: Vec<f64>) -> Result<Self> {
        let expected = intervals_in_year(year);
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                name: format!("{year} series"),
                found: values.len(),
                expected,
            });
        }
        Self::new(year, unit, values)
    }

    pub fn constant(year: i32, unit: SeriesUnit, len: usize, value: f64) -> Result<Self> {
        Self::new(year, unit, vec![value; len])
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn unit(&self) -> SeriesUnit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full_year(&self) -> bool {
        self.values.len() == intervals_in_year(self.year)
    }

    pub fn timestamp(&self, index: usize) -> NaiveDateTime {
        interval_start(self.year, index)
    }

    /// Pointwise transform keeping year and length.
    pub fn map(&self, unit: SeriesUnit, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            year: self.year,
            unit,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn ensure_aligned(&self, other: &TimeSeries, name: &str) -> Result<()> {
        if self.year != other.year || self.len() != other.len() {
            return Err(Error::LengthMismatch {
                name: name.to_string(),
                found: other.len(),
                expected: self.len(),
            });
        }
        Ok(())
    }
}

/// Dynamic per-interval state of a thermal unit.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub online: bool,
    /// Scheduled electric output, MW (reserve activation excluded).
    pub output: f64,
    pub intervals_in_current_state: u32,
    pub committed_heat: f64,
    pub reserved_positive: f64,
    pub reserved_negative: f64,
}

impl PlantState {
    pub fn offline(intervals: u32) -> Self {
        PlantState {
            online: false,
            output: 0.0,
            intervals_in_current_state: intervals.max(1),
            committed_heat: 0.0,
            reserved_positive: 0.0,
            reserved_negative: 0.0,
        }
    }

    pub fn online(output: f64, intervals: u32) -> Self {
        PlantState {
            online: true,
            output,
            intervals_in_current_state: intervals.max(1),
            committed_heat: 0.0,
            reserved_positive: 0.0,
            reserved_negative: 0.0,
        }
    }

    /// True while a heat or reserve commitment keeps the unit running.
    pub fn has_obligation(&self) -> bool {
        self.committed_heat > 0.0 || self.reserved_positive > 0.0 || self.reserved_negative > 0.0
    }
}

/// Marginal electric generation cost in EUR/MWh.
pub fn variable_cost(plant: &PlantUnit, prices: &FuelPriceSet) -> Result<f64> {
    let fuel = prices.price(plant.fuel)?;
    Ok(fuel / plant.efficiency
        + prices.co2_price * plant.thermal_emission_factor / plant.efficiency
        + plant.other_variable_cost)
}

/// tCO2 emitted per MWh of electricity.
pub fn specific_emissions(plant: &PlantUnit) -> f64 {
    plant.thermal_emission_factor / plant.efficiency
}

/// A single invariant violation found by [`validate_fleet`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub unit_id: String,
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unit `{}` field `{}`: {}", self.unit_id, self.field, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidFleet(self.violations))
        }
    }
}

/// Checks every unit against its type invariants and reports duplicate ids.
///
/// Violations are sorted, so the report does not depend on unit order.
pub fn validate_fleet(plants: &[PlantUnit], storage: &[StorageUnit]) -> ValidationReport {
    let mut out = Vec::new();
    let mut push = |id: &str, field: &'static str, message: String| {
        out.push(Violation {
            unit_id: id.to_string(),
            field,
            message,
        })
    };

    for p in plants {
        let id = p.id.as_str();
        let numbers = [
            ("nominal_capacity", p.nominal_capacity),
            ("min_stable_output", p.min_stable_output),
            ("efficiency", p.efficiency),
            ("ramp_up", p.ramp_up),
            ("ramp_down", p.ramp_down),
            ("startup_cost", p.startup_cost),
            ("other_variable_cost", p.other_variable_cost),
            ("thermal_emission_factor", p.thermal_emission_factor),
            ("chp_heat_capacity", p.chp_heat_capacity),
            ("power_to_heat_ratio", p.power_to_heat_ratio),
        ];
        let mut finite = true;
        for (field, v) in numbers {
            if !v.is_finite() {
                push(id, field, format!("must be finite, got {v}"));
                finite = false;
            }
        }
        if id.is_empty() {
            push(id, "id", "must not be empty".into());
        }
        if !finite {
            continue;
        }
        if p.min_stable_output <= 0.0 {
            push(
                id,
                "min_stable_output",
                format!("must be > 0, got {}", p.min_stable_output),
            );
        }
        if p.min_stable_output > p.nominal_capacity {
            push(
                id,
                "min_stable_output",
                format!(
                    "{} exceeds nominal_capacity {}",
                    p.min_stable_output, p.nominal_capacity
                ),
            );
        }
        if !(p.efficiency > 0.0 && p.efficiency <= 1.0) {
            push(id, "efficiency", format!("must lie in (0, 1], got {}", p.efficiency));
        }
        if p.ramp_up <= 0.0 {
            push(id, "ramp_up", format!("must be > 0, got {}", p.ramp_up));
        }
        if p.ramp_down <= 0.0 {
            push(id, "ramp_down", format!("must be > 0, got {}", p.ramp_down));
        }
        if p.min_uptime < 1 {
            push(id, "min_uptime", "must be >= 1".into());
        }
        if p.min_downtime < 1 {
            push(id, "min_downtime", "must be >= 1".into());
        }
        if p.startup_cost < 0.0 {
            push(id, "startup_cost", format!("must be >= 0, got {}", p.startup_cost));
        }
        if p.other_variable_cost < 0.0 {
            push(
                id,
                "other_variable_cost",
                format!("must be >= 0, got {}", p.other_variable_cost),
            );
        }
        if p.thermal_emission_factor < 0.0 {
            push(
                id,
                "thermal_emission_factor",
                format!("must be >= 0, got {}", p.thermal_emission_factor),
            );
        }
        if p.chp_heat_capacity < 0.0 {
            push(
                id,
                "chp_heat_capacity",
                format!("must be >= 0, got {}", p.chp_heat_capacity),
            );
        }
        if p.power_to_heat_ratio < 0.0 {
            push(
                id,
                "power_to_heat_ratio",
                format!("must be >= 0, got {}", p.power_to_heat_ratio),
            );
        } else if (p.power_to_heat_ratio == 0.0) != (p.chp_heat_capacity == 0.0) {
            push(
                id,
                "power_to_heat_ratio",
                "must be zero exactly when chp_heat_capacity is zero".into(),
            );
        }
    }

    for s in storage {
        let id = s.id.as_str();
        if id.is_empty() {
            push(id, "id", "must not be empty".into());
        }
        if !(s.power_capacity.is_finite() && s.power_capacity > 0.0) {
            push(id, "power_capacity", format!("must be > 0, got {}", s.power_capacity));
        }
        if !(s.energy_capacity.is_finite() && s.energy_capacity >= 0.0) {
            push(
                id,
                "energy_capacity",
                format!("must be >= 0, got {}", s.energy_capacity),
            );
        }
        if !(s.round_trip_efficiency > 0.0 && s.round_trip_efficiency <= 1.0) {
            push(
                id,
                "round_trip_efficiency",
                format!("must lie in (0, 1], got {}", s.round_trip_efficiency),
            );
        }
        if !(s.state_of_charge >= 0.0 && s.state_of_charge <= s.energy_capacity) {
            push(
                id,
                "state_of_charge",
                format!("must lie in [0, {}], got {}", s.energy_capacity, s.state_of_charge),
            );
        }
    }

    let mut seen = BTreeSet::new();
    let mut duplicated = BTreeSet::new();
    for id in plants.iter().map(|p| &p.id).chain(storage.iter().map(|s| &s.id)) {
        if !seen.insert(id) {
            duplicated.insert(id);
        }
    }
    for id in duplicated {
        push(id, "id", "duplicate unit id".into());
    }

    out.sort();
    ValidationReport { violations: out }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn unit(id: &str) -> PlantUnit {
        PlantUnit {
            id: id.to_string(),
            name: format!("Unit {id}"),
            fuel: FuelKind::HardCoal,
            owner_id: "o1".into(),
            nominal_capacity: 500.0,
            min_stable_output: 200.0,
            efficiency: 0.4,
            ramp_up: 100.0,
            ramp_down: 100.0,
            min_uptime: 4,
            min_downtime: 8,
            startup_cost: 50_000.0,
            other_variable_cost: 0.0,
            thermal_emission_factor: 0.34,
            chp_heat_capacity: 0.0,
            power_to_heat_ratio: 0.0,
            reserve_eligible: true,
            commissioning_year: 1990,
        }
    }

    fn priced(plant: &PlantUnit, eff: f64, fuel: f64, ef: f64, co2: f64, other: f64) -> f64 {
        let mut p = plant.clone();
        p.efficiency = eff;
        p.thermal_emission_factor = ef;
        p.other_variable_cost = other;
        let prices = FuelPriceSet::new(co2).with(p.fuel, fuel);
        variable_cost(&p, &prices).unwrap()
    }

    #[test]
    fn variable_cost_examples() {
        let u = unit("a");
        assert!((priced(&u, 0.4, 8.0, 0.34, 5.0, 0.0) - 24.25).abs() < 1e-12);
        assert!((priced(&u, 1.0, 10.0, 0.0, 123.0, 0.0) - 10.0).abs() < 1e-12);
        assert!((priced(&u, 0.5, 0.0, 0.2, 25.0, 1.0) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn variable_cost_missing_fuel() {
        let u = unit("a");
        let prices = FuelPriceSet::new(5.0).with(FuelKind::Lignite, 3.0);
        let err = variable_cost(&u, &prices).unwrap_err();
        assert!(err.to_string().contains("hard_coal"));
    }

    #[test]
    fn specific_emission_examples() {
        let mut u = unit("a");
        u.thermal_emission_factor = 0.4;
        u.efficiency = 0.4;
        assert!((specific_emissions(&u) - 1.0).abs() < 1e-12);
        u.thermal_emission_factor = 0.0;
        u.efficiency = 0.33;
        assert_eq!(specific_emissions(&u), 0.0);
        u.thermal_emission_factor = 0.34;
        u.efficiency = 0.45;
        assert!((specific_emissions(&u) - 0.7556).abs() < 1e-4);
    }

    #[test]
    fn validation_examples() {
        assert!(validate_fleet(&[], &[]).is_empty());

        let mut bad = unit("a");
        bad.min_stable_output = 600.0;
        let report = validate_fleet(&[bad], &[]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "min_stable_output");

        let report = validate_fleet(&[unit("x"), unit("x")], &[]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "id");
        assert!(report.violations[0].message.contains("duplicate"));
    }

    #[test]
    fn chp_ratio_must_match_heat_capacity() {
        let mut u = unit("c");
        u.chp_heat_capacity = 100.0;
        let r = validate_fleet(&[u.clone()], &[]);
        assert_eq!(r.violations[0].field, "power_to_heat_ratio");
        u.power_to_heat_ratio = 0.5;
        assert!(validate_fleet(&[u], &[]).is_empty());
    }

    #[test]
    fn storage_soc_bounds() {
        let s = StorageUnit {
            id: "s".into(),
            owner_id: "o".into(),
            power_capacity: 10.0,
            energy_capacity: 40.0,
            round_trip_efficiency: 0.8,
            state_of_charge: 41.0,
        };
        let r = validate_fleet(&[], &[s]);
        assert_eq!(r.violations[0].field, "state_of_charge");
    }

    #[test]
    fn series_lengths() {
        assert_eq!(intervals_in_year(2017), 35_040);
        assert_eq!(intervals_in_year(2020), 35_136);
        assert!(TimeSeries::full_year(2017, SeriesUnit::Megawatt, vec![0.0; 35_039]).is_err());
        assert!(TimeSeries::new(2017, SeriesUnit::Megawatt, vec![]).is_err());
        assert!(TimeSeries::new(2017, SeriesUnit::Megawatt, vec![f64::NAN]).is_err());
        let s = TimeSeries::new(2017, SeriesUnit::Megawatt, vec![1.0; 96]).unwrap();
        assert_eq!(s.timestamp(33).to_string(), "2017-01-01 08:15:00");
    }

    proptest! {
        #[test]
        fn variable_cost_monotone(
            eff in 0.2f64..0.9, fuel in 0.0f64..50.0, ef in 0.0f64..0.5,
            co2 in 0.0f64..100.0, other in 0.0f64..10.0, bump in 0.01f64..5.0,
        ) {
            let u = unit("p");
            let base = priced(&u, eff, fuel, ef, co2, other);
            prop_assert!(base >= 0.0);
            prop_assert!(priced(&u, eff, fuel + bump, ef, co2, other) >= base);
            prop_assert!(priced(&u, eff, fuel, ef + bump, co2, other) >= base);
            prop_assert!(priced(&u, eff, fuel, ef, co2 + bump, other) >= base);
            prop_assert!(priced(&u, eff, fuel, ef, co2, other + bump) >= base);
            if fuel > 0.0 || ef * co2 > 0.0 {
                prop_assert!(priced(&u, eff + 0.05, fuel, ef, co2, other) < base);
            }
        }

        #[test]
        fn emission_order_scale_invariant(
            raw in proptest::collection::vec((0.0f64..1.0, 0.2f64..0.6), 1..12),
            k in 0.1f64..10.0,
        ) {
            let units: Vec<PlantUnit> = raw.iter().enumerate().map(|(i, &(ef, eff))| {
                let mut u = unit(&format!("u{i:02}"));
                u.thermal_emission_factor = ef;
                u.efficiency = eff;
                u
            }).collect();
            let order = |us: &[PlantUnit]| {
                let mut idx: Vec<usize> = (0..us.len()).collect();
                idx.sort_by(|&a, &b| specific_emissions(&us[a]).total_cmp(&specific_emissions(&us[b])).then(a.cmp(&b)));
                idx
            };
            let scaled: Vec<PlantUnit> = units.iter().map(|u| {
                let mut s = u.clone();
                s.thermal_emission_factor *= k;
                s
            }).collect();
            for (u, s) in units.iter().zip(&scaled) {
                let expect = specific_emissions(u) * k;
                prop_assert!((specific_emissions(s) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
            prop_assert_eq!(order(&units), order(&scaled));
        }

        #[test]
        fn validation_idempotent_and_order_insensitive(
            mins in proptest::collection::vec(-50.0f64..700.0, 0..8),
            dup in any::<bool>(),
        ) {
            let mut units: Vec<PlantUnit> = mins.iter().enumerate().map(|(i, &m)| {
                let mut u = unit(&format!("u{i}"));
                u.min_stable_output = m;
                u
            }).collect();
            if dup && !units.is_empty() {
                units.push(units[0].clone());
            }
            let a = validate_fleet(&units, &[]);
            prop_assert_eq!(&a, &validate_fleet(&units, &[]));
            let mut rev = units.clone();
            rev.reverse();
            prop_assert_eq!(a, validate_fleet(&rev, &[]));
        }
    }
}
