//! Deterministic synthetic fleets and series for tests, demos and the
//! shipped example data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{MarketConfig, SeriesSet};
use crate::error::Result;
use crate::model::{FuelKind, FuelPriceSet, PlantUnit, SeriesUnit, StorageUnit, TimeSeries, INTERVALS_PER_DAY};

/// Fuel prices in EUR/MWh_th and a carbon price of 6 EUR/t.
pub fn reference_prices() -> FuelPriceSet {
    FuelPriceSet::new(6.0)
        .with(FuelKind::Lignite, 1.5)
        .with(FuelKind::HardCoal, 9.0)
        .with(FuelKind::NaturalGas, 20.0)
        .with(FuelKind::Oil, 35.0)
        .with(FuelKind::Nuclear, 3.0)
        .with(FuelKind::OtherThermal, 10.0)
}

/// Reference prices with reserve requirements of 4 % (positive) and 3 %
/// (negative) of `capacity_mw`, rounded to whole MW.
pub fn fixture_market(capacity_mw: f64) -> MarketConfig {
    let mut market = MarketConfig::new(reference_prices());
    market.reserve.positive = (0.04 * capacity_mw).round();
    market.reserve.negative = (0.03 * capacity_mw).round();
    market
}

/// Typical (efficiency, emission factor, other cost) per fuel.
fn fuel_traits(fuel: FuelKind) -> (f64, f64, f64) {
    match fuel {
        FuelKind::Lignite => (0.38, 0.40, 4.0),
        FuelKind::HardCoal => (0.40, 0.34, 3.5),
        FuelKind::NaturalGas => (0.52, 0.20, 2.0),
        FuelKind::Oil => (0.36, 0.28, 3.0),
        FuelKind::Nuclear => (0.33, 0.0, 8.0),
        FuelKind::OtherThermal => (0.30, 0.10, 5.0),
    }
}

#[allow(clippy::too_many_arguments)]
fn plant(
    id: &str,
    fuel: FuelKind,
    owner: &str,
    capacity: f64,
    min_share: f64,
    ramp_share: f64,
    up_down: (u32, u32),
    startup_per_mw: f64,
) -> PlantUnit {
    let (efficiency, ef, other) = fuel_traits(fuel);
    PlantUnit {
        id: id.to_string(),
        name: id.replace('_', " "),
        fuel,
        owner_id: owner.to_string(),
        nominal_capacity: capacity,
        min_stable_output: capacity * min_share,
        efficiency,
        ramp_up: capacity * ramp_share,
        ramp_down: capacity * ramp_share,
        min_uptime: up_down.0,
        min_downtime: up_down.1,
        startup_cost: capacity * startup_per_mw,
        other_variable_cost: other,
        thermal_emission_factor: ef,
        chp_heat_capacity: 0.0,
        power_to_heat_ratio: 0.0,
        reserve_eligible: true,
        commissioning_year: 1990,
    }
}

/// Fixed ten-unit fleet of 7 GW across four owners, two of the units with
/// heat extraction.
pub fn ten_unit_fleet() -> Vec<PlantUnit> {
    let mut fleet = vec![
        plant("nuc_1", FuelKind::Nuclear, "atom", 1200.0, 0.5, 0.02, (96, 48), 100.0),
        plant("nuc_2", FuelKind::Nuclear, "atom", 1200.0, 0.5, 0.02, (96, 48), 100.0),
        plant("lig_1", FuelKind::Lignite, "brown", 900.0, 0.4, 0.04, (32, 24), 70.0),
        plant("lig_2", FuelKind::Lignite, "brown", 900.0, 0.4, 0.04, (32, 24), 70.0),
        plant("coal_1", FuelKind::HardCoal, "black", 600.0, 0.35, 0.08, (16, 16), 60.0),
        plant("coal_2", FuelKind::HardCoal, "black", 600.0, 0.35, 0.08, (16, 16), 60.0),
        plant("coal_3", FuelKind::HardCoal, "black", 600.0, 0.35, 0.08, (16, 16), 60.0),
        plant("ccgt_1", FuelKind::NaturalGas, "gas", 400.0, 0.4, 0.3, (8, 8), 40.0),
        plant("ccgt_2", FuelKind::NaturalGas, "gas", 400.0, 0.4, 0.3, (8, 8), 40.0),
        plant("ocgt_1", FuelKind::NaturalGas, "gas", 200.0, 0.2, 1.0, (1, 1), 20.0),
    ];
    fleet[2].efficiency = 0.35;
    fleet[5].chp_heat_capacity = 300.0;
    fleet[5].power_to_heat_ratio = 0.8;
    fleet[7].chp_heat_capacity = 250.0;
    fleet[7].power_to_heat_ratio = 1.0;
    fleet[7].efficiency = 0.55;
    fleet
}

/// `n` units with randomised sizes and technical constraints.
pub fn random_fleet(n: usize, seed: u64) -> Vec<PlantUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let fuel = FuelKind::ALL[rng.gen_range(0..FuelKind::ALL.len())];
            let capacity = rng.gen_range(10..=100) as f64 * 10.0;
            let owner = format!("owner_{}", rng.gen_range(1..=4));
            let mut u = plant(
                &format!("u{i:02}"),
                fuel,
                &owner,
                capacity,
                rng.gen_range(0.15..0.6),
                rng.gen_range(0.03..1.0),
                (rng.gen_range(1..=32), rng.gen_range(1..=32)),
                rng.gen_range(20.0..100.0),
            );
            u.efficiency = (u.efficiency + rng.gen_range(-0.05..0.05)).clamp(0.25, 0.6);
            u.reserve_eligible = rng.gen_bool(0.7);
            if rng.gen_bool(0.25) {
                u.chp_heat_capacity = (capacity * rng.gen_range(0.2..0.8)).round();
                u.power_to_heat_ratio = rng.gen_range(0.5..1.5);
            }
            u.commissioning_year = rng.gen_range(1970..=2015);
            u
        })
        .collect()
}

pub fn pumped_storage(id: &str, power_mw: f64) -> StorageUnit {
    StorageUnit {
        id: id.to_string(),
        owner_id: "hydro".into(),
        power_capacity: power_mw,
        energy_capacity: power_mw * 6.0,
        round_trip_efficiency: 0.75,
        state_of_charge: power_mw * 3.0,
    }
}

/// Sizes of the synthetic series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesShape {
    pub peak_demand_mw: f64,
    pub wind_mw: f64,
    pub solar_mw: f64,
    pub peak_heat_mwth: f64,
    /// Scale of the reserve activation signal.
    pub activation_mw: f64,
    pub net_exports_mw: f64,
}

impl SeriesShape {
    /// Proportions that suit a fleet of `capacity_mw`.
    pub fn for_capacity(capacity_mw: f64) -> Self {
        SeriesShape {
            peak_demand_mw: 0.85 * capacity_mw,
            wind_mw: 0.35 * capacity_mw,
            solar_mw: 0.25 * capacity_mw,
            peak_heat_mwth: 0.05 * capacity_mw,
            activation_mw: 0.02 * capacity_mw,
            net_exports_mw: 0.02 * capacity_mw,
        }
    }
}

/// Demand with daily and weekly cycles, wind as a bounded random walk,
/// solar as a clipped daylight arch, seasonal heat demand and a noisy
/// activation signal.
pub fn synthetic_series(year: i32, len: usize, shape: SeriesShape, seed: u64) -> Result<SeriesSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut demand = Vec::with_capacity(len);
    let mut wind = Vec::with_capacity(len);
    let mut solar = Vec::with_capacity(len);
    let mut heat = Vec::with_capacity(len);
    let mut activation = Vec::with_capacity(len);
    let mut exports = Vec::with_capacity(len);
    let mut wind_cf: f64 = rng.gen_range(0.1..0.5);
    let mut act: f64 = 0.0;
    for t in 0..len {
        let day = t / INTERVALS_PER_DAY;
        let hour = (t % INTERVALS_PER_DAY) as f64 / 4.0;
        let season = (2.0 * PI * day as f64 / 365.0).cos();
        // 1 January 2017 is a Sunday; other years shift the weekend a little
        let weekend = matches!(day % 7, 0 | 6);
        let daily = 0.5 - 0.5 * (2.0 * PI * (hour - 4.0) / 24.0).cos();
        let level = 0.62 + 0.25 * daily + 0.08 * season - if weekend { 0.1 } else { 0.0 };
        demand.push(shape.peak_demand_mw * (level + rng.gen_range(-0.02..0.02)).clamp(0.3, 1.0));

        wind_cf = (wind_cf + rng.gen_range(-0.03..0.03) + 0.002 * (0.3 - wind_cf) + 0.001 * season).clamp(0.0, 1.0);
        wind.push(shape.wind_mw * wind_cf);

        let daylight = (PI * (hour - 6.0) / 12.0).sin().max(0.0);
        let clouds = rng.gen_range(0.6..1.0);
        solar.push(shape.solar_mw * daylight * (0.7 - 0.3 * season) * clouds);

        heat.push(shape.peak_heat_mwth * (0.55 + 0.4 * season + 0.05 * daily).max(0.0));

        act = 0.8 * act + rng.gen_range(-0.5..0.5);
        activation.push(shape.activation_mw * act.clamp(-1.0, 1.0));
        exports.push(shape.net_exports_mw * (2.0 * PI * hour / 24.0).sin());
    }
    let mut set = SeriesSet::from_demand(TimeSeries::new(year, SeriesUnit::Megawatt, demand)?);
    set.vre
        .insert("wind".into(), TimeSeries::new(year, SeriesUnit::Megawatt, wind)?);
    set.vre
        .insert("solar".into(), TimeSeries::new(year, SeriesUnit::Megawatt, solar)?);
    set.heat_demand = TimeSeries::new(year, SeriesUnit::MegawattThermal, heat)?;
    set.activation = TimeSeries::new(year, SeriesUnit::Megawatt, activation)?;
    set.net_exports = TimeSeries::new(year, SeriesUnit::Megawatt, exports)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_fleet;

    #[test]
    fn fixtures_are_valid_and_reproducible() {
        assert!(validate_fleet(&ten_unit_fleet(), &[]).is_empty());
        let fleet = random_fleet(20, 7);
        assert!(validate_fleet(&fleet, &[pumped_storage("p", 100.0)]).is_empty());
        assert_eq!(fleet, random_fleet(20, 7));
        let shape = SeriesShape::for_capacity(7000.0);
        let a = synthetic_series(2017, 96 * 7, shape, 1).unwrap();
        assert_eq!(a, synthetic_series(2017, 96 * 7, shape, 1).unwrap());
        assert!(a.validate().is_ok());
        assert!(a.demand.values().iter().all(|&d| d > 0.0));
    }
}
