//! Scenario transforms: emissions-ordered decommissioning, generic capacity
//! additions and linear scaling of renewable profiles.

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use serde::{Deserialize, Serialize};

use crate::engine::SeriesSet;
use crate::error::{Error, Result};
use crate::forecast::PriceBounds;
use crate::model::{
    intervals_in_year, specific_emissions, FuelKind, FuelPriceSet, PlantUnit, SeriesUnit, TimeSeries, INTERVAL_HOURS,
};
use crate::reserve::ReserveRequirement;

/// Parameters for units created by [`add_generic_capacity`]. Shares are
/// relative to the unit size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitTemplate {
    pub owner_id: String,
    pub efficiency: f64,
    pub min_stable_share: f64,
    /// Ramp per interval as a share of nominal capacity.
    pub ramp_share: f64,
    pub min_uptime: u32,
    pub min_downtime: u32,
    /// EUR per MW of nominal capacity and start.
    pub startup_cost_per_mw: f64,
    pub other_variable_cost: f64,
    pub thermal_emission_factor: f64,
    pub reserve_eligible: bool,
    pub commissioning_year: i32,
}

impl Default for UnitTemplate {
    /// Combined-cycle gas unit.
    fn default() -> Self {
        UnitTemplate {
            owner_id: "new_entrant".into(),
            efficiency: 0.58,
            min_stable_share: 0.4,
            ramp_share: 1.0,
            min_uptime: 2,
            min_downtime: 2,
            startup_cost_per_mw: 30.0,
            other_variable_cost: 2.0,
            thermal_emission_factor: 0.202,
            reserve_eligible: true,
            commissioning_year: 2020,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityAddition {
    pub fuel: FuelKind,
    pub total_gw: f64,
    pub unit_size_mw: f64,
    #[serde(default)]
    pub template: UnitTemplate,
}

/// How one renewable source (or `"all"`) is rescaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VreScaling {
    pub source: String,
    #[serde(default)]
    pub factor: Option<f64>,
    #[serde(default)]
    pub ref_gw: Option<f64>,
    #[serde(default)]
    pub target_gw: Option<f64>,
}

impl VreScaling {
    fn factor(&self) -> Result<f64> {
        match (self.factor, self.ref_gw, self.target_gw) {
            (Some(f), None, None) if f.is_finite() && f >= 0.0 => Ok(f),
            (None, Some(r), Some(t)) if r > 0.0 && t.is_finite() && t >= 0.0 => Ok(t / r),
            _ => Err(Error::Config(format!(
                "vre scaling for `{}` needs either factor >= 0 or ref_gw > 0 with target_gw >= 0",
                self.source
            ))),
        }
    }
}

/// A scenario definition as read from its TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub prices: FuelPriceSet,
    #[serde(default)]
    pub reserve: ReserveRequirement,
    #[serde(default)]
    pub bounds: PriceBounds,
    #[serde(default = "default_heat_penalty")]
    pub unserved_heat_penalty: f64,
    /// Extra non-working days for the peak definition, `YYYY-MM-DD`.
    #[serde(default)]
    pub holidays: Vec<chrono::NaiveDate>,
    /// Rescales the demand series to this annual energy.
    #[serde(default)]
    pub demand_twh: Option<f64>,
    /// Capacity to retire per fuel, GW.
    #[serde(default)]
    pub decommission: BTreeMap<FuelKind, f64>,
    #[serde(default)]
    pub add_capacity: Vec<CapacityAddition>,
    #[serde(default)]
    pub vre_scaling: Vec<VreScaling>,
}

fn default_heat_penalty() -> f64 {
    crate::heat::DEFAULT_UNSERVED_HEAT_PENALTY
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.prices.validate()?;
        PriceBounds::new(self.bounds.floor, self.bounds.cap)?;
        if !(self.reserve.positive >= 0.0 && self.reserve.negative >= 0.0) {
            return Err(Error::Config("reserve requirements must be >= 0".into()));
        }
        if !(self.unserved_heat_penalty.is_finite() && self.unserved_heat_penalty >= 0.0) {
            return Err(Error::Config("unserved_heat_penalty must be >= 0".into()));
        }
        if let Some(d) = self.demand_twh {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!("demand_twh must be >= 0, got {d}")));
            }
        }
        for (fuel, gw) in &self.decommission {
            if !(gw.is_finite() && *gw >= 0.0) {
                return Err(Error::Config(format!("decommission target for {fuel} must be >= 0")));
            }
        }
        for add in &self.add_capacity {
            if !(add.total_gw.is_finite() && add.total_gw >= 0.0) {
                return Err(Error::Config(format!(
                    "add_capacity total for {} must be >= 0",
                    add.fuel
                )));
            }
            if !(add.unit_size_mw.is_finite() && add.unit_size_mw > 0.0) {
                return Err(Error::Config("unit_size_mw must be > 0".into()));
            }
        }
        for scaling in &self.vre_scaling {
            scaling.factor()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decommissioning {
    pub fleet: Vec<PlantUnit>,
    /// Removed units in removal order.
    pub removed: Vec<PlantUnit>,
}

impl Decommissioning {
    pub fn removed_mw(&self) -> f64 {
        self.removed.iter().map(|u| u.nominal_capacity).sum()
    }
}

/// Retires whole units of `fuel`, dirtiest first (ties by id), until at
/// least `target_gw` is gone. The last unit may overshoot the target.
pub fn apply_decommissioning(fleet: &[PlantUnit], fuel: FuelKind, target_gw: f64) -> Result<Decommissioning> {
    let installed_mw: f64 = fleet
        .iter()
        .filter(|u| u.fuel == fuel)
        .map(|u| u.nominal_capacity)
        .sum();
    let target_mw = target_gw * 1000.0;
    if target_mw > installed_mw + 1e-6 {
        return Err(Error::TargetExceedsInstalled {
            fuel,
            target_gw,
            installed_gw: installed_mw / 1000.0,
        });
    }
    let mut candidates: Vec<&PlantUnit> = fleet.iter().filter(|u| u.fuel == fuel).collect();
    candidates.sort_by(|a, b| {
        specific_emissions(b)
            .total_cmp(&specific_emissions(a))
            .then_with(|| a.id.cmp(&b.id))
    });

    let mut removed_mw = 0.0;
    let mut gone = BTreeSet::new();
    let mut removed = Vec::new();
    for unit in candidates {
        if removed_mw >= target_mw - 1e-6 {
            break;
        }
        removed_mw += unit.nominal_capacity;
        gone.insert(unit.id.as_str());
        removed.push(unit.clone());
    }
    if removed_mw > target_mw + 1e-6 {
        info!(
            "decommissioned {:.1} MW of {fuel} against a {:.1} MW target",
            removed_mw, target_mw
        );
    }
    Ok(Decommissioning {
        fleet: fleet
            .iter()
            .filter(|u| !gone.contains(u.id.as_str()))
            .cloned()
            .collect(),
        removed,
    })
}

/// Appends `ceil(total / unit_size)` identical units built from `template`.
pub fn add_generic_capacity(
    fleet: &[PlantUnit],
    fuel: FuelKind,
    total_gw: f64,
    unit_size_mw: f64,
    template: &UnitTemplate,
) -> Result<Vec<PlantUnit>> {
    if !(unit_size_mw.is_finite() && unit_size_mw > 0.0) {
        return Err(Error::Config(format!("unit size must be > 0, got {unit_size_mw}")));
    }
    let total_mw = total_gw * 1000.0;
    let count = (total_mw / unit_size_mw - 1e-9).ceil().max(0.0) as usize;
    let installed = count as f64 * unit_size_mw;
    if installed > total_mw + 1e-6 {
        info!("adding {installed:.1} MW of {fuel} for a {total_mw:.1} MW target");
    }

    let taken: BTreeSet<&str> = fleet.iter().map(|u| u.id.as_str()).collect();
    let mut out = fleet.to_vec();
    let mut serial = 0usize;
    for _ in 0..count {
        let id = loop {
            serial += 1;
            let candidate = format!("{fuel}_new_{serial:03}");
            if !taken.contains(candidate.as_str()) {
                break candidate;
            }
        };
        out.push(PlantUnit {
            name: format!("Generic {fuel} {serial}"),
            id,
            fuel,
            owner_id: template.owner_id.clone(),
            nominal_capacity: unit_size_mw,
            min_stable_output: template.min_stable_share * unit_size_mw,
            efficiency: template.efficiency,
            ramp_up: template.ramp_share * unit_size_mw,
            ramp_down: template.ramp_share * unit_size_mw,
            min_uptime: template.min_uptime,
            min_downtime: template.min_downtime,
            startup_cost: template.startup_cost_per_mw * unit_size_mw,
            other_variable_cost: template.other_variable_cost,
            thermal_emission_factor: template.thermal_emission_factor,
            chp_heat_capacity: 0.0,
            power_to_heat_ratio: 0.0,
            reserve_eligible: template.reserve_eligible,
            commissioning_year: template.commissioning_year,
        });
    }
    Ok(out)
}

/// Rescales a feed-in profile from `installed_ref_gw` to `installed_target_gw`.
pub fn scale_vre(profile: &TimeSeries, installed_ref_gw: f64, installed_target_gw: f64) -> Result<TimeSeries> {
    if !(installed_ref_gw.is_finite() && installed_ref_gw > 0.0) {
        return Err(Error::Config(format!(
            "reference installed capacity must be > 0, got {installed_ref_gw}"
        )));
    }
    let factor = installed_target_gw / installed_ref_gw;
    Ok(profile.map(profile.unit(), |v| v * factor))
}

/// Everything a scenario changed.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub fleet: Vec<PlantUnit>,
    pub series: SeriesSet,
    pub removed: Vec<PlantUnit>,
    pub added: Vec<String>,
}

/// Applies decommissioning, additions and series rescaling in that order.
pub fn apply_scenario(spec: &ScenarioSpec, fleet: &[PlantUnit], series: &SeriesSet) -> Result<ScenarioOutcome> {
    let mut current = fleet.to_vec();
    let mut removed = Vec::new();
    for (&fuel, &gw) in &spec.decommission {
        let step = apply_decommissioning(&current, fuel, gw)?;
        current = step.fleet;
        removed.extend(step.removed);
    }
    let before: BTreeSet<String> = current.iter().map(|u| u.id.clone()).collect();
    for add in &spec.add_capacity {
        current = add_generic_capacity(&current, add.fuel, add.total_gw, add.unit_size_mw, &add.template)?;
    }
    let added = current
        .iter()
        .filter(|u| !before.contains(&u.id))
        .map(|u| u.id.clone())
        .collect();

    let mut series = series.clone();
    for scaling in &spec.vre_scaling {
        let factor = scaling.factor()?;
        let mut hit = false;
        for (name, profile) in series.vre.iter_mut() {
            if scaling.source == "all" || scaling.source == *name {
                *profile = scale_vre(profile, 1.0, factor)?;
                hit = true;
            }
        }
        if !hit {
            return Err(Error::Config(format!("no renewable series named `{}`", scaling.source)));
        }
    }
    if let Some(twh) = spec.demand_twh {
        let demand = &series.demand;
        let energy_twh: f64 = demand.values().iter().sum::<f64>() * INTERVAL_HOURS / 1e6;
        let share = demand.len() as f64 / intervals_in_year(demand.year()) as f64;
        if energy_twh <= 0.0 {
            return Err(Error::Config("cannot rescale an all-zero demand series".into()));
        }
        let factor = twh * share / energy_twh;
        series.demand = demand.map(SeriesUnit::Megawatt, |v| v * factor);
    }
    Ok(ScenarioOutcome {
        fleet: current,
        series,
        removed,
        added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::unit;
    use proptest::prelude::*;

    fn lignite(id: &str, gw: f64, emissions: f64) -> PlantUnit {
        let mut u = unit(id);
        u.fuel = FuelKind::Lignite;
        u.nominal_capacity = gw * 1000.0;
        u.min_stable_output = gw * 400.0;
        u.efficiency = 1.0;
        u.thermal_emission_factor = emissions;
        u
    }

    #[test]
    fn removes_dirtiest_first_with_overshoot() {
        let fleet = vec![lignite("A", 1.0, 1.2), lignite("B", 1.0, 1.1), lignite("C", 1.0, 0.9)];
        let d = apply_decommissioning(&fleet, FuelKind::Lignite, 1.5).unwrap();
        let ids: Vec<_> = d.removed.iter().map(|u| u.id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert!((d.removed_mw() - 1500.0 - 500.0).abs() < 1e-9);
        assert_eq!(d.fleet.len(), 1);
    }

    #[test]
    fn zero_target_and_ties() {
        let fleet = vec![lignite("z", 1.0, 1.0), lignite("a", 1.0, 1.0)];
        assert_eq!(
            apply_decommissioning(&fleet, FuelKind::Lignite, 0.0).unwrap().fleet,
            fleet
        );
        let d = apply_decommissioning(&fleet, FuelKind::Lignite, 0.5).unwrap();
        assert_eq!(d.removed[0].id, "a");
    }

    #[test]
    fn target_above_installed_is_an_error() {
        let fleet = vec![lignite("a", 1.0, 1.0)];
        assert!(matches!(
            apply_decommissioning(&fleet, FuelKind::Lignite, 1.5),
            Err(Error::TargetExceedsInstalled { .. })
        ));
        let all = apply_decommissioning(&fleet, FuelKind::Lignite, 1.0).unwrap();
        assert!(all.fleet.is_empty());
    }

    #[test]
    fn generic_capacity_counts() {
        let t = UnitTemplate::default();
        let added = add_generic_capacity(&[], FuelKind::NaturalGas, 20.0, 500.0, &t).unwrap();
        assert_eq!(added.len(), 40);
        assert!(add_generic_capacity(&[], FuelKind::NaturalGas, 0.0, 500.0, &t)
            .unwrap()
            .is_empty());
        let three = add_generic_capacity(&[], FuelKind::NaturalGas, 1.2, 500.0, &t).unwrap();
        assert_eq!(three.len(), 3);
        let u = &three[0];
        assert_eq!(
            (u.min_stable_output, u.ramp_up, u.min_uptime, u.startup_cost),
            (200.0, 500.0, 2, 15_000.0)
        );
        assert!(crate::model::validate_fleet(&three, &[]).is_empty());
        assert!(add_generic_capacity(&[], FuelKind::NaturalGas, 1.0, 0.0, &t).is_err());
    }

    #[test]
    fn generated_ids_avoid_collisions() {
        let t = UnitTemplate::default();
        let first = add_generic_capacity(&[], FuelKind::NaturalGas, 1.0, 500.0, &t).unwrap();
        let second = add_generic_capacity(&first, FuelKind::NaturalGas, 1.0, 500.0, &t).unwrap();
        assert!(crate::model::validate_fleet(&second, &[]).is_empty());
    }

    #[test]
    fn vre_scaling() {
        let s = TimeSeries::new(2017, SeriesUnit::Megawatt, vec![0.0, 1.0, 2.5]).unwrap();
        assert_eq!(scale_vre(&s, 50.0, 50.0).unwrap(), s);
        assert_eq!(scale_vre(&s, 50.0, 100.0).unwrap().values(), &[0.0, 2.0, 5.0]);
        let z = TimeSeries::new(2017, SeriesUnit::Megawatt, vec![0.0; 3]).unwrap();
        assert_eq!(scale_vre(&z, 10.0, 30.0).unwrap(), z);
        assert!(scale_vre(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn scenario_file_round_trip() {
        let text = r#"
            name = "S3"
            holidays = ["2017-12-25"]
            [prices]
            co2 = 5.8
            [prices.fuel]
            natural_gas = 17.0
            [decommission]
            lignite = 10.9
            [[add_capacity]]
            fuel = "natural_gas"
            total_gw = 20.0
            unit_size_mw = 500.0
            [[vre_scaling]]
            source = "all"
            ref_gw = 91.9
            target_gw = 187.5
        "#;
        let spec = ScenarioSpec::parse(text).unwrap();
        assert_eq!(spec.decommission[&FuelKind::Lignite], 10.9);
        assert_eq!(spec.bounds, PriceBounds::default());
        assert_eq!(spec.add_capacity[0].template, UnitTemplate::default());
        assert!(ScenarioSpec::parse("name = 1").is_err());
        assert!(ScenarioSpec::parse(&text.replace("10.9", "-1.0")).is_err());
    }

    proptest! {
        #[test]
        fn decommissioning_rules(
            raw in proptest::collection::vec((1u32..2000, 1u32..1500), 1..50),
            share in 0.0f64..1.0,
        ) {
            let fleet: Vec<PlantUnit> = raw.iter().enumerate()
                .map(|(i, &(mw, e))| lignite(&format!("u{i:02}"), mw as f64 / 1000.0, e as f64 / 1000.0))
                .collect();
            let installed: f64 = fleet.iter().map(|u| u.nominal_capacity).sum();
            let target_gw = installed * share / 1000.0;
            let d = apply_decommissioning(&fleet, FuelKind::Lignite, target_gw).unwrap();
            if let Some(last) = d.removed.last() {
                prop_assert!(d.removed_mw() - target_gw * 1000.0 < last.nominal_capacity);
            }
            let mean = |us: &[PlantUnit]| us.iter().map(specific_emissions).sum::<f64>() / us.len() as f64;
            if !d.fleet.is_empty() {
                prop_assert!(mean(&d.fleet) <= mean(&fleet) + 1e-12);
            }
            let again = apply_decommissioning(&fleet, FuelKind::Lignite, target_gw).unwrap();
            prop_assert_eq!(d, again);
        }
    }
}
