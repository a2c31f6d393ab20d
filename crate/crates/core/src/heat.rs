//! District-heat clearing among CHP units. Each MW of heat served forces
//! `power_to_heat_ratio` MW of electric must-run output.

use std::collections::BTreeMap;

use crate::dispatch::running_headroom;
use crate::error::{Error, Result};
use crate::model::{variable_cost, FuelPriceSet, PlantState, PlantUnit};

/// Default penalty for heat demand nobody serves, EUR/MWh thermal.
pub const DEFAULT_UNSERVED_HEAT_PENALTY: f64 = 100.0;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeatAward {
    /// Heat served per CHP unit id, MW thermal.
    pub served: BTreeMap<String, f64>,
    pub unserved_heat: f64,
}

impl HeatAward {
    pub fn total_served(&self) -> f64 {
        self.served.values().sum()
    }
}

/// Cost of the electricity a unit of heat obligation forces, EUR/MWh thermal.
pub fn heat_marginal_cost(plant: &PlantUnit, prices: &FuelPriceSet) -> Result<f64> {
    if !plant.is_chp() {
        return Err(Error::NotChp(plant.id.clone()));
    }
    Ok(variable_cost(plant, prices)? * plant.power_to_heat_ratio)
}

/// Heat a unit can take on this interval: its heat capacity, clipped so the
/// forced electric output stays reachable.
pub fn available_heat(plant: &PlantUnit, state: &PlantState) -> f64 {
    if !plant.is_chp() {
        return 0.0;
    }
    let electric = running_headroom(plant, state);
    plant
        .chp_heat_capacity
        .min(electric / plant.power_to_heat_ratio)
        .max(0.0)
}

/// Fills `heat_demand` from the cheapest CHP units up and commits the
/// winners' heat in `states` (which must be parallel to `fleet`).
pub fn clear_heat(
    fleet: &[PlantUnit],
    states: &mut [PlantState],
    heat_demand: f64,
    prices: &FuelPriceSet,
) -> Result<HeatAward> {
    debug_assert_eq!(fleet.len(), states.len());
    let mut offers = Vec::new();
    for (i, plant) in fleet.iter().enumerate() {
        if !plant.is_chp() {
            continue;
        }
        states[i].committed_heat = 0.0;
        offers.push((heat_marginal_cost(plant, prices)?, plant.id.as_str(), i));
    }
    offers.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut award = HeatAward::default();
    let mut remaining = heat_demand.max(0.0);
    for (_, id, i) in offers {
        let take = available_heat(&fleet[i], &states[i]).min(remaining);
        states[i].committed_heat = take;
        remaining -= take;
        award.served.insert(id.to_string(), take);
    }
    award.unserved_heat = remaining;
    Ok(award)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::unit;
    use crate::model::FuelKind;
    use proptest::prelude::*;

    fn chp(id: &str, cost_el: f64, ratio: f64, heat_cap: f64) -> PlantUnit {
        let mut u = unit(id);
        u.efficiency = 1.0;
        u.thermal_emission_factor = 0.0;
        u.other_variable_cost = cost_el;
        u.power_to_heat_ratio = ratio;
        u.chp_heat_capacity = heat_cap;
        u
    }

    fn prices() -> FuelPriceSet {
        FuelPriceSet::new(0.0).with(FuelKind::HardCoal, 0.0)
    }

    #[test]
    fn marginal_cost_examples() {
        assert_eq!(heat_marginal_cost(&chp("a", 30.0, 0.5, 10.0), &prices()).unwrap(), 15.0);
        assert_eq!(heat_marginal_cost(&chp("a", 0.0, 0.5, 10.0), &prices()).unwrap(), 0.0);
        assert!(matches!(
            heat_marginal_cost(&unit("plain"), &prices()),
            Err(Error::NotChp(_))
        ));
    }

    #[test]
    fn two_unit_fill() {
        // heat costs 10 and 15 EUR/MWh_th
        let fleet = vec![chp("b", 30.0, 0.5, 50.0), chp("a", 20.0, 0.5, 50.0)];
        let mut states = vec![PlantState::online(300.0, 5); 2];
        let award = clear_heat(&fleet, &mut states, 70.0, &prices()).unwrap();
        assert_eq!(award.served["a"], 50.0);
        assert_eq!(award.served["b"], 20.0);
        assert_eq!(award.unserved_heat, 0.0);
        assert_eq!(states[1].committed_heat, 50.0);

        let award = clear_heat(&fleet, &mut states, 0.0, &prices()).unwrap();
        assert_eq!(award.total_served(), 0.0);
        assert!(states.iter().all(|s| s.committed_heat == 0.0));

        let award = clear_heat(&fleet, &mut states, 120.0, &prices()).unwrap();
        assert_eq!(award.unserved_heat, 20.0);
    }

    #[test]
    fn heat_is_clipped_to_reachable_output() {
        // online at 300 with ramp 100 on a 500 MW unit: 400 MW reachable,
        // ratio 5 allows at most 80 MW_th
        let fleet = vec![chp("c", 10.0, 5.0, 200.0)];
        let mut states = vec![PlantState::online(300.0, 5)];
        let award = clear_heat(&fleet, &mut states, 150.0, &prices()).unwrap();
        assert_eq!(award.served["c"], 80.0);
        assert_eq!(award.unserved_heat, 70.0);
        assert!(fleet[0].power_to_heat_ratio * states[0].committed_heat <= fleet[0].nominal_capacity);
    }

    #[test]
    fn units_inside_min_downtime_serve_nothing() {
        let fleet = vec![chp("c", 10.0, 0.5, 100.0)];
        let mut states = vec![PlantState::offline(1)];
        let award = clear_heat(&fleet, &mut states, 50.0, &prices()).unwrap();
        assert_eq!(award.unserved_heat, 50.0);
    }

    // Cheapest allocation of `demand` among capacity-bounded units on a
    // 1 MW_th grid, by exhaustive tabulation.
    fn min_cost(units: &[(f64, u32)], demand: u32) -> f64 {
        let served_max: u32 = units.iter().map(|u| u.1).sum();
        let target = demand.min(served_max) as usize;
        let mut best = vec![f64::INFINITY; target + 1];
        best[0] = 0.0;
        for &(c, cap) in units {
            let mut next = vec![f64::INFINITY; target + 1];
            for (have, &cost) in best.iter().enumerate().filter(|(_, c)| c.is_finite()) {
                for x in 0..=cap as usize {
                    if have + x <= target {
                        next[have + x] = next[have + x].min(cost + c * x as f64);
                    }
                }
            }
            best = next;
        }
        best[target]
    }

    proptest! {
        #[test]
        fn award_is_cost_minimal(
            raw in proptest::collection::vec((1u32..60, 1u32..80), 1..=5),
            demand in 0u32..300,
        ) {
            let fleet: Vec<PlantUnit> = raw.iter().enumerate()
                .map(|(i, &(c, cap))| chp(&format!("h{i}"), c as f64, 0.5, cap as f64))
                .collect();
            let mut states = vec![PlantState::online(300.0, 5); fleet.len()];
            let award = clear_heat(&fleet, &mut states, demand as f64, &prices()).unwrap();
            prop_assert!((award.total_served() + award.unserved_heat - demand as f64).abs() < 1e-9);
            let cost: f64 = fleet.iter().map(|u| award.served[&u.id] * u.other_variable_cost * 0.5).sum();
            let oracle = min_cost(&raw.iter().map(|&(c, cap)| (c as f64 * 0.5, cap)).collect::<Vec<_>>(), demand);
            prop_assert!((cost - oracle).abs() < 1e-6);
            for (u, s) in fleet.iter().zip(&states) {
                prop_assert!(s.committed_heat <= u.chp_heat_capacity);
            }
        }
    }
}
