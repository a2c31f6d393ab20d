//! Unit feasibility envelopes, per-portfolio re-optimisation of market
//! awards and the plant state machine.

use log::debug;

use crate::error::Result;
use crate::model::{variable_cost, FuelPriceSet, PlantState, PlantUnit, INTERVAL_HOURS};

/// Absolute tolerance, MW, for feasibility checks on setpoints.
pub const MW_TOLERANCE: f64 = 1e-6;

/// What a unit can physically do in the coming interval.
///
/// `lo..=hi` is the operating band if the unit runs; `can_be_off` says
/// whether producing nothing (staying off or shutting down) is allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibleRange {
    pub online: bool,
    pub can_be_off: bool,
    pub can_run: bool,
    pub lo: f64,
    pub hi: f64,
}

impl FeasibleRange {
    /// Forced output if the unit cannot be off.
    pub fn must_run(&self) -> bool {
        !self.can_be_off
    }

    pub fn contains(&self, setpoint: f64) -> bool {
        if setpoint <= MW_TOLERANCE {
            self.can_be_off
        } else {
            self.can_run && setpoint >= self.lo - MW_TOLERANCE && setpoint <= self.hi + MW_TOLERANCE
        }
    }
}

/// Operating envelope implied by ramps, minimum up/down times, heat duty and
/// held reserve.
pub fn feasible_output_range(plant: &PlantUnit, state: &PlantState) -> FeasibleRange {
    let heat_forced = plant.power_to_heat_ratio * state.committed_heat;
    let obligated = state.has_obligation();
    if state.online {
        let lo = (plant.min_stable_output + state.reserved_negative)
            .max(state.output - plant.ramp_down)
            .max(heat_forced);
        let hi = (plant.nominal_capacity - state.reserved_positive).min(state.output + plant.ramp_up);
        debug_assert!(lo <= hi + MW_TOLERANCE, "{}: empty band [{lo}, {hi}]", plant.id);
        // shutting down means ramping through min stable output within one interval
        let can_shut_down = state.intervals_in_current_state >= plant.min_uptime
            && !obligated
            && state.output - plant.ramp_down <= plant.min_stable_output + MW_TOLERANCE;
        FeasibleRange {
            online: true,
            can_be_off: can_shut_down,
            can_run: true,
            lo,
            hi,
        }
    } else {
        let can_start = state.intervals_in_current_state >= plant.min_downtime;
        let (lo, hi) = if can_start {
            (
                plant.min_stable_output.max(heat_forced),
                (plant.nominal_capacity - state.reserved_positive).min(plant.min_stable_output + plant.ramp_up),
            )
        } else {
            (0.0, 0.0)
        };
        FeasibleRange {
            online: false,
            can_be_off: !obligated,
            can_run: can_start,
            lo,
            hi,
        }
    }
}

/// Highest electric output reachable this interval before any heat duty is
/// assigned, or zero when the unit cannot run.
pub fn running_headroom(plant: &PlantUnit, state: &PlantState) -> f64 {
    let mut free = state.clone();
    free.committed_heat = 0.0;
    let r = feasible_output_range(plant, &free);
    if r.can_run {
        r.hi
    } else {
        0.0
    }
}

/// A unit's share of its owner's market result.
#[derive(Clone, Copy, Debug)]
pub struct PortfolioMember<'a> {
    pub plant: &'a PlantUnit,
    pub state: &'a PlantState,
    pub awarded: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rebalance {
    pub setpoints: Vec<f64>,
    /// Produced minus awarded total; positive when forced output exceeds the
    /// award, negative when the award cannot be delivered.
    pub imbalance: f64,
}

/// Redistributes an owner's awarded total across its units at least cost.
///
/// A unit runs when it won something in the market or cannot be switched
/// off; everything else produces zero. Running units start at their band
/// floor and the remaining volume is filled into the cheapest bands first.
/// The objective `sum(cost_i * x_i)` is separable and linear over boxes
/// `lo_i <= x_i <= hi_i` with a single coupling `sum(x_i) = T`, so any
/// allocation that leaves a cheaper band unfilled while a dearer one carries
/// volume can be improved by an exchange; the greedy fill has no such pair
/// and is therefore optimal.
pub fn portfolio_rebalance(members: &[PortfolioMember<'_>], prices: &FuelPriceSet) -> Result<Rebalance> {
    let total: f64 = members.iter().map(|m| m.awarded).sum();
    let mut setpoints = vec![0.0; members.len()];
    let mut bands = Vec::new();
    let mut floor_sum = 0.0;
    for (i, m) in members.iter().enumerate() {
        let range = feasible_output_range(m.plant, m.state);
        let runs = range.can_run && (range.must_run() || m.awarded > MW_TOLERANCE);
        if !runs {
            continue;
        }
        setpoints[i] = range.lo;
        floor_sum += range.lo;
        bands.push((
            variable_cost(m.plant, prices)?,
            m.plant.id.as_str(),
            i,
            range.hi - range.lo,
        ));
    }
    bands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut remaining = total - floor_sum;
    for &(_, _, i, width) in &bands {
        if remaining <= 0.0 {
            break;
        }
        let take = width.min(remaining);
        setpoints[i] += take;
        remaining -= take;
    }
    let produced: f64 = setpoints.iter().sum();
    let imbalance = produced - total;
    if imbalance.abs() > MW_TOLERANCE {
        debug!("portfolio imbalance {imbalance:.3} MW against award {total:.3} MW");
    }
    Ok(Rebalance { setpoints, imbalance })
}

/// Quantities accrued by one unit in one interval.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostEntry {
    pub started: bool,
    pub startup_cost: f64,
    pub generation_mwh: f64,
    pub fuel_mwh_th: f64,
    pub co2_t: f64,
}

/// Applies the final setpoint and reserve activation for one interval.
///
/// Activation is exempt from ramp limits but must stay within the held
/// reserve band. Panics on an infeasible setpoint, which can only come from
/// an engine bug.
pub fn advance_state(plant: &PlantUnit, state: &PlantState, setpoint: f64, activation: f64) -> (PlantState, CostEntry) {
    let range = feasible_output_range(plant, state);
    assert!(
        range.contains(setpoint),
        "unit {}: setpoint {setpoint} outside feasible range {range:?}",
        plant.id
    );
    assert!(
        activation <= state.reserved_positive + MW_TOLERANCE && -activation <= state.reserved_negative + MW_TOLERANCE,
        "unit {}: activation {activation} exceeds reserve band (+{}/-{})",
        plant.id,
        state.reserved_positive,
        state.reserved_negative
    );

    let online = setpoint > MW_TOLERANCE;
    let output = if online { setpoint } else { 0.0 };
    let activation = if online { activation } else { 0.0 };
    let intervals_in_current_state = if online == state.online {
        state.intervals_in_current_state.saturating_add(1)
    } else {
        1
    };
    let started = online && !state.online;
    let next = if online {
        PlantState {
            online,
            output,
            intervals_in_current_state,
            committed_heat: state.committed_heat,
            reserved_positive: state.reserved_positive,
            reserved_negative: state.reserved_negative,
        }
    } else {
        PlantState::offline(intervals_in_current_state)
    };
    let generation_mwh = (output + activation) * INTERVAL_HOURS;
    let fuel_mwh_th = generation_mwh / plant.efficiency;
    let entry = CostEntry {
        started,
        startup_cost: if started { plant.startup_cost } else { 0.0 },
        generation_mwh,
        fuel_mwh_th,
        co2_t: fuel_mwh_th * plant.thermal_emission_factor,
    };
    (next, entry)
}
