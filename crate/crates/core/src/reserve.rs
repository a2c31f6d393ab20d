//! Control reserve: bid formulation, pay-as-bid procurement per product
//! block and activation-driven deployment.

use std::collections::BTreeMap;
use std::ops::Range;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forecast::window_mean;
use crate::model::{variable_cost, FuelPriceSet, PlantState, PlantUnit, INTERVAL_HOURS};

/// Product length in intervals (4 h).
pub const BLOCK_INTERVALS: usize = 16;
/// Markup applied to variable cost for the energy price of reserve bids.
pub const ENERGY_PRICE_MARKUP: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
}

/// Reserve to procure per block, MW.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReserveRequirement {
    #[serde(rename = "pos_mw")]
    pub positive: f64,
    #[serde(rename = "neg_mw")]
    pub negative: f64,
}

impl Default for ReserveRequirement {
    fn default() -> Self {
        ReserveRequirement {
            positive: 2000.0,
            negative: 2000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReserveBid {
    pub unit_id: String,
    pub direction: Direction,
    pub capacity: f64,
    /// EUR per MW for the whole block.
    pub capacity_price: f64,
    /// EUR/MWh asked for activated energy.
    pub energy_price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReserveAward {
    pub unit_id: String,
    pub direction: Direction,
    pub awarded: f64,
    pub offered: f64,
    pub capacity_price: f64,
    pub energy_price: f64,
    /// Pay-as-bid capacity payment, EUR.
    pub payment: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReserveClearing {
    pub awards: Vec<ReserveAward>,
    pub shortfall_positive: f64,
    pub shortfall_negative: f64,
}

impl ReserveClearing {
    pub fn awarded(&self, direction: Direction) -> f64 {
        self.awards
            .iter()
            .filter(|a| a.direction == direction)
            .map(|a| a.awarded)
            .sum()
    }

    pub fn payments(&self) -> f64 {
        self.awards.iter().map(|a| a.payment).sum()
    }
}

/// Reserve offers of one unit for the product block `block`.
///
/// The expected output is read off the price forward curve: a unit whose
/// variable cost is covered by the block-average curve expects to run at
/// nominal capacity, otherwise at minimum stable output (online) or not at
/// all (offline). Positive capacity is what one interval of ramping can add
/// above that expectation; negative capacity is what an online unit can shed
/// down to its floor. Out-of-merit units price in the loss of running to
/// stand by.
pub fn formulate_reserve_bids(
    plant: &PlantUnit,
    state: &PlantState,
    pfc: &[f64],
    block: Range<usize>,
    prices: &FuelPriceSet,
) -> Result<Vec<ReserveBid>> {
    if !plant.reserve_eligible {
        return Ok(Vec::new());
    }
    let vc = variable_cost(plant, prices)?;
    let hours = block.len() as f64 * INTERVAL_HOURS;
    let average = window_mean(pfc, block.start, block.end);
    let in_merit = average >= vc;
    let capacity_price = (vc - average).max(0.0) * hours;
    let heat_forced = plant.power_to_heat_ratio * state.committed_heat;

    let (positive, negative) = if state.online {
        let expected = if in_merit {
            plant.nominal_capacity
        } else {
            plant.min_stable_output
        };
        let top = expected.max(state.output).max(heat_forced);
        let bottom = expected.min(state.output);
        (
            plant.ramp_up.min(plant.nominal_capacity - top),
            bottom - plant.min_stable_output.max(heat_forced),
        )
    } else if state.intervals_in_current_state >= plant.min_downtime {
        let expected = if in_merit { plant.nominal_capacity } else { 0.0 };
        let top = expected.max(plant.min_stable_output).max(heat_forced);
        (plant.ramp_up.min(plant.nominal_capacity - top), 0.0)
    } else {
        (0.0, 0.0)
    };

    let mut bids = Vec::new();
    if positive > 0.0 {
        bids.push(ReserveBid {
            unit_id: plant.id.clone(),
            direction: Direction::Positive,
            capacity: positive,
            capacity_price,
            energy_price: vc * (1.0 + ENERGY_PRICE_MARKUP),
        });
    }
    if negative > 0.0 {
        bids.push(ReserveBid {
            unit_id: plant.id.clone(),
            direction: Direction::Negative,
            capacity: negative,
            capacity_price,
            energy_price: vc * (1.0 - ENERGY_PRICE_MARKUP),
        });
    }
    Ok(bids)
}

/// Accepts bids per direction in ascending capacity price (ties by unit id)
/// until the requirement is met; the marginal bid is accepted partially.
pub fn clear_reserve(bids: &[ReserveBid], requirement: ReserveRequirement) -> ReserveClearing {
    let mut out = ReserveClearing::default();
    for (direction, required) in [
        (Direction::Positive, requirement.positive.max(0.0)),
        (Direction::Negative, requirement.negative.max(0.0)),
    ] {
        let mut book: Vec<&ReserveBid> = bids.iter().filter(|b| b.direction == direction).collect();
        book.sort_by(|a, b| {
            a.capacity_price
                .total_cmp(&b.capacity_price)
                .then_with(|| a.unit_id.cmp(&b.unit_id))
        });
        let mut remaining = required;
        for bid in book {
            if remaining <= 0.0 {
                break;
            }
            let awarded = bid.capacity.min(remaining);
            remaining -= awarded;
            out.awards.push(ReserveAward {
                unit_id: bid.unit_id.clone(),
                direction,
                awarded,
                offered: bid.capacity,
                capacity_price: bid.capacity_price,
                energy_price: bid.energy_price,
                payment: awarded * bid.capacity_price,
            });
        }
        let shortfall = remaining.max(0.0);
        match direction {
            Direction::Positive => out.shortfall_positive = shortfall,
            Direction::Negative => out.shortfall_negative = shortfall,
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Deployment {
    /// Signed activation per unit id, MW (negative = output reduced).
    pub per_unit: BTreeMap<String, f64>,
    /// Requested activation that exceeded the procured band, MW (unsigned).
    pub clipped: f64,
}

impl Deployment {
    pub fn get(&self, unit_id: &str) -> f64 {
        self.per_unit.get(unit_id).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.per_unit.values().sum()
    }
}

/// Splits the signed activation signal across held awards in energy-price
/// merit order: cheapest first for positive, dearest first for negative.
pub fn deploy_reserve(awards: &[ReserveAward], activation: f64) -> Deployment {
    let direction = if activation >= 0.0 {
        Direction::Positive
    } else {
        Direction::Negative
    };
    let mut held: Vec<&ReserveAward> = awards
        .iter()
        .filter(|a| a.direction == direction && a.awarded > 0.0)
        .collect();
    held.sort_by(|a, b| {
        let by_price = a.energy_price.total_cmp(&b.energy_price);
        let by_price = match direction {
            Direction::Positive => by_price,
            Direction::Negative => by_price.reverse(),
        };
        by_price.then_with(|| a.unit_id.cmp(&b.unit_id))
    });

    let sign = if direction == Direction::Positive { 1.0 } else { -1.0 };
    let mut remaining = activation.abs();
    let mut out = Deployment::default();
    for award in held {
        let take = award.awarded.min(remaining);
        remaining -= take;
        *out.per_unit.entry(award.unit_id.clone()).or_insert(0.0) += sign * take;
    }
    if remaining > 1e-9 {
        debug!("reserve activation {activation:.3} MW exceeds procured band, clipping {remaining:.3} MW");
        out.clipped = remaining;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::unit;
    use crate::model::FuelKind;
    use proptest::prelude::*;

    fn priced_unit(cost: f64) -> (PlantUnit, FuelPriceSet) {
        let mut u = unit("r");
        u.efficiency = 1.0;
        u.thermal_emission_factor = 0.0;
        u.other_variable_cost = cost;
        (u, FuelPriceSet::new(0.0).with(FuelKind::HardCoal, 0.0))
    }

    #[test]
    fn online_in_merit_unit_offers_only_negative() {
        let (u, prices) = priced_unit(30.0);
        let pfc = vec![40.0; 16];
        let bids = formulate_reserve_bids(&u, &PlantState::online(500.0, 10), &pfc, 0..16, &prices).unwrap();
        assert_eq!(bids.len(), 1);
        assert_eq!(bids[0].direction, Direction::Negative);
        assert_eq!(bids[0].capacity, 300.0);
        assert_eq!(bids[0].capacity_price, 0.0);
        assert!((bids[0].energy_price - 24.0).abs() < 1e-12);
    }

    #[test]
    fn offline_unit_prices_standby() {
        let (u, prices) = priced_unit(50.0);
        let pfc = vec![30.0; 16];
        let bids = formulate_reserve_bids(&u, &PlantState::offline(20), &pfc, 0..16, &prices).unwrap();
        assert_eq!(bids.len(), 1);
        let b = &bids[0];
        assert_eq!(b.direction, Direction::Positive);
        assert_eq!(b.capacity, 100.0);
        assert_eq!(b.capacity_price, 80.0);
        assert!((b.energy_price - 60.0).abs() < 1e-12);
    }

    #[test]
    fn ineligible_and_locked_units_stay_out() {
        let (mut u, prices) = priced_unit(50.0);
        let pfc = vec![30.0; 16];
        assert!(
            formulate_reserve_bids(&u, &PlantState::offline(2), &pfc, 0..16, &prices)
                .unwrap()
                .is_empty()
        );
        u.reserve_eligible = false;
        assert!(
            formulate_reserve_bids(&u, &PlantState::online(300.0, 9), &pfc, 0..16, &prices)
                .unwrap()
                .is_empty()
        );
    }

    fn bid(id: &str, dir: Direction, cap: f64, price: f64, energy: f64) -> ReserveBid {
        ReserveBid {
            unit_id: id.into(),
            direction: dir,
            capacity: cap,
            capacity_price: price,
            energy_price: energy,
        }
    }

    #[test]
    fn clearing_examples() {
        let bids = [
            bid("X", Direction::Positive, 50.0, 5.0, 0.0),
            bid("Y", Direction::Positive, 50.0, 3.0, 0.0),
        ];
        let c = clear_reserve(
            &bids,
            ReserveRequirement {
                positive: 60.0,
                negative: 0.0,
            },
        );
        let got: Vec<_> = c.awards.iter().map(|a| (a.unit_id.as_str(), a.awarded)).collect();
        assert_eq!(got, [("Y", 50.0), ("X", 10.0)]);
        assert_eq!(c.payments(), 50.0 * 3.0 + 10.0 * 5.0);

        let c = clear_reserve(
            &bids,
            ReserveRequirement {
                positive: 0.0,
                negative: 0.0,
            },
        );
        assert!(c.awards.is_empty());

        let c = clear_reserve(
            &bids,
            ReserveRequirement {
                positive: 120.0,
                negative: 0.0,
            },
        );
        assert_eq!(c.awarded(Direction::Positive), 100.0);
        assert_eq!(c.shortfall_positive, 20.0);
    }

    fn award(id: &str, dir: Direction, mw: f64, energy: f64) -> ReserveAward {
        ReserveAward {
            unit_id: id.into(),
            direction: dir,
            awarded: mw,
            offered: mw,
            capacity_price: 0.0,
            energy_price: energy,
            payment: 0.0,
        }
    }

    #[test]
    fn deployment_examples() {
        let awards = [
            award("X", Direction::Positive, 10.0, 60.0),
            award("Y", Direction::Positive, 50.0, 50.0),
        ];
        let d = deploy_reserve(&awards, 30.0);
        assert_eq!(d.get("Y"), 30.0);
        assert_eq!(d.get("X"), 0.0);

        let d = deploy_reserve(&awards, 0.0);
        assert_eq!(d.total(), 0.0);

        let d = deploy_reserve(&awards, 70.0);
        assert_eq!((d.get("Y"), d.get("X"), d.clipped), (50.0, 10.0, 10.0));
    }

    #[test]
    fn negative_deployment_takes_dearest_first() {
        let awards = [
            award("cheap", Direction::Negative, 40.0, 10.0),
            award("dear", Direction::Negative, 40.0, 50.0),
            award("pos", Direction::Positive, 40.0, 1.0),
        ];
        let d = deploy_reserve(&awards, -50.0);
        assert_eq!(d.get("dear"), -40.0);
        assert_eq!(d.get("cheap"), -10.0);
        assert_eq!(d.get("pos"), 0.0);
    }

    // Cheapest pay-as-bid award set: at most one bid is split in an optimal
    // vertex, so enumerate every fully accepted subset plus one partial bid.
    fn oracle_payment(bids: &[(f64, f64)], required: f64) -> f64 {
        let total: f64 = bids.iter().map(|b| b.0).sum();
        let target = required.min(total);
        let n = bids.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            let full: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| bids[i].0).sum();
            let pay: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| bids[i].0 * bids[i].1)
                .sum();
            let gap = target - full;
            if gap.abs() < 1e-9 {
                best = best.min(pay);
            }
            for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                if gap > 0.0 && gap <= bids[j].0 {
                    best = best.min(pay + gap * bids[j].1);
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn clearing_minimises_payment(
            raw in proptest::collection::vec((1u32..100, 0u32..50), 1..=6),
            required in 0u32..400,
        ) {
            let bids: Vec<ReserveBid> = raw.iter().enumerate()
                .map(|(i, &(c, p))| bid(&format!("b{i}"), Direction::Positive, c as f64, p as f64, 0.0))
                .collect();
            let c = clear_reserve(&bids, ReserveRequirement { positive: required as f64, negative: 0.0 });
            let oracle = oracle_payment(
                &raw.iter().map(|&(c, p)| (c as f64, p as f64)).collect::<Vec<_>>(),
                required as f64,
            );
            prop_assert!((c.payments() - oracle).abs() < 1e-6);
            prop_assert!(c.awarded(Direction::Positive) <= required as f64 + 1e-9);
            for a in &c.awards {
                prop_assert!(a.awarded <= a.offered);
            }
        }

        #[test]
        fn deployment_respects_awards(
            raw in proptest::collection::vec((0u32..100, 0u32..80), 0..6),
            signal in -400.0f64..400.0,
        ) {
            let awards: Vec<ReserveAward> = raw.iter().enumerate().flat_map(|(i, &(mw, ep))| {
                [award(&format!("u{i}"), Direction::Positive, mw as f64, ep as f64),
                 award(&format!("u{i}"), Direction::Negative, mw as f64 / 2.0, ep as f64)]
            }).collect();
            let d = deploy_reserve(&awards, signal);
            for a in &awards {
                let act = d.get(&a.unit_id);
                match a.direction {
                    Direction::Positive => prop_assert!(act <= a.awarded + 1e-9),
                    Direction::Negative => prop_assert!(-act <= a.awarded + 1e-9),
                }
            }
            prop_assert!((d.total().abs() + d.clipped - signal.abs()).abs() < 1e-6);
        }
    }
}
