//! Energy-only market: two-part unit bids, storage bids and uniform-price
//! clearing against price-inelastic residual demand.

use std::collections::BTreeMap;

use crate::dispatch::feasible_output_range;
use crate::error::Result;
use crate::forecast::{profitable_run, PriceBounds};
use crate::model::{variable_cost, FuelPriceSet, PlantState, PlantUnit, StorageUnit, INTERVAL_HOURS};

/// Longest look-ahead, in intervals, for spreading a restart over expected
/// running time.
pub const MAX_OPPORTUNITY_HORIZON: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    MustRun,
    Flexible,
    StorageCharge,
    StorageDischarge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Supply,
    Demand,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bid {
    pub unit_id: String,
    pub segment: Segment,
    pub quantity: f64,
    pub price: f64,
    pub side: Side,
}

impl Bid {
    pub fn supply(unit_id: &str, segment: Segment, quantity: f64, price: f64) -> Self {
        Bid {
            unit_id: unit_id.to_string(),
            segment,
            quantity,
            price,
            side: Side::Supply,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClearingResult {
    pub clearing_price: f64,
    /// Accepted MW per bid, parallel to the bid book passed to
    /// [`clear_energy`].
    pub accepted: Vec<f64>,
    /// Inelastic demand that no offer could serve, MW.
    pub deficit: f64,
    /// Renewable feed-in exceeding demand, MW.
    pub surplus_vre: f64,
}

impl ClearingResult {
    pub fn accepted_supply(&self, bids: &[Bid]) -> f64 {
        self.side_total(bids, Side::Supply)
    }

    pub fn accepted_demand(&self, bids: &[Bid]) -> f64 {
        self.side_total(bids, Side::Demand)
    }

    fn side_total(&self, bids: &[Bid], side: Side) -> f64 {
        bids.iter()
            .zip(&self.accepted)
            .filter(|(b, _)| b.side == side)
            .map(|(_, q)| q)
            .sum()
    }

    /// Accepted MW per unit id and segment.
    pub fn by_unit(&self, bids: &[Bid]) -> BTreeMap<(String, Segment), f64> {
        let mut out = BTreeMap::new();
        for (b, &q) in bids.iter().zip(&self.accepted) {
            *out.entry((b.unit_id.clone(), b.segment)).or_insert(0.0) += q;
        }
        out
    }
}

/// Must-run and flexible offers of one thermal unit for interval `t`.
///
/// A running unit that is free to shut down discounts its must-run block by
/// the restart it avoids, spread over the energy it would forgo while
/// offline for its minimum downtime. An offline unit offers its whole start band and spreads the start
/// cost over the run of upcoming intervals on which the forward curve covers
/// its variable cost. Held positive reserve is withheld from the offer.
pub fn formulate_energy_bids(
    plant: &PlantUnit,
    state: &PlantState,
    pfc: &[f64],
    t: usize,
    prices: &FuelPriceSet,
    bounds: PriceBounds,
) -> Result<Vec<Bid>> {
    let range = feasible_output_range(plant, state);
    if !range.can_run {
        return Ok(Vec::new());
    }
    let vc = variable_cost(plant, prices)?;
    let max = range.hi.min(plant.nominal_capacity - state.reserved_positive);
    let mut bids = Vec::with_capacity(2);

    if range.online || range.must_run() {
        let must_run = range.lo;
        let forgone = plant.min_downtime as f64 * INTERVAL_HOURS * plant.min_stable_output;
        let price = bounds.clamp(vc - plant.startup_cost / forgone);
        bids.push(Bid::supply(&plant.id, Segment::MustRun, must_run, price));
        if max - must_run > 0.0 {
            bids.push(Bid::supply(
                &plant.id,
                Segment::Flexible,
                max - must_run,
                bounds.clamp(vc),
            ));
        }
    } else if max > 0.0 {
        let run = profitable_run(pfc, t, vc, MAX_OPPORTUNITY_HORIZON);
        let price = vc + plant.startup_cost / (run as f64 * INTERVAL_HOURS * max);
        bids.push(Bid::supply(&plant.id, Segment::Flexible, max, bounds.clamp(price)));
    }
    Ok(bids)
}

/// Charge bid at the lower and discharge bid at the upper forward-curve
/// quartile, sized by power and by what the reservoir can take or give in
/// one interval. Zero-sized bids are omitted.
pub fn formulate_storage_bids(storage: &StorageUnit, charge_price: f64, discharge_price: f64) -> Vec<Bid> {
    let charge = storage
        .power_capacity
        .min((storage.energy_capacity - storage.state_of_charge) / INTERVAL_HOURS)
        .max(0.0);
    let discharge = storage
        .power_capacity
        .min(storage.state_of_charge / INTERVAL_HOURS)
        .max(0.0);
    let mut bids = Vec::new();
    if charge > 0.0 {
        bids.push(Bid {
            unit_id: storage.id.clone(),
            segment: Segment::StorageCharge,
            quantity: charge,
            price: charge_price,
            side: Side::Demand,
        });
    }
    if discharge > 0.0 {
        bids.push(Bid::supply(
            &storage.id,
            Segment::StorageDischarge,
            discharge,
            discharge_price,
        ));
    }
    bids
}

fn supply_order(bids: &[Bid]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bids.len()).filter(|&i| bids[i].side == Side::Supply).collect();
    idx.sort_by(|&a, &b| {
        bids[a]
            .price
            .total_cmp(&bids[b].price)
            .then_with(|| bids[a].unit_id.cmp(&bids[b].unit_id))
            .then_with(|| bids[a].segment.cmp(&bids[b].segment))
    });
    idx
}

fn demand_order(bids: &[Bid]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bids.len()).filter(|&i| bids[i].side == Side::Demand).collect();
    idx.sort_by(|&a, &b| {
        bids[b]
            .price
            .total_cmp(&bids[a].price)
            .then_with(|| bids[a].unit_id.cmp(&bids[b].unit_id))
    });
    idx
}

/// Shares `volume` among `members` in proportion to bid quantity.
fn pro_rata(bids: &[Bid], members: &[usize], volume: f64, accepted: &mut [f64]) {
    let offered: f64 = members.iter().map(|&i| bids[i].quantity).sum();
    if offered <= 0.0 {
        return;
    }
    if volume >= offered {
        for &i in members {
            accepted[i] = bids[i].quantity;
        }
        return;
    }
    if let [only] = members {
        accepted[*only] = volume;
        return;
    }
    let share = volume / offered;
    for &i in members {
        accepted[i] = bids[i].quantity * share;
    }
}

/// Fills demand bids in descending price order up to `volume`.
fn fill_demand(bids: &[Bid], order: &[usize], mut volume: f64, accepted: &mut [f64]) {
    for &i in order {
        let take = bids[i].quantity.min(volume).max(0.0);
        accepted[i] = take;
        volume -= take;
    }
}

/// Uniform-price clearing of one interval.
///
/// Positive residual demand is inelastic; storage charge bids add elastic
/// demand. Supply is taken cheapest first (ties by unit id), the price is
/// that of the marginal accepted offer and equal-priced marginal offers are
/// rationed pro rata. Unserved inelastic demand is a deficit priced at the
/// cap. With non-positive residual demand the price is the floor and only
/// offers at the floor can serve storage charging.
pub fn clear_energy(bids: &[Bid], residual_demand: f64, bounds: PriceBounds) -> ClearingResult {
    let supply = supply_order(bids);
    let demand = demand_order(bids);
    let mut accepted = vec![0.0; bids.len()];

    if residual_demand <= 0.0 {
        let at_floor: Vec<usize> = supply
            .iter()
            .copied()
            .filter(|&i| bids[i].price <= bounds.floor)
            .collect();
        let floor_offer: f64 = at_floor.iter().map(|&i| bids[i].quantity).sum();
        let charge: f64 = demand.iter().map(|&i| bids[i].quantity).sum();
        let volume = floor_offer.min(charge);
        pro_rata(bids, &at_floor, volume, &mut accepted);
        fill_demand(bids, &demand, volume, &mut accepted);
        return ClearingResult {
            clearing_price: bounds.floor,
            accepted,
            deficit: 0.0,
            surplus_vre: -residual_demand,
        };
    }

    // Walk the supply stack upwards against inelastic demand followed by the
    // charge bids in descending price order.
    let mut volume = 0.0;
    let mut marginal = None;
    // volume taken at the current marginal price
    let mut at_price = 0.0;
    let mut s = 0;
    let mut s_left = supply.first().map_or(0.0, |&i| bids[i].quantity);
    // d == 0 is the inelastic block
    let mut d = 0;
    let mut d_left = residual_demand;
    while s < supply.len() && d <= demand.len() {
        let ask = bids[supply[s]].price;
        let willing = if d == 0 {
            f64::INFINITY
        } else {
            bids[demand[d - 1]].price
        };
        if ask > willing {
            break;
        }
        let m = s_left.min(d_left);
        volume += m;
        s_left -= m;
        d_left -= m;
        if m > 0.0 {
            if marginal != Some(ask) {
                at_price = 0.0;
            }
            at_price += m;
            marginal = Some(ask);
        }
        if s_left <= 0.0 {
            s += 1;
            s_left = supply.get(s).map_or(0.0, |&i| bids[i].quantity);
        }
        if d_left <= 0.0 {
            d += 1;
            d_left = demand.get(d - 1).map_or(0.0, |&i| bids[i].quantity);
        }
    }

    let deficit = if d == 0 { d_left.max(0.0) } else { 0.0 };
    let clearing_price = if deficit > 0.0 {
        bounds.cap
    } else {
        marginal.unwrap_or(bounds.floor)
    };

    if deficit > 0.0 {
        for &i in &supply {
            accepted[i] = bids[i].quantity;
        }
    } else {
        let below: Vec<usize> = supply
            .iter()
            .copied()
            .filter(|&i| bids[i].price < clearing_price)
            .collect();
        for &i in &below {
            accepted[i] = bids[i].quantity;
        }
        let at: Vec<usize> = supply
            .iter()
            .copied()
            .filter(|&i| bids[i].price == clearing_price)
            .collect();
        pro_rata(bids, &at, at_price, &mut accepted);
    }
    let served_inelastic = residual_demand - deficit;
    fill_demand(bids, &demand, (volume - served_inelastic).max(0.0), &mut accepted);

    ClearingResult {
        clearing_price,
        accepted,
        deficit,
        surplus_vre: 0.0,
    }
}
