//! Preparation phase: residual load, the static merit order and the
//! year-long price forward curve that every agent bids against.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{variable_cost, FuelPriceSet, PlantUnit, SeriesUnit, TimeSeries};

/// Administrative price limits of the energy-only market, EUR/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceBounds {
    pub floor: f64,
    pub cap: f64,
}

impl Default for PriceBounds {
    fn default() -> Self {
        PriceBounds {
            floor: -3000.0,
            cap: 3000.0,
        }
    }
}

impl PriceBounds {
    pub fn new(floor: f64, cap: f64) -> Result<Self> {
        if !(floor.is_finite() && cap.is_finite() && floor < cap) {
            return Err(Error::Config(format!(
                "price floor {floor} must be below price cap {cap}"
            )));
        }
        Ok(PriceBounds { floor, cap })
    }

    pub fn clamp(&self, price: f64) -> f64 {
        price.clamp(self.floor, self.cap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeritEntry {
    pub unit_id: String,
    pub capacity: f64,
    pub marginal_cost: f64,
    /// Capacity of this entry and every cheaper one.
    pub cumulative: f64,
}

/// Units sorted ascending by marginal cost.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeritOrder {
    entries: Vec<MeritEntry>,
}

impl MeritOrder {
    pub fn entries(&self) -> &[MeritEntry] {
        &self.entries
    }

    pub fn total_capacity(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.cumulative)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Marginal cost of the first unit whose cumulative capacity covers
    /// `load`, or `None` when the load exceeds the installed total.
    pub fn marginal_cost_at(&self, load: f64) -> Option<f64> {
        let idx = self.entries.partition_point(|e| e.cumulative < load);
        self.entries.get(idx).map(|e| e.marginal_cost)
    }
}

/// `demand + net_exports - sum(vre)` per interval. May be negative.
pub fn residual_load<'a>(
    demand: &TimeSeries,
    vre: impl IntoIterator<Item = &'a TimeSeries>,
    net_exports: &TimeSeries,
) -> Result<TimeSeries> {
    demand.ensure_aligned(net_exports, "net_exports")?;
    let mut values: Vec<f64> = demand
        .values()
        .iter()
        .zip(net_exports.values())
        .map(|(d, x)| d + x)
        .collect();
    for series in vre {
        demand.ensure_aligned(series, "vre")?;
        for (v, feed) in values.iter_mut().zip(series.values()) {
            *v -= feed;
        }
    }
    TimeSeries::new(demand.year(), SeriesUnit::Megawatt, values)
}

/// One entry per thermal unit at nominal capacity and variable cost; ties
/// go to the lexicographically smaller id.
pub fn build_merit_order(fleet: &[PlantUnit], prices: &FuelPriceSet) -> Result<MeritOrder> {
    let mut rows = fleet
        .iter()
        .map(|u| Ok((u.id.clone(), u.nominal_capacity, variable_cost(u, prices)?)))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
    let mut cumulative = 0.0;
    let entries = rows
        .into_iter()
        .map(|(unit_id, capacity, marginal_cost)| {
            cumulative += capacity;
            MeritEntry {
                unit_id,
                capacity,
                marginal_cost,
                cumulative,
            }
        })
        .collect();
    Ok(MeritOrder { entries })
}

/// Prices the residual load against the merit order: floor when residual is
/// not positive, cap when it exceeds installed capacity, otherwise the
/// marginal unit's cost.
pub fn price_forward_curve(merit: &MeritOrder, residual: &TimeSeries, bounds: PriceBounds) -> TimeSeries {
    if merit.is_empty() && residual.values().iter().any(|&r| r > 0.0) {
        warn!("empty merit order: positive residual load priced at the cap");
    }
    residual.map(SeriesUnit::EuroPerMwh, |r| {
        if r <= 0.0 {
            bounds.floor
        } else {
            merit.marginal_cost_at(r).map_or(bounds.cap, |c| bounds.clamp(c))
        }
    })
}

/// Contiguous run of intervals from `start` on which the curve is at or
/// above `cost`, clamped to `[1, max]`.
pub fn profitable_run(pfc: &[f64], start: usize, cost: f64, max: usize) -> usize {
    pfc.iter()
        .skip(start)
        .take(max)
        .take_while(|&&p| p >= cost)
        .count()
        .max(1)
}

/// Mean of the curve over `[start, end)`, truncated at the series end.
pub fn window_mean(pfc: &[f64], start: usize, end: usize) -> f64 {
    let end = end.min(pfc.len());
    if start >= end {
        return 0.0;
    }
    pfc[start..end].iter().sum::<f64>() / (end - start) as f64
}

/// Linear-interpolated percentile (`q` in `[0, 1]`) of `values`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
