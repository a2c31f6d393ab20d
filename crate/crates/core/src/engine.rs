//! Simulation driver: the preparation phase followed by the four market
//! steps of every quarter hour.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use log::warn;

use crate::dispatch::{advance_state, portfolio_rebalance, PortfolioMember};
use crate::energy::{clear_energy, formulate_energy_bids, formulate_storage_bids, Bid, Segment};
use crate::error::{Error, Result};
use crate::forecast::{build_merit_order, percentile, price_forward_curve, residual_load, PriceBounds};
use crate::heat::{clear_heat, DEFAULT_UNSERVED_HEAT_PENALTY};
use crate::model::{
    validate_fleet, variable_cost, FuelKind, FuelPriceSet, PlantState, PlantUnit, SeriesUnit, StorageUnit, TimeSeries,
    INTERVAL_HOURS,
};
use crate::report::{Calendar, IntervalRecord, RunMetadata, SimulationReport, UnitInterval};
use crate::reserve::{
    clear_reserve, deploy_reserve, formulate_reserve_bids, Direction, ReserveAward, ReserveRequirement, BLOCK_INTERVALS,
};

/// Exogenous quarter-hour inputs of one run. All series share year and
/// length.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSet {
    pub demand: TimeSeries,
    /// Renewable feed-in per source name.
    pub vre: BTreeMap<String, TimeSeries>,
    pub net_exports: TimeSeries,
    pub heat_demand: TimeSeries,
    /// Signed reserve activation request, MW.
    pub activation: TimeSeries,
}

impl SeriesSet {
    /// Demand only; every other series is zero.
    pub fn from_demand(demand: TimeSeries) -> Self {
        let zero = |unit| demand.map(unit, |_| 0.0);
        SeriesSet {
            net_exports: zero(SeriesUnit::Megawatt),
            heat_demand: zero(SeriesUnit::MegawattThermal),
            activation: zero(SeriesUnit::Megawatt),
            vre: BTreeMap::new(),
            demand,
        }
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn year(&self) -> i32 {
        self.demand.year()
    }

    pub fn validate(&self) -> Result<()> {
        self.demand.ensure_aligned(&self.net_exports, "net_exports")?;
        self.demand.ensure_aligned(&self.heat_demand, "heat_demand")?;
        self.demand.ensure_aligned(&self.activation, "activation")?;
        for (name, s) in &self.vre {
            self.demand.ensure_aligned(s, name)?;
        }
        if let Some(i) = self.heat_demand.values().iter().position(|&h| h < 0.0) {
            return Err(Error::Input(format!("negative heat demand at interval {i}")));
        }
        Ok(())
    }

    fn vre_total(&self, t: usize) -> f64 {
        self.vre.values().map(|s| s.values()[t]).sum()
    }
}

/// Market rules shared by all agents.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketConfig {
    pub prices: FuelPriceSet,
    pub bounds: PriceBounds,
    pub reserve: ReserveRequirement,
    pub unserved_heat_penalty: f64,
}

impl MarketConfig {
    pub fn new(prices: FuelPriceSet) -> Self {
        MarketConfig {
            prices,
            bounds: PriceBounds::default(),
            reserve: ReserveRequirement::default(),
            unserved_heat_penalty: DEFAULT_UNSERVED_HEAT_PENALTY,
        }
    }
}

/// Everything needed for one simulation run.
#[derive(Clone, Debug)]
pub struct SimulationInput {
    pub name: String,
    pub fleet: Vec<PlantUnit>,
    pub storage: Vec<StorageUnit>,
    pub series: SeriesSet,
    pub market: MarketConfig,
    pub calendar: Calendar,
    /// Keep the per-unit trace in the report.
    pub record_dispatch: bool,
    /// Content hashes of the files the inputs were read from.
    pub input_hashes: BTreeMap<String, String>,
}

impl SimulationInput {
    pub fn new(name: impl Into<String>, fleet: Vec<PlantUnit>, series: SeriesSet, market: MarketConfig) -> Self {
        SimulationInput {
            name: name.into(),
            fleet,
            storage: Vec::new(),
            series,
            market,
            calendar: Calendar::default(),
            record_dispatch: false,
            input_hashes: BTreeMap::new(),
        }
    }

    /// Collects every problem with the inputs instead of stopping at the
    /// first one.
    pub fn validate(&self) -> Result<()> {
        let report = validate_fleet(&self.fleet, &self.storage);
        if !report.is_empty() {
            return report.into_result();
        }
        let mut problems = Vec::new();
        if let Err(e) = self.series.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.market.prices.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = PriceBounds::new(self.market.bounds.floor, self.market.bounds.cap) {
            problems.push(e.to_string());
        }
        if !(self.market.reserve.positive >= 0.0 && self.market.reserve.negative >= 0.0) {
            problems.push("reserve requirements must be >= 0".into());
        }
        let mut missing: Vec<FuelKind> = self
            .fleet
            .iter()
            .map(|u| u.fuel)
            .filter(|f| self.market.prices.price(*f).is_err())
            .collect();
        missing.sort();
        missing.dedup();
        problems.extend(missing.iter().map(|f| Error::MissingFuelPrice(*f).to_string()));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(problems.join("; ")))
        }
    }
}

/// Starting point of the run: the forward-curve merit order dispatched
/// against the first interval's residual load. Every unit may change state
/// immediately.
fn initial_states(fleet: &[PlantUnit], prices: &FuelPriceSet, first_residual: f64) -> Result<Vec<PlantState>> {
    let merit = build_merit_order(fleet, prices)?;
    let index: BTreeMap<&str, usize> = fleet.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    let mut states: Vec<PlantState> = fleet
        .iter()
        .map(|u| PlantState::offline(u.min_uptime.max(u.min_downtime)))
        .collect();
    let mut remaining = first_residual.max(0.0);
    for entry in merit.entries() {
        if remaining <= 0.0 {
            break;
        }
        let i = index[entry.unit_id.as_str()];
        let u = &fleet[i];
        let output = remaining.min(u.nominal_capacity).max(u.min_stable_output);
        remaining -= output;
        states[i] = PlantState::online(output, u.min_uptime.max(u.min_downtime));
    }
    Ok(states)
}

/// Runs the preparation phase and then every interval in order: heat,
/// reserve (procured at block starts, deployed every interval), the
/// energy-only market, and finally portfolio re-optimisation and state
/// advance. Deterministic for identical inputs.
pub fn run_simulation(input: &SimulationInput) -> Result<SimulationReport> {
    input.validate()?;
    let fleet = &input.fleet;
    let series = &input.series;
    let market = &input.market;
    let prices = &market.prices;
    let bounds = market.bounds;
    let horizon = series.len();

    // preparation
    let residual = residual_load(&series.demand, series.vre.values(), &series.net_exports)?;
    let merit = build_merit_order(fleet, prices)?;
    let pfc_series = price_forward_curve(&merit, &residual, bounds);
    let pfc = pfc_series.values();
    let charge_price = percentile(pfc, 0.25);
    let discharge_price = percentile(pfc, 0.75);

    let costs: Vec<f64> = fleet.iter().map(|u| variable_cost(u, prices)).collect::<Result<_>>()?;
    let index: BTreeMap<&str, usize> = fleet.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    let mut owners: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in fleet.iter().enumerate() {
        owners.entry(u.owner_id.as_str()).or_default().push(i);
    }

    let mut states = initial_states(fleet, prices, residual.values()[0])?;
    let mut storage = input.storage.clone();
    let mut held: Vec<ReserveAward> = Vec::new();
    let mut shortfall = (0.0, 0.0);
    let mut records = Vec::with_capacity(horizon);
    let mut trace = input.record_dispatch.then(|| Vec::with_capacity(horizon * fleet.len()));

    for t in 0..horizon {
        let timestamp: NaiveDateTime = series.demand.timestamp(t);
        let block_start = t % BLOCK_INTERVALS == 0;
        if block_start {
            for s in states.iter_mut() {
                s.reserved_positive = 0.0;
                s.reserved_negative = 0.0;
            }
            held.clear();
        }

        // 1. heat
        let heat_demand = series.heat_demand.values()[t];
        let heat = clear_heat(fleet, &mut states, heat_demand, prices)?;

        // 2. reserve
        let mut reserve_payment = 0.0;
        if block_start {
            let block = t..(t + BLOCK_INTERVALS).min(horizon);
            let mut bids = Vec::new();
            for (u, s) in fleet.iter().zip(&states) {
                bids.extend(formulate_reserve_bids(u, s, pfc, block.clone(), prices)?);
            }
            let cleared = clear_reserve(&bids, market.reserve);
            for a in &cleared.awards {
                let s = &mut states[index[a.unit_id.as_str()]];
                match a.direction {
                    Direction::Positive => s.reserved_positive += a.awarded,
                    Direction::Negative => s.reserved_negative += a.awarded,
                }
            }
            reserve_payment = cleared.payments();
            shortfall = (cleared.shortfall_positive, cleared.shortfall_negative);
            held = cleared.awards;
        }
        let deployment = deploy_reserve(&held, series.activation.values()[t]);

        // 3. energy-only market
        let mut book: Vec<Bid> = Vec::new();
        for (u, s) in fleet.iter().zip(&states) {
            book.extend(formulate_energy_bids(u, s, pfc, t, prices, bounds)?);
        }
        for st in &storage {
            book.extend(formulate_storage_bids(st, charge_price, discharge_price));
        }
        let residual_t = residual.values()[t];
        let cleared = clear_energy(&book, residual_t, bounds);

        let mut awarded = vec![0.0; fleet.len()];
        let mut storage_flow: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for (bid, &q) in book.iter().zip(&cleared.accepted) {
            match bid.segment {
                Segment::MustRun | Segment::Flexible => awarded[index[bid.unit_id.as_str()]] += q,
                Segment::StorageCharge => storage_flow.entry(bid.unit_id.as_str()).or_default().0 += q,
                Segment::StorageDischarge => storage_flow.entry(bid.unit_id.as_str()).or_default().1 += q,
            }
        }

        // 4. portfolio re-optimisation and state advance
        let mut setpoints = vec![0.0; fleet.len()];
        let mut imbalance = 0.0;
        for members in owners.values() {
            let portfolio: Vec<PortfolioMember<'_>> = members
                .iter()
                .map(|&i| PortfolioMember {
                    plant: &fleet[i],
                    state: &states[i],
                    awarded: awarded[i],
                })
                .collect();
            let result = portfolio_rebalance(&portfolio, prices)?;
            imbalance += result.imbalance;
            for (&i, x) in members.iter().zip(result.setpoints) {
                setpoints[i] = x;
            }
        }

        let mut record = IntervalRecord {
            timestamp,
            demand_mw: series.demand.values()[t],
            vre_mw: series.vre_total(t),
            net_exports_mw: series.net_exports.values()[t],
            residual_mw: residual_t,
            clearing_price: cleared.clearing_price,
            deficit_mw: cleared.deficit,
            surplus_mw: cleared.surplus_vre,
            imbalance_mw: imbalance,
            reserve_activation_mw: deployment.total(),
            activation_clipped_mw: deployment.clipped,
            reserve_shortfall_pos_mw: shortfall.0,
            reserve_shortfall_neg_mw: shortfall.1,
            reserve_payment_eur: reserve_payment,
            heat_demand_mwth: heat_demand,
            heat_unserved_mwth: heat.unserved_heat,
            heat_penalty_eur: heat.unserved_heat * INTERVAL_HOURS * market.unserved_heat_penalty,
            ..IntervalRecord::default()
        };

        for (i, u) in fleet.iter().enumerate() {
            let activation = deployment.get(&u.id);
            let (next, entry) = advance_state(u, &states[i], setpoints[i], activation);
            let f = u.fuel.index();
            record.thermal_mw += awarded[i];
            record.generation_mwh[f] += entry.generation_mwh;
            record.startups[f] += u32::from(entry.started);
            record.fuel_mwh_th += entry.fuel_mwh_th;
            record.co2_t += entry.co2_t;
            record.startup_cost_eur += entry.startup_cost;
            record.variable_cost_eur += entry.generation_mwh * costs[i];
            if let Some(trace) = trace.as_mut() {
                trace.push(UnitInterval {
                    awarded: awarded[i],
                    setpoint: setpoints[i],
                    activation,
                    online: next.online,
                    started: entry.started,
                    reserved_positive: states[i].reserved_positive,
                    reserved_negative: states[i].reserved_negative,
                    committed_heat: states[i].committed_heat,
                });
            }
            states[i] = next;
        }

        for st in storage.iter_mut() {
            let (charge, discharge) = storage_flow.get(st.id.as_str()).copied().unwrap_or_default();
            st.state_of_charge = (st.state_of_charge + charge * INTERVAL_HOURS * st.round_trip_efficiency
                - discharge * INTERVAL_HOURS)
                .clamp(0.0, st.energy_capacity);
            record.storage_charge_mw += charge;
            record.storage_discharge_mw += discharge;
        }
        records.push(record);
    }

    let clipped: f64 = records.iter().map(|r| r.activation_clipped_mw).sum();
    if clipped > 0.0 {
        warn!(
            "{:.1} MWh of reserve activation exceeded the procured bands and was clipped",
            clipped * INTERVAL_HOURS
        );
    }

    let mut installed = BTreeMap::new();
    for u in fleet {
        *installed.entry(u.fuel).or_insert(0.0) += u.nominal_capacity;
    }
    Ok(SimulationReport {
        metadata: RunMetadata {
            scenario: input.name.clone(),
            year: series.year(),
            intervals: horizon,
            input_hashes: input.input_hashes.clone(),
        },
        records,
        installed_mw: installed,
        unit_ids: fleet.iter().map(|u| u.id.clone()).collect(),
        forward_curve: pfc.to_vec(),
        dispatch: trace,
    })
}
