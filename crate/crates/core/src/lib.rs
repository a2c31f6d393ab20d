//! Deterministic agent-based simulation of a quarter-hourly electricity
//! market. Each interval clears a district-heat market, a control reserve
//! auction and a uniform-price energy-only market in that order, after which
//! every owner re-dispatches its portfolio under the units' technical limits.
//!
//! ```
//! use eomsim::engine::{run_simulation, MarketConfig, SimulationInput};
//! use eomsim::fixtures::{reference_prices, synthetic_series, ten_unit_fleet, SeriesShape};
//! use eomsim::report::deficit_stats;
//!
//! let fleet = ten_unit_fleet();
//! let series = synthetic_series(2017, 96, SeriesShape::for_capacity(7000.0), 1).unwrap();
//! let input = SimulationInput::new("demo", fleet, series, MarketConfig::new(reference_prices()));
//! let report = run_simulation(&input).unwrap();
//! assert_eq!(report.records.len(), 96);
//! assert_eq!(deficit_stats(&report).count, 0);
//! ```

pub mod dispatch;
pub mod energy;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod forecast;
pub mod heat;
pub mod io;
pub mod model;
pub mod report;
pub mod reserve;
pub mod scenario;

pub use engine::{run_simulation, MarketConfig, SeriesSet, SimulationInput};
pub use error::{Error, Result};
pub use model::{FuelKind, FuelPriceSet, PlantState, PlantUnit, StorageUnit, TimeSeries};
pub use report::SimulationReport;
