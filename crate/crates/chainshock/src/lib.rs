//! Firm-level simulator of how localized activity restrictions ripple through
//! a supply network.
//!
//! The crate models an economy of firms connected by daily supplier-client
//! flows. Each firm holds input inventories, places replenishment orders,
//! produces subject to labor restrictions and input availability, and rations
//! scarce output across its clients. On top of that kernel sit tools to
//! generate or load networks, calibrate link volumes against sector-level
//! accounts, schedule regional restriction windows, and run Monte Carlo
//! comparisons of coordination policies (all regions restricted at once versus
//! staggered in time).
//!
//! Module map:
//!
//! - [`network`] — firm/link data model, CSV I/O, synthetic generation,
//!   structural diagnostics.
//! - [`calibration`] — distributes sector-to-sector account flows onto
//!   individual links and derives each firm's baseline production.
//! - [`shock`] — sector restriction-rate table, coverage tiers, and schedules
//!   of regional restriction windows.
//! - [`dynamics`] — the daily production/ordering/rationing kernel.
//! - [`scenarios`] — builders for the standard experiment designs
//!   (single-region sweeps, region pairs, nationwide stagger).
//! - [`experiment`] — batched Monte Carlo execution, loss accounting, the
//!   rank-sum significance test, and report/file emission.
//! - [`cli`] — the `chainshock` binary's argument parsing and subcommand
//!   dispatch.
//!
//! The `examples/` directory has one runnable program per capability; start
//! with `cargo run --example single_shock_run`.

pub mod calibration;
pub mod cli;
pub mod dynamics;
pub mod experiment;
pub mod network;
mod numfmt;
pub mod scenarios;
pub mod shock;

pub use calibration::{CalibratedNetwork, CalibrationReport, IoTable};
pub use dynamics::{ration, ration_literal, DayRecord, SimParams, Simulator};
pub use experiment::{Baseline, LossAccumulator, LossMatrix, LossSummary, PairComparison};
pub use network::{Firm, FirmId, RegionId, SectorCode, SupplyLink, SupplyNetwork};
pub use scenarios::{NationwideScenario, PairScenario, ScenarioFamily, ScenarioSpec};
pub use shock::{CoverageLevel, CoverageSets, LockdownSchedule, RestrictionWindow, SectorTable};
