//! Ingestion, synthetic series, lag windows, cost rows and scenarios.

pub mod cost;
pub mod devices;
pub mod ingest;
pub mod synthetic;
pub mod windows;

pub use cost::{cap_costs, cost_profile, NEURAL_COST_CAP};
pub use devices::{
    default_scenario, load_device_file, parse_device_file, table1_appliances, Appliance, ScenarioTemplate,
    SlotClock, BATTERY_UNITS, BATTERY_UNIT_KWH, DEFAULT_DAY_START_HOUR, INVERTER_KW,
};
pub use ingest::{ingest, parse_timestamp, write_table, IngestReport, SeriesTable};
pub use synthetic::{generate, SyntheticConfig};
pub use windows::{all_windows, build_windows, check_no_leakage, LagSpec, SplitSpec, Window, WindowSplit};
