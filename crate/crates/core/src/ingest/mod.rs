//! Typed sensor and laboratory tables, their CSV representation, the JSON
//! run report, and a synthetic VDU-like data generator.

mod csvio;
mod report;
pub mod synth;
mod table;

pub use csvio::{parse_lab_csv, parse_sensor_csv, write_lab_csv, write_sensor_csv, ColumnMap};
pub use report::{read_report, render_report, write_report, CleanReport};
pub use synth::{
    generate_synthetic, replay_lab_counts, GroundTruth, LabCounts, LabReplay, SynthSpec, Synthetic,
};
pub use table::{LabTable, SensorTable, N_POINTS, POINT_LABELS};
