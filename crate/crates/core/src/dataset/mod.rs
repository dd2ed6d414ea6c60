//! Meter and irradiance ingestion, synthetic data, windowing and
//! per-center preparation.

pub mod csv_io;
mod normalize;
mod partition;
mod series;
pub mod synth;
mod window;

pub use csv_io::{attach_irradiance, load_irradiance_csv, load_meter_csv, IrradianceTable, MeterSeries};
pub use normalize::{NormStats, Range};
pub use partition::{
    partition_centers, prepare_all, prepare_center, split_train_test, Assignment, CenterDataset, PreparedCenter,
};
pub use series::{ProsumerSeries, Variate, NET_LOAD_TOLERANCE, SLOTS_PER_DAY};
pub use synth::{synthesize, ConsumptionArchetype, SynthCenter, SynthConfig};
pub use window::{make_windows, WindowSample};
