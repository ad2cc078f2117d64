//! Two-stage perception pipeline: a CNN estimates the contact force from a
//! short window of wavelength shifts; above the gate threshold, four MLPs
//! classify the contact into half-cell-shifted virtual grids and the
//! multigrid integration fuses their softmax outputs into one point.

mod grids;
mod model;
mod nip;
mod train;

pub use grids::{build_grids, cell_of, GridName, GridSpec, CELL_HEIGHT_MM, CELL_WIDTH_MM};
pub use model::Localizations;
pub use model::{force_net_spec, loc_net_spec, ContactEstimate, PipelineConfig, PipelineModel, DEFAULT_GATE_N};
pub use nip::{nip_integrate, NipIntegrator};
pub use train::{extract_samples, train_pipeline, training_stats, DataSplit, SampleSet};
