//! Overlap and surface metrics, box-prompt baselines and report aggregation.

mod aggregate;
mod boxes;
mod edt;
mod surface;

pub use aggregate::{aggregate, AggregationReport, CellMean, ClassRow, GroupRow, MetricsRecord};
pub use boxes::{box_as_prediction, loose_box, tight_box, SliceBox, AXIAL, LOOSE_SHIFT_FRAC};
pub use edt::{distance_field, squared_distance_field};
pub use surface::{boundary_voxels, dsc, nsd, nsd_with, Tolerance};
