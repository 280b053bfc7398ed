//! Tabular data: schema roles, ingestion, preprocessing, partitioning by
//! population marker, and stratified splitting.

mod dataset;
mod io;
mod ops;
mod schema;

pub use dataset::{ColumnData, Dataset, Provenance, RowId, SplitTag};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset, TableFormat};
pub use ops::{
    allocate_train_counts, partition_by_pm, preprocess, stratified_split, SplitPair, SubpopulationPartition,
    DEFAULT_TRAIN_FRACTION,
};
pub use schema::{ColumnKind, ColumnRole, ColumnSpec, Schema};
