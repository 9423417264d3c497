//! Encoded tensor records and the key-value store that holds them.

pub mod bench;
pub mod format;
pub mod store;

pub use bench::{bench_random_read, write_baseline, BenchmarkReport};
pub use format::{decode_record, decode_view, encode_record, Dtype, FormatError, RecordView, Tensor, TensorRecord, TensorView};
pub use store::{OpenMode, PatchStore, Snapshot, StoreError, WriteReport, DEFAULT_MAP_SIZE};
