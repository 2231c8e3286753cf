//! Reading ECG / noise records and writing result artifacts.

mod table;
pub mod wfdb;

pub use table::{csv_sample_rate, fmt_f64, read_csv, read_results, write_columns, write_results, write_series, Column};
pub use wfdb::{read_record, read_wfdb, RecordHeader};
