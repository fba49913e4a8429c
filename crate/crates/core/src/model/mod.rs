//! Workbook data model: addresses, typed cells, sparse snapshots, and the
//! canonical byte form used for hashing and storage.

pub mod address;
pub mod canonical;
pub mod snapshot;
pub mod value;

pub use address::{column_name, format_a1, parse_a1, CellAddress, Rect, Region, SheetPattern};
pub use canonical::{canonicalize, snapshot_hash, SnapshotHash};
pub use snapshot::{Sheet, WorkbookSnapshot};
pub use value::{Cell, CellValue, ErrorCode, Number};
