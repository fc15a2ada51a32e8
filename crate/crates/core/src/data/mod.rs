//! Raw tables, schemas, and the reversible encoding into the continuous
//! training space.

mod schema;
mod table;
mod transform;

pub use schema::{
    infer_schema, ColumnKind, ColumnSpec, ColumnType, InferOptions, TableSchema,
    DEFAULT_DISTINCT_THRESHOLD,
};
pub use table::{load_table, read_table, write_table, write_table_to, Cell, RawTable};
pub use transform::{decode, encode, span_layout, ColumnSpan, EncodedMatrix};
