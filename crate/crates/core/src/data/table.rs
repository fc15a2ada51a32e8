use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::schema::{infer_from_records, parse_number, ColumnType, InferOptions, TableSchema};

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Category(String),
    Number(f64),
}

impl Cell {
    pub fn as_category(&self) -> Option<&str> {
        match self {
            Cell::Category(s) => Some(s),
            Cell::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Category(_) => None,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Category(s.to_owned())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

/// A validated table: every row is aligned to the schema's column order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    schema: TableSchema,
    rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(schema: TableSchema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        schema.validate()?;
        if rows.is_empty() {
            return Err(Error::Empty("table has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            check_row(&schema, row, i + 1)?;
        }
        Ok(RawTable { schema, rows })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Values of one column, in row order.
    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices
            .iter()
            .map(|&i| {
                self.rows
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("row index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        RawTable::new(self.schema.clone(), rows)
    }

    /// Re-expresses this table under another schema with the same column
    /// names, e.g. a synthetic table checked against the real table's
    /// fitted vocabulary.
    pub fn conform_to(&self, schema: &TableSchema) -> Result<Self> {
        if schema.len() != self.schema.len() {
            return Err(Error::Schema(format!(
                "column count differs: {} vs {}",
                self.schema.len(),
                schema.len()
            )));
        }
        let mapping = schema
            .columns
            .iter()
            .map(|c| {
                self.schema
                    .index_of(&c.name)
                    .ok_or_else(|| Error::Schema(format!("column '{}' missing", c.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                schema
                    .columns
                    .iter()
                    .zip(&mapping)
                    .map(|(spec, &src)| convert_cell(&row[src], &spec.ty, i + 1, &spec.name))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        RawTable::new(schema.clone(), rows)
    }
}

fn convert_cell(cell: &Cell, ty: &ColumnType, row: usize, column: &str) -> Result<Cell> {
    match (cell, ty) {
        (Cell::Category(s), ColumnType::Categorical { .. }) => Ok(Cell::Category(s.clone())),
        (Cell::Number(v), ColumnType::Continuous { .. }) => Ok(Cell::Number(*v)),
        (Cell::Number(v), ColumnType::Categorical { .. }) => Ok(Cell::Category(v.to_string())),
        (Cell::Category(s), ColumnType::Continuous { .. }) => {
            parse_number(s).map(Cell::Number).ok_or_else(|| Error::Parse {
                row,
                column: column.to_owned(),
                message: format!("'{s}' is not a finite number"),
            })
        }
    }
}

fn check_row(schema: &TableSchema, row: &[Cell], index: usize) -> Result<()> {
    if row.len() != schema.len() {
        return Err(Error::Shape(format!(
            "row {index} has {} cells, schema has {} columns",
            row.len(),
            schema.len()
        )));
    }
    for (cell, spec) in row.iter().zip(&schema.columns) {
        match (cell, &spec.ty) {
            (Cell::Category(label), ColumnType::Categorical { vocabulary }) => {
                if !vocabulary.iter().any(|v| v == label) {
                    return Err(Error::Parse {
                        row: index,
                        column: spec.name.clone(),
                        message: format!("label '{label}' is not in the vocabulary"),
                    });
                }
            }
            (Cell::Number(v), ColumnType::Continuous { .. }) => {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "row {index}, column '{}' holds {v}",
                        spec.name
                    )));
                }
            }
            _ => {
                return Err(Error::Schema(format!(
                    "row {index}, column '{}': cell kind does not match the schema",
                    spec.name
                )))
            }
        }
    }
    Ok(())
}

/// Parses header + records. Ragged rows and empty input are errors.
pub(crate) fn parse_records<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Empty("missing header row".into()));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_owned).collect());
    }
    Ok((header, records))
}

/// Reads a table from delimited text, inferring a schema when none is given.
pub fn read_table<R: Read>(reader: R, schema: Option<&TableSchema>) -> Result<RawTable> {
    let (header, records) = parse_records(reader)?;
    if records.is_empty() {
        return Err(Error::Empty("table has a header but no data rows".into()));
    }
    let schema = match schema {
        Some(s) => s.clone(),
        None => infer_from_records(&header, &records, &InferOptions::default())?,
    };
    schema.validate()?;

    let mut mapping = Vec::with_capacity(schema.len());
    for spec in &schema.columns {
        let pos = header
            .iter()
            .position(|h| *h == spec.name)
            .ok_or_else(|| Error::Schema(format!("column '{}' missing from header", spec.name)))?;
        mapping.push(pos);
    }
    if header.len() != schema.len() {
        return Err(Error::Schema(format!(
            "header has {} columns, schema has {}",
            header.len(),
            schema.len()
        )));
    }

    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = schema
            .columns
            .iter()
            .zip(&mapping)
            .map(|(spec, &src)| {
                let text = &rec[src];
                match &spec.ty {
                    ColumnType::Categorical { .. } => Ok(Cell::Category(text.clone())),
                    ColumnType::Continuous { .. } => {
                        parse_number(text).map(Cell::Number).ok_or_else(|| Error::Parse {
                            row: i + 1,
                            column: spec.name.clone(),
                            message: format!("'{text}' is not a finite number"),
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    RawTable::new(schema, rows)
}

pub fn load_table(path: impl AsRef<Path>, schema: Option<&TableSchema>) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(std::io::BufReader::new(file), schema)
}

/// Writes comma-separated text with a header, quoting cells only when
/// they contain a delimiter, quote, or newline.
pub fn write_table_to<W: Write>(table: &RawTable, writer: W) -> Result<()> {
    if table.schema.is_empty() {
        return Err(Error::Schema("cannot write a table with no columns".into()));
    }
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    wtr.write_record(table.schema.names())?;
    let mut buf: Vec<String> = Vec::with_capacity(table.schema.len());
    for row in &table.rows {
        buf.clear();
        buf.extend(row.iter().map(|c| match c {
            Cell::Category(s) => s.clone(),
            Cell::Number(v) => v.to_string(),
        }));
        wtr.write_record(&buf)?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn write_table(table: &RawTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_table_to(table, std::io::BufWriter::new(file))
}
