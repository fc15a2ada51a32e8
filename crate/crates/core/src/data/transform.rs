use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::schema::{ColumnKind, ColumnType, TableSchema};
use super::table::{Cell, RawTable};

/// Where one source column lives on the encoded feature axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub source_column: usize,
    pub start: usize,
    pub width: usize,
}

impl ColumnSpan {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Contiguous spans covering `[0, n)` in schema order.
pub fn span_layout(schema: &TableSchema) -> Vec<ColumnSpan> {
    let mut start = 0;
    schema
        .columns
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let width = col.encoded_width();
            let span = ColumnSpan {
                source_column: i,
                start,
                width,
            };
            start += width;
            span
        })
        .collect()
}

/// Rows in the continuous training space together with the layout needed
/// to invert the encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: Array2<f64>,
    pub spans: Vec<ColumnSpan>,
    pub schema: TableSchema,
}

impl EncodedMatrix {
    pub fn new(values: Array2<f64>, schema: TableSchema) -> Result<Self> {
        let spans = span_layout(&schema);
        let m = EncodedMatrix {
            values,
            spans,
            schema,
        };
        m.check_layout()?;
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    /// Spans of categorical columns only.
    pub fn categorical_spans(&self) -> impl Iterator<Item = &ColumnSpan> {
        self.spans
            .iter()
            .filter(|s| self.schema.columns[s.source_column].kind() == ColumnKind::Categorical)
    }

    pub fn continuous_spans(&self) -> impl Iterator<Item = &ColumnSpan> {
        self.spans
            .iter()
            .filter(|s| self.schema.columns[s.source_column].kind() == ColumnKind::Continuous)
    }

    fn check_layout(&self) -> Result<()> {
        if self.spans != span_layout(&self.schema) {
            return Err(Error::Schema("span layout does not match the schema".into()));
        }
        let expected = self.schema.encoded_width();
        if self.values.ncols() != expected {
            return Err(Error::Shape(format!(
                "encoded width {} does not match schema width {expected}",
                self.values.ncols()
            )));
        }
        Ok(())
    }
}

/// One-hot encodes categoricals and min-max scales continuous columns.
pub fn encode(table: &RawTable) -> Result<EncodedMatrix> {
    let schema = table.schema();
    let spans = span_layout(schema);
    let width = schema.encoded_width();
    let mut values = Array2::<f64>::zeros((table.n_rows(), width));

    for (i, row) in table.rows().iter().enumerate() {
        let mut out = values.row_mut(i);
        for (span, (cell, spec)) in spans.iter().zip(row.iter().zip(&schema.columns)) {
            match (&spec.ty, cell) {
                (ColumnType::Categorical { vocabulary }, Cell::Category(label)) => {
                    let k = vocabulary.iter().position(|v| v == label).ok_or_else(|| {
                        Error::Schema(format!(
                            "row {}: label '{label}' not in vocabulary of '{}'",
                            i + 1,
                            spec.name
                        ))
                    })?;
                    out[span.start + k] = 1.0;
                }
                (ColumnType::Continuous { min, max, .. }, Cell::Number(v)) => {
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "row {}, column '{}' holds {v}",
                            i + 1,
                            spec.name
                        )));
                    }
                    out[span.start] = if max > min { (v - min) / (max - min) } else { 0.0 };
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "row {}, column '{}': cell kind does not match the schema",
                        i + 1,
                        spec.name
                    )))
                }
            }
        }
    }
    Ok(EncodedMatrix {
        values,
        spans,
        schema: schema.clone(),
    })
}

/// Inverse transform: argmax per categorical span (lowest index wins
/// ties), clamp-and-rescale per continuous entry with optional rounding.
pub fn decode(encoded: &EncodedMatrix) -> Result<RawTable> {
    encoded.check_layout()?;
    let schema = &encoded.schema;
    let rows = encoded
        .values
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            encoded
                .spans
                .iter()
                .map(|span| {
                    let spec = &schema.columns[span.source_column];
                    match &spec.ty {
                        ColumnType::Categorical { vocabulary } => {
                            let k = argmax(row.slice(ndarray::s![span.range()]));
                            Ok(Cell::Category(vocabulary[k].clone()))
                        }
                        ColumnType::Continuous {
                            min,
                            max,
                            integer_valued,
                        } => {
                            let u = row[span.start];
                            if u.is_nan() {
                                return Err(Error::NonFinite(format!(
                                    "encoded row {} has NaN in column '{}'",
                                    i + 1,
                                    spec.name
                                )));
                            }
                            let mut v = u.clamp(0.0, 1.0) * (max - min) + min;
                            if *integer_valued {
                                v = v.round();
                            }
                            Ok(Cell::Number(v.clamp(*min, *max)))
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    RawTable::new(schema.clone(), rows)
}

fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        // NaN never wins
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = k;
        }
    }
    best
}
