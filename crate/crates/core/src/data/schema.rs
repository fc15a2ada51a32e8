use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns with more distinct numeric values than this are inferred as
/// continuous.
pub const DEFAULT_DISTINCT_THRESHOLD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

/// Kind-specific column metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnType {
    Categorical {
        vocabulary: Vec<String>,
    },
    Continuous {
        min: f64,
        max: f64,
        #[serde(default)]
        integer_valued: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: ColumnType,
}

impl ColumnSpec {
    pub fn categorical(name: impl Into<String>, vocabulary: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            ty: ColumnType::Categorical { vocabulary },
        }
    }

    pub fn continuous(name: impl Into<String>, min: f64, max: f64, integer_valued: bool) -> Self {
        ColumnSpec {
            name: name.into(),
            ty: ColumnType::Continuous {
                min,
                max,
                integer_valued,
            },
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.ty {
            ColumnType::Categorical { .. } => ColumnKind::Categorical,
            ColumnType::Continuous { .. } => ColumnKind::Continuous,
        }
    }

    /// Number of encoded features this column occupies.
    pub fn encoded_width(&self) -> usize {
        match &self.ty {
            ColumnType::Categorical { vocabulary } => vocabulary.len(),
            ColumnType::Continuous { .. } => 1,
        }
    }
}

/// Ordered column descriptions: the contract between raw tables and
/// encoded matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
}

impl TableSchema {
    /// Builds a schema and checks its invariants.
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = TableSchema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("schema has no columns".into()));
        }
        let mut names = HashSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", col.name)));
            }
            match &col.ty {
                ColumnType::Categorical { vocabulary } => {
                    if vocabulary.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical column '{}' has an empty vocabulary",
                            col.name
                        )));
                    }
                    let unique: HashSet<&str> = vocabulary.iter().map(String::as_str).collect();
                    if unique.len() != vocabulary.len() {
                        return Err(Error::Schema(format!(
                            "categorical column '{}' has duplicate labels",
                            col.name
                        )));
                    }
                }
                ColumnType::Continuous { min, max, .. } => {
                    if !min.is_finite() || !max.is_finite() || min > max {
                        return Err(Error::Schema(format!(
                            "continuous column '{}' has invalid range [{min}, {max}]",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Total width of the encoded representation.
    pub fn encoded_width(&self) -> usize {
        self.columns.iter().map(ColumnSpec::encoded_width).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: TableSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Knobs for [`infer_schema`].
#[derive(Debug, Clone, Default)]
pub struct InferOptions {
    /// Per-column kind overrides; these always win over inference.
    pub overrides: BTreeMap<String, ColumnKind>,
    /// Distinct-value threshold; `None` means [`DEFAULT_DISTINCT_THRESHOLD`].
    pub distinct_threshold: Option<usize>,
}

/// Infers a schema from comma-separated text with a header row.
///
/// A column is continuous when every cell parses as a finite number and it
/// has more than `distinct_threshold` distinct values; otherwise it is
/// categorical.
pub fn infer_schema(table_text: &str, options: &InferOptions) -> Result<TableSchema> {
    let (header, records) = super::table::parse_records(table_text.as_bytes())?;
    infer_from_records(&header, &records, options)
}

pub(crate) fn infer_from_records(
    header: &[String],
    records: &[Vec<String>],
    options: &InferOptions,
) -> Result<TableSchema> {
    if records.is_empty() {
        return Err(Error::Empty("table has a header but no data rows".into()));
    }
    for name in options.overrides.keys() {
        if !header.iter().any(|h| h == name) {
            return Err(Error::Schema(format!("override names unknown column '{name}'")));
        }
    }
    let threshold = options.distinct_threshold.unwrap_or(DEFAULT_DISTINCT_THRESHOLD);

    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let cells: Vec<&str> = records.iter().map(|r| r[j].as_str()).collect();
        let numeric: Option<Vec<f64>> = cells.iter().map(|c| parse_number(c)).collect();

        let kind = match options.overrides.get(name) {
            Some(kind) => *kind,
            None => match &numeric {
                Some(values) if distinct_count(values) > threshold => ColumnKind::Continuous,
                _ => ColumnKind::Categorical,
            },
        };

        let spec = match kind {
            ColumnKind::Continuous => {
                let values = match numeric {
                    Some(values) => values,
                    None => {
                        let row = cells.iter().position(|c| parse_number(c).is_none()).unwrap_or(0);
                        return Err(Error::Parse {
                            row: row + 1,
                            column: name.clone(),
                            message: format!("'{}' is not a finite number", cells[row]),
                        });
                    }
                };
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let integer_valued = values.iter().all(|v| v.fract() == 0.0);
                ColumnSpec::continuous(name.clone(), min, max, integer_valued)
            }
            ColumnKind::Categorical => {
                ColumnSpec::categorical(name.clone(), sorted_vocabulary(&cells, numeric.is_some()))
            }
        };
        columns.push(spec);
    }
    TableSchema::new(columns)
}

pub(crate) fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn distinct_count(values: &[f64]) -> usize {
    values.iter().map(|v| v.to_bits()).collect::<BTreeSet<_>>().len()
}

/// Vocabulary in a fixed order: numeric order when every label is numeric,
/// lexicographic otherwise.
fn sorted_vocabulary(cells: &[&str], all_numeric: bool) -> Vec<String> {
    let unique: BTreeSet<&str> = cells.iter().copied().collect();
    let mut vocab: Vec<String> = unique.into_iter().map(str::to_owned).collect();
    if all_numeric {
        vocab.sort_by(|a, b| {
            let (x, y) = (parse_number(a).unwrap(), parse_number(b).unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    }
    vocab
}
