//! CSV ingestion: schema-checked loading, summaries, and the train/validation split.

mod schema;
mod split;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{ColumnKind, ColumnSpec, DatasetSchema};
pub use split::split_train_validation;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("input has no header row")]
    MissingHeader,
    #[error("required column `{0}` is missing from the header")]
    MissingColumn(String),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{} malformed row(s); first: {}", .0.len(), .0[0])]
    Rows(Vec<RowError>),
    #[error("split ratio {0} is outside (0, 1)")]
    InvalidRatio(f64),
    #[error("no records to split")]
    EmptyInput,
    #[error("record {0} has no attrition label")]
    Unlabeled(EmployeeId),
    #[error("class `{label}` has {count} member(s); stratification needs at least 2")]
    ClassTooSmall { label: String, count: usize },
}

/// A problem with one data row. `row` is 1-based and counts data rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub row: usize,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "row {}, column `{}`: {}", self.row, c, self.message),
            None => write!(f, "row {}: {}", self.row, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmployeeId(pub String);

impl fmt::Display for EmployeeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EmployeeId {
    fn from(s: &str) -> Self {
        EmployeeId(s.to_owned())
    }
}

/// A parsed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Number(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// One validated dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmployeeRecord {
    pub id: EmployeeId,
    /// Every present cell, keyed by column name.
    pub raw: BTreeMap<String, Cell>,
    /// Current tenure (CT), in years.
    pub years_at_company: f64,
    pub total_working_years: f64,
    pub num_companies_worked: f64,
    /// `None` for candidates and unlabeled scoring input.
    pub attrition: Option<bool>,
    /// Set when `years_at_company > total_working_years`. Such rows are kept.
    pub inconsistent: bool,
}

impl EmployeeRecord {
    pub fn get(&self, column: &str) -> Option<&Cell> {
        self.raw.get(column)
    }

    /// Validates a map of textual cells against the schema. `row` is used for
    /// error reporting and as the fallback identifier.
    pub fn from_fields(
        schema: &DatasetSchema,
        fields: &BTreeMap<String, String>,
        row: usize,
        require_target: bool,
    ) -> Result<Self, RowError> {
        let err = |column: &str, message: String| RowError {
            row,
            column: Some(column.to_owned()),
            message,
        };

        let mut raw = BTreeMap::new();
        for col in &schema.columns {
            let text = fields.get(&col.name).map(|s| s.trim()).unwrap_or("");
            let required = if col.name == schema.target {
                require_target
            } else {
                col.required
            };
            if text.is_empty() {
                if required {
                    return Err(err(&col.name, "missing value".into()));
                }
                continue;
            }
            let cell = match col.kind {
                ColumnKind::Numeric => {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| err(&col.name, format!("`{text}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(err(&col.name, format!("`{text}` is not finite")));
                    }
                    Cell::Number(v)
                }
                ColumnKind::Categorical | ColumnKind::Boolean => {
                    if let Some(levels) = &col.levels {
                        if !levels.iter().any(|l| l == text) {
                            return Err(err(
                                &col.name,
                                format!("`{text}` is not one of {levels:?}"),
                            ));
                        }
                    }
                    Cell::Text(text.to_owned())
                }
            };
            raw.insert(col.name.clone(), cell);
        }

        let number = |name: &str| raw.get(name).and_then(Cell::as_number).unwrap_or(0.0);
        let years_at_company = number(&schema.tenure_column);
        let total_working_years = number(&schema.total_years_column);
        let num_companies_worked = number(&schema.companies_column);
        for (name, v) in [
            (&schema.tenure_column, years_at_company),
            (&schema.total_years_column, total_working_years),
            (&schema.companies_column, num_companies_worked),
        ] {
            if v < 0.0 {
                return Err(err(name, format!("{v} is negative")));
            }
        }

        let attrition = raw
            .get(&schema.target)
            .and_then(Cell::as_text)
            .map(|level| level == schema.positive_level());

        let id = schema
            .id_column
            .as_ref()
            .and_then(|c| raw.get(c))
            .map(|cell| EmployeeId(cell.to_string()))
            .unwrap_or_else(|| EmployeeId(row.to_string()));

        Ok(EmployeeRecord {
            id,
            raw,
            years_at_company,
            total_working_years,
            num_companies_worked,
            attrition,
            inconsistent: years_at_company > total_working_years,
        })
    }
}

/// Aggregate counts for a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub attrition_ratio: Option<f64>,
    pub mean_monthly_income: Option<f64>,
}

/// What to do with rows that fail validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowErrorPolicy {
    /// Any malformed row fails the whole load, reporting every bad row.
    #[default]
    Fail,
    /// Malformed rows are left out and listed in `LoadedDataset::rejected`.
    DropWithReport,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// The target column must be present and filled (training, evaluation).
    pub require_target: bool,
    pub on_row_error: RowErrorPolicy,
}

impl LoadOptions {
    pub fn labeled() -> Self {
        LoadOptions {
            require_target: true,
            on_row_error: RowErrorPolicy::Fail,
        }
    }

    pub fn unlabeled() -> Self {
        LoadOptions {
            require_target: false,
            on_row_error: RowErrorPolicy::Fail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub records: Vec<EmployeeRecord>,
    pub summary: DatasetSummary,
    pub rejected: Vec<RowError>,
    /// Header columns the schema does not declare; they are ignored.
    pub unknown_columns: Vec<String>,
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    schema: &DatasetSchema,
    options: LoadOptions,
) -> Result<LoadedDataset, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_dataset(std::io::BufReader::new(file), schema, options)
}

/// Parses RFC-4180 CSV with a header row.
pub fn read_dataset<R: Read>(
    reader: R,
    schema: &DatasetSchema,
    options: LoadOptions,
) -> Result<LoadedDataset, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = csv.records();

    let header: Vec<String> = match rows.next() {
        Some(Ok(h)) => h
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let s = if i == 0 { s.trim_start_matches('\u{feff}') } else { s };
                s.trim().to_owned()
            })
            .collect(),
        Some(Err(e)) => return Err(IngestError::Csv(e.to_string())),
        None => return Err(IngestError::MissingHeader),
    };
    if header.iter().all(String::is_empty) {
        return Err(IngestError::MissingHeader);
    }
    let positions = schema.bind_header(&header, options.require_target)?;
    let unknown_columns: Vec<String> = header
        .iter()
        .filter(|h| schema.column(h).is_none())
        .cloned()
        .collect();
    if !unknown_columns.is_empty() {
        log::warn!("ignoring undeclared columns: {unknown_columns:?}");
    }

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, row) in rows.enumerate() {
        let row_number = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowError {
                    row: row_number,
                    column: None,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if row.len() != header.len() {
            rejected.push(RowError {
                row: row_number,
                column: None,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
            continue;
        }
        let fields: BTreeMap<String, String> = positions
            .iter()
            .map(|(name, &idx)| (name.clone(), row[idx].to_owned()))
            .collect();
        match EmployeeRecord::from_fields(schema, &fields, row_number, options.require_target) {
            Ok(rec) => records.push(rec),
            Err(e) => rejected.push(e),
        }
    }

    if !rejected.is_empty() && options.on_row_error == RowErrorPolicy::Fail {
        return Err(IngestError::Rows(rejected));
    }
    let inconsistent = records.iter().filter(|r| r.inconsistent).count();
    if inconsistent > 0 {
        log::warn!("{inconsistent} record(s) have tenure above total working years");
    }

    let summary = summarize(&records, schema);
    Ok(LoadedDataset {
        records,
        summary,
        rejected,
        unknown_columns,
    })
}

/// Writes records back as CSV with one column per schema column, in schema order.
pub fn write_dataset<W: Write>(
    writer: W,
    records: &[EmployeeRecord],
    schema: &DatasetSchema,
) -> Result<(), IngestError> {
    let mut csv = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| IngestError::Csv(e.to_string());
    csv.write_record(schema.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for rec in records {
        let row: Vec<String> = schema
            .columns
            .iter()
            .map(|c| rec.raw.get(&c.name).map(Cell::to_string).unwrap_or_default())
            .collect();
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush().map_err(|e| IngestError::Csv(e.to_string()))
}

pub fn summarize(records: &[EmployeeRecord], schema: &DatasetSchema) -> DatasetSummary {
    let n_rows = records.len();
    let yes = records.iter().filter(|r| r.attrition == Some(true)).count();
    let no = records.iter().filter(|r| r.attrition == Some(false)).count();

    let mut class_counts = BTreeMap::new();
    if yes + no > 0 {
        class_counts.insert(schema.positive_level().to_owned(), yes);
        class_counts.insert(schema.negative_level().to_owned(), no);
    }
    let attrition_ratio = (n_rows > 0 && yes + no > 0).then(|| yes as f64 / n_rows as f64);

    let incomes: Vec<f64> = records
        .iter()
        .filter_map(|r| r.get(&schema.compensation_column).and_then(Cell::as_number))
        .collect();
    let mean_monthly_income =
        (!incomes.is_empty()).then(|| incomes.iter().sum::<f64>() / incomes.len() as f64);

    DatasetSummary {
        n_rows,
        class_counts,
        attrition_ratio,
        mean_monthly_income,
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    fn load(text: &str, options: LoadOptions) -> Result<LoadedDataset, IngestError> {
        read_dataset(text.as_bytes(), &tiny_schema(), options)
    }

    #[test]
    fn loads_rows_in_order_with_summary() {
        let ds = load(tiny_csv(), LoadOptions::labeled()).unwrap();
        let ids: Vec<_> = ds.records.iter().map(|r| r.id.0.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3", "4"]);
        assert_eq!(ds.summary.n_rows, 4);
        assert_eq!(ds.summary.class_counts["Yes"], 1);
        assert_eq!(ds.summary.class_counts["No"], 3);
        assert_eq!(ds.summary.attrition_ratio, Some(0.25));
        assert_eq!(ds.summary.mean_monthly_income, Some(2650.0));
    }

    #[test]
    fn header_only_gives_empty_dataset() {
        let header = tiny_csv().lines().next().unwrap();
        let ds = load(header, LoadOptions::labeled()).unwrap();
        assert!(ds.records.is_empty());
        assert_eq!(ds.summary.n_rows, 0);
        assert_eq!(ds.summary.attrition_ratio, None);
        assert_eq!(ds.summary.mean_monthly_income, None);
    }

    #[test]
    fn empty_input_has_no_header() {
        assert!(matches!(
            load("", LoadOptions::labeled()),
            Err(IngestError::MissingHeader)
        ));
    }

    #[test]
    fn missing_required_column_is_named() {
        let text = "Id,Attrition,Gender,JobRole,YearsAtCompany,TotalWorkingYears,NumCompaniesWorked\n";
        match load(text, LoadOptions::labeled()) {
            Err(IngestError::MissingColumn(c)) => assert_eq!(c, "MonthlyIncome"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn target_optional_for_unlabeled_loads() {
        let text = "Id,Gender,JobRole,MonthlyIncome,YearsAtCompany,TotalWorkingYears,NumCompaniesWorked\n\
                    7,Male,Sales,100,1,1,0\n";
        let ds = load(text, LoadOptions::unlabeled()).unwrap();
        assert_eq!(ds.records[0].attrition, None);
        assert!(ds.summary.class_counts.is_empty());
        assert_eq!(ds.summary.attrition_ratio, None);
    }

    #[test]
    fn bad_numeric_cell_reports_row_and_column() {
        let text = tiny_csv().replace("2500", "lots");
        match load(&text, LoadOptions::labeled()) {
            Err(IngestError::Rows(errs)) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].row, 3);
                assert_eq!(errs[0].column.as_deref(), Some("MonthlyIncome"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drop_with_report_keeps_good_rows() {
        let text = tiny_csv().replace("2500", "NaN");
        let opts = LoadOptions {
            require_target: true,
            on_row_error: RowErrorPolicy::DropWithReport,
        };
        let ds = load(&text, opts).unwrap();
        assert_eq!(ds.records.len(), 3);
        assert_eq!(ds.rejected.len(), 1);
        assert_eq!(ds.summary.n_rows, 3);
    }

    #[test]
    fn ragged_row_is_rejected() {
        let text = format!("{}5,No\n", tiny_csv());
        match load(&text, LoadOptions::labeled()) {
            Err(IngestError::Rows(errs)) => assert_eq!(errs[0].row, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_tenure_is_flagged_not_dropped() {
        let ds = load(tiny_csv(), LoadOptions::labeled()).unwrap();
        let flagged: Vec<_> = ds.records.iter().filter(|r| r.inconsistent).collect();
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].id.0, "4");
    }

    #[test]
    fn row_index_is_fallback_id() {
        let mut schema = tiny_schema();
        schema.id_column = None;
        let ds = read_dataset(tiny_csv().as_bytes(), &schema, LoadOptions::labeled()).unwrap();
        assert_eq!(ds.records[2].id.0, "3");
    }

    #[test]
    fn bom_and_unknown_columns_tolerated() {
        let text = "\u{feff}Id,Attrition,Gender,JobRole,MonthlyIncome,YearsAtCompany,TotalWorkingYears,NumCompaniesWorked,Extra\n\
                    1,Yes,Female,Sales,1000,2,5,2,x\n";
        let ds = load(text, LoadOptions::labeled()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.unknown_columns, ["Extra"]);
    }

    #[test]
    fn undeclared_level_is_rejected() {
        let mut schema = tiny_schema();
        let col = schema.columns.iter_mut().find(|c| c.name == "Gender").unwrap();
        col.levels = Some(vec!["Female".into(), "Male".into()]);
        let text = tiny_csv().replace("Female,Sales", "Other,Sales");
        assert!(read_dataset(text.as_bytes(), &schema, LoadOptions::labeled()).is_err());
    }

    #[test]
    fn summarize_arithmetic() {
        let ds = load(tiny_csv(), LoadOptions::labeled()).unwrap();
        let two = &ds.records[..2];
        let s = summarize(two, &tiny_schema());
        assert_eq!(s.mean_monthly_income, Some(2000.0));
        assert_eq!(s.attrition_ratio, Some(0.5));
    }

    #[test]
    fn compensation_absent_reports_none() {
        let mut schema = tiny_schema();
        schema.compensation_column = "CTC".into();
        let ds = read_dataset(tiny_csv().as_bytes(), &schema, LoadOptions::labeled()).unwrap();
        assert_eq!(ds.summary.mean_monthly_income, None);
    }

    #[test]
    fn schema_rejects_duplicates_and_bad_target() {
        let mut schema = tiny_schema();
        schema.columns.push(schema.columns[0].clone());
        assert!(schema.validate().is_err());

        let mut schema = tiny_schema();
        schema.columns[1].kind = ColumnKind::Categorical;
        assert!(schema.validate().is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let schema = tiny_schema();
        let ds = read_dataset(tiny_csv().as_bytes(), &schema, LoadOptions::labeled()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds.records, &schema).unwrap();
        let again = read_dataset(buf.as_slice(), &schema, LoadOptions::labeled()).unwrap();
        assert_eq!(ds.records, again.records);
    }
}
