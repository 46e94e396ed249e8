//! Case-level CSV input and aggregation into category counts.

use std::collections::BTreeMap;
use std::io::Read;

use hetop::{CategoryCountTable, HetopError};

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub group: String,
    /// `None` for a missing response.
    pub response: Option<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct CaseReadOptions {
    /// Field values (besides the empty string) that mark a missing response.
    pub missing_tokens: Vec<String>,
    /// Number of substantive categories; responses at or above it are rejected.
    pub n_categories: Option<usize>,
}

impl Default for CaseReadOptions {
    fn default() -> Self {
        Self { missing_tokens: vec!["NA".into()], n_categories: None }
    }
}

fn parse_error(row: usize, message: impl Into<String>) -> HetopError {
    HetopError::Parse { row, message: message.into() }
}

/// Reads `group,response[,weight]`. Row numbers in errors count the header
/// as row 1.
pub fn read_cases<R: Read>(reader: R, opts: &CaseReadOptions) -> Result<Vec<CaseRecord>, HetopError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(gcol), Some(rcol)) = (column("group"), column("response")) else {
        return Err(parse_error(1, "case header must contain `group` and `response`"));
    };
    let wcol = column("weight");
    let mut cases = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_error(row, e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let group = field(gcol);
        if group.is_empty() {
            return Err(parse_error(row, "empty group label"));
        }
        let raw = field(rcol);
        let response = if raw.is_empty() || opts.missing_tokens.iter().any(|t| t == raw) {
            None
        } else {
            let k: usize = raw.parse().map_err(|_| parse_error(row, format!("unknown category value {raw:?}")))?;
            if let Some(n) = opts.n_categories {
                if k >= n {
                    return Err(parse_error(row, format!("unknown category value {k}; expected 0..{}", n - 1)));
                }
            }
            Some(k)
        };
        let weight = match wcol.map(field) {
            None | Some("") => 1.0,
            Some(w) => {
                let w: f64 = w.parse().map_err(|_| parse_error(row, format!("invalid weight {w:?}")))?;
                if !(w > 0.0) || !w.is_finite() {
                    return Err(parse_error(row, format!("weight must be positive, got {w}")));
                }
                w
            }
        };
        cases.push(CaseRecord { group: group.to_string(), response, weight });
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub table: CategoryCountTable,
    /// Missing-response cases left out of the table.
    pub dropped: usize,
}

// Sorting before summation makes the result independent of case order.
fn ordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Weighted counts per group (sorted by label) and category. With
/// `missing_as_category`, missing responses form one extra top category.
pub fn aggregate(
    cases: &[CaseRecord],
    missing_as_category: bool,
    n_categories: Option<usize>,
) -> Result<Aggregated, HetopError> {
    if cases.is_empty() {
        return Err(HetopError::InvalidData("no cases".into()));
    }
    let observed = cases.iter().filter_map(|c| c.response).max().map_or(0, |k| k + 1);
    let substantive = n_categories.unwrap_or(observed).max(observed);
    let width = substantive + usize::from(missing_as_category);
    let mut cells: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    let mut dropped = 0;
    for case in cases {
        let row = cells.entry(case.group.as_str()).or_insert_with(|| vec![Vec::new(); width]);
        match case.response {
            Some(k) => row[k].push(case.weight),
            None if missing_as_category => row[substantive].push(case.weight),
            None => dropped += 1,
        }
    }
    let mut labels = Vec::with_capacity(cells.len());
    let mut counts = Vec::with_capacity(cells.len());
    for (label, row) in cells {
        let row: Vec<f64> = row.into_iter().map(ordered_sum).collect();
        if row.iter().sum::<f64>() <= 0.0 {
            return Err(HetopError::InvalidData(format!("group {label:?} has zero total weight")));
        }
        labels.push(label.to_string());
        counts.push(row);
    }
    Ok(Aggregated { table: CategoryCountTable::new(labels, counts, None)?, dropped })
}
