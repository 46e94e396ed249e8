//! Count-level CSV: `group,weight,cat_0,...,cat_K`.

use std::io::Read;

use hetop::{CategoryCountTable, HetopError};

use crate::output::format_number;

fn parse_error(row: usize, message: impl Into<String>) -> HetopError {
    HetopError::Parse { row, message: message.into() }
}

/// Reads a count table. The `weight` column may be omitted, in which case
/// every group weighs 1.
pub fn read_counts<R: Read>(reader: R) -> Result<CategoryCountTable, HetopError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_error(1, e.to_string()))?.clone();
    if headers.get(0) != Some("group") {
        return Err(parse_error(1, "first column must be `group`"));
    }
    let has_weight = headers.get(1) == Some("weight");
    let first_cat = if has_weight { 2 } else { 1 };
    for (k, h) in headers.iter().skip(first_cat).enumerate() {
        if h != format!("cat_{k}") {
            return Err(parse_error(1, format!("expected column cat_{k}, found {h:?}")));
        }
    }
    let n_cat = headers.len() - first_cat;
    let mut labels = Vec::new();
    let mut counts = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_error(row, e.to_string()))?;
        let number = |c: usize| -> Result<f64, HetopError> {
            let s = record.get(c).unwrap_or("");
            s.parse::<f64>().map_err(|_| parse_error(row, format!("invalid number {s:?}")))
        };
        labels.push(record[0].to_string());
        weights.push(if has_weight { number(1)? } else { 1.0 });
        counts.push((0..n_cat).map(|k| number(first_cat + k)).collect::<Result<Vec<_>, _>>()?);
    }
    CategoryCountTable::new(labels, counts, Some(weights))
}

pub fn write_counts(table: &CategoryCountTable) -> Result<Vec<u8>, HetopError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| HetopError::Io(e.to_string());
    let mut header = vec!["group".to_string(), "weight".to_string()];
    header.extend((0..table.n_categories()).map(|k| format!("cat_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for g in 0..table.n_groups() {
        let mut record = vec![table.group_labels()[g].clone(), format_number(table.weight(g))];
        record.extend(table.row(g).iter().map(|&c| format_number(c)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| HetopError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_with_and_without_weights() {
        let t = read_counts("group,weight,cat_0,cat_1\na,2,3,4.5\nb,1,1,1\n".as_bytes()).unwrap();
        assert_eq!(t.weight(0), 2.0);
        assert_eq!(t.row(0), &[3.0, 4.5]);
        let t = read_counts("group,cat_0,cat_1,cat_2\na,3,4,1\nb,1,1,1\n".as_bytes()).unwrap();
        assert_eq!(t.weight(1), 1.0);
        assert_eq!(t.n_categories(), 3);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_counts("grp,cat_0,cat_1\na,1,1\nb,1,1\n".as_bytes()).is_err());
        assert!(read_counts("group,cat_0,cat_2\na,1,1\nb,1,1\n".as_bytes()).is_err());
        match read_counts("group,cat_0,cat_1\na,1,1\nb,x,1\n".as_bytes()) {
            Err(HetopError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1e6, 3), 2..6),
            w in 0.1f64..5.0,
        ) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r[0] += 1.0; r }).collect();
            let labels = (0..rows.len()).map(|g| format!("grp {g}")).collect();
            let weights = vec![w; rows.len()];
            let table = CategoryCountTable::new(labels, rows, Some(weights)).unwrap();
            let bytes = write_counts(&table).unwrap();
            prop_assert_eq!(read_counts(bytes.as_slice()).unwrap(), table);
        }
    }
}
