//! Covariate CSV ingestion and export.
//!
//! Expected shape: a header row, a leading subject-id column, and numeric
//! covariate columns. Rows pair with the tensor's subject mode by position
//! unless an explicit subject order is supplied.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Parsed covariate table, without an intercept.
#[derive(Debug, Clone)]
pub struct CovariateTable {
    pub subject_ids: Vec<String>,
    /// Covariate column names, excluding the id column.
    pub names: Vec<String>,
    /// `N x c` covariate values in file row order.
    pub data: Mat,
}

impl CovariateTable {
    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    /// Design matrix in the table's row order, optionally with a leading
    /// intercept column of ones.
    pub fn design_matrix(&self, intercept: bool) -> Mat {
        let n = self.n_subjects();
        let c = self.names.len();
        let offset = usize::from(intercept);
        let mut z = Mat::zeros(n, c + offset);
        if intercept {
            z.column_mut(0).fill(1.0);
        }
        for j in 0..c {
            z.set_column(j + offset, &self.data.column(j));
        }
        z
    }

    /// Reorder rows to match an explicit subject-id sequence (the tensor's
    /// mode-4 order). Every requested id must be present exactly once.
    pub fn reorder(&self, order: &[String]) -> Result<CovariateTable> {
        if order.len() != self.n_subjects() {
            return Err(Error::Ingestion(format!(
                "subject order lists {} ids but the table has {} rows",
                order.len(),
                self.n_subjects()
            )));
        }
        let index: std::collections::HashMap<&str, usize> = self
            .subject_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(order.len());
        for id in order {
            let &row = index
                .get(id.as_str())
                .ok_or_else(|| Error::Ingestion(format!("subject id '{id}' not in table")))?;
            rows.push(row);
        }
        Ok(CovariateTable {
            subject_ids: order.to_vec(),
            names: self.names.clone(),
            data: Mat::from_fn(rows.len(), self.names.len(), |i, j| self.data[(rows[i], j)]),
        })
    }
}

pub fn read_covariates(path: &Path) -> Result<CovariateTable> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| {
        Error::Ingestion(format!(
            "cannot open covariate file {}: {e}",
            path.display()
        ))
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingestion(format!("bad header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Ingestion("covariate file has no columns".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut subject_ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashSet::new();
    for (row_ix, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Ingestion(format!("row {}: {e}", row_ix + 1)))?;
        if record.len() != names.len() + 1 {
            return Err(Error::Ingestion(format!(
                "row {}: expected {} fields, found {}",
                row_ix + 1,
                names.len() + 1,
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Ingestion(format!(
                "duplicate subject id '{id}' at row {}",
                row_ix + 1
            )));
        }
        let mut row = Vec::with_capacity(names.len());
        for (c, field) in record.iter().skip(1).enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Ingestion(format!(
                    "row {}, column '{}': cannot parse '{}' as a number",
                    row_ix + 1,
                    names[c],
                    field
                ))
            })?;
            row.push(value);
        }
        subject_ids.push(id);
        rows.push(row);
    }
    if subject_ids.is_empty() {
        return Err(Error::Ingestion("covariate file has no data rows".into()));
    }

    let data = Mat::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    Ok(CovariateTable {
        subject_ids,
        names,
        data,
    })
}

/// Write a covariate table; floats carry 17 significant digits so the file
/// round-trips exactly.
pub fn write_covariates(
    path: &Path,
    subject_ids: &[String],
    names: &[String],
    data: &Mat,
) -> Result<()> {
    if data.nrows() != subject_ids.len() || data.ncols() != names.len() {
        return Err(Error::invalid_argument("covariate table shape mismatch"));
    }
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Ingestion(format!("cannot create {}: {e}", path.display())))?;
    let mut header = vec!["subject_id".to_string()];
    header.extend(names.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::Ingestion(format!("write header: {e}")))?;
    for (i, id) in subject_ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        for j in 0..names.len() {
            record.push(format!("{:.16e}", data[(i, j)]));
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::Ingestion(format!("write row {}: {e}", i + 1)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Ingestion(format!("flush: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_raw(contents: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_binary_covariate_with_intercept() {
        let (_dir, path) = write_raw("subject_id,sex\ns1,0\ns2,1\ns3,0\n");
        let table = read_covariates(&path).unwrap();
        assert_eq!(table.subject_ids, vec!["s1", "s2", "s3"]);
        assert_eq!(table.names, vec!["sex"]);
        let z = table.design_matrix(true);
        assert_eq!((z.nrows(), z.ncols()), (3, 2));
        assert_eq!(z.column(0).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(z.column(1).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let (_dir, path) = write_raw("subject_id,sex\ns1,0\ns1,1\n");
        match read_covariates(&path) {
            Err(Error::Ingestion(msg)) => assert!(msg.contains("duplicate"), "{msg}"),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let (_dir, path) = write_raw("subject_id,age\ns1,12\ns2,twelve\n");
        match read_covariates(&path) {
            Err(Error::Ingestion(msg)) => {
                assert!(msg.contains("row 2"), "{msg}");
                assert!(msg.contains("age"), "{msg}");
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn reorder_follows_explicit_subject_order() {
        let (_dir, path) = write_raw("subject_id,x\nb,2\nc,3\na,1\n");
        let table = read_covariates(&path).unwrap();
        let order = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let sorted = table.reorder(&order).unwrap();
        assert_eq!(sorted.subject_ids, order);
        assert_eq!(sorted.data.column(0).as_slice(), &[1.0, 2.0, 3.0]);

        let missing = vec!["a".to_string(), "b".to_string(), "zz".to_string()];
        assert!(table.reorder(&missing).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cov.csv");
        let ids = vec!["s1".to_string(), "s2".to_string()];
        let names = vec!["a".to_string(), "b".to_string()];
        let data = Mat::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 2.5e-17, 4.0]);
        write_covariates(&path, &ids, &names, &data).unwrap();
        let table = read_covariates(&path).unwrap();
        assert_eq!(table.subject_ids, ids);
        assert_eq!(table.names, names);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(table.data[(i, j)].to_bits(), data[(i, j)].to_bits());
            }
        }
    }
}
