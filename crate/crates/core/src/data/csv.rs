use std::collections::BTreeSet;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reads a headed CSV. Every column other than `label_column` must be
/// numeric; distinct label values, sorted, define the class indices.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(Error::format(path, "empty file"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Config(format!("label column {label_column:?} not found in {}", path.display())))?;

    let mut rows: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_string());
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::format(path, format!("row {}: non-numeric value {cell:?} in column {:?}", lineno + 2, &headers[j]))
                })?;
                rows.push(v);
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::format(path, "no feature columns"));
    }
    let class_names: Vec<String> = raw_labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).expect("name collected above"))
        .collect();
    let features = Tensor::matrix(raw_labels.len(), dim, rows).map_err(|e| Error::format(path, e.to_string()))?;
    Dataset::new(features, labels, class_names, path.display().to_string())
}

/// Writes features as `f0..f{d-1}` columns plus a `label` column holding
/// class names. Values use shortest round-trip formatting.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut header: Vec<String> = (0..ds.input_dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::format(path, e.to_string()))?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.class_names[ds.labels[i]].clone());
        w.write_record(&rec).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "x,y,label\n1.5,2,a\n0,-1,b\n3,4e-1,a\n").unwrap();
        let ds = load_csv(&p, "label").unwrap();
        assert_eq!(ds.class_names, vec!["a", "b"]);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.features.row(2), &[3.0, 0.4]);
    }

    #[test]
    fn label_column_may_sit_anywhere() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "species,w\ncat,1\ndog,2\n").unwrap();
        let ds = load_csv(&p, "species").unwrap();
        assert_eq!(ds.features.data(), &[1.0, 2.0]);
    }

    #[test]
    fn errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "x,label\n1,a\n").unwrap();
        assert!(matches!(load_csv(&p, "class"), Err(Error::Config(_))));
        std::fs::write(&p, "x,label\nfoo,a\n").unwrap();
        assert!(matches!(load_csv(&p, "label"), Err(Error::Format { .. })));
        std::fs::write(&p, "").unwrap();
        assert!(load_csv(&p, "label").is_err());
        std::fs::write(&p, "x,label\n").unwrap();
        assert!(matches!(load_csv(&p, "label"), Err(Error::Format { .. })));
    }
}
