//! CSV datasets in, explanation tables out.
//!
//! A dataset file has a header row and one sample per row; the last column is
//! the label. Line numbers in errors are 1-based and count the header.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::attribution::AttributionVector;
use crate::benchlab::Table;
use crate::error::{Error, Result};
use crate::interaction::InteractionMatrix;
use crate::rivals::RankedPair;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Feature column names, label excluded.
    pub features: Vec<String>,
    pub label: String,
    pub xs: Array2<f64>,
    pub ys: Array1<f64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Header and numeric rows of a rectangular CSV.
fn read_numeric<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Parse { line: 1, message: "missing header row".into() });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    line,
                    message: format!("column `{}`: `{field}` is not a finite number", header[c]),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn to_matrix(rows: &[Vec<f64>], cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols), |(r, c)| rows[r][c])
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let (header, rows) = read_numeric(reader)?;
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least one feature column and a label column".into(),
        });
    }
    let d = header.len() - 1;
    Ok(Dataset {
        features: header[..d].to_vec(),
        label: header[d].clone(),
        xs: to_matrix(&rows, d),
        ys: rows.iter().map(|r| r[d]).collect(),
    })
}

pub fn read_dataset_path(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?)
}

/// Feature rows for a `d`-input model; a trailing label column is dropped.
pub fn read_features<R: Read>(reader: R, d: usize) -> Result<Array2<f64>> {
    let (header, rows) = read_numeric(reader)?;
    if header.len() != d && header.len() != d + 1 {
        return Err(Error::Parse {
            line: 1,
            message: format!("model expects {d} features, file has {} columns", header.len()),
        });
    }
    Ok(to_matrix(&rows, d))
}

pub fn read_features_path(path: &Path, d: usize) -> Result<Array2<f64>> {
    read_features(open(path)?, d)
}

/// Dataset CSV with columns `x0..x{d-1}, y`.
pub fn dataset_table(xs: &Array2<f64>, ys: &Array1<f64>) -> Table {
    let mut header: Vec<String> = (0..xs.ncols()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    let mut t = Table::new(header);
    for (row, y) in xs.rows().into_iter().zip(ys) {
        let mut r: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        r.push(format!("{y:?}"));
        t.push(r);
    }
    t
}

/// One row per (sample, feature): `sample, feature_index, phi, x_value, baseline_value`.
pub fn attributions_table(attrs: &[AttributionVector]) -> Table {
    let mut t = Table::new(["sample", "feature_index", "phi", "x_value", "baseline_value"]);
    if let Some(first) = attrs.first() {
        t = with_meta(t, &first.meta.method, &first.meta.baseline, first.meta.k, None, first.meta.surgery_beta);
        let worst = attrs.iter().map(AttributionVector::completeness_residual).fold(0.0, f64::max);
        t = t.meta("max_completeness_residual", format!("{worst:e}"));
    }
    for (s, a) in attrs.iter().enumerate() {
        for (i, phi) in a.values.iter().enumerate() {
            t.push(vec![
                s.to_string(),
                i.to_string(),
                format!("{phi:?}"),
                format!("{:?}", a.input[i]),
                format!("{:?}", a.baseline[i]),
            ]);
        }
    }
    t
}

/// Lower triangle plus diagonal: `sample, method, i, j, gamma` with `i >= j`.
///
/// Off-diagonal rows stand for both `(i, j)` and `(j, i)`, so the completeness
/// sum weights them twice.
pub fn interactions_table(mats: &[InteractionMatrix]) -> Table {
    let mut t = Table::new(["sample", "method", "i", "j", "gamma"]);
    if let Some(first) = mats.first() {
        let m = &first.meta;
        t = with_meta(t, &m.method, &m.baseline, m.k, m.m, m.surgery_beta);
        if let Some(draws) = m.draws {
            t = t.meta("draws", draws);
        }
        if let Some(seed) = m.seed {
            t = t.meta("seed", seed);
        }
        let worst = mats.iter().map(InteractionMatrix::interaction_completeness_residual).fold(0.0, f64::max);
        t = t.meta("max_completeness_residual", format!("{worst:e}"));
    }
    for (s, im) in mats.iter().enumerate() {
        for i in 0..im.dim() {
            for j in 0..=i {
                t.push(vec![
                    s.to_string(),
                    im.meta.method.clone(),
                    i.to_string(),
                    j.to_string(),
                    format!("{:?}", im.gamma[[i, j]]),
                ]);
            }
        }
    }
    t
}

pub fn ranked_pairs_table(pairs: &[RankedPair]) -> Table {
    let mut t = Table::new(["rank", "i", "j", "strength"]).meta("method", "nid");
    for (r, p) in pairs.iter().enumerate() {
        t.push(vec![r.to_string(), p.i.to_string(), p.j.to_string(), format!("{:?}", p.strength)]);
    }
    t
}

fn with_meta(t: Table, method: &str, baseline: &str, k: Option<usize>, m: Option<usize>, beta: Option<f64>) -> Table {
    let mut t = t.meta("method", method).meta("baseline", baseline.replace(' ', ""));
    if let Some(k) = k {
        t = t.meta("k", k);
    }
    if let Some(m) = m {
        t = t.meta("m", m);
    }
    if let Some(b) = beta {
        t = t.meta("surgery_beta", b);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_splits_label_column() {
        let ds = read_dataset("a,b,y\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(ds.features, ["a", "b"]);
        assert_eq!(ds.label, "y");
        assert_eq!(ds.xs, ndarray::array![[1.0, 2.0], [4.0, 5.0]]);
        assert_eq!(ds.ys, ndarray::array![3.0, 6.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match read_dataset("a,y\n1,2\n3,oops\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_dataset("a,y\n1,2\n3\n".as_bytes()) {
            Err(Error::Parse { line, message }) => assert_eq!((line, message.contains("expected 2")), (3, true)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_dataset("a,y\n1,nan\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn features_drop_a_trailing_label() {
        let xs = read_features("a,b,y\n1,2,3\n".as_bytes(), 2).unwrap();
        assert_eq!(xs, ndarray::array![[1.0, 2.0]]);
        assert!(read_features("a,b,y\n1,2,3\n".as_bytes(), 4).is_err());
    }

    #[test]
    fn dataset_table_round_trips() {
        let xs = ndarray::array![[0.1, -2.5], [1e-300, 3.0]];
        let ys = ndarray::array![0.7, -0.0];
        let text = dataset_table(&xs, &ys).to_csv_string();
        let ds = read_dataset(text.as_bytes()).unwrap();
        assert_eq!((ds.xs, ds.ys), (xs, ys));
    }
}
