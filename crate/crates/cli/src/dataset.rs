//! CSV ingestion, the synthetic two-cluster generator and the stratified
//! train/test split.

use std::path::Path;

use qae_ids_core::encoding::check_label;
use qae_ids_core::{seed, RawSample};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<RawSample>,
    /// `(1-based data row, reason)` for every skipped row.
    pub rejected: Vec<(usize, String)>,
}

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

/// Labels may be ±1 or 0/1; 0 maps to −1.
fn parse_label(cell: &str, row: usize) -> Result<i8> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| data_err(format!("row {row}: label `{cell}` is not numeric")))?;
    if v.fract() != 0.0 {
        return Err(data_err(format!("row {row}: label {v} is not an integer")));
    }
    let v = if v == 0.0 { -1 } else { v as i64 };
    check_label(v).map_err(|_| data_err(format!("row {row}: label {cell} is not one of -1, 0, 1")))
}

/// Reads a headered CSV. Rows holding non-finite numbers are skipped and
/// reported; any non-numeric cell is a hard error.
pub fn load_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(data_err(format!("{}: empty file", path.display())));
    }
    let label_idx = headers.iter().position(|h| h == label_column).ok_or_else(|| {
        data_err(format!(
            "label column `{label_column}` not found; available columns: {}",
            headers.join(", ")
        ))
    })?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(data_err("dataset has no feature columns"));
    }

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| data_err(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(data_err(format!(
                "row {row}: expected {} cells, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| data_err(format!("row {row}, column `{}`: `{cell}` is not numeric", headers[i])))?;
            features.push(v);
        }
        let label_cell = &record[label_idx];
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            let reason = format!("non-finite value in column `{}`", feature_names[i]);
            log::warn!("skipping row {row}: {reason}");
            rejected.push((row, reason));
            continue;
        }
        let label = parse_label(label_cell, row)?;
        samples.push(RawSample::new(features, i64::from(label)).map_err(|e| data_err(format!("row {row}: {e}")))?);
    }
    if samples.is_empty() {
        return Err(data_err(format!("{}: no usable rows", path.display())));
    }
    if !rejected.is_empty() {
        log::warn!("{} row(s) rejected from {}", rejected.len(), path.display());
    }
    Ok(Dataset {
        feature_names,
        samples,
        rejected,
    })
}

/// Writes `f0 … f{d−1}, label`.
pub fn write_dataset(samples: &[RawSample], path: &Path) -> Result<()> {
    let d = samples.first().map_or(0, RawSample::dim);
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for s in samples {
        let mut row: Vec<String> = s.features().iter().map(f64::to_string).collect();
        row.push(s.label().to_string());
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Two unit-variance isotropic Gaussian clusters centred at
/// `±(separation/2)·𝟙/√d`; the `+` cluster is labelled −1. Rows alternate
/// between the classes, starting with +1.
pub fn generate_synthetic(n: usize, d: usize, separation: f64, seed: u64) -> Result<Vec<RawSample>> {
    if n == 0 || n % 2 != 0 {
        return Err(CliError::Config(format!("synthetic n = {n} must be even and positive")));
    }
    if d < 2 {
        return Err(CliError::Config(format!("synthetic d = {d} must be at least 2")));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(CliError::Config(format!("separation {separation} must be finite and >= 0")));
    }
    let mut rng = seed::rng(seed);
    let offset = separation / 2.0 / (d as f64).sqrt();
    (0..n)
        .map(|i| {
            let label: i64 = if i % 2 == 0 { 1 } else { -1 };
            let centre = -(label as f64) * offset;
            let features = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    centre + z
                })
                .collect();
            RawSample::new(features, label).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

/// Disjoint, class-stratified index sets. Each class gets its share of
/// both splits (largest class absorbs rounding); indices are returned
/// sorted.
pub fn stratified_split(labels: &[i8], train_size: usize, test_size: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if train_size + test_size > n {
        return Err(data_err(format!(
            "train_size + test_size = {} exceeds the {n} available rows",
            train_size + test_size
        )));
    }
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] > 0).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] < 0).collect();
    let share = |total: usize, class: usize| ((total * class) as f64 / n as f64).round() as usize;
    let (pos_train, pos_test) = (share(train_size, pos.len()), share(test_size, pos.len()));
    let pos_train = pos_train.min(train_size);
    let pos_test = pos_test.min(test_size);
    let (neg_train, neg_test) = (train_size - pos_train, test_size - pos_test);
    if pos_train + pos_test > pos.len() || neg_train + neg_test > neg.len() {
        return Err(data_err("classes are too small for the requested stratified split"));
    }
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut train: Vec<usize> = pos[..pos_train].iter().chain(&neg[..neg_train]).copied().collect();
    let mut test: Vec<usize> = pos[pos_train..pos_train + pos_test]
        .iter()
        .chain(&neg[neg_train..neg_train + neg_test])
        .copied()
        .collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn zero_one_labels_are_mapped() {
        let f = write_file("a,b,label\n1,2,0\n3,4,1\n5,6,1\n");
        let d = load_dataset(f.path(), "label").unwrap();
        let labels: Vec<i8> = d.samples.iter().map(RawSample::label).collect();
        assert_eq!(labels, vec![-1, 1, 1]);
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.samples[1].features(), &[3.0, 4.0]);
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        let f = write_file("a,b,label\n1,NaN,0\n3,4,1\n5,inf,1\n7,8,-1\n");
        let d = load_dataset(f.path(), "label").unwrap();
        assert_eq!(d.samples.len(), 2);
        assert_eq!(d.rejected.len(), 2);
        assert_eq!(d.rejected[0].0, 1);
        assert!(d.rejected[0].1.contains('b'));
    }

    #[test]
    fn hard_errors() {
        let f = write_file("a,b,class\n1,2,0\n");
        let err = load_dataset(f.path(), "label").unwrap_err();
        assert!(err.to_string().contains("available columns: a, b, class"), "{err}");
        assert_eq!(err.exit_code(), 3);

        let f = write_file("a,label\nx,1\n");
        assert!(load_dataset(f.path(), "label").unwrap_err().to_string().contains("not numeric"));
        let f = write_file("");
        assert!(load_dataset(f.path(), "label").is_err());
        let f = write_file("a,label\n1,2\n");
        assert!(load_dataset(f.path(), "label").is_err());
        assert!(load_dataset(Path::new("/nonexistent/file.csv"), "label").is_err());
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let a = generate_synthetic(200, 4, 6.0, 3).unwrap();
        let b = generate_synthetic(200, 4, 6.0, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        assert_eq!(a.iter().filter(|s| s.label() == 1).count(), 100);
        assert!(generate_synthetic(201, 4, 6.0, 3).is_err());
        assert!(generate_synthetic(200, 1, 6.0, 3).is_err());

        let dir = tempfile::tempdir().unwrap();
        let (p, q) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_dataset(&a, &p).unwrap();
        write_dataset(&b, &q).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        let back = load_dataset(&p, "label").unwrap();
        assert_eq!(back.samples, a);
    }

    #[test]
    fn bayes_rule_on_well_separated_clusters() {
        // the optimal rule for these clusters is the sign of the feature sum
        let data = generate_synthetic(200, 4, 6.0, 1).unwrap();
        let correct = data
            .iter()
            .filter(|s| {
                let sum: f64 = s.features().iter().sum();
                (if sum < 0.0 { 1 } else { -1 }) == s.label()
            })
            .count();
        assert!(correct as f64 / 200.0 > 0.99, "{correct}");
    }

    #[test]
    fn identical_classes_without_separation() {
        let mut acc = 0.0;
        for seed in 0..20 {
            let data = generate_synthetic(200, 4, 0.0, seed).unwrap();
            let correct = data
                .iter()
                .filter(|s| (if s.features().iter().sum::<f64>() < 0.0 { 1 } else { -1 }) == s.label())
                .count();
            acc += correct as f64 / 200.0;
        }
        assert!((acc / 20.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn split_is_disjoint_and_stratified() {
        let labels: Vec<i8> = (0..200).map(|i| if i % 4 == 0 { 1 } else { -1 }).collect();
        let (train, test) = stratified_split(&labels, 160, 40, 9).unwrap();
        assert_eq!((train.len(), test.len()), (160, 40));
        assert!(train.iter().all(|i| !test.contains(i)));
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 40);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 10);
        assert_eq!(stratified_split(&labels, 160, 40, 9).unwrap(), (train, test));
        assert!(stratified_split(&labels, 180, 40, 9).is_err());
    }
}
