use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

use super::dataset::{class_target, Sample, TaskDataset};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// Loads a labelled table: one header row, numeric features, and the class
/// label in the last column. Rows are shuffled by `seed` and split 80/20
/// into train and validation.
pub fn load_csv_task(path: &Path, seed: u64) -> Result<TaskDataset> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    parse_csv_task(&name, &text, DEFAULT_TRAIN_FRACTION, seed)
}

/// Labels sort numerically when every label is a number, otherwise
/// lexicographically; class indices follow that order. Features are min-max
/// scaled with training-split statistics; a constant feature maps to 0.
pub fn parse_csv_task(name: &str, text: &str, train_fraction: f64, seed: u64) -> Result<TaskDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::format(
            "train_fraction",
            format!("{train_fraction} is not inside (0, 1)"),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format("header", e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::format(
            "header",
            "need at least one feature column and a label column",
        ));
    }
    let width = headers.len() - 1;
    let mut features: Vec<Vec<Real>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::format(format!("line {line}"), e.to_string()))?;
        if rec.len() != width + 1 {
            return Err(Error::format(
                format!("line {line}"),
                format!("{} fields, header has {}", rec.len(), width + 1),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (col, field) in rec.iter().take(width).enumerate() {
            let v: Real = field.parse().map_err(|_| {
                Error::format(
                    format!("line {line}, column {}", &headers[col]),
                    format!("{field:?} is not numeric"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(
                    format!("line {line}, column {}", &headers[col]),
                    "non-finite value",
                ));
            }
            values.push(v);
        }
        features.push(values);
        labels.push(rec[width].to_string());
    }
    let n = features.len();
    if n == 0 {
        return Err(Error::format("rows", "file has no data rows"));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::format(
            "rows",
            format!(
                "{n} rows cannot be split {train_fraction} / {} without an empty side",
                1.0 - train_fraction
            ),
        ));
    }

    let classes = class_order(&labels);
    let mut order: Vec<usize> = (0..n).collect();
    Rng::seed_from(seed).shuffle(&mut order);
    let (train_idx, val_idx) = order.split_at(n_train);

    let mut lo = vec![Real::INFINITY; width];
    let mut hi = vec![Real::NEG_INFINITY; width];
    for &i in train_idx {
        for (c, &v) in features[i].iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    let sample = |i: usize| {
        let x: Vec<Real> = features[i]
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let range = hi[c] - lo[c];
                if range > 0.0 {
                    ((v - lo[c]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let class = classes.iter().position(|c| *c == labels[i]).expect("label collected");
        Sample {
            input: Tensor::from_vec(x),
            target: class_target(class),
        }
    };
    Ok(TaskDataset {
        name: name.to_string(),
        train: train_idx.iter().map(|&i| sample(i)).collect(),
        validation: val_idx.iter().map(|&i| sample(i)).collect(),
        test: Vec::new(),
        loss: LossKind::Ce,
        input_shape: vec![width],
        output_size: classes.len(),
    })
}

fn class_order(labels: &[String]) -> Vec<String> {
    let unique: BTreeSet<&String> = labels.iter().collect();
    let mut classes: Vec<String> = unique.into_iter().cloned().collect();
    if classes.iter().all(|c| c.parse::<f64>().is_ok()) {
        classes.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: usize, features: usize, classes: usize) -> String {
        let mut s: String = (0..features).map(|f| format!("f{f},")).collect();
        s.push_str("label\n");
        for r in 0..rows {
            for f in 0..features {
                s.push_str(&format!("{},", (r * 7 + f * 3) % 11));
            }
            s.push_str(&format!("c{}\n", r % classes));
        }
        s
    }

    #[test]
    fn iris_shaped_split() {
        let d = parse_csv_task("iris", &table(150, 4, 3), 0.8, 1).unwrap();
        assert_eq!((d.train.len(), d.validation.len()), (120, 30));
        assert_eq!(d.output_size, 3);
        d.validate().unwrap();
    }

    #[test]
    fn yeast_shaped_outputs() {
        let d = parse_csv_task("yeast", &table(1484, 8, 10), 0.8, 1).unwrap();
        assert_eq!(d.output_size, 10);
        assert_eq!(d.input_shape, vec![8]);
    }

    #[test]
    fn constant_column_scales_to_zero() {
        let text = "a,b,y\n5,1,x\n5,2,y\n5,3,x\n5,4,y\n5,9,x\n";
        let d = parse_csv_task("c", text, 0.8, 3).unwrap();
        for s in d.train.iter().chain(&d.validation) {
            assert_eq!(s.input.data()[0], 0.0);
        }
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let text = "a,y\n1,10\n2,2\n3,10\n4,2\n5,2\n";
        let d = parse_csv_task("n", text, 0.6, 0).unwrap();
        assert_eq!(d.output_size, 2);
        assert_eq!(
            class_order(&["10".into(), "2".into()]),
            vec!["2".to_string(), "10".to_string()]
        );
    }

    #[test]
    fn bad_inputs_are_format_errors() {
        let err = parse_csv_task("x", "a,y\n1,0\nfoo,1\n", 0.5, 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3") && err.contains("not numeric"), "{err}");
        assert!(parse_csv_task("x", "a,y\n", 0.8, 0).is_err());
        assert!(parse_csv_task("x", "", 0.8, 0).is_err());
        assert!(parse_csv_task("x", &table(10, 2, 2), 1.5, 0)
            .unwrap_err()
            .to_string()
            .contains("train_fraction"));
    }

    #[test]
    fn same_seed_same_split() {
        let t = table(50, 3, 4);
        assert_eq!(
            parse_csv_task("a", &t, 0.8, 9).unwrap(),
            parse_csv_task("a", &t, 0.8, 9).unwrap()
        );
        assert_ne!(
            parse_csv_task("a", &t, 0.8, 9).unwrap(),
            parse_csv_task("a", &t, 0.8, 10).unwrap()
        );
    }
}
