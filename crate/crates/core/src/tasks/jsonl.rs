use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::tensor::Real;

use super::dataset::{Split, TaskDataset};

#[derive(Serialize)]
struct Row<'a> {
    task: &'a str,
    split: &'static str,
    input_shape: &'a [usize],
    input: &'a [Real],
    target: &'a [Real],
}

/// Writes every sample of every task, one JSON object per line.
pub fn write_jsonl<W: Write>(datasets: &[TaskDataset], mut out: W) -> Result<()> {
    for d in datasets {
        for split in [Split::Train, Split::Validation, Split::Test] {
            for s in d.split(split) {
                let row = Row {
                    task: &d.name,
                    split: split.as_str(),
                    input_shape: s.input.shape(),
                    input: s.input.data(),
                    target: s.target.data(),
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

pub fn export_jsonl(datasets: &[TaskDataset], path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_jsonl(datasets, file)
}
