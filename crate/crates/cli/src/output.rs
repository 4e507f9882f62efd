//! CSV writers. Floats use Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use denoise_core::pipeline::ScoredGraph;
use denoise_core::protocol::SplitSpec;
use denoise_core::trainer::TrainHistory;
use denoise_core::{Dataset, Matrix};

use crate::error::CliError;

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn finish<W: Write>(w: csv::Writer<W>, path: &Path) -> Result<(), CliError> {
    w.into_inner()
        .map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn rows<I, R>(path: &Path, header: &[String], records: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    w.write_record(header).map_err(wrap)?;
    for r in records {
        w.write_record(r).map_err(wrap)?;
    }
    finish(w, path)
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn write_history(path: &Path, history: &TrainHistory) -> Result<(), CliError> {
    let records = history.epochs.iter().map(|e| {
        vec![
            e.epoch.to_string(),
            e.recon_loss.to_string(),
            e.contrast_loss.map_or(String::new(), |v| v.to_string()),
            e.flagged.to_string(),
            e.seconds.to_string(),
        ]
    });
    rows(path, &header(&["epoch", "recon_loss", "contrast_loss", "flagged", "seconds"]), records)
}

pub fn write_scores(path: &Path, scored: &[ScoredGraph]) -> Result<(), CliError> {
    let records = scored.iter().map(|s| {
        let mut r = vec![s.graph_id.to_string(), s.label.as_u8().to_string(), s.score.to_string()];
        r.extend(s.z_agg.0.iter().map(f64::to_string));
        r
    });
    rows(path, &header(&["graph_id", "label", "score", "z0", "z1", "z2", "z3"]), records)
}

/// Split name of every graph; injected anomalies count as `train`.
pub fn split_names(split: &SplitSpec) -> Vec<&'static str> {
    split.assignment.iter().map(|a| a.as_str()).collect()
}

pub fn write_split(path: &Path, dataset: &Dataset, split: &SplitSpec) -> Result<(), CliError> {
    let names = split_names(split);
    let records = dataset.graphs().iter().enumerate().map(|(i, g)| {
        vec![
            i.to_string(),
            names[i].to_string(),
            g.label().as_u8().to_string(),
            u8::from(split.injected.contains(&i)).to_string(),
        ]
    });
    rows(path, &header(&["graph_id", "split", "label", "injected"]), records)
}

/// One row per graph: id, split name, label, then the embedding.
pub fn write_embeddings(path: &Path, dataset: &Dataset, splits: &[&str], embeddings: &[Matrix]) -> Result<(), CliError> {
    let width = embeddings.first().map_or(0, Matrix::cols);
    let mut head = header(&["graph_id", "split", "label"]);
    head.extend((0..width).map(|j| format!("e{j}")));
    let records = dataset.graphs().iter().zip(embeddings).enumerate().map(|(i, (g, e))| {
        let mut r = vec![i.to_string(), splits[i].to_string(), g.label().as_u8().to_string()];
        r.extend(e.as_slice().iter().map(f64::to_string));
        r
    });
    rows(path, &head, records)
}

pub fn write_table(path: &Path, head: &[String], records: &[Vec<String>]) -> Result<(), CliError> {
    rows(path, head, records.iter().cloned())
}
