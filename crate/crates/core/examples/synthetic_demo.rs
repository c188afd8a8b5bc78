//! Trains on the four-class synthetic shape set and reports test accuracy.

use std::time::Instant;

use pcc_core::pipeline::{evaluate, train_with, PipelineConfig};
use pcc_core::synthetic::{shape_dataset, ShapeKind};
use pcc_core::Execution;

fn main() -> pcc_core::Result<()> {
    let t = Instant::now();
    let train = shape_dataset(&ShapeKind::ALL, 100, 1024, 1);
    let test = shape_dataset(&ShapeKind::ALL, 40, 1024, 2);
    let config = PipelineConfig::default();
    let outcome = train_with(&train, &config, Execution::default())?;
    let report = evaluate(&outcome.model, &test, Execution::default())?;
    println!(
        "train acc {:.4}  test overall {:.4}  class-avg {:.4}  ({:.1?})",
        outcome.train_accuracy,
        report.overall_accuracy,
        report.class_avg_accuracy,
        t.elapsed()
    );
    Ok(())
}
