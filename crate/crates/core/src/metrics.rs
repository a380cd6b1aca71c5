//! Accuracy bookkeeping: the task-accuracy matrix, the forgetting metrics
//! derived from it, and learning-rate distribution statistics.

use crate::continuum::{Continuum, TaskDataset};
use crate::error::{Error, Result};
use crate::nn::{forward, MiniBatch, MlpArchitecture, ParamLayout, ParamVector};
use crate::strategies::{clamp_beta, BetaBank};

/// Fractions below this bound count as small rates.
pub const BETA_LOW_THRESHOLD: f64 = 0.02;
/// Fractions above this bound count as large rates.
pub const BETA_HIGH_THRESHOLD: f64 = 0.05;

/// Row `i` holds the test accuracy of every task measured right after
/// training task `i+1`; entries are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, rows: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows_filled(&self) -> usize {
        self.rows.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.n
    }

    /// Appends the accuracies measured after finishing one more task.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if self.rows.len() == self.n {
            return Err(Error::Metrics("accuracy matrix already complete".into()));
        }
        if row.len() != self.n {
            return Err(Error::Metrics(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.n
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Accuracy on task `m` after training task `i` (both 1-based).
    pub fn get(&self, after_task: usize, on_task: usize) -> f64 {
        self.rows[after_task - 1][on_task - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn last_row(&self) -> Result<&[f64]> {
        if !self.is_complete() {
            return Err(Error::Metrics(format!(
                "matrix incomplete: {} of {} rows",
                self.rows.len(),
                self.n
            )));
        }
        Ok(&self.rows[self.n - 1])
    }

    /// Final accuracy of task 1: how much of the first task survived.
    pub fn fa1(&self) -> Result<f64> {
        Ok(self.last_row()?[0])
    }

    /// Mean of the final row: overall performance across all tasks.
    pub fn acc(&self) -> Result<f64> {
        let row = self.last_row()?;
        Ok(row.iter().sum::<f64>() / row.len() as f64)
    }

    /// CSV with header `after_task,task_1..task_n`, values in percent with
    /// two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("after_task");
        for m in 1..=self.n {
            out.push_str(&format!(",task_{m}"));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!("{}", i + 1));
            for v in row {
                out.push_str(&format!(",{:.2}", v * 100.0));
            }
            out.push('\n');
        }
        out
    }
}

/// Fraction of argmax-correct predictions on the task's clean test split.
pub fn evaluate_task(
    params: &ParamVector,
    arch: &MlpArchitecture,
    task: &TaskDataset,
) -> Result<f64> {
    if task.test.is_empty() {
        return Err(Error::Metrics(format!(
            "task {} has an empty test split",
            task.task_id
        )));
    }
    let mut correct = 0usize;
    // Chunked evaluation keeps batches small without changing the result.
    for chunk in task.test.chunks(256) {
        let mut batch = MiniBatch::with_capacity(arch.input_dim, chunk.len());
        for sample in chunk {
            batch.push(&sample.input, sample.label, task.task_id);
        }
        let logits = forward(params, arch, &batch)?;
        for (i, sample) in chunk.iter().enumerate() {
            let row = logits.row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best == sample.label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / task.test.len() as f64)
}

/// Accuracy of the current learner on every task in the stream, future
/// tasks included.
pub fn evaluate_row(
    params: &ParamVector,
    arch: &MlpArchitecture,
    continuum: &Continuum,
) -> Result<Vec<f64>> {
    continuum
        .tasks()
        .iter()
        .map(|task| evaluate_task(params, arch, task))
        .collect()
}

/// Per-(task, layer) fractions of clamped rates beyond the two thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaStats {
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub entries: Vec<BetaStatsEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaStatsEntry {
    pub task_id: usize,
    /// 1-based layer index; the last layer feeds the softmax.
    pub layer: usize,
    pub frac_below: f64,
    pub frac_above: f64,
}

impl BetaStats {
    pub fn empty() -> Self {
        Self {
            low_threshold: BETA_LOW_THRESHOLD,
            high_threshold: BETA_HIGH_THRESHOLD,
            entries: Vec::new(),
        }
    }

    /// CSV with header `task,layer,frac_below_0.02,frac_above_0.05`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,layer,frac_below_0.02,frac_above_0.05\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{:.6},{:.6}\n",
                e.task_id, e.layer, e.frac_below, e.frac_above
            ));
        }
        out
    }

    /// Pooled fraction of small rates over all layers of one task.
    pub fn aggregate_frac_below(&self, task_id: usize, layout: &ParamLayout) -> Option<f64> {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for e in self.entries.iter().filter(|e| e.task_id == task_id) {
            let seg = layout.segment(e.layer - 1);
            let len = (seg.rows * seg.cols + seg.rows) as f64;
            weighted += e.frac_below * len;
            total += len;
        }
        (total > 0.0).then(|| weighted / total)
    }
}

/// Computes extreme-rate fractions for every frozen task in the bank.
pub fn beta_stats(bank: &BetaBank, layout: &ParamLayout) -> BetaStats {
    let mut stats = BetaStats::empty();
    for task_id in bank.task_ids() {
        if !bank.is_frozen(task_id) {
            continue;
        }
        let raw = bank.raw(task_id).expect("listed task has a vector");
        let beta = clamp_beta(raw, bank.kappa());
        stats
            .entries
            .extend(layer_fractions(task_id, &beta, layout));
    }
    stats
}

/// Same statistics computed from an exported snapshot.
pub fn beta_stats_from_snapshots(
    snapshots: &[crate::strategies::BetaSnapshot],
) -> Result<BetaStats> {
    let mut stats = BetaStats::empty();
    for snap in snapshots {
        let beta = clamp_beta(&snap.raw, snap.kappa);
        let mut offset = 0;
        for (layer, &(rows, cols)) in snap.layer_shapes.iter().enumerate() {
            let len = rows * cols + rows;
            let slice = beta.get(offset..offset + len).ok_or_else(|| {
                Error::Metrics("snapshot layer shapes exceed vector length".into())
            })?;
            stats.entries.push(fraction_entry(snap.task_id, layer + 1, slice));
            offset += len;
        }
    }
    Ok(stats)
}

fn layer_fractions(
    task_id: usize,
    beta: &[f64],
    layout: &ParamLayout,
) -> Vec<BetaStatsEntry> {
    layout
        .segments()
        .iter()
        .enumerate()
        .map(|(layer, seg)| fraction_entry(task_id, layer + 1, &beta[seg.range()]))
        .collect()
}

fn fraction_entry(task_id: usize, layer: usize, beta: &[f64]) -> BetaStatsEntry {
    let n = beta.len() as f64;
    BetaStatsEntry {
        task_id,
        layer,
        frac_below: beta.iter().filter(|&&b| b < BETA_LOW_THRESHOLD).count() as f64 / n,
        frac_above: beta.iter().filter(|&&b| b > BETA_HIGH_THRESHOLD).count() as f64 / n,
    }
}

/// Deterministic per-run markdown report: the strategy's final metrics and
/// the full accuracy matrix, mirroring the benchmark table layout.
pub fn render_report(
    strategy_name: &str,
    matrix: &AccuracyMatrix,
    stats: &BetaStats,
    config_text: &str,
) -> Result<String> {
    let mut out = String::new();
    out.push_str("# Run report\n\n");
    out.push_str("| Methods | FA1 (%) | ACC (%) |\n|---|---|---|\n");
    out.push_str(&format!(
        "| {} | {:.2} | {:.2} |\n\n",
        strategy_name,
        matrix.fa1()? * 100.0,
        matrix.acc()? * 100.0
    ));
    out.push_str("## Accuracy matrix\n\n```\n");
    out.push_str(&matrix.to_csv());
    out.push_str("```\n");
    if !stats.entries.is_empty() {
        out.push_str("\n## Learning-rate statistics\n\n```\n");
        out.push_str(&stats.to_csv());
        out.push_str("```\n");
    }
    out.push_str("\n## Configuration\n\n```\n");
    out.push_str(config_text);
    out.push_str("```\n");
    Ok(out)
}
