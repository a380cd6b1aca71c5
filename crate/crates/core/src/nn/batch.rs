//! Mini-batches and the small row-major matrix used for logits.

use std::collections::BTreeMap;

/// Row-major `rows x cols` matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            data,
            rows: rows.len(),
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// A batch of labelled inputs, each row tagged with the task it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    inputs: Vec<f64>,
    input_dim: usize,
    labels: Vec<usize>,
    task_ids: Vec<usize>,
}

impl MiniBatch {
    pub fn new(input_dim: usize) -> Self {
        Self {
            inputs: Vec::new(),
            input_dim,
            labels: Vec::new(),
            task_ids: Vec::new(),
        }
    }

    pub fn with_capacity(input_dim: usize, rows: usize) -> Self {
        Self {
            inputs: Vec::with_capacity(rows * input_dim),
            input_dim,
            labels: Vec::with_capacity(rows),
            task_ids: Vec::with_capacity(rows),
        }
    }

    pub fn push(&mut self, input: &[f64], label: usize, task_id: usize) {
        assert_eq!(input.len(), self.input_dim, "input width mismatch");
        self.inputs.extend_from_slice(input);
        self.labels.push(label);
        self.task_ids.push(task_id);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn input_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn task_id(&self, i: usize) -> usize {
        self.task_ids[i]
    }

    pub fn task_ids(&self) -> &[usize] {
        &self.task_ids
    }

    /// Appends all rows of `other`; widths must match.
    pub fn concat(&self, other: &MiniBatch) -> MiniBatch {
        assert_eq!(self.input_dim, other.input_dim, "input width mismatch");
        let mut out = self.clone();
        out.inputs.extend_from_slice(&other.inputs);
        out.labels.extend_from_slice(&other.labels);
        out.task_ids.extend_from_slice(&other.task_ids);
        out
    }

    /// Splits rows by task id, preserving row order within each task.
    pub fn split_by_task(&self) -> BTreeMap<usize, MiniBatch> {
        let mut groups: BTreeMap<usize, MiniBatch> = BTreeMap::new();
        for i in 0..self.len() {
            groups
                .entry(self.task_ids[i])
                .or_insert_with(|| MiniBatch::new(self.input_dim))
                .push(self.input(i), self.labels[i], self.task_ids[i]);
        }
        groups
    }
}
