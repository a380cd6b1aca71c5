//! Per-parameter, per-task learning-rate vectors.
//!
//! Each task `u` owns a raw vector `b_u` the meta-learner trains while the
//! task is active. The effective rate is the clamp `relu(min(b, kappa))`,
//! so every coordinate lies in `[0, kappa]`. Finishing a task freezes its
//! vector for the rest of the run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::ParamLayout;
use crate::nn::AdamState;

/// Fresh rate vectors start at this constant.
pub const BETA_INIT: f64 = 0.01;

/// Elementwise `relu(min(b, kappa))`.
pub fn clamp_beta(raw: &[f64], kappa: f64) -> Vec<f64> {
    raw.iter().map(|&b| clamp_one(b, kappa)).collect()
}

#[inline]
pub(crate) fn clamp_one(b: f64, kappa: f64) -> f64 {
    b.min(kappa).max(0.0)
}

/// `true` while the clamp is strictly inactive, which is where the meta
/// gradient flows. The boundary subgradient is defined as zero (one-sided).
#[inline]
pub(crate) fn clamp_gate(b: f64, kappa: f64) -> bool {
    b > 0.0 && b < kappa
}

/// All per-task rate vectors plus the meta-optimizer over the active one.
#[derive(Debug, Clone)]
pub struct BetaBank {
    raw: BTreeMap<usize, Vec<f64>>,
    frozen: BTreeMap<usize, bool>,
    kappa: f64,
    meta_opt: AdamState,
    active_task: usize,
    param_len: usize,
}

impl BetaBank {
    /// Starts at task 1 with `b_1 = BETA_INIT` everywhere.
    pub fn new(param_len: usize, kappa: f64, meta_lr: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::config(format!("kappa must be > 0, got {kappa}")));
        }
        let mut raw = BTreeMap::new();
        raw.insert(1, vec![BETA_INIT; param_len]);
        let mut frozen = BTreeMap::new();
        frozen.insert(1, false);
        Ok(Self {
            raw,
            frozen,
            kappa,
            meta_opt: AdamState::new(param_len, meta_lr),
            active_task: 1,
            param_len,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn param_len(&self) -> usize {
        self.param_len
    }

    pub fn active_task(&self) -> usize {
        self.active_task
    }

    pub fn is_frozen(&self, task_id: usize) -> bool {
        self.frozen.get(&task_id).copied().unwrap_or(false)
    }

    pub fn raw(&self, task_id: usize) -> Option<&[f64]> {
        self.raw.get(&task_id).map(Vec::as_slice)
    }

    /// Clamped rates for one task.
    pub fn effective_beta(&self, task_id: usize) -> Option<Vec<f64>> {
        self.raw.get(&task_id).map(|b| clamp_beta(b, self.kappa))
    }

    /// Task ids with a rate vector, in order.
    pub fn task_ids(&self) -> Vec<usize> {
        self.raw.keys().copied().collect()
    }

    pub(crate) fn meta_opt_mut(&mut self) -> &mut AdamState {
        &mut self.meta_opt
    }

    pub fn meta_opt(&self) -> &AdamState {
        &self.meta_opt
    }

    pub(crate) fn active_raw_mut(&mut self) -> &mut Vec<f64> {
        let active = self.active_task;
        self.raw.get_mut(&active).expect("active task has a vector")
    }

    /// Overwrites an unfrozen task's raw vector; frozen tasks reject writes.
    pub fn set_raw(&mut self, task_id: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.param_len {
            return Err(Error::config("rate vector length mismatch"));
        }
        if self.is_frozen(task_id) {
            return Err(Error::Strategy(format!(
                "task {task_id} learning rates are frozen"
            )));
        }
        self.raw.insert(task_id, values);
        self.frozen.entry(task_id).or_insert(false);
        Ok(())
    }

    /// Freezes the finished task's rates, opens a fresh vector for the next
    /// task, and resets the meta-optimizer state.
    pub fn freeze_task(&mut self, task_id: usize) -> Result<()> {
        if task_id != self.active_task {
            return Err(Error::Strategy(format!(
                "cannot freeze task {task_id}: active task is {}",
                self.active_task
            )));
        }
        if self.is_frozen(task_id) {
            return Err(Error::Strategy(format!("task {task_id} already frozen")));
        }
        self.frozen.insert(task_id, true);
        let next = task_id + 1;
        self.raw.insert(next, vec![BETA_INIT; self.param_len]);
        self.frozen.insert(next, false);
        self.meta_opt.reset();
        self.active_task = next;
        Ok(())
    }

    /// Table-4 style ablation: every frozen vector is overwritten with the
    /// constant `c` (the clamp still applies downstream).
    pub fn apply_ablation(&mut self, constant: f64) {
        for (&task, frozen) in &self.frozen {
            if *frozen {
                if let Some(b) = self.raw.get_mut(&task) {
                    b.iter_mut().for_each(|v| *v = constant);
                }
            }
        }
    }

    /// Serializes one task's raw vector with enough shape information to
    /// recompute layer statistics later.
    pub fn export_task_snapshot(&self, task_id: usize, layout: &ParamLayout) -> Result<Vec<u8>> {
        let raw = self
            .raw
            .get(&task_id)
            .ok_or_else(|| Error::Strategy(format!("no rate vector for task {task_id}")))?;
        let mut out = Vec::with_capacity(32 + raw.len() * 8);
        out.extend_from_slice(b"RCLB");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(task_id as u32).to_le_bytes());
        out.extend_from_slice(&self.kappa.to_le_bytes());
        out.extend_from_slice(&(layout.n_layers() as u32).to_le_bytes());
        for seg in layout.segments() {
            out.extend_from_slice(&(seg.rows as u32).to_le_bytes());
            out.extend_from_slice(&(seg.cols as u32).to_le_bytes());
        }
        out.extend_from_slice(&(raw.len() as u64).to_le_bytes());
        for v in raw {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Writes `beta_task_NN.bin` into `dir`.
    pub fn write_task_snapshot(
        &self,
        task_id: usize,
        layout: &ParamLayout,
        dir: &Path,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let bytes = self.export_task_snapshot(task_id, layout)?;
        std::fs::write(dir.join(format!("beta_task_{task_id:02}.bin")), bytes)?;
        Ok(())
    }
}

/// A decoded task snapshot: raw rates plus the shape map they were saved
/// under.
#[derive(Debug, Clone)]
pub struct BetaSnapshot {
    pub task_id: usize,
    pub kappa: f64,
    pub layer_shapes: Vec<(usize, usize)>,
    pub raw: Vec<f64>,
}

impl BetaSnapshot {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let take = |offset: usize, len: usize| -> Result<&[u8]> {
            bytes
                .get(offset..offset + len)
                .ok_or_else(|| Error::idx(bytes.len(), "truncated beta snapshot"))
        };
        if take(0, 4)? != b"RCLB" {
            return Err(Error::idx(0, "bad beta snapshot magic"));
        }
        let u32_at = |offset: usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(offset, 4)?.try_into().unwrap()))
        };
        let version = u32_at(4)?;
        if version != 1 {
            return Err(Error::idx(4, format!("unsupported snapshot version {version}")));
        }
        let task_id = u32_at(8)? as usize;
        let kappa = f64::from_le_bytes(take(12, 8)?.try_into().unwrap());
        let n_layers = u32_at(20)? as usize;
        let mut layer_shapes = Vec::with_capacity(n_layers);
        let mut offset = 24;
        for _ in 0..n_layers {
            let rows = u32_at(offset)? as usize;
            let cols = u32_at(offset + 4)? as usize;
            layer_shapes.push((rows, cols));
            offset += 8;
        }
        let len = u64::from_le_bytes(take(offset, 8)?.try_into().unwrap()) as usize;
        offset += 8;
        let mut raw = Vec::with_capacity(len);
        for _ in 0..len {
            raw.push(f64::from_le_bytes(take(offset, 8)?.try_into().unwrap()));
            offset += 8;
        }
        Ok(Self {
            task_id,
            kappa,
            layer_shapes,
            raw,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read(path)?)
    }
}

/// Summary CSV over exported snapshots: one row per (task, layer) with the
/// min/max/mean of the effective rates and the extreme-value fractions.
pub fn beta_summary_csv(snapshots: &[BetaSnapshot]) -> String {
    let mut out = String::from("task_id,layer,min,max,mean,frac_below_0.02,frac_above_0.05\n");
    for snap in snapshots {
        let beta = clamp_beta(&snap.raw, snap.kappa);
        let mut offset = 0;
        for (layer, &(rows, cols)) in snap.layer_shapes.iter().enumerate() {
            let len = rows * cols + rows;
            let slice = &beta[offset..offset + len];
            offset += len;
            let min = slice.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mean = slice.iter().sum::<f64>() / len as f64;
            let below = slice.iter().filter(|&&b| b < 0.02).count() as f64 / len as f64;
            let above = slice.iter().filter(|&&b| b > 0.05).count() as f64 / len as f64;
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                snap.task_id,
                layer + 1,
                min,
                max,
                mean,
                below,
                above
            ));
        }
    }
    out
}
