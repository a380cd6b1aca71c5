//! Sequential-training strategies: naive SGD, experience replay, and
//! replay with per-task meta-learned learning rates.

pub mod beta;

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::memory::EpisodicMemory;
use crate::nn::{backward, sgd_step, MiniBatch, MlpArchitecture, ParamVector};

pub use beta::{beta_summary_csv, clamp_beta, BetaBank, BetaSnapshot, BETA_INIT};
use beta::{clamp_gate, clamp_one};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Naive sequential SGD with no forgetting countermeasure.
    Singular,
    /// Experience replay: co-train each batch with sampled past data.
    Er,
    /// Replay with a per-parameter, per-task learned learning rate.
    MetaSgdCl,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] =
        [StrategyKind::Singular, StrategyKind::Er, StrategyKind::MetaSgdCl];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Singular => "singular",
            StrategyKind::Er => "er",
            StrategyKind::MetaSgdCl => "metasgd_cl",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singular" => Ok(StrategyKind::Singular),
            "er" => Ok(StrategyKind::Er),
            "metasgd_cl" => Ok(StrategyKind::MetaSgdCl),
            other => Err(Error::config(format!(
                "unknown strategy {other:?}; supported: singular, er, metasgd_cl"
            ))),
        }
    }
}

/// Hyperparameters selecting and tuning a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// SGD learning rate for singular and replay updates.
    pub alpha: f64,
    /// Clamp bound on effective meta-learned rates.
    pub kappa: f64,
    /// Adam learning rate for the meta-updates.
    pub meta_lr: f64,
    /// Replace every finished task's rate vector with this constant when a
    /// new task starts.
    pub ablation: Option<f64>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::MetaSgdCl,
            alpha: 0.01,
            kappa: 0.02,
            meta_lr: 0.01,
            ablation: None,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ablation.is_some() && self.kind != StrategyKind::MetaSgdCl {
            return Err(Error::config(
                "ablation is only valid with the metasgd_cl strategy",
            ));
        }
        if let Some(c) = self.ablation {
            if c < 0.0 {
                return Err(Error::config("ablation constant must be >= 0"));
            }
        }
        if !(self.alpha > 0.0) || !(self.kappa > 0.0) || !(self.meta_lr > 0.0) {
            return Err(Error::config("alpha, kappa, and meta_lr must be > 0"));
        }
        Ok(())
    }
}

/// Mean loss and gradient restricted to one task's rows of a combined batch.
#[derive(Debug, Clone)]
pub struct TaskGradient {
    pub loss: f64,
    pub grad: ParamVector,
    /// Number of rows this task contributed.
    pub rows: usize,
}

/// Task-wise decomposition of a combined batch's gradient.
#[derive(Debug, Clone)]
pub struct TaskGradients {
    pub current_task: usize,
    pub per_task: BTreeMap<usize, TaskGradient>,
}

impl TaskGradients {
    pub fn total_rows(&self) -> usize {
        self.per_task.values().map(|g| g.rows).sum()
    }
}

/// One naive SGD step on the batch loss.
pub fn singular_step(
    params: &ParamVector,
    arch: &MlpArchitecture,
    batch: &MiniBatch,
    alpha: f64,
) -> Result<ParamVector> {
    let (_, grad) = backward(params, arch, batch)?;
    sgd_step(params, &grad, alpha)
}

/// Experience replay: appends a sampled memory batch to the current batch
/// and takes one SGD step on the pooled mean loss. Task 1 (no history)
/// reduces to [`singular_step`].
pub fn er_step<R: Rng>(
    params: &ParamVector,
    arch: &MlpArchitecture,
    current_batch: &MiniBatch,
    memory: &EpisodicMemory,
    current_task: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<ParamVector> {
    if current_task < 2 {
        return singular_step(params, arch, current_batch, alpha);
    }
    let replay = memory.sample_replay(current_task, rng)?;
    let combined = current_batch.concat(&replay);
    let (_, grad) = backward(params, arch, &combined)?;
    sgd_step(params, &grad, alpha)
}

/// Splits a combined batch by task and computes each task's mean loss and
/// gradient. The row-weighted recombination of these reproduces the pooled
/// gradient over the whole batch.
pub fn compute_task_gradients(
    params: &ParamVector,
    arch: &MlpArchitecture,
    combined: &MiniBatch,
) -> Result<TaskGradients> {
    if combined.is_empty() {
        return Err(Error::config("task gradients of an empty batch"));
    }
    let mut per_task = BTreeMap::new();
    for (task, rows) in combined.split_by_task() {
        let (loss, grad) = backward(params, arch, &rows)?;
        per_task.insert(
            task,
            TaskGradient {
                loss,
                grad,
                rows: rows.len(),
            },
        );
    }
    let current_task = *per_task.keys().next_back().expect("non-empty");
    Ok(TaskGradients {
        current_task,
        per_task,
    })
}

/// The practical update with frozen past rates:
///
/// `theta' = theta - beta_V (.) grad_V - 1/(V-1) * sum_u beta_u (.) grad_u`
///
/// where `V` is the current task and `u` ranges over past tasks present in
/// the batch. With no past tasks the sum is absent. Past tasks absent from
/// the batch simply contribute no term; the `1/(V-1)` factor always uses
/// the full past-task count.
pub fn metasgd_cl_step(
    params: &ParamVector,
    bank: &BetaBank,
    grads: &TaskGradients,
) -> Result<ParamVector> {
    let current = grads.current_task;
    let mut out = params.clone();
    let kappa = bank.kappa();
    let past_scale = if current > 1 {
        1.0 / (current - 1) as f64
    } else {
        1.0
    };
    for (&task, tg) in &grads.per_task {
        let raw = bank.raw(task).ok_or_else(|| {
            Error::Strategy(format!("no learning-rate vector for task {task}"))
        })?;
        if task < current && !bank.is_frozen(task) {
            return Err(Error::Strategy(format!(
                "past task {task} must be frozen before updating task {current}"
            )));
        }
        let scale = if task == current { 1.0 } else { past_scale };
        for ((p, &b), &g) in out.values_mut().iter_mut().zip(raw).zip(tg.grad.values()) {
            *p -= scale * clamp_one(b, kappa) * g;
        }
    }
    out.check_finite("metasgd_cl_step result")?;
    Ok(out)
}

/// First-order gradient of the meta objective with respect to the active
/// task's raw rates.
///
/// The meta objective is the loss of the committed learner on the
/// current-task rows. Treating the task gradient as constant,
/// `d/db_k = -(dLoss/dtheta'_k) * grad_V_k`, gated to zero wherever the
/// clamp is active.
pub fn meta_gradient(
    bank: &BetaBank,
    params_after: &ParamVector,
    arch: &MlpArchitecture,
    current_batch: &MiniBatch,
    grads: &TaskGradients,
) -> Result<(f64, Vec<f64>)> {
    let active = bank.active_task();
    let raw = bank
        .raw(active)
        .ok_or_else(|| Error::Strategy(format!("no rate vector for task {active}")))?;
    let task_grad = grads.per_task.get(&active).ok_or_else(|| {
        Error::Strategy(format!("no task gradient for current task {active}"))
    })?;
    let (meta_loss, dtheta) = backward(params_after, arch, current_batch)?;
    let kappa = bank.kappa();
    let grad: Vec<f64> = raw
        .iter()
        .zip(dtheta.values())
        .zip(task_grad.grad.values())
        .map(|((&b, &dt), &g)| if clamp_gate(b, kappa) { -dt * g } else { 0.0 })
        .collect();
    Ok((meta_loss, grad))
}

/// One Adam step on the active task's rates toward reducing the loss of the
/// committed learner on the current batch. Returns the meta loss.
pub fn meta_update(
    bank: &mut BetaBank,
    params_after: &ParamVector,
    arch: &MlpArchitecture,
    current_batch: &MiniBatch,
    grads: &TaskGradients,
) -> Result<f64> {
    let active = bank.active_task();
    if bank.is_frozen(active) {
        return Err(Error::Strategy(format!(
            "meta_update on frozen task {active}"
        )));
    }
    let (meta_loss, grad) = meta_gradient(bank, params_after, arch, current_batch, grads)?;
    // Split borrow: the optimizer state and the active vector live in
    // different fields.
    let mut raw = std::mem::take(bank.active_raw_mut());
    let outcome = crate::nn::adam_step(bank.meta_opt_mut(), &mut raw, &grad);
    *bank.active_raw_mut() = raw;
    outcome?;
    Ok(meta_loss)
}

/// Driver holding per-run strategy state; the runner calls `begin_task`,
/// `step`, and `finish_task` in stream order.
#[derive(Debug, Clone)]
pub struct Strategy {
    config: StrategyConfig,
    bank: Option<BetaBank>,
}

impl Strategy {
    pub fn new(config: StrategyConfig, param_len: usize) -> Result<Self> {
        config.validate()?;
        let bank = match config.kind {
            StrategyKind::MetaSgdCl => {
                Some(BetaBank::new(param_len, config.kappa, config.meta_lr)?)
            }
            _ => None,
        };
        Ok(Self { config, bank })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn kind(&self) -> StrategyKind {
        self.config.kind
    }

    pub fn bank(&self) -> Option<&BetaBank> {
        self.bank.as_ref()
    }

    pub fn begin_task(&mut self, task_id: usize) -> Result<()> {
        if let Some(bank) = &mut self.bank {
            if bank.active_task() != task_id {
                return Err(Error::Strategy(format!(
                    "begin_task({task_id}) while bank is at task {}",
                    bank.active_task()
                )));
            }
            if task_id >= 2 {
                if let Some(c) = self.config.ablation {
                    bank.apply_ablation(c);
                }
            }
        }
        Ok(())
    }

    /// One parameter update from the current batch (replay included where
    /// the strategy calls for it).
    pub fn step<R: Rng>(
        &mut self,
        params: &ParamVector,
        arch: &MlpArchitecture,
        batch: &MiniBatch,
        memory: &EpisodicMemory,
        task_id: usize,
        replay_rng: &mut R,
    ) -> Result<ParamVector> {
        match self.config.kind {
            StrategyKind::Singular => singular_step(params, arch, batch, self.config.alpha),
            StrategyKind::Er => er_step(
                params,
                arch,
                batch,
                memory,
                task_id,
                self.config.alpha,
                replay_rng,
            ),
            StrategyKind::MetaSgdCl => {
                let combined = if task_id >= 2 {
                    batch.concat(&memory.sample_replay(task_id, replay_rng)?)
                } else {
                    batch.clone()
                };
                let grads = compute_task_gradients(params, arch, &combined)?;
                let bank = self.bank.as_mut().expect("metasgd_cl has a bank");
                let next = metasgd_cl_step(params, bank, &grads)?;
                meta_update(bank, &next, arch, batch, &grads)?;
                Ok(next)
            }
        }
    }

    pub fn finish_task(&mut self, task_id: usize) -> Result<()> {
        if let Some(bank) = &mut self.bank {
            bank.freeze_task(task_id)?;
        }
        Ok(())
    }
}
