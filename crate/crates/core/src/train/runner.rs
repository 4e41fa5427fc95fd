//! Training loop with run-directory persistence: manifest, metrics CSV,
//! diagnostics log and resumable checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rollout::DiagnosticRecord;
use super::{
    collect_rollout, evaluate, ppo_update, prepare_advantages, record_trace, EvalResult, Policies, PolicyRunner, UpdateStats,
};
use crate::config::RunConfig;
use crate::env::{TeamEnv, TraceRow};
use crate::error::{Error, Result};
use crate::intrinsic::{IntrinsicEngine, RewardMode};
use crate::rng::{derive_seed, rng_from, rng_indexed, Rng, RngState};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Columns before the per-agent intrinsic means.
pub const METRICS_HEADER: [&str; 5] = ["iteration", "env_steps", "eval_mean", "eval_std", "train_team_return"];
const UPDATE_COLUMNS: [&str; 7] = [
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "actor_grad_norm",
    "critic_grad_norm",
];

/// Full metrics header for `n_coop` cooperative agents, with adversary
/// columns when there is an adversary.
pub fn metrics_header(n_coop: usize, adversary: bool) -> Vec<String> {
    let mut h: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    h.extend((0..n_coop).map(|i| format!("ccl_agent{i}")));
    h.extend((0..n_coop).map(|i| format!("oem_agent{i}")));
    h.extend(UPDATE_COLUMNS.iter().map(|s| s.to_string()));
    if adversary {
        h.extend(UPDATE_COLUMNS.iter().map(|s| format!("adv_{s}")));
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub env_steps: usize,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub train_team_return: f64,
    pub mean_ccl: Vec<f64>,
    pub mean_oem: Vec<f64>,
    pub updates: Vec<UpdateStats>,
}

impl MetricsRow {
    pub fn to_record(&self) -> Vec<String> {
        let mut r = vec![
            self.iteration.to_string(),
            self.env_steps.to_string(),
            self.eval_mean.to_string(),
            self.eval_std.to_string(),
            self.train_team_return.to_string(),
        ];
        r.extend(self.mean_ccl.iter().chain(&self.mean_oem).map(f64::to_string));
        for u in &self.updates {
            r.extend(
                [
                    u.policy_loss,
                    u.value_loss,
                    u.entropy,
                    u.clip_fraction,
                    u.approx_kl,
                    u.actor_grad_norm,
                    u.critic_grad_norm,
                ]
                .iter()
                .map(f64::to_string),
            );
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub env: u64,
    pub action: u64,
    pub update: u64,
    pub init: u64,
    pub encoder: u64,
    pub eval: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Self {
            master,
            env: derive_seed(master, "env"),
            action: derive_seed(master, "action"),
            update: derive_seed(master, "update"),
            init: derive_seed(master, "init"),
            encoder: derive_seed(master, "encoder"),
            eval: derive_seed(master, "eval"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub iteration: usize,
    pub env_steps: usize,
    pub policies: Policies,
    pub env_rng: RngState,
    pub action_rng: RngState,
    pub update_rng: RngState,
}

impl Checkpoint {
    pub fn file_name(iteration: usize) -> String {
        format!("iter_{iteration:06}.json")
    }

    pub fn path(run_dir: &Path, iteration: usize) -> PathBuf {
        run_dir.join(CHECKPOINT_DIR).join(Self::file_name(iteration))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                ck.version
            )));
        }
        Ok(ck)
    }

    /// Loads the checkpoint taken after `iteration`, naming the iteration
    /// when it is missing.
    pub fn load_iteration(run_dir: &Path, iteration: usize) -> Result<Self> {
        let path = Self::path(run_dir, iteration);
        if !path.exists() {
            return Err(Error::MissingCheckpoint {
                iteration,
                dir: run_dir.to_path_buf(),
            });
        }
        Self::load(&path)
    }
}

/// Highest checkpointed iteration in a run directory.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<usize>> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    if !dir.exists() {
        return Ok(None);
    }
    let mut best = None;
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let name = entry.map_err(|e| Error::io(&dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name.strip_prefix("iter_").and_then(|s| s.strip_suffix(".json")) {
            if let Ok(i) = n.parse::<usize>() {
                best = best.max(Some(i));
            }
        }
    }
    Ok(best)
}

pub fn read_manifest(run_dir: &Path) -> Result<Manifest> {
    let path = run_dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct DiagnosticLine<'a> {
    iteration: usize,
    #[serde(flatten)]
    record: &'a DiagnosticRecord,
}

pub struct Trainer {
    pub config: RunConfig,
    pub run_dir: PathBuf,
    pub policies: Policies,
    pub iteration: usize,
    pub env_steps: usize,
    env: Box<dyn TeamEnv>,
    eval_env: Box<dyn TeamEnv>,
    engine: Option<IntrinsicEngine>,
    seeds: Seeds,
    env_rng: Rng,
    action_rng: Rng,
    update_rng: Rng,
}

impl Trainer {
    fn build(config: RunConfig, run_dir: PathBuf) -> Result<Self> {
        config.validate()?;
        let seeds = Seeds::derive(config.seed);
        let env = config.env.build()?;
        let eval_env = config.env.build()?;
        let n_coop = env.n_cooperative();
        let engine = if config.intrinsic.mode == RewardMode::None {
            None
        } else {
            Some(IntrinsicEngine::new(
                config.intrinsic.clone(),
                &env.obs_dims()[..n_coop],
                seeds.encoder,
            )?)
        };
        let mut init_rng = rng_from(config.seed, "init");
        let policies = Policies::new(env.as_ref(), &config.train, &config.ppo, &mut init_rng)?;
        Ok(Self {
            env_rng: rng_from(config.seed, "env"),
            action_rng: rng_from(config.seed, "action"),
            update_rng: rng_from(config.seed, "update"),
            policies,
            iteration: 0,
            env_steps: 0,
            env,
            eval_env,
            engine,
            seeds,
            config,
            run_dir,
        })
    }

    /// Starts a fresh run in `run_dir`, writing the manifest and the metrics
    /// header. Refuses to overwrite an existing run.
    pub fn create(config: RunConfig, run_dir: &Path) -> Result<Self> {
        if run_dir.join(MANIFEST_FILE).exists() {
            return Err(Error::Config(format!(
                "{} already holds a run; use resume",
                run_dir.display()
            )));
        }
        let trainer = Self::build(config, run_dir.to_path_buf())?;
        let ck_dir = run_dir.join(CHECKPOINT_DIR);
        fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
        let manifest = Manifest {
            tool: "ccl".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: trainer.config.hash(),
            seeds: trainer.seeds.clone(),
            config: trainer.config.clone(),
        };
        write_atomic(
            &run_dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
        let mut w = csv::Writer::from_path(run_dir.join(METRICS_FILE))?;
        w.write_record(trainer.header())?;
        w.flush().map_err(|e| Error::io(run_dir.join(METRICS_FILE), e))?;
        let diag = run_dir.join(DIAGNOSTICS_FILE);
        fs::write(&diag, b"").map_err(|e| Error::io(&diag, e))?;
        Ok(trainer)
    }

    /// Reopens a run at its latest checkpoint. Metrics and diagnostics
    /// written after that checkpoint are discarded so the continuation
    /// appends exactly what an uninterrupted run would have.
    /// `iterations` optionally raises the iteration budget.
    pub fn resume(run_dir: &Path, iterations: Option<usize>) -> Result<Self> {
        let manifest = read_manifest(run_dir)?;
        let mut config = manifest.config;
        if let Some(n) = iterations {
            config.train.iterations = n;
        }
        let mut trainer = Self::build(config, run_dir.to_path_buf())?;
        let Some(it) = latest_checkpoint(run_dir)? else {
            return Err(Error::Checkpoint(format!(
                "{} has no checkpoint to resume from",
                run_dir.display()
            )));
        };
        let ck = Checkpoint::load_iteration(run_dir, it)?;
        if ck.config_hash != manifest.config_hash || ck.config_hash != trainer.config.hash() {
            return Err(Error::Checkpoint(format!(
                "checkpoint {it} was written under a different config"
            )));
        }
        trainer.policies = ck.policies;
        trainer.iteration = ck.iteration;
        trainer.env_steps = ck.env_steps;
        trainer.env_rng = ck.env_rng.restore()?;
        trainer.action_rng = ck.action_rng.restore()?;
        trainer.update_rng = ck.update_rng.restore()?;
        trainer.truncate_logs()?;
        Ok(trainer)
    }

    fn header(&self) -> Vec<String> {
        metrics_header(self.env.n_cooperative(), self.policies.roles.len() > 1)
    }

    fn truncate_logs(&self) -> Result<()> {
        let metrics = self.run_dir.join(METRICS_FILE);
        let text = fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
        let kept: Vec<&str> = text.lines().take(self.iteration + 1).collect();
        write_atomic(&metrics, (kept.join("\n") + "\n").as_bytes())?;

        let diag = self.run_dir.join(DIAGNOSTICS_FILE);
        let text = fs::read_to_string(&diag).unwrap_or_default();
        let mut out = String::new();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line)?;
            if v["iteration"].as_u64().is_some_and(|i| i as usize <= self.iteration) {
                out.push_str(line);
                out.push('\n');
            }
        }
        write_atomic(&diag, out.as_bytes())
    }

    pub fn seeds(&self) -> &Seeds {
        &self.seeds
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: self.config.hash(),
            iteration: self.iteration,
            env_steps: self.env_steps,
            policies: self.policies.clone(),
            env_rng: RngState::capture(&self.env_rng),
            action_rng: RngState::capture(&self.action_rng),
            update_rng: RngState::capture(&self.update_rng),
        }
    }

    pub fn save_checkpoint(&self) -> Result<PathBuf> {
        let path = Checkpoint::path(&self.run_dir, self.iteration);
        write_atomic(&path, serde_json::to_string(&self.checkpoint())?.as_bytes())?;
        Ok(path)
    }

    /// Collect, update, evaluate; appends one metrics row.
    pub fn run_iteration(&mut self) -> Result<MetricsRow> {
        let iteration = self.iteration + 1;
        let mut buffer = collect_rollout(
            &self.policies,
            self.env.as_mut(),
            self.engine.as_mut(),
            &self.config.intrinsic,
            &self.config.ppo,
            &mut self.env_rng,
            &mut self.action_rng,
        )
        .map_err(|e| Error::Training(format!("iteration {iteration}: rollout failed: {e}")))?;

        let t_max = buffer.episode_length;
        let mut updates = Vec::with_capacity(self.policies.roles.len());
        for (role, seqs) in self.policies.roles.iter_mut().zip(buffer.roles.iter_mut()) {
            prepare_advantages(role, seqs, &self.config.ppo)?;
            let stats = ppo_update(role, seqs, &self.config.ppo, t_max, &mut self.update_rng)
                .map_err(|e| Error::Training(format!("iteration {iteration}: update failed: {e}")))?;
            updates.push(stats);
        }

        let mut eval_rng = rng_indexed(self.seeds.eval, "eval", iteration as u64);
        let mut runner = PolicyRunner::new(&self.policies, true);
        let eval = evaluate(
            &mut runner,
            self.eval_env.as_mut(),
            self.config.train.eval_episodes,
            &mut eval_rng,
        )?;

        self.iteration = iteration;
        self.env_steps += buffer.env_steps();
        let row = MetricsRow {
            iteration,
            env_steps: self.env_steps,
            eval_mean: eval.mean,
            eval_std: eval.std,
            train_team_return: buffer.team_returns.iter().sum::<f64>() / buffer.team_returns.len() as f64,
            mean_ccl: buffer.mean_ccl.clone(),
            mean_oem: buffer.mean_oem.clone(),
            updates,
        };
        self.append_logs(&row, &buffer.diagnostics)?;
        if iteration % self.config.train.checkpoint_every == 0 || iteration == self.config.train.iterations {
            self.save_checkpoint()?;
        }
        Ok(row)
    }

    fn append_logs(&self, row: &MetricsRow, diagnostics: &[DiagnosticRecord]) -> Result<()> {
        let metrics = self.run_dir.join(METRICS_FILE);
        let file = fs::OpenOptions::new()
            .append(true)
            .open(&metrics)
            .map_err(|e| Error::io(&metrics, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(row.to_record())?;
        w.flush().map_err(|e| Error::io(&metrics, e))?;

        let diag = self.run_dir.join(DIAGNOSTICS_FILE);
        let mut f = fs::OpenOptions::new()
            .append(true)
            .open(&diag)
            .map_err(|e| Error::io(&diag, e))?;
        let mut out = String::new();
        for record in diagnostics {
            out.push_str(&serde_json::to_string(&DiagnosticLine {
                iteration: row.iteration,
                record,
            })?);
            out.push('\n');
        }
        f.write_all(out.as_bytes()).map_err(|e| Error::io(&diag, e))
    }

    /// Runs until the configured iteration budget is spent; `on_row` sees
    /// every new metrics row.
    pub fn train(&mut self, mut on_row: impl FnMut(&MetricsRow)) -> Result<()> {
        while self.iteration < self.config.train.iterations {
            let row = self.run_iteration()?;
            on_row(&row);
        }
        Ok(())
    }
}
/// Loads the checkpoint of `iteration`, or the latest one.
pub fn load_run_checkpoint(run_dir: &Path, iteration: Option<usize>) -> Result<(Manifest, Checkpoint)> {
    let manifest = read_manifest(run_dir)?;
    let iteration = match iteration {
        Some(it) => it,
        None => {
            latest_checkpoint(run_dir)?.ok_or_else(|| Error::Checkpoint(format!("no checkpoints in {}", run_dir.display())))?
        }
    };
    let ck = Checkpoint::load_iteration(run_dir, iteration)?;
    if ck.config_hash != manifest.config_hash {
        return Err(Error::Checkpoint(format!(
            "checkpoint {iteration} does not belong to this run"
        )));
    }
    Ok((manifest, ck))
}

/// Deterministic evaluation of a saved policy on the same episode stream
/// the trainer used for that iteration.
pub fn evaluate_checkpoint(manifest: &Manifest, ck: &Checkpoint, episodes: Option<usize>) -> Result<EvalResult> {
    let mut env = manifest.config.env.build()?;
    let mut rng = rng_indexed(manifest.seeds.eval, "eval", ck.iteration as u64);
    let mut runner = PolicyRunner::new(&ck.policies, true);
    evaluate(
        &mut runner,
        env.as_mut(),
        episodes.unwrap_or(manifest.config.train.eval_episodes),
        &mut rng,
    )
}

/// One deterministic episode of a saved policy with per-step rewards under
/// the run's reward mode.
pub fn trace_checkpoint(manifest: &Manifest, ck: &Checkpoint) -> Result<Vec<TraceRow>> {
    let cfg = &manifest.config;
    let mut env = cfg.env.build()?;
    let n_coop = env.n_cooperative();
    let mut engine = IntrinsicEngine::new(cfg.intrinsic.clone(), &env.obs_dims()[..n_coop], manifest.seeds.encoder)?;
    let mut rng = rng_indexed(manifest.seeds.eval, "trace", ck.iteration as u64);
    let mut runner = PolicyRunner::new(&ck.policies, true);
    record_trace(&mut runner, env.as_mut(), Some(&mut engine), &cfg.intrinsic, &mut rng)
}
