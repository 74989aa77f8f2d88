//! Benchmark stages.
//!
//! Each stage reads what earlier stages left in the run directory and writes
//! its own artifacts, so any stage can be rerun on its own. Demonstrations
//! and evaluation goals are fixed by the configuration; the run seeds vary
//! network initialisation, minibatch order and fine-tuning rollouts.

use std::sync::Arc;

use log::{info, warn};
use rand::Rng;

use super::artifacts::{
    create_parent, read_jsonl, require, write_jsonl, AblationRow, DistillRow, EvalRow, FinetuneRow, ImitationRow,
    Layout,
};
use super::baselines::nearest_neighbor_policy;
use super::config::RunConfig;
use super::distill::{distill, Teacher};
use super::report::{self, BenchmarkReport};
use crate::data::io::{read_dataset, read_trajectories, write_dataset, write_trajectories};
use crate::data::{
    oracle_datasets, relabel_flat, relabel_high, relabel_low, Dataset, RelabelConfig, Trajectory, Window,
};
use crate::env::{all_compound_goals, sample_compound_goals, scripted_demo, CompoundGoal, EnvSpec};
use crate::error::{Error, Result};
use crate::finetune::{
    finetune_flat, finetune_goal, pretrain_low_level_mode, FinetuneConfig, IterationHook, IterationStats, Mode,
    RewardConfig, Task, Variant,
};
use crate::imitation::{
    evaluate, evaluate_goal, fit_standardizer, train_flat, train_ril, Controller, EpisodeRecord, ILConfig,
};
use crate::policy::io::{load_policy, save_policy};
use crate::policy::PolicyParams;
use crate::seed::{self, stream};

/// Method names used in metric records.
pub mod method {
    pub const RIL: &str = "ril";
    pub const GCBC: &str = "gcbc";
    pub const BC: &str = "bc";
    pub const ORACLE: &str = "oracle";
    pub const NEAREST_NEIGHBOR: &str = "nearest-neighbor";
    pub const GCBC_FINETUNED: &str = "gcbc-ft";
    pub const PRETRAIN_LOW_LEVEL: &str = "pretrain-low-level";
    pub const DISTILLED: &str = "distilled";
}

/// Stage names in execution order.
pub const STAGES: [&str; 8] = [
    "gen-demos",
    "relabel",
    "train-il",
    "finetune",
    "distill",
    "evaluate",
    "ablate",
    "report",
];

const IL_GROUP: &str = "il";

fn goal_file(g: usize, level: &str) -> String {
    format!("goal{g:02}_{level}")
}

pub struct Pipeline {
    cfg: RunConfig,
    layout: Layout,
    spec: EnvSpec,
    goals: Vec<CompoundGoal>,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = EnvSpec::new(&cfg.env)?;
        let goals = sample_compound_goals(&spec, cfg.goals.count, cfg.goals.seed)?;
        let layout = Layout::new(&cfg.output_dir);
        Ok(Self {
            cfg,
            layout,
            spec,
            goals,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn goals(&self) -> &[CompoundGoal] {
        &self.goals
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<BenchmarkReport> {
        self.gen_demos()?;
        self.relabel()?;
        self.train_il()?;
        self.finetune()?;
        self.distill()?;
        self.evaluate()?;
        self.ablate()?;
        self.report()
    }

    /// Run one stage by name. `report` and `verify` return the report.
    pub fn run_stage(&self, stage: &str) -> Result<Option<BenchmarkReport>> {
        match stage {
            "gen-demos" => self.gen_demos().map(|_| None),
            "relabel" => self.relabel().map(|_| None),
            "train-il" => self.train_il().map(|_| None),
            "finetune" => self.finetune().map(|_| None),
            "distill" => self.distill().map(|_| None),
            "evaluate" => self.evaluate().map(|_| None),
            "ablate" => self.ablate().map(|_| None),
            "report" => self.report().map(Some),
            "verify" => self.verify().map(Some),
            other => Err(Error::InvalidConfig(format!("unknown stage {other}"))),
        }
    }

    /// Seeds that need imitation policies: the relay seeds, then any
    /// baseline seed not among them.
    fn il_seeds(&self) -> Vec<u64> {
        let mut out = self.cfg.seeds.clone();
        for s in &self.cfg.baseline_seeds {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }

    fn task<'a>(&'a self, goal: &'a CompoundGoal, relabel: &'a RelabelConfig) -> Task<'a> {
        Task {
            spec: &self.spec,
            goal,
            exec: &self.cfg.exec,
            relabel,
        }
    }

    fn il_config(&self, seed: u64) -> ILConfig {
        ILConfig {
            seed,
            ..self.cfg.il.clone()
        }
    }

    fn finetune_config(&self, seed: u64, goal: usize, variant: Variant, mode: Mode) -> FinetuneConfig {
        FinetuneConfig {
            variant,
            mode,
            seed: seed::derive(seed, &[stream::FINETUNE, goal as u64]),
            ..self.cfg.finetune.clone()
        }
    }

    fn save(&self, seed: u64, group: &str, name: &str, params: &PolicyParams) -> Result<()> {
        let path = self.layout.policy(seed, group, name);
        create_parent(&path)?;
        save_policy(&path, params)
    }

    fn load(&self, seed: u64, group: &str, name: &str) -> Result<PolicyParams> {
        load_policy(&self.layout.policy(seed, group, name))
    }

    fn demos(&self) -> Result<Vec<Trajectory>> {
        read_trajectories(&self.layout.demos())
    }

    fn pool(&self) -> Result<Vec<Arc<Trajectory>>> {
        Ok(self.demos()?.into_iter().map(Arc::new).collect())
    }

    fn dataset(&self, name: &str, pool: &[Arc<Trajectory>]) -> Result<Dataset> {
        read_dataset(&self.layout.dataset(name), pool.to_vec())
    }

    fn eval_rows(&self, method: &str, seed: u64, records: Vec<EpisodeRecord>) -> impl Iterator<Item = EvalRow> + '_ {
        let method = method.to_string();
        records.into_iter().map(move |record| EvalRow {
            method: method.clone(),
            run_seed: seed,
            label: self.goals[record.goal].label(),
            record,
        })
    }

    fn finetune_rows(&self, method: &str, seed: u64, goal: usize, stats: Vec<IterationStats>) -> Vec<FinetuneRow> {
        stats
            .into_iter()
            .map(|stats| FinetuneRow {
                method: method.to_string(),
                run_seed: seed,
                goal,
                label: self.goals[goal].label(),
                stats,
            })
            .collect()
    }

    /// Generate the scripted demonstration pool. Each demonstration's goal is
    /// drawn uniformly over every compound goal of the scene.
    pub fn gen_demos(&self) -> Result<Vec<Trajectory>> {
        let d = &self.cfg.demos;
        let all = all_compound_goals(&self.spec)?;
        let demos = (0..d.count)
            .map(|i| {
                let k = seed::rng(d.seed, &[stream::DEMO_BATCH, i as u64]).random_range(0..all.len());
                scripted_demo(
                    &self.spec,
                    &all[k],
                    d.noise_scale,
                    seed::derive(d.seed, &[stream::DEMOS, i as u64]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        std::fs::create_dir_all(self.layout.root())?;
        std::fs::write(self.layout.config(), self.cfg.to_toml_string())?;
        write_trajectories(&self.layout.demos(), &demos)?;
        let truncated = demos.iter().filter(|t| t.meta.truncated).count();
        let steps: usize = demos.iter().map(Trajectory::len).sum();
        info!(
            "{} demonstrations, {} steps on average, {truncated} truncated",
            demos.len(),
            steps / demos.len()
        );
        Ok(demos)
    }

    /// Relabel the demonstrations into every dataset the imitation stage uses.
    pub fn relabel(&self) -> Result<()> {
        let pool = self.pool()?;
        let mut sets = vec![
            ("ril_low", relabel_low(&pool, &self.cfg.relabel)?),
            ("ril_high", relabel_high(&pool, &self.cfg.relabel)?),
            (
                "gcbc",
                relabel_flat(&pool, Window::Steps(self.cfg.baselines.gcbc_window))?,
            ),
            ("bc", relabel_flat(&pool, Window::Final)?),
        ];
        if self.cfg.baselines.oracle {
            let (low, high) = oracle_datasets(&pool, self.cfg.baselines.oracle_threshold)?;
            sets.push(("oracle_low", low));
            sets.push(("oracle_high", high));
        }
        for (name, ds) in &sets {
            let path = self.layout.dataset(name);
            create_parent(&path)?;
            write_dataset(&path, ds, "demos", false)?;
            info!("{name}: {} tuples", ds.len());
        }
        Ok(())
    }

    /// Train the relay policy and the imitation baselines for every seed.
    pub fn train_il(&self) -> Result<()> {
        let pool = self.pool()?;
        let d_low = self.dataset("ril_low", &pool)?;
        let d_high = self.dataset("ril_high", &pool)?;
        let gcbc = self.dataset("gcbc", &pool)?;
        let bc = self.dataset("bc", &pool)?;
        let oracle = if self.cfg.baselines.oracle {
            Some((self.dataset("oracle_low", &pool)?, self.dataset("oracle_high", &pool)?))
        } else {
            None
        };
        let mut rows = Vec::new();
        let mut record = |method: &str, seed: u64, report: crate::imitation::ILReport| {
            rows.extend(report.epochs.into_iter().map(|epoch| ImitationRow {
                method: method.into(),
                run_seed: seed,
                epoch,
            }));
        };
        for seed in self.il_seeds() {
            let il = self.il_config(seed);
            info!("seed {seed}: relay imitation");
            let (high, low, report) = train_ril(&d_low, &d_high, &il)?;
            self.save(seed, IL_GROUP, "ril_high", &high)?;
            self.save(seed, IL_GROUP, "ril_low", &low)?;
            record(method::RIL, seed, report);
            info!("seed {seed}: flat baselines");
            let (policy, report) = train_flat(&gcbc, &il)?;
            self.save(seed, IL_GROUP, method::GCBC, &policy)?;
            record(method::GCBC, seed, report);
            let (policy, report) = train_flat(&bc, &il)?;
            self.save(seed, IL_GROUP, method::BC, &policy)?;
            record(method::BC, seed, report);
            if let Some((o_low, o_high)) = &oracle {
                let (high, low, report) = train_ril(o_low, o_high, &il)?;
                self.save(seed, IL_GROUP, "oracle_high", &high)?;
                self.save(seed, IL_GROUP, "oracle_low", &low)?;
                record(method::ORACLE, seed, report);
            }
        }
        write_jsonl(&self.layout.metrics("imitation"), &rows)
    }

    /// Fine-tune one relay policy on one goal, saving checkpoints and the
    /// final networks under `group`.
    #[allow(clippy::too_many_arguments)]
    fn finetune_relay(
        &self,
        group: &str,
        seed: u64,
        g: usize,
        init: (&PolicyParams, &PolicyParams),
        buffers: (&Dataset, &Dataset),
        cfg: &FinetuneConfig,
    ) -> Result<Vec<IterationStats>> {
        let task = self.task(&self.goals[g], &self.cfg.relabel);
        let mut hook = self.checkpoint_hook(seed, group, g);
        let res = finetune_goal(
            init.0,
            init.1,
            buffers.0,
            buffers.1,
            &task,
            cfg,
            Some(&mut hook as &mut IterationHook),
        )?;
        self.save(seed, group, &goal_file(g, "high"), &res.high)?;
        self.save(seed, group, &goal_file(g, "low"), &res.low)?;
        Ok(res.stats)
    }

    fn checkpoint_hook<'a>(
        &'a self,
        seed: u64,
        group: &'a str,
        g: usize,
    ) -> impl FnMut(&IterationStats, &[(&str, &PolicyParams)]) -> Result<()> + 'a {
        let every = self.cfg.checkpoint_every;
        move |st, nets| {
            let done = st.iteration + 1;
            if every > 0 && done % every == 0 {
                for (name, params) in nets {
                    let file = format!("goal{g:02}_it{done:04}_{name}");
                    self.save(seed, &format!("{group}/checkpoints"), &file, params)?;
                }
            }
            Ok(())
        }
    }

    /// Fine-tune every relay variant per seed and goal, then the fine-tuned
    /// baselines.
    pub fn finetune(&self) -> Result<()> {
        let pool = self.pool()?;
        let d_low = self.dataset("ril_low", &pool)?;
        let d_high = self.dataset("ril_high", &pool)?;
        let mut rows = Vec::new();
        for &seed in &self.cfg.seeds {
            let high = self.load(seed, IL_GROUP, "ril_high")?;
            let low = self.load(seed, IL_GROUP, "ril_low")?;
            for g in 0..self.goals.len() {
                for &variant in &self.cfg.variants {
                    info!("seed {seed}, goal {}: {}", self.goals[g].label(), variant.label());
                    let cfg = self.finetune_config(seed, g, variant, Mode::Relay);
                    let stats =
                        self.finetune_relay(variant.label(), seed, g, (&high, &low), (&d_low, &d_high), &cfg)?;
                    rows.extend(self.finetune_rows(variant.label(), seed, g, stats));
                }
            }
        }
        let b = &self.cfg.baselines;
        if b.flat_finetune {
            let gcbc_data = self.dataset("gcbc", &pool)?;
            for &seed in &self.cfg.baseline_seeds {
                let policy = self.load(seed, IL_GROUP, method::GCBC)?;
                for (g, goal) in self.goals.iter().enumerate() {
                    info!("seed {seed}, goal {}: {}", goal.label(), method::GCBC_FINETUNED);
                    let cfg = self.finetune_config(seed, g, b.flat_variant, Mode::Flat);
                    let task = self.task(goal, &self.cfg.relabel);
                    let mut hook = self.checkpoint_hook(seed, method::GCBC_FINETUNED, g);
                    let res = finetune_flat(&policy, &gcbc_data, &task, &cfg, Some(&mut hook as &mut IterationHook))?;
                    self.save(seed, method::GCBC_FINETUNED, &goal_file(g, "flat"), &res.policy)?;
                    rows.extend(self.finetune_rows(method::GCBC_FINETUNED, seed, g, res.stats));
                }
            }
        }
        if b.pretrain_low_level {
            let standardizer = fit_standardizer(&d_high)?;
            for &seed in &self.cfg.baseline_seeds {
                let low = self.load(seed, IL_GROUP, "ril_low")?;
                for (g, goal) in self.goals.iter().enumerate() {
                    info!("seed {seed}, goal {}: {}", goal.label(), method::PRETRAIN_LOW_LEVEL);
                    let cfg = self.finetune_config(seed, g, Variant::Npg, Mode::PretrainLowLevel);
                    let task = self.task(goal, &self.cfg.relabel);
                    let mut hook = self.checkpoint_hook(seed, method::PRETRAIN_LOW_LEVEL, g);
                    let res = pretrain_low_level_mode(
                        &low,
                        standardizer.clone(),
                        &self.cfg.il.hidden,
                        &task,
                        &cfg,
                        Some(&mut hook as &mut IterationHook),
                    )?;
                    self.save(seed, method::PRETRAIN_LOW_LEVEL, &goal_file(g, "high"), &res.high)?;
                    rows.extend(self.finetune_rows(method::PRETRAIN_LOW_LEVEL, seed, g, res.stats));
                }
            }
        }
        write_jsonl(&self.layout.metrics("finetune"), &rows)
    }

    /// Distil each seed's per-goal fine-tuned policies into one relay policy.
    pub fn distill(&self) -> Result<()> {
        let mut rows = Vec::new();
        let d = &self.cfg.distill;
        if d.enabled {
            let group = d.variant.label();
            for &seed in &self.cfg.seeds {
                let nets = (0..self.goals.len())
                    .map(|g| {
                        Ok((
                            self.load(seed, group, &goal_file(g, "high"))?,
                            self.load(seed, group, &goal_file(g, "low"))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let teachers: Vec<Teacher> = nets
                    .iter()
                    .enumerate()
                    .map(|(g, (high, low))| Teacher {
                        goal_index: g,
                        goal: &self.goals[g],
                        high,
                        low,
                    })
                    .collect();
                info!("seed {seed}: distilling {} goals", teachers.len());
                let out = match distill(
                    &teachers,
                    &self.spec,
                    &self.cfg.exec,
                    &self.cfg.relabel,
                    &self.il_config(seed),
                    d.rollouts_per_goal,
                    seed,
                ) {
                    Ok(out) => {
                        self.save(seed, method::DISTILLED, "high", &out.high)?;
                        self.save(seed, method::DISTILLED, "low", &out.low)?;
                        out.kept
                    }
                    Err(Error::Empty(_)) => {
                        warn!("seed {seed}: no successful rollouts, nothing distilled");
                        vec![(d.rollouts_per_goal, 0); teachers.len()]
                    }
                    Err(e) => return Err(e),
                };
                rows.extend(out.iter().enumerate().map(|(g, &(rollouts, kept))| DistillRow {
                    run_seed: seed,
                    goal: g,
                    label: self.goals[g].label(),
                    rollouts,
                    kept,
                }));
            }
        }
        write_jsonl(&self.layout.metrics("distill"), &rows)
    }

    fn eval_all(&self, controller: Controller<'_>) -> Result<Vec<EpisodeRecord>> {
        evaluate(&self.spec, &self.goals, controller, &self.cfg.eval, &self.cfg.exec)
    }

    fn eval_one(&self, g: usize, controller: Controller<'_>) -> Result<Vec<EpisodeRecord>> {
        evaluate_goal(
            &self.spec,
            g,
            &self.goals[g],
            controller,
            &self.cfg.eval,
            &self.cfg.exec,
        )
    }

    /// Evaluate every trained policy. Imitation and distilled policies are
    /// scored on all goals; per-goal fine-tuned policies on their own goal.
    pub fn evaluate(&self) -> Result<()> {
        let mut rows: Vec<EvalRow> = Vec::new();
        let b = &self.cfg.baselines;
        for seed in self.il_seeds() {
            info!("seed {seed}: evaluating imitation policies");
            let high = self.load(seed, IL_GROUP, "ril_high")?;
            let low = self.load(seed, IL_GROUP, "ril_low")?;
            let recs = self.eval_all(Controller::Hierarchical { high: &high, low: &low })?;
            rows.extend(self.eval_rows(method::RIL, seed, recs));
            for name in [method::GCBC, method::BC] {
                let policy = self.load(seed, IL_GROUP, name)?;
                let recs = self.eval_all(Controller::Flat(&policy))?;
                rows.extend(self.eval_rows(name, seed, recs));
            }
            if b.oracle {
                let high = self.load(seed, IL_GROUP, "oracle_high")?;
                let low = self.load(seed, IL_GROUP, "oracle_low")?;
                let recs = self.eval_all(Controller::Hierarchical { high: &high, low: &low })?;
                rows.extend(self.eval_rows(method::ORACLE, seed, recs));
            }
        }
        if b.nearest_neighbor {
            let demos = self.demos()?;
            let mut recs = Vec::new();
            for (g, goal) in self.goals.iter().enumerate() {
                let actions = nearest_neighbor_policy(&demos, &goal.target_state)?;
                recs.extend(self.eval_one(g, Controller::OpenLoop(&actions))?);
            }
            // open loop: identical for every seed
            for &seed in &self.cfg.baseline_seeds {
                rows.extend(self.eval_rows(method::NEAREST_NEIGHBOR, seed, recs.clone()));
            }
        }
        for &seed in &self.cfg.seeds {
            info!("seed {seed}: evaluating fine-tuned policies");
            for &variant in &self.cfg.variants {
                for g in 0..self.goals.len() {
                    let high = self.load(seed, variant.label(), &goal_file(g, "high"))?;
                    let low = self.load(seed, variant.label(), &goal_file(g, "low"))?;
                    let recs = self.eval_one(g, Controller::Hierarchical { high: &high, low: &low })?;
                    rows.extend(self.eval_rows(variant.label(), seed, recs));
                }
            }
        }
        for &seed in &self.cfg.baseline_seeds {
            if b.flat_finetune {
                for g in 0..self.goals.len() {
                    let policy = self.load(seed, method::GCBC_FINETUNED, &goal_file(g, "flat"))?;
                    let recs = self.eval_one(g, Controller::Flat(&policy))?;
                    rows.extend(self.eval_rows(method::GCBC_FINETUNED, seed, recs));
                }
            }
            if b.pretrain_low_level {
                let low = self.load(seed, IL_GROUP, "ril_low")?;
                for g in 0..self.goals.len() {
                    let high = self.load(seed, method::PRETRAIN_LOW_LEVEL, &goal_file(g, "high"))?;
                    let recs = self.eval_one(g, Controller::Hierarchical { high: &high, low: &low })?;
                    rows.extend(self.eval_rows(method::PRETRAIN_LOW_LEVEL, seed, recs));
                }
            }
        }
        if self.cfg.distill.enabled {
            let distilled: Vec<DistillRow> = read_jsonl(&self.layout.metrics("distill"))?;
            for &seed in &self.cfg.seeds {
                if distilled.iter().filter(|r| r.run_seed == seed).all(|r| r.kept == 0) {
                    warn!("seed {seed}: no distilled policy to evaluate");
                    continue;
                }
                let high = self.load(seed, method::DISTILLED, "high")?;
                let low = self.load(seed, method::DISTILLED, "low")?;
                let recs = self.eval_all(Controller::Hierarchical { high: &high, low: &low })?;
                rows.extend(self.eval_rows(method::DISTILLED, seed, recs));
            }
        }
        write_jsonl(&self.layout.metrics("eval"), &rows)
    }

    /// Window ablation at the imitation stage and reward ablation at the
    /// fine-tuning stage.
    ///
    /// Each low window retrains both levels, since the high level's subgoal
    /// labels are clipped to the low window; the main window reuses the
    /// imitation policies. A reward ablation run identical to a main
    /// fine-tuning run reuses its policies and statistics.
    pub fn ablate(&self) -> Result<()> {
        let pool = self.pool()?;
        let a = &self.cfg.ablation;
        let mut rows = Vec::new();
        let mut ft_rows = Vec::new();
        let ablation_row = |ablation: &str, setting: String, seed: u64, record: EpisodeRecord| AblationRow {
            ablation: ablation.into(),
            label: self.goals[record.goal].label(),
            setting,
            run_seed: seed,
            record,
        };
        for &w in &a.windows {
            let relabel = RelabelConfig {
                low_window: w,
                ..self.cfg.relabel.clone()
            };
            // both levels depend on W_l: the high level's subgoal labels are clipped to it
            let data = (w != self.cfg.relabel.low_window)
                .then(|| Ok::<_, Error>((relabel_low(&pool, &relabel)?, relabel_high(&pool, &relabel)?)))
                .transpose()?;
            for &seed in &self.cfg.seeds {
                info!("seed {seed}: low window {w}");
                let (high, low) = match &data {
                    Some((d_low, d_high)) => {
                        let (high, low, _) = train_ril(d_low, d_high, &self.il_config(seed))?;
                        (high, low)
                    }
                    None => (
                        self.load(seed, IL_GROUP, "ril_high")?,
                        self.load(seed, IL_GROUP, "ril_low")?,
                    ),
                };
                let recs = self.eval_all(Controller::Hierarchical { high: &high, low: &low })?;
                rows.extend(recs.into_iter().map(|r| ablation_row("window", w.to_string(), seed, r)));
            }
        }
        if !a.rewards.is_empty() && a.goals > 0 {
            let d_low = self.dataset("ril_low", &pool)?;
            let d_high = self.dataset("ril_high", &pool)?;
            let main_kind = self.cfg.finetune.reward.kind;
            let main_rows: Vec<FinetuneRow> =
                if a.rewards.contains(&main_kind) && self.cfg.variants.contains(&a.variant) {
                    read_jsonl(&self.layout.metrics("finetune"))?
                } else {
                    Vec::new()
                };
            for &kind in &a.rewards {
                let name = format!("reward-{}", kind.label());
                let reuse = kind == main_kind && self.cfg.variants.contains(&a.variant);
                for &seed in &self.cfg.seeds {
                    let high = self.load(seed, IL_GROUP, "ril_high")?;
                    let low = self.load(seed, IL_GROUP, "ril_low")?;
                    for g in 0..a.goals {
                        let group = if reuse {
                            a.variant.label().to_string()
                        } else {
                            name.clone()
                        };
                        if reuse {
                            ft_rows.extend(
                                main_rows
                                    .iter()
                                    .filter(|r| r.method == a.variant.label() && r.run_seed == seed && r.goal == g)
                                    .map(|r| FinetuneRow {
                                        method: name.clone(),
                                        ..r.clone()
                                    }),
                            );
                        } else {
                            info!("seed {seed}, goal {}: {name}", self.goals[g].label());
                            let cfg = FinetuneConfig {
                                reward: RewardConfig {
                                    kind,
                                    ..self.cfg.finetune.reward.clone()
                                },
                                ..self.finetune_config(seed, g, a.variant, Mode::Relay)
                            };
                            let stats = self.finetune_relay(&group, seed, g, (&high, &low), (&d_low, &d_high), &cfg)?;
                            ft_rows.extend(self.finetune_rows(&name, seed, g, stats));
                        }
                        let f_high = self.load(seed, &group, &goal_file(g, "high"))?;
                        let f_low = self.load(seed, &group, &goal_file(g, "low"))?;
                        let recs = self.eval_one(
                            g,
                            Controller::Hierarchical {
                                high: &f_high,
                                low: &f_low,
                            },
                        )?;
                        rows.extend(
                            recs.into_iter()
                                .map(|r| ablation_row("reward", kind.label().to_string(), seed, r)),
                        );
                    }
                }
            }
        }
        write_jsonl(&self.layout.metrics("ablation"), &rows)?;
        write_jsonl(&self.layout.metrics("ablation_finetune"), &ft_rows)
    }

    /// Aggregate the metric records and write the report files.
    pub fn report(&self) -> Result<BenchmarkReport> {
        let report = report::build(&self.layout)?;
        report::write(&self.layout, &report)?;
        Ok(report)
    }

    /// Recompute the report from the metric records and check that the
    /// stored report files match byte for byte.
    pub fn verify(&self) -> Result<BenchmarkReport> {
        require(&self.layout.report_dir())?;
        let report = report::build(&self.layout)?;
        report::verify(&self.layout, &report)?;
        Ok(report)
    }
}
