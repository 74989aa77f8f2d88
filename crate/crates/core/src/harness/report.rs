//! Aggregation of metric records into tables, series and a JSON summary.
//!
//! Every number in the report is recomputed from the per-episode and
//! per-iteration records under `metrics/`, so `verify` can rebuild the
//! report and compare it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{create_parent, read_jsonl, AblationRow, EvalRow, FinetuneRow, ImitationRow, Layout};
use super::pipeline::method;
use crate::error::{Error, Result};

/// Mean and sample standard deviation over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Zero when there is a single seed.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalStat {
    pub goal: usize,
    pub label: String,
    pub success: Stat,
    pub completion: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodStat {
    pub method: String,
    /// `imitation`, `finetuned` or `distilled`.
    pub stage: String,
    pub seeds: Vec<u64>,
    pub success: Stat,
    pub completion: Stat,
    pub goals: Vec<GoalStat>,
}

impl MethodStat {
    pub fn goal(&self, goal: usize) -> Option<&GoalStat> {
        self.goals.iter().find(|g| g.goal == goal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingStat {
    pub ablation: String,
    pub setting: String,
    pub seeds: Vec<u64>,
    pub success: Stat,
    pub completion: Stat,
}

/// A plotted series; rows are `(x, y, std)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub methods: Vec<MethodStat>,
    pub ablations: Vec<SettingStat>,
    pub series: Vec<Series>,
}

impl BenchmarkReport {
    pub fn method(&self, name: &str) -> Option<&MethodStat> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn setting(&self, ablation: &str, setting: &str) -> Option<&SettingStat> {
        self.ablations
            .iter()
            .find(|s| s.ablation == ablation && s.setting == setting)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

fn stage_of(method: &str) -> &'static str {
    match method {
        method::RIL | method::GCBC | method::BC | method::ORACLE | method::NEAREST_NEIGHBOR => "imitation",
        method::DISTILLED => "distilled",
        _ => "finetuned",
    }
}

/// Keys in order of first appearance.
fn ordered<'a, T, K: PartialEq + Clone>(rows: &'a [T], key: impl Fn(&T) -> K) -> Vec<K> {
    let mut out: Vec<K> = Vec::new();
    for r in rows {
        let k = key(r);
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Per-seed success rate and mean completion, then statistics over seeds.
fn seed_stats<'a>(episodes: impl Iterator<Item = (u64, bool, usize)>) -> (Vec<u64>, Stat, Stat) {
    let mut per_seed: Vec<(u64, usize, usize, usize)> = Vec::new();
    for (seed, success, completion) in episodes {
        let pos = match per_seed.iter().position(|p| p.0 == seed) {
            Some(p) => p,
            None => {
                per_seed.push((seed, 0, 0, 0));
                per_seed.len() - 1
            }
        };
        let e = &mut per_seed[pos];
        e.1 += 1;
        e.2 += usize::from(success);
        e.3 += completion;
    }
    let success: Vec<f64> = per_seed.iter().map(|e| e.2 as f64 / e.1 as f64).collect();
    let completion: Vec<f64> = per_seed.iter().map(|e| e.3 as f64 / e.1 as f64).collect();
    (
        per_seed.iter().map(|e| e.0).collect(),
        Stat::of(&success),
        Stat::of(&completion),
    )
}

fn method_stats(rows: &[EvalRow]) -> Vec<MethodStat> {
    ordered(rows, |r| r.method.clone())
        .into_iter()
        .map(|m| {
            let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.method == m).collect();
            let (seeds, success, completion) =
                seed_stats(mine.iter().map(|r| (r.run_seed, r.record.success, r.record.completion)));
            let mut goal_ids: Vec<usize> = ordered(&mine, |r| r.record.goal);
            goal_ids.sort_unstable();
            let goals = goal_ids
                .into_iter()
                .map(|g| {
                    let of_goal: Vec<&&EvalRow> = mine.iter().filter(|r| r.record.goal == g).collect();
                    let (_, success, completion) = seed_stats(
                        of_goal
                            .iter()
                            .map(|r| (r.run_seed, r.record.success, r.record.completion)),
                    );
                    GoalStat {
                        goal: g,
                        label: of_goal[0].label.clone(),
                        success,
                        completion,
                    }
                })
                .collect();
            MethodStat {
                stage: stage_of(&m).into(),
                method: m,
                seeds,
                success,
                completion,
                goals,
            }
        })
        .collect()
}

fn setting_stats(rows: &[AblationRow]) -> Vec<SettingStat> {
    ordered(rows, |r| (r.ablation.clone(), r.setting.clone()))
        .into_iter()
        .map(|(ablation, setting)| {
            let (seeds, success, completion) = seed_stats(
                rows.iter()
                    .filter(|r| r.ablation == ablation && r.setting == setting)
                    .map(|r| (r.run_seed, r.record.success, r.record.completion)),
            );
            SettingStat {
                ablation,
                setting,
                seeds,
                success,
                completion,
            }
        })
        .collect()
}

/// Mean over goals per (seed, x), then mean and std over seeds per x.
fn curve(name: String, points: impl Iterator<Item = (u64, f64, f64)>) -> Series {
    let mut by_x: BTreeMap<u64, (f64, BTreeMap<u64, Vec<f64>>)> = BTreeMap::new();
    for (seed, x, y) in points {
        let entry = by_x.entry(x.to_bits()).or_insert_with(|| (x, BTreeMap::new()));
        entry.1.entry(seed).or_default().push(y);
    }
    let mut rows: Vec<[f64; 3]> = by_x
        .into_values()
        .map(|(x, seeds)| {
            let means: Vec<f64> = seeds.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let s = Stat::of(&means);
            [x, s.mean, s.std]
        })
        .collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Series { name, points: rows }
}

fn finetune_series(rows: &[FinetuneRow]) -> Vec<Series> {
    let mut out = Vec::new();
    for m in ordered(rows, |r| r.method.clone()) {
        let mine: Vec<&FinetuneRow> = rows.iter().filter(|r| r.method == m).collect();
        out.push(curve(
            format!("finetune_{m}_success"),
            mine.iter()
                .map(|r| (r.run_seed, r.stats.iteration as f64, r.stats.success_rate)),
        ));
        out.push(curve(
            format!("finetune_{m}_completion"),
            mine.iter()
                .map(|r| (r.run_seed, r.stats.iteration as f64, r.stats.mean_completion)),
        ));
        // cumulative environment steps spent on one goal
        out.push(curve(
            format!("finetune_{m}_success_by_env_steps"),
            mine.iter().map(|r| {
                let steps = (r.stats.iteration + 1) * r.stats.env_steps;
                (r.run_seed, steps as f64, r.stats.success_rate)
            }),
        ));
    }
    out
}

fn imitation_series(rows: &[ImitationRow]) -> Vec<Series> {
    ordered(rows, |r| (r.method.clone(), r.epoch.level.clone()))
        .into_iter()
        .map(|(m, level)| {
            curve(
                format!("imitation_{m}_{level}_nll"),
                rows.iter()
                    .filter(|r| r.method == m && r.epoch.level == level)
                    .map(|r| (r.run_seed, r.epoch.epoch as f64, r.epoch.nll)),
            )
        })
        .collect()
}

fn window_series(settings: &[SettingStat]) -> Vec<Series> {
    let windows: Vec<(f64, &SettingStat)> = settings
        .iter()
        .filter(|s| s.ablation == "window")
        .filter_map(|s| s.setting.parse::<f64>().ok().map(|w| (w, s)))
        .collect();
    if windows.is_empty() {
        return Vec::new();
    }
    let make = |name: &str, pick: fn(&SettingStat) -> &Stat| {
        let mut points: Vec<[f64; 3]> = windows.iter().map(|(w, s)| [*w, pick(s).mean, pick(s).std]).collect();
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        Series {
            name: name.into(),
            points,
        }
    };
    vec![
        make("ablation_window_completion", |s| &s.completion),
        make("ablation_window_success", |s| &s.success),
    ]
}

fn optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if path.exists() {
        read_jsonl(path)
    } else {
        Ok(Vec::new())
    }
}

/// Build the report from the records of a run. Evaluation records are
/// required; the other record files are used when present.
pub fn build(layout: &Layout) -> Result<BenchmarkReport> {
    let eval: Vec<EvalRow> = read_jsonl(&layout.metrics("eval"))?;
    let ablation: Vec<AblationRow> = optional(&layout.metrics("ablation"))?;
    let finetune: Vec<FinetuneRow> = optional(&layout.metrics("finetune"))?;
    let ablation_ft: Vec<FinetuneRow> = optional(&layout.metrics("ablation_finetune"))?;
    let imitation: Vec<ImitationRow> = optional(&layout.metrics("imitation"))?;
    let ablations = setting_stats(&ablation);
    let mut series = imitation_series(&imitation);
    series.extend(finetune_series(&finetune));
    series.extend(finetune_series(&ablation_ft));
    series.extend(window_series(&ablations));
    Ok(BenchmarkReport {
        methods: method_stats(&eval),
        ablations,
        series,
    })
}

fn pm(s: &Stat, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, s.mean, digits, s.std)
}

/// Plain-text tables of the report.
pub fn render_tables(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Success rate and step completion (mean ± std over seeds)\n");
    let _ = writeln!(
        out,
        "{:<22} {:<10} {:>5}  {:<16} {:<14}",
        "method", "stage", "seeds", "success", "completion"
    );
    for m in &report.methods {
        let _ = writeln!(
            out,
            "{:<22} {:<10} {:>5}  {:<16} {:<14}",
            m.method,
            m.stage,
            m.seeds.len(),
            pm(&m.success, 3),
            pm(&m.completion, 2)
        );
    }

    let mut goals: Vec<(usize, String)> = report
        .methods
        .iter()
        .flat_map(|m| m.goals.iter().map(|g| (g.goal, g.label.clone())))
        .collect();
    goals.sort();
    goals.dedup();
    if !goals.is_empty() {
        let _ = writeln!(out, "\nPer-goal success rate (mean over seeds)\n");
        let _ = write!(out, "{:<5} {:<8}", "goal", "elements");
        for m in &report.methods {
            let _ = write!(out, " {:>10}", truncate(&m.method, 10));
        }
        let _ = writeln!(out);
        for (g, label) in &goals {
            let _ = write!(out, "{g:<5} {label:<8}");
            for m in &report.methods {
                match m.goal(*g) {
                    Some(s) => {
                        let _ = write!(out, " {:>10.3}", s.success.mean);
                    }
                    None => {
                        let _ = write!(out, " {:>10}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
    }

    if !report.ablations.is_empty() {
        let _ = writeln!(out, "\nAblations (mean ± std over seeds)\n");
        let _ = writeln!(
            out,
            "{:<8} {:<20} {:>5}  {:<16} {:<14}",
            "ablation", "setting", "seeds", "success", "completion"
        );
        for s in &report.ablations {
            let _ = writeln!(
                out,
                "{:<8} {:<20} {:>5}  {:<16} {:<14}",
                s.ablation,
                s.setting,
                s.seeds.len(),
                pm(&s.success, 3),
                pm(&s.completion, 2)
            );
        }
    }
    out
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

pub fn render_series(series: &Series) -> String {
    let mut out = String::from("x,y,std\n");
    for [x, y, s] in &series.points {
        let _ = writeln!(out, "{x},{y},{s}");
    }
    out
}

/// Every report file as `(path relative to the report directory, contents)`.
pub fn render(report: &BenchmarkReport) -> Result<Vec<(PathBuf, String)>> {
    let mut files = vec![
        (
            PathBuf::from("report.json"),
            serde_json::to_string_pretty(report)? + "\n",
        ),
        (PathBuf::from("tables.txt"), render_tables(report)),
    ];
    for s in &report.series {
        files.push((
            PathBuf::from("series").join(format!("{}.csv", s.name)),
            render_series(s),
        ));
    }
    Ok(files)
}

pub fn write(layout: &Layout, report: &BenchmarkReport) -> Result<()> {
    let dir = layout.report_dir();
    for (rel, text) in render(report)? {
        let path = dir.join(rel);
        create_parent(&path)?;
        std::fs::write(&path, text)?;
    }
    Ok(())
}

/// Check that the stored report files equal a fresh rendering of `report`.
pub fn verify(layout: &Layout, report: &BenchmarkReport) -> Result<()> {
    let dir = layout.report_dir();
    for (rel, text) in render(report)? {
        let path = dir.join(&rel);
        let stored = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
            _ => Error::Io(e),
        })?;
        if stored != text {
            return Err(Error::format(
                "report",
                format!("{} does not match the metric records", rel.display()),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imitation::EpisodeRecord;

    fn row(method: &str, seed: u64, goal: usize, success: bool, completion: usize) -> EvalRow {
        EvalRow {
            method: method.into(),
            run_seed: seed,
            label: format!("g{goal}"),
            record: EpisodeRecord {
                goal,
                episode: 0,
                seed: 0,
                completion,
                success,
            },
        }
    }

    #[test]
    fn stats_average_within_seed_then_across_seeds() {
        let rows = vec![
            row("ril", 0, 0, true, 4),
            row("ril", 0, 1, false, 2),
            row("ril", 1, 0, false, 1),
            row("ril", 1, 1, false, 1),
            row("bc", 0, 0, false, 0),
        ];
        let stats = method_stats(&rows);
        assert_eq!(stats.len(), 2);
        let ril = &stats[0];
        assert_eq!(ril.seeds, vec![0, 1]);
        assert_eq!(ril.success.mean, 0.25);
        assert!((ril.success.std - (0.125f64).sqrt()).abs() < 1e-15);
        assert_eq!(ril.completion.mean, 2.0);
        assert_eq!(ril.goal(0).unwrap().success.mean, 0.5);
        assert_eq!(stats[1].success.std, 0.0);
        assert_eq!(stats[1].stage, "imitation");
    }

    #[test]
    fn curves_sort_by_x() {
        let s = curve(
            "c".into(),
            [(0, 2.0, 1.0), (0, 1.0, 0.0), (1, 1.0, 1.0), (0, 1.0, 1.0)].into_iter(),
        );
        assert_eq!(s.points, vec![[1.0, 0.75, (0.125f64).sqrt()], [2.0, 1.0, 0.0]]);
        assert_eq!(
            render_series(&s),
            format!("x,y,std\n1,0.75,{}\n2,1,0\n", (0.125f64).sqrt())
        );
    }
}
