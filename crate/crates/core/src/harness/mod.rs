//! Benchmark harness: run configuration, the staged pipeline, baselines,
//! distillation and reporting.

mod artifacts;
mod baselines;
mod config;
mod distill;
mod pipeline;
pub mod report;

pub use artifacts::{
    read_jsonl, require, write_jsonl, AblationRow, DistillRow, EvalRow, FinetuneRow, ImitationRow, Layout,
};
pub use baselines::{nearest_demo, nearest_neighbor_policy};
pub use config::{
    AblationConfig, BaselineConfig, DemoConfig, DistillConfig, GoalsConfig, RunConfig, FULL_SCALE_HIDDEN,
};
pub use distill::{distill, successful_rollouts, Distilled, Teacher};
pub use pipeline::{method, Pipeline, STAGES};
pub use report::BenchmarkReport;
