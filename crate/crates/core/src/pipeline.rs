//! Whole-part workflows shared by the command line and the acceptance suite:
//! teaching a bank from a corpus, generating a program in teacher or network
//! mode, and verifying the network against the teacher.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::dnc::{ReceiveReport, SendReport};
use crate::neural::{self, build_training_set, hausdorff, teach_set, Bank, BankEntry, NeuralError, TeachReport, Verdict};
use crate::nc::{emit_program, NcProgram};
use crate::part_model::{load_part, PartError, PartModel, Tool};
use crate::planner::{plan_part, Operation, PlanError};
use crate::recognition::{FeatureModel, OperationClass, RecognitionError};
use crate::sim::{compare_heightfields, expected_heightfield, DeviationMetrics, HeightField, SimReport, Simulator};

/// Sampling step for Hausdorff distances between cutting paths, mm.
pub const HAUSDORFF_STEP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Part(#[from] PartError),
    #[error("{}: {source}", path.display())]
    PartFile {
        path: PathBuf,
        #[source]
        source: PartError,
    },
    #[error("{0}: cannot read corpus directory")]
    Corpus(String),
    #[error("part has no material for its stock")]
    NoMaterial,
    #[error(transparent)]
    Recognition(#[from] RecognitionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("nn mode needs a network bank")]
    NoBank,
    #[error("simulation: {0}")]
    Sim(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Teacher,
    Nn,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Teacher => "teacher",
            Mode::Nn => "nn",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "teacher" => Ok(Mode::Teacher),
            "nn" => Ok(Mode::Nn),
            _ => Err(format!("unknown mode `{s}` (teacher or nn)")),
        }
    }
}

/// Every `*.json` part in `dir`, in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<(PathBuf, PartModel)>, PipelineError> {
    let rd = std::fs::read_dir(dir).map_err(|_| PipelineError::Corpus(dir.display().to_string()))?;
    let mut paths: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| match load_part(&p) {
            Ok(m) => Ok((p, m)),
            Err(source) => Err(PipelineError::PartFile { path: p, source }),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ClassOutcome {
    pub class: OperationClass,
    pub pairs: usize,
    pub report: Option<TeachReport>,
    /// Why the class could not be taught at all, e.g. too few pairs.
    pub error: Option<String>,
}

impl ClassOutcome {
    pub fn succeeded(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.verdict == Verdict::Success)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TeachRunReport {
    pub config: Config,
    pub corpus_parts: usize,
    pub classes: Vec<ClassOutcome>,
    pub verdict: Verdict,
}

fn teach_class(corpus: &[PartModel], class: OperationClass, cfg: &Config) -> (ClassOutcome, Option<BankEntry>) {
    let settings = cfg.plan_settings();
    let ts = match build_training_set(corpus, class, &settings, cfg.criteria, &cfg.encoding) {
        Ok(ts) => ts,
        Err(e) => {
            let out = ClassOutcome {
                class,
                pairs: 0,
                report: None,
                error: Some(e.to_string()),
            };
            return (out, None);
        }
    };
    let pairs = ts.pairs.len();
    match teach_set(&ts, &cfg.teach_config(), &cfg.encoding) {
        Ok((network, report)) => (
            ClassOutcome {
                class,
                pairs,
                report: Some(report.clone()),
                error: None,
            },
            Some(BankEntry { network, report }),
        ),
        Err(NeuralError::TeachingFailed(report)) => (
            ClassOutcome {
                class,
                pairs,
                report: Some(*report),
                error: None,
            },
            None,
        ),
        Err(e) => (
            ClassOutcome {
                class,
                pairs,
                report: None,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

/// Teaches each class on its own thread. The bank holds the classes that
/// reached success; the report covers all of them, in class order.
pub fn teach_bank(corpus: &[PartModel], classes: &[OperationClass], cfg: &Config) -> (Bank, TeachRunReport) {
    let mut classes = classes.to_vec();
    classes.sort();
    classes.dedup();
    let results: Vec<(ClassOutcome, Option<BankEntry>)> = std::thread::scope(|s| {
        let handles: Vec<_> = classes
            .iter()
            .map(|&c| s.spawn(move || teach_class(corpus, c, cfg)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("teaching thread")).collect()
    });
    let mut bank = Bank::new(cfg.encoding.clone());
    let mut outcomes = Vec::new();
    for (outcome, entry) in results {
        if let Some(e) = entry {
            bank.networks.insert(outcome.class, e);
        }
        outcomes.push(outcome);
    }
    let verdict = if outcomes.iter().all(ClassOutcome::succeeded) {
        Verdict::Success
    } else {
        Verdict::Failure
    };
    let report = TeachRunReport {
        config: cfg.clone(),
        corpus_parts: corpus.len(),
        classes: outcomes,
        verdict,
    };
    (bank, report)
}

/// Plans a part with the teacher or with the bank.
pub fn plan_operations(
    part: &PartModel,
    mode: Mode,
    bank: Option<&Bank>,
    cfg: &Config,
) -> Result<Vec<Operation>, PipelineError> {
    let fm = FeatureModel::from_part(part)?;
    let material = part.material().ok_or(PipelineError::NoMaterial)?;
    let settings = cfg.plan_settings();
    Ok(match mode {
        Mode::Teacher => plan_part(&fm, &part.tools, material, cfg.criteria, &settings)?,
        Mode::Nn => {
            let bank = bank.ok_or(PipelineError::NoBank)?;
            neural::generate(bank, &fm, &part.tools, material, cfg.criteria, &settings)?
        }
    })
}

pub fn generate_program(
    part: &PartModel,
    mode: Mode,
    bank: Option<&Bank>,
    cfg: &Config,
) -> Result<NcProgram, PipelineError> {
    Ok(emit_program(&plan_operations(part, mode, bank, cfg)?))
}

/// Largest radius among the tools a run used: cells closer than this to a
/// wall are left out of height-field comparisons.
pub fn tool_band(tools: &[Tool], used: &[u32]) -> f64 {
    tools
        .iter()
        .filter(|t| used.contains(&t.id))
        .map(Tool::radius)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ModeResult {
    pub blocks: usize,
    pub sim: SimReport,
    pub band: f64,
    pub deviation: DeviationMetrics,
}

/// Simulates a program on the part's stock and compares the result with the
/// shape its features describe.
pub fn simulate_part(
    part: &PartModel,
    program: &NcProgram,
    cfg: &Config,
    trace: Option<&mut dyn std::io::Write>,
) -> Result<(HeightField, ModeResult), PipelineError> {
    let fm = FeatureModel::from_part(part)?;
    let (hf, sim) = Simulator::new(&cfg.sim, &part.tools)
        .run(program, &fm.stock, trace)
        .map_err(|e| PipelineError::Sim(e.to_string()))?;
    let band = tool_band(&part.tools, &sim.tools_used);
    let deviation = compare_heightfields(&hf, &expected_heightfield(&fm, cfg.sim.cell_size), band)
        .map_err(|e| PipelineError::Sim(e.to_string()))?;
    let r = ModeResult {
        blocks: program.blocks.len(),
        sim,
        band,
        deviation,
    };
    Ok((hf, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OperationDistance {
    pub feature_id: String,
    pub class: OperationClass,
    /// Symmetric Hausdorff distance between the two cutting paths, mm.
    pub hausdorff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VerifyReport {
    pub part: String,
    pub config: Config,
    pub operations: Vec<OperationDistance>,
    pub hausdorff_max: f64,
    pub hausdorff_limit: f64,
    pub teacher: ModeResult,
    pub nn: ModeResult,
    /// Every threshold that was missed.
    pub failures: Vec<String>,
    pub verdict: Outcome,
}

/// Generates both modes, compares their cutting paths operation by
/// operation, and simulates both programs.
pub fn verify_part(part: &PartModel, name: &str, bank: &Bank, cfg: &Config) -> Result<VerifyReport, PipelineError> {
    let teacher_ops = plan_operations(part, Mode::Teacher, None, cfg)?;
    let nn_ops = plan_operations(part, Mode::Nn, Some(bank), cfg)?;
    let tol = cfg.encoding.chord_tol;
    let by_key: BTreeMap<(&str, OperationClass), &Operation> =
        nn_ops.iter().map(|o| ((o.feature_id.as_str(), o.class), o)).collect();
    let mut operations = Vec::new();
    let mut failures = Vec::new();
    for t in &teacher_ops {
        let Some(n) = by_key.get(&(t.feature_id.as_str(), t.class)) else {
            failures.push(format!("{} {}: no nn operation", t.feature_id, t.class));
            continue;
        };
        operations.push(OperationDistance {
            feature_id: t.feature_id.clone(),
            class: t.class,
            hausdorff: hausdorff(
                &t.toolpath.cutting_polyline(tol),
                &n.toolpath.cutting_polyline(tol),
                HAUSDORFF_STEP,
            ),
        });
    }
    let hausdorff_max = operations.iter().map(|o| o.hausdorff).fold(0.0, f64::max);
    let hausdorff_limit = cfg.verify.hausdorff_fraction * part.stock.diagonal();
    let (_, teacher) = simulate_part(part, &emit_program(&teacher_ops), cfg, None)?;
    let (_, nn) = simulate_part(part, &emit_program(&nn_ops), cfg, None)?;
    if hausdorff_max > hausdorff_limit {
        failures.push(format!("hausdorff {hausdorff_max:.4} > {hausdorff_limit:.4}"));
    }
    if nn.deviation.max_dev > cfg.verify.max_dev {
        failures.push(format!("nn max_dev {:.4} > {:.4}", nn.deviation.max_dev, cfg.verify.max_dev));
    }
    let verdict = if failures.is_empty() { Outcome::Pass } else { Outcome::Fail };
    Ok(VerifyReport {
        part: name.to_string(),
        config: cfg.clone(),
        operations,
        hausdorff_max,
        hausdorff_limit,
        teacher,
        nn,
        failures,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateReport {
    pub program: String,
    pub config: Config,
    pub sim: SimReport,
    /// Present when the stock file is a full part, so its target shape is
    /// known.
    pub deviation: Option<DeviationMetrics>,
    pub band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TransferReport {
    pub config: Config,
    pub file: String,
    pub sent: Option<SendReport>,
    pub received: Option<ReceiveReport>,
}

/// JSON schemas of the files the command line writes, keyed by file stem.
pub fn report_schemas() -> Vec<(&'static str, serde_json::Value)> {
    let v = |s: schemars::Schema| s.to_value();
    vec![
        ("bank", v(schemars::schema_for!(Bank))),
        ("config", v(schemars::schema_for!(Config))),
        ("simulate_report", v(schemars::schema_for!(SimulateReport))),
        ("teach_report", v(schemars::schema_for!(TeachRunReport))),
        ("transfer_report", v(schemars::schema_for!(TransferReport))),
        ("verify_report", v(schemars::schema_for!(VerifyReport))),
    ]
}
