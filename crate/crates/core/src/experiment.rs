//! Experiment orchestration: instances, algorithm runs, sweeps and CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{brute_force, kmeans_bs_centric, kmeans_ue_centric, EnumerationBudget, Objective};
use crate::capacity::{evaluate, sumcut, CapacityReport, DEFAULT_MC_SAMPLES};
use crate::error::{Error, Result};
use crate::netmodel::{BipartiteGraph, ChannelModel, NetworkLayout, PathGainMatrix};
use crate::partition::{optimal_m, Decomposition};
use crate::rng::{derive_seed, Stream};
use crate::solver_bisect::bc2f_net;
use crate::solver_bnb::{solve_p4, SolveReport, SolverConfig};

/// Env var that sets the worker count of sweeps.
pub const WORKERS_ENV: &str = "CFNET_WORKERS";

/// Exact header of the per-row CSV.
pub const CSV_HEADER: &str =
    "seed,instance,algo,K,L,Kmax,M,status,objective_sumcut,cap_approx,cap_lb,cap_mc,cap_mc_se,nodes,runtime_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "bnb")]
    Bnb,
    #[serde(rename = "bc2f")]
    Bc2f,
    #[serde(rename = "brute")]
    Brute,
    #[serde(rename = "kmeans-ue")]
    KmeansUe,
    #[serde(rename = "kmeans-bs")]
    KmeansBs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Bnb, Algorithm::Bc2f, Algorithm::Brute, Algorithm::KmeansUe, Algorithm::KmeansBs];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Bnb => "bnb",
            Algorithm::Bc2f => "bc2f",
            Algorithm::Brute => "brute",
            Algorithm::KmeansUe => "kmeans-ue",
            Algorithm::KmeansBs => "kmeans-bs",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }
}

fn default_realizations() -> usize {
    200
}
fn default_alpha() -> f64 {
    4.0
}
fn default_snr_db() -> f64 {
    10.0
}
fn default_area_side() -> f64 {
    1.0
}
fn default_d_min() -> f64 {
    ChannelModel::DEFAULT_D_MIN
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Bnb, Algorithm::Bc2f]
}
fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}
fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}
fn default_true() -> bool {
    true
}
fn default_brute_budget() -> u128 {
    EnumerationBudget::default().max_assignments
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k_list: Vec<usize>,
    pub l_list: Vec<usize>,
    pub k_max_list: Vec<usize>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_snr_db")]
    pub p_over_n0_db: f64,
    #[serde(default = "default_area_side")]
    pub area_side: f64,
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Fading samples per capacity estimate; zero skips the estimate.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_output")]
    pub output_path: PathBuf,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_brute_budget")]
    pub brute_budget: u128,
    /// Record solver wall time. Turning it off leaves `runtime_ms` empty so
    /// that reruns produce identical files.
    #[serde(default = "default_true")]
    pub timing: bool,
}

impl ExperimentConfig {
    /// A config with the given axes and defaults elsewhere.
    pub fn new(k_list: Vec<usize>, l_list: Vec<usize>, k_max_list: Vec<usize>) -> Self {
        ExperimentConfig {
            k_list,
            l_list,
            k_max_list,
            realizations: default_realizations(),
            alpha: default_alpha(),
            p_over_n0_db: default_snr_db(),
            area_side: default_area_side(),
            d_min: default_d_min(),
            algorithms: default_algorithms(),
            mc_samples: default_mc_samples(),
            base_seed: 0,
            output_path: default_output(),
            solver: SolverConfig::default(),
            brute_budget: default_brute_budget(),
            timing: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn check(&self) -> Result<()> {
        if self.k_list.is_empty() || self.l_list.is_empty() || self.k_max_list.is_empty() {
            return Err(Error::invalid("sweep axes must be non-empty"));
        }
        if self.k_list.iter().chain(&self.l_list).chain(&self.k_max_list).any(|&v| v == 0) {
            return Err(Error::invalid("sweep axis values must be positive"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithm selected"));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(Error::invalid("area_side must be positive"));
        }
        self.channel()?;
        self.solver.check()
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        ChannelModel::from_snr_db(self.alpha, self.p_over_n0_db, self.d_min)
    }

    /// Instance descriptors in sweep order.
    pub fn instances(&self) -> Vec<InstanceSpec> {
        let mut out = Vec::new();
        for &k in &self.k_list {
            for &l in &self.l_list {
                for &k_max in &self.k_max_list {
                    for _ in 0..self.realizations {
                        let index = out.len() as u64;
                        let seed = derive_seed(self.base_seed, Stream::Instance, &[index]);
                        out.push(InstanceSpec { index, seed, k, l, k_max });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub index: u64,
    /// Layout seed, derived from the base seed and the index.
    pub seed: u64,
    pub k: usize,
    pub l: usize,
    pub k_max: usize,
}

/// A generated network ready for the algorithms.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub layout: NetworkLayout,
    pub channel: ChannelModel,
    pub gains: PathGainMatrix,
    pub graph: BipartiteGraph,
}

impl Instance {
    pub fn generate(cfg: &ExperimentConfig, spec: InstanceSpec) -> Result<Self> {
        let layout = NetworkLayout::generate(spec.seed, spec.k, spec.l, cfg.area_side)?;
        Self::from_layout(cfg, spec, layout)
    }

    pub fn from_layout(cfg: &ExperimentConfig, spec: InstanceSpec, layout: NetworkLayout) -> Result<Self> {
        let channel = cfg.channel()?;
        let gains = PathGainMatrix::compute(&layout, &channel);
        let graph = BipartiteGraph::build(&gains);
        Ok(Instance { spec, layout, channel, gains, graph })
    }
}

/// Result of one algorithm on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub algorithm: Algorithm,
    pub decomposition: Decomposition,
    pub status: String,
    pub objective_sumcut: f64,
    pub nodes: Option<u64>,
    /// Seconds spent in the algorithm itself.
    pub runtime: f64,
    pub capacity: CapacityReport,
    /// Full solver report for the tree-search algorithms.
    pub solve: Option<SolveReport>,
}

/// Runs one algorithm on one instance and evaluates the capacities.
pub fn run_decompose(cfg: &ExperimentConfig, instance: &Instance, algorithm: Algorithm) -> Result<Outcome> {
    let spec = &instance.spec;
    let solver = SolverConfig { seed: derive_seed(cfg.base_seed, Stream::Solver, &[spec.index]), ..cfg.solver.clone() };
    let baseline_seed = derive_seed(cfg.base_seed, Stream::Baseline, &[spec.index]);
    let start = Instant::now();
    let (decomposition, status, nodes, solve) = match algorithm {
        Algorithm::Bnb | Algorithm::Bc2f => {
            let report = if algorithm == Algorithm::Bnb {
                solve_p4(&instance.graph, spec.k_max, &solver)?
            } else {
                bc2f_net(&instance.graph, spec.k_max, &solver)?
            };
            (report.decomposition.clone(), report.status.to_string(), Some(report.nodes_explored), Some(report))
        }
        Algorithm::Brute => {
            let m = optimal_m(spec.k, spec.k_max)?;
            let budget = EnumerationBudget { max_assignments: cfg.brute_budget };
            let r = brute_force(&instance.gains, &instance.channel, spec.k_max, m, Objective::ApproxCapacity, budget)?;
            (r.decomposition, "optimal".to_string(), Some(r.evaluated), None)
        }
        Algorithm::KmeansUe => {
            (kmeans_ue_centric(&instance.layout, spec.k_max, baseline_seed)?, "heuristic".to_string(), None, None)
        }
        Algorithm::KmeansBs => (
            kmeans_bs_centric(&instance.layout, &instance.gains, spec.k_max, baseline_seed)?,
            "heuristic".to_string(),
            None,
            None,
        ),
    };
    let runtime = start.elapsed().as_secs_f64();
    let violations = decomposition.validate(spec.k_max);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidDecomposition(text.join("; ")));
    }
    let fading_seed = derive_seed(cfg.base_seed, Stream::Fading, &[spec.index]);
    let capacity = evaluate(&instance.gains, &instance.channel, &decomposition, cfg.mc_samples, fading_seed)?;
    let objective_sumcut = sumcut(&instance.graph, &decomposition)?;
    Ok(Outcome { algorithm, decomposition, status, objective_sumcut, nodes, runtime, capacity, solve })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub instance: u64,
    pub algo: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Kmax")]
    pub k_max: usize,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub status: String,
    pub objective_sumcut: Option<f64>,
    pub cap_approx: Option<f64>,
    pub cap_lb: Option<f64>,
    pub cap_mc: Option<f64>,
    pub cap_mc_se: Option<f64>,
    pub nodes: Option<u64>,
    pub runtime_ms: Option<f64>,
}

impl ResultRow {
    /// Rows whose status marks a failed run.
    pub fn is_error(&self) -> bool {
        matches!(self.status.as_str(), "infeasible" | "error")
    }
}

fn row_for(cfg: &ExperimentConfig, spec: &InstanceSpec, algorithm: Algorithm, res: &Result<Outcome>) -> ResultRow {
    let mut row = ResultRow {
        seed: spec.seed,
        instance: spec.index,
        algo: algorithm.name().to_string(),
        k: spec.k,
        l: spec.l,
        k_max: spec.k_max,
        m: None,
        status: String::new(),
        objective_sumcut: None,
        cap_approx: None,
        cap_lb: None,
        cap_mc: None,
        cap_mc_se: None,
        nodes: None,
        runtime_ms: None,
    };
    match res {
        Ok(o) => {
            row.m = Some(o.decomposition.m());
            row.status = o.status.clone();
            row.objective_sumcut = Some(o.objective_sumcut);
            row.cap_approx = Some(o.capacity.sum_approx);
            row.cap_lb = Some(o.capacity.sum_lb);
            row.cap_mc = o.capacity.sum_mc;
            row.cap_mc_se = o.capacity.mc_std_err;
            row.nodes = o.nodes;
            row.runtime_ms = cfg.timing.then_some(o.runtime * 1e3);
        }
        Err(Error::Infeasible(_)) | Err(Error::BudgetExceeded { .. }) => row.status = "infeasible".into(),
        Err(_) => row.status = "error".into(),
    }
    row
}

/// Everything a sweep produces.
#[derive(Debug)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    /// Outcomes in row order.
    pub outcomes: Vec<(InstanceSpec, Result<Outcome>)>,
}

impl SweepResult {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(ResultRow::is_error)
    }
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| Error::invalid(format!("{WORKERS_ENV}={v} is not a count")))?;
            if n == 0 {
                return Err(Error::invalid(format!("{WORKERS_ENV} must be at least 1")));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Runs every algorithm on every instance. Rows are ordered by instance and
/// then by the configured algorithm order, whatever the worker count.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    cfg.check()?;
    let specs = cfg.instances();
    let work = || -> Vec<Vec<(InstanceSpec, Algorithm, Result<Outcome>)>> {
        specs
            .par_iter()
            .map(|spec| match Instance::generate(cfg, *spec) {
                Ok(inst) => cfg.algorithms.iter().map(|&a| (*spec, a, run_decompose(cfg, &inst, a))).collect(),
                Err(e) => {
                    let msg = e.to_string();
                    cfg.algorithms.iter().map(|&a| (*spec, a, Err(Error::invalid(msg.clone())))).collect()
                }
            })
            .collect()
    };
    let per_instance = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for (spec, algorithm, res) in per_instance.into_iter().flatten() {
        if let Err(e) = &res {
            eprintln!("instance {} {}: {e}", spec.index, algorithm);
        }
        rows.push(row_for(cfg, &spec, algorithm, &res));
        outcomes.push((spec, res));
    }
    Ok(SweepResult { rows, outcomes })
}

/// Per-cell aggregate: mean and standard error of the numeric columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Kmax")]
    pub k_max: usize,
    pub n: usize,
    pub errors: usize,
    pub sumcut_mean: Option<f64>,
    pub sumcut_se: Option<f64>,
    pub cap_approx_mean: Option<f64>,
    pub cap_approx_se: Option<f64>,
    pub cap_lb_mean: Option<f64>,
    pub cap_lb_se: Option<f64>,
    pub cap_mc_mean: Option<f64>,
    pub cap_mc_se: Option<f64>,
    pub nodes_mean: Option<f64>,
    pub runtime_ms_mean: Option<f64>,
    pub runtime_ms_se: Option<f64>,
}

/// Sample mean and standard error of the mean (zero for one sample).
pub fn mean_se(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Vec<SummaryRow> {
    let order = |name: &str| cfg.algorithms.iter().position(|a| a.name() == name).unwrap_or(usize::MAX);
    let mut cells: BTreeMap<(usize, usize, usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.k, r.l, r.k_max, order(&r.algo))).or_default().push(r);
    }
    cells
        .into_values()
        .map(|group| {
            let first = group[0];
            let ok: Vec<&ResultRow> = group.iter().copied().filter(|r| !r.is_error()).collect();
            let col = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let sumcut = mean_se(&col(|r| r.objective_sumcut));
            let approx = mean_se(&col(|r| r.cap_approx));
            let lb = mean_se(&col(|r| r.cap_lb));
            let mc = mean_se(&col(|r| r.cap_mc));
            let nodes = mean_se(&col(|r| r.nodes.map(|n| n as f64)));
            let runtime = mean_se(&col(|r| r.runtime_ms));
            SummaryRow {
                algo: first.algo.clone(),
                k: first.k,
                l: first.l,
                k_max: first.k_max,
                n: group.len(),
                errors: group.len() - ok.len(),
                sumcut_mean: sumcut.map(|v| v.0),
                sumcut_se: sumcut.map(|v| v.1),
                cap_approx_mean: approx.map(|v| v.0),
                cap_approx_se: approx.map(|v| v.1),
                cap_lb_mean: lb.map(|v| v.0),
                cap_lb_se: lb.map(|v| v.1),
                cap_mc_mean: mc.map(|v| v.0),
                cap_mc_se: mc.map(|v| v.1),
                nodes_mean: nodes.map(|v| v.0),
                runtime_ms_mean: runtime.map(|v| v.0),
                runtime_ms_se: runtime.map(|v| v.1),
            }
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Summary path next to the main CSV: `results.csv` -> `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.summary.csv"))
}

/// Writes the row CSV and the summary CSV.
pub fn write_outputs(cfg: &ExperimentConfig, result: &SweepResult) -> Result<(PathBuf, PathBuf)> {
    let main = cfg.output_path.clone();
    write_atomic(&main, |w| write_rows(&result.rows, w))?;
    let summary = summary_path(&main);
    let agg = summarize(cfg, &result.rows);
    write_atomic(&summary, |w| write_summary(&agg, w))?;
    Ok((main, summary))
}

/// Per-subnetwork membership with 1-based indices, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub k: usize,
    pub l: usize,
    pub algo: String,
    pub subnetworks: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub id: usize,
    pub ues: Vec<usize>,
    pub bss: Vec<usize>,
    pub cap_approx: f64,
}

pub fn snapshot(outcome: &Outcome) -> Snapshot {
    let d = &outcome.decomposition;
    Snapshot {
        k: d.k(),
        l: d.l(),
        algo: outcome.algorithm.name().to_string(),
        subnetworks: (0..d.m())
            .map(|m| SnapshotEntry {
                id: m + 1,
                ues: d.ues(m).iter().map(|u| u + 1).collect(),
                bss: d.bss(m).iter().map(|b| b + 1).collect(),
                cap_approx: outcome.capacity.per_subnetwork_approx[m],
            })
            .collect(),
    }
}
