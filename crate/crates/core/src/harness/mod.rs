//! Experiment orchestration: trials over a sample grid, CS and DNN fits on
//! shared data, and per-group statistics.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs_solve::{mu_theoretical, solve, CsProblem, SolverOptions, Variant};
use crate::dnn::{train_network, Architecture, Precision, TrainConfig};
use crate::error::{Error, Result};
use crate::legendre::{assemble_system, ExpansionCoefficients};
use crate::multiindex::{degree_for_cardinality, hyperbolic_cross, MultiIndexSet};
use crate::quadrature::{
    auto_level, qmc_rule, reference_coefficients_from_values, smolyak_node_count, smolyak_rule_capped, QuadratureRule,
    RuleKind, DEFAULT_NODE_CAP, DEFAULT_QMC_POINTS,
};
use crate::rng::{derive_seed, Stream};
use crate::targets::{DataSet, TargetFunction, TargetSpec};

pub mod analysis;
pub mod report;

pub use analysis::{best_s_term_error, coefficient_decay_fit, geometric_ratio};
pub use report::{export_report, read_records, write_records};

/// Sparse-grid level used for test errors when none is given.
pub fn default_quad_level(d: usize) -> u32 {
    match d {
        1 => 12,
        2 => 9,
        3 => 8,
        4 => 7,
        5 | 6 => 6,
        7 | 8 => 5,
        _ => 4,
    }
}

/// The test rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadratureChoice {
    /// Lattice for discontinuous targets, otherwise the default sparse-grid level.
    #[default]
    Default,
    SparseGrid { level: u32 },
    /// Raise the level until successive `∫f²` agree to `tolerance`.
    Auto { tolerance: f64 },
    Lattice { points: usize },
}

impl QuadratureChoice {
    pub fn build(&self, target: &TargetFunction) -> Result<QuadratureRule> {
        let d = target.dim();
        match *self {
            QuadratureChoice::Default if target.is_discontinuous() => qmc_rule(d, DEFAULT_QMC_POINTS),
            QuadratureChoice::Default => smolyak_rule_capped(d, default_quad_level(d), DEFAULT_NODE_CAP),
            QuadratureChoice::SparseGrid { level } => smolyak_rule_capped(d, level, DEFAULT_NODE_CAP),
            QuadratureChoice::Auto { tolerance } => auto_level(d, |x| target.eval(x), tolerance, 1, DEFAULT_NODE_CAP),
            QuadratureChoice::Lattice { points } => qmc_rule(d, points),
        }
    }

    /// Fails early when the rule would exceed the node cap.
    pub fn check(&self, target: &TargetFunction) -> Result<()> {
        let d = target.dim();
        let level = match *self {
            QuadratureChoice::Default if !target.is_discontinuous() => default_quad_level(d),
            QuadratureChoice::SparseGrid { level } => level,
            QuadratureChoice::Lattice { points: 0 } => return Err(Error::invalid("lattice needs points")),
            _ => return Ok(()),
        };
        let n = smolyak_node_count(d, level);
        if n > DEFAULT_NODE_CAP {
            return Err(Error::CapExceeded { what: "sparse grid nodes", required: n, cap: DEFAULT_NODE_CAP });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsVariant {
    Qcbp,
    Lasso,
    SrLasso,
}

/// How a CS method picks its index set: a hyperbolic-cross degree or a target
/// cardinality (nearest degree).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSetChoice {
    Degree(usize),
    Cardinality(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    Cs {
        #[serde(default)]
        id: Option<String>,
        variant: CsVariant,
        #[serde(default = "yes")]
        weighted: bool,
        index_set: IndexSetChoice,
        /// QCBP tolerance; omitted means `‖A c_Λ − f‖₂` with quadrature coefficients.
        #[serde(default)]
        eta: Option<f64>,
        /// LASSO parameter; omitted means the theoretical value for the degree.
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        solver: SolverOptions,
    },
    Dnn {
        #[serde(default)]
        id: Option<String>,
        hidden_layers: usize,
        width: usize,
        #[serde(default)]
        train: TrainConfig,
    },
}

fn yes() -> bool {
    true
}

impl MethodSpec {
    pub fn id(&self) -> String {
        match self {
            MethodSpec::Cs { id: Some(id), .. } | MethodSpec::Dnn { id: Some(id), .. } => id.clone(),
            MethodSpec::Cs { variant, weighted, index_set, .. } => {
                let w = if *weighted { "w" } else { "" };
                let v = match variant {
                    CsVariant::Qcbp => "qcbp",
                    CsVariant::Lasso => "lasso",
                    CsVariant::SrLasso => "srlasso",
                };
                match index_set {
                    IndexSetChoice::Degree(s) => format!("{w}{v}-s{s}"),
                    IndexSetChoice::Cardinality(n) => format!("{w}{v}-n{n}"),
                }
            }
            MethodSpec::Dnn { hidden_layers, width, .. } => format!("dnn-{hidden_layers}x{width}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub target: TargetSpec,
    pub methods: Vec<MethodSpec>,
    pub sample_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub quadrature: QuadratureChoice,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    5
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<TargetFunction> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.sample_grid.is_empty() || self.sample_grid[0] == 0 || self.sample_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sample grid must be nonempty, positive and strictly increasing"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise level must be nonnegative"));
        }
        let target = TargetFunction::from_spec(self.target.clone())?;
        for m in &self.methods {
            if let MethodSpec::Dnn { train, .. } = m {
                train.validate()?;
            }
        }
        let mut ids: Vec<String> = self.methods.iter().map(|m| m.id()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("method ids must be unique"));
        }
        self.quadrature.check(&target)?;
        Ok(target)
    }

    /// Seed of the training data for trial `t` at sample size `m`.
    pub fn data_seed(&self, trial: usize, m: usize) -> u64 {
        derive_seed(self.base_seed, Stream::Sample, &[trial as u64, m as u64])
    }

    /// Sets the precision of every network method.
    pub fn set_precision(&mut self, precision: Precision) {
        for m in &mut self.methods {
            if let MethodSpec::Dnn { train, .. } = m {
                train.precision = precision;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub m: usize,
    pub trial: usize,
    pub error: f64,
    pub wall_seconds: f64,
    /// Solver iterations or training epochs.
    pub iterations: usize,
    pub max_abs_weight: Option<f64>,
    pub residual: Option<f64>,
    pub stop_reason: String,
}

impl ResultRecord {
    pub fn diverged(&self) -> bool {
        self.stop_reason == "divergence"
    }
}

// Everything about a CS method that does not depend on the trial.
struct CsSetup {
    set: MultiIndexSet,
    reference: Option<ExpansionCoefficients>,
    degree: usize,
}

/// Fits every method on every (m, trial) data set and measures the relative
/// L² error on the test rule.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    let target = spec.validate()?;
    if spec.methods.is_empty() {
        return Ok(Vec::new());
    }
    let rule = spec.quadrature.build(&target)?;
    let f_test = rule.eval(|x| target.eval(x));

    let setups: Vec<Option<CsSetup>> = spec
        .methods
        .iter()
        .map(|m| match m {
            MethodSpec::Cs { variant, index_set, eta, .. } => {
                let degree = match *index_set {
                    IndexSetChoice::Degree(s) => s,
                    IndexSetChoice::Cardinality(n) => degree_for_cardinality(target.dim(), n as u128).degree,
                };
                let set = hyperbolic_cross(target.dim(), degree)?;
                let reference = if *variant == CsVariant::Qcbp && eta.is_none() {
                    Some(reference_coefficients_from_values(&rule, &f_test, &set)?)
                } else {
                    None
                };
                Ok(Some(CsSetup { set, reference, degree }))
            }
            MethodSpec::Dnn { .. } => Ok(None),
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for &m in &spec.sample_grid {
        for trial in 0..spec.trials {
            for k in 0..spec.methods.len() {
                jobs.push((m, trial, k));
            }
        }
    }
    let datasets: BTreeMap<(usize, usize), DataSet> = spec
        .sample_grid
        .iter()
        .flat_map(|&m| (0..spec.trials).map(move |t| (m, t)))
        .map(|(m, t)| Ok(((m, t), DataSet::generate(&target, m, spec.noise_sigma, spec.data_seed(t, m))?)))
        .collect::<Result<_>>()?;

    jobs.par_iter()
        .map(|&(m, trial, k)| {
            let data = &datasets[&(m, trial)];
            fit_one(&spec.methods[k], setups[k].as_ref(), data, &rule, &f_test, spec.base_seed).map(|mut r| {
                r.m = m;
                r.trial = trial;
                r
            })
        })
        .collect()
}

fn fit_one(
    method: &MethodSpec,
    setup: Option<&CsSetup>,
    data: &DataSet,
    rule: &QuadratureRule,
    f_test: &[f64],
    base_seed: u64,
) -> Result<ResultRecord> {
    let start = Instant::now();
    let id = method.id();
    let mut rec = ResultRecord {
        method: id,
        m: data.len(),
        trial: 0,
        error: f64::NAN,
        wall_seconds: 0.0,
        iterations: 0,
        max_abs_weight: None,
        residual: None,
        stop_reason: String::new(),
    };
    match method {
        MethodSpec::Cs { variant, weighted, eta, mu, solver, .. } => {
            let setup = setup.expect("CS setup");
            let (a, f) = assemble_system(data.points.view(), &data.values, &setup.set)?;
            let v = match variant {
                CsVariant::Qcbp => {
                    let eta = match (eta, &setup.reference) {
                        (Some(e), _) => *e,
                        (None, Some(c)) => crate::quadrature::reference_eta(&a, c, &f)?,
                        (None, None) => unreachable!("reference computed for QCBP"),
                    };
                    Variant::Qcbp { eta }
                }
                CsVariant::Lasso => Variant::Lasso { mu: mu.map_or_else(|| mu_theoretical(setup.degree.max(1)), Ok)? },
                CsVariant::SrLasso => Variant::SrLasso { mu: mu.map_or_else(|| mu_theoretical(setup.degree.max(1)), Ok)? },
            };
            let problem = if *weighted { CsProblem::weighted(a, f, v)? } else { CsProblem::new(a, f, None, v)? };
            match solve(&problem, solver) {
                Ok(sol) => {
                    let approx = sol.coefficients.eval_many(rule.nodes())?;
                    rec.error = crate::quadrature::relative_l2_error_values(rule, f_test, &approx)?;
                    rec.iterations = sol.iterations;
                    rec.residual = Some(sol.residual_norm);
                    rec.stop_reason = if sol.converged { "converged" } else { "max_iterations" }.into();
                }
                Err(Error::SolverDivergence { iteration }) => {
                    rec.iterations = iteration;
                    rec.stop_reason = "divergence".into();
                }
                Err(e) => return Err(e),
            }
        }
        MethodSpec::Dnn { hidden_layers, width, train, .. } => {
            let arch = Architecture::new(data.dim(), *hidden_layers, *width)?;
            let cfg = TrainConfig { seed: derive_seed(base_seed, Stream::Init, &[]), ..*train };
            let (net, trace) = train_network(arch, data.points.view(), &data.values, &cfg)?;
            rec.iterations = trace.epochs_run();
            rec.max_abs_weight = Some(net.max_abs_weight());
            rec.residual = Some(trace.best_loss());
            rec.stop_reason = trace.stop_reason.to_string();
            if net.max_abs_weight().is_finite() {
                let approx = net.forward_batch(rule.nodes())?;
                rec.error = crate::quadrature::relative_l2_error_values(rule, f_test, &approx)?;
            }
        }
    }
    rec.wall_seconds = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// Statistics of one (method, m) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub m: usize,
    pub count: usize,
    pub diverged: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    /// Errors beyond 1.5 interquartile ranges from the box.
    pub outliers: Vec<f64>,
    pub mean_wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups records by (method, m) and computes error statistics over the
/// finite errors of each group.
pub fn summarize(records: &[ResultRecord]) -> SummaryTable {
    let mut groups: BTreeMap<(String, usize), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method.clone(), r.m)).or_default().push(r);
    }
    let mut table = SummaryTable::default();
    for ((method, m), recs) in groups {
        let mut errs: Vec<f64> = recs.iter().map(|r| r.error).filter(|e| e.is_finite()).collect();
        if errs.is_empty() {
            table.warnings.push(format!("{method} at m={m}: no finite errors, group omitted"));
            continue;
        }
        errs.sort_by(f64::total_cmp);
        let (q25, q75) = (quantile(&errs, 0.25), quantile(&errs, 0.75));
        let iqr = q75 - q25;
        table.rows.push(SummaryRow {
            method,
            m,
            count: errs.len(),
            diverged: recs.len() - errs.len(),
            mean: errs.iter().sum::<f64>() / errs.len() as f64,
            q25,
            median: quantile(&errs, 0.5),
            q75,
            min: errs[0],
            max: errs[errs.len() - 1],
            outliers: errs.iter().copied().filter(|e| *e < q25 - 1.5 * iqr || *e > q75 + 1.5 * iqr).collect(),
            mean_wall_seconds: recs.iter().map(|r| r.wall_seconds).sum::<f64>() / recs.len() as f64,
        });
    }
    table
}

/// True when the rule is the lattice used for discontinuous targets.
pub fn is_lattice(rule: &QuadratureRule) -> bool {
    matches!(rule.kind(), RuleKind::Lattice { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_spec(methods: Vec<MethodSpec>) -> ExperimentSpec {
        let terms = vec![("0:0".into(), 1.0), ("1:0".into(), 0.5), ("0:2".into(), -0.25), ("1:1".into(), 0.125)];
        ExperimentSpec {
            target: TargetSpec::Polynomial { d: 2, terms },
            methods,
            sample_grid: vec![40, 80],
            trials: 2,
            base_seed: 3,
            noise_sigma: 0.0,
            quadrature: QuadratureChoice::SparseGrid { level: 6 },
            output: None,
        }
    }

    fn wqcbp(s: usize) -> MethodSpec {
        MethodSpec::Cs {
            id: None,
            variant: CsVariant::Qcbp,
            weighted: true,
            index_set: IndexSetChoice::Degree(s),
            eta: None,
            mu: None,
            solver: SolverOptions::default(),
        }
    }

    #[test]
    fn empty_methods_give_no_records() {
        let spec = ExperimentSpec { sample_grid: vec![10], ..planted_spec(vec![]) };
        assert!(run_experiment(&spec).unwrap().is_empty());
    }

    #[test]
    fn planted_polynomial_is_recovered() {
        // |Λ^HC_5| = 14 in d=2, so m ≥ 42 covers 3|Λ|
        let spec = ExperimentSpec { sample_grid: vec![45, 90], ..planted_spec(vec![wqcbp(5)]) };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 4);
        for r in &records {
            assert!(r.error <= 1e-6, "{r:?}");
        }
        let untimed = |rs: Vec<ResultRecord>| rs.into_iter().map(|r| ResultRecord { wall_seconds: 0.0, ..r }).collect::<Vec<_>>();
        assert_eq!(untimed(records), untimed(run_experiment(&spec).unwrap()));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = planted_spec(vec![wqcbp(3)]);
        spec.sample_grid = vec![50, 40];
        assert!(run_experiment(&spec).is_err());
        let mut spec = planted_spec(vec![wqcbp(3)]);
        spec.trials = 0;
        assert!(run_experiment(&spec).is_err());
        let mut spec = planted_spec(vec![wqcbp(3)]);
        spec.quadrature = QuadratureChoice::SparseGrid { level: 19 };
        assert!(matches!(run_experiment(&spec), Err(Error::CapExceeded { .. })));
        let spec = planted_spec(vec![wqcbp(3), wqcbp(3)]);
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn data_seeds_depend_only_on_trial_and_m() {
        let spec = planted_spec(vec![]);
        assert_eq!(spec.data_seed(1, 40), spec.data_seed(1, 40));
        assert_ne!(spec.data_seed(1, 40), spec.data_seed(0, 40));
        assert_ne!(spec.data_seed(1, 40), spec.data_seed(1, 80));
    }

    #[test]
    fn spec_json_round_trip() {
        let mut spec = planted_spec(vec![
            wqcbp(4),
            MethodSpec::Dnn { id: Some("net".into()), hidden_layers: 2, width: 8, train: TrainConfig::default() },
        ]);
        spec.quadrature = QuadratureChoice::Lattice { points: 1000 };
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let minimal = r#"{"target": {"name": "exp_cos", "d": 2}, "methods": [
            {"kind": "cs", "variant": "sr_lasso", "index_set": {"cardinality": 100}},
            {"kind": "dnn", "hidden_layers": 1, "width": 4, "train": {"k_final": 10}}], "sample_grid": [20]}"#;
        let spec: ExperimentSpec = serde_json::from_str(minimal).unwrap();
        assert_eq!(spec.trials, 5);
        assert_eq!(spec.methods[0].id(), "wsrlasso-n100");
        assert_eq!(spec.methods[1].id(), "dnn-1x4");
    }

    #[test]
    fn small_mixed_benchmark_runs() {
        let spec = ExperimentSpec {
            target: TargetSpec::ExpCos { d: 2 },
            methods: vec![
                MethodSpec::Cs {
                    id: None,
                    variant: CsVariant::SrLasso,
                    weighted: true,
                    index_set: IndexSetChoice::Degree(8),
                    eta: None,
                    mu: None,
                    solver: SolverOptions { max_iterations: 5000, ..Default::default() },
                },
                MethodSpec::Dnn {
                    id: None,
                    hidden_layers: 1,
                    width: 10,
                    train: TrainConfig { k_final: 200, ..Default::default() },
                },
            ],
            sample_grid: vec![30, 60],
            trials: 2,
            base_seed: 1,
            noise_sigma: 1e-3,
            quadrature: QuadratureChoice::Default,
            output: None,
        };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.error.is_finite() && r.error >= 0.0));
        let dnn: Vec<_> = records.iter().filter(|r| r.method == "dnn-1x10").collect();
        assert!(dnn.iter().all(|r| r.max_abs_weight.is_some()));
    }

    #[test]
    fn summary_examples() {
        let rec = |method: &str, m: usize, trial: usize, error: f64| ResultRecord {
            method: method.into(),
            m,
            trial,
            error,
            wall_seconds: 1.0,
            iterations: 0,
            max_abs_weight: None,
            residual: None,
            stop_reason: "converged".into(),
        };
        let t = summarize(&[rec("a", 10, 0, 0.5)]);
        let row = &t.rows[0];
        assert_eq!((row.mean, row.min, row.max, row.median), (0.5, 0.5, 0.5, 0.5));

        let t = summarize(&[rec("a", 10, 0, 3.0), rec("a", 10, 1, 1.0), rec("a", 10, 2, 2.0)]);
        assert_eq!(t.rows[0].median, 2.0);

        let mut div = rec("b", 10, 0, f64::NAN);
        div.stop_reason = "divergence".into();
        let t = summarize(&[div, rec("a", 10, 0, 1.0)]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn quartiles_match_sort_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(2, Stream::Sample, &[]);
        for n in 1..40 {
            let errs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let recs: Vec<ResultRecord> = errs
                .iter()
                .enumerate()
                .map(|(i, e)| ResultRecord {
                    method: "x".into(),
                    m: 5,
                    trial: i,
                    error: *e,
                    wall_seconds: 0.0,
                    iterations: 0,
                    max_abs_weight: None,
                    residual: None,
                    stop_reason: String::new(),
                })
                .collect();
            let row = &summarize(&recs).rows[0];
            let mut sorted = errs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // oracle: weighted average of the two order statistics around (n−1)q
            let oracle = |q: f64| {
                let h = (n - 1) as f64 * q;
                let i = h as usize;
                if i + 1 < n {
                    sorted[i] * (1.0 - (h - i as f64)) + sorted[i + 1] * (h - i as f64)
                } else {
                    sorted[i]
                }
            };
            assert!((row.q25 - oracle(0.25)).abs() < 1e-15);
            assert!((row.median - oracle(0.5)).abs() < 1e-15);
            assert!((row.q75 - oracle(0.75)).abs() < 1e-15);
            assert!(row.q25 <= row.median && row.median <= row.q75);
        }
    }

    #[test]
    fn default_quadrature_uses_lattice_for_halfspace() {
        let t = crate::targets::halfspace(2);
        assert!(is_lattice(&QuadratureChoice::Default.build(&t).unwrap()));
        let t = crate::targets::exp_cos(2);
        assert!(!is_lattice(&QuadratureChoice::Default.build(&t).unwrap()));
    }
}
