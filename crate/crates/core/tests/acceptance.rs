//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line to stderr (visible even when output is captured) before asserting.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use ndarray::{Array1, Array2};
use polyrelu::cs_solve::{solve, CsProblem, SolverOptions, Variant};
use polyrelu::dnn::{
    init_params, loss, loss_and_grad, train, Architecture, InitStrategy, NetworkParams, Optimizer, Precision, Schedule,
    StopReason, TrainConfig, TrainingTrace,
};
use polyrelu::harness::{
    best_s_term_error, coefficient_decay_fit, geometric_ratio, quantile, run_experiment, CsVariant, ExperimentSpec,
    IndexSetChoice, MethodSpec, QuadratureChoice, ResultRecord,
};
use polyrelu::legendre::{assemble_system, basis_matrix, tensor_eval};
use polyrelu::multiindex::{
    degree_for_cardinality, hc_cardinality, hc_cardinality_bounds, hyperbolic_cross, intrinsic_lower_sparsity, MultiIndex,
};
use polyrelu::quadrature::{
    auto_level, cc_rule_1d, integrate_values, reference_coefficients_from_values, smolyak_node_count, smolyak_rule,
    DEFAULT_NODE_CAP,
};
use polyrelu::rng::{stream_rng, Stream};
use polyrelu::targets::{logsin, sample_uniform, DataSet, TargetSpec};
use rand::Rng;

// Runtime bounds are per criterion, so the checks run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict} - {detail}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn errors(records: &[ResultRecord], method: &str) -> Vec<f64> {
    records.iter().filter(|r| r.method == method).map(|r| r.error).collect()
}

// ---------------------------------------------------------------------------

fn planted_problem(seed: u64) -> (CsProblem, Array1<f64>) {
    let set = hyperbolic_cross(2, 30).unwrap();
    let mut rng = stream_rng(seed, Stream::Plant, &[]);
    let mut support = vec![MultiIndex::zero(2)];
    while support.len() < 10 {
        let candidates: Vec<MultiIndex> = support
            .iter()
            .flat_map(|nu| (0..2).map(move |j| nu.successor(j)))
            .filter(|nu| set.contains(nu) && !support.contains(nu))
            .filter(|nu| (0..2).all(|j| nu.predecessor(j).is_none_or(|p| support.contains(&p))))
            .collect();
        let pick = candidates[rng.random_range(0..candidates.len())].clone();
        support.push(pick);
    }
    let mut c = Array1::zeros(set.len());
    for nu in &support {
        let mag = rng.random_range(0.5..1.5);
        c[set.position(nu).unwrap()] = if rng.random::<bool>() { mag } else { -mag };
    }
    let pts = sample_uniform(2, 200, seed);
    let (a, _) = assemble_system(pts.view(), &[0.0; 200], &set).unwrap();
    let f = a.matrix().dot(&c);
    (CsProblem::weighted(a, f, Variant::Qcbp { eta: 0.0 }).unwrap(), c)
}

#[test]
fn criterion_01_planted_sparse_recovery() {
    let _serial = serial();
    let mut worst = (0.0f64, 0.0f64);
    let mut ok = true;
    for seed in 0..10 {
        let (p, c) = planted_problem(seed);
        let start = Instant::now();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let err = (sol.coefficients.values().to_owned() - &c).mapv(|v| v * v).sum().sqrt();
        worst = (worst.0.max(err), worst.1.max(secs));
        ok &= err <= 1e-5 && secs < 10.0;
    }
    report(1, ok, &format!("max coefficient error {:.3e}, slowest solve {:.2}s over 10 seeds", worst.0, worst.1));
    assert!(ok);
}

#[test]
fn criterion_02_weighted_cs_on_exp_cos() {
    let _serial = serial();
    let spec = ExperimentSpec {
        target: TargetSpec::ExpCos { d: 4 },
        methods: vec![MethodSpec::Cs {
            id: None,
            variant: CsVariant::Qcbp,
            weighted: true,
            index_set: IndexSetChoice::Cardinality(300),
            eta: None,
            mu: None,
            solver: SolverOptions::default(),
        }],
        sample_grid: vec![500],
        trials: 5,
        base_seed: 0,
        noise_sigma: 0.0,
        quadrature: QuadratureChoice::Default,
        output: None,
    };
    let start = Instant::now();
    let recs = run_experiment(&spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let errs: Vec<f64> = recs.iter().map(|r| r.error).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let ok = errs.len() == 5 && mean <= 1e-3 && secs < 120.0;
    report(2, ok, &format!("mean relative error {mean:.3e} over 5 trials in {secs:.1}s"));
    assert!(ok);
}

#[test]
fn criterion_03_exponential_rate() {
    let _serial = serial();
    let f = logsin(1);
    let rule = QuadratureChoice::Default.build(&f).unwrap();
    let set = hyperbolic_cross(1, 60).unwrap();
    let c = reference_coefficients_from_values(&rule, &rule.eval(|x| f.eval(x)), &set).unwrap();
    let errs: Vec<f64> = (1..=8).map(|s| best_s_term_error(&c, s, true).unwrap()).collect();
    let ordered = errs.windows(2).all(|w| w[1] <= w[0]);
    let ratio = geometric_ratio(&errs).unwrap();
    let (rho, _) = coefficient_decay_fit(&c, 0..=50).unwrap();
    let ok = ordered && ratio < 0.5 && rho > 1.5;
    report(3, ok, &format!("best s-term errors nonincreasing: {ordered}, fitted ratio {ratio:.4} (< 0.5), decay rho {rho:.4} (> 1.5)"));
    assert!(ok);
}

#[test]
fn criterion_04_sparsity_and_cardinality_bounds() {
    let _serial = serial();
    let start = Instant::now();
    let mut failures = Vec::new();
    for d in [1usize, 2, 4] {
        for s in 1..=12usize {
            let k = intrinsic_lower_sparsity(d, s).unwrap();
            let sq = (s * s) as f64;
            if !(sq / 4.0 <= k && k <= sq) {
                failures.push(format!("K(s) out of range at d={d} s={s}: {k}"));
            }
            if d == 1 && k != sq {
                failures.push(format!("K({s}) = {k} in d=1"));
            }
            let n = hc_cardinality(d, s) as f64;
            for (i, b) in hc_cardinality_bounds(d, s).iter().enumerate() {
                if n > *b {
                    failures.push(format!("bound {} fails at d={d} s={s}: {n} > {b:.4}", i + 1));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 60.0;
    let detail = if failures.is_empty() {
        format!("all bounds hold ({secs:.1}s)")
    } else {
        format!("{} violations, first: {}; {secs:.1}s", failures.len(), failures[0])
    };
    report(4, ok, &detail);
    assert!(ok, "{failures:#?}");
}

#[test]
fn criterion_05_target_cardinalities() {
    let _serial = serial();
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, n) in [(2usize, 3001u128), (4, 3079), (8, 3023)] {
        let m = degree_for_cardinality(d, n);
        let rel = (m.cardinality as f64 - n as f64).abs() / n as f64;
        if !m.exact {
            let _ = writeln!(std::io::stderr(), "warning: d={d} nearest cardinality {} for {n}", m.cardinality);
        }
        ok &= m.exact || rel <= 0.01;
        parts.push(format!("d={d}: s={} |HC|={} exact={}", m.degree, m.cardinality, m.exact));
    }
    report(5, ok, &parts.join(", "));
    assert!(ok);
}

fn finite_difference_mismatch(arch: Architecture, seed: u64) -> Option<String> {
    let p: NetworkParams<f64> = init_params(arch, InitStrategy::NormalScaled, seed);
    let x = sample_uniform(arch.input_dim, 16, seed);
    let mut rng = stream_rng(seed, Stream::Noise, &[]);
    let y = Array1::from_shape_fn(16, |_| rng.random_range(-1.0..1.0));
    let (_, g) = loss_and_grad(&p, x.view(), y.view()).unwrap();
    let flat = p.to_flat();
    let grad = g.to_flat();
    let h = 1e-6;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += h;
        let mut minus = flat.clone();
        minus[i] -= h;
        let lp = loss(&NetworkParams::from_flat(arch, &plus).unwrap(), x.view(), y.view()).unwrap();
        let lm = loss(&NetworkParams::from_flat(arch, &minus).unwrap(), x.view(), y.view()).unwrap();
        let fd = (lp - lm) / (2.0 * h);
        if (grad[i] - fd).abs() > (1e-6 * fd.abs()).max(1e-8) {
            return Some(format!("param {i}: reverse {} vs central {fd}", grad[i]));
        }
    }
    None
}

#[test]
fn criterion_06_gradient_correctness() {
    let _serial = serial();
    let start = Instant::now();
    let shapes = [(1usize, 10usize), (3, 10), (5, 20)];
    let dims = [1usize, 2, 8];
    let mut rng = stream_rng(2024, Stream::Init, &[]);
    let mut failures = Vec::new();
    for case in 0..20u64 {
        let (l, n) = shapes[rng.random_range(0..3)];
        let d = dims[rng.random_range(0..3)];
        let arch = Architecture::new(d, l, n).unwrap();
        if let Some(msg) = finite_difference_mismatch(arch, 100 + case) {
            failures.push(format!("{} d={d} seed {}: {msg}", arch.label(), 100 + case));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs < 30.0;
    report(6, ok, &format!("{} of 20 combinations mismatched ({secs:.1}s)", failures.len()));
    assert!(ok, "{failures:#?}");
}

fn logsin_run(seed: u64, cfg: TrainConfig) -> TrainingTrace {
    let data = DataSet::generate(&logsin(1), 500, 0.0, seed).unwrap();
    let y = Array1::from(data.values.clone());
    let arch = Architecture::new(1, 5, 50).unwrap();
    train::<f64>(arch, data.points.view(), y.view(), &TrainConfig { seed, ..cfg }).unwrap().1
}

#[test]
fn criterion_07_training_convergence() {
    let _serial = serial();
    let adam = TrainConfig { eps_tol: 1e-5, precision: Precision::Double, ..Default::default() };
    let sgd = TrainConfig { optimizer: Optimizer::Sgd, schedule: Schedule::Constant, tau_final: adam.tau_init, ..adam };
    let mut adam_hits = 0;
    let mut sgd_misses = 0;
    let mut epochs = Vec::new();
    for seed in 0..5 {
        let a = logsin_run(seed, adam);
        if a.stop_reason == StopReason::Tolerance {
            adam_hits += 1;
        }
        epochs.push(a.epochs_run());
        let s = logsin_run(seed, sgd);
        if s.stop_reason != StopReason::Tolerance {
            sgd_misses += 1;
        }
    }
    let ok = adam_hits >= 4 && sgd_misses >= 4;
    report(7, ok, &format!("Adam reached 1e-5 in {adam_hits}/5 seeds (epochs {epochs:?}); constant-rate SGD missed in {sgd_misses}/5"));
    assert!(ok);
}

#[test]
fn criterion_08_halfspace_flexibility() {
    let _serial = serial();
    let spec = ExperimentSpec {
        target: TargetSpec::Halfspace { d: 2 },
        methods: vec![
            MethodSpec::Cs {
                id: Some("cs".into()),
                variant: CsVariant::Qcbp,
                weighted: true,
                index_set: IndexSetChoice::Cardinality(3001),
                eta: None,
                mu: None,
                solver: SolverOptions { max_iterations: 20_000, ..Default::default() },
            },
            MethodSpec::Dnn {
                id: Some("dnn".into()),
                hidden_layers: 5,
                width: 50,
                train: TrainConfig { k_final: 5000, ..Default::default() },
            },
        ],
        sample_grid: vec![1000],
        trials: 5,
        base_seed: 0,
        noise_sigma: 0.0,
        // a lattice rule, since the target is discontinuous
        quadrature: QuadratureChoice::Default,
        output: None,
    };
    let start = Instant::now();
    let recs = run_experiment(&spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let cs = median(errors(&recs, "cs"));
    let dnn = median(errors(&recs, "dnn"));
    let ok = cs >= 0.2 && dnn <= 0.15 && secs < 600.0;
    report(8, ok, &format!("median CS error {cs:.4} (>= 0.2), median DNN error {dnn:.4} (<= 0.15), {secs:.0}s"));
    assert!(ok);
}

fn srlasso_errors(sigma: f64) -> Vec<f64> {
    let spec = ExperimentSpec {
        target: TargetSpec::ExpCos { d: 4 },
        methods: vec![MethodSpec::Cs {
            id: None,
            variant: CsVariant::SrLasso,
            weighted: true,
            index_set: IndexSetChoice::Cardinality(300),
            eta: None,
            mu: None,
            solver: SolverOptions::default(),
        }],
        sample_grid: vec![500],
        trials: 5,
        base_seed: 0,
        noise_sigma: sigma,
        quadrature: QuadratureChoice::Default,
        output: None,
    };
    run_experiment(&spec).unwrap().iter().map(|r| r.error).collect()
}

#[test]
fn criterion_09_noise_stability() {
    let _serial = serial();
    let mid = median(srlasso_errors(1e-2));
    let low = median(srlasso_errors(1e-3));
    let high = median(srlasso_errors(1e-1));
    let ok = mid <= 10.0 * 1e-2 && low < high;
    report(9, ok, &format!("median error {mid:.3e} at sigma 1e-2 (<= 1e-1); {low:.3e} at 1e-3 vs {high:.3e} at 1e-1"));
    assert!(ok);
}

#[test]
fn criterion_10_quadrature_integrity() {
    let _serial = serial();
    let set = hyperbolic_cross(2, 10).unwrap();
    let sum = |x: &[f64]| set.iter().map(|nu| tensor_eval(nu, x).unwrap()).sum::<f64>();
    let rule = auto_level(2, sum, 1e-10, 1, DEFAULT_NODE_CAP).unwrap();
    let level = rule.level().unwrap();
    let b = basis_matrix(rule.nodes(), &set, 1.0).unwrap();
    let mut worst = 0.0f64;
    for p in 0..set.len() {
        for q in p..set.len() {
            let vals: Vec<f64> = (0..rule.len()).map(|i| b[[i, p]] * b[[i, q]]).collect();
            let expect = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((integrate_values(&rule, &vals) - expect).abs());
        }
    }
    let mut weight_dev = 0.0f64;
    for l in 0..=level {
        let s: f64 = smolyak_rule(2, l).unwrap().weights().iter().sum();
        weight_dev = weight_dev.max((s - 1.0).abs());
    }
    let nodes16 = cc_rule_1d(16).unwrap().len();
    let ok = worst <= 1e-10 && weight_dev <= 1e-12 && nodes16 == 65_537;
    report(
        10,
        ok,
        &format!("Gram deviation {worst:.2e} at level {level}; weight-sum deviation {weight_dev:.2e}; 1D level-16 nodes {nodes16}"),
    );
    assert!(ok);
}

/// Builds the full multivariate rules with the reference test-point counts. Slow.
#[test]
#[ignore]
fn criterion_10_reference_node_counts_full_rules() {
    let _serial = serial();
    for (d, level, count) in [(1usize, 16u32, 65_537usize), (2, 15, 311_297), (4, 12, 643_073), (8, 9, 1_863_937)] {
        assert_eq!(smolyak_node_count(d, level), count as u128);
        let rule = smolyak_rule(d, level).unwrap();
        assert_eq!(rule.len(), count, "d={d} level={level}");
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
    }
}

fn checkpoint_protocol_holds<T: polyrelu::dnn::Real>(x: &Array2<f64>, y: &Array1<f64>, cfg: TrainConfig) -> (bool, String) {
    let arch = Architecture::new(x.ncols(), 3, 20).unwrap();
    let xt = x.mapv(T::from_f64);
    let yt = y.mapv(T::from_f64);
    let (params, trace) = train::<T>(arch, xt.view(), yt.view(), &cfg).unwrap();
    let cps = trace.checkpoints();
    let decreasing = cps.windows(2).all(|w| w[1].1 < w[0].1 && w[1].1 <= w[0].1 / 8.0);
    let again = loss(&params, xt.view(), yt.view()).unwrap();
    let exact = again == trace.best_loss();
    let converged = trace.stop_reason == StopReason::Tolerance;
    (
        converged && decreasing && exact && cps.len() >= 3,
        format!("{} checkpoints, stop {}, re-evaluated {again:e} vs {:e}", cps.len(), trace.stop_reason, trace.best_loss()),
    )
}

#[test]
fn criterion_11_checkpoint_protocol() {
    let _serial = serial();
    let data = DataSet::generate(&logsin(1), 200, 0.0, 9).unwrap();
    let y = Array1::from(data.values.clone());
    let double = checkpoint_protocol_holds::<f64>(&data.points, &y, TrainConfig { eps_tol: 1e-4, seed: 9, ..Default::default() });
    let single = checkpoint_protocol_holds::<f32>(
        &data.points,
        &y,
        TrainConfig { eps_tol: 1e-4, seed: 9, precision: Precision::Single, ..Default::default() },
    );
    let ok = double.0 && single.0;
    report(11, ok, &format!("double: {}; single: {}", double.1, single.1));
    assert!(ok);
}
