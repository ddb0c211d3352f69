//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cs_solve::{lower_rip_constant, mu_theoretical, solve, CsProblem, SolverOptions, Variant};
use crate::dnn::{train_network, Architecture, Batch, InitStrategy, Optimizer, Precision, Schedule, TrainConfig};
use crate::error::{Error, Result};
use crate::harness::report::{ensure_writable, write_summary};
use crate::harness::{coefficient_decay_fit, export_report, read_records, run_experiment, summarize, ExperimentSpec, QuadratureChoice};
use crate::legendre::assemble_system;
use crate::multiindex::{hc_cardinality, hc_cardinality_bounds, hyperbolic_cross, intrinsic_lower_sparsity};
use crate::quadrature::{reference_coefficients_from_values, reference_eta, relative_l2_error_values};
use crate::targets::{sample_uniform, DataSet, TargetFunction, TargetSpec};

#[derive(Parser, Debug)]
#[command(name = "polyrelu", version, about = "Polynomial compressed sensing versus ReLU networks for function approximation")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Network arithmetic.
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
    /// Sparse-grid level of the test rule.
    #[arg(long, global = true)]
    quad_level: Option<u32>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TargetName {
    Logsin,
    ExpCos,
    Rational,
    Halfspace,
}

#[derive(Args, Debug)]
struct TargetArgs {
    #[arg(long, value_enum)]
    target: TargetName,
    /// Input dimension (ignored by logsin).
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Frequency parameter of logsin.
    #[arg(long = "K", default_value_t = 1)]
    k: u32,
}

impl TargetArgs {
    fn spec(&self) -> TargetSpec {
        match self.target {
            TargetName::Logsin => TargetSpec::Logsin { k: self.k },
            TargetName::ExpCos => TargetSpec::ExpCos { d: self.d },
            TargetName::Rational => TargetSpec::Rational { d: self.d },
            TargetName::Halfspace => TargetSpec::Halfspace { d: self.d },
        }
    }

    fn build(&self) -> Result<TargetFunction> {
        TargetFunction::from_spec(self.spec())
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum VariantArg {
    Qcbp,
    Lasso,
    SrLasso,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a Legendre expansion by weighted l1 minimization.
    FitCs {
        #[command(flatten)]
        target: TargetArgs,
        /// Number of samples.
        #[arg(long)]
        m: usize,
        /// Hyperbolic cross degree.
        #[arg(long)]
        degree: usize,
        #[arg(long, value_enum, default_value = "qcbp")]
        variant: VariantArg,
        /// Use unit weights instead of Legendre weights.
        #[arg(long)]
        unweighted: bool,
        /// QCBP tolerance (default: residual of the quadrature coefficients).
        #[arg(long)]
        eta: Option<f64>,
        /// LASSO parameter (default: the theoretical value for the degree).
        #[arg(long)]
        mu: Option<f64>,
        /// Standard deviation of additive noise on the samples.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iterations: usize,
    },
    /// Train a ReLU network.
    TrainDnn {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        layers: usize,
        #[arg(long, default_value_t = 50)]
        width: usize,
        #[arg(long, default_value_t = 30_000)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1e-6)]
        lr_final: f64,
        #[arg(long)]
        sgd: bool,
        /// Keep the learning rate fixed.
        #[arg(long)]
        constant_lr: bool,
        #[arg(long, value_enum, default_value = "full")]
        batch: BatchArg,
        #[arg(long, value_enum, default_value = "normal-fixed")]
        init: InitArg,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Run a full experiment from a JSON configuration.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reference Legendre coefficients by quadrature.
    Coeffs {
        #[command(flatten)]
        target: TargetArgs,
        /// Hyperbolic cross degree (in one dimension, the largest polynomial degree).
        #[arg(long)]
        degree: usize,
    },
    /// Re-summarize stored records.
    Report {
        /// Directory holding records.csv.
        #[arg(long)]
        records: PathBuf,
    },
    /// Intrinsic lower sparsity, hyperbolic cross sizes and a small lower RIP estimate.
    TheoryCheck {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        s: usize,
        /// Samples for the lower RIP estimate (0 skips it).
        #[arg(long, default_value_t = 0)]
        rip_m: usize,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BatchArg {
    Full,
    Half,
    Quarter,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum InitArg {
    NormalFixed,
    NormalScaled,
    UniformScaled,
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code: 0 on success, 1 on usage or input errors, 2 on numerical failure.
pub fn cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(parsed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn quadrature(cli: &Cli) -> QuadratureChoice {
    cli.quad_level.map_or(QuadratureChoice::Default, |level| QuadratureChoice::SparseGrid { level })
}

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::FitCs { target, m, degree, variant, unweighted, eta, mu, noise, max_iterations } => {
            let f = target.build()?;
            let dir = out_dir(&cli);
            ensure_writable(&dir)?;
            let rule = quadrature(&cli).build(&f)?;
            let f_test = rule.eval(|x| f.eval(x));
            let set = hyperbolic_cross(f.dim(), *degree)?;
            let data = DataSet::generate(&f, *m, *noise, cli.seed)?;
            let (a, rhs) = assemble_system(data.points.view(), &data.values, &set)?;
            let v = match variant {
                VariantArg::Qcbp => {
                    let eta = match eta {
                        Some(e) => *e,
                        None => reference_eta(&a, &reference_coefficients_from_values(&rule, &f_test, &set)?, &rhs)?,
                    };
                    Variant::Qcbp { eta }
                }
                VariantArg::Lasso => Variant::Lasso { mu: mu.map_or_else(|| mu_theoretical(*degree), Ok)? },
                VariantArg::SrLasso => Variant::SrLasso { mu: mu.map_or_else(|| mu_theoretical(*degree), Ok)? },
            };
            let problem = if *unweighted { CsProblem::new(a, rhs, None, v)? } else { CsProblem::weighted(a, rhs, v)? };
            let sol = solve(&problem, &SolverOptions { max_iterations: *max_iterations, ..Default::default() })?;
            let approx = sol.coefficients.eval_many(rule.nodes())?;
            let err = relative_l2_error_values(&rule, &f_test, &approx)?;
            let mut json = sol.to_json();
            json["relative_error"] = serde_json::json!(err);
            json["n"] = serde_json::json!(set.len());
            json["m"] = serde_json::json!(m);
            fs::write(dir.join("solution.json"), serde_json::to_vec_pretty(&json)?)?;
            let mut buf = Vec::new();
            sol.coefficients.write_csv(&mut buf)?;
            fs::write(dir.join("coefficients.csv"), buf)?;
            println!("n={} m={} iterations={} converged={} residual={} relative_error={}", set.len(), m, sol.iterations, sol.converged, g17(sol.residual_norm), g17(err));
            Ok(())
        }
        Command::TrainDnn { target, m, layers, width, epochs, tol, lr, lr_final, sgd, constant_lr, batch, init, noise } => {
            let f = target.build()?;
            let dir = out_dir(&cli);
            ensure_writable(&dir)?;
            let data = DataSet::generate(&f, *m, *noise, cli.seed)?;
            let cfg = TrainConfig {
                optimizer: if *sgd { Optimizer::Sgd } else { Optimizer::Adam },
                schedule: if *constant_lr { Schedule::Constant } else { Schedule::Exponential },
                tau_init: *lr,
                tau_final: if *constant_lr { *lr } else { *lr_final },
                k_final: *epochs,
                eps_tol: *tol,
                batch: match batch {
                    BatchArg::Full => Batch::Full,
                    BatchArg::Half => Batch::Half,
                    BatchArg::Quarter => Batch::Quarter,
                },
                init: match init {
                    InitArg::NormalFixed => InitStrategy::NormalFixed,
                    InitArg::NormalScaled => InitStrategy::NormalScaled,
                    InitArg::UniformScaled => InitStrategy::UniformScaled,
                },
                precision: cli.precision.map(Into::into).unwrap_or_default(),
                seed: cli.seed,
                ..Default::default()
            };
            let arch = Architecture::new(f.dim(), *layers, *width)?;
            let (net, trace) = train_network(arch, data.points.view(), &data.values, &cfg)?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            fs::write(dir.join("trace.csv"), buf)?;
            fs::write(dir.join("network.json"), serde_json::to_vec_pretty(&net.to_json())?)?;
            let rule = quadrature(&cli).build(&f)?;
            let f_test = rule.eval(|x| f.eval(x));
            let err = relative_l2_error_values(&rule, &f_test, &net.forward_batch(rule.nodes())?)?;
            println!(
                "arch={} epochs={} stop={} best_loss={} relative_error={} max_abs_weight={}",
                arch.label(),
                trace.epochs_run(),
                trace.stop_reason,
                g17(trace.best_loss()),
                g17(err),
                g17(net.max_abs_weight())
            );
            Ok(())
        }
        Command::Benchmark { config } => {
            let text = fs::read_to_string(config).map_err(|e| Error::invalid(format!("cannot read {}: {e}", config.display())))?;
            let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bad config: {e}")))?;
            if let Some(t) = cli.trials {
                spec.trials = t;
            }
            if let Some(level) = cli.quad_level {
                spec.quadrature = QuadratureChoice::SparseGrid { level };
            }
            if let Some(p) = cli.precision {
                spec.set_precision(p.into());
            }
            if cli.seed != 0 {
                spec.base_seed = cli.seed;
            }
            let dir = cli.out.clone().or_else(|| spec.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            ensure_writable(&dir)?;
            let records = run_experiment(&spec)?;
            let summary = summarize(&records);
            export_report(&records, &summary, &spec, &dir)?;
            print_summary(&summary)?;
            Ok(())
        }
        Command::Coeffs { target, degree } => {
            let f = target.build()?;
            let rule = quadrature(&cli).build(&f)?;
            let set = hyperbolic_cross(f.dim(), *degree)?;
            let c = reference_coefficients_from_values(&rule, &rule.eval(|x| f.eval(x)), &set)?;
            let mut buf = Vec::new();
            c.write_csv(&mut buf)?;
            if let Some(dir) = &cli.out {
                ensure_writable(dir)?;
                fs::write(dir.join("coefficients.csv"), &buf)?;
            }
            print!("{}", String::from_utf8_lossy(&buf));
            if f.dim() == 1 && *degree >= 3 {
                let (rho, intercept) = coefficient_decay_fit(&c, 1..=*degree as u32)?;
                eprintln!("decay fit: rho={} intercept={}", g17(rho), g17(intercept));
            }
            Ok(())
        }
        Command::Report { records } => {
            let recs = read_records(records)?;
            let summary = summarize(&recs);
            let dir = cli.out.clone().unwrap_or_else(|| records.clone());
            ensure_writable(&dir)?;
            let mut buf = Vec::new();
            write_summary(&summary, &mut buf)?;
            fs::write(dir.join("summary.csv"), buf)?;
            if !summary.rows.is_empty() {
                fs::write(dir.join("errors.svg"), crate::harness::report::error_plot(&summary, &records.display().to_string()))?;
            }
            print_summary(&summary)
        }
        Command::TheoryCheck { d, s, rip_m } => theory_check(*d, *s, *rip_m, cli.seed, cli.out.as_deref()),
    }
}

fn print_summary(summary: &crate::harness::SummaryTable) -> Result<()> {
    let mut buf = Vec::new();
    write_summary(summary, &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn theory_check(d: usize, s: usize, rip_m: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let k = intrinsic_lower_sparsity(d, s)?;
    let sf = s as f64;
    let k_ok = sf * sf / 4.0 <= k && k <= sf * sf;
    let n = hc_cardinality(d, s);
    let bounds = hc_cardinality_bounds(d, s);
    let mut lines = vec![
        format!("K({s}) = {} in d={d}", g17(k)),
        format!("s^2/4 <= K(s) <= s^2: {}", pass(k_ok)),
        format!("|HC_{s}| = {n}"),
    ];
    let names = ["2 s^3 4^d", "e^2 s^(2+log2 d)", "s (ln s + d ln 2)^(d-1)/(d-1)!"];
    for (b, name) in bounds.iter().zip(names) {
        lines.push(format!("|HC_s| <= {name} = {}: {}", g17(*b), pass(n as f64 <= *b)));
    }
    if rip_m > 0 {
        let set = hyperbolic_cross(d, s)?;
        let pts = sample_uniform(d, rip_m, seed);
        let (a, _) = assemble_system(pts.view(), &vec![0.0; rip_m], &set)?;
        let delta = lower_rip_constant(&a, s)?;
        lines.push(format!("lower RIP constant (n={}, m={rip_m}) = {}", set.len(), g17(delta)));
    }
    for l in &lines {
        println!("{l}");
    }
    if let Some(dir) = out {
        ensure_writable(dir)?;
        fs::write(dir.join("theory_check.txt"), lines.join("\n") + "\n")?;
    }
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
