//! Fully connected ReLU networks: initialization, batched forward and reverse
//! passes for the mean squared loss, Adam and SGD, and the checkpointed
//! training loop.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand, Zip};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Floating-point types the network can run in.
pub trait Real: LinalgScalar + ScalarOperand + PartialOrd + fmt::Debug + fmt::Display + Send + Sync {
    const PRECISION: Precision;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            _ => Err(Error::Parse(format!("unknown precision {s:?}"))),
        }
    }
}

/// `L` hidden blocks of constant width `N`: the network applies `L + 1`
/// ReLU layers of width `N` followed by an affine output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_layers: usize, width: usize) -> Result<Self> {
        if input_dim == 0 || width == 0 {
            return Err(Error::invalid("input dimension and width must be positive"));
        }
        Ok(Architecture { input_dim, hidden_layers, width })
    }

    /// `L / N`.
    pub fn ratio(&self) -> f64 {
        self.hidden_layers as f64 / self.width as f64
    }

    /// `(rows, cols)` of each weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.width, self.input_dim)];
        shapes.extend((0..self.hidden_layers).map(|_| (self.width, self.width)));
        shapes.push((1, self.width));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * (c + 1)).sum()
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.hidden_layers, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    arch: Architecture,
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Real> NetworkParams<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let shapes = arch.layer_shapes();
        NetworkParams {
            arch,
            weights: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            biases: shapes.iter().map(|&(r, _)| Array1::zeros(r)).collect(),
        }
    }

    pub fn from_parts(arch: Architecture, weights: Vec<Array2<T>>, biases: Vec<Array1<T>>) -> Result<Self> {
        let shapes = arch.layer_shapes();
        if weights.len() != shapes.len() || biases.len() != shapes.len() {
            return Err(Error::DimensionMismatch { expected: shapes.len(), found: weights.len().min(biases.len()) });
        }
        for ((w, b), (r, c)) in weights.iter().zip(&biases).zip(shapes) {
            if w.dim() != (r, c) || b.len() != r {
                return Err(Error::invalid(format!("layer shape {:?}/{} does not match {r}x{c}", w.dim(), b.len())));
            }
        }
        Ok(NetworkParams { arch, weights, biases })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.to_f64().is_finite())
    }

    fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.iter().flat_map(|w| w.iter().copied()).chain(self.biases.iter().flat_map(|b| b.iter().copied()))
    }

    /// Flattened parameters: each weight matrix row-major then its bias, layer by layer.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.arch.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().map(|v| v.to_f64()));
            out.extend(b.iter().map(|v| v.to_f64()));
        }
        out
    }

    pub fn from_flat(arch: Architecture, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.parameter_count() {
            return Err(Error::DimensionMismatch { expected: arch.parameter_count(), found: flat.len() });
        }
        let mut p = NetworkParams::zeros(arch);
        let mut it = flat.iter();
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = T::from_f64(*it.next().expect("length checked")));
        }
        Ok(p)
    }

    pub fn cast<U: Real>(&self) -> NetworkParams<U> {
        NetworkParams {
            arch: self.arch,
            weights: self.weights.iter().map(|w| w.mapv(|v| U::from_f64(v.to_f64()))).collect(),
            biases: self.biases.iter().map(|b| b.mapv(|v| U::from_f64(v.to_f64()))).collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let layers: Vec<serde_json::Value> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                serde_json::json!({
                    "rows": w.nrows(),
                    "cols": w.ncols(),
                    "weights": w.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                    "bias": b.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "architecture": self.arch, "precision": T::PRECISION, "layers": layers })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let arch: Architecture = serde_json::from_value(value["architecture"].clone())?;
        let layers = value["layers"].as_array().ok_or_else(|| Error::Parse("missing layers".into()))?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for layer in layers {
            let rows = layer["rows"].as_u64().ok_or_else(|| Error::Parse("layer rows".into()))? as usize;
            let cols = layer["cols"].as_u64().ok_or_else(|| Error::Parse("layer cols".into()))? as usize;
            let w: Vec<f64> = serde_json::from_value(layer["weights"].clone())?;
            let b: Vec<f64> = serde_json::from_value(layer["bias"].clone())?;
            let w = Array2::from_shape_vec((rows, cols), w.into_iter().map(T::from_f64).collect())
                .map_err(|e| Error::Parse(e.to_string()))?;
            weights.push(w);
            biases.push(Array1::from_iter(b.into_iter().map(T::from_f64)));
        }
        NetworkParams::from_parts(arch, weights, biases)
    }
}

/// Largest absolute weight or bias.
pub fn max_abs_weight<T: Real>(params: &NetworkParams<T>) -> f64 {
    params.values().fold(0.0f64, |m, v| m.max(v.to_f64().abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Normal(0, 0.01).
    #[default]
    #[serde(rename = "normal-0.01")]
    NormalFixed,
    /// Normal(0, 2/N).
    #[serde(rename = "normal-2/N")]
    NormalScaled,
    /// Uniform(−2/N, 2/N).
    #[serde(rename = "uniform-2/N")]
    UniformScaled,
}

/// Draws every weight and bias from the strategy's law.
pub fn init_params<T: Real>(arch: Architecture, strategy: InitStrategy, seed: u64) -> NetworkParams<T> {
    let mut rng = stream_rng(seed, Stream::Init, &[]);
    let n = arch.width as f64;
    let mut draw: Box<dyn FnMut() -> f64> = match strategy {
        InitStrategy::NormalFixed => {
            let d = Normal::new(0.0, 0.1).expect("valid normal");
            Box::new(move || d.sample(&mut rng))
        }
        InitStrategy::NormalScaled => {
            let d = Normal::new(0.0, (2.0 / n).sqrt()).expect("valid normal");
            Box::new(move || d.sample(&mut rng))
        }
        InitStrategy::UniformScaled => {
            let d = Uniform::new_inclusive(-2.0 / n, 2.0 / n).expect("valid range");
            Box::new(move || d.sample(&mut rng))
        }
    };
    let mut p = NetworkParams::zeros(arch);
    for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
        w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = T::from_f64(draw()));
    }
    p
}

fn relu_inplace<T: Real>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Network outputs for the rows of `x`, plus post-activation values of every
/// hidden layer when `keep` is set.
fn forward_pass<T: Real>(p: &NetworkParams<T>, x: ArrayView2<T>, keep: bool) -> (Array1<T>, Vec<Array2<T>>) {
    let last = p.weights.len() - 1;
    let mut acts = Vec::with_capacity(if keep { last } else { 0 });
    let mut h = x.dot(&p.weights[0].t()) + &p.biases[0];
    relu_inplace(&mut h);
    for l in 1..last {
        let mut next = h.dot(&p.weights[l].t()) + &p.biases[l];
        relu_inplace(&mut next);
        if keep {
            acts.push(std::mem::replace(&mut h, next));
        } else {
            h = next;
        }
    }
    let out = h.dot(&p.weights[last].row(0)) + p.biases[last][0];
    if keep {
        acts.push(h);
    }
    (out, acts)
}

fn check_input<T: Real>(p: &NetworkParams<T>, cols: usize) -> Result<()> {
    if cols != p.arch.input_dim {
        return Err(Error::DimensionMismatch { expected: p.arch.input_dim, found: cols });
    }
    if !p.is_finite() {
        return Err(Error::Numerical("network parameters are not finite".into()));
    }
    Ok(())
}

/// `Φ(x)` at a single point.
pub fn forward<T: Real>(p: &NetworkParams<T>, x: &[f64]) -> Result<f64> {
    check_input(p, x.len())?;
    let row = Array2::from_shape_fn((1, x.len()), |(_, j)| T::from_f64(x[j]));
    Ok(forward_pass(p, row.view(), false).0[0].to_f64())
}

/// `Φ` at every row of `x`.
pub fn forward_batch<T: Real>(p: &NetworkParams<T>, x: ArrayView2<T>) -> Result<Array1<T>> {
    check_input(p, x.ncols())?;
    Ok(forward_pass(p, x, false).0)
}

fn mean_square<T: Real>(resid: &Array1<T>) -> f64 {
    resid.iter().map(|r| r.to_f64() * r.to_f64()).sum::<f64>() / resid.len() as f64
}

/// Training loss `(1/m) Σ (Φ(x_i) − y_i)²`, bitwise equal to the value
/// reported by [`loss_and_grad`].
pub fn loss<T: Real>(p: &NetworkParams<T>, x: ArrayView2<T>, y: ArrayView1<T>) -> Result<f64> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::invalid("loss needs a nonempty data set with one value per point"));
    }
    check_input(p, x.ncols())?;
    Ok(mean_square(&(forward_pass(p, x, false).0 - y)))
}

/// `(1/m) Σ (Φ(x_i) − y_i)²` and its exact gradient, taking the ReLU
/// derivative at 0 to be 0.
pub fn loss_and_grad<T: Real>(p: &NetworkParams<T>, x: ArrayView2<T>, y: ArrayView1<T>) -> Result<(f64, NetworkParams<T>)> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::invalid("loss needs a nonempty data set with one value per point"));
    }
    if x.ncols() != p.arch.input_dim {
        return Err(Error::DimensionMismatch { expected: p.arch.input_dim, found: x.ncols() });
    }
    let m = x.nrows();
    let (out, acts) = forward_pass(p, x, true);
    let resid = out - y;
    let loss = mean_square(&resid);

    let mut grad = NetworkParams::zeros(p.arch);
    let last = p.weights.len() - 1;
    // d loss / d output, one entry per point
    let g_out = resid * T::from_f64(2.0 / m as f64);
    grad.biases[last][0] = g_out.sum();
    grad.weights[last].row_mut(0).assign(&acts[last - 1].t().dot(&g_out));
    let mut delta = {
        let w = p.weights[last].row(0);
        let mut d = Array2::zeros((m, p.arch.width));
        Zip::from(d.rows_mut()).and(&g_out).for_each(|mut row, &g| row.assign(&(&w * g)));
        d
    };
    for l in (0..last).rev() {
        // through the ReLU of layer l
        Zip::from(&mut delta).and(&acts[l]).for_each(|d, &a| {
            if a <= T::zero() {
                *d = T::zero();
            }
        });
        let input = if l == 0 { x } else { acts[l - 1].view() };
        grad.weights[l] = delta.t().dot(&input);
        grad.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            delta = delta.dot(&p.weights[l]);
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `τ_k = τ_init·b^{k/K_uf}` with `b = (τ_final/τ_init)^{K_uf/K_final}`.
    #[default]
    Exponential,
    /// `τ_k = τ_init`.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Batch {
    #[default]
    Full,
    Half,
    Quarter,
}

impl Batch {
    pub fn parts(self) -> usize {
        match self {
            Batch::Full => 1,
            Batch::Half => 2,
            Batch::Quarter => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
    pub tau_init: f64,
    pub tau_final: f64,
    pub k_final: usize,
    pub k_uf: usize,
    pub eps_tol: f64,
    pub batch: Batch,
    pub init: InitStrategy,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            schedule: Schedule::Exponential,
            beta1: 0.9,
            beta2: 0.999,
            delta: 1e-7,
            tau_init: 1e-3,
            tau_final: 1e-6,
            k_final: 30_000,
            k_uf: 1000,
            eps_tol: 1e-8,
            batch: Batch::Full,
            init: InitStrategy::NormalFixed,
            precision: Precision::Double,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_init > 0.0
            && self.tau_final > 0.0
            && self.tau_final <= self.tau_init
            && self.eps_tol > 0.0
            && self.k_final >= 1
            && self.k_uf >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.delta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("training configuration out of range"))
        }
    }
}

/// Learning rate after `k` epochs.
pub fn lr_schedule(k: usize, cfg: &TrainConfig) -> f64 {
    match cfg.schedule {
        Schedule::Constant => cfg.tau_init,
        Schedule::Exponential => {
            let b = (cfg.tau_final / cfg.tau_init).powf(cfg.k_uf as f64 / cfg.k_final as f64);
            cfg.tau_init * b.powf(k as f64 / cfg.k_uf as f64)
        }
    }
}

/// First and second moment estimates, kept in double precision.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub delta: f64,
    step: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(arch: Architecture, beta1: f64, beta2: f64, delta: f64) -> Self {
        let n = arch.parameter_count();
        AdamState { beta1, beta2, delta, step: 0, first: vec![0.0; n], second: vec![0.0; n] }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }
}

fn for_each_param<T: Real>(p: &mut NetworkParams<T>, g: &NetworkParams<T>, mut f: impl FnMut(usize, &mut T, T)) {
    let mut i = 0;
    for l in 0..p.weights.len() {
        for (v, &gv) in p.weights[l].iter_mut().zip(g.weights[l].iter()).chain(p.biases[l].iter_mut().zip(g.biases[l].iter())) {
            f(i, v, gv);
            i += 1;
        }
    }
}

/// One bias-corrected Adam update with learning rate `tau`.
pub fn adam_step<T: Real>(params: &mut NetworkParams<T>, state: &mut AdamState, grad: &NetworkParams<T>, tau: f64) {
    state.step += 1;
    let (b1, b2, delta) = (state.beta1, state.beta2, state.delta);
    let c1 = 1.0 - b1.powi(state.step);
    let c2 = 1.0 - b2.powi(state.step);
    let (first, second) = (&mut state.first, &mut state.second);
    for_each_param(params, grad, |i, v, g| {
        let g = g.to_f64();
        first[i] = b1 * first[i] + (1.0 - b1) * g;
        second[i] = b2 * second[i] + (1.0 - b2) * g * g;
        let step = tau * (first[i] / c1) / ((second[i] / c2).sqrt() + delta);
        if step != 0.0 {
            *v = T::from_f64(v.to_f64() - step);
        }
    });
}

/// `θ ← θ − τ g`.
pub fn sgd_step<T: Real>(params: &mut NetworkParams<T>, grad: &NetworkParams<T>, tau: f64) {
    let t = T::from_f64(tau);
    for_each_param(params, grad, |_, v, g| *v = *v - t * g);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Tolerance,
    Budget,
    Divergence,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Tolerance => "tolerance",
            StopReason::Budget => "budget",
            StopReason::Divergence => "divergence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full-data loss of the parameters after `epoch` epochs.
    pub loss: f64,
    pub lr: f64,
    pub checkpoint: bool,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
    pub wall_seconds: f64,
    pub stop_reason: StopReason,
}

impl TrainingTrace {
    /// `(epoch, loss)` of every checkpoint.
    pub fn checkpoints(&self) -> Vec<(usize, f64)> {
        self.epochs.iter().filter(|e| e.checkpoint).map(|e| (e.epoch, e.loss)).collect()
    }

    pub fn best_loss(&self) -> f64 {
        self.checkpoints().last().map_or(f64::NAN, |c| c.1)
    }

    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.loss)
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs.last().map_or(0, |e| e.epoch)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss,lr,checkpoint")?;
        for e in &self.epochs {
            writeln!(w, "{},{:.16e},{:.16e},{}", e.epoch, e.loss, e.lr, u8::from(e.checkpoint))?;
        }
        Ok(())
    }
}

/// Trains from `init_params(arch, cfg.init, cfg.seed)` on the points `x` and
/// values `y`, returning the parameters of the last checkpoint.
pub fn train<T: Real>(arch: Architecture, x: ArrayView2<T>, y: ArrayView1<T>, cfg: &TrainConfig) -> Result<(NetworkParams<T>, TrainingTrace)> {
    cfg.validate()?;
    if x.ncols() != arch.input_dim {
        return Err(Error::DimensionMismatch { expected: arch.input_dim, found: x.ncols() });
    }
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::invalid("training needs a nonempty data set with one value per point"));
    }
    let start = Instant::now();
    let mut params: NetworkParams<T> = init_params(arch, cfg.init, cfg.seed);
    let mut best = params.clone();
    let mut adam = AdamState::new(arch, cfg.beta1, cfg.beta2, cfg.delta);
    let mut shuffle = stream_rng(cfg.seed, Stream::Shuffle, &[]);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut epochs = Vec::new();
    let mut last_checkpoint = f64::INFINITY;

    let stop_reason = 'outer: loop {
        let k = epochs.len();
        let (loss, grad) = loss_and_grad(&params, x, y)?;
        let lr = lr_schedule(k, cfg);
        if !loss.is_finite() || !params.is_finite() {
            epochs.push(EpochRecord { epoch: k, loss, lr, checkpoint: false });
            break StopReason::Divergence;
        }
        let checkpoint = k == 0 || loss <= last_checkpoint / 8.0;
        if checkpoint {
            last_checkpoint = loss;
            best.clone_from(&params);
        }
        epochs.push(EpochRecord { epoch: k, loss, lr, checkpoint });
        if loss <= cfg.eps_tol {
            break StopReason::Tolerance;
        }
        if k >= cfg.k_final {
            break StopReason::Budget;
        }

        let parts = cfg.batch.parts().min(x.nrows());
        if parts == 1 {
            step(&mut params, &mut adam, &grad, lr, cfg.optimizer);
        } else {
            order.shuffle(&mut shuffle);
            let size = x.nrows().div_ceil(parts);
            for chunk in order.chunks(size) {
                let bx = x.select(Axis(0), chunk);
                let by = y.select(Axis(0), chunk);
                let (_, g) = loss_and_grad(&params, bx.view(), by.view())?;
                step(&mut params, &mut adam, &g, lr, cfg.optimizer);
                if !params.is_finite() {
                    epochs.push(EpochRecord { epoch: k + 1, loss: f64::NAN, lr, checkpoint: false });
                    break 'outer StopReason::Divergence;
                }
            }
        }
    };

    Ok((best, TrainingTrace { epochs, wall_seconds: start.elapsed().as_secs_f64(), stop_reason }))
}

fn step<T: Real>(params: &mut NetworkParams<T>, adam: &mut AdamState, grad: &NetworkParams<T>, lr: f64, optimizer: Optimizer) {
    match optimizer {
        Optimizer::Adam => adam_step(params, adam, grad, lr),
        Optimizer::Sgd => sgd_step(params, grad, lr),
    }
}

/// Network parameters in either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Single(NetworkParams<f32>),
    Double(NetworkParams<f64>),
}

impl Network {
    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Single(p) => p.architecture(),
            Network::Double(p) => p.architecture(),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            Network::Single(_) => Precision::Single,
            Network::Double(_) => Precision::Double,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        match self {
            Network::Single(p) => forward(p, x),
            Network::Double(p) => forward(p, x),
        }
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            Network::Single(p) => Ok(forward_batch(p, x.mapv(|v| v as f32).view())?.iter().map(|v| *v as f64).collect()),
            Network::Double(p) => Ok(forward_batch(p, x)?.to_vec()),
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        match self {
            Network::Single(p) => max_abs_weight(p),
            Network::Double(p) => max_abs_weight(p),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Network::Single(p) => p.to_json(),
            Network::Double(p) => p.to_json(),
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let precision: Precision = serde_json::from_value(value["precision"].clone()).unwrap_or_default();
        Ok(match precision {
            Precision::Single => Network::Single(NetworkParams::from_json(value)?),
            Precision::Double => Network::Double(NetworkParams::from_json(value)?),
        })
    }
}

/// Trains in the precision named by `cfg.precision`.
pub fn train_network(arch: Architecture, x: ArrayView2<f64>, y: &[f64], cfg: &TrainConfig) -> Result<(Network, TrainingTrace)> {
    let y = ArrayView1::from(y);
    match cfg.precision {
        Precision::Double => {
            let (p, t) = train(arch, x, y, cfg)?;
            Ok((Network::Double(p), t))
        }
        Precision::Single => {
            let xs = x.mapv(|v| v as f32);
            let ys = y.mapv(|v| v as f32);
            let (p, t) = train(arch, xs.view(), ys.view(), cfg)?;
            Ok((Network::Single(p), t))
        }
    }
}
