//! Skip-gram with negative sampling over biased walks.
//!
//! Every pair `(center, context)` taken from a walk window contributes
//!
//! ```text
//! loss = -log σ(ctx · c) - Σ_j log σ(-neg_j · c)
//! ```
//!
//! where the `neg_j` are drawn from a degree^0.75 noise distribution. By
//! default all roles share one vector per node; pairs whose center is a
//! bridge node are stepped with `λ₁ · lr`.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::alias::AliasTable;
use crate::embedding::{init_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{HeteroNetwork, NodeId};
use crate::seed;
use crate::walk::{self, BiasTables, WalkConfig};

/// Scores are clamped to this magnitude before exponentiation.
pub const SCORE_CLAMP: f64 = 30.0;

/// Largest network [`exact_objective`] will evaluate.
pub const EXACT_OBJECTIVE_MAX_NODES: usize = 1000;

const NEGATIVE_ATTEMPTS: usize = 10;
const LR_FLOOR: f64 = 1e-4;

/// Which nodes start walks in each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkStarts {
    /// Targets and bridges.
    All,
    Targets,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub negatives: usize,
    /// Initial learning rate; decays linearly to `lr · 1e-4`.
    pub lr: f64,
    /// Step-size multiplier for pairs centered on a bridge node.
    pub lambda1: f64,
    pub seed: u64,
    pub walk_starts: WalkStarts,
    pub workers: usize,
    /// Separate context matrix (standard two-matrix SGNS) instead of a
    /// single shared vector per node.
    pub context_matrix: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            negatives: 5,
            lr: 0.025,
            lambda1: 1.0,
            seed: 0,
            walk_starts: WalkStarts::All,
            workers: 1,
            context_matrix: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.negatives < 1 {
            return Err(Error::Config("negatives must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::Config(format!("lambda1 must be non-negative, got {}", self.lambda1)));
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Negative-sampling distribution: `degree(v)^0.75` over nodes with at
/// least one neighbor.
#[derive(Clone, Debug)]
pub struct NoiseDistribution {
    table: AliasTable,
    nodes: Vec<u32>,
}

impl NoiseDistribution {
    pub fn new(net: &HeteroNetwork) -> NoiseDistribution {
        let nodes: Vec<u32> = (0..net.node_count() as u32)
            .filter(|&v| net.degree(NodeId(v)) > 0)
            .collect();
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&v| (net.degree(NodeId(v)) as f64).powf(0.75))
            .collect();
        NoiseDistribution {
            table: AliasTable::new(&weights),
            nodes,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        self.table.sample(rng).map(|i| NodeId(self.nodes[i]))
    }

    /// `(node, probability)` for every node in the support.
    pub fn probabilities(&self) -> Vec<(NodeId, f64)> {
        self.nodes
            .iter()
            .zip(self.table.probabilities())
            .map(|(&v, p)| (NodeId(v), p))
            .collect()
    }
}

#[inline]
fn clamp(s: f64) -> f64 {
    s.clamp(-SCORE_CLAMP, SCORE_CLAMP)
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-clamp(s)).exp())
}

/// `-log σ(s)`, evaluated on the clamped score.
#[inline]
fn neg_log_sigmoid(s: f64) -> f64 {
    (-clamp(s)).exp().ln_1p()
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one pair.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot64(context, center))
        + negatives
            .iter()
            .map(|n| neg_log_sigmoid(-dot64(n, center)))
            .sum::<f64>()
}

/// Gradients of [`pair_loss`] with respect to each argument.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let pos = sigmoid(dot64(context, center)) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|x| pos * x).collect();
    let g_context = center.iter().map(|x| pos * x).collect();
    let g_negs = negatives
        .iter()
        .map(|n| {
            let s = sigmoid(dot64(n, center));
            for (g, x) in g_center.iter_mut().zip(n.iter()) {
                *g += s * x;
            }
            center.iter().map(|x| s * x).collect()
        })
        .collect();
    PairGradient {
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(y: &mut [f32], alpha: f32, x: &[f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Row storage the update kernel reads from and adds to.
trait Rows {
    fn dim(&self) -> usize;
    fn read(&self, row: usize, out: &mut [f32]);
    fn add(&mut self, row: usize, alpha: f32, x: &[f32]);
}

impl Rows for EmbeddingMatrix {
    fn dim(&self) -> usize {
        EmbeddingMatrix::dim(self)
    }

    #[inline]
    fn read(&self, row: usize, out: &mut [f32]) {
        out.copy_from_slice(self.row(row));
    }

    #[inline]
    fn add(&mut self, row: usize, alpha: f32, x: &[f32]) {
        axpy(self.row_mut(row), alpha, x);
    }
}

/// Lock-free shared matrix for asynchronous workers. Each cell is an atomic
/// `f32`; concurrent read-modify-write sequences may lose updates, but no
/// cell is ever torn.
struct SharedRows {
    dim: usize,
    cells: Vec<AtomicU32>,
}

impl SharedRows {
    fn new(m: &EmbeddingMatrix) -> Self {
        SharedRows {
            dim: m.dim(),
            cells: m.as_slice().iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
        }
    }

    fn into_matrix(self, rows: usize) -> EmbeddingMatrix {
        let mut m = EmbeddingMatrix::zeros(rows, self.dim);
        for (dst, c) in m.as_mut_slice().iter_mut().zip(self.cells) {
            *dst = f32::from_bits(c.into_inner());
        }
        m
    }
}

/// Per-worker handle to [`SharedRows`].
struct SharedView<'a>(&'a SharedRows);

impl Rows for SharedView<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn read(&self, row: usize, out: &mut [f32]) {
        let cells = &self.0.cells[row * self.0.dim..(row + 1) * self.0.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, row: usize, alpha: f32, x: &[f32]) {
        let cells = &self.0.cells[row * self.0.dim..(row + 1) * self.0.dim];
        for (c, xi) in cells.iter().zip(x) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + alpha * xi;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

/// Scratch buffers for one worker.
struct Scratch {
    center: Vec<f32>,
    context: Vec<f32>,
    delta: Vec<f32>,
    negs: Vec<f32>,
    neg_ids: Vec<u32>,
    neg_coef: Vec<f32>,
}

impl Scratch {
    fn new(dim: usize, k: usize) -> Self {
        Scratch {
            center: vec![0.0; dim],
            context: vec![0.0; dim],
            delta: vec![0.0; dim],
            negs: vec![0.0; dim * k],
            neg_ids: Vec::with_capacity(k),
            neg_coef: Vec::with_capacity(k),
        }
    }
}

/// Draws up to `k` negatives, resampling any equal to `center` or `context`.
fn draw_negatives<R: Rng + ?Sized>(
    noise: &NoiseDistribution,
    k: usize,
    center: u32,
    context: u32,
    rng: &mut R,
    out: &mut Vec<u32>,
) {
    out.clear();
    for _ in 0..k {
        for _ in 0..NEGATIVE_ATTEMPTS {
            match noise.sample(rng) {
                Some(NodeId(n)) if n != center && n != context => {
                    out.push(n);
                    break;
                }
                Some(_) => continue,
                None => return,
            }
        }
    }
}

/// One gradient step on `(center, context)` with the given negatives.
/// All gradients are evaluated at the current parameters before any row is
/// written, so repeated rows accumulate exactly.
fn apply_pair<I: Rows, O: Rows>(
    input: &mut I,
    output: Option<&mut O>,
    center: u32,
    context: u32,
    step: f32,
    s: &mut Scratch,
) {
    let d = input.dim();
    input.read(center as usize, &mut s.center);
    // Without a context matrix all roles read the input rows.
    let out_rows: &dyn Fn(u32, &mut [f32]) = match &output {
        Some(o) => &|r, buf| o.read(r as usize, buf),
        None => &|r, buf| input.read(r as usize, buf),
    };
    out_rows(context, &mut s.context);
    let g_pos = step * (1.0 - sigmoid(dot(&s.center, &s.context) as f64) as f32);
    s.delta.iter_mut().zip(&s.context).for_each(|(dl, x)| *dl = g_pos * x);
    s.neg_coef.clear();
    for (j, &n) in s.neg_ids.iter().enumerate() {
        let buf = &mut s.negs[j * d..(j + 1) * d];
        out_rows(n, buf);
        let g = -step * sigmoid(dot(&s.center, buf) as f64) as f32;
        axpy(&mut s.delta, g, buf);
        s.neg_coef.push(g);
    }
    match output {
        Some(o) => {
            o.add(context as usize, g_pos, &s.center);
            for (&n, &g) in s.neg_ids.iter().zip(&s.neg_coef) {
                o.add(n as usize, g, &s.center);
            }
        }
        None => {
            input.add(context as usize, g_pos, &s.center);
            for (&n, &g) in s.neg_ids.iter().zip(&s.neg_coef) {
                input.add(n as usize, g, &s.center);
            }
        }
    }
    input.add(center as usize, 1.0, &s.delta);
}

/// Trainable parameters: the node matrix and, optionally, a separate
/// context matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub embeddings: EmbeddingMatrix,
    pub context: Option<EmbeddingMatrix>,
}

impl Model {
    /// Standard-normal initialization. The context matrix, when used,
    /// starts at zero.
    pub fn init(net: &HeteroNetwork, cfg: &TrainConfig) -> Model {
        let mut rng = seed::rng(cfg.seed, &[seed::stream::INIT]);
        let embeddings = init_embeddings(net.node_count(), cfg.dim, &mut rng);
        let context = cfg
            .context_matrix
            .then(|| EmbeddingMatrix::zeros(net.node_count(), cfg.dim));
        Model { embeddings, context }
    }
}

/// Step size for a pair: `λ₁ · lr` when the center is a bridge node.
#[inline]
fn step_size(net: &HeteroNetwork, center: u32, lr: f64, lambda1: f64) -> f64 {
    if net.is_bridge(center) {
        lambda1 * lr
    } else {
        lr
    }
}

/// One SGD step on a single pair: samples negatives from `noise` and
/// updates the center, context and negative rows. Returns the negatives used.
pub fn sgd_step<R: Rng + ?Sized>(
    model: &mut Model,
    net: &HeteroNetwork,
    pair: (NodeId, NodeId),
    noise: &NoiseDistribution,
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut R,
) -> Vec<NodeId> {
    let mut scratch = Scratch::new(cfg.dim, cfg.negatives);
    let (c, x) = (pair.0 .0, pair.1 .0);
    draw_negatives(noise, cfg.negatives, c, x, rng, &mut scratch.neg_ids);
    let step = step_size(net, c, lr, cfg.lambda1) as f32;
    if step != 0.0 {
        apply_pair(&mut model.embeddings, model.context.as_mut(), c, x, step, &mut scratch);
    }
    scratch.neg_ids.iter().map(|&n| NodeId(n)).collect()
}

/// Like [`sgd_step`] with caller-chosen negatives.
pub fn sgd_step_with(
    model: &mut Model,
    net: &HeteroNetwork,
    pair: (NodeId, NodeId),
    negatives: &[NodeId],
    cfg: &TrainConfig,
    lr: f64,
) {
    let mut scratch = Scratch::new(cfg.dim, negatives.len());
    scratch.neg_ids.extend(negatives.iter().map(|n| n.0));
    let step = step_size(net, pair.0 .0, lr, cfg.lambda1) as f32;
    if step != 0.0 {
        apply_pair(
            &mut model.embeddings,
            model.context.as_mut(),
            pair.0 .0,
            pair.1 .0,
            step,
            &mut scratch,
        );
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    pub walks: u64,
    pub dead_ends: u64,
    pub pairs: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub stats: TrainStats,
}

impl Trained {
    /// Rows of the target nodes.
    pub fn target_embeddings(&self, net: &HeteroNetwork) -> EmbeddingMatrix {
        self.model.embeddings.head(net.target_count())
    }
}

fn walk_starts(net: &HeteroNetwork, which: WalkStarts) -> Vec<u32> {
    let n = match which {
        WalkStarts::All => net.node_count(),
        WalkStarts::Targets => net.target_count(),
    };
    (0..n as u32).collect()
}

/// Learning rate after `done` of `total` pairs.
#[inline]
fn decayed(lr: f64, done: u64, total: u64) -> f64 {
    let frac = if total == 0 {
        1.0
    } else {
        1.0 - done as f64 / total as f64
    };
    lr * frac.max(LR_FLOOR)
}

/// Runs `walks_per_node` rounds. Each round shuffles the start nodes, walks
/// once from each, and takes an SGD step on every window pair.
///
/// With one worker the result is a pure function of the inputs. With more,
/// workers update a shared matrix without locks.
pub fn train(
    net: &HeteroNetwork,
    bias: &BiasTables,
    wcfg: &WalkConfig,
    tcfg: &TrainConfig,
) -> Result<Trained> {
    wcfg.validate()?;
    tcfg.validate()?;
    let model = Model::init(net, tcfg);
    train_from(model, net, bias, wcfg, tcfg)
}

/// [`train`] starting from an existing model.
pub fn train_from(
    mut model: Model,
    net: &HeteroNetwork,
    bias: &BiasTables,
    wcfg: &WalkConfig,
    tcfg: &TrainConfig,
) -> Result<Trained> {
    let started = Instant::now();
    let noise = NoiseDistribution::new(net);
    let mut starts = walk_starts(net, tcfg.walk_starts);
    let total_pairs = (wcfg.walks_per_node * starts.len()) as u64
        * walk::pairs_per_walk(wcfg.walk_length, wcfg.window) as u64;
    let done = AtomicU64::new(0);
    let mut stats = TrainStats::default();
    let shared = (tcfg.workers > 1).then(|| {
        (
            SharedRows::new(&model.embeddings),
            model.context.as_ref().map(SharedRows::new),
        )
    });

    for round in 0..wcfg.walks_per_node {
        starts.shuffle(&mut seed::rng(tcfg.seed, &[seed::stream::SHUFFLE, round as u64]));
        let round_stats = match &shared {
            None => {
                let out = model.context.as_mut();
                run_walks(net, bias, &noise, wcfg, tcfg, round, &starts, &done, total_pairs, &mut model.embeddings, out)
            }
            Some((input, output)) => {
                let chunk = starts.len().div_ceil(tcfg.workers).max(1);
                std::thread::scope(|scope| {
                    let handles: Vec<_> = starts
                        .chunks(chunk)
                        .map(|part| {
                            let done = &done;
                            let noise = &noise;
                            scope.spawn(move || {
                                let mut inp = SharedView(input);
                                let mut out = output.as_ref().map(SharedView);
                                run_walks(net, bias, noise, wcfg, tcfg, round, part, done, total_pairs, &mut inp, out.as_mut())
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("training worker panicked"))
                        .fold(TrainStats::default(), |a, b| TrainStats {
                            walks: a.walks + b.walks,
                            dead_ends: a.dead_ends + b.dead_ends,
                            pairs: a.pairs + b.pairs,
                            seconds: 0.0,
                        })
                })
            }
        };
        stats.walks += round_stats.walks;
        stats.dead_ends += round_stats.dead_ends;
        stats.pairs += round_stats.pairs;
        debug!(
            "round {}/{}: {} pairs, lr {:.6}",
            round + 1,
            wcfg.walks_per_node,
            round_stats.pairs,
            decayed(tcfg.lr, done.load(Ordering::Relaxed), total_pairs)
        );
    }
    if let Some((input, output)) = shared {
        model.embeddings = input.into_matrix(net.node_count());
        model.context = output.map(|o| o.into_matrix(net.node_count()));
    }
    stats.seconds = started.elapsed().as_secs_f64();
    info!(
        "trained on {} pairs from {} walks ({} dead ends) in {:.2}s",
        stats.pairs, stats.walks, stats.dead_ends, stats.seconds
    );
    if !model.embeddings.is_finite() {
        return Err(Error::Config(
            "training diverged to non-finite values; lower the learning rate".into(),
        ));
    }
    Ok(Trained { model, stats })
}

#[allow(clippy::too_many_arguments)]
fn run_walks<I: Rows, O: Rows>(
    net: &HeteroNetwork,
    bias: &BiasTables,
    noise: &NoiseDistribution,
    wcfg: &WalkConfig,
    tcfg: &TrainConfig,
    round: usize,
    starts: &[u32],
    done: &AtomicU64,
    total_pairs: u64,
    input: &mut I,
    mut output: Option<&mut O>,
) -> TrainStats {
    let mut stats = TrainStats::default();
    let mut scratch = Scratch::new(tcfg.dim, tcfg.negatives);
    let mut buf = Vec::with_capacity(wcfg.walk_length);
    for &start in starts {
        let mut walk_rng = walk::walk_rng(wcfg.seed, round, NodeId(start));
        if !walk::walk_into(net, bias, start, wcfg.walk_length, &mut walk_rng, &mut buf) {
            stats.dead_ends += 1;
        }
        stats.walks += 1;
        let lr = decayed(tcfg.lr, done.load(Ordering::Relaxed), total_pairs);
        let mut rng = seed::rng(tcfg.seed, &[seed::stream::TRAIN, round as u64, start as u64]);
        let mut pairs = 0u64;
        walk::for_each_pair(&buf, wcfg.window, |c, x| {
            pairs += 1;
            draw_negatives(noise, tcfg.negatives, c, x, &mut rng, &mut scratch.neg_ids);
            let step = step_size(net, c, lr, tcfg.lambda1) as f32;
            if step != 0.0 {
                apply_pair(input, output.as_deref_mut(), c, x, step, &mut scratch);
            }
        });
        stats.pairs += pairs;
        done.fetch_add(pairs, Ordering::Relaxed);
    }
    stats
}

/// Exact softmax log-likelihood of `pairs` under `emb`:
/// `Σ w(c) · log(exp(θ_x·θ_c) / Σ_v exp(θ_v·θ_c))`, with `w(c) = λ₁` for
/// bridge centers (ids `>= target_count`) and 1 otherwise.
pub fn exact_objective(
    emb: &EmbeddingMatrix,
    target_count: usize,
    pairs: &[(NodeId, NodeId)],
    lambda1: f64,
) -> Result<f64> {
    let n = emb.rows();
    if n > EXACT_OBJECTIVE_MAX_NODES {
        return Err(Error::Refused(format!(
            "exact objective is limited to {EXACT_OBJECTIVE_MAX_NODES} nodes, got {n}"
        )));
    }
    let rows = emb.to_f64_rows();
    let mut log_partition = vec![None; n];
    let mut total = 0.0;
    for &(c, x) in pairs {
        if c.index() >= n || x.index() >= n {
            return Err(Error::NodeOutOfRange {
                node: c.index().max(x.index()),
                count: n,
            });
        }
        let center = &rows[c.index()];
        let lz = *log_partition[c.index()].get_or_insert_with(|| {
            let scores: Vec<f64> = rows.iter().map(|r| dot64(r, center)).collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
        });
        let weight = if c.index() >= target_count { lambda1 } else { 1.0 };
        total += weight * (dot64(&rows[x.index()], center) - lz);
    }
    Ok(total)
}
