//! Node-classification evaluation: L2-normalized embeddings, repeated
//! stratified splits, one-vs-rest logistic regression and Micro/Macro-F1.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::for_each_record;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    MultiClass,
    MultiLabel,
}

/// Labels of target nodes. Label ids are dense; unlabelled nodes have an
/// empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    labels: Vec<Vec<u32>>,
    names: Vec<String>,
    mode: LabelMode,
}

impl LabelSet {
    /// Builds a label set over `label_count` labels. The mode is multi-class
    /// when every labelled node has exactly one label.
    pub fn new(labels: Vec<Vec<u32>>, label_count: usize) -> Result<LabelSet> {
        let mut labels = labels;
        for (node, set) in labels.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&l) = set.iter().find(|&&l| l as usize >= label_count) {
                return Err(Error::Validation(format!(
                    "node {node} has label {l} outside 0..{label_count}"
                )));
            }
        }
        let mode = if labels.iter().all(|s| s.len() <= 1) {
            LabelMode::MultiClass
        } else {
            LabelMode::MultiLabel
        };
        let names = (0..label_count).map(|l| l.to_string()).collect();
        Ok(LabelSet { labels, names, mode })
    }

    /// Reads `"node label [label...]"` lines. Label tokens are mapped to
    /// dense ids in sorted order (numerically when all tokens are integers).
    pub fn parse(path: impl AsRef<Path>) -> Result<LabelSet> {
        let path = path.as_ref();
        let mut raw: Vec<(usize, Vec<String>)> = Vec::new();
        for_each_record(path, |line, fields| {
            if fields.len() < 2 {
                return Err(Error::parse(path, line, "expected \"node label [label...]\""));
            }
            let node = fields[0]
                .parse::<usize>()
                .map_err(|_| Error::parse(path, line, format!("invalid node id {:?}", fields[0])))?;
            raw.push((node, fields[1..].iter().map(|s| s.to_string()).collect()));
            Ok(())
        })?;
        let mut tokens: Vec<String> = raw.iter().flat_map(|(_, l)| l.iter().cloned()).collect();
        tokens.sort();
        tokens.dedup();
        if tokens.iter().all(|t| t.parse::<i64>().is_ok()) {
            tokens.sort_by_key(|t| t.parse::<i64>().unwrap());
        }
        let ids: BTreeMap<&str, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        let n = raw.iter().map(|(v, _)| v + 1).max().unwrap_or(0);
        let mut labels = vec![Vec::new(); n];
        for (node, ls) in &raw {
            labels[*node].extend(ls.iter().map(|l| ids[l.as_str()]));
        }
        let mut set = LabelSet::new(labels, tokens.len())?;
        set.names = tokens;
        Ok(set)
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn label_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of node slots (labelled or not).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, node: usize) -> &[u32] {
        self.labels.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn labelled_nodes(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&v| !self.labels[v].is_empty())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.5,
            repeats: 10,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn l2_normalize(rows: &mut [Vec<f64>]) {
    for row in rows {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Binary logistic model `σ(w·x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BinaryModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        1.0 / (1.0 + (-z).exp())
    }
}

/// Per-label one-vs-rest classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct OvrModel {
    pub models: Vec<BinaryModel>,
}

impl OvrModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.score(x)).collect()
    }
}

pub const LOGREG_TOLERANCE: f64 = 1e-6;
pub const LOGREG_MAX_ITER: usize = 1000;

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `(1/C)·½‖w‖² + Σ log(1 + exp(-y·(w·x + b)))` with `y ∈ {-1, +1}`; the
/// intercept is not penalized.
pub fn logreg_objective(model: &BinaryModel, x: &[Vec<f64>], y: &[bool], c: f64) -> f64 {
    let reg = 0.5 / c * model.weights.iter().map(|w| w * w).sum::<f64>();
    reg + x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = model.bias + model.weights.iter().zip(xi).map(|(w, v)| w * v).sum::<f64>();
            log1p_exp(if yi { -z } else { z })
        })
        .sum::<f64>()
}

/// Fits one binary classifier by damped Newton iterations; returns the model
/// and the objective after every iteration (starting from `w = 0`).
pub fn fit_binary(x: &[Vec<f64>], y: &[bool], c: f64) -> (BinaryModel, Vec<f64>) {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i][j] } else { 1.0 });
    let target = DVector::from_fn(n, |i, _| if y[i] { 1.0 } else { 0.0 });
    let mut theta = DVector::<f64>::zeros(d + 1);
    let objective = |theta: &DVector<f64>| {
        let z = &design * theta;
        let reg = 0.5 / c * theta.rows(0, d).norm_squared();
        reg + z
            .iter()
            .zip(target.iter())
            .map(|(&zi, &ti)| log1p_exp(zi) - ti * zi)
            .sum::<f64>()
    };
    let mut current = objective(&theta);
    let mut trace = vec![current];
    for _ in 0..LOGREG_MAX_ITER {
        let z = &design * &theta;
        let p = z.map(|zi| 1.0 / (1.0 + (-zi).exp()));
        let mut grad = design.tr_mul(&(&p - &target));
        for j in 0..d {
            grad[j] += theta[j] / c;
        }
        if grad.norm() < LOGREG_TOLERANCE {
            break;
        }
        let s = p.map(|pi| (pi * (1.0 - pi)).max(1e-12));
        let weighted = DMatrix::from_fn(n, d + 1, |i, j| design[(i, j)] * s[i]);
        let mut hess = design.tr_mul(&weighted);
        for j in 0..d {
            hess[(j, j)] += 1.0 / c;
        }
        hess[(d, d)] += 1e-10;
        let direction = match hess.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let candidate = &theta + &direction * step;
            let value = objective(&candidate);
            if value <= current + 1e-4 * step * slope {
                theta = candidate;
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(current);
    }
    let model = BinaryModel {
        weights: theta.rows(0, d).iter().copied().collect(),
        bias: theta[d],
    };
    (model, trace)
}

/// One-vs-rest logistic regression over `labels` (one label set per row of
/// `features`). A label without both positive and negative examples gets a
/// constant classifier at its training prior.
pub fn fit_logreg_ovr(features: &[Vec<f64>], labels: &[&[u32]], label_count: usize, c: f64) -> OvrModel {
    let d = features.first().map_or(0, Vec::len);
    let models = (0..label_count as u32)
        .map(|l| {
            let y: Vec<bool> = labels.iter().map(|ls| ls.contains(&l)).collect();
            let pos = y.iter().filter(|&&b| b).count();
            if pos == 0 || pos == y.len() {
                if pos == 0 {
                    warn!("label {l} has no positive training examples; predicting its prior");
                }
                let prior = (pos as f64 / y.len().max(1) as f64).clamp(1e-12, 1.0 - 1e-12);
                return BinaryModel {
                    weights: vec![0.0; d],
                    bias: (prior / (1.0 - prior)).ln(),
                };
            }
            fit_binary(features, &y, c).0
        })
        .collect();
    OvrModel { models }
}

/// How multi-label predictions pick labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MultiLabelRule {
    /// Top-k scores where k is the node's true label count.
    TopKnown,
    /// Every label scoring at least the threshold.
    Threshold(f64),
}

/// Predicted label sets. Multi-class takes the argmax (lowest id on ties).
pub fn predict(
    model: &OvrModel,
    features: &[Vec<f64>],
    mode: LabelMode,
    rule: MultiLabelRule,
    true_label_counts: Option<&[usize]>,
) -> Result<Vec<Vec<u32>>> {
    let scores: Vec<Vec<f64>> = features.iter().map(|x| model.scores(x)).collect();
    predict_from_scores(&scores, mode, rule, true_label_counts)
}

pub fn predict_from_scores(
    scores: &[Vec<f64>],
    mode: LabelMode,
    rule: MultiLabelRule,
    true_label_counts: Option<&[usize]>,
) -> Result<Vec<Vec<u32>>> {
    match (mode, rule) {
        (LabelMode::MultiClass, _) => Ok(scores
            .iter()
            .map(|s| {
                let mut best = 0;
                for (l, &v) in s.iter().enumerate() {
                    if v > s[best] {
                        best = l;
                    }
                }
                vec![best as u32]
            })
            .collect()),
        (LabelMode::MultiLabel, MultiLabelRule::TopKnown) => {
            let counts = true_label_counts.ok_or_else(|| {
                Error::Evaluation(
                    "multi-label prediction needs the true label counts or an explicit threshold".into(),
                )
            })?;
            if counts.len() != scores.len() {
                return Err(Error::Evaluation("label count list does not match node count".into()));
            }
            Ok(scores
                .iter()
                .zip(counts)
                .map(|(s, &k)| {
                    let mut order: Vec<u32> = (0..s.len() as u32).collect();
                    order.sort_by(|&a, &b| s[b as usize].total_cmp(&s[a as usize]).then(a.cmp(&b)));
                    order.truncate(k);
                    order.sort_unstable();
                    order
                })
                .collect())
        }
        (LabelMode::MultiLabel, MultiLabelRule::Threshold(t)) => Ok(scores
            .iter()
            .map(|s| (0..s.len() as u32).filter(|&l| s[l as usize] >= t).collect())
            .collect()),
    }
}

/// `(micro, macro)` F1 of `predicted` against `truth` over `label_count`
/// labels. A label with no true positives, false positives or false
/// negatives scores 0.
pub fn micro_macro_f1(predicted: &[Vec<u32>], truth: &[&[u32]], label_count: usize) -> (f64, f64) {
    let mut tp = vec![0u64; label_count];
    let mut fp = vec![0u64; label_count];
    let mut fn_ = vec![0u64; label_count];
    for (pred, true_set) in predicted.iter().zip(truth) {
        for &l in pred {
            if true_set.contains(&l) {
                tp[l as usize] += 1;
            } else {
                fp[l as usize] += 1;
            }
        }
        for &l in true_set.iter() {
            if !pred.contains(&l) {
                fn_[l as usize] += 1;
            }
        }
    }
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = if label_count == 0 {
        0.0
    } else {
        (0..label_count).map(|l| f1(tp[l], fp[l], fn_[l])).sum::<f64>() / label_count as f64
    };
    (micro, macro_)
}

/// Splits `nodes` into `(train, test)`, both sorted.
///
/// Stratified splits group nodes by their lowest label and send
/// `round(fraction · size)` of each group to training, keeping at least one
/// node on each side of groups with two or more members. Singleton groups
/// go to training.
pub fn split_nodes(
    nodes: &[usize],
    labels: &LabelSet,
    fraction: f64,
    stratified: bool,
    rng: &mut seed::Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &v in nodes {
        let key = if stratified {
            labels.get(v).first().copied().unwrap_or(u32::MAX)
        } else {
            0
        };
        groups.entry(key).or_default().push(v);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, mut members) in groups {
        members.shuffle(rng);
        let n = members.len();
        let k = if n == 1 {
            warn!("label {label} has a single member; assigning it to training");
            1
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `(micro, macro)` per repeat, in repeat order.
    pub repeats: Vec<(f64, f64)>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub split: SplitSpec,
    pub c: f64,
}

impl MetricsReport {
    fn from_repeats(repeats: Vec<(f64, f64)>, split: SplitSpec, c: f64) -> MetricsReport {
        let n = repeats.len().max(1) as f64;
        let micro_f1 = repeats.iter().map(|r| r.0).sum::<f64>() / n;
        let macro_f1 = repeats.iter().map(|r| r.1).sum::<f64>() / n;
        MetricsReport {
            repeats,
            micro_f1,
            macro_f1,
            split,
            c,
        }
    }

    /// TSV with one row per repeat and a trailing `mean` row.
    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "repeat\tmicro_f1\tmacro_f1")?;
        for (i, (mi, ma)) in self.repeats.iter().enumerate() {
            writeln!(out, "{i}\t{mi:.6}\t{ma:.6}")?;
        }
        writeln!(out, "mean\t{:.6}\t{:.6}", self.micro_f1, self.macro_f1)
    }

    /// `micro=<x> macro=<y>`
    pub fn summary(&self) -> String {
        format!("micro={:.6} macro={:.6}", self.micro_f1, self.macro_f1)
    }
}

/// Evaluation settings beyond the split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub c: f64,
    pub rule: MultiLabelRule,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            c: 100.0,
            rule: MultiLabelRule::TopKnown,
        }
    }
}

struct Prepared {
    features: Vec<Vec<f64>>,
    nodes: Vec<usize>,
}

fn prepare(emb: &EmbeddingMatrix, present: Option<&[bool]>, labels: &LabelSet) -> Result<Prepared> {
    let nodes: Vec<usize> = labels
        .labelled_nodes()
        .into_iter()
        .filter(|&v| v < emb.rows() && present.is_none_or(|p| p[v]))
        .collect();
    let missing = labels.labelled_nodes().len() - nodes.len();
    if missing > 0 {
        warn!("{missing} labelled nodes have no embedding and are skipped");
    }
    if nodes.len() < 2 {
        return Err(Error::Evaluation("need at least two labelled nodes with embeddings".into()));
    }
    let mut features: Vec<Vec<f64>> = (0..emb.rows())
        .map(|i| emb.row(i).iter().map(|&x| x as f64).collect())
        .collect();
    l2_normalize(&mut features);
    Ok(Prepared { features, nodes })
}

fn fit_and_score(
    prep: &Prepared,
    labels: &LabelSet,
    train: &[usize],
    test: &[usize],
    opts: EvalOptions,
) -> Result<(f64, f64)> {
    let x_train: Vec<Vec<f64>> = train.iter().map(|&v| prep.features[v].clone()).collect();
    let y_train: Vec<&[u32]> = train.iter().map(|&v| labels.get(v)).collect();
    let model = fit_logreg_ovr(&x_train, &y_train, labels.label_count(), opts.c);
    let x_test: Vec<Vec<f64>> = test.iter().map(|&v| prep.features[v].clone()).collect();
    let truth: Vec<&[u32]> = test.iter().map(|&v| labels.get(v)).collect();
    let counts: Vec<usize> = truth.iter().map(|t| t.len()).collect();
    let predicted = predict(&model, &x_test, labels.mode(), opts.rule, Some(&counts))?;
    Ok(micro_macro_f1(&predicted, &truth, labels.label_count()))
}

/// Repeated split / fit / score. Rows of `emb` are indexed by target id;
/// `present` masks rows that carry no embedding.
pub fn evaluate(
    emb: &EmbeddingMatrix,
    present: Option<&[bool]>,
    labels: &LabelSet,
    split: SplitSpec,
    opts: EvalOptions,
) -> Result<MetricsReport> {
    split.validate()?;
    let prep = prepare(emb, present, labels)?;
    let repeats = (0..split.repeats)
        .map(|r| {
            let mut rng = seed::rng(split.seed, &[seed::stream::SPLIT, r as u64]);
            let (train, test) = split_nodes(&prep.nodes, labels, split.train_fraction, split.stratified, &mut rng);
            fit_and_score(&prep, labels, &train, &test, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_repeats(repeats, split, opts.c))
}

/// Fraction of the training split held out for model selection.
pub const VALIDATION_FRACTION: f64 = 0.1;

/// Model-selection score that never looks at the test side: split once at
/// `split.train_fraction`, hold out [`VALIDATION_FRACTION`] of the training
/// side, fit on the rest and score the held-out part.
pub fn validation_score(
    emb: &EmbeddingMatrix,
    present: Option<&[bool]>,
    labels: &LabelSet,
    split: SplitSpec,
    opts: EvalOptions,
) -> Result<(f64, f64)> {
    split.validate()?;
    let prep = prepare(emb, present, labels)?;
    let mut rng = seed::rng(split.seed, &[seed::stream::SPLIT, u64::MAX]);
    let (train, _test) = split_nodes(&prep.nodes, labels, split.train_fraction, split.stratified, &mut rng);
    let (fit, held_out) = split_nodes(&train, labels, 1.0 - VALIDATION_FRACTION, split.stratified, &mut rng);
    fit_and_score(&prep, labels, &fit, &held_out, opts)
}
