//! Biased second-order random walks over a [`HeteroNetwork`].
//!
//! Having moved `t -> v`, the walk picks the next node `x` among the
//! neighbors of `v` with unnormalized weight `β(t, v, x) = factor · e_vx`,
//! where the factor depends on the kinds of `t` and `v`:
//!
//! | `t`    | `v`    | `x == t` | `x` adjacent to `t` | otherwise                     |
//! |--------|--------|----------|---------------------|-------------------------------|
//! | target | target | `p`      | 1                   | `q` (target) / `r` (bridge)   |
//! | target | bridge | 0        | 1                   | 1                             |
//! | bridge | target | `p`      | 1                   | `q` (target) / `r` (bridge)   |
//!
//! The first step of a walk has no predecessor and is proportional to `e_vx`.

use std::io::Write;

use rand::Rng;

use crate::alias::{self, AliasTable};
use crate::error::{Error, Result};
use crate::graph::{HeteroNetwork, NodeId};
use crate::seed;

/// How second-step transitions are sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiasMode {
    /// One alias table per directed edge; `O(Σ deg(v)²)` memory.
    Precomputed,
    /// Rejection sampling from the first-step table; `O(|E|)` memory.
    OnTheFly,
}

impl BiasMode {
    /// Precomputed unless the tables would exceed `max_entries` alias slots.
    pub fn auto(net: &HeteroNetwork, max_entries: usize) -> BiasMode {
        if second_order_entries(net) <= max_entries {
            BiasMode::Precomputed
        } else {
            BiasMode::OnTheFly
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// Out-target parameter.
    pub q: f64,
    /// Out-bridge parameter.
    pub r: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub seed: u64,
    pub bias_mode: BiasMode,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            r: 1.0,
            walk_length: 150,
            walks_per_node: 10,
            window: 10,
            seed: 0,
            bias_mode: BiasMode::Precomputed,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q), ("r", self.r)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.walk_length < 2 {
            return Err(Error::Config(format!(
                "walk length must be at least 2, got {}",
                self.walk_length
            )));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sequence of adjacent nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[inline]
fn factor(net: &HeteroNetwork, t: u32, v: u32, x: u32, t_adj_x: bool, p: f64, q: f64, r: f64) -> f64 {
    match (net.is_bridge(t), net.is_bridge(v)) {
        (false, true) => {
            if x == t {
                0.0
            } else {
                1.0
            }
        }
        _ => {
            if x == t {
                p
            } else if t_adj_x {
                1.0
            } else if net.is_bridge(x) {
                r
            } else {
                q
            }
        }
    }
}

/// Unnormalized transition weight `β` for moving `v -> x` having arrived
/// from `prev` (`None` at the start of a walk).
pub fn transition_weight(
    net: &HeteroNetwork,
    prev: Option<NodeId>,
    v: NodeId,
    x: NodeId,
    cfg: &WalkConfig,
) -> Result<f64> {
    net.check(v)?;
    net.check(x)?;
    let Some(e_vx) = net.weight(v, x) else {
        return Err(Error::Validation(format!("{x} is not a neighbor of {v}")));
    };
    let Some(t) = prev else {
        return Ok(e_vx);
    };
    net.check(t)?;
    if net.weight(t, v).is_none() {
        return Err(Error::Validation(format!("{t} is not a neighbor of {v}")));
    }
    if net.is_bridge(t.0) && net.is_bridge(v.0) {
        return Err(Error::Validation(format!(
            "bridge-bridge step {t} -> {v} cannot occur"
        )));
    }
    let adj = net.is_adjacent(t.0, x.0);
    Ok(factor(net, t.0, v.0, x.0, adj, cfg.p, cfg.q, cfg.r) * e_vx)
}

/// `Σ_v deg(v)²`: alias slots needed to precompute every second-step table.
pub fn second_order_entries(net: &HeteroNetwork) -> usize {
    (0..net.node_count() as u32)
        .map(|v| net.row(v).0.len().pow(2))
        .sum()
}

/// Precomputed transition tables.
///
/// First-step tables share the CSR layout of the network. Second-step
/// tables are keyed by directed edge index; an empty table marks a dead end.
#[derive(Clone, Debug)]
pub struct BiasTables {
    first_prob: Vec<f64>,
    first_alias: Vec<u32>,
    second: Option<SecondStep>,
    p: f64,
    q: f64,
    r: f64,
}

#[derive(Clone, Debug)]
struct SecondStep {
    offsets: Vec<usize>,
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl BiasTables {
    /// Builds the tables for `cfg`'s `(p, q, r)` and bias mode.
    pub fn new(net: &HeteroNetwork, cfg: &WalkConfig) -> BiasTables {
        let m = net.directed_edge_count();
        let mut first_prob = vec![0.0; m];
        let mut first_alias = vec![0u32; m];
        for v in 0..net.node_count() as u32 {
            let start = net.row_start(v);
            let (_, ws) = net.row(v);
            let end = start + ws.len();
            alias::build_into(ws, &mut first_prob[start..end], &mut first_alias[start..end]);
        }
        let second = match cfg.bias_mode {
            BiasMode::Precomputed => Some(Self::second_step(net, cfg)),
            BiasMode::OnTheFly => None,
        };
        BiasTables {
            first_prob,
            first_alias,
            second,
            p: cfg.p,
            q: cfg.q,
            r: cfg.r,
        }
    }

    fn second_step(net: &HeteroNetwork, cfg: &WalkConfig) -> SecondStep {
        let m = net.directed_edge_count();
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0usize);
        let total = second_order_entries(net);
        let mut prob = Vec::with_capacity(total);
        let mut alias_buf = Vec::with_capacity(total);
        let mut weights = Vec::new();
        // stamp[x] == t + 1 marks x as a neighbor of t
        let mut stamp = vec![0u32; net.node_count()];
        for t in 0..net.node_count() as u32 {
            let (t_row, _) = net.row(t);
            for &x in t_row {
                stamp[x as usize] = t + 1;
            }
            for &v in t_row {
                let (v_row, v_w) = net.row(v);
                weights.clear();
                weights.extend(v_row.iter().zip(v_w).map(|(&x, &w)| {
                    let adj = stamp[x as usize] == t + 1;
                    factor(net, t, v, x, adj, cfg.p, cfg.q, cfg.r) * w
                }));
                let base = prob.len();
                prob.resize(base + weights.len(), 0.0);
                alias_buf.resize(base + weights.len(), 0);
                if !alias::build_into(&weights, &mut prob[base..], &mut alias_buf[base..]) {
                    prob.truncate(base);
                    alias_buf.truncate(base);
                }
                offsets.push(prob.len());
            }
        }
        SecondStep {
            offsets,
            prob,
            alias: alias_buf,
        }
    }

    pub fn mode(&self) -> BiasMode {
        if self.second.is_some() {
            BiasMode::Precomputed
        } else {
            BiasMode::OnTheFly
        }
    }

    /// First-step table of `v` (outcomes are `v`'s neighbors in row order).
    pub fn first_step(&self, net: &HeteroNetwork, v: NodeId) -> AliasTable {
        let start = net.row_start(v.0);
        let end = start + net.degree(v);
        table_from(&self.first_prob[start..end], &self.first_alias[start..end])
    }

    /// Second-step table for the directed edge `t -> v`, when precomputed.
    pub fn second_step_table(&self, net: &HeteroNetwork, t: NodeId, v: NodeId) -> Option<AliasTable> {
        let second = self.second.as_ref()?;
        let e = net.edge_index(t.0, v.0)?;
        let (a, b) = (second.offsets[e], second.offsets[e + 1]);
        Some(table_from(&second.prob[a..b], &second.alias[a..b]))
    }

    /// Exact next-step distribution over `v`'s neighbors (row order), as
    /// encoded by the sampler. Empty for a dead end.
    pub fn step_distribution(&self, net: &HeteroNetwork, prev: Option<NodeId>, v: NodeId) -> Vec<f64> {
        match prev {
            None => self.first_step(net, v).probabilities(),
            Some(t) => match self.second_step_table(net, t, v) {
                Some(table) => table.probabilities(),
                None => {
                    let (row, ws) = net.row(v.0);
                    let weights: Vec<f64> = row
                        .iter()
                        .zip(ws)
                        .map(|(&x, &w)| {
                            factor(net, t.0, v.0, x, net.is_adjacent(t.0, x), self.p, self.q, self.r) * w
                        })
                        .collect();
                    AliasTable::new(&weights).probabilities()
                }
            },
        }
    }

    /// Draws the node after `v` having arrived from `prev`, or `None` at a
    /// dead end.
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        net: &HeteroNetwork,
        prev: Option<NodeId>,
        v: NodeId,
        rng: &mut R,
    ) -> Result<Option<NodeId>> {
        net.check(v)?;
        let prev = match prev {
            None => None,
            Some(t) => {
                net.check(t)?;
                let edge = net
                    .edge_index(t.0, v.0)
                    .ok_or_else(|| Error::Validation(format!("{t} is not a neighbor of {v}")))?;
                Some((t.0, edge))
            }
        };
        Ok(self
            .next(net, prev, v.0, rng)
            .map(|j| NodeId(net.row(v.0).0[j])))
    }

    /// Samples the next row position from `v`, given the index of the
    /// directed edge that led to `v` (if any).
    #[inline]
    fn next<R: Rng + ?Sized>(
        &self,
        net: &HeteroNetwork,
        prev: Option<(u32, usize)>,
        v: u32,
        rng: &mut R,
    ) -> Option<usize> {
        let start = net.row_start(v);
        let deg = net.row(v).0.len();
        let first = |rng: &mut R| {
            alias::sample_slices(
                &self.first_prob[start..start + deg],
                &self.first_alias[start..start + deg],
                rng,
            )
        };
        let Some((t, edge)) = prev else {
            return first(rng);
        };
        if let Some(second) = &self.second {
            let (a, b) = (second.offsets[edge], second.offsets[edge + 1]);
            return alias::sample_slices(&second.prob[a..b], &second.alias[a..b], rng);
        }
        // Rejection sampling against the first-step proposal.
        let case2 = !net.is_bridge(t) && net.is_bridge(v);
        if case2 && deg == 1 {
            return None;
        }
        let bound = if case2 {
            1.0
        } else {
            self.p.max(self.q).max(self.r).max(1.0)
        };
        let row = net.row(v).0;
        loop {
            let j = first(rng)?;
            let x = row[j];
            let f = factor(net, t, v, x, net.is_adjacent(t, x), self.p, self.q, self.r);
            if f >= bound || rng.random::<f64>() * bound < f {
                return Some(j);
            }
        }
    }
}

fn table_from(prob: &[f64], alias: &[u32]) -> AliasTable {
    let weights = alias::probabilities_of(prob, alias);
    AliasTable::new(&weights)
}

/// Fills `out` with a walk of at most `len` nodes starting at `start`.
/// Returns false if the walk hit a dead end before reaching `len`.
pub(crate) fn walk_into<R: Rng + ?Sized>(
    net: &HeteroNetwork,
    bias: &BiasTables,
    start: u32,
    len: usize,
    rng: &mut R,
    out: &mut Vec<u32>,
) -> bool {
    out.clear();
    if len == 0 {
        return true;
    }
    out.push(start);
    let mut cur = start;
    let mut prev: Option<(u32, usize)> = None;
    while out.len() < len {
        let Some(j) = bias.next(net, prev, cur, rng) else {
            // an isolated start node is not a dead end, just a trivial walk
            return net.row(start).0.is_empty() && out.len() == 1;
        };
        let edge = net.row_start(cur) + j;
        let x = net.row(cur).0[j];
        prev = Some((cur, edge));
        cur = x;
        out.push(x);
    }
    true
}

/// One biased walk of at most `len` nodes from `start`.
pub fn random_walk<R: Rng + ?Sized>(
    net: &HeteroNetwork,
    bias: &BiasTables,
    start: NodeId,
    len: usize,
    rng: &mut R,
) -> Result<Walk> {
    net.check(start)?;
    let mut buf = Vec::with_capacity(len);
    walk_into(net, bias, start.0, len, rng, &mut buf);
    Ok(Walk {
        nodes: buf.into_iter().map(NodeId).collect(),
    })
}

/// Random stream for the walk started at `start` in round `round`.
pub fn walk_rng(base_seed: u64, round: usize, start: NodeId) -> seed::Rng {
    seed::rng(base_seed, &[seed::stream::WALK, round as u64, start.0 as u64])
}

/// Every walk of every round from `starts`, in start order within a round.
pub fn generate_walks(
    net: &HeteroNetwork,
    bias: &BiasTables,
    cfg: &WalkConfig,
    starts: &[NodeId],
) -> Vec<Walk> {
    let mut walks = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    let mut buf = Vec::with_capacity(cfg.walk_length);
    for round in 0..cfg.walks_per_node {
        for &s in starts {
            let mut rng = walk_rng(cfg.seed, round, s);
            walk_into(net, bias, s.0, cfg.walk_length, &mut rng, &mut buf);
            walks.push(Walk {
                nodes: buf.iter().copied().map(NodeId).collect(),
            });
        }
    }
    walks
}

/// Skip-gram pairs `(walk[i], walk[j])` for `0 < |i - j| <= window`, ordered
/// by `i` then `j`.
pub fn generate_training_pairs(walk: &Walk, window: usize) -> Vec<(NodeId, NodeId)> {
    let mut pairs = Vec::new();
    for_each_pair(&walk.nodes, window, |c, x| pairs.push((c, x)));
    pairs
}

#[inline]
pub(crate) fn for_each_pair<T: Copy>(walk: &[T], window: usize, mut f: impl FnMut(T, T)) {
    for i in 0..walk.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for j in lo..=hi {
            if j != i {
                f(walk[i], walk[j]);
            }
        }
    }
}

/// Pairs produced by a walk of `len` nodes.
pub fn pairs_per_walk(len: usize, window: usize) -> usize {
    (0..len)
        .map(|i| i.min(window) + (len - 1 - i).min(window))
        .sum()
}

/// Writes walks one per line; targets as integers, bridges as `w<word>`.
pub fn write_walks(net: &HeteroNetwork, walks: &[Walk], out: &mut impl Write) -> std::io::Result<()> {
    for walk in walks {
        let line: Vec<String> = walk.nodes.iter().map(|&v| net.label(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}
