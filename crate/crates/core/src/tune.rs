//! Grid search over the walk parameters `(p, q, r)`, scored on a validation
//! slice of the training split (see [`eval::validation_score`]).

use std::io::Write;
use std::time::Instant;

use log::info;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions, LabelSet, SplitSpec};
use crate::graph::HeteroNetwork;
use crate::train::{self, TrainConfig};
use crate::walk::{BiasTables, WalkConfig};

/// Values swept by default for every searched parameter.
pub const DEFAULT_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub search_p: bool,
    pub search_q: bool,
    pub search_r: bool,
    pub values: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            search_p: true,
            search_q: true,
            search_r: true,
            values: DEFAULT_GRID.to_vec(),
        }
    }
}

impl GridSpec {
    /// Parses a parameter list such as `"p,q,r"` or `"q,r"`.
    pub fn parse_params(list: &str, values: Vec<f64>) -> Result<GridSpec> {
        let mut spec = GridSpec {
            search_p: false,
            search_q: false,
            search_r: false,
            values,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "p" => spec.search_p = true,
                "q" => spec.search_q = true,
                "r" => spec.search_r = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown grid parameter {other:?}; expected p, q or r"
                    )))
                }
            }
        }
        if spec.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        Ok(spec)
    }

    /// Every `(p, q, r)` combination, with unsearched parameters taken from `base`.
    pub fn combinations(&self, base: &WalkConfig) -> Vec<(f64, f64, f64)> {
        let axis = |on: bool, fixed: f64| if on { self.values.clone() } else { vec![fixed] };
        let mut out = Vec::new();
        for &p in &axis(self.search_p, base.p) {
            for &q in &axis(self.search_q, base.q) {
                for &r in &axis(self.search_r, base.r) {
                    out.push((p, q, r));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the highest validation Micro-F1 (first on ties).
    pub best: usize,
    /// Target embeddings of the best configuration.
    pub best_embeddings: EmbeddingMatrix,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn write_tsv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "p\tq\tr\tval_micro_f1\tval_macro_f1\tseconds")?;
        for row in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.2}",
                row.p, row.q, row.r, row.micro_f1, row.macro_f1, row.seconds
            )?;
        }
        Ok(())
    }
}

/// Trains one model per grid point and keeps the best by validation score.
pub fn grid_search(
    net: &HeteroNetwork,
    labels: &LabelSet,
    base: &WalkConfig,
    tcfg: &TrainConfig,
    split: SplitSpec,
    opts: EvalOptions,
    grid: &GridSpec,
) -> Result<GridResult> {
    let combos = grid.combinations(base);
    let mut rows = Vec::with_capacity(combos.len());
    let mut best: Option<(usize, EmbeddingMatrix)> = None;
    for (p, q, r) in combos {
        let started = Instant::now();
        let wcfg = WalkConfig { p, q, r, ..base.clone() };
        let bias = BiasTables::new(net, &wcfg);
        let trained = train::train(net, &bias, &wcfg, tcfg)?;
        let emb = trained.target_embeddings(net);
        let (micro_f1, macro_f1) = eval::validation_score(&emb, None, labels, split, opts)?;
        let seconds = started.elapsed().as_secs_f64();
        info!("grid p={p} q={q} r={r}: validation micro={micro_f1:.4} macro={macro_f1:.4} ({seconds:.1}s)");
        let is_best = best
            .as_ref()
            .is_none_or(|(i, _)| micro_f1 > rows.get(*i).map_or(f64::NEG_INFINITY, |r: &GridRow| r.micro_f1));
        rows.push(GridRow {
            p,
            q,
            r,
            micro_f1,
            macro_f1,
            seconds,
        });
        if is_best {
            best = Some((rows.len() - 1, emb));
        }
    }
    let (best, best_embeddings) = best.ok_or_else(|| Error::Config("empty grid".into()))?;
    Ok(GridResult {
        rows,
        best,
        best_embeddings,
    })
}
