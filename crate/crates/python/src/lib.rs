//! Python bindings: networks, walks, training and evaluation.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use geri_core::embedding::{write_embeddings, Format};
use geri_core::eval::{self, EvalOptions};
use geri_core::graph::NodeKind;
use geri_core::walk::{random_walk, transition_weight};
use geri_core::{
    seed, BiasMode, BiasTables, EmbeddingMatrix, Error, HeteroNetwork, InfoNetwork, LabelSet,
    NodeId, SplitSpec, TrainConfig, WalkConfig, WalkStarts,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn walk_config(p: f64, q: f64, r: f64) -> WalkConfig {
    WalkConfig {
        p,
        q,
        r,
        ..WalkConfig::default()
    }
}

/// Heterogeneous network: target nodes followed by bridge nodes.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    inner: HeteroNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Builds the network from an edge list and text files.
    #[staticmethod]
    #[pyo3(signature = (edges, node_text, edge_text=None, no_text=false))]
    fn from_files(edges: &str, node_text: &str, edge_text: Option<&str>, no_text: bool) -> PyResult<Self> {
        let info = InfoNetwork::parse(edges, node_text, edge_text.map(std::path::Path::new)).map_err(py_err)?;
        let info = if no_text { info.without_text() } else { info };
        Ok(PyNetwork {
            inner: HeteroNetwork::build(&info),
        })
    }

    /// Reads a network written by `save` (or `geri convert`).
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: HeteroNetwork::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn target_count(&self) -> usize {
        self.inner.target_count()
    }

    #[getter]
    fn bridge_count(&self) -> usize {
        self.inner.bridge_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// "target" or "bridge".
    fn kind(&self, v: u32) -> PyResult<&'static str> {
        self.inner.check(NodeId(v)).map_err(py_err)?;
        Ok(match self.inner.kind(NodeId(v)) {
            NodeKind::Target => "target",
            NodeKind::Bridge => "bridge",
        })
    }

    fn label(&self, v: u32) -> PyResult<String> {
        self.inner.check(NodeId(v)).map_err(py_err)?;
        Ok(self.inner.label(NodeId(v)))
    }

    /// `[(neighbor, weight), ...]`
    fn neighbors(&self, v: u32) -> PyResult<Vec<(u32, f64)>> {
        let nbrs = self.inner.neighbors(NodeId(v)).map_err(py_err)?;
        Ok(nbrs.into_iter().map(|(x, w)| (x.0, w)).collect())
    }

    /// Unnormalized weight of stepping `v -> x` after arriving from `prev`.
    #[pyo3(signature = (prev, v, x, p=1.0, q=1.0, r=1.0))]
    fn transition_weight(&self, prev: Option<u32>, v: u32, x: u32, p: f64, q: f64, r: f64) -> PyResult<f64> {
        transition_weight(&self.inner, prev.map(NodeId), NodeId(v), NodeId(x), &walk_config(p, q, r)).map_err(py_err)
    }

    /// One biased walk of at most `length` nodes.
    #[pyo3(signature = (start, length, p=1.0, q=1.0, r=1.0, seed=0))]
    fn random_walk(&self, start: u32, length: usize, p: f64, q: f64, r: f64, seed: u64) -> PyResult<Vec<u32>> {
        let cfg = walk_config(p, q, r);
        cfg.validate().map_err(py_err)?;
        let bias = BiasTables::new(&self.inner, &WalkConfig { bias_mode: BiasMode::OnTheFly, ..cfg });
        let mut rng = seed::rng(seed, &[]);
        let walk = random_walk(&self.inner, &bias, NodeId(start), length, &mut rng).map_err(py_err)?;
        Ok(walk.nodes.into_iter().map(|v| v.0).collect())
    }
}

/// Trained vectors, one row per network node.
#[pyclass(name = "Embeddings", frozen)]
struct PyEmbeddings {
    matrix: EmbeddingMatrix,
    targets: usize,
}

#[pymethods]
impl PyEmbeddings {
    #[getter]
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn __len__(&self) -> usize {
        self.matrix.rows()
    }

    /// Rows of the target nodes (or of every node with `bridges=True`).
    #[pyo3(signature = (bridges=false))]
    fn rows(&self, bridges: bool) -> Vec<Vec<f32>> {
        let n = if bridges { self.matrix.rows() } else { self.targets };
        (0..n).map(|i| self.matrix.row(i).to_vec()).collect()
    }

    #[pyo3(signature = (path, network, emit_bridges=false, binary=false))]
    fn save(&self, path: &str, network: &PyNetwork, emit_bridges: bool, binary: bool) -> PyResult<()> {
        let format = if binary { Format::Binary } else { Format::Text };
        write_embeddings(path, &self.matrix, &network.inner, emit_bridges, format).map_err(py_err)
    }
}

fn labels_from(labels: Vec<Vec<u32>>) -> PyResult<LabelSet> {
    let count = labels.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0);
    LabelSet::new(labels, count).map_err(py_err)
}

/// Trains embeddings on `network`. The GIL is released while training.
#[pyfunction]
#[pyo3(signature = (
    network, *, dim=128, walk_length=150, walks_per_node=10, window=10, negatives=5,
    p=1.0, q=1.0, r=1.0, lambda1=1.0, lr=0.025, seed=0, workers=1, walk_starts="all"
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    network: &PyNetwork,
    dim: usize,
    walk_length: usize,
    walks_per_node: usize,
    window: usize,
    negatives: usize,
    p: f64,
    q: f64,
    r: f64,
    lambda1: f64,
    lr: f64,
    seed: u64,
    workers: usize,
    walk_starts: &str,
) -> PyResult<PyEmbeddings> {
    let walk_starts = match walk_starts {
        "all" => WalkStarts::All,
        "targets" => WalkStarts::Targets,
        other => return Err(PyValueError::new_err(format!("walk_starts must be 'all' or 'targets', got {other:?}"))),
    };
    let net = &network.inner;
    let wcfg = WalkConfig {
        walk_length,
        walks_per_node,
        window,
        seed,
        bias_mode: BiasMode::auto(net, 50_000_000),
        ..walk_config(p, q, r)
    };
    let tcfg = TrainConfig {
        dim,
        negatives,
        lr,
        lambda1,
        seed,
        walk_starts,
        workers,
        context_matrix: false,
    };
    wcfg.validate().map_err(py_err)?;
    let trained = py
        .detach(|| {
            let bias = BiasTables::new(net, &wcfg);
            geri_core::train(net, &bias, &wcfg, &tcfg)
        })
        .map_err(py_err)?;
    Ok(PyEmbeddings {
        matrix: trained.model.embeddings,
        targets: net.target_count(),
    })
}

/// Mean `(micro_f1, macro_f1)` over repeated splits. `labels[v]` lists
/// the labels of target `v` (empty when unlabelled).
#[pyfunction]
#[pyo3(signature = (embeddings, labels, *, train_fraction=0.5, repeats=10, C=100.0, seed=0))]
#[allow(non_snake_case)]
fn evaluate(
    embeddings: &PyEmbeddings,
    labels: Vec<Vec<u32>>,
    train_fraction: f64,
    repeats: usize,
    C: f64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let labels = labels_from(labels)?;
    let emb = embeddings.matrix.head(embeddings.targets);
    let split = SplitSpec {
        train_fraction,
        repeats,
        seed,
        stratified: true,
    };
    let opts = EvalOptions {
        c: C,
        ..EvalOptions::default()
    };
    let report = eval::evaluate(&emb, None, &labels, split, opts).map_err(py_err)?;
    Ok((report.micro_f1, report.macro_f1))
}

/// `(micro, macro)` F1 of predicted label sets against true ones.
#[pyfunction]
fn micro_macro_f1(predicted: Vec<Vec<u32>>, truth: Vec<Vec<u32>>, label_count: usize) -> PyResult<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(PyValueError::new_err("predicted and truth differ in length"));
    }
    if let Some(&l) = predicted.iter().chain(&truth).flatten().find(|&&l| l as usize >= label_count) {
        return Err(PyValueError::new_err(format!("label {l} outside 0..{label_count}")));
    }
    let refs: Vec<&[u32]> = truth.iter().map(Vec::as_slice).collect();
    Ok(eval::micro_macro_f1(&predicted, &refs, label_count))
}

#[pymodule]
fn geri(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyEmbeddings>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(micro_macro_f1, m)?)?;
    Ok(())
}
