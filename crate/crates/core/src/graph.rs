//! Input information networks and the bipartite heterogeneous network built
//! from them.
//!
//! An [`InfoNetwork`] is the raw homogeneous graph together with word
//! occurrences attached to its nodes and edges. [`HeteroNetwork::build`]
//! turns every word that occurs at least once into a *bridge* node linked to
//! the *target* nodes whose text (or incident edge text) contains it. The
//! original target-target edges are kept.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node index. Targets occupy `0..target_count`, bridges follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Target,
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub source: NodeId,
    pub dest: NodeId,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeText {
    pub node: NodeId,
    pub word: WordId,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeText {
    pub node_i: NodeId,
    pub node_j: NodeId,
    pub word: WordId,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `word`, inserting it if unseen.
    pub fn intern(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = WordId(self.words.len() as u32);
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Homogeneous graph with word occurrences on nodes and edges.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoNetwork {
    target_count: usize,
    edges: Vec<Edge>,
    node_text: Vec<NodeText>,
    edge_text: Vec<EdgeText>,
    vocabulary: Vocabulary,
}

impl InfoNetwork {
    /// Validates and assembles a network.
    pub fn new(
        target_count: usize,
        edges: Vec<Edge>,
        node_text: Vec<NodeText>,
        edge_text: Vec<EdgeText>,
        vocabulary: Vocabulary,
    ) -> Result<Self> {
        let net = InfoNetwork {
            target_count,
            edges,
            node_text,
            edge_text,
            vocabulary,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let n = self.target_count;
        let check_node = |v: NodeId| {
            if v.index() >= n {
                Err(Error::Validation(format!(
                    "node {v} out of range (node count {n})"
                )))
            } else {
                Ok(())
            }
        };
        let check_word = |w: WordId| {
            if w.0 as usize >= self.vocabulary.len() {
                Err(Error::Validation(format!(
                    "word id {} out of range (vocabulary size {})",
                    w.0,
                    self.vocabulary.len()
                )))
            } else {
                Ok(())
            }
        };
        let mut seen = HashSet::with_capacity(self.edges.len());
        for e in &self.edges {
            check_node(e.source)?;
            check_node(e.dest)?;
            if e.source == e.dest {
                return Err(Error::Validation(format!("self-loop on node {}", e.source)));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(Error::Validation(format!(
                    "edge ({}, {}) has invalid weight {}",
                    e.source, e.dest, e.weight
                )));
            }
            let key = undirected_key(e.source, e.dest);
            if !seen.insert(key) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
        }
        for t in &self.node_text {
            check_node(t.node)?;
            check_word(t.word)?;
            check_value(t.value)?;
        }
        for t in &self.edge_text {
            check_node(t.node_i)?;
            check_node(t.node_j)?;
            check_word(t.word)?;
            check_value(t.value)?;
            if t.node_i == t.node_j {
                return Err(Error::Validation(format!(
                    "edge text on self-loop at node {}",
                    t.node_i
                )));
            }
        }
        Ok(())
    }

    /// Reads the edge file, node-text file and optional edge-text file.
    ///
    /// The target count is one past the largest node id mentioned in any of
    /// the three files.
    pub fn parse(
        edge_path: impl AsRef<Path>,
        node_text_path: impl AsRef<Path>,
        edge_text_path: Option<&Path>,
    ) -> Result<Self> {
        let mut vocabulary = Vocabulary::new();
        let mut max_id: Option<u32> = None;
        let mut bump = |v: NodeId| max_id = Some(max_id.map_or(v.0, |m| m.max(v.0)));

        let edge_path = edge_path.as_ref();
        let mut edges = Vec::new();
        for_each_record(edge_path, |line_no, fields| {
            if fields.len() != 2 && fields.len() != 3 {
                return Err(Error::parse(
                    edge_path,
                    line_no,
                    "expected \"src dst [weight]\"",
                ));
            }
            let source = parse_node(edge_path, line_no, fields[0])?;
            let dest = parse_node(edge_path, line_no, fields[1])?;
            let weight = match fields.get(2) {
                Some(w) => parse_real(edge_path, line_no, w)?,
                None => 1.0,
            };
            edges.push(Edge {
                source,
                dest,
                weight,
            });
            Ok(())
        })?;
        for e in &edges {
            bump(e.source);
            bump(e.dest);
        }

        let node_text_path = node_text_path.as_ref();
        let mut node_text = Vec::new();
        for_each_record(node_text_path, |line_no, fields| {
            if fields.len() != 3 {
                return Err(Error::parse(
                    node_text_path,
                    line_no,
                    "expected \"node word count\"",
                ));
            }
            let node = parse_node(node_text_path, line_no, fields[0])?;
            let word = vocabulary.intern(fields[1]);
            let value = parse_real(node_text_path, line_no, fields[2])?;
            node_text.push(NodeText { node, word, value });
            Ok(())
        })?;
        for t in &node_text {
            bump(t.node);
        }

        let mut edge_text = Vec::new();
        if let Some(path) = edge_text_path {
            for_each_record(path, |line_no, fields| {
                if fields.len() != 4 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "expected \"node_i node_j word count\"",
                    ));
                }
                let node_i = parse_node(path, line_no, fields[0])?;
                let node_j = parse_node(path, line_no, fields[1])?;
                let word = vocabulary.intern(fields[2]);
                let value = parse_real(path, line_no, fields[3])?;
                edge_text.push(EdgeText {
                    node_i,
                    node_j,
                    word,
                    value,
                });
                Ok(())
            })?;
        }
        for t in &edge_text {
            bump(t.node_i);
            bump(t.node_j);
        }

        let target_count = max_id.map_or(0, |m| m as usize + 1);
        InfoNetwork::new(target_count, edges, node_text, edge_text, vocabulary)
    }

    /// Writes the three text files in the format accepted by [`InfoNetwork::parse`].
    pub fn write(
        &self,
        edge_path: impl AsRef<Path>,
        node_text_path: impl AsRef<Path>,
        edge_text_path: impl AsRef<Path>,
    ) -> Result<()> {
        write_lines(edge_path.as_ref(), |w| {
            for e in &self.edges {
                writeln!(w, "{} {} {}", e.source, e.dest, e.weight)?;
            }
            Ok(())
        })?;
        write_lines(node_text_path.as_ref(), |w| {
            for t in &self.node_text {
                writeln!(w, "{} {} {}", t.node, self.vocabulary.word(t.word), t.value)?;
            }
            Ok(())
        })?;
        write_lines(edge_text_path.as_ref(), |w| {
            for t in &self.edge_text {
                writeln!(
                    w,
                    "{} {} {} {}",
                    t.node_i,
                    t.node_j,
                    self.vocabulary.word(t.word),
                    t.value
                )?;
            }
            Ok(())
        })
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_text(&self) -> &[NodeText] {
        &self.node_text
    }

    pub fn edge_text(&self) -> &[EdgeText] {
        &self.edge_text
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Same topology with all text removed.
    pub fn without_text(&self) -> InfoNetwork {
        InfoNetwork {
            target_count: self.target_count,
            edges: self.edges.clone(),
            node_text: Vec::new(),
            edge_text: Vec::new(),
            vocabulary: Vocabulary::new(),
        }
    }
}

/// Bipartite-augmented network in compressed sparse row form.
///
/// Rows are sorted by neighbor id and adjacency is symmetric. Bridge nodes
/// only neighbor targets and always have degree at least one.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroNetwork {
    target_count: usize,
    bridge_words: Vec<String>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl HeteroNetwork {
    /// Builds the heterogeneous network from an information network.
    ///
    /// A target and a bridge are linked when the word occurs in the target's
    /// text, or in the text of any edge incident to the target. Weights of a
    /// (target, bridge) pair produced more than once are summed. Zero-weight
    /// original edges carry no transition mass and are dropped.
    pub fn build(net: &InfoNetwork) -> HeteroNetwork {
        let n = net.target_count;
        let mut text: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for t in &net.node_text {
            *text.entry((t.node.0, t.word.0)).or_default() += t.value;
        }
        for t in &net.edge_text {
            *text.entry((t.node_i.0, t.word.0)).or_default() += t.value;
            *text.entry((t.node_j.0, t.word.0)).or_default() += t.value;
        }

        let mut used = vec![false; net.vocabulary.len()];
        for &(_, w) in text.keys() {
            used[w as usize] = true;
        }
        let mut bridge_of = vec![u32::MAX; net.vocabulary.len()];
        let mut bridge_words = Vec::new();
        for (w, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            bridge_of[w] = (n + bridge_words.len()) as u32;
            bridge_words.push(net.vocabulary.words[w].clone());
        }

        let mut triples: Vec<(u32, u32, f64)> =
            Vec::with_capacity(2 * (net.edges.len() + text.len()));
        for e in net.edges.iter().filter(|e| e.weight > 0.0) {
            triples.push((e.source.0, e.dest.0, e.weight));
            triples.push((e.dest.0, e.source.0, e.weight));
        }
        for (&(v, w), &weight) in &text {
            let b = bridge_of[w as usize];
            triples.push((v, b, weight));
            triples.push((b, v, weight));
        }
        Self::from_directed(n, bridge_words, triples)
    }

    fn from_directed(
        target_count: usize,
        bridge_words: Vec<String>,
        mut triples: Vec<(u32, u32, f64)>,
    ) -> HeteroNetwork {
        let node_count = target_count + bridge_words.len();
        triples.sort_unstable_by_key(|&(u, v, _)| (u, v));
        let mut offsets = vec![0usize; node_count + 1];
        for &(u, _, _) in &triples {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let neighbors = triples.iter().map(|t| t.1).collect();
        let weights = triples.iter().map(|t| t.2).collect();
        HeteroNetwork {
            target_count,
            bridge_words,
            offsets,
            neighbors,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    pub fn bridge_count(&self) -> usize {
        self.bridge_words.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Number of stored directed edges, i.e. twice [`edge_count`](Self::edge_count).
    pub fn directed_edge_count(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn kind(&self, v: NodeId) -> NodeKind {
        if v.index() < self.target_count {
            NodeKind::Target
        } else {
            NodeKind::Bridge
        }
    }

    #[inline]
    pub(crate) fn is_bridge(&self, v: u32) -> bool {
        v as usize >= self.target_count
    }

    /// Word behind a bridge node.
    pub fn bridge_word(&self, v: NodeId) -> Option<&str> {
        v.index()
            .checked_sub(self.target_count)
            .and_then(|b| self.bridge_words.get(b))
            .map(String::as_str)
    }

    pub fn neighbors(&self, v: NodeId) -> Result<Vec<(NodeId, f64)>> {
        self.check(v)?;
        let (ids, ws) = self.row(v.0);
        Ok(ids
            .iter()
            .zip(ws)
            .map(|(&x, &w)| (NodeId(x), w))
            .collect())
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v.index() + 1] - self.offsets[v.index()]
    }

    pub fn check(&self, v: NodeId) -> Result<()> {
        if v.index() < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: v.index(),
                count: self.node_count(),
            })
        }
    }

    #[inline]
    pub(crate) fn row(&self, v: u32) -> (&[u32], &[f64]) {
        let (a, b) = (self.offsets[v as usize], self.offsets[v as usize + 1]);
        (&self.neighbors[a..b], &self.weights[a..b])
    }

    /// Position of `v`'s row in the directed edge arrays.
    #[inline]
    pub(crate) fn row_start(&self, v: u32) -> usize {
        self.offsets[v as usize]
    }

    #[inline]
    pub(crate) fn is_adjacent(&self, u: u32, v: u32) -> bool {
        self.row(u).0.binary_search(&v).is_ok()
    }

    /// Index of the directed edge `u -> v`, if present.
    pub(crate) fn edge_index(&self, u: u32, v: u32) -> Option<usize> {
        self.row(u)
            .0
            .binary_search(&v)
            .ok()
            .map(|j| self.offsets[u as usize] + j)
    }

    /// Weight of the undirected edge `{u, v}`.
    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.edge_index(u.0, v.0).map(|i| self.weights[i])
    }

    /// Sum of weights over undirected edges.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() / 2.0
    }

    /// Name used for a node in text outputs: targets as plain integers,
    /// bridges as `w<word>`.
    pub fn label(&self, v: NodeId) -> String {
        match self.bridge_word(v) {
            Some(word) => format!("w{word}"),
            None => v.to_string(),
        }
    }

    /// Serializes as an edge list with a `#hetero` header. Bridge ids follow
    /// the targets and their words are recorded on `#bridge` comment lines.
    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "#hetero targets={} bridges={}",
            self.target_count,
            self.bridge_count()
        )?;
        for (b, word) in self.bridge_words.iter().enumerate() {
            writeln!(out, "#bridge {} {}", self.target_count + b, word)?;
        }
        for u in 0..self.node_count() as u32 {
            let (ids, ws) = self.row(u);
            for (&v, &w) in ids.iter().zip(ws) {
                if u < v {
                    writeln!(out, "{u} {v} {w}")?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_lines(path, |w| self.write(w))
    }

    /// True when the file starts with a `#hetero` header.
    pub fn is_serialized(path: impl AsRef<Path>) -> Result<bool> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = String::new();
        BufReader::new(file)
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        Ok(first.starts_with("#hetero"))
    }

    /// Reads a network written by [`HeteroNetwork::write`].
    pub fn load(path: impl AsRef<Path>) -> Result<HeteroNetwork> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header: Option<(usize, usize)> = None;
        let mut words: Vec<Option<String>> = Vec::new();
        let mut triples = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("#hetero") {
                let mut targets = None;
                let mut bridges = None;
                for field in rest.split_whitespace() {
                    match field.split_once('=') {
                        Some(("targets", v)) => targets = v.parse::<usize>().ok(),
                        Some(("bridges", v)) => bridges = v.parse::<usize>().ok(),
                        _ => {}
                    }
                }
                let (Some(t), Some(b)) = (targets, bridges) else {
                    return Err(Error::parse(path, line_no, "malformed #hetero header"));
                };
                header = Some((t, b));
                words = vec![None; b];
                continue;
            }
            let Some((targets, bridges)) = header else {
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                return Err(Error::parse(path, line_no, "missing #hetero header"));
            };
            if let Some(rest) = line.strip_prefix("#bridge") {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(Error::parse(path, line_no, "expected \"#bridge id word\""));
                }
                let id = parse_node(path, line_no, fields[0])?.index();
                if id < targets || id >= targets + bridges {
                    return Err(Error::parse(path, line_no, "bridge id out of range"));
                }
                words[id - targets] = Some(fields[1].to_owned());
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 && fields.len() != 3 {
                return Err(Error::parse(path, line_no, "expected \"src dst [weight]\""));
            }
            let u = parse_node(path, line_no, fields[0])?;
            let v = parse_node(path, line_no, fields[1])?;
            let w = match fields.get(2) {
                Some(w) => parse_real(path, line_no, w)?,
                None => 1.0,
            };
            let count = targets + bridges;
            if u.index() >= count || v.index() >= count {
                return Err(Error::Validation(format!(
                    "{}:{line_no}: node out of range (node count {count})",
                    path.display()
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop on node {u}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            if u.index() >= targets && v.index() >= targets {
                return Err(Error::Validation(format!(
                    "bridge-bridge edge ({u}, {v})"
                )));
            }
            if !seen.insert(undirected_key(u, v)) {
                return Err(Error::Validation(format!("duplicate edge ({u}, {v})")));
            }
            triples.push((u.0, v.0, w));
            triples.push((v.0, u.0, w));
        }
        let Some((targets, _)) = header else {
            return Err(Error::parse(path, 1, "missing #hetero header"));
        };
        let bridge_words = words
            .into_iter()
            .enumerate()
            .map(|(b, w)| w.unwrap_or_else(|| (targets + b).to_string()))
            .collect();
        let net = Self::from_directed(targets, bridge_words, triples);
        for b in targets..net.node_count() {
            if net.degree(NodeId(b as u32)) == 0 {
                return Err(Error::Validation(format!("bridge node {b} has no edges")));
            }
        }
        Ok(net)
    }
}

fn undirected_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn check_value(value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "text value {value} is not a positive real"
        )))
    }
}

fn parse_node(path: &Path, line: usize, field: &str) -> Result<NodeId> {
    field
        .parse::<u32>()
        .map(NodeId)
        .map_err(|_| Error::parse(path, line, format!("invalid node id {field:?}")))
}

fn parse_real(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line, format!("invalid number {field:?}")))
}

/// Calls `f(line_number, fields)` for every non-blank, non-comment line.
pub(crate) fn for_each_record(
    path: &Path,
    mut f: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        f(i + 1, &fields)?;
    }
    Ok(())
}

pub(crate) fn write_lines(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}
