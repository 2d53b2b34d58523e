//! Dense row-major embedding matrix and its text/binary file formats.
//!
//! Both formats start with a text header `"<count> <dim>\n"`. Text rows are
//! `"<id> v1 ... vd"`; binary rows are `"<id> "` followed by `dim`
//! little-endian `f32` values and a newline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{HeteroNetwork, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(EmbeddingMatrix {
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> EmbeddingMatrix {
        let n = n.min(self.rows);
        EmbeddingMatrix {
            rows: n,
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|&x| x as f64).collect())
            .collect()
    }
}

/// `n × dim` matrix of i.i.d. standard normal draws.
pub fn init_embeddings<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> EmbeddingMatrix {
    let data = (0..n * dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    EmbeddingMatrix { rows: n, dim, data }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

/// Writes target rows (and, with `emit_bridges`, bridge rows named
/// `w<word>`) of `emb`, whose rows follow `net`'s node numbering.
pub fn write_embeddings(
    path: impl AsRef<Path>,
    emb: &EmbeddingMatrix,
    net: &HeteroNetwork,
    emit_bridges: bool,
    format: Format,
) -> Result<()> {
    let path = path.as_ref();
    let count = if emit_bridges {
        emb.rows().min(net.node_count())
    } else {
        emb.rows().min(net.target_count())
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_rows(&mut w, emb, count, |i| net.label(NodeId(i as u32)), format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn write_rows(
    w: &mut impl Write,
    emb: &EmbeddingMatrix,
    count: usize,
    name: impl Fn(usize) -> String,
    format: Format,
) -> std::io::Result<()> {
    writeln!(w, "{} {}", count, emb.dim())?;
    for i in 0..count {
        write!(w, "{}", name(i))?;
        match format {
            Format::Text => {
                for v in emb.row(i) {
                    write!(w, " {v}")?;
                }
            }
            Format::Binary => {
                w.write_all(b" ")?;
                for v in emb.row(i) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Embeddings read back from a file, keyed by the row names.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedEmbeddings {
    pub names: Vec<String>,
    pub matrix: EmbeddingMatrix,
}

impl NamedEmbeddings {
    /// Target rows placed at their integer ids; bridge rows are skipped.
    /// Returns the matrix (zero rows for missing ids) and a presence mask.
    pub fn targets(&self) -> (EmbeddingMatrix, Vec<bool>) {
        let ids: Vec<Option<usize>> = self.names.iter().map(|n| n.parse().ok()).collect();
        let rows = ids.iter().flatten().max().map_or(0, |&m| m + 1);
        let mut out = EmbeddingMatrix::zeros(rows, self.matrix.dim());
        let mut present = vec![false; rows];
        for (i, id) in ids.iter().enumerate() {
            if let Some(id) = *id {
                out.row_mut(id).copy_from_slice(self.matrix.row(i));
                present[id] = true;
            }
        }
        (out, present)
    }
}

/// Reads either format; binary is detected from the row layout.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<NamedEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) => (c, d),
            _ => return Err(Error::parse(path, 1, "expected \"<count> <dim>\" header")),
        },
        _ => return Err(Error::parse(path, 1, "expected \"<count> <dim>\" header")),
    };
    let mut rest = Vec::new();
    reader
        .read_to_end(&mut rest)
        .map_err(|e| Error::io(path, e))?;
    match parse_text_rows(path, &rest, count, dim) {
        Ok(named) => Ok(named),
        Err(text_err) => parse_binary_rows(path, &rest, count, dim).map_err(|_| text_err),
    }
}

fn parse_text_rows(path: &Path, body: &[u8], count: usize, dim: usize) -> Result<NamedEmbeddings> {
    let body = std::str::from_utf8(body).map_err(|_| Error::parse(path, 2, "not valid UTF-8 text"))?;
    let mut names = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 2;
        let mut fields = line.split_whitespace();
        let Some(name) = fields.next() else { continue };
        names.push(name.to_owned());
        let before = data.len();
        for f in fields {
            data.push(
                f.parse::<f32>()
                    .map_err(|_| Error::parse(path, line_no, format!("invalid value {f:?}")))?,
            );
        }
        if data.len() - before != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {dim} values, found {}", data.len() - before),
            ));
        }
    }
    if names.len() != count {
        return Err(Error::parse(
            path,
            1,
            format!("header announces {count} rows, found {}", names.len()),
        ));
    }
    Ok(NamedEmbeddings {
        names,
        matrix: EmbeddingMatrix { rows: count, dim, data },
    })
}

fn parse_binary_rows(path: &Path, body: &[u8], count: usize, dim: usize) -> Result<NamedEmbeddings> {
    let mut names = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    let mut pos = 0;
    for row in 0..count {
        let err = || Error::parse(path, row + 2, "truncated binary row");
        let space = body[pos..].iter().position(|&b| b == b' ').ok_or_else(err)?;
        let name = std::str::from_utf8(&body[pos..pos + space]).map_err(|_| err())?;
        names.push(name.to_owned());
        pos += space + 1;
        let end = pos + 4 * dim;
        if body.get(end) != Some(&b'\n') {
            return Err(err());
        }
        data.extend(
            body[pos..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
        );
        pos = end + 1;
    }
    Ok(NamedEmbeddings {
        names,
        matrix: EmbeddingMatrix { rows: count, dim, data },
    })
}
