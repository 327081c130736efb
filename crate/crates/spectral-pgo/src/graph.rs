//! Pose-graph data model, plain-text parsing/serialization, and (weighted)
//! Laplacian construction.
//!
//! File format, one whitespace-delimited record per line (`#` starts a
//! comment):
//!
//! ```text
//! VERTEX_SE2 id x y theta
//! EDGE_SE2 i k dx dy dtheta i11 i12 i13 i22 i23 i33
//! VERTEX_SE3:QUAT id x y z qx qy qz qw
//! EDGE_SE3:QUAT i k dx dy dz qx qy qz qw <21 upper-triangular info entries>
//! ```
//!
//! Information matrices are given as the upper triangle in row-major order
//! and must be positive definite. Vertex ids may be non-contiguous; they are
//! compacted to 0..n-1 in order of first appearance, keeping the original id
//! on each vertex.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie::{Dim, Pose};

/// A vertex: original file id plus its pose estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: i64,
    pub pose: Pose,
}

/// An edge: relative-pose measurement between two vertices (by compacted
/// index) with its information matrix expressed in the edge frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub k: usize,
    pub measurement: Pose,
    pub info: DMatrix<f64>,
}

/// Edge description by original vertex ids, used when building graphs
/// programmatically.
#[derive(Clone, Debug)]
pub struct EdgeSpec {
    pub id_i: i64,
    pub id_k: i64,
    pub measurement: Pose,
    pub info: DMatrix<f64>,
}

/// Parser behavior switches.
#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Add `1e-12 * trace / l` to the diagonal of marginally indefinite
    /// information matrices before giving up. Off by default so dataset
    /// defects surface as errors.
    pub repair_jitter: bool,
}

/// Result of parsing: the graph plus a count of skipped unknown record tags.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub graph: PoseGraph,
    pub unknown_tags: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseGraph {
    dim: Dim,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    id_index: HashMap<i64, usize>,
}

impl PoseGraph {
    /// Build a graph from vertices and edges given by original ids,
    /// validating every structural invariant.
    pub fn from_parts(dim: Dim, vertices: Vec<Vertex>, edges: Vec<EdgeSpec>) -> Result<Self> {
        Self::from_parts_with(dim, vertices, edges, &ParseOptions::default())
    }

    pub fn from_parts_with(
        dim: Dim,
        vertices: Vec<Vertex>,
        edges: Vec<EdgeSpec>,
        opts: &ParseOptions,
    ) -> Result<Self> {
        let mut id_index = HashMap::with_capacity(vertices.len());
        for (idx, v) in vertices.iter().enumerate() {
            if v.pose.dim() != dim {
                return Err(Error::DimensionMismatch(dim, v.pose.dim()));
            }
            if id_index.insert(v.id, idx).is_some() {
                return Err(Error::invalid(format!("duplicate vertex id {}", v.id)));
            }
        }
        let ell = dim.tangent_dim();
        let mut resolved = Vec::with_capacity(edges.len());
        for (j, e) in edges.into_iter().enumerate() {
            let i = *id_index
                .get(&e.id_i)
                .ok_or_else(|| Error::invalid(format!("edge {j} references missing vertex id {}", e.id_i)))?;
            let k = *id_index
                .get(&e.id_k)
                .ok_or_else(|| Error::invalid(format!("edge {j} references missing vertex id {}", e.id_k)))?;
            if i == k {
                return Err(Error::invalid(format!(
                    "edge {j} is a self-loop on vertex id {}",
                    e.id_i
                )));
            }
            if e.measurement.dim() != dim {
                return Err(Error::DimensionMismatch(dim, e.measurement.dim()));
            }
            let info = validate_info(e.info, ell, j, opts)?;
            resolved.push(Edge {
                i,
                k,
                measurement: e.measurement,
                info,
            });
        }
        Ok(PoseGraph {
            dim,
            vertices,
            edges: resolved,
            id_index,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Tangent dimension of one pose.
    pub fn tangent_dim(&self) -> usize {
        self.dim.tangent_dim()
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_index(&self, id: i64) -> Option<usize> {
        self.id_index.get(&id).copied()
    }

    /// Average vertex degree 2m/n.
    pub fn average_degree(&self) -> f64 {
        if self.vertices.is_empty() {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.vertices.len() as f64
        }
    }

    fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.i].push(e.k);
            adj[e.k].push(e.i);
        }
        adj
    }

    /// Number of connected components (0 for the empty graph).
    pub fn component_count(&self) -> usize {
        let n = self.vertices.len();
        let adj = self.adjacency_lists();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// First `count` vertices plus every edge with both endpoints among them.
    pub fn prefix(&self, count: usize) -> Result<PoseGraph> {
        if count == 0 || count > self.vertices.len() {
            return Err(Error::invalid(format!(
                "prefix size {count} out of range 1..={}",
                self.vertices.len()
            )));
        }
        let vertices: Vec<Vertex> = self.vertices[..count].to_vec();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| e.i < count && e.k < count)
            .cloned()
            .collect();
        let id_index = vertices
            .iter()
            .enumerate()
            .map(|(idx, v)| (v.id, idx))
            .collect();
        Ok(PoseGraph {
            dim: self.dim,
            vertices,
            edges,
            id_index,
        })
    }

    /// Number of unordered vertex pairs joined by more than one edge.
    pub fn duplicate_pair_count(&self) -> usize {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for e in &self.edges {
            let key = (e.i.min(e.k), e.i.max(e.k));
            *counts.entry(key).or_insert(0) += 1;
        }
        counts.values().filter(|&&c| c > 1).count()
    }

    /// Unweighted Laplacian (every edge weight 1).
    pub fn unweighted_laplacian(&self) -> WeightedLaplacian {
        self.laplacian(&vec![1.0; self.edges.len()])
            .expect("unit weights are always valid")
    }

    /// Weighted Laplacian with one positive weight per edge.
    pub fn laplacian(&self, weights: &[f64]) -> Result<WeightedLaplacian> {
        if weights.len() != self.edges.len() {
            return Err(Error::invalid(format!(
                "expected {} edge weights, got {}",
                self.edges.len(),
                weights.len()
            )));
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.i, e.k)).collect();
        WeightedLaplacian::from_edges(self.vertices.len(), &pairs, weights)
    }

    pub fn parse(reader: impl BufRead, opts: &ParseOptions) -> Result<Parsed> {
        parse_impl(reader, opts)
    }

    pub fn parse_str(text: &str) -> Result<Parsed> {
        parse_impl(text.as_bytes(), &ParseOptions::default())
    }

    pub fn from_file(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<Parsed> {
        let file = std::fs::File::open(path)?;
        parse_impl(std::io::BufReader::new(file), opts)
    }

    /// Serialize in the same plain-text format accepted by the parser.
    /// Floats are printed with shortest round-trip formatting, so
    /// parse -> write -> parse reproduces the graph exactly.
    pub fn write_g2o(&self, w: &mut impl Write) -> std::io::Result<()> {
        for v in &self.vertices {
            match &v.pose {
                Pose::Se2(p) => {
                    writeln!(w, "VERTEX_SE2 {} {} {} {}", v.id, p.x, p.y, p.theta())?;
                }
                Pose::Se3(_) => {
                    let t = v.pose.translation();
                    let [qw, qx, qy, qz] = v.pose.quaternion_wxyz().unwrap();
                    writeln!(
                        w,
                        "VERTEX_SE3:QUAT {} {} {} {} {} {} {} {}",
                        v.id, t[0], t[1], t[2], qx, qy, qz, qw
                    )?;
                }
            }
        }
        for e in &self.edges {
            let id_i = self.vertices[e.i].id;
            let id_k = self.vertices[e.k].id;
            match &e.measurement {
                Pose::Se2(p) => {
                    write!(w, "EDGE_SE2 {} {} {} {} {}", id_i, id_k, p.x, p.y, p.theta())?;
                }
                Pose::Se3(_) => {
                    let t = e.measurement.translation();
                    let [qw, qx, qy, qz] = e.measurement.quaternion_wxyz().unwrap();
                    write!(
                        w,
                        "EDGE_SE3:QUAT {} {} {} {} {} {} {} {} {}",
                        id_i, id_k, t[0], t[1], t[2], qx, qy, qz, qw
                    )?;
                }
            }
            let ell = self.tangent_dim();
            for r in 0..ell {
                for c in r..ell {
                    write!(w, " {}", e.info[(r, c)])?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_g2o_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_g2o(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("g2o output is ASCII")
    }
}

/// Symmetry and positive-definiteness validation for an information matrix.
fn validate_info(info: DMatrix<f64>, ell: usize, edge: usize, opts: &ParseOptions) -> Result<DMatrix<f64>> {
    if info.nrows() != ell || info.ncols() != ell {
        return Err(Error::invalid(format!(
            "edge {edge}: information matrix is {}x{}, expected {ell}x{ell}",
            info.nrows(),
            info.ncols()
        )));
    }
    let scale = info.abs().max();
    let asym = (&info - info.transpose()).abs().max();
    if asym > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "edge {edge}: information matrix is not symmetric (max deviation {asym:.3e})"
        )));
    }
    if info.clone().cholesky().is_some() {
        return Ok(info);
    }
    if opts.repair_jitter {
        let jitter = 1e-12 * info.trace() / ell as f64;
        let repaired = &info + DMatrix::<f64>::identity(ell, ell) * jitter;
        if repaired.clone().cholesky().is_some() {
            log::warn!("edge {edge}: information matrix repaired with jitter {jitter:.3e}");
            return Ok(repaired);
        }
    }
    Err(Error::NotPositiveDefinite { edge })
}

/// Signed incidence column of an edge over `n` vertices: +1 at `i`, -1 at `k`.
pub fn incidence_column(i: usize, k: usize, n: usize) -> DVector<f64> {
    assert!(i < n && k < n && i != k, "invalid edge ({i},{k}) for n={n}");
    let mut q = DVector::zeros(n);
    q[i] = 1.0;
    q[k] = -1.0;
    q
}

/// Sparse symmetric weighted Laplacian built from per-edge weights.
///
/// Row sums are zero by construction and the matrix is positive
/// semi-definite for positive weights.
#[derive(Clone, Debug)]
pub struct WeightedLaplacian {
    n: usize,
    weights: Vec<f64>,
    diag: Vec<f64>,
    /// Accumulated weight per unordered vertex pair (i < k); the matrix
    /// entry at (i, k) is the negation of the stored value.
    off: BTreeMap<(usize, usize), f64>,
}

impl WeightedLaplacian {
    pub fn from_edges(n: usize, pairs: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if pairs.len() != weights.len() {
            return Err(Error::invalid("one weight per edge required"));
        }
        let mut diag = vec![0.0; n];
        let mut off = BTreeMap::new();
        for (j, (&(i, k), &w)) in pairs.iter().zip(weights).enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("edge {j}: nonpositive weight {w}")));
            }
            if i >= n || k >= n || i == k {
                return Err(Error::invalid(format!("edge {j}: invalid pair ({i},{k})")));
            }
            diag[i] += w;
            diag[k] += w;
            *off.entry((i.min(k), i.max(k))).or_insert(0.0) += w;
        }
        Ok(WeightedLaplacian {
            n,
            weights: weights.to_vec(),
            diag,
            off,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            0.0
        } else {
            self.weights.iter().sum::<f64>() / self.weights.len() as f64
        }
    }

    pub fn is_unit_weighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Unordered vertex pairs with nonzero off-diagonal coupling.
    pub fn support(&self) -> Vec<(usize, usize)> {
        self.off.keys().copied().collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for (&(i, k), &w) in &self.off {
            m[(i, k)] = -w;
            m[(k, i)] = -w;
        }
        m
    }

    /// Dense Laplacian with row and column 0 removed (the anchored form
    /// whose determinant counts spanning trees).
    pub fn reduced_dense(&self) -> DMatrix<f64> {
        let full = self.to_dense();
        full.view((1, 1), (self.n - 1, self.n - 1)).into_owned()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            y[i] = self.diag[i] * x[i];
        }
        for (&(i, k), &w) in &self.off {
            y[i] -= w * x[k];
            y[k] -= w * x[i];
        }
        y
    }
}

fn parse_impl(reader: impl BufRead, opts: &ParseOptions) -> Result<Parsed> {
    struct RawEdge {
        line: usize,
        id_i: i64,
        id_k: i64,
        measurement: Pose,
        upper: Vec<f64>,
    }

    let mut dim: Option<Dim> = None;
    let mut vertices: Vec<Vertex> = Vec::new();
    let mut raw_edges: Vec<RawEdge> = Vec::new();
    let mut unknown_tags = 0usize;

    let set_dim = |dim: &mut Option<Dim>, d: Dim, line: usize| -> Result<()> {
        match dim {
            None => {
                *dim = Some(d);
                Ok(())
            }
            Some(existing) if *existing == d => Ok(()),
            Some(existing) => Err(Error::Parse {
                line,
                msg: format!("mixed pose dimensions: file is {existing}, record is {d}"),
            }),
        }
    };

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let tag = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        match tag {
            "VERTEX_SE2" => {
                set_dim(&mut dim, Dim::Two, line_no)?;
                let f = fields(&rest, 4, line_no, tag)?;
                let id = parse_int(f[0], line_no)?;
                let pose = Pose::se2(
                    parse_num(f[1], line_no)?,
                    parse_num(f[2], line_no)?,
                    parse_num(f[3], line_no)?,
                );
                vertices.push(Vertex { id, pose });
            }
            "VERTEX_SE3:QUAT" => {
                set_dim(&mut dim, Dim::Three, line_no)?;
                let f = fields(&rest, 8, line_no, tag)?;
                let id = parse_int(f[0], line_no)?;
                let nums = parse_nums(&f[1..8], line_no)?;
                let pose = Pose::se3(
                    [nums[0], nums[1], nums[2]],
                    [nums[6], nums[3], nums[4], nums[5]],
                )
                .map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                vertices.push(Vertex { id, pose });
            }
            "EDGE_SE2" => {
                set_dim(&mut dim, Dim::Two, line_no)?;
                let f = fields(&rest, 11, line_no, tag)?;
                let id_i = parse_int(f[0], line_no)?;
                let id_k = parse_int(f[1], line_no)?;
                let nums = parse_nums(&f[2..11], line_no)?;
                raw_edges.push(RawEdge {
                    line: line_no,
                    id_i,
                    id_k,
                    measurement: Pose::se2(nums[0], nums[1], nums[2]),
                    upper: nums[3..9].to_vec(),
                });
            }
            "EDGE_SE3:QUAT" => {
                set_dim(&mut dim, Dim::Three, line_no)?;
                let f = fields(&rest, 30, line_no, tag)?;
                let id_i = parse_int(f[0], line_no)?;
                let id_k = parse_int(f[1], line_no)?;
                let nums = parse_nums(&f[2..30], line_no)?;
                let measurement = Pose::se3(
                    [nums[0], nums[1], nums[2]],
                    [nums[6], nums[3], nums[4], nums[5]],
                )
                .map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                raw_edges.push(RawEdge {
                    line: line_no,
                    id_i,
                    id_k,
                    measurement,
                    upper: nums[7..28].to_vec(),
                });
            }
            _ => {
                unknown_tags += 1;
                log::warn!("line {line_no}: skipping unknown record tag {tag}");
            }
        }
    }

    let dim = dim.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "no pose-graph records found".to_string(),
    })?;
    let ell = dim.tangent_dim();

    let mut id_index = HashMap::with_capacity(vertices.len());
    for (idx, v) in vertices.iter().enumerate() {
        if id_index.insert(v.id, idx).is_some() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("duplicate vertex id {}", v.id),
            });
        }
    }

    let mut edges = Vec::with_capacity(raw_edges.len());
    for (j, raw) in raw_edges.into_iter().enumerate() {
        let lookup = |id: i64| {
            id_index.get(&id).copied().ok_or_else(|| Error::Parse {
                line: raw.line,
                msg: format!("edge references missing vertex id {id}"),
            })
        };
        let i = lookup(raw.id_i)?;
        let k = lookup(raw.id_k)?;
        if i == k {
            return Err(Error::Parse {
                line: raw.line,
                msg: format!("self-loop edge on vertex id {}", raw.id_i),
            });
        }
        let info = upper_to_symmetric(&raw.upper, ell);
        let info = validate_info(info, ell, j, opts)?;
        edges.push(Edge {
            i,
            k,
            measurement: raw.measurement,
            info,
        });
    }

    Ok(Parsed {
        graph: PoseGraph {
            dim,
            vertices,
            edges,
            id_index,
        },
        unknown_tags,
    })
}

fn fields<'a>(rest: &'a [&'a str], expected: usize, line: usize, tag: &str) -> Result<&'a [&'a str]> {
    if rest.len() != expected {
        return Err(Error::Parse {
            line,
            msg: format!("{tag} expects {expected} fields, got {}", rest.len()),
        });
    }
    Ok(rest)
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("malformed numeric field {tok:?}"),
    })
}

fn parse_nums(toks: &[&str], line: usize) -> Result<Vec<f64>> {
    toks.iter().map(|t| parse_num(t, line)).collect()
}

fn parse_int(tok: &str, line: usize) -> Result<i64> {
    tok.parse::<i64>().map_err(|_| Error::Parse {
        line,
        msg: format!("malformed integer field {tok:?}"),
    })
}

/// Mirror a row-major upper triangle into a full symmetric matrix.
fn upper_to_symmetric(upper: &[f64], ell: usize) -> DMatrix<f64> {
    debug_assert_eq!(upper.len(), ell * (ell + 1) / 2);
    let mut m = DMatrix::zeros(ell, ell);
    let mut idx = 0;
    for r in 0..ell {
        for c in r..ell {
            m[(r, c)] = upper[idx];
            m[(c, r)] = upper[idx];
            idx += 1;
        }
    }
    m
}
