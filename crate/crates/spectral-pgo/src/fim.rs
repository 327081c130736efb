//! Assembly of the system information matrix from edge information matrices
//! and graph topology.
//!
//! Each edge contributes a generator placing its l-by-l information block
//! positively on the two endpoint diagonal blocks and negatively on the
//! coupling blocks, so the block sparsity pattern of the assembled matrix is
//! exactly the sparsity pattern of the graph Laplacian. When every edge
//! carries the same block, the whole matrix is the Kronecker product of the
//! unweighted Laplacian with that block.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{PoseGraph, WeightedLaplacian};
use crate::lie::Pose;
use crate::parallel;

/// Which frame edge information matrices are taken in during assembly.
///
/// `World` conjugates each edge block with the adjoint of the inverse pose of
/// its first endpoint (using the pose estimates stored in the graph); `Raw`
/// uses the blocks exactly as stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Raw,
    World,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::Raw => write!(f, "raw"),
            Frame::World => write!(f, "world"),
        }
    }
}

impl std::str::FromStr for Frame {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Frame::Raw),
            "world" => Ok(Frame::World),
            other => Err(Error::invalid(format!("unknown frame {other:?}"))),
        }
    }
}

/// Sparse symmetric nl-by-nl information matrix stored as l-by-l dense
/// blocks indexed by vertex pairs (upper triangle, i <= k).
#[derive(Clone, Debug, PartialEq)]
pub struct FimMatrix {
    n: usize,
    ell: usize,
    blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl FimMatrix {
    pub fn zeros(n: usize, ell: usize) -> Self {
        FimMatrix {
            n,
            ell,
            blocks: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Total matrix dimension n*l.
    pub fn size(&self) -> usize {
        self.n * self.ell
    }

    pub fn block(&self, i: usize, k: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(i.min(k), i.max(k)))
    }

    fn add_block(&mut self, i: usize, k: usize, b: &DMatrix<f64>) {
        debug_assert!(i < self.n && k < self.n);
        let (key, transposed) = if i <= k { ((i, k), false) } else { ((k, i), true) };
        let entry = self
            .blocks
            .entry(key)
            .or_insert_with(|| DMatrix::zeros(self.ell, self.ell));
        if transposed {
            *entry += b.transpose();
        } else {
            *entry += b;
        }
    }

    /// Merge another matrix of identical shape into this one.
    pub fn add_assign(&mut self, other: &FimMatrix) {
        debug_assert_eq!((self.n, self.ell), (other.n, other.ell));
        for (&(i, k), b) in &other.blocks {
            self.add_block(i, k, b);
        }
    }

    /// Vertex pairs (i <= k) whose block holds any nonzero entry.
    pub fn block_support(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .filter(|(_, b)| b.abs().max() > 0.0)
            .map(|(&key, _)| key)
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|(&(i, k), _)| i == k)
            .map(|(_, b)| b.trace())
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.size();
        let mut m = DMatrix::zeros(d, d);
        for (&(i, k), b) in &self.blocks {
            for r in 0..self.ell {
                for c in 0..self.ell {
                    m[(i * self.ell + r, k * self.ell + c)] = b[(r, c)];
                    if i != k {
                        m[(k * self.ell + c, i * self.ell + r)] = b[(r, c)];
                    }
                }
            }
        }
        m
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.size());
        let ell = self.ell;
        let mut y = DVector::zeros(self.size());
        for (&(i, k), b) in &self.blocks {
            let xk = x.rows(k * ell, ell);
            let mut yi = y.rows_mut(i * ell, ell);
            yi.gemv(1.0, b, &xk, 1.0);
            if i != k {
                let xi = x.rows(i * ell, ell);
                let mut yk = y.rows_mut(k * ell, ell);
                yk.gemv_tr(1.0, b, &xi, 1.0);
            }
        }
        y
    }

    /// Orthonormal basis of the rigid-transform null space shared by every
    /// generator: the all-ones vertex pattern in each tangent coordinate.
    pub fn gauge_basis(&self) -> Vec<DVector<f64>> {
        let scale = 1.0 / (self.n as f64).sqrt();
        (0..self.ell)
            .map(|b| {
                let mut v = DVector::zeros(self.size());
                for vertex in 0..self.n {
                    v[vertex * self.ell + b] = scale;
                }
                v
            })
            .collect()
    }
}

/// Edge information re-expressed in the world frame:
/// `Ad_{P^{-1}}^T * info * Ad_{P^{-1}}` for the first-endpoint pose `P`.
pub fn world_information(info: &DMatrix<f64>, pose_i: &Pose) -> DMatrix<f64> {
    pose_i.inverse().adjoint().congruence(info)
}

/// Information matrix of one edge, taken in the frame given by `frame`.
pub fn edge_information(g: &PoseGraph, edge: usize, frame: Frame) -> DMatrix<f64> {
    let e = &g.edges()[edge];
    match frame {
        Frame::Raw => e.info.clone(),
        Frame::World => world_information(&e.info, &g.vertices()[e.i].pose),
    }
}

/// All edge information matrices in the requested frame, in edge order.
pub fn edge_informations(g: &PoseGraph, frame: Frame) -> Vec<DMatrix<f64>> {
    parallel::map_indexed(g.m(), |j| edge_information(g, j, frame))
}

/// Single-edge contribution: +phi on both endpoint diagonal blocks, -phi on
/// the coupling blocks, zero elsewhere. Rank is exactly l for PD phi.
pub fn fim_generator(i: usize, k: usize, phi: &DMatrix<f64>, n: usize) -> FimMatrix {
    assert!(i < n && k < n && i != k, "invalid edge ({i},{k}) for n={n}");
    let ell = phi.nrows();
    let mut y = FimMatrix::zeros(n, ell);
    y.add_block(i, i, phi);
    y.add_block(k, k, phi);
    let neg = -phi;
    y.add_block(i.min(k), i.max(k), &neg);
    y
}

/// Sum of all edge generators with blocks taken in the requested frame.
pub fn assemble_fim(g: &PoseGraph, frame: Frame) -> Result<FimMatrix> {
    if !g.is_connected() {
        log::warn!(
            "assembling information matrix of a disconnected graph ({} components)",
            g.component_count()
        );
    }
    let phis = edge_informations(g, frame);
    Ok(accumulate(g, &phis))
}

/// Sum of all edge generators with the same block `phi` on every edge.
pub fn constant_fim(g: &PoseGraph, phi: &DMatrix<f64>) -> Result<FimMatrix> {
    let ell = g.tangent_dim();
    if phi.nrows() != ell || phi.ncols() != ell {
        return Err(Error::invalid(format!(
            "constant information block is {}x{}, expected {ell}x{ell}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    let mut y = FimMatrix::zeros(g.n(), ell);
    for e in g.edges() {
        y.add_block(e.i, e.i, phi);
        y.add_block(e.k, e.k, phi);
        let neg = -phi;
        y.add_block(e.i.min(e.k), e.i.max(e.k), &neg);
    }
    Ok(y)
}

fn accumulate(g: &PoseGraph, phis: &[DMatrix<f64>]) -> FimMatrix {
    let mut y = FimMatrix::zeros(g.n(), g.tangent_dim());
    for (e, phi) in g.edges().iter().zip(phis) {
        y.add_block(e.i, e.i, phi);
        y.add_block(e.k, e.k, phi);
        let neg = -phi;
        y.add_block(e.i.min(e.k), e.i.max(e.k), &neg);
    }
    y
}

/// Kronecker product of an unweighted Laplacian with a constant block:
/// the constant-uncertainty form of the system information matrix.
pub fn kron_constant_fim(l: &WeightedLaplacian, phi: &DMatrix<f64>) -> Result<FimMatrix> {
    if !l.is_unit_weighted() {
        return Err(Error::invalid(
            "Kronecker form requires the unweighted Laplacian",
        ));
    }
    if phi.nrows() != phi.ncols() {
        return Err(Error::invalid("constant information block must be square"));
    }
    let n = l.n();
    let ell = phi.nrows();
    let dense = l.to_dense();
    let mut y = FimMatrix::zeros(n, ell);
    for i in 0..n {
        for k in i..n {
            let w = dense[(i, k)];
            if w != 0.0 {
                y.add_block(i, k, &(phi * w));
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{incidence_column, PoseGraph};
    use crate::lie::Dim;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, ell: usize) -> DMatrix<f64> {
        let a = DMatrix::<f64>::from_fn(ell, ell, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::<f64>::identity(ell, ell) * 0.5
    }

    fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> PoseGraph {
        let spec = crate::synth::SynthSpec {
            nodes: n,
            dim: Dim::Two,
            loop_prob: extra as f64 / n as f64,
            loop_span: n,
            info: crate::synth::InfoModel::Correlated { eta: 0.4 },
            seed: rng.random(),
        };
        crate::synth::generate(&spec).unwrap()
    }

    #[test]
    fn world_information_identity_pose_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let phi = random_spd(&mut rng, 3);
        let out = world_information(&phi, &Pose::identity(Dim::Two));
        assert!((out - phi).abs().max() < 1e-15);
    }

    #[test]
    fn world_information_determinant_follows_congruence_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let pose = Pose::se2(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let phi = random_spd(&mut rng, 3);
            let out = world_information(&phi, &pose);
            let ad = pose.inverse().adjoint().into_matrix();
            assert_relative_eq!(
                out.determinant(),
                ad.determinant().powi(2) * phi.determinant(),
                max_relative = 1e-9
            );
            // congruence keeps symmetry and definiteness
            assert!(((&out - out.transpose()).abs().max()) <= 1e-12 * out.abs().max());
            assert!(out.cholesky().is_some());
        }
    }

    #[test]
    fn world_information_quarter_turn_matches_oracle() {
        let pose = Pose::se2(0.0, 0.0, std::f64::consts::PI / 2.0);
        let phi = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 7.0],
        );
        // explicit Ad of the inverse pose, then the congruence by hand
        let ad = pose.inverse().adjoint().into_matrix();
        let oracle = ad.transpose() * &phi * &ad;
        let got = world_information(&phi, &pose);
        assert!((got - &oracle).abs().max() < 1e-12);
        // pure rotation: translation variances swap
        assert_relative_eq!(oracle[(0, 0)], 5.0, epsilon = 1e-12);
        assert_relative_eq!(oracle[(1, 1)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_two_vertices() {
        let phi = DMatrix::<f64>::identity(3, 3);
        let y = fim_generator(0, 1, &phi, 2);
        let dense = y.to_dense();
        let expected = DMatrix::from_fn(6, 6, |r, c| {
            let (bi, bk) = (r / 3, c / 3);
            if r % 3 != c % 3 {
                0.0
            } else if bi == bk {
                1.0
            } else {
                -1.0
            }
        });
        assert_eq!(dense, expected);
    }

    #[test]
    fn generator_rank_is_tangent_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let phi = random_spd(&mut rng, 3);
        let y = fim_generator(0, 2, &phi, 4).to_dense();
        assert_eq!(y.rank(1e-9), 3);
    }

    #[test]
    fn odometry_and_loop_generators_differ_only_in_placement() {
        let phi = DMatrix::<f64>::identity(3, 3) * 2.0;
        let odo = fim_generator(0, 1, &phi, 10);
        let loop_closure = fim_generator(0, 9, &phi, 10);
        assert_eq!(odo.block(0, 1).unwrap(), loop_closure.block(0, 9).unwrap());
        assert_eq!(odo.block(1, 1).unwrap(), loop_closure.block(9, 9).unwrap());
        assert!(loop_closure.block(0, 1).is_none());
    }

    #[test]
    fn assemble_two_vertex_chain() {
        let text = "\
VERTEX_SE2 0 0 0 0
VERTEX_SE2 1 1 0 0
EDGE_SE2 0 1 1 0 0 1 0 0 1 0 1
";
        let g = PoseGraph::parse_str(text).unwrap().graph;
        let y = assemble_fim(&g, Frame::World).unwrap();
        // identity vertex poses: world equals raw here
        let dense = y.to_dense();
        let mut eig: Vec<f64> = dense.symmetric_eigenvalues().iter().cloned().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for b in 0..3 {
            assert!(eig[b].abs() < 1e-12);
            assert_relative_eq!(eig[b + 3], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_kronecker_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10 {
            let n = rng.random_range(4..9);
            let g = random_connected_graph(&mut rng, n, 3);
            let y = assemble_fim(&g, Frame::World).unwrap();
            // independent dense reconstruction from incidence columns
            let ell = g.tangent_dim();
            let mut oracle = DMatrix::<f64>::zeros(g.n() * ell, g.n() * ell);
            for (j, e) in g.edges().iter().enumerate() {
                let q = incidence_column(e.i, e.k, g.n());
                let ej = &q * q.transpose();
                let phi = edge_information(&g, j, Frame::World);
                oracle += ej.kronecker(&phi);
            }
            assert!((y.to_dense() - oracle).abs().max() < 1e-12);
        }
    }

    #[test]
    fn block_support_matches_laplacian_pattern() {
        // chain of ten vertices plus one loop closure
        let mut text = String::new();
        for id in 0..10 {
            text.push_str(&format!("VERTEX_SE2 {id} {id} 0 0\n"));
        }
        for i in 0..9 {
            text.push_str(&format!("EDGE_SE2 {i} {} 1 0 0 1 0 0 1 0 1\n", i + 1));
        }
        text.push_str("EDGE_SE2 0 9 1 0 0 1 0 0 1 0 1\n");
        let g = PoseGraph::parse_str(&text).unwrap().graph;
        let y = assemble_fim(&g, Frame::World).unwrap();

        let l = g.unweighted_laplacian();
        let mut expected: Vec<(usize, usize)> = l.support();
        expected.extend((0..g.n()).map(|i| (i, i)));
        expected.sort_unstable();
        assert_eq!(y.block_support(), expected);
    }

    #[test]
    fn kron_constant_matches_edgewise_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let g = random_connected_graph(&mut rng, 7, 2);
        let phi = random_spd(&mut rng, 3);
        let via_edges = constant_fim(&g, &phi).unwrap();
        let via_kron = kron_constant_fim(&g.unweighted_laplacian(), &phi).unwrap();
        assert!((via_edges.to_dense() - via_kron.to_dense()).abs().max() < 1e-12);
    }

    #[test]
    fn kron_identity_block_replicates_laplacian_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let g = random_connected_graph(&mut rng, 6, 2);
        let l = g.unweighted_laplacian();
        let y = kron_constant_fim(&l, &DMatrix::<f64>::identity(3, 3)).unwrap();
        let mut lap_eigs: Vec<f64> = l.to_dense().symmetric_eigenvalues().iter().cloned().collect();
        lap_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut y_eigs: Vec<f64> = y.to_dense().symmetric_eigenvalues().iter().cloned().collect();
        y_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (idx, val) in y_eigs.iter().enumerate() {
            assert_relative_eq!(*val, lap_eigs[idx / 3], epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn kron_requires_unit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let g = random_connected_graph(&mut rng, 5, 1);
        let weighted = g.laplacian(&vec![2.0; g.m()]).unwrap();
        assert!(kron_constant_fim(&weighted, &DMatrix::<f64>::identity(3, 3)).is_err());
    }

    #[test]
    fn gauge_vectors_are_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let g = random_connected_graph(&mut rng, 8, 3);
        let y = assemble_fim(&g, Frame::World).unwrap();
        for v in y.gauge_basis() {
            assert!(y.matvec(&v).abs().max() < 1e-9 * y.to_dense().abs().max());
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let g = random_connected_graph(&mut rng, 6, 2);
        let y = assemble_fim(&g, Frame::World).unwrap();
        let dense = y.to_dense();
        for _ in 0..5 {
            let x = DVector::from_fn(y.size(), |_, _| rng.random_range(-1.0..1.0));
            assert!((y.matvec(&x) - &dense * &x).abs().max() < 1e-10);
        }
    }
}
