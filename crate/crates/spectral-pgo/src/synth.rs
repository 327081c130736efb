//! Synthetic pose-graph generation: a chain backbone with optional loop
//! closures, integrated from small random twists so world-frame adjoints are
//! nontrivial.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeSpec, PoseGraph, Vertex};
use crate::lie::{Dim, Pose};

/// Per-edge information matrix model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InfoModel {
    /// Random positive multiple of the identity per edge.
    Isotropic,
    /// Independent random diagonal entries per edge.
    Diagonal,
    /// Random diagonal plus off-diagonal entries bounded by the fraction
    /// `eta` of the diagonal, keeping strict diagonal dominance (hence
    /// positive definiteness) for `eta < 1`.
    Correlated { eta: f64 },
}

/// Deterministic generator specification.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub nodes: usize,
    pub dim: Dim,
    /// Probability of adding one loop closure when a node is created.
    pub loop_prob: f64,
    /// Maximum vertex-index span of a loop closure.
    pub loop_span: usize,
    pub info: InfoModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            nodes: 100,
            dim: Dim::Two,
            loop_prob: 0.1,
            loop_span: 10,
            info: InfoModel::Diagonal,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::invalid("node count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.loop_prob) {
            return Err(Error::invalid("loop probability must lie in [0, 1]"));
        }
        if self.loop_span == 0 {
            return Err(Error::invalid("loop span must be positive"));
        }
        if let InfoModel::Correlated { eta } = self.info {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::invalid("eta must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Generate a pose graph: a connected chain backbone of `nodes` vertices
/// plus random loop closures, reproducible for a fixed seed.
pub fn generate(spec: &SynthSpec) -> Result<PoseGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ell = spec.dim.tangent_dim();

    let mut poses = vec![Pose::identity(spec.dim)];
    let mut vertices = vec![Vertex {
        id: 0,
        pose: poses[0].clone(),
    }];
    let mut edges: Vec<EdgeSpec> = Vec::new();

    for i in 1..spec.nodes {
        let step = chain_twist(&mut rng, spec.dim);
        let measurement = Pose::exp(spec.dim, &step)?;
        let pose = poses[i - 1].compose(&measurement)?;
        poses.push(pose.clone());
        vertices.push(Vertex {
            id: i as i64,
            pose,
        });
        edges.push(EdgeSpec {
            id_i: (i - 1) as i64,
            id_k: i as i64,
            measurement,
            info: info_matrix(&mut rng, ell, spec.info),
        });

        // optional loop closure back to an earlier node, consistent with the
        // integrated poses up to a small twist perturbation
        let lo = i.saturating_sub(spec.loop_span);
        if i >= 2 && lo < i - 1 && rng.random_bool(spec.loop_prob) {
            let target = rng.random_range(lo..i - 1);
            let exact = poses[target].inverse().compose(&poses[i])?;
            let noise: Vec<f64> = (0..ell).map(|_| rng.random_range(-0.01..0.01)).collect();
            let measurement = exact.compose(&Pose::exp(spec.dim, &noise)?)?;
            edges.push(EdgeSpec {
                id_i: target as i64,
                id_k: i as i64,
                measurement,
                info: info_matrix(&mut rng, ell, spec.info),
            });
        }
    }

    PoseGraph::from_parts(spec.dim, vertices, edges)
}

/// Forward motion with a biased turn rate, so trajectories curl inside a
/// bounded region instead of wandering off like a random walk. Keeping pose
/// translations bounded keeps the world-frame adjoints well conditioned.
fn chain_twist(rng: &mut ChaCha8Rng, dim: Dim) -> Vec<f64> {
    match dim {
        Dim::Two => vec![
            rng.random_range(0.5..1.5),
            rng.random_range(-0.1..0.1),
            rng.random_range(0.08..0.35),
        ],
        Dim::Three => vec![
            rng.random_range(0.5..1.5),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.1..0.1),
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
            rng.random_range(0.08..0.35),
        ],
    }
}

fn info_matrix(rng: &mut ChaCha8Rng, ell: usize, model: InfoModel) -> DMatrix<f64> {
    match model {
        InfoModel::Isotropic => {
            DMatrix::<f64>::identity(ell, ell) * rng.random_range(0.5..5.0)
        }
        InfoModel::Diagonal => {
            DMatrix::from_diagonal(&nalgebra::DVector::from_fn(ell, |_, _| {
                rng.random_range(0.5..5.0)
            }))
        }
        InfoModel::Correlated { eta } => {
            // rotation components are an order of magnitude stiffer than
            // translation, the usual shape of odometry information blocks
            let translations = ell / 2 + ell % 2;
            let diag: Vec<f64> = (0..ell)
                .map(|axis| {
                    if axis < translations {
                        rng.random_range(1.0..12.0)
                    } else {
                        rng.random_range(100.0..300.0)
                    }
                })
                .collect();
            let mut m = DMatrix::zeros(ell, ell);
            for (i, &d) in diag.iter().enumerate() {
                m[(i, i)] = d;
            }
            let bound = |i: usize, k: usize| eta * diag[i].min(diag[k]) / (ell - 1) as f64;
            for i in 0..ell {
                for k in i + 1..ell {
                    let v = rng.random_range(-1.0..1.0) * bound(i, k);
                    m[(i, k)] = v;
                    m[(k, i)] = v;
                }
            }
            m
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_chain_has_n_minus_one_edges() {
        let spec = SynthSpec {
            nodes: 10,
            loop_prob: 0.0,
            ..SynthSpec::default()
        };
        let g = generate(&spec).unwrap();
        assert_eq!(g.n(), 10);
        assert_eq!(g.m(), 9);
        assert!(g.is_connected());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            nodes: 40,
            loop_prob: 0.3,
            info: InfoModel::Correlated { eta: 0.5 },
            seed: 123,
            ..SynthSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_g2o_string(), b.to_g2o_string());
    }

    #[test]
    fn generated_graphs_pass_validation() {
        for dim in [Dim::Two, Dim::Three] {
            for model in [
                InfoModel::Isotropic,
                InfoModel::Diagonal,
                InfoModel::Correlated { eta: 0.9 },
            ] {
                let spec = SynthSpec {
                    nodes: 25,
                    dim,
                    loop_prob: 0.4,
                    loop_span: 8,
                    info: model,
                    seed: 7,
                };
                let g = generate(&spec).unwrap();
                assert!(g.is_connected());
                // reparse what we would write to disk
                let reparsed = PoseGraph::parse_str(&g.to_g2o_string()).unwrap().graph;
                assert_eq!(g, reparsed);
            }
        }
    }

    #[test]
    fn loop_measurements_are_consistent_with_poses() {
        let spec = SynthSpec {
            nodes: 30,
            loop_prob: 0.5,
            loop_span: 10,
            seed: 11,
            ..SynthSpec::default()
        };
        let g = generate(&spec).unwrap();
        let mut closures = 0;
        for e in g.edges() {
            if e.k != e.i + 1 {
                closures += 1;
                let pi = &g.vertices()[e.i].pose;
                let pk = &g.vertices()[e.k].pose;
                let exact = pi.inverse().compose(pk).unwrap();
                let residual = exact.inverse().compose(&e.measurement).unwrap();
                let twist = residual.log().unwrap();
                assert!(twist.abs().max() < 0.05);
            }
        }
        assert!(closures > 0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_prob = SynthSpec {
            loop_prob: 1.5,
            ..SynthSpec::default()
        };
        assert!(generate(&bad_prob).is_err());
        let bad_eta = SynthSpec {
            info: InfoModel::Correlated { eta: 1.0 },
            ..SynthSpec::default()
        };
        assert!(generate(&bad_eta).is_err());
    }
}
