//! Optimality criteria over matrix spectra, graph connectivity indices, and
//! the graph-side estimators that approximate each criterion.
//!
//! A criterion maps the spectrum of an information matrix to one scalar:
//! T (arithmetic mean), D (geometric mean), A (harmonic mean), E (smallest)
//! and Emax (largest). Sums and products run over the nonzero part of the
//! spectrum while normalization divides by the nominal dimension, which is
//! what makes the graph-side closed forms exact:
//!
//! * T of an n-vertex Laplacian equals the average degree (weighted: average
//!   degree times mean weight),
//! * D equals `(n * t)^(1/n)` with `t` the (weighted) number of spanning
//!   trees from the matrix-tree theorem,
//! * A equals `n^2 / K` with `K` the Kirchhoff index (unweighted case only),
//! * E equals the algebraic connectivity, Emax the top Laplacian eigenvalue.
//!
//! The same convention makes criteria multiplicative across a Kronecker
//! product, which is the constant-uncertainty equivalence the replay harness
//! validates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::fim::{edge_informations, FimMatrix, Frame};
use crate::graph::{PoseGraph, WeightedLaplacian};
use crate::parallel;

/// Scalar uncertainty functional of a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Arithmetic mean of the eigenvalues (p = 1).
    T,
    /// Geometric mean (p = 0), evaluated through a log-sum.
    D,
    /// Harmonic mean (p = -1).
    A,
    /// Smallest retained eigenvalue.
    E,
    /// Largest retained eigenvalue.
    Emax,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::T,
        Criterion::D,
        Criterion::A,
        Criterion::E,
        Criterion::Emax,
    ];
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::T => write!(f, "t"),
            Criterion::D => write!(f, "d"),
            Criterion::A => write!(f, "a"),
            Criterion::E => write!(f, "e"),
            Criterion::Emax => write!(f, "emax"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(Criterion::T),
            "d" => Ok(Criterion::D),
            "a" => Ok(Criterion::A),
            "e" => Ok(Criterion::E),
            "emax" => Ok(Criterion::Emax),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Denominator used by the mean-type criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Divide by the nominal dimension (n, n*l, or l). Default; reproduces
    /// the closed-form graph indices exactly.
    Nominal,
    /// Divide by the retained eigenvalue count. Changes constants, never
    /// the ordering of candidate comparisons.
    Retained,
}

/// Numerical policy for spectra and eigensolves.
#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    /// Full dense eigensolve allowed up to this matrix dimension.
    pub dense_limit: usize,
    /// Near-zero threshold, relative to the largest eigenvalue.
    pub tau_rel: f64,
    pub normalization: Normalization,
    /// Iteration budget for the Lanczos path.
    pub max_iterations: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            dense_limit: 3000,
            tau_rel: 1e-9,
            normalization: Normalization::Nominal,
            max_iterations: 500,
        }
    }
}

/// Sorted eigenvalues with the nominal dimension they came from and the
/// count of retained (above-threshold) values.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    d_nom: usize,
    retained: usize,
    tau: f64,
}

impl Spectrum {
    /// Classify eigenvalues against the relative threshold
    /// `tau = tau_rel * max |eigenvalue|`.
    ///
    /// Values below `-tau` mean the matrix was not positive semi-definite
    /// and are rejected.
    pub fn from_eigenvalues(mut values: Vec<f64>, d_nom: usize, tau_rel: f64) -> Result<Spectrum> {
        if values.is_empty() || d_nom < values.len() {
            return Err(Error::invalid(format!(
                "{} eigenvalues do not fit nominal dimension {d_nom}",
                values.len()
            )));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        let scale = values
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let tau = tau_rel * scale;
        if values[0] < -tau {
            return Err(Error::invalid(format!(
                "eigenvalue {:.6e} below -tau: matrix is not positive semi-definite",
                values[0]
            )));
        }
        let retained = values.iter().filter(|&&v| v > tau).count();
        Ok(Spectrum {
            values,
            d_nom,
            retained,
            tau,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The retained (nonzero) eigenvalues, ascending.
    pub fn retained_values(&self) -> &[f64] {
        &self.values[self.values.len() - self.retained..]
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    /// Count of eigenvalues classified as zero.
    pub fn zero_count(&self) -> usize {
        self.values.len() - self.retained
    }

    pub fn d_nom(&self) -> usize {
        self.d_nom
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Full spectrum of a symmetric positive semi-definite matrix.
pub fn matrix_spectrum(m: &DMatrix<f64>, d_nom: usize, tau_rel: f64) -> Result<Spectrum> {
    Spectrum::from_eigenvalues(eigen::symmetric_eigenvalues(m), d_nom, tau_rel)
}

/// Evaluate a criterion on a spectrum with nominal-dimension normalization.
pub fn kiefer(spectrum: &Spectrum, criterion: Criterion) -> Result<f64> {
    kiefer_with(spectrum, criterion, Normalization::Nominal)
}

pub fn kiefer_with(
    spectrum: &Spectrum,
    criterion: Criterion,
    normalization: Normalization,
) -> Result<f64> {
    let retained = spectrum.retained_values();
    if retained.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let denom = match normalization {
        Normalization::Nominal => spectrum.d_nom() as f64,
        Normalization::Retained => retained.len() as f64,
    };
    match criterion {
        Criterion::T => Ok(retained.iter().sum::<f64>() / denom),
        Criterion::D => {
            if retained[0] <= 0.0 {
                return Err(Error::invalid(
                    "nonpositive eigenvalue under the geometric-mean criterion",
                ));
            }
            Ok((retained.iter().map(|v| v.ln()).sum::<f64>() / denom).exp())
        }
        Criterion::A => {
            if retained[0] <= 0.0 {
                return Err(Error::invalid(
                    "nonpositive eigenvalue under the harmonic-mean criterion",
                ));
            }
            Ok(denom / retained.iter().map(|v| 1.0 / v).sum::<f64>())
        }
        Criterion::E => Ok(retained[0]),
        Criterion::Emax => Ok(*retained.last().unwrap()),
    }
}

/// Natural log of the (weighted) number of spanning trees, via the
/// log-determinant of the anchored Laplacian.
///
/// Computed from a triangular factorization so large graphs neither
/// overflow nor lose precision to a raw determinant.
pub fn spanning_trees_log(l: &WeightedLaplacian) -> Result<f64> {
    if l.n() == 0 {
        return Err(Error::invalid("empty Laplacian"));
    }
    if l.n() == 1 {
        return Ok(0.0);
    }
    let reduced = l.reduced_dense();
    let chol = reduced.cholesky().ok_or(Error::ReducedFactorization)?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(log_det)
}

/// Second-smallest Laplacian eigenvalue; zero (within threshold) exactly for
/// disconnected graphs.
pub fn algebraic_connectivity(l: &WeightedLaplacian) -> Result<f64> {
    if l.n() < 2 {
        return Err(Error::invalid(
            "algebraic connectivity needs at least two vertices",
        ));
    }
    let vals = eigen::symmetric_eigenvalues(&l.to_dense());
    Ok(vals[1])
}

/// Largest Laplacian eigenvalue.
pub fn largest_laplacian_eigenvalue(l: &WeightedLaplacian) -> Result<f64> {
    if l.n() == 0 {
        return Err(Error::invalid("empty Laplacian"));
    }
    let vals = eigen::symmetric_eigenvalues(&l.to_dense());
    Ok(*vals.last().unwrap())
}

/// Kirchhoff index: n times the sum of reciprocal nonzero Laplacian
/// eigenvalues. Defined for connected unweighted graphs; the weighted
/// variant is rejected.
pub fn kirchhoff_index(l: &WeightedLaplacian) -> Result<f64> {
    if !l.is_unit_weighted() {
        return Err(Error::invalid(
            "weighted Kirchhoff index is not supported; use unit weights",
        ));
    }
    let spectrum = matrix_spectrum(&l.to_dense(), l.n(), 1e-9)?;
    if spectrum.zero_count() != 1 {
        return Err(Error::Disconnected {
            components: spectrum.zero_count(),
        });
    }
    Ok(l.n() as f64 * spectrum.retained_values().iter().map(|v| 1.0 / v).sum::<f64>())
}

/// How one edge information matrix becomes a scalar Laplacian weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeWeightScheme {
    /// Largest eigenvalue (the spectral norm of a PD matrix). Yields the
    /// eigenvalue-dominance upper bound for every criterion.
    Infinity,
    /// The given criterion of the edge matrix itself. Yields the
    /// same-criterion approximation (exact for T, exact for isotropic
    /// blocks).
    Criterion(Criterion),
}

/// Scalar weight of one edge information matrix under a weighting scheme.
pub fn edge_weight(phi: &DMatrix<f64>, scheme: EdgeWeightScheme) -> Result<f64> {
    let ell = phi.nrows();
    let spectrum = matrix_spectrum(phi, ell, 1e-12)?;
    if spectrum.retained() != ell {
        return Err(Error::invalid(
            "edge information matrix is not positive definite",
        ));
    }
    match scheme {
        EdgeWeightScheme::Infinity => kiefer(&spectrum, Criterion::Emax),
        EdgeWeightScheme::Criterion(c) => kiefer(&spectrum, c),
    }
}

/// Weighting policy for graph-side estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// All weights 1 (the constant-uncertainty structure).
    Unit,
    /// Every edge weighted by its largest eigenvalue.
    Infinity,
    /// Every edge weighted by the criterion being estimated.
    MatchCriterion,
}

impl std::fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightScheme::Unit => write!(f, "unit"),
            WeightScheme::Infinity => write!(f, "infinity"),
            WeightScheme::MatchCriterion => write!(f, "criterion"),
        }
    }
}

/// Per-edge weights for a whole graph under a weighting scheme.
pub fn edge_weights(
    g: &PoseGraph,
    frame: Frame,
    scheme: EdgeWeightScheme,
) -> Result<Vec<f64>> {
    let phis = edge_informations(g, frame);
    parallel::map_indexed(g.m(), |j| edge_weight(&phis[j], scheme))
        .into_iter()
        .collect()
}

/// Graph-side estimate of a criterion: weight the edges, build the weighted
/// Laplacian, and evaluate the matching connectivity index.
pub fn graph_estimate(
    g: &PoseGraph,
    frame: Frame,
    criterion: Criterion,
    scheme: WeightScheme,
) -> Result<f64> {
    if criterion == Criterion::A && scheme != WeightScheme::Unit {
        return Err(Error::invalid(
            "harmonic-mean criterion is only estimated with unit weights; \
             the weighted Kirchhoff index is not supported",
        ));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected {
            components: g.component_count(),
        });
    }
    let weights = match scheme {
        WeightScheme::Unit => vec![1.0; g.m()],
        WeightScheme::Infinity => edge_weights(g, frame, EdgeWeightScheme::Infinity)?,
        WeightScheme::MatchCriterion => {
            edge_weights(g, frame, EdgeWeightScheme::Criterion(criterion))?
        }
    };
    let laplacian = g.laplacian(&weights)?;
    laplacian_index(g, &laplacian, criterion)
}

/// Map a criterion to its connectivity index on an already-built Laplacian.
pub fn laplacian_index(
    g: &PoseGraph,
    laplacian: &WeightedLaplacian,
    criterion: Criterion,
) -> Result<f64> {
    let n = g.n() as f64;
    match criterion {
        Criterion::T => Ok(g.average_degree() * laplacian.mean_weight()),
        Criterion::D => {
            let log_t = spanning_trees_log(laplacian)?;
            Ok(((n.ln() + log_t) / n).exp())
        }
        Criterion::A => Ok(n * n / kirchhoff_index(laplacian)?),
        Criterion::E => algebraic_connectivity(laplacian),
        Criterion::Emax => largest_laplacian_eigenvalue(laplacian),
    }
}

/// Spectrum of an assembled information matrix with the rigid-transform
/// gauge classified as zero.
///
/// Dense path only; errors when the matrix exceeds the dense limit or when
/// the near-zero eigenvalue count differs from the tangent dimension.
pub fn fim_spectrum(y: &FimMatrix, opts: &SpectralOptions) -> Result<Spectrum> {
    let size = y.size();
    if size > opts.dense_limit {
        return Err(Error::DenseLimit {
            size,
            limit: opts.dense_limit,
        });
    }
    let spectrum = matrix_spectrum(&y.to_dense(), size, opts.tau_rel)?;
    if spectrum.zero_count() != y.ell() {
        return Err(Error::GaugeCount {
            expected: y.ell(),
            found: spectrum.zero_count(),
        });
    }
    Ok(spectrum)
}

/// Criterion value of an assembled information matrix over its nonzero
/// spectrum.
///
/// Within the dense limit the full spectrum is computed once. Beyond it,
/// T falls back to the trace identity and E/Emax to gauge-deflated Lanczos
/// solves (valid on connected graphs); D and A genuinely need the full
/// spectrum and report the size limit instead.
pub fn fim_criteria(y: &FimMatrix, criterion: Criterion) -> Result<f64> {
    fim_criteria_with(y, criterion, &SpectralOptions::default())
}

pub fn fim_criteria_with(
    y: &FimMatrix,
    criterion: Criterion,
    opts: &SpectralOptions,
) -> Result<f64> {
    let size = y.size();
    if size <= opts.dense_limit {
        let spectrum = fim_spectrum(y, opts)?;
        return kiefer_with(&spectrum, criterion, opts.normalization);
    }
    match criterion {
        Criterion::T => {
            let denom = match opts.normalization {
                Normalization::Nominal => size as f64,
                Normalization::Retained => (size - y.ell()) as f64,
            };
            Ok(y.trace() / denom)
        }
        Criterion::E => Ok(eigen::fim_extremal_eigenvalues(y, opts.max_iterations)?.0),
        Criterion::Emax => Ok(eigen::fim_extremal_eigenvalues(y, opts.max_iterations)?.1),
        Criterion::D | Criterion::A => Err(Error::DenseLimit {
            size,
            limit: opts.dense_limit,
        }),
    }
}
