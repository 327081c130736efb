//! Reports and serialization: dataset validation, connectivity-index
//! queries, per-step CSV emission/parsing, JSON output, and summary tables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::criteria::{
    self, edge_weights, matrix_spectrum, Criterion, EdgeWeightScheme, WeightScheme,
};
use crate::error::{Error, Result};
use crate::fim::Frame;
use crate::graph::{Parsed, PoseGraph};
use crate::replay::{CriterionEntry, ReplaySummary, StepRecord};

/// Structural and numerical health report of a parsed graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidateReport {
    pub n: usize,
    pub m: usize,
    pub dim: String,
    pub connected: bool,
    pub components: usize,
    pub average_degree: f64,
    pub duplicate_pairs: usize,
    pub unknown_tags: usize,
    pub info_eig_min: f64,
    pub info_eig_max: f64,
    /// Edges whose largest information eigenvalue exceeds the median by the
    /// anomaly factor.
    pub anomalous_edges: Vec<AnomalousEdge>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnomalousEdge {
    pub edge: usize,
    pub i: usize,
    pub k: usize,
    pub spectral_norm: f64,
}

/// Default multiple of the median spectral norm above which an edge is
/// reported as anomalous.
pub const DEFAULT_ANOMALY_FACTOR: f64 = 1e3;

pub fn validate_report(parsed: &Parsed, anomaly_factor: f64) -> Result<ValidateReport> {
    let g = &parsed.graph;
    let mut norms = Vec::with_capacity(g.m());
    let mut eig_min = f64::INFINITY;
    let mut eig_max = f64::NEG_INFINITY;
    for j in 0..g.m() {
        let info = &g.edges()[j].info;
        let spectrum = matrix_spectrum(info, info.nrows(), 1e-12)?;
        let values = spectrum.values();
        eig_min = eig_min.min(values[0]);
        eig_max = eig_max.max(*values.last().unwrap());
        norms.push(*values.last().unwrap());
    }
    if g.m() == 0 {
        eig_min = 0.0;
        eig_max = 0.0;
    }
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    let anomalous_edges = norms
        .iter()
        .enumerate()
        .filter(|(_, &norm)| median > 0.0 && norm > anomaly_factor * median)
        .map(|(j, &norm)| AnomalousEdge {
            edge: j,
            i: g.edges()[j].i,
            k: g.edges()[j].k,
            spectral_norm: norm,
        })
        .collect();
    Ok(ValidateReport {
        n: g.n(),
        m: g.m(),
        dim: g.dim().to_string(),
        connected: g.is_connected(),
        components: g.component_count(),
        average_degree: g.average_degree(),
        duplicate_pairs: g.duplicate_pair_count(),
        unknown_tags: parsed.unknown_tags,
        info_eig_min: eig_min,
        info_eig_max: eig_max,
        anomalous_edges,
    })
}

impl std::fmt::Display for ValidateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "n={} m={} {} d̄={:.1}",
            self.n,
            self.m,
            if self.connected {
                "connected".to_string()
            } else {
                format!("disconnected({})", self.components)
            },
            self.average_degree
        )?;
        writeln!(f, "dim={} duplicate-pairs={} unknown-tags={}", self.dim, self.duplicate_pairs, self.unknown_tags)?;
        writeln!(
            f,
            "information eigenvalues: min={:.6e} max={:.6e}",
            self.info_eig_min, self.info_eig_max
        )?;
        if self.anomalous_edges.is_empty() {
            write!(f, "anomalous edges: none")?;
        } else {
            write!(f, "anomalous edges ({}):", self.anomalous_edges.len())?;
            for a in self.anomalous_edges.iter().take(10) {
                write!(f, " [{} ({},{}) |Φ|={:.3e}]", a.edge, a.i, a.k, a.spectral_norm)?;
            }
            if self.anomalous_edges.len() > 10 {
                write!(f, " ...")?;
            }
        }
        Ok(())
    }
}

/// Connectivity indices of a (possibly weighted) graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndicesReport {
    pub n: usize,
    pub m: usize,
    pub weighting: String,
    pub average_degree: f64,
    pub spanning_trees_log: f64,
    pub algebraic_connectivity: f64,
    /// Only defined for unit weights.
    pub kirchhoff: Option<f64>,
    pub largest_eigenvalue: f64,
}

/// Weight selection for the indices report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexWeighting {
    Unit,
    Infinity,
    Criterion(Criterion),
}

impl std::str::FromStr for IndexWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(IndexWeighting::Unit),
            "inf" | "infinity" => Ok(IndexWeighting::Infinity),
            other => Ok(IndexWeighting::Criterion(other.parse()?)),
        }
    }
}

impl std::fmt::Display for IndexWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndexWeighting::Unit => write!(f, "unit"),
            IndexWeighting::Infinity => write!(f, "inf"),
            IndexWeighting::Criterion(c) => write!(f, "{c}"),
        }
    }
}

pub fn indices_report(
    g: &PoseGraph,
    weighting: IndexWeighting,
    frame: Frame,
) -> Result<IndicesReport> {
    if !g.is_connected() {
        return Err(Error::Disconnected {
            components: g.component_count(),
        });
    }
    let weights = match weighting {
        IndexWeighting::Unit => vec![1.0; g.m()],
        IndexWeighting::Infinity => edge_weights(g, frame, EdgeWeightScheme::Infinity)?,
        IndexWeighting::Criterion(c) => edge_weights(g, frame, EdgeWeightScheme::Criterion(c))?,
    };
    let laplacian = g.laplacian(&weights)?;
    let kirchhoff = if laplacian.is_unit_weighted() {
        Some(criteria::kirchhoff_index(&laplacian)?)
    } else {
        None
    };
    Ok(IndicesReport {
        n: g.n(),
        m: g.m(),
        weighting: weighting.to_string(),
        average_degree: g.average_degree(),
        spanning_trees_log: criteria::spanning_trees_log(&laplacian)?,
        algebraic_connectivity: criteria::algebraic_connectivity(&laplacian)?,
        kirchhoff,
        largest_eigenvalue: criteria::largest_laplacian_eigenvalue(&laplacian)?,
    })
}

impl std::fmt::Display for IndicesReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "n={} m={} weighting={} d̄={:.4}",
            self.n, self.m, self.weighting, self.average_degree
        )?;
        writeln!(f, "log spanning trees = {:.12}", self.spanning_trees_log)?;
        writeln!(
            f,
            "algebraic connectivity = {:.12}",
            self.algebraic_connectivity
        )?;
        match self.kirchhoff {
            Some(k) => writeln!(f, "Kirchhoff index = {k:.12}")?,
            None => writeln!(f, "Kirchhoff index = (unit weights only)")?,
        }
        write!(f, "largest eigenvalue = {:.12}", self.largest_eigenvalue)
    }
}

const CSV_HEADER: [&str; 10] = [
    "step",
    "n",
    "m",
    "criterion",
    "fim_value",
    "graph_value",
    "rel_error",
    "bound_violated",
    "fim_time_ns",
    "graph_time_ns",
];

/// Format a float with 17 significant digits, enough for exact f64
/// round-trips through text.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write step records as long-format CSV (one row per criterion per step).
pub fn write_records_csv(w: impl Write, records: &[StepRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)
        .map_err(|e| Error::invalid(e.to_string()))?;
    for r in records {
        for e in &r.entries {
            let bound = match e.bound_violated {
                None => String::new(),
                Some(true) => "true".to_string(),
                Some(false) => "false".to_string(),
            };
            out.write_record([
                r.step.to_string(),
                r.n.to_string(),
                r.m.to_string(),
                e.criterion.to_string(),
                fmt_f64(e.fim_value),
                fmt_f64(e.graph_value),
                fmt_f64(e.rel_error),
                bound,
                e.fim_time_ns.to_string(),
                e.graph_time_ns.to_string(),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parse CSV produced by [`write_records_csv`] back into step records.
pub fn read_records_csv(r: impl Read) -> Result<Vec<StepRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid(e.to_string()))?
        .clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::invalid("unexpected CSV header"));
    }
    let mut records: Vec<StepRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::invalid(e.to_string()))?;
        let get = |idx: usize| row.get(idx).unwrap_or("");
        let step: usize = get(0).parse().map_err(|_| Error::invalid("bad step"))?;
        let n: usize = get(1).parse().map_err(|_| Error::invalid("bad n"))?;
        let m: usize = get(2).parse().map_err(|_| Error::invalid("bad m"))?;
        let entry = CriterionEntry {
            criterion: get(3).parse()?,
            fim_value: get(4).parse().map_err(|_| Error::invalid("bad fim_value"))?,
            graph_value: get(5)
                .parse()
                .map_err(|_| Error::invalid("bad graph_value"))?,
            rel_error: get(6).parse().map_err(|_| Error::invalid("bad rel_error"))?,
            bound_violated: match get(7) {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => return Err(Error::invalid(format!("bad bound flag {other:?}"))),
            },
            fim_time_ns: get(8).parse().map_err(|_| Error::invalid("bad time"))?,
            graph_time_ns: get(9).parse().map_err(|_| Error::invalid("bad time"))?,
        };
        match records.last_mut() {
            Some(last) if last.step == step => last.entries.push(entry),
            _ => records.push(StepRecord {
                step,
                n,
                m,
                entries: vec![entry],
            }),
        }
    }
    Ok(records)
}

/// Human-readable summary block.
pub fn format_summary(name: &str, summary: &ReplaySummary, skipped: usize, frame: Frame) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "replay {name}: {} steps ({} skipped), frame={frame}\n",
        summary.steps, skipped
    ));
    for c in &summary.per_criterion {
        out.push_str(&format!(
            "  {:<4} median err {:.6e} ({:.4}%)  max err {:.6e}  trend {:.3}  bound violations {}\n",
            c.criterion.to_string(),
            c.median_rel_error,
            100.0 * c.median_rel_error,
            c.max_rel_error,
            c.trend_agreement,
            c.bound_violations
        ));
    }
    out.push_str(&format!(
        "  time: matrix route {:.3} s, graph route {:.3} s, reduction {:.1}%\n",
        summary.total_fim_time_ns as f64 * 1e-9,
        summary.total_graph_time_ns as f64 * 1e-9,
        100.0 * summary.time_reduction
    ));
    out
}

fn median_pct(summary: &ReplaySummary, criterion: Criterion) -> String {
    summary
        .per_criterion
        .iter()
        .find(|c| c.criterion == criterion)
        .map(|c| format!("{:.2}%", 100.0 * c.median_rel_error))
        .unwrap_or_else(|| "-".to_string())
}

/// One summary row in the column order of the comparison tables:
/// dataset, n, m, average degree, median errors (Emax, T, D, E), route
/// times in minutes, and the time reduction.
pub fn markdown_summary(name: &str, g: &PoseGraph, summary: &ReplaySummary) -> String {
    let header = "| Dataset | n | m | d̄ | ΔEmax | ΔT | ΔD | ΔE | t_fim (min) | t_graph (min) | Δt |\n|---|---|---|---|---|---|---|---|---|---|---|\n";
    let row = format!(
        "| {} | {} | {} | {:.1} | {} | {} | {} | {} | {:.2} | {:.2} | {:.1}% |\n",
        name,
        g.n(),
        g.m(),
        g.average_degree(),
        median_pct(summary, Criterion::Emax),
        median_pct(summary, Criterion::T),
        median_pct(summary, Criterion::D),
        median_pct(summary, Criterion::E),
        summary.total_fim_time_ns as f64 / 60e9,
        summary.total_graph_time_ns as f64 / 60e9,
        100.0 * summary.time_reduction
    );
    format!("{header}{row}")
}

/// JSON document bundling a replay's records and summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayDocument {
    pub dataset: String,
    pub frame: Frame,
    pub weighting: String,
    pub summary: ReplaySummary,
    pub records: Vec<StepRecord>,
    pub skipped: Vec<crate::replay::SkippedStep>,
}

/// The weighting schemes accepted by the replay CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplayWeighting {
    Criterion,
    Infinity,
}

impl std::str::FromStr for ReplayWeighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "criterion" => Ok(ReplayWeighting::Criterion),
            "inf" | "infinity" => Ok(ReplayWeighting::Infinity),
            other => Err(Error::invalid(format!("unknown weighting {other:?}"))),
        }
    }
}

impl std::fmt::Display for ReplayWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayWeighting::Criterion => write!(f, "criterion"),
            ReplayWeighting::Infinity => write!(f, "infinity"),
        }
    }
}

/// Graph estimate under `Unit` weighting, used by index queries.
pub fn unit_estimate(g: &PoseGraph, criterion: Criterion) -> Result<f64> {
    criteria::graph_estimate(g, Frame::Raw, criterion, WeightScheme::Unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::Dim;
    use crate::replay::{replay, ReplayConfig, Weighting};
    use crate::synth::{generate, InfoModel, SynthSpec};
    use approx::assert_relative_eq;

    fn sample_records() -> Vec<StepRecord> {
        let g = generate(&SynthSpec {
            nodes: 8,
            dim: Dim::Two,
            loop_prob: 0.5,
            loop_span: 4,
            info: InfoModel::Correlated { eta: 0.4 },
            seed: 3,
        })
        .unwrap();
        let config = ReplayConfig::new(
            vec![Criterion::T, Criterion::D, Criterion::E, Criterion::Emax],
            Weighting::Infinity,
        );
        replay(&g, &config).unwrap().records
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records = sample_records();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &records).unwrap();
        let parsed = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(records, parsed);
    }

    #[test]
    fn validate_report_of_small_fixture() {
        let parsed = PoseGraph::parse_str(
            "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n",
        )
        .unwrap();
        let report = validate_report(&parsed, DEFAULT_ANOMALY_FACTOR).unwrap();
        assert!(report.to_string().starts_with("n=2 m=1 connected d̄=1.0"));
        assert_relative_eq!(report.info_eig_min, 1.0);
        assert_relative_eq!(report.info_eig_max, 1.0);
        assert!(report.anomalous_edges.is_empty());
    }

    #[test]
    fn anomalous_edges_are_flagged() {
        let mut text = String::new();
        for id in 0..6 {
            text.push_str(&format!("VERTEX_SE2 {id} {id} 0 0\n"));
        }
        for i in 0..5 {
            let scale = if i == 3 { 1e7 } else { 1.0 };
            text.push_str(&format!(
                "EDGE_SE2 {i} {} 1 0 0 {s} 0 0 {s} 0 {s}\n",
                i + 1,
                s = scale
            ));
        }
        let parsed = PoseGraph::parse_str(&text).unwrap();
        let report = validate_report(&parsed, 1e3).unwrap();
        assert_eq!(report.anomalous_edges.len(), 1);
        assert_eq!(report.anomalous_edges[0].edge, 3);
    }

    #[test]
    fn indices_report_triangle() {
        let text = "\
VERTEX_SE2 0 0 0 0
VERTEX_SE2 1 1 0 0
VERTEX_SE2 2 2 0 0
EDGE_SE2 0 1 1 0 0 1 0 0 1 0 1
EDGE_SE2 1 2 1 0 0 1 0 0 1 0 1
EDGE_SE2 2 0 1 0 0 1 0 0 1 0 1
";
        let g = PoseGraph::parse_str(text).unwrap().graph;
        let report = indices_report(&g, IndexWeighting::Unit, Frame::Raw).unwrap();
        assert_relative_eq!(report.spanning_trees_log, 3f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(report.algebraic_connectivity, 3.0, max_relative = 1e-9);
        assert_relative_eq!(report.kirchhoff.unwrap(), 2.0, max_relative = 1e-9);

        // identity information: criterion weighting collapses to unit weights
        let weighted = indices_report(&g, IndexWeighting::Criterion(Criterion::T), Frame::Raw)
            .unwrap();
        assert_relative_eq!(
            weighted.algebraic_connectivity,
            report.algebraic_connectivity,
            max_relative = 1e-12
        );
    }

    #[test]
    fn markdown_summary_has_table_column_order() {
        let records = sample_records();
        let summary = crate::replay::summarize(&records, true).unwrap();
        let g = generate(&SynthSpec {
            nodes: 8,
            dim: Dim::Two,
            loop_prob: 0.5,
            loop_span: 4,
            info: InfoModel::Correlated { eta: 0.4 },
            seed: 3,
        })
        .unwrap();
        let md = markdown_summary("sample", &g, &summary);
        let header = md.lines().next().unwrap();
        let cols: Vec<&str> = header
            .trim_matches('|')
            .split('|')
            .map(str::trim)
            .collect();
        assert_eq!(
            cols,
            [
                "Dataset",
                "n",
                "m",
                "d̄",
                "ΔEmax",
                "ΔT",
                "ΔD",
                "ΔE",
                "t_fim (min)",
                "t_graph (min)",
                "Δt"
            ]
        );
    }
}
