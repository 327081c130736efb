//! Parse a pose-graph file and print its health report.
//!
//! ```bash
//! cargo run --example parse_and_validate [-- path/to/graph.g2o]
//! ```
//!
//! Without an argument a small embedded fixture is used.

use spectral_pgo::report::{validate_report, DEFAULT_ANOMALY_FACTOR};
use spectral_pgo::{ParseOptions, PoseGraph};

const FIXTURE: &str = "\
# chain of four poses with one loop closure
VERTEX_SE2 0 0.0 0.0 0.0
VERTEX_SE2 1 1.0 0.0 0.1
VERTEX_SE2 2 2.0 0.2 0.2
VERTEX_SE2 3 2.9 0.5 0.3
EDGE_SE2 0 1 1.0 0.0 0.1 40 0 0 40 0 160
EDGE_SE2 1 2 1.0 0.2 0.1 40 0 0 40 0 160
EDGE_SE2 2 3 0.9 0.3 0.1 40 0 0 40 0 160
EDGE_SE2 0 3 2.9 0.5 0.3 4 0 0 4 0 16
UNSUPPORTED_TAG 1 2 3
";

fn main() {
    let parsed = match std::env::args().nth(1) {
        Some(path) => PoseGraph::from_file(&path, &ParseOptions::default())
            .unwrap_or_else(|e| panic!("cannot parse {path}: {e}")),
        None => PoseGraph::parse_str(FIXTURE).unwrap(),
    };
    println!(
        "parsed graph: {} vertices, {} edges, {} unknown tags\n",
        parsed.graph.n(),
        parsed.graph.m(),
        parsed.unknown_tags
    );

    let report = validate_report(&parsed, DEFAULT_ANOMALY_FACTOR).unwrap();
    println!("{report}");

    // round-trip: serializing and reparsing reproduces the graph exactly
    let text = parsed.graph.to_g2o_string();
    let again = PoseGraph::parse_str(&text).unwrap().graph;
    println!("\nserialize/parse round-trip identical: {}", again == parsed.graph);
}
