//! Speedup acceptance check, isolated in its own test target so the timing
//! never competes with other tests for cores.

use std::time::Instant;

use spectral_pgo::{complexity_probe, Dim};

#[test]
fn c08_graph_route_speedup() {
    let start = Instant::now();
    let rows = complexity_probe(&[250, 500, 1000], Dim::Two).unwrap();
    let elapsed = start.elapsed();

    // the absolute advantage of the graph route must keep growing with size
    let mut gap_grows = true;
    let mut previous_gap = 0i128;
    for row in &rows {
        let gap = row.fim_time_ns as i128 - row.graph_time_ns as i128;
        println!(
            "[acceptance] C08 n={}: matrix {:.3}s, graph {:.3}s, gap {:.3}s",
            row.n,
            row.fim_time_ns as f64 * 1e-9,
            row.graph_time_ns as f64 * 1e-9,
            gap as f64 * 1e-9
        );
        gap_grows &= gap > previous_gap;
        previous_gap = gap;
    }
    let last = rows.last().unwrap();
    let ratio = last.fim_time_ns as f64 / last.graph_time_ns as f64;

    let pass = ratio >= 5.0 && elapsed.as_secs_f64() < 600.0 && gap_grows;
    println!(
        "[acceptance] C08 speedup at n=1000: {} (matrix/graph time ratio {ratio:.1}, probe runtime {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(
        pass,
        "speedup ratio {ratio:.2} (need >= 5), gap growth {gap_grows}, runtime {:.1}s",
        elapsed.as_secs_f64()
    );
}
