use std::fs;
use std::path::Path;

use denoise_cli::tu::{parse_tudataset, validate_dataset, write_tudataset, AttrSource, ClassPolicy, TuError, TuOptions};
use denoise_core::graph::{gen_synthetic, SynthConfig};
use denoise_core::{Graph, Label, Matrix};

fn write(dir: &Path, name: &str, suffix: &str, body: &str) {
    fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
}

/// Graph 1 holds nodes 1 and 2 joined by an edge (listed both ways),
/// graph 2 the single node 3.
fn toy(dir: &Path) {
    write(dir, "TOY", "A", "1, 2\n2, 1\n");
    write(dir, "TOY", "graph_indicator", "1\n1\n2\n");
    write(dir, "TOY", "graph_labels", "1\n-1\n");
    write(dir, "TOY", "node_attributes", "0.5, -1.0\n2.0, 0.25\n3.0, 4.0\n");
}

#[test]
fn two_graph_fixture_parses_exactly() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    let t = parse_tudataset(dir.path(), "TOY", &TuOptions::default()).unwrap();
    let attrs0 = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]).unwrap();
    let attrs1 = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
    // the two classes tie; the larger value (1) becomes anomalous
    let expected = [
        Graph::new(2, &[(0, 1)], attrs0, Label::Anomalous).unwrap(),
        Graph::new(1, &[], attrs1, Label::Normal).unwrap(),
    ];
    assert_eq!(t.dataset.graphs(), &expected);
    assert_eq!(t.dataset.name(), "TOY");
    assert_eq!(t.graph_classes, Some(vec![1, -1]));
    assert_eq!(t.anomaly_class, Some(1));
    assert_eq!(t.attr_source, AttrSource::Attributes);

    let explicit = TuOptions {
        policy: ClassPolicy::Explicit(-1),
        ..TuOptions::default()
    };
    let t = parse_tudataset(dir.path(), "TOY", &explicit).unwrap();
    assert_eq!(t.dataset.labels(), vec![Label::Normal, Label::Anomalous]);
}

#[test]
fn whitespace_separators_parse_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    toy(a.path());
    toy(b.path());
    write(b.path(), "TOY", "A", "1 2\n\n2\t1\n");
    write(b.path(), "TOY", "node_attributes", "0.5 -1.0\n2.0\t0.25\n3.0 , 4.0\n");
    let pa = parse_tudataset(a.path(), "TOY", &TuOptions::default()).unwrap();
    let pb = parse_tudataset(b.path(), "TOY", &TuOptions::default()).unwrap();
    assert_eq!(pa.dataset, pb.dataset);
}

#[test]
fn missing_edge_file() {
    let dir = tempfile::tempdir().unwrap();
    toy(dir.path());
    fs::remove_file(dir.path().join("TOY_A.txt")).unwrap();
    match parse_tudataset(dir.path(), "TOY", &TuOptions::default()) {
        Err(TuError::MissingFile(p)) => assert!(p.ends_with("TOY_A.txt")),
        other => panic!("expected MissingFile, got {other:?}"),
    }
}

#[test]
fn written_datasets_parse_back_and_keep_count_invariants() {
    let cfg = SynthConfig {
        n_graphs: 40,
        nodes_lo: 1,
        nodes_hi: 9,
        anom_frac: 0.3,
        ..SynthConfig::default()
    };
    let d = gen_synthetic(&cfg, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_tudataset(&d, dir.path(), "S").unwrap();
    let t = parse_tudataset(dir.path(), "S", &TuOptions::default()).unwrap();
    assert_eq!(t.dataset.graphs(), d.graphs());

    let edges: usize = t.dataset.graphs().iter().map(Graph::edge_count).sum();
    assert_eq!(2 * edges, t.directed_lines);
    let nodes: usize = t.dataset.graphs().iter().map(Graph::node_count).sum();
    let indicator = fs::read_to_string(dir.path().join("S_graph_indicator.txt")).unwrap();
    assert_eq!(nodes, indicator.lines().count());

    let r = validate_dataset(&t.dataset);
    assert_eq!(r.graphs, 40);
    assert_eq!(r.class_counts, d.class_counts());
    assert!(r.is_clean());
}

/// Runs only when a local copy of the AIDS collection is available.
#[test]
fn aids_matches_published_statistics() {
    let Some(dir) = std::env::var_os("DENOISE_AIDS_DIR") else {
        eprintln!("DENOISE_AIDS_DIR not set; skipping");
        return;
    };
    let t = parse_tudataset(Path::new(&dir), "AIDS", &TuOptions::default()).unwrap();
    let r = validate_dataset(&t.dataset);
    assert_eq!(r.graphs, 2000);
    assert_eq!(r.attr_dim, 38);
    assert!((r.mean_nodes / 15.7 - 1.0).abs() <= 0.01, "{}", r.mean_nodes);
    // published edge averages count both directions
    assert!((2.0 * r.mean_edges / 32.4 - 1.0).abs() <= 0.01, "{}", r.mean_edges);
}
