use std::fs;
use std::path::{Path, PathBuf};

use tdpmm::config::{MetricSpace, RunConfig};
use tdpmm::corpus::{self, Corpus, Dim, TripSchema};
use tdpmm::generator;
use tdpmm::graphs;
use tdpmm::pipeline::{self, Grid};

/// Eight stations on two lines (A1..A4, B1..B4) joined at A4–B1.
/// Line A is residential, line B commercial.
fn write_network(dir: &Path) -> (PathBuf, PathBuf) {
    let stations: Vec<String> = ["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"].map(String::from).to_vec();
    let links: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
    let hops = graphs::hop_distances(&stations, &links);
    let mut text = format!(",{}\n", stations.join(","));
    for (name, row) in stations.iter().zip(&hops.values) {
        let cells: Vec<String> = row.iter().map(u32::to_string).collect();
        text.push_str(&format!("{name},{}\n", cells.join(",")));
    }
    let hops_path = dir.join("hops.csv");
    fs::write(&hops_path, text).unwrap();

    let mut poi = String::from("station,homes,shops\n");
    for s in &stations {
        let row = if s.starts_with('A') { "9,1" } else { "1,9" };
        poi.push_str(&format!("{s},{row}\n"));
    }
    let poi_path = dir.join("poi.csv");
    fs::write(&poi_path, poi).unwrap();
    (hops_path, poi_path)
}

/// Commuters ride A→B in the morning and back in the evening; shoppers
/// ride within line B at midday.
fn write_trips(dir: &Path) -> PathBuf {
    let mut text = String::from("passenger_id,origin,destination,time\n");
    for p in 0..30 {
        let home = ["A1", "A2"][p % 2];
        let work = ["B3", "B4"][p % 2];
        for day in 0..4 {
            text.push_str(&format!("c{p},{home},{work},2017-01-0{} 08:1{}\n", day + 1, p % 10));
            text.push_str(&format!("c{p},{work},{home},2017-01-0{} 18:05\n", day + 1));
        }
    }
    for p in 0..30 {
        for _ in 0..6 {
            text.push_str(&format!("s{p},B2,B4,13:00\ns{p},B4,B2,15:30\n"));
        }
    }
    let path = dir.join("trips.csv");
    fs::write(&path, text).unwrap();
    path
}

fn graph_config(dir: &Path) -> RunConfig {
    let (hops, poi) = write_network(dir);
    RunConfig {
        trips: Some(write_trips(dir)),
        hops: Some(hops),
        poi: Some(poi),
        use_graphs: true,
        h: 2,
        gamma: 0.7,
        r: 5,
        max_iter: 30,
        seed: 11,
        out_dir: dir.join("out"),
        ..Default::default()
    }
}

#[test]
fn graph_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = graph_config(dir.path());
    let out = pipeline::run_pipeline(&cfg).unwrap();
    assert_eq!(out.run.state.n_clusters(), 2);
    assert_eq!(out.metric_space, MetricSpace::Remapped);

    for f in ["assignments.csv", "clusters.txt", "k_trace.csv", "metrics.csv", "manifest.toml", "communities.csv"] {
        assert!(cfg.out_dir.join(f).exists(), "{f} missing");
    }
    let communities = fs::read_to_string(cfg.out_dir.join("communities.csv")).unwrap();
    let mut lines = communities.lines();
    assert_eq!(lines.next(), Some("station_name,adj_community,poi_community,combined_index"));
    assert_eq!(lines.count(), 8);

    // Commuters and shoppers never share a cluster.
    let corpus = pipeline::load_corpus(&cfg).unwrap();
    let z = corpus::read_passenger_column(&cfg.out_dir.join("assignments.csv"), &corpus).unwrap();
    for (u, pid) in corpus.passenger_ids().enumerate() {
        let same_kind_as_first = pid.starts_with('c') == corpus.passenger_ids().next().unwrap().starts_with('c');
        assert_eq!(z[u] == z[0], same_kind_as_first, "{pid}");
    }

    let metrics = fs::read_to_string(cfg.out_dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value,flags\nK,2,\nM,60,"));
    assert!(metrics.ends_with("space,remapped,\n"));
}

#[test]
fn remap_matches_graph_communities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = graph_config(dir.path());
    let original = pipeline::load_corpus(&cfg).unwrap();
    let stage = pipeline::graph_stage(&cfg, &original).unwrap();
    let remapped = &stage.remapped.corpus;
    assert_eq!(remapped.len(), original.len());
    assert_eq!(remapped.total_words(), original.total_words());
    for (a, b) in original.documents().iter().zip(remapped.documents()) {
        assert_eq!(a.len(), b.len());
    }
    assert_eq!(remapped.vocab_labels(Dim::Origin), remapped.vocab_labels(Dim::Destination));
    assert_eq!(remapped.vocab_labels(Dim::Time), original.vocab_labels(Dim::Time));
    assert!(remapped.vocab_sizes()[0] <= stage.proximity.n_communities * stage.functional.n_communities);
    // Homes and shops are different functional communities.
    assert_eq!(stage.functional.n_communities, 2);
}

#[test]
fn identical_config_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = graph_config(dir.path());
    a.out_dir = dir.path().join("a");
    let mut b = a.clone();
    b.out_dir = dir.path().join("b");
    pipeline::run_pipeline(&a).unwrap();
    pipeline::run_pipeline(&b).unwrap();
    for f in ["assignments.csv", "clusters.txt", "k_trace.csv", "metrics.csv", "communities.csv"] {
        assert_eq!(fs::read(a.out_dir.join(f)).unwrap(), fs::read(b.out_dir.join(f)).unwrap(), "{f}");
    }

    // The manifest reruns to the same artifacts.
    let mut again = RunConfig::load(&a.out_dir.join("manifest.toml")).unwrap();
    assert_eq!(again, a);
    again.out_dir = dir.path().join("c");
    pipeline::run_pipeline(&again).unwrap();
    assert_eq!(
        fs::read(a.out_dir.join("assignments.csv")).unwrap(),
        fs::read(again.out_dir.join("assignments.csv")).unwrap()
    );
}

#[test]
fn different_root_seeds_change_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = graph_config(dir.path());
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(cfg.hyperparams().seed, other.hyperparams().seed);
}

fn synthetic_config(dir: &Path) -> RunConfig {
    let spec = generator::planted_spec(4, [12, 12, 8], 0.9, 6.0, 160, 5).unwrap();
    let syn = generator::sample_finite_corpus(&spec).unwrap();
    let trips = dir.join("trips.csv");
    let vocab = dir.join("vocab.csv");
    let labels = dir.join("labels.csv");
    syn.corpus.write(&trips, &vocab).unwrap();
    corpus::write_passenger_column(&labels, &syn.corpus, "true_cluster", &syn.labels).unwrap();
    RunConfig {
        trips: Some(trips),
        vocab: Some(vocab),
        labels: Some(labels),
        out_dir: dir.join("sweep"),
        r: 10,
        max_iter: 30,
        ..Default::default()
    }
}

#[test]
fn sweep_rows_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let grid = Grid::parse("r=5,200;alpha=0.01,0.5").unwrap();
    let seq = pipeline::sweep(&cfg, &grid, false).unwrap();
    assert_eq!(seq.len(), 4);
    assert!(seq.iter().all(|r| r.error.is_none()));
    // r = 200 exceeds M / 4, so every table is below r.
    assert!(seq[2].fallback && seq[3].fallback);
    assert_eq!(seq[2].k, 1);
    assert!(seq[0].nmi.unwrap() > 0.9);

    let mut par_cfg = cfg.clone();
    par_cfg.out_dir = dir.path().join("par");
    let par = pipeline::sweep(&par_cfg, &grid, true).unwrap();
    // Debug strings, since NaN CH values never compare equal.
    assert_eq!(format!("{seq:?}"), format!("{par:?}"));

    // Rerunning one point alone reproduces its row.
    let mut single = cfg.clone();
    single.out_dir = dir.path().join("single");
    let one = pipeline::sweep(&single, &Grid::parse("r=5;alpha=0.5").unwrap(), false).unwrap();
    assert_eq!(one[0], seq[1]);
    assert_eq!(
        fs::read(cfg.out_dir.join("r=5_alpha=0.5/assignments.csv")).unwrap(),
        fs::read(single.out_dir.join("r=5_alpha=0.5/assignments.csv")).unwrap()
    );

    let csv = fs::read_to_string(cfg.out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("r,alpha,K,RMSSTD,RS,CH,NMI,fallback,metric_space,error\n5,0.01,"));
    let table = fs::read_to_string(cfg.out_dir.join("sweep_table.csv")).unwrap();
    assert!(table.starts_with("r/alpha,5/0.01,5/0.5,200/0.01,200/0.5\nK,"));
}

#[test]
fn failing_grid_point_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path());
    let rows = pipeline::sweep(&cfg, &Grid::parse("alpha=0.1,-1").unwrap(), false).unwrap();
    assert!(rows[0].error.is_none());
    assert!(rows[1].error.as_deref().unwrap().contains("alpha"));
    let csv = fs::read_to_string(cfg.out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn metrics_in_original_space() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = graph_config(dir.path());
    cfg.metric_space = MetricSpace::Original;
    let out = pipeline::run_pipeline(&cfg).unwrap();
    let original = pipeline::load_corpus(&cfg).unwrap();
    let direct = tdpmm::eval::evaluate(&original, &out.assignments, Default::default()).unwrap();
    assert_eq!(out.metrics, direct);
}

#[test]
fn raw_trips_round_trip_through_indexed_files() {
    let dir = tempfile::tempdir().unwrap();
    let raw = write_trips(dir.path());
    let c = corpus::load_trips(&raw, &TripSchema::default()).unwrap();
    assert_eq!(c.len(), 60);
    assert_eq!(c.vocab_labels(Dim::Time), ["8", "18", "13", "15"]);
    let (t, v) = (dir.path().join("t.csv"), dir.path().join("v.csv"));
    c.write(&t, &v).unwrap();
    assert_eq!(Corpus::read(&t, &v).unwrap(), c);
}

#[test]
fn graphs_require_both_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = graph_config(dir.path());
    cfg.poi = None;
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().starts_with("config:"));
}
