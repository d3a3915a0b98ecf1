//! End-to-end runs and parameter sweeps driven by a [`RunConfig`].
//!
//! Stages: load corpus, optionally build the station graphs and remap
//! stations to community symbols, sample, evaluate, export.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{stage_seed, MetricSpace, RunConfig, Stage};
use crate::corpus::{self, Corpus, CorpusError};
use crate::dpmm::{self, DpmmError, RunOutput};
use crate::eval::{self, EvalError, MetricReport};
use crate::generator::GeneratorError;
use crate::graphs::{self, CommunityLabeling, GraphError, StationMatrix};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("graphs: {0}")]
    Graph(#[from] GraphError),
    #[error("dpmm: {0}")]
    Dpmm(#[from] DpmmError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("generator: {0}")]
    Generator(#[from] GeneratorError),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    /// 1 validation, 2 I/O, 3 internal consistency.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } | PipelineError::Corpus(CorpusError::Io { .. }) => 2,
            PipelineError::Graph(GraphError::Parse { .. }) => 2,
            PipelineError::Dpmm(DpmmError::InvalidParams(_)) => 1,
            PipelineError::Dpmm(_) => 3,
            _ => 1,
        }
    }
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| PipelineError::io(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|e| PipelineError::io(path, e))
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, PipelineError> {
    path.as_deref()
        .ok_or_else(|| PipelineError::Config(format!("`{key}` is required")))
}

/// Reads the corpus named by `trips` (and `vocab`, if set).
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus, PipelineError> {
    let trips = required(&cfg.trips, "trips")?;
    let corpus = match &cfg.vocab {
        Some(vocab) => Corpus::read(trips, vocab)?,
        None => corpus::load_trips(trips, &cfg.schema())?,
    };
    log::info!(
        "corpus: {} passengers, {} trips, vocab {:?}",
        corpus.len(),
        corpus.total_words(),
        corpus.vocab_sizes()
    );
    Ok(corpus)
}

#[derive(Debug, Clone)]
pub struct GraphStage {
    pub stations: Vec<String>,
    pub proximity: CommunityLabeling,
    pub functional: CommunityLabeling,
    pub remapped: graphs::RemappedCorpus,
}

impl GraphStage {
    pub fn export_lines(&self) -> Vec<String> {
        graphs::community_export_lines(
            &self.stations,
            &self.proximity,
            &self.functional,
            &self.remapped.station_symbols,
        )
    }
}

/// Reorders POI rows to the hop matrix's station order.
fn align_poi(poi: StationMatrix<f64>, stations: &[String]) -> Result<StationMatrix<f64>, PipelineError> {
    if poi.stations == stations {
        return Ok(poi);
    }
    let mut by_name: std::collections::HashMap<String, Vec<f64>> = poi.stations.into_iter().zip(poi.values).collect();
    let values = stations
        .iter()
        .map(|s| by_name.remove(s).ok_or_else(|| GraphError::UnlabeledStation(s.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = by_name.keys().min() {
        return Err(GraphError::UnknownStation(extra.clone()).into());
    }
    Ok(StationMatrix {
        stations: stations.to_vec(),
        values,
    })
}

/// Builds both station graphs, detects communities and remaps `corpus`.
pub fn graph_stage(cfg: &RunConfig, corpus: &Corpus) -> Result<GraphStage, PipelineError> {
    let delim = cfg.delimiter as u8;
    let hops = graphs::read_hop_matrix(required(&cfg.hops, "hops")?, delim)?;
    let poi = graphs::read_poi_matrix(required(&cfg.poi, "poi")?, delim)?;
    let poi = align_poi(poi, &hops.stations)?;
    let proximity_graph = graphs::build_proximity_graph(&hops, cfg.h)?;
    let functional_graph = graphs::build_poi_graph(&poi, cfg.gamma)?;
    let proximity = graphs::detect_communities(&proximity_graph, stage_seed(cfg.seed, Stage::ProximityCommunities));
    let functional = graphs::detect_communities(&functional_graph, stage_seed(cfg.seed, Stage::FunctionalCommunities));
    log::info!(
        "graphs: proximity {} edges / {} communities (Q = {:.4}), functional {} edges / {} communities (Q = {:.4})",
        proximity_graph.n_edges(),
        proximity.n_communities,
        proximity.modularity,
        functional_graph.n_edges(),
        functional.n_communities,
        functional.modularity
    );
    let remapped = graphs::remap_corpus(corpus, &hops.stations, &proximity, &functional)?;
    Ok(GraphStage {
        stations: hops.stations,
        proximity,
        functional,
        remapped,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub run: RunOutput,
    /// Compact cluster ids in corpus order.
    pub assignments: Vec<usize>,
    pub metrics: MetricReport,
    pub metric_space: MetricSpace,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
}

impl PipelineOutput {
    pub fn metric_lines(&self) -> Vec<String> {
        let mut external = Vec::new();
        if let (Some(n), Some(a)) = (self.nmi, self.ari) {
            external.push(("NMI", n));
            external.push(("ARI", a));
        }
        let mut lines = self.metrics.lines(&external);
        lines.push(format!("space,{},", self.metric_space.name()));
        lines
    }
}

/// Samples `clustered` and evaluates the result. `original` is the
/// pre-remap corpus, used when metrics are requested in that space.
pub fn cluster_and_evaluate(
    cfg: &RunConfig,
    clustered: &Corpus,
    original: &Corpus,
    labels: Option<&[usize]>,
) -> Result<PipelineOutput, PipelineError> {
    let run = dpmm::run(clustered, &cfg.hyperparams())?;
    if run.fallback_fired() {
        log::warn!("fallback fired: no table reached r = {}", cfg.r);
    }
    let assignments = run.state.compact_assignments();
    let space = match cfg.metric_space {
        MetricSpace::Original => original,
        MetricSpace::Remapped => clustered,
    };
    let metrics = eval::evaluate(space, &assignments, cfg.eval_options())?;
    let (nmi, ari) = match labels {
        Some(l) => (Some(eval::nmi(l, &assignments)?), Some(eval::ari(l, &assignments)?)),
        None => (None, None),
    };
    Ok(PipelineOutput {
        run,
        assignments,
        metrics,
        metric_space: cfg.metric_space,
        nmi,
        ari,
    })
}

/// Writes assignments, cluster summary, K trace and metrics into `dir`.
pub fn write_run_artifacts(dir: &Path, clustered: &Corpus, out: &PipelineOutput, top: usize) -> Result<(), PipelineError> {
    create_dir(dir)?;
    corpus::write_passenger_column(&dir.join("assignments.csv"), clustered, "cluster_id", &out.assignments)?;
    write_lines(&dir.join("clusters.txt"), dpmm::cluster_summary_lines(&out.run.state, clustered, top))?;
    write_lines(&dir.join("k_trace.csv"), dpmm::k_trace_lines(&out.run.k_trace))?;
    write_lines(&dir.join("metrics.csv"), out.metric_lines())
}

fn write_manifest(dir: &Path, cfg: &RunConfig) -> Result<(), PipelineError> {
    let path = dir.join("manifest.toml");
    let text = format!(
        "# sampler seed {}, proximity seed {}, functional seed {}\n{}",
        stage_seed(cfg.seed, Stage::Sampler),
        stage_seed(cfg.seed, Stage::ProximityCommunities),
        stage_seed(cfg.seed, Stage::FunctionalCommunities),
        cfg.to_toml()
    );
    fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
}

/// Corpus ready for sampling, plus what produced it.
pub struct Prepared {
    pub original: Corpus,
    pub graphs: Option<GraphStage>,
    pub labels: Option<Vec<usize>>,
}

impl Prepared {
    pub fn clustered(&self) -> &Corpus {
        self.graphs.as_ref().map_or(&self.original, |g| &g.remapped.corpus)
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let original = load_corpus(cfg)?;
    let graphs = if cfg.use_graphs {
        Some(graph_stage(cfg, &original)?)
    } else {
        None
    };
    let labels = match &cfg.labels {
        Some(p) => Some(corpus::read_passenger_column(p, &original)?),
        None => None,
    };
    Ok(Prepared {
        original,
        graphs,
        labels,
    })
}

/// The full pipeline. Writes into `cfg.out_dir`:
/// `assignments.csv`, `clusters.txt`, `k_trace.csv`, `metrics.csv`,
/// `manifest.toml`, and `communities.csv` when graphs are on.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    let prep = prepare(cfg)?;
    create_dir(&cfg.out_dir)?;
    if let Some(g) = &prep.graphs {
        write_lines(&cfg.out_dir.join("communities.csv"), g.export_lines())?;
    }
    let out = cluster_and_evaluate(cfg, prep.clustered(), &prep.original, prep.labels.as_deref())?;
    write_run_artifacts(&cfg.out_dir, prep.clustered(), &out, cfg.top_words)?;
    write_manifest(&cfg.out_dir, cfg)?;
    Ok(out)
}

/// Model parameters and their values, swept as a Cartesian product.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    /// Parses `r=5,10,20;alpha=0.01,0.1`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut axes = Vec::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| format!("grid axis `{part}` is not key=v1,v2,..."))?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                return Err(format!("grid axis `{key}` has no values"));
            }
            axes.push((key.trim().to_string(), values));
        }
        if axes.is_empty() {
            return Err("empty grid".into());
        }
        Ok(Grid { axes })
    }

    /// Grid points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut points = vec![Vec::new()];
        for (key, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<(String, String)>,
    pub k: usize,
    pub rmsstd: f64,
    pub rs: f64,
    pub ch: f64,
    pub nmi: Option<f64>,
    pub fallback: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(params: Vec<(String, String)>, err: String) -> Self {
        SweepRow {
            params,
            k: 0,
            rmsstd: f64::NAN,
            rs: f64::NAN,
            ch: f64::NAN,
            nmi: None,
            fallback: false,
            error: Some(err),
        }
    }

    fn label(&self) -> String {
        self.params.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join("/")
    }
}

fn point_dir(params: &[(String, String)]) -> String {
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("_")
}

fn sweep_point(cfg: &RunConfig, prep: &Prepared, params: &[(String, String)]) -> Result<SweepRow, PipelineError> {
    let mut point = cfg.clone();
    for (k, v) in params {
        point.set_model_param(k, v).map_err(PipelineError::Config)?;
    }
    point.validate().map_err(PipelineError::Config)?;
    point.out_dir = cfg.out_dir.join(point_dir(params));
    let out = cluster_and_evaluate(&point, prep.clustered(), &prep.original, prep.labels.as_deref())?;
    write_run_artifacts(&point.out_dir, prep.clustered(), &out, point.top_words)?;
    write_manifest(&point.out_dir, &point)?;
    Ok(SweepRow {
        params: params.to_vec(),
        k: out.metrics.k,
        rmsstd: out.metrics.rmsstd,
        rs: out.metrics.rs,
        ch: out.metrics.ch,
        nmi: out.nmi,
        fallback: out.run.fallback_fired(),
        error: None,
    })
}

/// One run per grid point over a shared corpus and graph stage.
///
/// Each point writes its artifacts to `out_dir/<key=value_...>/`; the
/// sweep writes `sweep.csv` (one row per point) and `sweep_table.csv`
/// (points as columns, K and metrics as rows). A failing point is
/// recorded in its row and the sweep continues.
pub fn sweep(cfg: &RunConfig, grid: &Grid, parallel: bool) -> Result<Vec<SweepRow>, PipelineError> {
    let prep = prepare(cfg)?;
    create_dir(&cfg.out_dir)?;
    if let Some(g) = &prep.graphs {
        write_lines(&cfg.out_dir.join("communities.csv"), g.export_lines())?;
    }
    let points = grid.points();
    let one = |params: &Vec<(String, String)>| {
        sweep_point(cfg, &prep, params).unwrap_or_else(|e| {
            log::error!("sweep point {}: {e}", point_dir(params));
            SweepRow::failed(params.clone(), e.to_string())
        })
    };
    let rows: Vec<SweepRow> = if parallel {
        points.par_iter().map(one).collect()
    } else {
        points.iter().map(one).collect()
    };
    write_lines(&cfg.out_dir.join("sweep.csv"), sweep_lines(grid, &rows, cfg.metric_space))?;
    write_lines(&cfg.out_dir.join("sweep_table.csv"), sweep_table_lines(grid, &rows))?;
    write_manifest(&cfg.out_dir, cfg)?;
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_lines(grid: &Grid, rows: &[SweepRow], space: MetricSpace) -> Vec<String> {
    let mut header: Vec<String> = grid.axes.iter().map(|(k, _)| k.clone()).collect();
    header.extend(["K", "RMSSTD", "RS", "CH", "NMI", "fallback", "metric_space", "error"].map(String::from));
    let mut lines = vec![header.join(",")];
    for row in rows {
        let mut f: Vec<String> = row.params.iter().map(|(_, v)| v.clone()).collect();
        if row.error.is_some() {
            f.extend(["", "", "", "", ""].map(String::from));
        } else {
            f.push(row.k.to_string());
            f.push(row.rmsstd.to_string());
            f.push(row.rs.to_string());
            f.push(row.ch.to_string());
            f.push(row.nmi.map(|v| v.to_string()).unwrap_or_default());
        }
        f.push(row.fallback.to_string());
        f.push(space.name().to_string());
        f.push(csv_field(row.error.as_deref().unwrap_or("")));
        lines.push(f.join(","));
    }
    lines
}

/// First row names the swept parameter(s) and lists each point; then one
/// row each for K, RMSSTD, RS and CH.
pub fn sweep_table_lines(grid: &Grid, rows: &[SweepRow]) -> Vec<String> {
    let name = grid.axes.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join("/");
    let mut lines = vec![std::iter::once(name)
        .chain(rows.iter().map(SweepRow::label))
        .collect::<Vec<_>>()
        .join(",")];
    let metric_row = |label: &str, value: &dyn Fn(&SweepRow) -> String| {
        std::iter::once(label.to_string())
            .chain(rows.iter().map(|r| if r.error.is_some() { String::new() } else { value(r) }))
            .collect::<Vec<_>>()
            .join(",")
    };
    lines.push(metric_row("K", &|r| r.k.to_string()));
    lines.push(metric_row("RMSSTD", &|r| format!("{:.4}", r.rmsstd)));
    lines.push(metric_row("RS", &|r| format!("{:.4}", r.rs)));
    lines.push(metric_row("CH", &|r| format!("{:.4}", r.ch)));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = Grid::parse("r=5,10; alpha=0.1,0.2,0.3").unwrap();
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![("r".to_string(), "5".to_string()), ("alpha".into(), "0.1".into())]);
        assert_eq!(p[5][1].1, "0.3");
        assert!(Grid::parse("r").is_err());
        assert!(Grid::parse("r=").is_err());
        assert!(Grid::parse("").is_err());
    }

    #[test]
    fn table_shape() {
        let g = Grid::parse("r=5,10").unwrap();
        let rows = vec![
            SweepRow {
                params: vec![("r".into(), "5".into())],
                k: 7,
                rmsstd: 1.0,
                rs: 0.5,
                ch: 2.0,
                nmi: None,
                fallback: false,
                error: None,
            },
            SweepRow::failed(vec![("r".into(), "10".into())], "boom, twice".into()),
        ];
        let t = sweep_table_lines(&g, &rows);
        assert_eq!(t[0], "r,5,10");
        assert_eq!(t[1], "K,7,");
        assert_eq!(t[4], "CH,2.0000,");
        let s = sweep_lines(&g, &rows, MetricSpace::Remapped);
        assert_eq!(s[0], "r,K,RMSSTD,RS,CH,NMI,fallback,metric_space,error");
        assert_eq!(s[2], "10,,,,,,false,remapped,\"boom, twice\"");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 1);
        assert_eq!(PipelineError::io(Path::new("a"), "b").exit_code(), 2);
        assert_eq!(PipelineError::Dpmm(DpmmError::Consistency("c".into())).exit_code(), 3);
        assert_eq!(PipelineError::Dpmm(DpmmError::InvalidParams("c".into())).exit_code(), 1);
    }
}
