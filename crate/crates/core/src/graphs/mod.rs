//! Station graphs and the community remap of origin/destination words.
//!
//! Two binary graphs are built over the station set: an h-hop proximity
//! graph and a POI cosine-similarity graph. Communities are detected on
//! each, and every station is replaced by its (proximity, functional)
//! community pair.

mod leiden;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Corpus, Dim, Document};

pub use leiden::{detect_communities, modularity};

/// Hop distance used for unreachable station pairs.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("matrix is not square: {rows} rows but {cols} columns in row {row}")]
    NotSquare { rows: usize, cols: usize, row: usize },
    #[error("hop distances are not symmetric at ({0}, {1})")]
    NotSymmetric(String, String),
    #[error("hop distance from `{0}` to itself is not zero")]
    NonZeroDiagonal(String),
    #[error("station `{0}` has a zero-norm POI vector")]
    ZeroNormPoi(String),
    #[error("station `{station}` has a negative or non-finite POI count")]
    InvalidPoi { station: String },
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("station `{0}` has no community label")]
    UnlabeledStation(String),
    #[error("labelings cover {adj} and {poi} stations but {stations} station names were given")]
    LabelingSize { adj: usize, poi: usize, stations: usize },
    #[error("unknown station `{0}` in topology")]
    UnknownStation(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Proximity,
    Functional,
}

/// A square matrix indexed by station, with station names.
#[derive(Debug, Clone, PartialEq)]
pub struct StationMatrix<T> {
    pub stations: Vec<String>,
    pub values: Vec<Vec<T>>,
}

impl<T> StationMatrix<T> {
    /// Stations named `"0"`, `"1"`, ...
    pub fn unnamed(values: Vec<Vec<T>>) -> Self {
        StationMatrix {
            stations: (0..values.len()).map(|i| i.to_string()).collect(),
            values,
        }
    }

    fn check_rows(&self, expected_cols: Option<usize>) -> Result<(), GraphError> {
        let rows = self.values.len();
        for (row, r) in self.values.iter().enumerate() {
            let want = expected_cols.unwrap_or(rows);
            if r.len() != want {
                return Err(GraphError::NotSquare {
                    rows,
                    cols: r.len(),
                    row,
                });
            }
        }
        Ok(())
    }
}

/// Symmetric binary adjacency over stations, no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    kind: GraphKind,
    stations: Vec<String>,
    neighbors: Vec<Vec<usize>>,
}

impl SemanticGraph {
    /// Builds a graph from an undirected edge list; self-loops and duplicates are dropped.
    pub fn from_edges(kind: GraphKind, stations: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let n = stations.len();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        SemanticGraph {
            kind,
            stations,
            neighbors,
        }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn stations(&self) -> &[String] {
        &self.stations
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.n_nodes();
        let mut m = vec![vec![false; n]; n];
        for (i, j) in self.edges() {
            m[i][j] = true;
            m[j][i] = true;
        }
        m
    }
}

/// Proximity graph: edge iff hop distance ≤ `h` and the stations differ.
pub fn build_proximity_graph(hops: &StationMatrix<u32>, h: u32) -> Result<SemanticGraph, GraphError> {
    hops.check_rows(None)?;
    let n = hops.values.len();
    let mut edges = Vec::new();
    for i in 0..n {
        if hops.values[i][i] != 0 {
            return Err(GraphError::NonZeroDiagonal(hops.stations[i].clone()));
        }
        for j in (i + 1)..n {
            let d = hops.values[i][j];
            if d != hops.values[j][i] {
                return Err(GraphError::NotSymmetric(
                    hops.stations[i].clone(),
                    hops.stations[j].clone(),
                ));
            }
            if d <= h {
                edges.push((i, j));
            }
        }
    }
    Ok(SemanticGraph::from_edges(GraphKind::Proximity, hops.stations.clone(), &edges))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    // sqrt of the product keeps identical vectors at exactly 1.
    (dot / (na * nb).sqrt()).min(1.0)
}

/// Functional graph: edge iff POI cosine similarity ≥ `gamma`.
pub fn build_poi_graph(poi: &StationMatrix<f64>, gamma: f64) -> Result<SemanticGraph, GraphError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(GraphError::InvalidGamma(gamma));
    }
    let cols = poi.values.first().map_or(0, Vec::len);
    poi.check_rows(Some(cols))?;
    for (row, name) in poi.values.iter().zip(&poi.stations) {
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(GraphError::InvalidPoi {
                station: name.clone(),
            });
        }
        if row.iter().all(|&x| x == 0.0) {
            return Err(GraphError::ZeroNormPoi(name.clone()));
        }
    }
    let n = poi.values.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if cosine_similarity(&poi.values[i], &poi.values[j]) >= gamma {
                edges.push((i, j));
            }
        }
    }
    Ok(SemanticGraph::from_edges(GraphKind::Functional, poi.stations.clone(), &edges))
}

/// All-pairs hop distances by BFS over an undirected station topology.
pub fn hop_distances(stations: &[String], links: &[(usize, usize)]) -> StationMatrix<u32> {
    let n = stations.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in links {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut values = vec![vec![UNREACHABLE; n]; n];
    for (src, row) in values.iter_mut().enumerate() {
        row[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == UNREACHABLE {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    StationMatrix {
        stations: stations.to_vec(),
        values,
    }
}

/// Community assignment over the nodes of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityLabeling {
    /// Node → community, contiguous from 0 in order of first appearance.
    pub labels: Vec<usize>,
    pub n_communities: usize,
    pub modularity: f64,
}

impl CommunityLabeling {
    /// Renumbers arbitrary labels to 0.. in first-appearance order.
    pub fn from_raw(graph: &SemanticGraph, raw: &[usize]) -> Self {
        let mut map = HashMap::new();
        let labels: Vec<usize> = raw
            .iter()
            .map(|&c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
            .collect();
        let modularity = modularity(graph, &labels);
        CommunityLabeling {
            n_communities: map.len(),
            labels,
            modularity,
        }
    }
}

/// Result of replacing stations with combined community symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct RemappedCorpus {
    pub corpus: Corpus,
    /// Station (in the labelings' node order) → new spatial word, if its
    /// community pair occurs in the vocabulary.
    pub station_symbols: Vec<Option<u32>>,
}

/// Replaces every origin and destination station with the dense index of
/// its combined community `adj · S_poi + poi`.
///
/// `stations` names the nodes both labelings are indexed by; corpus
/// origin/destination labels are looked up by name. The combined
/// vocabulary is shared by origins and destinations, holds only pairs
/// that occur in the corpus, and is ordered by combined index.
pub fn remap_corpus(
    corpus: &Corpus,
    stations: &[String],
    adj: &CommunityLabeling,
    poi: &CommunityLabeling,
) -> Result<RemappedCorpus, GraphError> {
    if adj.labels.len() != stations.len() || poi.labels.len() != stations.len() {
        return Err(GraphError::LabelingSize {
            adj: adj.labels.len(),
            poi: poi.labels.len(),
            stations: stations.len(),
        });
    }
    let node_of: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let combined = |node: usize| adj.labels[node] * poi.n_communities + poi.labels[node];

    // Word index → combined index, per spatial dimension.
    let mut word_to_combined: [Vec<usize>; 2] = Default::default();
    let mut occurring: BTreeMap<usize, u32> = BTreeMap::new();
    for dim in [Dim::Origin, Dim::Destination] {
        let mut map = Vec::with_capacity(corpus.vocab_sizes()[dim.index()]);
        for label in corpus.vocab_labels(dim) {
            let node = *node_of
                .get(label.as_str())
                .ok_or_else(|| GraphError::UnlabeledStation(label.clone()))?;
            map.push(combined(node));
        }
        for doc in corpus.documents() {
            for &(w, _) in doc.counts(dim) {
                occurring.insert(map[w as usize], 0);
            }
        }
        word_to_combined[dim.index()] = map;
    }
    for (dense, slot) in occurring.values_mut().enumerate() {
        *slot = dense as u32;
    }

    let documents = corpus
        .documents()
        .iter()
        .map(|doc| {
            let words = doc
                .words()
                .iter()
                .map(|w| {
                    let mut w = *w;
                    for dim in [Dim::Origin, Dim::Destination] {
                        let c = word_to_combined[dim.index()][w.get(dim) as usize];
                        w.set(dim, occurring[&c]);
                    }
                    w
                })
                .collect();
            Document::new(doc.passenger_id(), words)
        })
        .collect::<Result<Vec<_>, _>>()
        .expect("remapped documents keep their length");

    let spatial_labels: Vec<String> = occurring
        .keys()
        .map(|c| format!("a{}p{}", c / poi.n_communities, c % poi.n_communities))
        .collect();
    let corpus = Corpus::new(
        documents,
        [
            spatial_labels.clone(),
            spatial_labels,
            corpus.vocab_labels(Dim::Time).to_vec(),
        ],
    )
    .expect("remapped corpus indices are in range");
    let station_symbols = (0..stations.len())
        .map(|node| occurring.get(&combined(node)).copied())
        .collect();
    Ok(RemappedCorpus {
        corpus,
        station_symbols,
    })
}

/// `station_name,adj_community,poi_community,combined_index` lines.
pub fn community_export_lines(
    stations: &[String],
    adj: &CommunityLabeling,
    poi: &CommunityLabeling,
    symbols: &[Option<u32>],
) -> Vec<String> {
    let mut lines = vec!["station_name,adj_community,poi_community,combined_index".to_string()];
    for (i, name) in stations.iter().enumerate() {
        let sym = symbols[i].map(|s| s.to_string()).unwrap_or_default();
        lines.push(format!("{},{},{},{}", name, adj.labels[i], poi.labels[i], sym));
    }
    lines
}

fn parse_cell<T: FromStr>(raw: &str) -> Option<T> {
    raw.trim().parse().ok()
}

/// Reads a matrix whose header row names the columns (first cell ignored)
/// and whose first column names the rows.
///
/// For square matrices the column names must equal the row names.
pub fn read_station_matrix<T: FromStr>(
    path: &Path,
    delimiter: u8,
    square: bool,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<StationMatrix<T>, GraphError> {
    let err = |message: String| GraphError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| err(e.to_string()))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut stations = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| err(format!("line {line}: {e}")))?;
        stations.push(rec.get(0).unwrap_or_default().to_string());
        let row_vals = rec
            .iter()
            .skip(1)
            .map(|c| parse(c).ok_or_else(|| err(format!("line {line}: bad value `{c}`"))))
            .collect::<Result<Vec<T>, _>>()?;
        values.push(row_vals);
    }
    if square && header != stations {
        return Err(err("column names do not match row names".into()));
    }
    Ok(StationMatrix { stations, values })
}

pub fn read_hop_matrix(path: &Path, delimiter: u8) -> Result<StationMatrix<u32>, GraphError> {
    read_station_matrix(path, delimiter, true, |c| match c.trim() {
        "" | "inf" | "-" | "-1" => Some(UNREACHABLE),
        s => parse_cell(s),
    })
}

pub fn read_poi_matrix(path: &Path, delimiter: u8) -> Result<StationMatrix<f64>, GraphError> {
    read_station_matrix(path, delimiter, false, parse_cell::<f64>)
}

/// Reads `station_a,station_b` link lines (header row required) and
/// converts them to hop distances over `stations`.
pub fn read_topology(path: &Path, delimiter: u8, stations: &[String]) -> Result<StationMatrix<u32>, GraphError> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| GraphError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let index: HashMap<&str, usize> = stations.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut links = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| GraphError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let find = |k: usize| {
            let name = rec.get(k).unwrap_or_default();
            index
                .get(name)
                .copied()
                .ok_or_else(|| GraphError::UnknownStation(name.to_string()))
        };
        links.push((find(0)?, find(1)?));
    }
    Ok(hop_distances(stations, &links))
}
