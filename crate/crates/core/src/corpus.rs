//! Trip ingestion and the document/corpus model.
//!
//! Every passenger becomes one [`Document`]: a bag of three-dimensional
//! categorical tokens (origin, destination, time slot). Per-dimension
//! count maps are cached at construction because the sampler touches
//! them on every table evaluation.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the three token dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Origin,
    Destination,
    Time,
}

impl Dim {
    pub const ALL: [Dim; 3] = [Dim::Origin, Dim::Destination, Dim::Time];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Dim::Origin => 0,
            Dim::Destination => 1,
            Dim::Time => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dim::Origin => "origin",
            Dim::Destination => "destination",
            Dim::Time => "time",
        }
    }

    pub fn from_name(name: &str) -> Option<Dim> {
        Dim::ALL.into_iter().find(|d| d.name() == name)
    }
}

/// A single (origin, destination, time slot) token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripWord {
    pub origin: u32,
    pub destination: u32,
    pub time_slot: u32,
}

impl TripWord {
    pub fn new(origin: u32, destination: u32, time_slot: u32) -> Self {
        TripWord {
            origin,
            destination,
            time_slot,
        }
    }

    #[inline]
    pub fn get(&self, dim: Dim) -> u32 {
        match dim {
            Dim::Origin => self.origin,
            Dim::Destination => self.destination,
            Dim::Time => self.time_slot,
        }
    }

    #[inline]
    pub fn set(&mut self, dim: Dim, value: u32) {
        match dim {
            Dim::Origin => self.origin = value,
            Dim::Destination => self.destination = value,
            Dim::Time => self.time_slot = value,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("corpus is empty: no passenger has at least {min_trips} trip(s)")]
    Empty { min_trips: usize },
    #[error("document `{0}` has no trips")]
    EmptyDocument(String),
    #[error("document `{passenger}`: {dim} index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange {
        passenger: String,
        dim: &'static str,
        index: u32,
        size: usize,
    },
    #[error("{dim} vocabulary label `{label}` appears more than once")]
    DuplicateLabel { dim: &'static str, label: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CorpusError {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

/// A passenger's bag of trips with cached per-dimension counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    passenger_id: String,
    words: Vec<TripWord>,
    // Sorted by word index; one map per dimension.
    counts: [Vec<(u32, u32)>; 3],
}

impl Document {
    pub fn new(passenger_id: impl Into<String>, words: Vec<TripWord>) -> Result<Self, CorpusError> {
        let passenger_id = passenger_id.into();
        if words.is_empty() {
            return Err(CorpusError::EmptyDocument(passenger_id));
        }
        let counts = Dim::ALL.map(|dim| {
            let mut tally: Vec<(u32, u32)> = Vec::new();
            let mut values: Vec<u32> = words.iter().map(|w| w.get(dim)).collect();
            values.sort_unstable();
            for v in values {
                match tally.last_mut() {
                    Some((w, c)) if *w == v => *c += 1,
                    _ => tally.push((v, 1)),
                }
            }
            tally
        });
        Ok(Document {
            passenger_id,
            words,
            counts,
        })
    }

    pub fn passenger_id(&self) -> &str {
        &self.passenger_id
    }

    pub fn words(&self) -> &[TripWord] {
        &self.words
    }

    /// N_u, the number of trips.
    #[inline]
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Always false for a constructed document; present for clippy's sake.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sparse `(word index, occurrences)` pairs for one dimension, sorted by index.
    #[inline]
    pub fn counts(&self, dim: Dim) -> &[(u32, u32)] {
        &self.counts[dim.index()]
    }

    /// Sparse flat count vector, sorted by flat index `(o·V_D + d)·V_T + t`.
    pub fn sparse_count_vector(&self, vocab_sizes: [usize; 3]) -> Vec<(usize, u32)> {
        let mut flat: Vec<usize> = self
            .words
            .iter()
            .map(|w| flat_index(w, vocab_sizes))
            .collect();
        flat.sort_unstable();
        let mut out: Vec<(usize, u32)> = Vec::new();
        for f in flat {
            match out.last_mut() {
                Some((i, c)) if *i == f => *c += 1,
                _ => out.push((f, 1)),
            }
        }
        out
    }
}

#[inline]
pub fn flat_index(word: &TripWord, vocab_sizes: [usize; 3]) -> usize {
    (word.origin as usize * vocab_sizes[1] + word.destination as usize) * vocab_sizes[2]
        + word.time_slot as usize
}

/// Dense count vector of length `V_O·V_D·V_T` for one document.
pub fn document_count_vector(doc: &Document, vocab_sizes: [usize; 3]) -> Vec<u32> {
    let mut v = vec![0u32; vocab_sizes.iter().product()];
    for w in doc.words() {
        v[flat_index(w, vocab_sizes)] += 1;
    }
    v
}

/// All documents plus the three vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocab_labels: [Vec<String>; 3],
}

impl Corpus {
    pub fn new(documents: Vec<Document>, vocab_labels: [Vec<String>; 3]) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::Empty { min_trips: 1 });
        }
        for dim in Dim::ALL {
            let labels = &vocab_labels[dim.index()];
            let mut seen = HashMap::with_capacity(labels.len());
            for label in labels {
                if seen.insert(label.as_str(), ()).is_some() {
                    return Err(CorpusError::DuplicateLabel {
                        dim: dim.name(),
                        label: label.clone(),
                    });
                }
            }
        }
        for doc in &documents {
            if doc.is_empty() {
                return Err(CorpusError::EmptyDocument(doc.passenger_id.clone()));
            }
            for w in doc.words() {
                for dim in Dim::ALL {
                    let size = vocab_labels[dim.index()].len();
                    if w.get(dim) as usize >= size {
                        return Err(CorpusError::IndexOutOfRange {
                            passenger: doc.passenger_id.clone(),
                            dim: dim.name(),
                            index: w.get(dim),
                            size,
                        });
                    }
                }
            }
        }
        Ok(Corpus {
            documents,
            vocab_labels,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// M, the number of passengers.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn vocab_sizes(&self) -> [usize; 3] {
        [
            self.vocab_labels[0].len(),
            self.vocab_labels[1].len(),
            self.vocab_labels[2].len(),
        ]
    }

    pub fn vocab_labels(&self, dim: Dim) -> &[String] {
        &self.vocab_labels[dim.index()]
    }

    pub fn total_words(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn passenger_ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(Document::passenger_id)
    }

    /// Writes the serialized form: a trip file with one
    /// `passenger_id,origin_idx,dest_idx,time_idx` line per trip and a
    /// sidecar vocabulary file of `dimension,index,label` lines.
    pub fn write(&self, trips_path: &Path, vocab_path: &Path) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_path(trips_path).map_err(|e| CorpusError::io(trips_path, e))?;
        w.write_record(["passenger_id", "origin_idx", "dest_idx", "time_idx"])
            .map_err(|e| CorpusError::io(trips_path, e))?;
        for doc in &self.documents {
            for t in doc.words() {
                w.write_record([
                    doc.passenger_id.as_str(),
                    &t.origin.to_string(),
                    &t.destination.to_string(),
                    &t.time_slot.to_string(),
                ])
                .map_err(|e| CorpusError::io(trips_path, e))?;
            }
        }
        w.flush().map_err(|e| CorpusError::io(trips_path, e))?;

        let mut v = csv::Writer::from_path(vocab_path).map_err(|e| CorpusError::io(vocab_path, e))?;
        v.write_record(["dimension", "index", "label"])
            .map_err(|e| CorpusError::io(vocab_path, e))?;
        for dim in Dim::ALL {
            for (i, label) in self.vocab_labels(dim).iter().enumerate() {
                v.write_record([dim.name(), &i.to_string(), label.as_str()])
                    .map_err(|e| CorpusError::io(vocab_path, e))?;
            }
        }
        v.flush().map_err(|e| CorpusError::io(vocab_path, e))?;
        Ok(())
    }

    /// Reads the format produced by [`Corpus::write`].
    pub fn read(trips_path: &Path, vocab_path: &Path) -> Result<Self, CorpusError> {
        let mut labels: [Vec<Option<String>>; 3] = Default::default();
        let mut vr = csv::Reader::from_path(vocab_path).map_err(|e| CorpusError::io(vocab_path, e))?;
        for (row, rec) in vr.records().enumerate() {
            let line = row as u64 + 2;
            let rec = rec.map_err(|e| CorpusError::io(vocab_path, e))?;
            let bad = |message: String| CorpusError::Row { line, message };
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.len())));
            }
            let dim = Dim::from_name(&rec[0]).ok_or_else(|| bad(format!("unknown dimension `{}`", &rec[0])))?;
            let idx: usize = rec[1]
                .parse()
                .map_err(|_| bad(format!("bad index `{}`", &rec[1])))?;
            let slot = &mut labels[dim.index()];
            if slot.len() <= idx {
                slot.resize(idx + 1, None);
            }
            slot[idx] = Some(rec[2].to_string());
        }
        let mut vocab_labels: [Vec<String>; 3] = Default::default();
        for dim in Dim::ALL {
            let mut out = Vec::with_capacity(labels[dim.index()].len());
            for (i, l) in labels[dim.index()].iter().enumerate() {
                out.push(l.clone().ok_or_else(|| {
                    CorpusError::Schema(format!("{} vocabulary has no label for index {i}", dim.name()))
                })?);
            }
            vocab_labels[dim.index()] = out;
        }

        let mut tr = csv::Reader::from_path(trips_path).map_err(|e| CorpusError::io(trips_path, e))?;
        let mut order: Vec<String> = Vec::new();
        let mut words: HashMap<String, Vec<TripWord>> = HashMap::new();
        for (row, rec) in tr.records().enumerate() {
            let line = row as u64 + 2;
            let rec = rec.map_err(|e| CorpusError::io(trips_path, e))?;
            if rec.len() != 4 {
                return Err(CorpusError::Row {
                    line,
                    message: format!("expected 4 fields, found {}", rec.len()),
                });
            }
            let mut idx = [0u32; 3];
            for (k, slot) in idx.iter_mut().enumerate() {
                *slot = rec[k + 1].parse().map_err(|_| CorpusError::Row {
                    line,
                    message: format!("bad index `{}`", &rec[k + 1]),
                })?;
            }
            let pid = rec[0].to_string();
            let entry = words.entry(pid.clone()).or_insert_with(|| {
                order.push(pid);
                Vec::new()
            });
            entry.push(TripWord::new(idx[0], idx[1], idx[2]));
        }
        if order.is_empty() {
            return Err(CorpusError::Empty { min_trips: 1 });
        }
        let documents = order
            .into_iter()
            .map(|pid| {
                let w = words.remove(&pid).unwrap_or_default();
                Document::new(pid, w)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Corpus::new(documents, vocab_labels)
    }
}

/// How the time column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeFormat {
    /// An hour of day: `8`, `08:15`, `2017-01-03 08:15:00` or `2017-01-03T08:15`.
    #[default]
    Hour,
    /// The value already is a categorical slot label.
    Label,
}

/// Column names and parsing knobs for [`load_trips`].
#[derive(Debug, Clone, PartialEq)]
pub struct TripSchema {
    pub passenger_col: String,
    pub origin_col: String,
    pub destination_col: String,
    pub time_col: String,
    pub delimiter: u8,
    pub time_format: TimeFormat,
    /// Width of one time slot in hours; 1 gives the 24 hour-of-day slots.
    pub slot_hours: u32,
    pub min_trips: usize,
    /// Explicit station list shared by origins and destinations, in
    /// index order. Overrides first-appearance vocabulary building.
    pub stations: Option<Vec<String>>,
}

impl Default for TripSchema {
    fn default() -> Self {
        TripSchema {
            passenger_col: "passenger_id".into(),
            origin_col: "origin".into(),
            destination_col: "destination".into(),
            time_col: "time".into(),
            delimiter: b',',
            time_format: TimeFormat::Hour,
            slot_hours: 1,
            min_trips: 1,
            stations: None,
        }
    }
}

/// Extracts the hour of day from `8`, `08:15[:00]` or a date-time string.
fn parse_hour(raw: &str) -> Option<u32> {
    let s = raw.trim();
    let time_part = match s.rsplit_once([' ', 'T']) {
        Some((_, t)) => t,
        None => s,
    };
    let hour_part = time_part.split(':').next()?;
    let hour: u32 = hour_part.trim().parse().ok()?;
    (hour < 24).then_some(hour)
}

fn slot_label(hour: u32, slot_hours: u32) -> String {
    if slot_hours == 1 {
        hour.to_string()
    } else {
        let start = hour / slot_hours * slot_hours;
        format!("{}-{}", start, (start + slot_hours).min(24) - 1)
    }
}

struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, u32>,
    frozen: bool,
}

impl Vocab {
    fn open() -> Self {
        Vocab {
            labels: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        }
    }

    fn fixed(labels: &[String]) -> Self {
        Vocab {
            labels: labels.to_vec(),
            index: labels.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect(),
            frozen: true,
        }
    }

    fn lookup(&mut self, label: &str) -> Option<u32> {
        if let Some(&i) = self.index.get(label) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        Some(i)
    }
}

/// Reads a delimiter-separated trip file into a [`Corpus`].
///
/// Passengers appear in first-appearance order and each vocabulary is
/// built from distinct values in first-appearance order, so the result
/// depends only on row order.
pub fn load_trips(path: &Path, schema: &TripSchema) -> Result<Corpus, CorpusError> {
    if schema.slot_hours == 0 || 24 % schema.slot_hours != 0 {
        return Err(CorpusError::Schema(format!(
            "slot_hours must divide 24, got {}",
            schema.slot_hours
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CorpusError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CorpusError::io(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let cols = [
        col(&schema.passenger_col)?,
        col(&schema.origin_col)?,
        col(&schema.destination_col)?,
        col(&schema.time_col)?,
    ];

    // (line, passenger, origin, destination, time label)
    let mut rows: Vec<(u64, String, String, String, String)> = Vec::new();
    let mut trips_per_passenger: HashMap<String, usize> = HashMap::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| CorpusError::Row {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| {
            rec.get(i).map(str::to_string).ok_or_else(|| CorpusError::Row {
                line,
                message: format!("missing field {}", i + 1),
            })
        };
        let pid = field(cols[0])?;
        let time_raw = field(cols[3])?;
        let time = match schema.time_format {
            TimeFormat::Hour => {
                let hour = parse_hour(&time_raw).ok_or_else(|| CorpusError::Row {
                    line,
                    message: format!("cannot parse hour from `{time_raw}`"),
                })?;
                slot_label(hour, schema.slot_hours)
            }
            TimeFormat::Label => time_raw,
        };
        *trips_per_passenger.entry(pid.clone()).or_default() += 1;
        rows.push((line, pid, field(cols[1])?, field(cols[2])?, time));
    }

    let (mut origins, mut destinations) = match &schema.stations {
        Some(s) => (Vocab::fixed(s), Vocab::fixed(s)),
        None => (Vocab::open(), Vocab::open()),
    };
    let mut times = Vocab::open();
    let mut order: Vec<String> = Vec::new();
    let mut words: HashMap<String, Vec<TripWord>> = HashMap::new();
    for (line, pid, o, d, t) in rows {
        if trips_per_passenger[&pid] < schema.min_trips {
            continue;
        }
        let unknown = |s: &str| CorpusError::Row {
            line,
            message: format!("station `{s}` not in the station vocabulary"),
        };
        let oi = origins.lookup(&o).ok_or_else(|| unknown(&o))?;
        let di = destinations.lookup(&d).ok_or_else(|| unknown(&d))?;
        let ti = times.lookup(&t).expect("open vocabulary");
        words
            .entry(pid.clone())
            .or_insert_with(|| {
                order.push(pid);
                Vec::new()
            })
            .push(TripWord::new(oi, di, ti));
    }
    if order.is_empty() {
        return Err(CorpusError::Empty {
            min_trips: schema.min_trips,
        });
    }
    let documents = order
        .into_iter()
        .map(|pid| {
            let w = words.remove(&pid).unwrap_or_default();
            Document::new(pid, w)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(documents, [origins.labels, destinations.labels, times.labels])
}

/// Writes `passenger_id,<column>` lines, one per document.
pub fn write_passenger_column(
    path: &Path,
    corpus: &Corpus,
    column: &str,
    values: &[usize],
) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["passenger_id", column]).map_err(|e| CorpusError::io(path, e))?;
    for (pid, v) in corpus.passenger_ids().zip(values) {
        w.write_record([pid, &v.to_string()]).map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))?;
    Ok(())
}

/// Reads a `passenger_id,<value>` file and aligns it to the corpus order.
pub fn read_passenger_column(path: &Path, corpus: &Corpus) -> Result<Vec<usize>, CorpusError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CorpusError::io(path, e))?;
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (row, rec) in r.records().enumerate() {
        let line = row as u64 + 2;
        let rec = rec.map_err(|e| CorpusError::io(path, e))?;
        if rec.len() < 2 {
            return Err(CorpusError::Row {
                line,
                message: "expected passenger_id,value".into(),
            });
        }
        let v: usize = rec[1].parse().map_err(|_| CorpusError::Row {
            line,
            message: format!("bad value `{}`", &rec[1]),
        })?;
        by_id.insert(rec[0].to_string(), v);
    }
    corpus
        .passenger_ids()
        .map(|pid| {
            by_id.get(pid).copied().ok_or_else(|| {
                CorpusError::Schema(format!("{}: no entry for passenger `{pid}`", path.display()))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f = write_tmp(
            "passenger_id,origin,destination,time\n\
             p1,A,B,8\n\
             p1,B,A,18\n\
             p2,A,B,08:30\n\
             p2,B,A,2017-01-02 18:05:00\n",
        );
        let c = load_trips(f.path(), &TripSchema::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.vocab_sizes(), [2, 2, 2]);
        assert_eq!(c.vocab_labels(Dim::Origin), ["A", "B"]);
        assert_eq!(c.vocab_labels(Dim::Destination), ["B", "A"]);
        assert_eq!(c.vocab_labels(Dim::Time), ["8", "18"]);
        assert_eq!(c.documents()[1].words()[1], TripWord::new(1, 1, 1));
    }

    #[test]
    fn header_only_is_empty() {
        let f = write_tmp("passenger_id,origin,destination,time\n");
        assert_eq!(
            load_trips(f.path(), &TripSchema::default()),
            Err(CorpusError::Empty { min_trips: 1 })
        );
    }

    #[test]
    fn missing_column() {
        let f = write_tmp("passenger_id,origin,dest,time\np,A,B,1\n");
        assert_eq!(
            load_trips(f.path(), &TripSchema::default()),
            Err(CorpusError::MissingColumn("destination".into()))
        );
    }

    #[test]
    fn bad_time_reports_line() {
        let f = write_tmp("passenger_id,origin,destination,time\np,A,B,1\np,A,B,noon\n");
        match load_trips(f.path(), &TripSchema::default()) {
            Err(CorpusError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("passenger_id,origin,destination,time\np,A,B,24\n");
        assert!(matches!(
            load_trips(f.path(), &TripSchema::default()),
            Err(CorpusError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn coarse_slots_and_labels() {
        let f = write_tmp("pid;o;d;t\nx;A;B;7\nx;A;B;5\ny;A;B;13\n");
        let schema = TripSchema {
            passenger_col: "pid".into(),
            origin_col: "o".into(),
            destination_col: "d".into(),
            time_col: "t".into(),
            delimiter: b';',
            slot_hours: 6,
            ..TripSchema::default()
        };
        let c = load_trips(f.path(), &schema).unwrap();
        assert_eq!(c.vocab_labels(Dim::Time), ["6-11", "0-5", "12-17"]);

        let f = write_tmp("passenger_id,origin,destination,time\nx,A,B,am\nx,A,B,pm\n");
        let schema = TripSchema {
            time_format: TimeFormat::Label,
            ..TripSchema::default()
        };
        let c = load_trips(f.path(), &schema).unwrap();
        assert_eq!(c.vocab_labels(Dim::Time), ["am", "pm"]);
    }

    #[test]
    fn min_trips_filter_and_station_list() {
        let f = write_tmp("passenger_id,origin,destination,time\na,X,Y,1\nb,Y,X,2\nb,Y,Y,3\n");
        let schema = TripSchema {
            min_trips: 2,
            ..TripSchema::default()
        };
        let c = load_trips(f.path(), &schema).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.vocab_labels(Dim::Origin), ["Y"]);

        let schema = TripSchema {
            stations: Some(vec!["X".into(), "Y".into(), "Z".into()]),
            ..TripSchema::default()
        };
        let c = load_trips(f.path(), &schema).unwrap();
        assert_eq!(c.vocab_sizes(), [3, 3, 3]);
        assert_eq!(c.documents()[1].words()[0], TripWord::new(1, 0, 1));

        let schema = TripSchema {
            stations: Some(vec!["X".into()]),
            ..TripSchema::default()
        };
        assert!(matches!(load_trips(f.path(), &schema), Err(CorpusError::Row { line: 2, .. })));
    }

    #[test]
    fn count_vector_examples() {
        let d = Document::new("a", vec![TripWord::new(0, 0, 0)]).unwrap();
        assert_eq!(document_count_vector(&d, [2, 2, 2]), vec![1, 0, 0, 0, 0, 0, 0, 0]);
        let d = Document::new("a", vec![TripWord::new(0, 1, 0); 2]).unwrap();
        assert_eq!(document_count_vector(&d, [2, 2, 2]), vec![0, 0, 2, 0, 0, 0, 0, 0]);
        assert_eq!(d.sparse_count_vector([2, 2, 2]), vec![(2, 2)]);
    }

    #[test]
    fn document_counts_sorted() {
        let d = Document::new(
            "a",
            vec![TripWord::new(2, 0, 5), TripWord::new(0, 0, 5), TripWord::new(2, 1, 1)],
        )
        .unwrap();
        assert_eq!(d.counts(Dim::Origin), [(0, 1), (2, 2)]);
        assert_eq!(d.counts(Dim::Destination), [(0, 2), (1, 1)]);
        assert_eq!(d.counts(Dim::Time), [(1, 1), (5, 2)]);
        assert!(Document::new("e", vec![]).is_err());
    }

    #[test]
    fn corpus_validation() {
        let d = Document::new("a", vec![TripWord::new(0, 0, 3)]).unwrap();
        let labels = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        assert!(matches!(
            Corpus::new(vec![d.clone()], [labels(1), labels(1), labels(3)]),
            Err(CorpusError::IndexOutOfRange { index: 3, .. })
        ));
        assert!(Corpus::new(vec![d.clone()], [labels(1), labels(1), labels(4)]).is_ok());
        assert!(matches!(
            Corpus::new(vec![d], [vec!["x".into(), "x".into()], labels(1), labels(4)]),
            Err(CorpusError::DuplicateLabel { .. })
        ));
        assert!(Corpus::new(vec![], [labels(1), labels(1), labels(1)]).is_err());
    }
}
