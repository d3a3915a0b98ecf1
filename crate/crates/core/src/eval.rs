//! Internal cluster-quality metrics (RMSSTD, RS, CH) over flat count
//! vectors, and external agreement scores (NMI, ARI) for labelled data.
//!
//! Vectors are kept sparse. The squared distance to a centroid is split
//! into the off-support centroid mass plus the on-support residuals, and
//! the off-support part is exactly zero whenever the centroid's support
//! lies inside the document's, so identical documents give exactly zero
//! scatter.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("expected {expected} labels, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cannot evaluate an empty labelling")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Divide each document vector by its trip count.
    pub normalize_docs: bool,
    /// Weight each centroid's separation by its cluster size (textbook CH).
    pub weighted_ch: bool,
}

/// Which formula hit a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degenerate {
    /// Every cluster is a singleton: RMSSTD denominator is zero.
    AllSingletons,
    /// All documents coincide: RS denominator is zero.
    ZeroTotalScatter,
    /// K = 1: CH numerator divides by K − 1 = 0.
    SingleCluster,
    /// M = K: CH denominator divides by M − K = 0.
    NoResidualDof,
    /// Within-cluster scatter is zero with M > K: CH is infinite.
    ZeroWithinScatter,
}

impl fmt::Display for Degenerate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degenerate::AllSingletons => "all_singletons",
            Degenerate::ZeroTotalScatter => "zero_total_scatter",
            Degenerate::SingleCluster => "single_cluster",
            Degenerate::NoResidualDof => "no_residual_dof",
            Degenerate::ZeroWithinScatter => "zero_within_scatter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rmsstd: f64,
    pub rs: f64,
    pub ch: f64,
    pub k: usize,
    pub m: usize,
    pub notes: Vec<Degenerate>,
}

impl MetricReport {
    /// `metric,value,flags` lines; flags are `;`-separated.
    pub fn lines(&self, external: &[(&str, f64)]) -> Vec<String> {
        let flags = |names: &[Degenerate]| {
            names
                .iter()
                .filter(|d| self.notes.contains(d))
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut out = vec!["metric,value,flags".to_string()];
        out.push(format!("K,{},", self.k));
        out.push(format!("M,{},", self.m));
        out.push(format!("RMSSTD,{},{}", self.rmsstd, flags(&[Degenerate::AllSingletons])));
        out.push(format!("RS,{},{}", self.rs, flags(&[Degenerate::ZeroTotalScatter])));
        out.push(format!(
            "CH,{},{}",
            self.ch,
            flags(&[
                Degenerate::SingleCluster,
                Degenerate::NoResidualDof,
                Degenerate::ZeroWithinScatter
            ])
        ));
        for (name, v) in external {
            out.push(format!("{name},{v},"));
        }
        out
    }
}

type Sparse = Vec<(usize, f64)>;

/// Sums of squares shared by all three internal metrics.
struct Decomposition {
    ss_within: f64,
    ss_total: f64,
    /// Σ_k ‖c_k − g‖², unweighted and weighted by m_k.
    separation: f64,
    separation_weighted: f64,
    /// Σ_k (m_k − 1) = M − K.
    dof: usize,
    k: usize,
    m: usize,
}

fn doc_vectors(corpus: &Corpus, normalize: bool) -> Vec<Sparse> {
    let vocab = corpus.vocab_sizes();
    corpus
        .documents()
        .iter()
        .map(|d| {
            let scale = if normalize { 1.0 / d.len() as f64 } else { 1.0 };
            d.sparse_count_vector(vocab)
                .into_iter()
                .map(|(i, c)| (i, c as f64 * scale))
                .collect()
        })
        .collect()
}

struct Centroid {
    values: BTreeMap<usize, f64>,
    sq_norm: f64,
}

impl Centroid {
    fn mean<'a>(docs: impl Iterator<Item = &'a Sparse>, count: usize) -> Self {
        let mut sum: BTreeMap<usize, f64> = BTreeMap::new();
        for d in docs {
            for &(i, v) in d {
                *sum.entry(i).or_default() += v;
            }
        }
        let mut sq_norm = 0.0;
        for c in sum.values_mut() {
            *c /= count as f64;
            sq_norm += *c * *c;
        }
        Centroid { values: sum, sq_norm }
    }

    /// ‖d − c‖².
    fn sq_dist(&self, doc: &Sparse) -> f64 {
        let mut residual = 0.0;
        let mut on_support = 0.0;
        let mut shared = 0usize;
        for &(i, v) in doc {
            let c = self.values.get(&i).copied().unwrap_or(0.0);
            if c != 0.0 {
                shared += 1;
            }
            on_support += c * c;
            residual += (v - c) * (v - c);
        }
        let off_support = if shared == self.values.len() {
            0.0
        } else {
            (self.sq_norm - on_support).max(0.0)
        };
        off_support + residual
    }

    fn sq_dist_to(&self, other: &Centroid) -> f64 {
        let mut s = 0.0;
        for (i, &a) in &self.values {
            let b = other.values.get(i).copied().unwrap_or(0.0);
            s += (a - b) * (a - b);
        }
        for (i, &b) in &other.values {
            if !self.values.contains_key(i) {
                s += b * b;
            }
        }
        s
    }
}

fn decompose(corpus: &Corpus, assignments: &[usize], normalize: bool) -> Result<Decomposition, EvalError> {
    if assignments.len() != corpus.len() {
        return Err(EvalError::LengthMismatch {
            expected: corpus.len(),
            found: assignments.len(),
        });
    }
    let docs = doc_vectors(corpus, normalize);
    // Clusters in order of first member, so sums do not depend on ids.
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (u, &z) in assignments.iter().enumerate() {
        let next = clusters.len();
        let i = *slot.entry(z).or_insert(next);
        if i == next {
            clusters.push(Vec::new());
        }
        clusters[i].push(u);
    }

    let global = Centroid::mean(docs.iter(), docs.len());
    let ss_total: f64 = docs.iter().map(|d| global.sq_dist(d)).sum();
    let mut ss_within = 0.0;
    let mut separation = 0.0;
    let mut separation_weighted = 0.0;
    for members in &clusters {
        let c = Centroid::mean(members.iter().map(|&u| &docs[u]), members.len());
        ss_within += members.iter().map(|&u| c.sq_dist(&docs[u])).sum::<f64>();
        let sep = c.sq_dist_to(&global);
        separation += sep;
        separation_weighted += members.len() as f64 * sep;
    }
    Ok(Decomposition {
        ss_within,
        ss_total,
        separation,
        separation_weighted,
        dof: corpus.len() - clusters.len(),
        k: clusters.len(),
        m: corpus.len(),
    })
}

fn rmsstd_of(d: &Decomposition, vocab: [usize; 3]) -> (f64, Option<Degenerate>) {
    if d.dof == 0 {
        return (f64::INFINITY, Some(Degenerate::AllSingletons));
    }
    let dims = vocab.iter().product::<usize>() as f64;
    ((d.ss_within / (dims * d.dof as f64)).sqrt(), None)
}

fn rs_of(d: &Decomposition) -> (f64, Option<Degenerate>) {
    if d.ss_total == 0.0 {
        return (f64::NAN, Some(Degenerate::ZeroTotalScatter));
    }
    ((d.ss_total - d.ss_within) / d.ss_total, None)
}

fn ch_of(d: &Decomposition, weighted: bool) -> (f64, Option<Degenerate>) {
    if d.k < 2 {
        return (f64::NAN, Some(Degenerate::SingleCluster));
    }
    if d.m == d.k {
        return (f64::NAN, Some(Degenerate::NoResidualDof));
    }
    if d.ss_within == 0.0 {
        return (f64::INFINITY, Some(Degenerate::ZeroWithinScatter));
    }
    let sep = if weighted { d.separation_weighted } else { d.separation };
    ((sep / (d.k - 1) as f64) / (d.ss_within / (d.m - d.k) as f64), None)
}

/// Root-mean-square standard deviation; `+∞` when every cluster is a singleton.
pub fn rmsstd(corpus: &Corpus, assignments: &[usize]) -> Result<f64, EvalError> {
    let d = decompose(corpus, assignments, false)?;
    Ok(rmsstd_of(&d, corpus.vocab_sizes()).0)
}

/// R-squared, `(SS_total − SS_within) / SS_total`; NaN when all documents coincide.
pub fn rs(corpus: &Corpus, assignments: &[usize]) -> Result<f64, EvalError> {
    Ok(rs_of(&decompose(corpus, assignments, false)?).0)
}

/// `[Σ_k ‖c_k − g‖² / (K − 1)] / [SS_within / (M − K)]`, with the
/// separation term not weighted by cluster size. NaN when K = 1 or M = K.
pub fn ch(corpus: &Corpus, assignments: &[usize]) -> Result<f64, EvalError> {
    Ok(ch_of(&decompose(corpus, assignments, false)?, false).0)
}

pub fn evaluate(corpus: &Corpus, assignments: &[usize], opts: EvalOptions) -> Result<MetricReport, EvalError> {
    let d = decompose(corpus, assignments, opts.normalize_docs)?;
    let (rmsstd, f1) = rmsstd_of(&d, corpus.vocab_sizes());
    let (rs, f2) = rs_of(&d);
    let (ch, f3) = ch_of(&d, opts.weighted_ch);
    Ok(MetricReport {
        rmsstd,
        rs,
        ch,
        k: d.k,
        m: d.m,
        notes: [f1, f2, f3].into_iter().flatten().collect(),
    })
}

struct Contingency {
    n: f64,
    joint: BTreeMap<(usize, usize), f64>,
    a: BTreeMap<usize, f64>,
    b: BTreeMap<usize, f64>,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = Contingency {
        n: a.len() as f64,
        joint: BTreeMap::new(),
        a: BTreeMap::new(),
        b: BTreeMap::new(),
    };
    for (&x, &y) in a.iter().zip(b) {
        *c.joint.entry((x, y)).or_default() += 1.0;
        *c.a.entry(x).or_default() += 1.0;
        *c.b.entry(y).or_default() += 1.0;
    }
    Ok(c)
}

fn entropy(counts: &BTreeMap<usize, f64>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, arithmetic-mean normalization.
/// Two constant labellings score 1.
pub fn nmi(truth: &[usize], predicted: &[usize]) -> Result<f64, EvalError> {
    let c = contingency(truth, predicted)?;
    let ha = entropy(&c.a, c.n);
    let hb = entropy(&c.b, c.n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = c
        .joint
        .iter()
        .map(|(&(x, y), &nij)| nij / c.n * (c.n * nij / (c.a[&x] * c.b[&y])).ln())
        .sum();
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// Adjusted Rand index.
pub fn ari(truth: &[usize], predicted: &[usize]) -> Result<f64, EvalError> {
    let c = contingency(truth, predicted)?;
    let pairs = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = c.joint.values().map(|&v| pairs(v)).sum();
    let sa: f64 = c.a.values().map(|&v| pairs(v)).sum();
    let sb: f64 = c.b.values().map(|&v| pairs(v)).sum();
    let expected = sa * sb / pairs(c.n).max(1.0);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
