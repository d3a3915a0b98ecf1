//! Collapsed conditional of one passenger's table choice, in log space.

use rand::Rng;

use crate::corpus::{Corpus, Dim, Document};

use super::state::{ClusterState, TableChoice};
use super::{DpmmError, Hyperparams};

/// Σ_w Σ_{j=1}^{N_u^w} ln(n^w + β + j − 1) − Σ_{i=1}^{N_u} ln(n + Vβ + i − 1)
/// for one dimension; `table` is `None` for an empty (new) table.
#[inline]
fn log_dim_likelihood(doc: &Document, dim: Dim, table: Option<(&[u32], usize)>, vocab: usize, beta: f64) -> f64 {
    let mut s = 0.0;
    for &(w, c) in doc.counts(dim) {
        let base = table.map_or(0.0, |(counts, _)| counts[w as usize] as f64) + beta;
        for j in 0..c {
            s += (base + j as f64).ln();
        }
    }
    let base = table.map_or(0.0, |(_, n)| n as f64) + vocab as f64 * beta;
    for i in 0..doc.len() {
        s -= (base + i as f64).ln();
    }
    s
}

fn check_unseated(state: &ClusterState, u: usize) -> Result<(), DpmmError> {
    match state.assignment(u) {
        Some(_) => Err(DpmmError::NotKickedOut(u)),
        None => Ok(()),
    }
}

/// ln((m + α/K)/(M − 1 + α)), or ln(m/(M − 1 + α)) under `crp_prior`.
pub fn log_prior_existing(members: usize, n_clusters: usize, n_docs: usize, params: &Hyperparams) -> f64 {
    let m = members as f64;
    let mass = if params.crp_prior {
        m
    } else {
        m + params.alpha / n_clusters as f64
    };
    mass.ln() - (n_docs as f64 - 1.0 + params.alpha).ln()
}

/// ln(α/(M − 1 + α)).
pub fn log_prior_new(n_docs: usize, params: &Hyperparams) -> f64 {
    params.alpha.ln() - (n_docs as f64 - 1.0 + params.alpha).ln()
}

/// Unnormalized log-probability that kicked-out passenger `u` joins table `z`.
///
/// The prior term is ln((m_{z,−u} + α/K)/(M − 1 + α)) with K the current
/// number of non-empty tables, or ln(m_{z,−u}/(M − 1 + α)) when
/// `crp_prior` is set.
pub fn log_prob_existing(
    state: &ClusterState,
    corpus: &Corpus,
    u: usize,
    z: usize,
    params: &Hyperparams,
) -> Result<f64, DpmmError> {
    check_unseated(state, u)?;
    let table = state.cluster(z).ok_or(DpmmError::UnknownCluster(z))?;
    let mut lp = log_prior_existing(table.members(), state.n_clusters(), state.n_docs(), params);
    let doc = &corpus.documents()[u];
    let vocab = state.vocab_sizes();
    for dim in Dim::ALL {
        lp += log_dim_likelihood(
            doc,
            dim,
            Some((table.word_counts(dim), table.words())),
            vocab[dim.index()],
            params.beta[dim.index()],
        );
    }
    Ok(lp)
}

/// Unnormalized log-probability that kicked-out passenger `u` opens a new table.
pub fn log_prob_new(state: &ClusterState, corpus: &Corpus, u: usize, params: &Hyperparams) -> Result<f64, DpmmError> {
    check_unseated(state, u)?;
    let mut lp = log_prior_new(state.n_docs(), params);
    let doc = &corpus.documents()[u];
    let vocab = state.vocab_sizes();
    for dim in Dim::ALL {
        lp += log_dim_likelihood(doc, dim, None, vocab[dim.index()], params.beta[dim.index()]);
    }
    Ok(lp)
}

/// Unnormalized log-weights over every live table (ascending id), then
/// the new table when `allow_new`.
pub fn log_weights(
    state: &ClusterState,
    corpus: &Corpus,
    u: usize,
    params: &Hyperparams,
    allow_new: bool,
) -> Result<Vec<(TableChoice, f64)>, DpmmError> {
    let mut out = Vec::with_capacity(state.n_clusters() + 1);
    for z in state.cluster_ids() {
        out.push((TableChoice::Existing(z), log_prob_existing(state, corpus, u, z, params)?));
    }
    if allow_new {
        out.push((TableChoice::New, log_prob_new(state, corpus, u, params)?));
    }
    if out.is_empty() {
        return Err(DpmmError::NoTarget(u));
    }
    Ok(out)
}

/// Normalizes log-weights in place into probabilities by max-subtraction.
fn normalize(weights: &mut [(TableChoice, f64)]) {
    let max = weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        w.1 = (w.1 - max).exp();
        sum += w.1;
    }
    for w in weights.iter_mut() {
        w.1 /= sum;
    }
}

/// The normalized conditional distribution over table choices.
pub fn choice_distribution(
    state: &ClusterState,
    corpus: &Corpus,
    u: usize,
    params: &Hyperparams,
    allow_new: bool,
) -> Result<Vec<(TableChoice, f64)>, DpmmError> {
    let mut w = log_weights(state, corpus, u, params, allow_new)?;
    normalize(&mut w);
    Ok(w)
}

/// Draws a table for kicked-out passenger `u`.
pub fn sample_assignment<R: Rng + ?Sized>(
    state: &ClusterState,
    corpus: &Corpus,
    u: usize,
    params: &Hyperparams,
    rng: &mut R,
    allow_new: bool,
) -> Result<TableChoice, DpmmError> {
    let probs = choice_distribution(state, corpus, u, params, allow_new)?;
    let mut draw: f64 = rng.random();
    for &(choice, p) in &probs {
        if draw < p {
            return Ok(choice);
        }
        draw -= p;
    }
    // Rounding left a sliver past the last bucket.
    Ok(probs.last().expect("non-empty").0)
}
