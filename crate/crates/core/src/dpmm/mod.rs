//! Tensor r-collapsed Gibbs sampling for the Dirichlet process
//! multinomial mixture over (origin, destination, time) documents.
//!
//! The sampler runs in three phases: random initialization over `k0`
//! tables, `max_iter` sweeps of kick-out / choose-a-table / merge, and a
//! final pass that disbands every table seating fewer than `r`
//! passengers and relocates their members among the survivors without
//! opening new tables.

mod kernel;
mod state;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Dim};

pub use kernel::{
    choice_distribution, log_prior_existing, log_prior_new, log_prob_existing, log_prob_new, log_weights,
    sample_assignment,
};
pub use state::{Cluster, ClusterState, TableChoice};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpmmError {
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("unknown table {0}")]
    UnknownCluster(usize),
    #[error("passenger {0} must be kicked out before evaluating or merging")]
    NotKickedOut(usize),
    #[error("passenger {0} is not seated")]
    NotSeated(usize),
    #[error("no table available for passenger {0}")]
    NoTarget(usize),
    #[error("expected {expected} assignments, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("consistency audit failed: {0}")]
    Consistency(String),
}

/// Model and sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    /// Symmetric Dirichlet concentration per dimension (origin, destination, time).
    pub beta: [f64; 3],
    /// Minimum table size enforced by the final disband pass.
    pub r: usize,
    pub max_iter: usize,
    pub k0: usize,
    pub seed: u64,
    /// Use the plain CRP weight m_{z,−u} instead of m_{z,−u} + α/K.
    pub crp_prior: bool,
    /// Also disband and relocate after every sweep.
    pub disband_every_sweep: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.01,
            beta: [0.01, 0.01, 0.042],
            r: 45,
            max_iter: 100,
            k0: 1,
            seed: 0,
            crp_prior: false,
            disband_every_sweep: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), DpmmError> {
        let bad = |m: String| Err(DpmmError::InvalidParams(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        for dim in Dim::ALL {
            let b = self.beta[dim.index()];
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("beta_{} must be positive, got {b}", dim.name()));
            }
        }
        if self.r == 0 {
            return bad("r must be at least 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.k0 == 0 {
            return bad("k0 must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepReport {
    pub created: usize,
    pub deleted: usize,
    /// K after the sweep.
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelocationReport {
    /// `(table id, size)` of each disbanded table.
    pub disbanded: Vec<(usize, usize)>,
    pub relocated: usize,
    /// Every table was below `r`; only the largest was kept.
    pub fallback: bool,
}

impl RelocationReport {
    pub fn is_empty(&self) -> bool {
        self.disbanded.is_empty() && !self.fallback
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: ClusterState,
    /// K after each sweep.
    pub k_trace: Vec<usize>,
    pub sweeps: Vec<SweepReport>,
    /// Every disband pass in order; the last one is the final pass.
    pub relocations: Vec<RelocationReport>,
}

impl RunOutput {
    pub fn fallback_fired(&self) -> bool {
        self.relocations.iter().any(|r| r.fallback)
    }

    pub fn final_relocation(&self) -> &RelocationReport {
        self.relocations.last().expect("run always ends with a disband pass")
    }
}

/// Seats every passenger uniformly at random among `k0` tables; tables
/// left empty are not created.
pub fn init<R: Rng + ?Sized>(corpus: &Corpus, k0: usize, rng: &mut R) -> Result<ClusterState, DpmmError> {
    if k0 == 0 {
        return Err(DpmmError::InvalidParams("k0 must be at least 1".into()));
    }
    let labels: Vec<usize> = (0..corpus.len()).map(|_| rng.random_range(0..k0)).collect();
    ClusterState::from_assignments(corpus, &labels)
}

/// One pass over all passengers in ascending index order.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ClusterState,
    corpus: &Corpus,
    params: &Hyperparams,
    rng: &mut R,
) -> Result<SweepReport, DpmmError> {
    let mut report = SweepReport::default();
    for u in 0..corpus.len() {
        if state.kick_out(corpus, u)?.is_some() {
            report.deleted += 1;
        }
        let choice = sample_assignment(state, corpus, u, params, rng, true)?;
        if choice == TableChoice::New {
            report.created += 1;
        }
        state.merge(corpus, u, choice)?;
    }
    state.audit(corpus)?;
    report.k = state.n_clusters();
    Ok(report)
}

/// Disbands every table with fewer than `r` members, then relocates the
/// displaced passengers one at a time (ascending index) among the
/// remaining tables.
///
/// If every table is below `r`, the largest (lowest id on ties) is kept
/// and the report's `fallback` flag is set.
pub fn disband_and_relocate<R: Rng + ?Sized>(
    state: &mut ClusterState,
    corpus: &Corpus,
    params: &Hyperparams,
    rng: &mut R,
) -> Result<RelocationReport, DpmmError> {
    let size = |z: usize| state.cluster(z).map_or(0, Cluster::members);
    let mut small: Vec<usize> = state.cluster_ids().filter(|&z| size(z) < params.r).collect();
    let mut report = RelocationReport::default();
    if small.is_empty() {
        return Ok(report);
    }
    if small.len() == state.n_clusters() {
        let keep = small
            .iter()
            .copied()
            .max_by(|&a, &b| size(a).cmp(&size(b)).then(b.cmp(&a)))
            .expect("at least one table");
        log::warn!(
            "every table seats fewer than r = {} passengers; keeping table {keep} ({} members)",
            params.r,
            size(keep)
        );
        small.retain(|&z| z != keep);
        report.fallback = true;
    }
    let mut displaced = Vec::new();
    for z in small {
        let members = state.disband(z)?;
        report.disbanded.push((z, members.len()));
        displaced.extend(members);
    }
    displaced.sort_unstable();
    for u in displaced {
        let choice = sample_assignment(state, corpus, u, params, rng, false)?;
        state.merge(corpus, u, choice)?;
        report.relocated += 1;
    }
    state.audit(corpus)?;
    Ok(report)
}

/// The full sampler: init, `max_iter` sweeps, then the disband pass.
pub fn run(corpus: &Corpus, params: &Hyperparams) -> Result<RunOutput, DpmmError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut state = init(corpus, params.k0, &mut rng)?;
    state.audit(corpus)?;
    let mut k_trace = Vec::with_capacity(params.max_iter);
    let mut sweeps = Vec::with_capacity(params.max_iter);
    let mut relocations = Vec::new();
    for iter in 0..params.max_iter {
        let mut report = gibbs_sweep(&mut state, corpus, params, &mut rng)?;
        if params.disband_every_sweep && iter + 1 < params.max_iter {
            relocations.push(disband_and_relocate(&mut state, corpus, params, &mut rng)?);
            report.k = state.n_clusters();
        }
        log::debug!("sweep {}: K = {}", iter + 1, report.k);
        k_trace.push(report.k);
        sweeps.push(report);
    }
    relocations.push(disband_and_relocate(&mut state, corpus, params, &mut rng)?);
    Ok(RunOutput {
        state,
        k_trace,
        sweeps,
        relocations,
    })
}

/// Per-table summary records: id, m_z, n_z and the `top` most frequent
/// words per dimension with their counts. Tables are numbered as in
/// [`ClusterState::compact_assignments`].
pub fn cluster_summary_lines(state: &ClusterState, corpus: &Corpus, top: usize) -> Vec<String> {
    let mut lines = Vec::new();
    for (rank, z) in state.cluster_ids().enumerate() {
        let c = state.cluster(z).expect("live");
        lines.push(format!("[cluster {rank}]"));
        lines.push(format!("m_z = {}", c.members()));
        lines.push(format!("n_z = {}", c.words()));
        for dim in Dim::ALL {
            let mut words: Vec<(usize, u32)> = c
                .word_counts(dim)
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, n)| n > 0)
                .collect();
            words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let labels = corpus.vocab_labels(dim);
            let top_words: Vec<String> = words
                .iter()
                .take(top)
                .map(|&(w, n)| format!("{}:{n}", labels[w]))
                .collect();
            lines.push(format!("{} = {}", dim.name(), top_words.join(" ")));
        }
        lines.push(String::new());
    }
    lines
}

pub fn k_trace_lines(trace: &[usize]) -> Vec<String> {
    std::iter::once("iteration,K".to_string())
        .chain(trace.iter().enumerate().map(|(i, k)| format!("{},{k}", i + 1)))
        .collect()
}

#[cfg(test)]
mod tests;
