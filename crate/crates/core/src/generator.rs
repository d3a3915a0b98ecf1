//! Synthetic corpora with known labels, drawn from the finite mixture
//! (fixed θ and per-cluster φ) or from the Dirichlet-process mixture
//! realized as CRP seating with per-table φ ~ Dir(β).

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use thiserror::Error;

use crate::corpus::{Corpus, Dim, Document, TripWord};

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generative spec: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, GeneratorError> {
    Err(GeneratorError::Invalid(msg.into()))
}

/// Law of the number of trips per passenger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DocLength {
    /// `1 + Poisson(mean − 1)`, so every document has at least one trip.
    ShiftedPoisson { mean: f64 },
    Fixed(usize),
}

impl DocLength {
    fn sampler(self) -> Result<LengthSampler, GeneratorError> {
        match self {
            DocLength::Fixed(0) => invalid("fixed document length must be at least 1"),
            DocLength::Fixed(n) => Ok(LengthSampler::Fixed(n)),
            DocLength::ShiftedPoisson { mean } if !(mean >= 1.0 && mean.is_finite()) => {
                invalid(format!("mean document length must be at least 1, got {mean}"))
            }
            DocLength::ShiftedPoisson { mean: 1.0 } => Ok(LengthSampler::Fixed(1)),
            DocLength::ShiftedPoisson { mean } => Ok(LengthSampler::Poisson(
                Poisson::new(mean - 1.0).expect("positive rate"),
            )),
        }
    }
}

enum LengthSampler {
    Fixed(usize),
    Poisson(Poisson<f64>),
}

impl LengthSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            LengthSampler::Fixed(n) => *n,
            LengthSampler::Poisson(p) => 1 + p.sample(rng) as usize,
        }
    }
}

/// Per-dimension categorical distributions of one cluster (φ^O, φ^D, φ^T).
#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub dims: [Vec<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mixture {
    /// Fixed mixture weights θ over `topics`.
    Finite { weights: Vec<f64>, topics: Vec<Topic> },
    /// CRP seating with concentration `alpha`; each new table draws its
    /// topic from symmetric Dir(`beta[dim]`).
    Crp { alpha: f64, beta: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeSpec {
    pub mixture: Mixture,
    pub vocab_sizes: [usize; 3],
    pub doc_length: DocLength,
    pub n_docs: usize,
    pub seed: u64,
}

/// A generated corpus and the true cluster of each passenger.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub labels: Vec<usize>,
}

impl Synthetic {
    pub fn n_true_clusters(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

struct TopicSampler([WeightedIndex<f64>; 3]);

impl TopicSampler {
    fn new(topic: &Topic) -> Result<Self, GeneratorError> {
        let mk = |dim: Dim| {
            WeightedIndex::new(&topic.dims[dim.index()])
                .map_err(|e| GeneratorError::Invalid(format!("{} topic row: {e}", dim.name())))
        };
        Ok(TopicSampler([mk(Dim::Origin)?, mk(Dim::Destination)?, mk(Dim::Time)?]))
    }

    fn word<R: Rng + ?Sized>(&self, rng: &mut R) -> TripWord {
        TripWord::new(
            self.0[0].sample(rng) as u32,
            self.0[1].sample(rng) as u32,
            self.0[2].sample(rng) as u32,
        )
    }
}

fn default_labels(vocab_sizes: [usize; 3]) -> [Vec<String>; 3] {
    let prefix = ["o", "d", "t"];
    [0, 1, 2].map(|i| (0..vocab_sizes[i]).map(|w| format!("{}{w}", prefix[i])).collect())
}

fn build(spec: &GenerativeSpec, docs: Vec<Vec<TripWord>>, labels: Vec<usize>) -> Synthetic {
    let width = spec.n_docs.saturating_sub(1).to_string().len();
    let documents = docs
        .into_iter()
        .enumerate()
        .map(|(u, words)| Document::new(format!("p{u:0width$}"), words).expect("length ≥ 1"))
        .collect();
    let corpus = Corpus::new(documents, default_labels(spec.vocab_sizes)).expect("indices drawn in range");
    Synthetic { corpus, labels }
}

fn check_common(spec: &GenerativeSpec) -> Result<LengthSampler, GeneratorError> {
    if spec.n_docs == 0 {
        return invalid("n_docs must be at least 1");
    }
    if spec.vocab_sizes.contains(&0) {
        return invalid("vocabulary sizes must be positive");
    }
    spec.doc_length.sampler()
}

fn check_distribution(p: &[f64], what: &str) -> Result<(), GeneratorError> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid(format!("{what} has a negative or non-finite entry"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return invalid(format!("{what} sums to {s}, not 1"));
    }
    Ok(())
}

/// Draws from the finite mixture: z_u ~ Multi(θ), N_u from the length
/// law, and each trip's three components independently from φ_{z_u}.
pub fn sample_finite_corpus(spec: &GenerativeSpec) -> Result<Synthetic, GeneratorError> {
    let lengths = check_common(spec)?;
    let Mixture::Finite { weights, topics } = &spec.mixture else {
        return invalid("sample_finite_corpus needs a finite mixture");
    };
    if weights.is_empty() || weights.len() != topics.len() {
        return invalid(format!("{} weights for {} topics", weights.len(), topics.len()));
    }
    check_distribution(weights, "theta")?;
    for (k, t) in topics.iter().enumerate() {
        for dim in Dim::ALL {
            let row = &t.dims[dim.index()];
            if row.len() != spec.vocab_sizes[dim.index()] {
                return invalid(format!(
                    "topic {k} {} row has {} entries, vocabulary has {}",
                    dim.name(),
                    row.len(),
                    spec.vocab_sizes[dim.index()]
                ));
            }
            check_distribution(row, &format!("topic {k} {} row", dim.name()))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let choose = WeightedIndex::new(weights).map_err(|e| GeneratorError::Invalid(e.to_string()))?;
    let samplers = topics.iter().map(TopicSampler::new).collect::<Result<Vec<_>, _>>()?;
    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut labels = Vec::with_capacity(spec.n_docs);
    for _ in 0..spec.n_docs {
        let z = choose.sample(&mut rng);
        let n = lengths.draw(&mut rng);
        docs.push((0..n).map(|_| samplers[z].word(&mut rng)).collect());
        labels.push(z);
    }
    Ok(build(spec, docs, labels))
}

/// Seats passengers sequentially by the CRP (existing table ∝ m_k, new
/// table ∝ α); each table's topic is drawn once when it opens.
pub fn sample_dp_corpus(spec: &GenerativeSpec) -> Result<Synthetic, GeneratorError> {
    let lengths = check_common(spec)?;
    let Mixture::Crp { alpha, beta } = spec.mixture else {
        return invalid("sample_dp_corpus needs a CRP mixture");
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if beta.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return invalid("beta must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut table_sizes: Vec<usize> = Vec::new();
    let mut samplers: Vec<TopicSampler> = Vec::new();
    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut labels = Vec::with_capacity(spec.n_docs);
    for u in 0..spec.n_docs {
        let mut draw = rng.random::<f64>() * (u as f64 + alpha);
        let mut z = table_sizes.len();
        for (k, &m) in table_sizes.iter().enumerate() {
            if draw < m as f64 {
                z = k;
                break;
            }
            draw -= m as f64;
        }
        if z == table_sizes.len() {
            table_sizes.push(0);
            let topic = Topic {
                dims: [0, 1, 2].map(|i| symmetric_dirichlet(&mut rng, beta[i], spec.vocab_sizes[i])),
            };
            samplers.push(TopicSampler::new(&topic)?);
        }
        table_sizes[z] += 1;
        let n = lengths.draw(&mut rng);
        docs.push((0..n).map(|_| samplers[z].word(&mut rng)).collect());
        labels.push(z);
    }
    Ok(build(spec, docs, labels))
}

/// Draws from a symmetric Dirichlet. Works in log space so that tiny
/// concentrations do not underflow every component to zero.
pub fn symmetric_dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: f64, n: usize) -> Vec<f64> {
    // Gamma(a) = Gamma(a + 1) · U^{1/a}
    let g = Gamma::new(concentration + 1.0, 1.0).expect("positive shape");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.sample(rng).ln() + u.ln() / concentration
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Draws a finite mixture from its priors: θ ~ Dir(α), φ_k ~ Dir(β).
pub fn draw_finite_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    alpha: f64,
    beta: [f64; 3],
    vocab_sizes: [usize; 3],
) -> Mixture {
    let weights = symmetric_dirichlet(rng, alpha, k);
    let topics = (0..k)
        .map(|_| Topic {
            dims: [0, 1, 2].map(|i| symmetric_dirichlet(rng, beta[i], vocab_sizes[i])),
        })
        .collect();
    Mixture::Finite { weights, topics }
}

/// `k` topics with disjoint high-mass word blocks: in every dimension,
/// cluster `j` puts mass `peak` uniformly on its own contiguous block of
/// words and spreads `1 − peak` uniformly over the whole vocabulary.
pub fn planted_topics(k: usize, vocab_sizes: [usize; 3], peak: f64) -> Result<Vec<Topic>, GeneratorError> {
    if k == 0 {
        return invalid("need at least one topic");
    }
    if !(0.0..=1.0).contains(&peak) {
        return invalid(format!("peak mass must lie in [0, 1], got {peak}"));
    }
    if let Some(v) = vocab_sizes.iter().find(|&&v| v < k) {
        return invalid(format!("vocabulary of size {v} cannot hold {k} disjoint blocks"));
    }
    Ok((0..k)
        .map(|j| Topic {
            dims: vocab_sizes.map(|v| {
                let block = |w: usize| w * k / v;
                let size = (0..v).filter(|&w| block(w) == j).count() as f64;
                (0..v)
                    .map(|w| {
                        let own = if block(w) == j { peak / size } else { 0.0 };
                        own + (1.0 - peak) / v as f64
                    })
                    .collect()
            }),
        })
        .collect())
}

/// A finite spec over equally weighted planted topics.
pub fn planted_spec(k: usize, vocab_sizes: [usize; 3], peak: f64, mean_len: f64, n_docs: usize, seed: u64) -> Result<GenerativeSpec, GeneratorError> {
    Ok(GenerativeSpec {
        mixture: Mixture::Finite {
            weights: vec![1.0 / k as f64; k],
            topics: planted_topics(k, vocab_sizes, peak)?,
        },
        vocab_sizes,
        doc_length: DocLength::ShiftedPoisson { mean: mean_len },
        n_docs,
        seed,
    })
}
