use super::*;
use crate::corpus::{Document, TripWord};
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn corpus(vocab: [usize; 3], docs: Vec<Vec<(u32, u32, u32)>>) -> Corpus {
    let docs = docs
        .into_iter()
        .enumerate()
        .map(|(i, ws)| {
            Document::new(
                format!("p{i}"),
                ws.into_iter().map(|(o, d, t)| TripWord::new(o, d, t)).collect(),
            )
            .unwrap()
        })
        .collect();
    Corpus::new(docs, vocab.map(labels)).unwrap()
}

fn params(alpha: f64, beta: f64) -> Hyperparams {
    Hyperparams {
        alpha,
        beta: [beta; 3],
        r: 1,
        max_iter: 1,
        ..Hyperparams::default()
    }
}

#[test]
fn existing_table_likelihood_example() {
    let c = corpus([2, 2, 2], vec![vec![(0, 0, 0)], vec![(0, 0, 0)]]);
    let mut s = ClusterState::from_assignments(&c, &[0, 0]).unwrap();
    s.kick_out(&c, 0).unwrap();
    let p = params(1.0, 1.0);
    // prior (1 + 1/1)/(2 - 1 + 1) = 1, likelihood (2/3)^3
    let lp = log_prob_existing(&s, &c, 0, 0, &p).unwrap();
    assert!((lp - (8.0f64 / 27.0).ln()).abs() < 1e-12);
}

#[test]
fn prior_examples() {
    let p = params(1.0, 1.0);
    assert!((log_prior_existing(4, 3, 10, &p) - (13.0f64 / 30.0).ln()).abs() < 1e-12);
    let crp = Hyperparams { crp_prior: true, ..p.clone() };
    assert!((log_prior_existing(4, 3, 10, &crp) - (4.0f64 / 10.0).ln()).abs() < 1e-12);
    // α/K vanishes as K grows.
    let mut last = f64::INFINITY;
    for k in [1, 10, 100, 1000, 100_000] {
        let diff = (log_prior_existing(4, k, 10, &p).exp() - 4.0 / 10.0).abs();
        assert!(diff < last);
        last = diff;
    }
    assert!(last < 1e-5);
}

#[test]
fn new_table_example() {
    let c = corpus([2, 2, 2], vec![vec![(1, 0, 1)], vec![(0, 0, 0)], vec![(0, 1, 0)]]);
    let mut s = ClusterState::from_assignments(&c, &[0, 0, 1]).unwrap();
    s.kick_out(&c, 0).unwrap();
    let alpha = 0.5;
    let lp = log_prob_new(&s, &c, 0, &params(alpha, 1.0)).unwrap();
    let expected = (alpha / (3.0 - 1.0 + alpha)) * 0.125;
    assert!((lp - expected.ln()).abs() < 1e-12);

    // Larger α raises only the prior term.
    let lp2 = log_prob_new(&s, &c, 0, &params(2.0, 1.0)).unwrap();
    assert!(lp2 > lp);
    assert!((lp2 - log_prior_new(3, &params(2.0, 1.0)) - (lp - log_prior_new(3, &params(alpha, 1.0)))).abs() < 1e-12);
}

#[test]
fn lone_passenger_opens_a_table() {
    let c = corpus([2, 2, 2], vec![vec![(1, 0, 1), (1, 1, 1)]]);
    let mut s = ClusterState::from_assignments(&c, &[0]).unwrap();
    s.kick_out(&c, 0).unwrap();
    assert_eq!(s.n_clusters(), 0);
    assert_eq!(log_prior_new(1, &params(0.3, 1.0)), 0.0);
    let dist = choice_distribution(&s, &c, 0, &params(0.3, 1.0), true).unwrap();
    assert_eq!(dist, vec![(TableChoice::New, 1.0)]);
    assert_eq!(
        choice_distribution(&s, &c, 0, &params(0.3, 1.0), false),
        Err(DpmmError::NoTarget(0))
    );
}

#[test]
fn contract_violations() {
    let c = corpus([2, 2, 2], vec![vec![(0, 0, 0)], vec![(1, 1, 1)]]);
    let mut s = ClusterState::from_assignments(&c, &[0, 1]).unwrap();
    let p = params(1.0, 1.0);
    assert_eq!(log_prob_existing(&s, &c, 0, 1, &p), Err(DpmmError::NotKickedOut(0)));
    assert_eq!(log_prob_new(&s, &c, 0, &p), Err(DpmmError::NotKickedOut(0)));
    s.kick_out(&c, 0).unwrap();
    assert_eq!(log_prob_existing(&s, &c, 0, 7, &p), Err(DpmmError::UnknownCluster(7)));
    assert_eq!(s.kick_out(&c, 0), Err(DpmmError::NotSeated(0)));
    assert_eq!(s.merge(&c, 1, TableChoice::New), Err(DpmmError::NotKickedOut(1)));
    assert_eq!(s.merge(&c, 0, TableChoice::Existing(0)), Err(DpmmError::UnknownCluster(0)));
}

#[test]
fn forced_single_choice() {
    let c = corpus([2, 2, 2], vec![vec![(0, 0, 0)], vec![(1, 1, 1)], vec![(1, 0, 1)]]);
    let mut s = ClusterState::from_assignments(&c, &[0, 0, 0]).unwrap();
    s.kick_out(&c, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let ch = sample_assignment(&s, &c, 2, &params(1.0, 1.0), &mut rng, false).unwrap();
        assert_eq!(ch, TableChoice::Existing(0));
    }
    let dist = choice_distribution(&s, &c, 2, &params(1.0, 1.0), true).unwrap();
    assert!((dist.iter().map(|d| d.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn init_single_table() {
    let c = corpus([2, 2, 2], (0..7).map(|i| vec![(i % 2, 0, 1)]).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = init(&c, 1, &mut rng).unwrap();
    assert_eq!(s.n_clusters(), 1);
    assert_eq!(s.cluster(0).unwrap().members(), 7);
    s.audit(&c).unwrap();
}

#[test]
fn init_many_tables_removes_empties() {
    let c = corpus([2, 2, 2], (0..3).map(|i| vec![(i % 2, 0, 1)]).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = init(&c, 50, &mut rng).unwrap();
    assert!(s.n_clusters() <= 3);
    let total: usize = s.cluster_ids().map(|z| s.cluster(z).unwrap().members()).sum();
    assert_eq!(total, 3);
    s.audit(&c).unwrap();
}

#[test]
fn identical_documents_collapse_to_one_table() {
    let c = corpus([3, 3, 3], vec![vec![(1, 2, 0)]; 40]);
    let labels: Vec<usize> = (0..40).map(|u| u % 4).collect();
    let mut s = ClusterState::from_assignments(&c, &labels).unwrap();
    let p = params(1e-8, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        gibbs_sweep(&mut s, &c, &p, &mut rng).unwrap();
    }
    assert_eq!(s.n_clusters(), 1);
    // K = 1 is absorbing: a kicked-out passenger returns with probability ~1.
    s.kick_out(&c, 0).unwrap();
    let dist = choice_distribution(&s, &c, 0, &p, true).unwrap();
    assert!(dist[0].1 > 1.0 - 1e-6);
}

#[test]
fn disband_forced_relocation() {
    let mut docs = vec![vec![(0, 0, 0)]; 3];
    docs.extend(vec![vec![(1, 1, 1)]; 47]);
    let c = corpus([2, 2, 2], docs);
    let labels: Vec<usize> = (0..50).map(|u| usize::from(u >= 3)).collect();
    let mut s = ClusterState::from_assignments(&c, &labels).unwrap();
    let p = Hyperparams { r: 45, ..params(0.01, 0.01) };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = disband_and_relocate(&mut s, &c, &p, &mut rng).unwrap();
    assert_eq!(rep.disbanded, vec![(0, 3)]);
    assert_eq!(rep.relocated, 3);
    assert!(!rep.fallback);
    assert_eq!(s.n_clusters(), 1);
    assert_eq!(s.cluster(1).unwrap().members(), 50);
}

#[test]
fn disband_noop_cases() {
    let c = corpus([2, 2, 2], (0..6).map(|i| vec![(i % 2, 0, 0)]).collect());
    let s0 = ClusterState::from_assignments(&c, &[0, 1, 2, 0, 1, 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for r in [1, 2] {
        let mut s = s0.clone();
        let p = Hyperparams { r, ..params(1.0, 1.0) };
        let rep = disband_and_relocate(&mut s, &c, &p, &mut rng).unwrap();
        assert!(rep.is_empty());
        assert_eq!(s, s0);
    }
}

#[test]
fn disband_fallback_keeps_largest() {
    let c = corpus([2, 2, 2], (0..6).map(|i| vec![(i % 2, 0, 0)]).collect());
    let mut s = ClusterState::from_assignments(&c, &[0, 1, 1, 2, 2, 2]).unwrap();
    let p = Hyperparams { r: 10, ..params(1.0, 1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rep = disband_and_relocate(&mut s, &c, &p, &mut rng).unwrap();
    assert!(rep.fallback);
    assert_eq!(rep.disbanded, vec![(0, 1), (1, 2)]);
    assert_eq!(s.cluster_ids().collect::<Vec<_>>(), vec![2]);
    assert_eq!(s.cluster(2).unwrap().members(), 6);
}

#[test]
fn run_is_deterministic_and_respects_r() {
    let docs = (0..60u32)
        .map(|u| (0..4).map(|j| (u % 3, (u + j) % 3, u % 2)).collect())
        .collect();
    let c = corpus([3, 3, 2], docs);
    let p = Hyperparams {
        alpha: 1.0,
        beta: [0.1; 3],
        r: 5,
        max_iter: 10,
        seed: 17,
        ..Hyperparams::default()
    };
    let a = run(&c, &p).unwrap();
    let b = run(&c, &p).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.k_trace, b.k_trace);
    assert_eq!(a.k_trace.len(), 10);
    for z in a.state.cluster_ids() {
        assert!(a.state.cluster(z).unwrap().members() >= 5 || a.fallback_fired());
    }
}

#[test]
fn hyperparam_validation() {
    assert!(Hyperparams::default().validate().is_ok());
    for bad in [
        Hyperparams { alpha: 0.0, ..Hyperparams::default() },
        Hyperparams { beta: [0.1, -1.0, 0.1], ..Hyperparams::default() },
        Hyperparams { r: 0, ..Hyperparams::default() },
        Hyperparams { max_iter: 0, ..Hyperparams::default() },
        Hyperparams { k0: 0, ..Hyperparams::default() },
    ] {
        assert!(matches!(bad.validate(), Err(DpmmError::InvalidParams(_))));
    }
}

#[test]
fn summary_and_trace_exports() {
    let c = corpus([2, 2, 2], vec![vec![(0, 1, 1), (0, 0, 1)], vec![(1, 1, 0)]]);
    let s = ClusterState::from_assignments(&c, &[3, 5]).unwrap();
    assert_eq!(s.compact_assignments(), vec![0, 1]);
    let lines = cluster_summary_lines(&s, &c, 10);
    assert_eq!(lines[0], "[cluster 0]");
    assert_eq!(lines[1], "m_z = 1");
    assert_eq!(lines[2], "n_z = 2");
    assert_eq!(lines[3], "origin = 0:2");
    assert_eq!(lines[4], "destination = 0:1 1:1");
    assert_eq!(k_trace_lines(&[1, 3]), vec!["iteration,K", "1,1", "2,3"]);
}

fn arb_corpus() -> impl Strategy<Value = (Corpus, Vec<usize>)> {
    let word = (0u32..3, 0u32..3, 0u32..4);
    let doc = prop::collection::vec(word, 1..6);
    prop::collection::vec((doc, 0usize..4), 1..12).prop_map(|docs| {
        let mut distinct: Vec<usize> = docs.iter().map(|d| d.1).collect();
        distinct.sort_unstable();
        distinct.dedup();
        // Contiguous ids, so no free slot precedes a deleted table.
        let labels = docs.iter().map(|d| distinct.binary_search(&d.1).unwrap()).collect();
        (corpus([3, 3, 4], docs.into_iter().map(|d| d.0).collect()), labels)
    })
}

proptest! {
    #[test]
    fn kick_out_then_merge_restores_state((c, labels) in arb_corpus(), pick in 0usize..100) {
        let s0 = ClusterState::from_assignments(&c, &labels).unwrap();
        let u = pick % c.len();
        let z = s0.assignment(u).unwrap();
        let mut s = s0.clone();
        let deleted = s.kick_out(&c, u).unwrap();
        let choice = match deleted {
            Some(_) => TableChoice::New,
            None => TableChoice::Existing(z),
        };
        prop_assert_eq!(s.merge(&c, u, choice).unwrap(), z);
        prop_assert_eq!(s, s0);
    }

    #[test]
    fn sweeps_conserve_counts((c, labels) in arb_corpus(), seed in 0u64..1000, alpha in 0.01f64..5.0) {
        let mut s = ClusterState::from_assignments(&c, &labels).unwrap();
        let p = Hyperparams { alpha, beta: [0.05, 0.2, 1.0], r: 3, ..Hyperparams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            gibbs_sweep(&mut s, &c, &p, &mut rng).unwrap();
            s.audit(&c).unwrap();
        }
        let rep = disband_and_relocate(&mut s, &c, &p, &mut rng).unwrap();
        s.audit(&c).unwrap();
        let m: usize = s.cluster_ids().map(|z| s.cluster(z).unwrap().members()).sum();
        let n: usize = s.cluster_ids().map(|z| s.cluster(z).unwrap().words()).sum();
        prop_assert_eq!(m, c.len());
        prop_assert_eq!(n, c.total_words());
        for z in s.cluster_ids() {
            prop_assert!(s.cluster(z).unwrap().members() >= 3 || rep.fallback);
        }
    }

    #[test]
    fn log_probs_finite((c, labels) in arb_corpus(), pick in 0usize..100, alpha in 1e-6f64..50.0, beta in 1e-6f64..10.0) {
        let mut s = ClusterState::from_assignments(&c, &labels).unwrap();
        let u = pick % c.len();
        s.kick_out(&c, u).unwrap();
        for (_, lp) in log_weights(&s, &c, u, &params(alpha, beta), true).unwrap() {
            prop_assert!(lp.is_finite());
        }
    }
}
