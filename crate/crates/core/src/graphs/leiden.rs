//! Leiden modularity maximization (fast local moving, refinement,
//! aggregation) on unweighted station graphs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CommunityLabeling, SemanticGraph};

// Randomness of the refinement merge step.
const THETA: f64 = 0.01;
const MAX_LEVELS: usize = 64;
const EPS: f64 = 1e-12;

/// Newman–Girvan modularity of `labels` on `graph`; 0 for an edgeless graph.
pub fn modularity(graph: &SemanticGraph, labels: &[usize]) -> f64 {
    let m = graph.n_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let n_comm = labels.iter().max().map_or(0, |x| x + 1);
    let mut internal = vec![0.0; n_comm];
    let mut degree = vec![0.0; n_comm];
    for v in 0..graph.n_nodes() {
        degree[labels[v]] += graph.neighbors(v).len() as f64;
    }
    for (a, b) in graph.edges() {
        if labels[a] == labels[b] {
            internal[labels[a]] += 1.0;
        }
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// Weighted undirected network; `self_loops[i]` holds `A_ii` (each
/// internal edge of an aggregated node counted twice).
struct Network {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Network {
    fn from_graph(graph: &SemanticGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..graph.n_nodes())
            .map(|v| graph.neighbors(v).iter().map(|&u| (u, 1.0)).collect())
            .collect();
        let degree: Vec<f64> = adj.iter().map(|l| l.len() as f64).collect();
        let two_m = degree.iter().sum();
        Network {
            self_loops: vec![0.0; adj.len()],
            adj,
            degree,
            two_m,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community of `part` (labels 0..n_parts) into one node.
    fn aggregate(&self, part: &[usize], n_parts: usize) -> Network {
        let mut self_loops = vec![0.0; n_parts];
        let mut degree = vec![0.0; n_parts];
        let mut dense = vec![0.0; n_parts];
        let mut touched = Vec::new();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_parts];
        for (v, &c) in part.iter().enumerate() {
            members[c].push(v);
        }
        let mut adj = vec![Vec::new(); n_parts];
        for c in 0..n_parts {
            for &v in &members[c] {
                degree[c] += self.degree[v];
                self_loops[c] += self.self_loops[v];
                for &(u, w) in &self.adj[v] {
                    let cu = part[u];
                    if cu == c {
                        self_loops[c] += w;
                    } else {
                        if dense[cu] == 0.0 {
                            touched.push(cu);
                        }
                        dense[cu] += w;
                    }
                }
            }
            touched.sort_unstable();
            for &cu in &touched {
                adj[c].push((cu, dense[cu]));
                dense[cu] = 0.0;
            }
            touched.clear();
        }
        Network {
            adj,
            self_loops,
            degree,
            two_m: self.two_m,
        }
    }
}

/// Sums edge weight from `v` to each neighbouring community, excluding `v` itself.
fn neighbor_weights(net: &Network, v: usize, part: &[usize], acc: &mut [f64], touched: &mut Vec<usize>) {
    for &(u, w) in &net.adj[v] {
        let c = part[u];
        if !touched.contains(&c) {
            touched.push(c);
        }
        acc[c] += w;
    }
    touched.sort_unstable();
}

fn move_nodes_fast(net: &Network, part: &mut [usize], rng: &mut ChaCha8Rng) -> bool {
    let n = net.len();
    let mut tot = vec![0.0; n];
    let mut size = vec![0usize; n];
    for v in 0..n {
        tot[part[v]] += net.degree[v];
        size[part[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: std::collections::VecDeque<usize> = order.into_iter().collect();
    let mut queued = vec![true; n];
    let mut acc = vec![0.0; n];
    let mut touched = Vec::new();
    let mut changed = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let old = part[v];
        let kv = net.degree[v];
        neighbor_weights(net, v, part, &mut acc, &mut touched);
        tot[old] -= kv;
        size[old] -= 1;

        let gain = |c: usize, kvc: f64| kvc - kv * tot[c] / net.two_m;
        let stay = gain(old, acc[old]);
        let mut best = old;
        let mut best_gain = stay;
        for &c in &touched {
            if c == old {
                continue;
            }
            let g = gain(c, acc[c]);
            if g > best_gain + EPS {
                best = c;
                best_gain = g;
            }
        }
        // An empty community has gain 0.
        if best_gain < -EPS && size[old] > 0 {
            if let Some(&c) = empty.last() {
                best = c;
            }
        }
        for &c in &touched {
            acc[c] = 0.0;
        }
        touched.clear();

        if size[old] == 0 && best != old {
            empty.push(old);
        }
        if let Some(pos) = empty.iter().position(|&c| c == best) {
            empty.swap_remove(pos);
        }
        part[v] = best;
        tot[best] += kv;
        size[best] += 1;
        if best != old {
            changed = true;
            for &(u, _) in &net.adj[v] {
                if !queued[u] && part[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    changed
}

/// Refines each community of `part` by randomized merging of singletons
/// into well-connected sub-communities. Returns contiguous refined labels.
fn refine(net: &Network, part: &[usize], rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let n = net.len();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = net.degree.clone();
    let mut size = vec![1usize; n];
    // Weight from each refined community to the rest of its parent community.
    let mut ext = vec![0.0; n];
    let mut comm_tot = vec![0.0; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        comm_tot[part[v]] += net.degree[v];
        members[part[v]].push(v);
        ext[v] = net.adj[v].iter().filter(|(u, _)| part[*u] == part[v]).map(|(_, w)| w).sum();
    }
    let mut acc = vec![0.0; n];
    let mut touched = Vec::new();

    for (c, nodes) in members.iter().enumerate() {
        if nodes.len() < 2 {
            continue;
        }
        let total = comm_tot[c];
        let mut candidates: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&v| ext[v] + EPS >= net.degree[v] * (total - net.degree[v]) / net.two_m)
            .collect();
        candidates.shuffle(rng);
        for v in candidates {
            if size[refined[v]] != 1 {
                continue;
            }
            let kv = net.degree[v];
            let own = refined[v];
            for &(u, w) in &net.adj[v] {
                if part[u] != c {
                    continue;
                }
                let r = refined[u];
                if !touched.contains(&r) {
                    touched.push(r);
                }
                acc[r] += w;
            }
            touched.sort_unstable();
            let mut options: Vec<(usize, f64)> = vec![(own, 0.0)];
            for &r in &touched {
                if r == own {
                    continue;
                }
                let well_connected = ext[r] + EPS >= tot[r] * (total - tot[r]) / net.two_m;
                if !well_connected {
                    continue;
                }
                let dq = (acc[r] - kv * tot[r] / net.two_m) / (net.two_m / 2.0);
                if dq >= 0.0 {
                    options.push((r, dq));
                }
            }
            let max = options.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = options.iter().map(|o| ((o.1 - max) / THETA).exp()).collect();
            let sum: f64 = weights.iter().sum();
            let mut draw = rng.random::<f64>() * sum;
            let mut target = options[options.len() - 1].0;
            for (o, w) in options.iter().zip(&weights) {
                if draw < *w {
                    target = o.0;
                    break;
                }
                draw -= w;
            }
            if target != own {
                let kvt = acc[target];
                ext[target] = ext[target] + ext[own] - 2.0 * kvt;
                tot[target] += kv;
                size[target] += 1;
                tot[own] = 0.0;
                size[own] = 0;
                refined[v] = target;
            }
            for &r in &touched {
                acc[r] = 0.0;
            }
            touched.clear();
        }
    }
    relabel(&mut refined)
}

/// Renumbers labels to 0.. in first-appearance order.
fn relabel(labels: &mut [usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; labels.len().max(labels.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for l in labels.iter_mut() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
    (labels.to_vec(), next)
}

/// Detects communities by Leiden modularity maximization.
///
/// Deterministic for a given `(graph, seed)`. Isolated nodes end up as
/// singletons; an edgeless graph yields all singletons with modularity 0.
pub fn detect_communities(graph: &SemanticGraph, seed: u64) -> CommunityLabeling {
    let n = graph.n_nodes();
    if graph.n_edges() == 0 {
        return CommunityLabeling {
            labels: (0..n).collect(),
            n_communities: n,
            modularity: 0.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::from_graph(graph);
    let mut part: Vec<usize> = (0..n).collect();
    // Original node → node of the current aggregate network.
    let mut flat: Vec<usize> = (0..n).collect();

    for _ in 0..MAX_LEVELS {
        move_nodes_fast(&net, &mut part, &mut rng);
        let (_, n_comm) = relabel(&mut part);
        if n_comm == net.len() {
            break;
        }
        let (refined, n_refined) = refine(&net, &part, &mut rng);
        let mut next_part = vec![0; n_refined];
        for v in 0..net.len() {
            next_part[refined[v]] = part[v];
        }
        net = net.aggregate(&refined, n_refined);
        for f in flat.iter_mut() {
            *f = refined[*f];
        }
        part = next_part;
    }
    let raw: Vec<usize> = flat.iter().map(|&f| part[f]).collect();
    CommunityLabeling::from_raw(graph, &raw)
}
