use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{CommunityTotals, NeighborWeights, Network};
use super::{
    best_of_starts, finish, modularity, relabel, split_disconnected, Method, Partition,
    QualityVariant, DEFAULT_STARTS, GAIN_EPS, MAX_LEVELS,
};
use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

/// Randomness of the refinement step, in units of edge weight.
const THETA: f64 = 0.01;

/// Leiden passes per start; each pass begins from the previous partition.
pub const MAX_PASSES: usize = 2;

/// Leiden: fast local moving, refinement within communities, aggregation of the
/// refined partition. Within a start, up to [`MAX_PASSES`] passes repeat from the
/// previous result while quality improves; the best of [`DEFAULT_STARTS`] starts
/// is returned.
/// Every returned community induces a connected subgraph.
pub fn leiden(g: &AdjacencyGraph, variant: QualityVariant, seed: u64) -> Result<Partition> {
    leiden_with_starts(g, variant, seed, DEFAULT_STARTS)
}

pub fn leiden_with_starts(
    g: &AdjacencyGraph,
    variant: QualityVariant,
    seed: u64,
    starts: usize,
) -> Result<Partition> {
    if g.edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Network::from_graph(g, variant);
    best_of_starts(starts, || {
        let mut assignment: Vec<usize> = (0..g.n).collect();
        let mut quality = f64::NEG_INFINITY;
        for _ in 0..MAX_PASSES {
            let next = split_disconnected(g, &pass(&base, &assignment, &mut rng));
            let q = modularity(g, &next, variant)?;
            if q <= quality + GAIN_EPS {
                break;
            }
            assignment = next;
            quality = q;
        }
        finish(g, assignment, Method::Leiden, variant, seed)
    })
}

/// One Leiden pass over `base`, starting from `initial`.
fn pass(base: &Network, initial: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut net = base.clone();
    let mut membership: Vec<usize> = (0..net.len()).collect();
    let mut part = relabel(initial);

    for _ in 0..MAX_LEVELS {
        fast_local_moves(&net, &mut part, rng);
        part = relabel(&part);
        let k = part.iter().max().map_or(0, |m| m + 1);
        if k == net.len() {
            break;
        }
        let refined = refine(&net, &part, rng);
        let n_refined = refined.iter().max().map_or(0, |m| m + 1);
        if n_refined == net.len() {
            // nothing merges inside any community: the partition is stable
            break;
        }
        let mut next_part = vec![0; n_refined];
        for (node, &r) in refined.iter().enumerate() {
            next_part[r] = part[node];
        }
        for m in &mut membership {
            *m = refined[*m];
        }
        net = net.aggregate(&refined);
        part = next_part;
    }
    membership.iter().map(|&v| part[v]).collect()
}

/// Queue-based local moving; a node that changes community re-queues its neighbours
/// outside the new community. Moving into an empty community is allowed.
fn fast_local_moves(net: &Network, part: &mut [usize], rng: &mut ChaCha8Rng) {
    let n = net.len();
    let mut totals = CommunityTotals::new(net, part, n);
    let mut unused: Vec<usize> = (0..n).rev().filter(|&c| totals.is_empty(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into_iter().collect();
    let mut queued = vec![true; n];
    let mut weights = NeighborWeights::new(n);

    while let Some(node) = queue.pop_front() {
        queued[node] = false;
        let old = part[node];
        weights.collect(net, node, part, |j| j != node);
        totals.remove(net, node, old);
        let mut best = old;
        let mut best_gain = net.gain(node, weights.get(old), &totals, old);
        for &c in weights.communities() {
            let gain = net.gain(node, weights.get(c), &totals, c);
            if gain > best_gain + GAIN_EPS {
                best = c;
                best_gain = gain;
            }
        }
        // an empty community has zero gain
        if !totals.is_empty(old) && 0.0 > best_gain + GAIN_EPS {
            if let Some(&empty) = unused.last() {
                best = empty;
            }
        }
        if best != old {
            if unused.last() == Some(&best) {
                unused.pop();
            }
            if totals.is_empty(old) {
                unused.push(old);
            }
        }
        totals.add(net, node, best);
        part[node] = best;
        if best != old {
            for nb in &net.adj[node] {
                if !queued[nb.node] && part[nb.node] != best {
                    queued[nb.node] = true;
                    queue.push_back(nb.node);
                }
            }
        }
    }
}

/// Splits each community of `part` into well-connected subcommunities by merging
/// singletons into neighbouring subcommunities of the same parent.
fn refine(net: &Network, part: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = net.len();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut rtot = CommunityTotals::new(net, &refined, n);
    let ptot = CommunityTotals::new(net, part, n);

    // weight between each refined community and the rest of its parent
    let mut external: Vec<f64> = (0..n)
        .map(|v| {
            net.adj[v]
                .iter()
                .filter(|nb| part[nb.node] == part[v])
                .map(|nb| nb.both())
                .sum()
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut weights = NeighborWeights::new(n);
    let scale = net.total / 2.0;

    for node in order {
        let own = refined[node];
        if rtot.size[own] != net.size[node] {
            continue;
        }
        let s = part[node];
        if ptot.size[s] == net.size[node] {
            continue;
        }
        let well_connected = net.gain_raw(
            external[node],
            net.out_w[node],
            net.in_w[node],
            net.size[node],
            ptot.out[s] - net.out_w[node],
            ptot.inn[s] - net.in_w[node],
            ptot.size[s] - net.size[node],
        ) >= 0.0;
        if !well_connected {
            continue;
        }

        weights.collect(net, node, &refined, |j| j != node && part[j] == s);
        rtot.remove(net, node, own);
        let mut candidates: Vec<(usize, f64)> = vec![(own, 0.0)];
        for &c in weights.communities() {
            let w = weights.get(c);
            if w <= 0.0 {
                continue;
            }
            let c_connected = net.gain_raw(
                external[c],
                rtot.out[c],
                rtot.inn[c],
                rtot.size[c],
                ptot.out[s] - rtot.out[c],
                ptot.inn[s] - rtot.inn[c],
                ptot.size[s] - rtot.size[c],
            ) >= 0.0;
            if !c_connected {
                continue;
            }
            let gain = net.gain(node, w, &rtot, c);
            if gain >= 0.0 {
                candidates.push((c, gain));
            }
        }

        let top = candidates
            .iter()
            .map(|c| c.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let probs: Vec<f64> = candidates
            .iter()
            .map(|&(_, gain)| ((gain - top) * scale / THETA).exp())
            .collect();
        let mut pick = rng.random::<f64>() * probs.iter().sum::<f64>();
        let mut chosen = candidates[candidates.len() - 1].0;
        for (&(c, _), p) in candidates.iter().zip(&probs) {
            if pick < *p {
                chosen = c;
                break;
            }
            pick -= p;
        }

        rtot.add(net, node, chosen);
        refined[node] = chosen;
        if chosen != own {
            external[chosen] += external[node] - 2.0 * weights.get(chosen);
        }
    }
    relabel(&refined)
}
