use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{CommunityTotals, NeighborWeights, Network};
use super::{
    best_of_starts, finish, relabel, Method, Partition, QualityVariant, DEFAULT_STARTS, GAIN_EPS,
    MAX_LEVELS,
};
use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

const MAX_SWEEPS: usize = 1000;

/// Louvain: repeated local moving and aggregation until no move improves quality.
/// The best of [`DEFAULT_STARTS`] starts from singletons is returned.
pub fn louvain(g: &AdjacencyGraph, variant: QualityVariant, seed: u64) -> Result<Partition> {
    louvain_with_starts(g, variant, seed, DEFAULT_STARTS)
}

pub fn louvain_with_starts(
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
        finish(g, pass(&base, &mut rng), Method::Louvain, variant, seed)
    })
}

fn pass(base: &Network, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut net = base.clone();
    let mut membership: Vec<usize> = (0..net.len()).collect();
    for _ in 0..MAX_LEVELS {
        let mut comm: Vec<usize> = (0..net.len()).collect();
        if !local_moves(&net, &mut comm, rng) {
            break;
        }
        let comm = relabel(&comm);
        for m in &mut membership {
            *m = comm[*m];
        }
        net = net.aggregate(&comm);
    }
    membership
}

/// Sweeps nodes in a seeded random order, moving each to its best neighbouring
/// community, until a full sweep makes no move. Returns whether anything moved.
fn local_moves(net: &Network, comm: &mut [usize], rng: &mut ChaCha8Rng) -> bool {
    let n = net.len();
    let mut totals = CommunityTotals::new(net, comm, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut weights = NeighborWeights::new(n);
    let mut any = false;

    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for &node in &order {
            let old = comm[node];
            weights.collect(net, node, comm, |j| j != node);
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
            totals.add(net, node, best);
            comm[node] = best;
            moved |= best != old;
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}
