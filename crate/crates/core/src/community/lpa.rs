use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finish, Method, Partition, QualityVariant, LPA_MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

/// Asynchronous label propagation. Each node adopts the most frequent label among
/// its neighbours, ties broken uniformly at random. Stops once every node holds a
/// most-frequent label, or after [`LPA_MAX_SWEEPS`] sweeps.
pub fn label_propagation(g: &AdjacencyGraph, seed: u64) -> Result<Partition> {
    if g.edges.is_empty() {
        return Err(Error::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adj = g.adjacency_lists();
    let mut labels: Vec<usize> = (0..g.n).collect();
    let mut counts = vec![0usize; g.n];
    let mut order: Vec<usize> = (0..g.n).collect();
    let mut best = Vec::new();

    let dominant = |node: usize, labels: &[usize], counts: &mut [usize], best: &mut Vec<usize>| {
        best.clear();
        let mut top = 0;
        for &nb in &adj[node] {
            counts[labels[nb]] += 1;
        }
        for &nb in &adj[node] {
            let c = counts[labels[nb]];
            if c > top {
                top = c;
                best.clear();
            }
            if c == top && !best.contains(&labels[nb]) {
                best.push(labels[nb]);
            }
        }
        for &nb in &adj[node] {
            counts[labels[nb]] = 0;
        }
        best.sort_unstable();
    };

    for _ in 0..LPA_MAX_SWEEPS {
        order.shuffle(&mut rng);
        for &node in &order {
            if adj[node].is_empty() {
                continue;
            }
            dominant(node, &labels, &mut counts, &mut best);
            labels[node] = *best.choose(&mut rng).expect("node has neighbours");
        }
        let stable = (0..g.n).all(|node| {
            if adj[node].is_empty() {
                return true;
            }
            dominant(node, &labels, &mut counts, &mut best);
            best.contains(&labels[node])
        });
        if stable {
            break;
        }
    }
    finish(
        g,
        labels,
        Method::LabelPropagation,
        QualityVariant::Newman,
        seed,
    )
}
