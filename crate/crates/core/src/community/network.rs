//! Weighted (possibly aggregated) network shared by Louvain and Leiden.
//!
//! Every quality function is expressed over directed arc weights. Undirected
//! variants store each edge as two arcs, so Newman modularity is the directed
//! formula on a symmetric arc set.

use super::QualityVariant;
use crate::graph::AdjacencyGraph;

#[derive(Debug, Clone, Copy)]
pub(super) enum Objective {
    /// Arc-based modularity; `total` is the total arc weight.
    Modularity,
    /// Constant Potts model; gains are divided by the undirected edge weight.
    Cpm { resolution: f64 },
}

#[derive(Debug, Clone)]
pub(super) struct Neighbor {
    pub node: usize,
    /// Arc weight towards `node`.
    pub w_out: f64,
    /// Arc weight from `node`.
    pub w_in: f64,
}

impl Neighbor {
    pub fn both(&self) -> f64 {
        self.w_out + self.w_in
    }
}

#[derive(Debug, Clone)]
pub(super) struct Network {
    pub adj: Vec<Vec<Neighbor>>,
    pub out_w: Vec<f64>,
    pub in_w: Vec<f64>,
    pub size: Vec<f64>,
    /// Arc weight from each node to itself (aggregated internal arcs).
    pub self_w: Vec<f64>,
    pub total: f64,
    pub objective: Objective,
}

impl Network {
    pub fn from_graph(g: &AdjacencyGraph, variant: QualityVariant) -> Self {
        let arcs = match variant {
            QualityVariant::Dugue => g.directed_arcs(),
            _ => g
                .edges
                .iter()
                .flat_map(|&(a, b)| [(a, b), (b, a)])
                .collect(),
        };
        let objective = match variant {
            QualityVariant::Potts { resolution } => Objective::Cpm { resolution },
            _ => Objective::Modularity,
        };
        let n = g.n;
        let mut maps: Vec<std::collections::BTreeMap<usize, (f64, f64)>> =
            vec![Default::default(); n];
        let mut out_w = vec![0.0; n];
        let mut in_w = vec![0.0; n];
        for &(a, b) in &arcs {
            maps[a].entry(b).or_default().0 += 1.0;
            maps[b].entry(a).or_default().1 += 1.0;
            out_w[a] += 1.0;
            in_w[b] += 1.0;
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(node, (w_out, w_in))| Neighbor { node, w_out, w_in })
                    .collect()
            })
            .collect();
        Self {
            adj,
            out_w,
            in_w,
            size: vec![1.0; n],
            self_w: vec![0.0; n],
            total: arcs.len() as f64,
            objective,
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    /// Normalized quality change of inserting a node that is currently alone into a
    /// community with the given totals (the node itself excluded from them).
    pub fn gain(&self, node: usize, w_both: f64, comm: &CommunityTotals, c: usize) -> f64 {
        self.gain_raw(
            w_both,
            self.out_w[node],
            self.in_w[node],
            self.size[node],
            comm.out[c],
            comm.inn[c],
            comm.size[c],
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn gain_raw(
        &self,
        w_both: f64,
        out: f64,
        inn: f64,
        size: f64,
        c_out: f64,
        c_in: f64,
        c_size: f64,
    ) -> f64 {
        match self.objective {
            Objective::Modularity => {
                w_both / self.total - (out * c_in + inn * c_out) / (self.total * self.total)
            }
            Objective::Cpm { resolution } => {
                (w_both / 2.0 - resolution * size * c_size) / (self.total / 2.0)
            }
        }
    }

    /// Collapses communities into nodes. `comm` must be contiguous from 0.
    pub fn aggregate(&self, comm: &[usize]) -> Network {
        let k = comm.iter().max().map_or(0, |m| m + 1);
        let mut maps: Vec<std::collections::BTreeMap<usize, (f64, f64)>> =
            vec![Default::default(); k];
        let mut out_w = vec![0.0; k];
        let mut in_w = vec![0.0; k];
        let mut size = vec![0.0; k];
        let mut self_w = vec![0.0; k];
        for i in 0..self.len() {
            let ci = comm[i];
            out_w[ci] += self.out_w[i];
            in_w[ci] += self.in_w[i];
            size[ci] += self.size[i];
            self_w[ci] += self.self_w[i];
            for nb in &self.adj[i] {
                let cj = comm[nb.node];
                if ci == cj {
                    self_w[ci] += nb.w_out;
                } else {
                    let e = maps[ci].entry(cj).or_default();
                    e.0 += nb.w_out;
                    e.1 += nb.w_in;
                }
            }
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(node, (w_out, w_in))| Neighbor { node, w_out, w_in })
                    .collect()
            })
            .collect();
        Network {
            adj,
            out_w,
            in_w,
            size,
            self_w,
            total: self.total,
            objective: self.objective,
        }
    }
}

/// Per-community sums of node weights.
#[derive(Debug, Clone)]
pub(super) struct CommunityTotals {
    pub out: Vec<f64>,
    pub inn: Vec<f64>,
    pub size: Vec<f64>,
}

impl CommunityTotals {
    pub fn new(net: &Network, comm: &[usize], n_comms: usize) -> Self {
        let mut t = Self {
            out: vec![0.0; n_comms],
            inn: vec![0.0; n_comms],
            size: vec![0.0; n_comms],
        };
        for (i, &c) in comm.iter().enumerate() {
            t.add(net, i, c);
        }
        t
    }

    pub fn add(&mut self, net: &Network, node: usize, c: usize) {
        self.out[c] += net.out_w[node];
        self.inn[c] += net.in_w[node];
        self.size[c] += net.size[node];
    }

    pub fn remove(&mut self, net: &Network, node: usize, c: usize) {
        self.out[c] -= net.out_w[node];
        self.inn[c] -= net.in_w[node];
        self.size[c] -= net.size[node];
    }

    pub fn is_empty(&self, c: usize) -> bool {
        self.size[c] <= 0.0
    }
}

/// Scratch accumulator of edge weight from one node to each neighbouring community.
#[derive(Debug, Clone)]
pub(super) struct NeighborWeights {
    weight: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    pub fn new(n: usize) -> Self {
        Self {
            weight: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }

    /// Fills weights from `node` to every community among its neighbours, sorted by id.
    pub fn collect(
        &mut self,
        net: &Network,
        node: usize,
        comm: &[usize],
        keep: impl Fn(usize) -> bool,
    ) {
        self.clear();
        for nb in &net.adj[node] {
            if !keep(nb.node) {
                continue;
            }
            let c = comm[nb.node];
            if !self.seen[c] {
                self.seen[c] = true;
                self.touched.push(c);
            }
            self.weight[c] += nb.both();
        }
        self.touched.sort_unstable();
    }

    pub fn clear(&mut self) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
    }

    pub fn get(&self, c: usize) -> f64 {
        self.weight[c]
    }

    pub fn communities(&self) -> &[usize] {
        &self.touched
    }
}
