use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Graph, Link, Network, NetworkError};

/// Ordered link sequence plus its summed generalized cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub links: Vec<String>,
    pub travel_cost: f64,
}

impl Path {
    pub fn empty() -> Self {
        Path {
            links: Vec::new(),
            travel_cost: 0.0,
        }
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source least-cost tree over a [`Graph`].
///
/// Equal-cost alternatives are resolved towards the lexicographically
/// smallest link-id sequence. That resolution is exact when every usable
/// link has a strictly positive cost.
#[derive(Debug, Clone)]
pub struct LeastCostTree {
    pub source: usize,
    pub cost: Vec<f64>,
    pub pred: Vec<Option<usize>>,
}

impl LeastCostTree {
    /// `cost` returns `None` for links that may not be used.
    pub fn build(graph: &Graph, source: usize, cost: impl Fn(usize) -> Option<f64>) -> Self {
        let n = graph.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry {
            cost: 0.0,
            node: source,
        });
        while let Some(Entry { cost: c, node: u }) = heap.pop() {
            if done[u] || c > dist[u] {
                continue;
            }
            done[u] = true;
            for &l in &graph.out_links[u] {
                let Some(w) = cost(l) else { continue };
                let v = graph.link_to[l];
                if done[v] {
                    continue;
                }
                let cand = c + w;
                let better = match cand.total_cmp(&dist[v]) {
                    Ordering::Less => true,
                    Ordering::Equal => {
                        let mut a = links_to(&pred, graph, u);
                        a.push(l);
                        a < links_to(&pred, graph, v)
                    }
                    Ordering::Greater => false,
                };
                if better {
                    dist[v] = cand;
                    pred[v] = Some(l);
                    heap.push(Entry {
                        cost: cand,
                        node: v,
                    });
                }
            }
        }
        LeastCostTree {
            source,
            cost: dist,
            pred,
        }
    }

    pub fn reaches(&self, node: usize) -> bool {
        self.cost[node].is_finite()
    }

    /// Link indices from the source to `node`, or `None` if unreachable.
    pub fn links_to(&self, graph: &Graph, node: usize) -> Option<Vec<usize>> {
        self.reaches(node).then(|| links_to(&self.pred, graph, node))
    }
}

fn links_to(pred: &[Option<usize>], graph: &Graph, mut node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while let Some(l) = pred[node] {
        out.push(l);
        node = graph.link_from[l];
    }
    out.reverse();
    out
}

/// Least-cost path between two nodes. `Ok(None)` means unreachable.
pub fn least_cost_path(
    net: &Network,
    from: &str,
    to: &str,
    cost: impl Fn(&Link) -> f64,
) -> Result<Option<Path>, NetworkError> {
    let graph = Graph::new(net);
    let src = graph
        .node_idx(from)
        .ok_or_else(|| NetworkError::UnknownNode(from.to_string()))?;
    let dst = graph
        .node_idx(to)
        .ok_or_else(|| NetworkError::UnknownNode(to.to_string()))?;
    let tree = LeastCostTree::build(&graph, src, |l| Some(cost(graph.link(l))));
    Ok(tree.links_to(&graph, dst).map(|links| Path {
        travel_cost: tree.cost[dst],
        links: links.into_iter().map(|l| graph.links[l].id.clone()).collect(),
    }))
}
