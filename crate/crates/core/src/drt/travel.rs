use std::collections::HashMap;

use super::TravelTime;
use crate::mobsim::freeflow_time;
use crate::network::{Graph, LeastCostTree, CAR};
use crate::time::Time;

/// Free-flow link-to-link times on car links, with one cached shortest-path
/// tree per source node.
///
/// A time from link `a` to link `b` runs from the downstream end of `a` to
/// the downstream end of `b`, so it includes the full traversal of `b`.
pub struct NetworkTravelTimes<'g> {
    graph: &'g Graph,
    link_secs: Vec<Option<Time>>,
    trees: HashMap<usize, LeastCostTree>,
}

impl<'g> NetworkTravelTimes<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let link_secs = graph
            .links
            .iter()
            .map(|l| l.allows(CAR).then(|| freeflow_time(l)))
            .collect();
        NetworkTravelTimes {
            graph,
            link_secs,
            trees: HashMap::new(),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    fn tree(&mut self, node: usize) -> &LeastCostTree {
        let (graph, secs) = (self.graph, &self.link_secs);
        self.trees
            .entry(node)
            .or_insert_with(|| LeastCostTree::build(graph, node, |l| secs[l].map(f64::from)))
    }

    /// Full link sequence starting with `from` and ending with `to`.
    pub fn route(&mut self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from == to {
            return Some(vec![from]);
        }
        self.link_secs[to]?;
        let (start, end) = (self.graph.link_to[from], self.graph.link_from[to]);
        let graph = self.graph;
        let mut links = vec![from];
        links.extend(self.tree(start).links_to(graph, end)?);
        links.push(to);
        Some(links)
    }
}

impl TravelTime for NetworkTravelTimes<'_> {
    fn time(&mut self, from: usize, to: usize) -> Option<Time> {
        if from == to {
            return Some(0);
        }
        let last = self.link_secs[to]?;
        let end = self.graph.link_from[to];
        let tree = self.tree(self.graph.link_to[from]);
        tree.reaches(end).then(|| tree.cost[end] as Time + last)
    }
}
