use std::collections::HashMap;

use super::{Link, Network, Node};

/// Dense, index-addressed snapshot of a [`Network`].
///
/// Links and nodes are indexed in id order, so comparing index sequences is
/// the same as comparing id sequences lexicographically.
#[derive(Debug, Clone)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub link_from: Vec<usize>,
    pub link_to: Vec<usize>,
    pub out_links: Vec<Vec<usize>>,
    pub in_links: Vec<Vec<usize>>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
}

impl Graph {
    pub fn new(net: &Network) -> Self {
        let nodes: Vec<Node> = net.nodes.values().cloned().collect();
        let node_index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let links: Vec<Link> = net.links.values().cloned().collect();
        let link_index = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        let link_from: Vec<usize> = links.iter().map(|l| node_index[&l.from]).collect();
        let link_to: Vec<usize> = links.iter().map(|l| node_index[&l.to]).collect();
        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        for (i, (&f, &t)) in link_from.iter().zip(&link_to).enumerate() {
            out_links[f].push(i);
            in_links[t].push(i);
        }
        Graph {
            nodes,
            links,
            link_from,
            link_to,
            out_links,
            in_links,
            node_index,
            link_index,
        }
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn link(&self, idx: usize) -> &Link {
        &self.links[idx]
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}
