use std::collections::BTreeSet;

use super::{Graph, Network, NetworkError};

/// Strongly connected components of the subgraph formed by `usable` links.
/// Returns a component label per node (Kosaraju, iterative).
pub(crate) fn strongly_connected(graph: &Graph, usable: &[bool]) -> Vec<usize> {
    let n = graph.node_count();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((u, i)) = stack.last_mut() {
            let u = *u;
            let out = &graph.out_links[u];
            if *i < out.len() {
                let l = out[*i];
                *i += 1;
                let v = graph.link_to[l];
                if usable[l] && !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = next;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &l in &graph.in_links[u] {
                let v = graph.link_from[l];
                if usable[l] && comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Restricts `mode` to the largest strongly connected component of the
/// links permitting it. Links losing their last mode are dropped, as are
/// nodes left without any link. Equal-sized components resolve to the one
/// holding the smallest node id.
pub fn clean(net: &Network, mode: &str) -> Result<Network, NetworkError> {
    let graph = Graph::new(net);
    let usable: Vec<bool> = graph.links.iter().map(|l| l.allows(mode)).collect();
    if !usable.iter().any(|u| *u) {
        return Err(NetworkError::NoLinksForMode(mode.to_string()));
    }
    let comp = strongly_connected(&graph, &usable);
    // only nodes touched by a mode link compete
    let mut size = vec![0usize; graph.node_count()];
    let mut touched = vec![false; graph.node_count()];
    for (l, _) in usable.iter().enumerate().filter(|(_, u)| **u) {
        touched[graph.link_from[l]] = true;
        touched[graph.link_to[l]] = true;
    }
    for (node, &c) in comp.iter().enumerate() {
        if touched[node] {
            size[c] += 1;
        }
    }
    let mut best: Option<(usize, usize)> = None; // (size, comp)
    for (node, &c) in comp.iter().enumerate() {
        if !touched[node] {
            continue;
        }
        // nodes are visited in id order, so the first holder of a size wins
        if best.map_or(true, |(s, _)| size[c] > s) {
            best = Some((size[c], c));
        }
    }
    let keep = best.map(|(_, c)| c).expect("at least one mode link exists");

    let mut out = Network::new();
    let mut used_nodes = BTreeSet::new();
    let mut links = Vec::new();
    for (l, link) in graph.links.iter().enumerate() {
        let mut link = link.clone();
        if usable[l] && !(comp[graph.link_from[l]] == keep && comp[graph.link_to[l]] == keep) {
            link.modes.remove(mode);
        }
        if link.modes.is_empty() {
            continue;
        }
        used_nodes.insert(link.from.clone());
        used_nodes.insert(link.to.clone());
        links.push(link);
    }
    for id in &used_nodes {
        let n = &net.nodes[id];
        out.add_node(id.clone(), n.x, n.y)?;
    }
    for link in links {
        out.add_link(link)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring(net: &mut Network, prefix: &str, n: usize) {
        for i in 0..n {
            net.add_node(format!("{prefix}{i}"), i as f64, 0.0).unwrap();
        }
        for i in 0..n {
            let j = (i + 1) % n;
            net.add_simple_link(
                &format!("{prefix}l{i}"),
                &format!("{prefix}{i}"),
                &format!("{prefix}{j}"),
                10.0,
                10.0,
                600.0,
                1.0,
                "car",
            )
            .unwrap();
        }
    }

    #[test]
    fn strongly_connected_triangle_is_unchanged() {
        let mut net = Network::new();
        ring(&mut net, "t", 3);
        assert_eq!(clean(&net, "car").unwrap(), net);
    }

    #[test]
    fn keeps_only_largest_component() {
        let mut net = Network::new();
        ring(&mut net, "a", 5);
        ring(&mut net, "b", 3);
        let cleaned = clean(&net, "car").unwrap();
        assert_eq!(cleaned.links.len(), 5);
        assert!(cleaned.links.keys().all(|k| k.starts_with('a')));
        assert!(cleaned.nodes.keys().all(|k| k.starts_with('a')));
    }

    #[test]
    fn other_modes_are_untouched() {
        let mut net = Network::new();
        ring(&mut net, "a", 5);
        net.add_node("p", 50.0, 50.0).unwrap();
        net.add_simple_link("pt1", "a0", "p", 10.0, 10.0, 600.0, 1.0, "car,pt").unwrap();
        let cleaned = clean(&net, "car").unwrap();
        let l = &cleaned.links["pt1"];
        assert!(!l.allows("car") && l.allows("pt"));
    }

    #[test]
    fn missing_mode_is_an_error() {
        let mut net = Network::new();
        ring(&mut net, "a", 3);
        let err = clean(&net, "drt").unwrap_err();
        assert!(err.to_string().contains("drt"));
    }

    /// O(n^2) reachability: two nodes share a component iff each reaches the other.
    fn brute_force_largest(net: &Network, mode: &str) -> BTreeSet<String> {
        let ids: Vec<&String> = net.nodes.keys().collect();
        let reach = |from: &String| -> BTreeSet<String> {
            let mut seen = BTreeSet::from([from.clone()]);
            let mut stack = vec![from.clone()];
            while let Some(u) = stack.pop() {
                for l in net.links.values().filter(|l| l.from == u && l.allows(mode)) {
                    if seen.insert(l.to.clone()) {
                        stack.push(l.to.clone());
                    }
                }
            }
            seen
        };
        let touched: BTreeSet<&String> = net
            .links
            .values()
            .filter(|l| l.allows(mode))
            .flat_map(|l| [&l.from, &l.to])
            .collect();
        let reach_all: Vec<BTreeSet<String>> = ids.iter().map(|i| reach(i)).collect();
        let mut best: BTreeSet<String> = BTreeSet::new();
        for (i, a) in ids.iter().enumerate() {
            if !touched.contains(a) {
                continue;
            }
            let comp: BTreeSet<String> = ids
                .iter()
                .enumerate()
                .filter(|(j, b)| reach_all[i].contains(**b) && reach_all[*j].contains(*a))
                .map(|(_, b)| (*b).clone())
                .collect();
            if comp.len() > best.len() {
                best = comp;
            }
        }
        best
    }

    #[test]
    fn matches_pairwise_reachability_on_random_digraphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..80 {
            let net = crate::network::testutil::random_network(&mut rng, 20, 0.08, &["car", "car,pt"]);
            if !net.links.values().any(|l| l.allows("car")) {
                continue;
            }
            let want = brute_force_largest(&net, "car");
            let cleaned = clean(&net, "car").unwrap();
            let got: BTreeSet<String> = cleaned
                .links
                .values()
                .filter(|l| l.allows("car"))
                .flat_map(|l| [l.from.clone(), l.to.clone()])
                .collect();
            if want.len() > 1 {
                assert_eq!(got, want);
            } else {
                assert!(got.is_empty());
            }
            // every retained car link reaches every other
            assert_eq!(clean(&cleaned, "car").map(|c| c == cleaned).unwrap_or(true), true);
        }
    }
}
