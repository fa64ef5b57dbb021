use std::collections::{BTreeMap, BTreeSet};

use super::{Link, Network};

fn same_attributes(a: &Link, b: &Link) -> bool {
    a.freespeed == b.freespeed && a.capacity == b.capacity && a.lanes == b.lanes && a.modes == b.modes
}

/// Merges chains of pass-through nodes. See [`simplify_protecting`].
pub fn simplify(net: &Network) -> Network {
    simplify_protecting(net, &BTreeSet::new())
}

/// Merges maximal chains of pass-through nodes into single links.
///
/// A node is pass-through when it has exactly one incoming and one outgoing
/// link, both links carry identical speed, capacity, lanes and modes, the
/// merge would not create a self loop, and the node is not in `protected`
/// (nodes referenced by transit stops). Merged links are named by joining
/// the constituent ids with `-` in travel order.
pub fn simplify_protecting(net: &Network, protected: &BTreeSet<String>) -> Network {
    let mut links: BTreeMap<String, Link> = net.links.clone();
    let mut incoming: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut outgoing: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for link in links.values() {
        outgoing.entry(link.from.clone()).or_default().insert(link.id.clone());
        incoming.entry(link.to.clone()).or_default().insert(link.id.clone());
    }
    let mut removed_nodes = BTreeSet::new();
    for node in net.nodes.keys() {
        if protected.contains(node) {
            continue;
        }
        let (Some(ins), Some(outs)) = (incoming.get(node), outgoing.get(node)) else {
            continue;
        };
        if ins.len() != 1 || outs.len() != 1 {
            continue;
        }
        let in_id = ins.iter().next().unwrap().clone();
        let out_id = outs.iter().next().unwrap().clone();
        if in_id == out_id {
            continue;
        }
        let (a, b) = (&links[&in_id], &links[&out_id]);
        if !same_attributes(a, b) || a.from == b.to {
            continue;
        }
        let merged = Link {
            id: format!("{}-{}", a.id, b.id),
            from: a.from.clone(),
            to: b.to.clone(),
            length: a.length + b.length,
            freespeed: a.freespeed,
            capacity: a.capacity,
            lanes: a.lanes,
            modes: a.modes.clone(),
            is_loop: false,
        };
        let (start, end) = (merged.from.clone(), merged.to.clone());
        links.remove(&in_id);
        links.remove(&out_id);
        let out_set = outgoing.get_mut(&start).unwrap();
        out_set.remove(&in_id);
        out_set.insert(merged.id.clone());
        let in_set = incoming.get_mut(&end).unwrap();
        in_set.remove(&out_id);
        in_set.insert(merged.id.clone());
        incoming.remove(node);
        outgoing.remove(node);
        removed_nodes.insert(node.clone());
        links.insert(merged.id.clone(), merged);
    }
    let nodes = net
        .nodes
        .iter()
        .filter(|(id, _)| !removed_nodes.contains(*id))
        .map(|(id, n)| (id.clone(), n.clone()))
        .collect();
    Network { nodes, links }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::least_cost_path;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain() -> Network {
        let mut net = Network::new();
        net.add_node("A", 0.0, 0.0).unwrap();
        net.add_node("B", 100.0, 0.0).unwrap();
        net.add_node("C", 250.0, 0.0).unwrap();
        net.add_simple_link("ab", "A", "B", 100.0, 10.0, 600.0, 1.0, "car").unwrap();
        net.add_simple_link("bc", "B", "C", 150.0, 10.0, 600.0, 1.0, "car").unwrap();
        net
    }

    #[test]
    fn merges_simple_chain() {
        let s = simplify(&chain());
        assert_eq!(s.links.len(), 1);
        let l = &s.links["ab-bc"];
        assert_eq!((l.from.as_str(), l.to.as_str(), l.length), ("A", "C", 250.0));
        assert!(!s.nodes.contains_key("B"));
    }

    #[test]
    fn extra_inbound_link_blocks_merge() {
        let mut net = chain();
        net.add_node("D", 100.0, 100.0).unwrap();
        net.add_simple_link("db", "D", "B", 100.0, 10.0, 600.0, 1.0, "car").unwrap();
        let s = simplify(&net);
        assert_eq!(s, net);
    }

    #[test]
    fn protected_node_blocks_merge() {
        let net = chain();
        let s = simplify_protecting(&net, &BTreeSet::from(["B".to_string()]));
        assert_eq!(s, net);
    }

    #[test]
    fn differing_attributes_block_merge() {
        let mut net = chain();
        net.links.get_mut("bc").unwrap().freespeed = 20.0;
        assert_eq!(simplify(&net), net);
    }

    #[test]
    fn free_flow_times_between_kept_nodes_are_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            // a few random chains hanging between hub nodes
            let mut net = Network::new();
            for h in 0..4 {
                net.add_node(format!("h{h}"), h as f64 * 1000.0, 0.0).unwrap();
            }
            let mut k = 0;
            for c in 0..6 {
                let from = format!("h{}", rng.gen_range(0..4));
                let to = format!("h{}", rng.gen_range(0..4));
                let hops = rng.gen_range(1..6);
                let speed = [8.0, 13.9][rng.gen_range(0..2)];
                let mut prev = from.clone();
                for hop in 0..hops {
                    let next = if hop + 1 == hops {
                        to.clone()
                    } else {
                        let id = format!("c{c}_{hop}");
                        net.add_node(&id, rng.gen_range(0.0..1000.0), 5.0).unwrap();
                        id
                    };
                    if prev == next {
                        break;
                    }
                    net.add_simple_link(
                        &format!("l{k:02}"),
                        &prev,
                        &next,
                        rng.gen_range(10.0..400.0),
                        speed,
                        900.0,
                        1.0,
                        "car",
                    )
                    .unwrap();
                    k += 1;
                    prev = next;
                }
            }
            let simplified = simplify(&net);
            for a in simplified.nodes.keys() {
                for b in simplified.nodes.keys() {
                    let before = least_cost_path(&net, a, b, |l| l.freeflow_secs()).unwrap();
                    let after = least_cost_path(&simplified, a, b, |l| l.freeflow_secs()).unwrap();
                    match (before, after) {
                        (None, None) => {}
                        (Some(x), Some(y)) => {
                            let tol = 1e-9 * x.travel_cost.abs().max(1.0);
                            assert!((x.travel_cost - y.travel_cost).abs() <= tol, "{a}->{b}");
                        }
                        other => panic!("reachability changed {a}->{b}: {other:?}"),
                    }
                }
            }
        }
    }
}
