use std::io::{Read, Write};

use super::{parse_modes, Link, Network, NetworkError};
use crate::xml::{self, Element, XmlError};

fn at(line: usize) -> impl Fn(NetworkError) -> NetworkError {
    move |e| NetworkError::AtLine {
        line,
        source: Box::new(e),
    }
}

fn link_from_element(el: &Element) -> Result<Link, NetworkError> {
    let from = el.req("from")?.to_string();
    let to = el.req("to")?.to_string();
    let is_loop = match el.attr("loop") {
        Some(v) => v == "true",
        None => false,
    };
    Ok(Link {
        id: el.req("id")?.to_string(),
        length: el.req_f64("length")?,
        freespeed: el.req_f64("freespeed")?,
        capacity: el.req_f64("capacity")?,
        lanes: el.opt_f64("permlanes")?.unwrap_or(1.0),
        modes: parse_modes(el.attr("modes").unwrap_or("car")),
        from,
        to,
        is_loop,
    })
}

/// Reads a network document (`<network><nodes/><links/></network>`).
pub fn read_network(mut source: impl Read) -> Result<Network, NetworkError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| XmlError::new(0, e.to_string()))?;
    let root = xml::parse(&text)?;
    if root.name != "network" {
        return Err(XmlError::new(root.line, format!("expected <network>, found <{}>", root.name)).into());
    }
    let mut net = Network::new();
    if let Some(nodes) = root.child("nodes") {
        for el in nodes.children_named("node") {
            net.add_node(el.req("id")?, el.req_f64("x")?, el.req_f64("y")?)
                .map_err(at(el.line))?;
        }
    }
    if let Some(links) = root.child("links") {
        for el in links.children_named("link") {
            let link = link_from_element(el)?;
            net.add_link(link).map_err(at(el.line))?;
        }
    }
    Ok(net)
}

fn num(v: f64) -> String {
    // Display for f64 is the shortest representation that round-trips.
    format!("{v}")
}

pub fn write_network(net: &Network, mut sink: impl Write) -> std::io::Result<()> {
    let mut out = String::from(xml::HEADER);
    xml::open_tag(&mut out, 0, "network", &[]);
    xml::open_tag(&mut out, 1, "nodes", &[]);
    for node in net.nodes.values() {
        xml::empty_tag(
            &mut out,
            2,
            "node",
            &[("id", node.id.clone()), ("x", num(node.x)), ("y", num(node.y))],
        );
    }
    xml::close_tag(&mut out, 1, "nodes");
    xml::open_tag(&mut out, 1, "links", &[]);
    for link in net.links.values() {
        let mut attrs = vec![
            ("id", link.id.clone()),
            ("from", link.from.clone()),
            ("to", link.to.clone()),
            ("length", num(link.length)),
            ("freespeed", num(link.freespeed)),
            ("capacity", num(link.capacity)),
            ("permlanes", num(link.lanes)),
            ("modes", link.modes.iter().cloned().collect::<Vec<_>>().join(",")),
        ];
        if link.is_loop {
            attrs.push(("loop", "true".to_string()));
        }
        xml::empty_tag(&mut out, 2, "link", &attrs);
    }
    xml::close_tag(&mut out, 1, "links");
    xml::close_tag(&mut out, 0, "network");
    sink.write_all(out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TWO_NODES: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<network>
  <nodes>
    <node id="1" x="0.0" y="0.0"/>
    <node id="2" x="100.0" y="0.0"/>
  </nodes>
  <links>
    <link id="a" from="1" to="2" length="100.0" freespeed="10.0" capacity="600" permlanes="1" modes="car,pt"/>
  </links>
</network>
"#;

    #[test]
    fn reads_two_node_document() {
        let net = read_network(TWO_NODES.as_bytes()).unwrap();
        assert_eq!(net.nodes.len(), 2);
        assert_eq!(net.links.len(), 1);
        let a = &net.links["a"];
        assert!(a.allows("car") && a.allows("pt"));
        assert_eq!(a.capacity, 600.0);
    }

    #[test]
    fn dangling_reference_is_reported_with_line() {
        let doc = TWO_NODES.replace("to=\"2\"", "to=\"Z\"");
        let err = read_network(doc.as_bytes()).unwrap_err();
        match err {
            NetworkError::AtLine { line, source } => {
                assert_eq!(line, 8);
                assert!(matches!(*source, NetworkError::DanglingEndpoint { ref node, .. } if node == "Z"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_attribute_rejected() {
        let doc = TWO_NODES.replace("freespeed=\"10.0\"", "freespeed=\"-1\"");
        assert!(read_network(doc.as_bytes()).is_err());
    }

    #[test]
    fn malformed_number_carries_line() {
        let doc = TWO_NODES.replace("length=\"100.0\"", "length=\"abc\"");
        let err = read_network(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 8"), "{err}");
    }

    #[test]
    fn empty_network_document() {
        let mut buf = Vec::new();
        write_network(&Network::new(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("<nodes>") && text.contains("<links>"));
        assert_eq!(read_network(text.as_bytes()).unwrap(), Network::new());
    }

    #[test]
    fn one_link_document_has_its_attributes() {
        let net = read_network(TWO_NODES.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().find(|l| l.contains("<link ")).unwrap();
        for needle in [
            "length=\"100\"",
            "freespeed=\"10\"",
            "capacity=\"600\"",
            "permlanes=\"1\"",
            "modes=\"car,pt\"",
        ] {
            assert!(line.contains(needle), "{line} lacks {needle}");
        }
    }

    #[test]
    fn round_trip_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let net = super::super::testutil::random_network(&mut rng, 12, 0.2, &["car", "pt", "car,pt"]);
            let mut buf = Vec::new();
            write_network(&net, &mut buf).unwrap();
            assert_eq!(read_network(buf.as_slice()).unwrap(), net);
        }
    }
}
