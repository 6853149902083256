//! Graphviz export of a region of the tree labelled by multiplicities.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::cycles::{cycle_decomposition, horizontal_part, Anchor};
use crate::lattice::{LatticeVertex, SpecialEndomorphism};

fn node_id(v: &LatticeVertex) -> String {
    format!("\"{v}\"")
}

/// Undirected DOT graph of `region`: each vertex carries `mult(j, v)`,
/// vertices with positive multiplicity are filled, and the anchor of the
/// horizontal part is drawn in bold.
pub fn tube_dot(j: &SpecialEndomorphism, region: &[LatticeVertex]) -> String {
    let dec = cycle_decomposition(j, region);
    let anchor: HashSet<LatticeVertex> = match horizontal_part(j).anchor {
        Some(Anchor::Vertex(v)) => [v].into_iter().collect(),
        Some(Anchor::Edge(v, w)) => [v, w].into_iter().collect(),
        None => HashSet::new(),
    };
    let inside: HashSet<&LatticeVertex> = region.iter().collect();
    let mut s = String::from("graph tube {\n  node [shape=circle, fontsize=10];\n");
    for v in region {
        let k = dec.vertical.get(v).copied().unwrap_or(0);
        let mut attrs = vec![format!("label=\"{v}\\nmult {k}\"")];
        if k > 0 {
            attrs.push("style=filled".into());
            attrs.push(format!("fillcolor=\"/blues9/{}\"", (k + 1).min(9)));
        }
        if anchor.contains(v) {
            attrs.push("penwidth=3".into());
        }
        let _ = writeln!(s, "  {} [{}];", node_id(v), attrs.join(", "));
    }
    let mut seen = HashSet::new();
    for v in region {
        for w in v.neighbors() {
            if inside.contains(&w) && !seen.contains(&w) {
                let _ = writeln!(s, "  {} -- {};", node_id(v), node_id(&w));
            }
        }
        seen.insert(v.clone());
    }
    s.push_str("}\n");
    s
}
