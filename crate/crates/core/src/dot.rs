//! Graphviz output for relation stages.

use std::fmt::Write;

use crate::relation::AgentRelation;
use crate::universe::Universe;

const COLORS: [&str; 6] = ["firebrick", "royalblue", "forestgreen", "darkorange", "purple", "gray40"];

/// One undirected graph per stage. Only consistent bases that take part in
/// some non-loop edge are drawn; loops are omitted.
pub fn stage_to_dot(u: &Universe, rels: &[AgentRelation], title: &str) -> String {
    let mut out = String::new();
    let id = sanitize(title);
    writeln!(out, "graph {id} {{").unwrap();
    writeln!(out, "  label=\"{}\";", title.replace('"', "'")).unwrap();
    writeln!(out, "  node [shape=box, fontsize=10];").unwrap();
    let mut nodes = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for (a, rel) in rels.iter().enumerate() {
        for (x, y) in rel.pairs().filter(|(x, y)| x < y) {
            if u.is_consistent(x) && u.is_consistent(y) {
                nodes.insert(x);
                nodes.insert(y);
                edges.push((a, x, y));
            }
        }
    }
    for b in &nodes {
        writeln!(out, "  n{} [label=\"{}\"];", b.0, u.base_name(*b).replace('"', "'")).unwrap();
    }
    for (a, x, y) in edges {
        writeln!(out, "  n{} -- n{} [label=\"{}\", color={}];", x.0, y.0, u.agents()[a], COLORS[a % COLORS.len()]).unwrap();
    }
    out.push_str("}\n");
    out
}

fn sanitize(s: &str) -> String {
    let body: String = s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("g_{body}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::AgentRelation;
    use crate::universe::{builders, Base};

    #[test]
    fn draws_edges_between_consistent_bases() {
        let u = builders::classical(&["p"], &["a"]).build().unwrap();
        let mut r = AgentRelation::empty(u.num_bases());
        r.link(Base(0), Base(1));
        let dot = stage_to_dot(&u, &[r], "t-1");
        assert!(dot.starts_with("graph g_t_1 {"));
        assert!(dot.contains("n0 -- n1"));
    }
}
