//! Graphviz rendering of a tree export.

use std::fmt::Write;

use crate::export::TreeExport;

/// DOT digraph with one node per tree node. Labels carry the id, the
/// pass-through count and up to three heaviest components; edges carry the
/// child's pass-through count.
pub fn to_dot(tree: &TreeExport) -> String {
    let mut out = String::from("digraph hierarchy {\n  node [shape=box];\n");
    for node in &tree.nodes {
        let comps: Vec<String> = node
            .top_components
            .iter()
            .take(3)
            .map(|c| format!("k{}:{:.3}", c.component, c.weight))
            .collect();
        let _ = writeln!(
            out,
            "  z{} [label=\"z{}\\nn={}\\n{}\"];",
            node.id,
            node.id,
            node.n_thru,
            comps.join(" ")
        );
    }
    for node in &tree.nodes {
        if let Some(parent) = node.parent {
            let _ = writeln!(out, "  z{} -> z{} [label=\"{}\"];", parent, node.id, node.n_thru);
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::TreeExport;
    use bhmc_core::model::generate;
    use bhmc_core::{Hyperparams, MixingMode, Rng};

    #[derive(Debug, Default)]
    struct Graph {
        nodes: Vec<(String, String)>,
        edges: Vec<(String, String, String)>,
    }

    /// Accepts the subset of DOT emitted above: `digraph ID { stmt* }` with
    /// node, edge and `node [...]` default statements.
    fn parse(text: &str) -> Result<Graph, String> {
        let body = text
            .trim()
            .strip_prefix("digraph")
            .ok_or("missing digraph")?
            .trim_start();
        let open = body.find('{').ok_or("missing {")?;
        let name = body[..open].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(format!("bad graph id {name:?}"));
        }
        let inner = body[open + 1..].strip_suffix('}').ok_or("missing }")?;
        let mut g = Graph::default();
        for stmt in inner.split(";\n").map(str::trim).filter(|s| !s.is_empty()) {
            let stmt = stmt.trim_end_matches(';');
            let (head, attrs) = match stmt.find('[') {
                Some(i) => (stmt[..i].trim(), stmt[i..].trim()),
                None => (stmt, ""),
            };
            if !attrs.is_empty() && !(attrs.starts_with('[') && attrs.ends_with(']')) {
                return Err(format!("bad attribute list in {stmt:?}"));
            }
            let label = attrs
                .split_once("label=\"")
                .map(|(_, rest)| rest.trim_end_matches("\"]").to_owned())
                .unwrap_or_default();
            if label.contains('"') {
                return Err(format!("unescaped quote in {stmt:?}"));
            }
            if head == "node" {
                continue;
            }
            if let Some((a, b)) = head.split_once("->") {
                g.edges.push((a.trim().into(), b.trim().into(), label));
            } else {
                g.nodes.push((head.into(), label));
            }
        }
        Ok(g)
    }

    fn export(n: usize, levels: usize) -> TreeExport {
        let mut hp = Hyperparams::animals_profile(2);
        hp.levels = levels;
        let g = generate(n, &hp, MixingMode::Infinite, &mut Rng::new(8)).unwrap();
        TreeExport::from_state(&g.state, 5, 0.0).unwrap()
    }

    #[test]
    fn parses_and_counts_nodes() {
        let e = export(40, 3);
        let g = parse(&to_dot(&e)).unwrap();
        assert_eq!(g.nodes.len(), e.nodes.len());
        assert_eq!(g.edges.len(), e.nodes.len() - 1);
        for (id, label) in &g.nodes {
            assert!(label.starts_with(id.as_str()));
            assert!(label.contains("\\nn="));
            assert!(label.matches(':').count() <= 3);
        }
        for (a, b, _) in &g.edges {
            assert!(g.nodes.iter().any(|n| &n.0 == a));
            assert!(g.nodes.iter().any(|n| &n.0 == b));
        }
    }

    #[test]
    fn root_only_tree() {
        let mut e = export(1, 1);
        e.nodes.retain(|n| n.parent.is_none());
        let g = parse(&to_dot(&e)).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }
}
