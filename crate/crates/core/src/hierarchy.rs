//! The mutable tree with per-node traversal and component counts.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{ln, ln_gamma};
use crate::stochastic::StickWeights;
use crate::{Error, Result};

/// Node identifier. Assigned monotonically and never reused within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    /// Children in creation order.
    pub children: Vec<NodeId>,
    pub depth: usize,
    /// Observations whose path passes through this node.
    pub n_thru: usize,
    /// Per-component counts of the observations in this subtree.
    pub comp_counts: Vec<usize>,
    pub mixing: StickWeights,
}

/// One level of a path: descend into an existing child or open a new one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathStep {
    Existing(NodeId),
    New,
}

/// Nodes removed by a detach, deepest first, with their slot in the parent's
/// child list. Feeding this back to [`Hierarchy::restore_path`] undoes the
/// detach exactly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pruned {
    nodes: Vec<(Node, usize)>,
}

impl Pruned {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().map(|(n, _)| n).find(|n| n.id == id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    nodes: BTreeMap<NodeId, Node>,
    root: NodeId,
    levels: usize,
    num_components: usize,
    next_id: u64,
}

impl Hierarchy {
    /// Root-only tree with `levels` levels below the root.
    pub fn new(levels: usize, root_mixing: StickWeights) -> Self {
        let root = NodeId(0);
        let k = root_mixing.len();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            Node {
                id: root,
                parent: None,
                children: Vec::new(),
                depth: 0,
                n_thru: 0,
                comp_counts: alloc::vec![0; k],
                mixing: root_mixing,
            },
        );
        Hierarchy { nodes, root, levels, num_components: k, next_id: 1 }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    #[allow(dead_code)]
    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(&id)
    }

    pub(crate) fn get(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(&id).ok_or(Error::DanglingNode(id))
    }

    pub(crate) fn get_mut(&mut self, id: NodeId) -> Result<&mut Node> {
        self.nodes.get_mut(&id).ok_or(Error::DanglingNode(id))
    }

    /// All nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub(crate) fn nodes_mut(&mut self) -> impl Iterator<Item = &mut Node> {
        self.nodes.values_mut()
    }

    pub(crate) fn set_num_components(&mut self, k: usize) {
        self.num_components = k;
    }

    /// The id the next created node will receive.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.next_id)
    }

    /// Descend from the root following `steps`, creating nodes for `New`
    /// steps, and increment `n_thru` along the way. New nodes get a copy of
    /// their parent's mixing weights as a placeholder.
    pub fn attach_path(&mut self, steps: &[PathStep]) -> Result<Vec<NodeId>> {
        if steps.len() != self.levels {
            return Err(Error::PathLength { expected: self.levels, got: steps.len() });
        }
        // Validate before mutating so an error leaves the tree untouched.
        let mut cursor = Some(self.root);
        for step in steps {
            match (*step, cursor) {
                (PathStep::Existing(child), Some(parent)) => {
                    let c = self.get(child)?;
                    if c.parent != Some(parent) {
                        return Err(Error::NotAChild { parent, child });
                    }
                    cursor = Some(child);
                }
                (PathStep::Existing(child), None) => return Err(Error::DanglingNode(child)),
                (PathStep::New, _) => cursor = None,
            }
        }

        let mut path = Vec::with_capacity(self.levels + 1);
        let mut current = self.root;
        self.get_mut(current)?.n_thru += 1;
        path.push(current);
        for step in steps {
            current = match *step {
                PathStep::Existing(child) => child,
                PathStep::New => self.create_child(current)?,
            };
            self.get_mut(current)?.n_thru += 1;
            path.push(current);
        }
        Ok(path)
    }

    fn create_child(&mut self, parent: NodeId) -> Result<NodeId> {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        let p = self.get_mut(parent)?;
        p.children.push(id);
        let node = Node {
            id,
            parent: Some(parent),
            children: Vec::new(),
            depth: p.depth + 1,
            n_thru: 0,
            comp_counts: alloc::vec![0; p.comp_counts.len()],
            mixing: p.mixing.clone(),
        };
        self.nodes.insert(id, node);
        Ok(id)
    }

    /// Remove one observation from `path`, decrementing `n_thru` (and the
    /// count of `component` when given) and pruning emptied nodes.
    pub fn detach_path(&mut self, path: &[NodeId], component: Option<usize>) -> Result<Pruned> {
        self.check_path_shape(path)?;
        for &id in path {
            let node = self.get(id)?;
            if node.n_thru == 0 {
                return Err(Error::CountUnderflow { node: id });
            }
            if let Some(k) = component {
                match node.comp_counts.get(k) {
                    None => return Err(Error::ComponentOutOfRange { index: k, count: node.comp_counts.len() }),
                    Some(0) => return Err(Error::CountUnderflow { node: id }),
                    Some(_) => {}
                }
            }
        }
        for &id in path {
            let node = self.get_mut(id)?;
            node.n_thru -= 1;
            if let Some(k) = component {
                node.comp_counts[k] -= 1;
            }
        }
        let mut pruned = Pruned::default();
        for &id in path.iter().skip(1).rev() {
            if self.get(id)?.n_thru > 0 {
                break;
            }
            let node = self.nodes.remove(&id).ok_or(Error::DanglingNode(id))?;
            let parent = node.parent.ok_or(Error::DanglingNode(id))?;
            let siblings = &mut self.get_mut(parent)?.children;
            let slot = siblings
                .iter()
                .position(|&c| c == id)
                .ok_or(Error::NotAChild { parent, child: id })?;
            siblings.remove(slot);
            pruned.nodes.push((node, slot));
        }
        Ok(pruned)
    }

    /// Undo [`Hierarchy::detach_path`]: reinstate pruned nodes in their
    /// original child slots and re-add the observation's counts.
    pub fn restore_path(&mut self, path: &[NodeId], component: Option<usize>, pruned: Pruned) -> Result<()> {
        for (node, slot) in pruned.nodes.into_iter().rev() {
            let parent = node.parent.ok_or(Error::DanglingNode(node.id))?;
            let siblings = &mut self.get_mut(parent)?.children;
            if slot > siblings.len() {
                return Err(Error::Invariant(format!("restore slot {slot} out of range")));
            }
            siblings.insert(slot, node.id);
            self.nodes.insert(node.id, node);
        }
        for &id in path {
            let node = self.get_mut(id)?;
            node.n_thru += 1;
            if let Some(k) = component {
                node.comp_counts[k] += 1;
            }
        }
        Ok(())
    }

    /// Add one observation of component `k` along an attached path.
    pub fn add_component_count(&mut self, path: &[NodeId], k: usize) -> Result<()> {
        if k >= self.num_components {
            return Err(Error::ComponentOutOfRange { index: k, count: self.num_components });
        }
        for &id in path {
            self.get_mut(id)?.comp_counts[k] += 1;
        }
        Ok(())
    }

    /// Remove one observation of component `k` along an attached path.
    pub fn remove_component_count(&mut self, path: &[NodeId], k: usize) -> Result<()> {
        for &id in path {
            let node = self.get_mut(id)?;
            match node.comp_counts.get_mut(k) {
                Some(c) if *c > 0 => *c -= 1,
                Some(_) => return Err(Error::CountUnderflow { node: id }),
                None => return Err(Error::ComponentOutOfRange { index: k, count: self.num_components }),
            }
        }
        Ok(())
    }

    fn check_path_shape(&self, path: &[NodeId]) -> Result<()> {
        if path.len() != self.levels + 1 {
            return Err(Error::PathLength { expected: self.levels + 1, got: path.len() });
        }
        if path[0] != self.root {
            return Err(Error::NotAChild { parent: self.root, child: path[0] });
        }
        for w in path.windows(2) {
            let child = self.get(w[1])?;
            if child.parent != Some(w[0]) {
                return Err(Error::NotAChild { parent: w[0], child: w[1] });
            }
        }
        Ok(())
    }

    /// `ln p(V | α)`: product over internal nodes of the CRP partition
    /// probability of their children.
    pub fn tree_log_prior(&self, alpha: f64) -> f64 {
        let ln_gamma_alpha = ln_gamma(alpha);
        let ln_alpha = ln(alpha);
        let mut total = 0.0;
        for node in self.nodes.values() {
            if node.children.is_empty() {
                continue;
            }
            total += ln_gamma_alpha + node.children.len() as f64 * ln_alpha
                - ln_gamma(node.n_thru as f64 + alpha);
            for &c in &node.children {
                total += ln_gamma(self.nodes[&c].n_thru as f64);
            }
        }
        total
    }

    /// Breadth-first order from the root; parents precede children.
    pub fn topdown_order(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = VecDeque::new();
        queue.push_back(self.root);
        while let Some(id) = queue.pop_front() {
            order.push(id);
            queue.extend(self.nodes[&id].children.iter().copied());
        }
        order
    }

    /// Leaves at depth `levels`.
    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        let levels = self.levels;
        self.nodes.values().filter(move |n| n.depth == levels)
    }

    /// Check the tree against a full recount from `(path, component)` pairs,
    /// plus link consistency, pruning and mixing-length invariants.
    pub fn verify<'a>(&self, assignments: impl IntoIterator<Item = (&'a [NodeId], Option<usize>)>) -> Result<()> {
        let k = self.num_components;
        let mut thru: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut comps: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for (path, comp) in assignments {
            self.check_path_shape(path)?;
            for &id in path {
                *thru.entry(id).or_default() += 1;
                let counts = comps.entry(id).or_insert_with(|| alloc::vec![0; k]);
                if let Some(c) = comp {
                    if c >= k {
                        return Err(Error::ComponentOutOfRange { index: c, count: k });
                    }
                    counts[c] += 1;
                }
            }
        }
        for node in self.nodes.values() {
            let expect = thru.get(&node.id).copied().unwrap_or(0);
            if node.n_thru != expect {
                return Err(Error::Invariant(format!(
                    "{} has n_thru {} but recount gives {}",
                    node.id, node.n_thru, expect
                )));
            }
            if node.id != self.root && node.n_thru == 0 {
                return Err(Error::Invariant(format!("{} is empty but not pruned", node.id)));
            }
            let zero = alloc::vec![0; k];
            let expect_comps = comps.get(&node.id).unwrap_or(&zero);
            if &node.comp_counts != expect_comps {
                return Err(Error::Invariant(format!("{} component counts disagree with recount", node.id)));
            }
            if node.mixing.len() != k {
                return Err(Error::Invariant(format!("{} has {} weights, K = {}", node.id, node.mixing.len(), k)));
            }
            for &c in &node.children {
                let child = self.get(c)?;
                if child.parent != Some(node.id) || child.depth != node.depth + 1 {
                    return Err(Error::Invariant(format!("bad link {} -> {}", node.id, c)));
                }
            }
            if node.depth < self.levels && node.n_thru > 0 {
                let sum: usize = node.children.iter().map(|c| self.nodes[c].n_thru).sum();
                if sum != node.n_thru {
                    return Err(Error::Invariant(format!("{} children carry {} of {}", node.id, sum, node.n_thru)));
                }
            }
        }
        if self.topdown_order().len() != self.nodes.len() {
            return Err(Error::Invariant("unreachable nodes present".into()));
        }
        Ok(())
    }
}
