//! Node mixing proportions: initialisation of new nodes, one-step extension
//! when a component is born, and the top-down posterior redraw.

use alloc::vec::Vec;

use crate::hierarchy::{Hierarchy, NodeId, PathStep};
use crate::math::{ln, ln_gamma};
use crate::model::{created_nodes, MixingMode, State};
use crate::stochastic::{dp_child_weights, sample_beta, sample_dirichlet, Rng, StickWeights};
use crate::{Error, Result};

/// `β_node ~ DP(γ, β_parent)`.
pub fn init_node_weights(h: &mut Hierarchy, node: NodeId, gamma: f64, rng: &mut Rng) -> Result<()> {
    let parent = h.get(node)?.parent.ok_or(Error::Invariant("root weights come from GEM/Dirichlet".into()))?;
    let weights = dp_child_weights(&h.get(parent)?.mixing, gamma, rng)?;
    h.get_mut(node)?.mixing = weights;
    Ok(())
}

/// Initialise every node created by attaching `steps`, parents first.
pub fn init_new_nodes(
    h: &mut Hierarchy,
    path: &[NodeId],
    steps: &[PathStep],
    gamma: f64,
    rng: &mut Rng,
) -> Result<()> {
    for id in created_nodes(path, steps) {
        init_node_weights(h, id, gamma, rng)?;
    }
    Ok(())
}

/// One more stick-breaking step at every node for a newly created component.
pub fn extend_for_new_component(h: &mut Hierarchy, gamma0: f64, gamma: f64, rng: &mut Rng) -> Result<()> {
    let u = sample_beta(1.0, gamma0, rng)?;
    extend_with_root_fraction(h, u, gamma, rng)
}

/// As [`extend_for_new_component`] with the root's break fraction given.
pub fn extend_with_root_fraction(h: &mut Hierarchy, root_fraction: f64, gamma: f64, rng: &mut Rng) -> Result<()> {
    let k = h.num_components();
    for id in h.topdown_order() {
        let parent = h.get(id)?.parent;
        let u = match parent {
            None => root_fraction,
            Some(p) => {
                let pm = &h.get(p)?.mixing;
                let (a, b) = (gamma * pm.weight(k), gamma * pm.remainder());
                if a == 0.0 { 0.0 } else { sample_beta(a, b, rng)? }
            }
        };
        let node = h.get_mut(id)?;
        node.mixing.break_remainder(u);
        node.comp_counts.push(0);
    }
    h.set_num_components(k + 1);
    Ok(())
}

/// Remove components no observation uses. Their weight at every node is
/// folded into that node's remainder. Returns the old-to-new index map.
pub fn drop_empty_components(state: &mut State) -> Vec<Option<usize>> {
    let root_counts = state.tree.node(state.tree.root()).expect("root").comp_counts.clone();
    let mut remap = Vec::with_capacity(root_counts.len());
    let mut next = 0;
    for &c in &root_counts {
        if c > 0 {
            remap.push(Some(next));
            next += 1;
        } else {
            remap.push(None);
        }
    }
    if next == root_counts.len() {
        return remap;
    }
    for node in state.tree.nodes_mut() {
        for k in (0..root_counts.len()).rev() {
            if remap[k].is_none() {
                node.mixing.fold_into_remainder(k);
                node.comp_counts.remove(k);
            }
        }
    }
    for k in (0..root_counts.len()).rev() {
        if remap[k].is_none() {
            state.book.means.remove(k);
        }
    }
    state.tree.set_num_components(next);
    for a in &mut state.assignments {
        if let Some(c) = a.component {
            a.component = remap[c];
        }
    }
    remap
}

/// Redraw the root from its count posterior.
fn resample_root(state: &mut State, rng: &mut Rng) -> Result<()> {
    let root = state.tree.root();
    let counts = &state.tree.get(root)?.comp_counts;
    let mixing = match state.mode {
        MixingMode::Infinite => {
            let mut params: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            params.push(state.hp.gamma0);
            let mut draw = sample_dirichlet(&params, rng)?;
            let rem = draw.pop().expect("remainder coordinate");
            StickWeights::from_parts(draw, rem)
        }
        MixingMode::Finite(k) => {
            let prior = state.hp.gamma0 / k as f64;
            let params: Vec<f64> = counts.iter().map(|&c| c as f64 + prior).collect();
            StickWeights::from_parts(sample_dirichlet(&params, rng)?, 0.0)
        }
    };
    state.tree.get_mut(root)?.mixing = mixing;
    Ok(())
}

/// Redraw one non-root node from `Dir(N_k + γβ_parent,k, γβ*_parent)`.
pub fn resample_node(state: &mut State, id: NodeId, rng: &mut Rng) -> Result<()> {
    let gamma = state.hp.gamma;
    let node = state.tree.get(id)?;
    let parent = node.parent.ok_or(Error::Invariant("resample_node called on root".into()))?;
    let pm = &state.tree.get(parent)?.mixing;
    let mut params: Vec<f64> =
        node.comp_counts.iter().zip(pm.weights()).map(|(&c, &w)| c as f64 + gamma * w).collect();
    params.push(gamma * pm.remainder());
    let mut draw = sample_dirichlet(&params, rng)?;
    let rem = draw.pop().expect("remainder coordinate");
    state.tree.get_mut(id)?.mixing = StickWeights::from_parts(draw, rem);
    Ok(())
}

/// Full top-down redraw of every node's mixing weights. In infinite mode
/// unused components are dropped first.
pub fn resample_all_weights(state: &mut State, rng: &mut Rng) -> Result<()> {
    if state.mode == MixingMode::Infinite {
        drop_empty_components(state);
    }
    resample_root(state, rng)?;
    let order = state.tree.topdown_order();
    for id in order.into_iter().skip(1) {
        resample_node(state, id, rng)?;
    }
    Ok(())
}

/// Floor for `ln β` when a weight with positive prior parameter has
/// underflowed to zero.
const LN_WEIGHT_FLOOR: f64 = -745.0;

fn ln_weight(w: f64) -> f64 {
    if w > 0.0 { ln(w).max(LN_WEIGHT_FLOOR) } else { LN_WEIGHT_FLOOR }
}

/// `ln p(B | V, γ0, γ)` up to terms that do not involve `γ0` or `γ`.
///
/// The root uses the stick-breaking density, which for the sticks in
/// stored order reduces to `K ln γ0 + (γ0 - 1) ln β*` (finite mode: the
/// symmetric Dirichlet). Each child is `Dir(γβ_parent, γβ*_parent)` over the
/// coordinates whose parameter is positive.
pub fn weights_log_density(tree: &Hierarchy, mode: MixingMode, gamma0: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    let root = tree.node(tree.root()).expect("root");
    match mode {
        MixingMode::Infinite => {
            total += root.mixing.len() as f64 * ln(gamma0) + (gamma0 - 1.0) * ln_weight(root.mixing.remainder());
        }
        MixingMode::Finite(k) => {
            let a = gamma0 / k as f64;
            total += ln_gamma(gamma0) - k as f64 * ln_gamma(a);
            total += root.mixing.weights().iter().map(|&w| (a - 1.0) * ln_weight(w)).sum::<f64>();
        }
    }
    for node in tree.nodes() {
        let Some(p) = node.parent else { continue };
        let pm = &tree.node(p).expect("parent").mixing;
        let parent_coords = pm.weights().iter().copied().chain(core::iter::once(pm.remainder()));
        let child_coords = node.mixing.weights().iter().copied().chain(core::iter::once(node.mixing.remainder()));
        let mut mass = 0.0;
        for (pw, cw) in parent_coords.zip(child_coords) {
            if pw > 0.0 {
                let a = gamma * pw;
                mass += pw;
                total += (a - 1.0) * ln_weight(cw) - ln_gamma(a);
            }
        }
        total += ln_gamma(gamma * mass);
    }
    total
}
