//! Path sampling and proposal densities under the nested CRP.

use alloc::vec::Vec;

use crate::hierarchy::{Hierarchy, NodeId, PathStep};
use crate::math::ln;
use crate::stochastic::{sample_categorical, Rng};
use crate::{Error, Result};

/// A sampled sequence of decisions and its log probability under the nCRP
/// on the tree it was sampled from.
#[derive(Clone, Debug, PartialEq)]
pub struct PathProposal {
    pub steps: Vec<PathStep>,
    pub log_q: f64,
}

/// CRP predictive over existing children (by count) followed by a new child.
pub fn crp_predictive(child_counts: &[usize], alpha: f64) -> Vec<f64> {
    let n: usize = child_counts.iter().sum();
    let denom = n as f64 + alpha;
    let mut probs: Vec<f64> = child_counts.iter().map(|&c| c as f64 / denom).collect();
    probs.push(alpha / denom);
    probs
}

/// Log probability of one decision at a node with the given child counts.
/// Both sampling and density evaluation go through here so they agree to
/// the last bit.
fn step_log_prob(count: Option<usize>, total: usize, alpha: f64) -> f64 {
    let denom = total as f64 + alpha;
    match count {
        Some(c) => ln(c as f64 / denom),
        None => ln(alpha / denom),
    }
}

fn child_counts(h: &Hierarchy, id: NodeId) -> Result<(Vec<NodeId>, Vec<usize>)> {
    let node = h.node(id).ok_or(Error::DanglingNode(id))?;
    let counts = node
        .children
        .iter()
        .map(|c| h.node(*c).map(|n| n.n_thru).ok_or(Error::DanglingNode(*c)))
        .collect::<Result<Vec<_>>>()?;
    Ok((node.children.clone(), counts))
}

/// Draw `levels` sequential CRP decisions from the root. The tree is not
/// modified; attach the returned steps to realise the path.
pub fn sample_path(h: &Hierarchy, alpha: f64, rng: &mut Rng) -> Result<PathProposal> {
    let mut steps = Vec::with_capacity(h.levels());
    let mut log_q = 0.0;
    let mut cursor = Some(h.root());
    for _ in 0..h.levels() {
        let Some(id) = cursor else {
            // Below a new node every restaurant is empty.
            steps.push(PathStep::New);
            log_q += step_log_prob(None, 0, alpha);
            continue;
        };
        let (children, counts) = child_counts(h, id)?;
        let total: usize = counts.iter().sum();
        let probs = crp_predictive(&counts, alpha);
        let pick = sample_categorical(&probs, rng)?;
        if pick < children.len() {
            log_q += step_log_prob(Some(counts[pick]), total, alpha);
            steps.push(PathStep::Existing(children[pick]));
            cursor = Some(children[pick]);
        } else {
            log_q += step_log_prob(None, total, alpha);
            steps.push(PathStep::New);
            cursor = None;
        }
    }
    Ok(PathProposal { steps, log_q })
}

/// Log nCRP probability of a decision sequence against the current counts.
pub fn steps_log_density(h: &Hierarchy, steps: &[PathStep], alpha: f64) -> Result<f64> {
    if steps.len() != h.levels() {
        return Err(Error::PathLength { expected: h.levels(), got: steps.len() });
    }
    let mut log_p = 0.0;
    let mut cursor = Some(h.root());
    for step in steps {
        let Some(id) = cursor else {
            match step {
                PathStep::New => log_p += step_log_prob(None, 0, alpha),
                PathStep::Existing(child) => return Err(Error::DanglingNode(*child)),
            }
            continue;
        };
        let (children, counts) = child_counts(h, id)?;
        let total: usize = counts.iter().sum();
        match *step {
            PathStep::Existing(child) => {
                let slot = children
                    .iter()
                    .position(|&c| c == child)
                    .ok_or(Error::NotAChild { parent: id, child })?;
                log_p += step_log_prob(Some(counts[slot]), total, alpha);
                cursor = Some(child);
            }
            PathStep::New => {
                log_p += step_log_prob(None, total, alpha);
                cursor = None;
            }
        }
    }
    Ok(log_p)
}

/// Translate a node-id path into decisions against `h`: ids no longer in
/// the tree become `New` (the single new-child branch at that position).
pub fn path_to_steps(h: &Hierarchy, path: &[NodeId]) -> Result<Vec<PathStep>> {
    let Some((&first, rest)) = path.split_first() else {
        return Err(Error::EmptyPath);
    };
    if first != h.root() {
        return Err(Error::NotAChild { parent: h.root(), child: first });
    }
    let mut steps = Vec::with_capacity(rest.len());
    let mut prev = first;
    let mut below_new = false;
    for &id in rest {
        match h.node(id) {
            Some(node) if !below_new => {
                if node.parent != Some(prev) {
                    return Err(Error::NotAChild { parent: prev, child: id });
                }
                steps.push(PathStep::Existing(id));
            }
            Some(_) => return Err(Error::NotAChild { parent: prev, child: id }),
            None => {
                below_new = true;
                steps.push(PathStep::New);
            }
        }
        prev = id;
    }
    Ok(steps)
}

/// Log nCRP probability of a node-id path; absent nodes count as new.
pub fn path_log_density(h: &Hierarchy, path: &[NodeId], alpha: f64) -> Result<f64> {
    let steps = path_to_steps(h, path)?;
    steps_log_density(h, &steps, alpha)
}
