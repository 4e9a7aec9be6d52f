//! Model quantities: hyperparameters, the component book, per-observation
//! assignments, densities and the generative process.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hdp;
use crate::hierarchy::{Hierarchy, NodeId, PathStep};
use crate::math::{ln, ln_normal_diag, log_sum_exp};
use crate::ncrp::sample_path;
use crate::stochastic::{
    gem_stick_breaking, sample_dirichlet, sample_gaussian_diag, sample_log_categorical, Rng,
    StickWeights,
};
use crate::{Error, Result};

/// Model constants. `Σ = sigma2·I` is the component covariance and
/// `H = N(mu0, diag(sigma0_diag))` the base measure over component means.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub mu0: Vec<f64>,
    pub sigma0_diag: Vec<f64>,
    pub levels: usize,
    pub epsilon: f64,
}

impl Hyperparams {
    /// α = 0.4, γ0 = 1, γ = 0.5, σ² = 1, L = 4, standard-normal base measure.
    pub fn animals_profile(dim: usize) -> Self {
        Hyperparams {
            alpha: 0.4,
            gamma0: 1.0,
            gamma: 0.5,
            sigma2: 1.0,
            mu0: vec![0.0; dim],
            sigma0_diag: vec![1.0; dim],
            levels: 4,
            epsilon: 1e-3,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma0", self.gamma0),
            ("gamma", self.gamma),
            ("sigma2", self.sigma2),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter { name: "epsilon", value: self.epsilon });
        }
        if self.levels == 0 {
            return Err(Error::InvalidParameter { name: "levels", value: 0.0 });
        }
        if self.sigma0_diag.len() != self.mu0.len() {
            return Err(Error::DimensionMismatch { expected: self.mu0.len(), got: self.sigma0_diag.len() });
        }
        for &m in &self.mu0 {
            if !m.is_finite() {
                return Err(Error::InvalidParameter { name: "mu0", value: m });
            }
        }
        for &v in &self.sigma0_diag {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name: "sigma0_diag", value: v });
            }
        }
        Ok(())
    }
}

/// Infinite (GEM root, DP children, component births) or finite-`K`
/// (symmetric Dirichlet root, Dirichlet children, no remainder).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MixingMode {
    Infinite,
    Finite(usize),
}

/// Row-major `N × D` matrix of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or(Error::EmptyData)?;
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Dataset { rows: rows.len(), dim, values })
    }

    pub fn from_flat(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptyData);
        }
        if values.len() != rows * dim {
            return Err(Error::DimensionMismatch { expected: rows * dim, got: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / dim.max(1), col: pos % dim.max(1) });
        }
        Ok(Dataset { rows, dim, values })
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim.max(1))
    }
}

/// Means of the global components `θ_1..θ_K`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComponentBook {
    pub means: Vec<Vec<f64>>,
}

impl ComponentBook {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k]
    }
}

/// Path (root to leaf) and component label of one observation. The
/// component is `None` only between cleanup and the Gibbs step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathAssignment {
    pub path: Vec<NodeId>,
    pub component: Option<usize>,
}

impl PathAssignment {
    pub fn leaf(&self) -> Option<NodeId> {
        self.path.last().copied()
    }
}

/// Everything one chain mutates.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub data: Arc<Dataset>,
    pub hp: Hyperparams,
    pub mode: MixingMode,
    pub tree: Hierarchy,
    pub book: ComponentBook,
    pub assignments: Vec<PathAssignment>,
}

impl State {
    pub fn num_components(&self) -> usize {
        self.book.len()
    }

    /// Recount, link, pruning and simplex checks over the whole state.
    pub fn verify(&self) -> Result<()> {
        if self.book.len() != self.tree.num_components() {
            return Err(Error::Invariant(format!(
                "book has {} components, tree has {}",
                self.book.len(),
                self.tree.num_components()
            )));
        }
        self.tree.verify(self.assignments.iter().map(|a| (a.path.as_slice(), a.component)))?;
        for node in self.tree.nodes() {
            node.mixing
                .validate()
                .map_err(|e| Error::Invariant(format!("{} mixing invalid: {e}", node.id)))?;
            if let MixingMode::Finite(_) = self.mode {
                if node.mixing.remainder() != 0.0 {
                    return Err(Error::Invariant(format!("{} has remainder in finite mode", node.id)));
                }
            }
        }
        Ok(())
    }
}

/// `ln N(x; θ_k, σ²I)`.
pub fn component_log_density(x: &[f64], k: usize, book: &ComponentBook, hp: &Hyperparams) -> Result<f64> {
    let mean = book
        .means
        .get(k)
        .ok_or(Error::ComponentOutOfRange { index: k, count: book.len() })?;
    if mean.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: mean.len(), got: x.len() });
    }
    Ok(ln_normal_diag(x, mean, |_| hp.sigma2))
}

/// `ln f*(x)`, the prior predictive of a fresh component:
/// `N(x; μ0, Σ0 + σ²I)`.
pub fn new_component_log_density(x: &[f64], hp: &Hyperparams) -> f64 {
    ln_normal_diag(x, &hp.mu0, |i| hp.sigma0_diag[i] + hp.sigma2)
}

/// `ln(Σ_k β_k f(x; θ_k) + β* f*(x))` for the given mixing weights.
pub fn mixture_log_likelihood(x: &[f64], mixing: &StickWeights, book: &ComponentBook, hp: &Hyperparams) -> f64 {
    let mut terms = Vec::with_capacity(mixing.len() + 1);
    for (k, &w) in mixing.weights().iter().enumerate() {
        if w > 0.0 {
            terms.push(ln(w) + ln_normal_diag(x, &book.means[k], |_| hp.sigma2));
        }
    }
    if mixing.remainder() > 0.0 {
        terms.push(ln(mixing.remainder()) + new_component_log_density(x, hp));
    }
    log_sum_exp(&terms)
}

/// Single-observation likelihood at `leaf` with the component collapsed.
pub fn leaf_log_likelihood(
    x: &[f64],
    leaf: NodeId,
    h: &Hierarchy,
    book: &ComponentBook,
    hp: &Hyperparams,
) -> Result<f64> {
    let node = h.node(leaf).ok_or(Error::DanglingNode(leaf))?;
    if node.depth != h.levels() {
        return Err(Error::Invariant(format!("{leaf} is not a leaf")));
    }
    Ok(mixture_log_likelihood(x, &node.mixing, book, hp))
}

/// `ln p(X, c, V | B, θ)`: per-observation `ln β_{leaf,c} + ln f(x; θ_c)` plus
/// the nCRP tree prior.
pub fn complete_data_log_likelihood(state: &State) -> Result<f64> {
    let mut total = 0.0;
    for (n, a) in state.assignments.iter().enumerate() {
        let k = a.component.ok_or(Error::Unassigned(n))?;
        let leaf = a.leaf().ok_or(Error::EmptyPath)?;
        let node = state.tree.node(leaf).ok_or(Error::DanglingNode(leaf))?;
        total += ln(node.mixing.weight(k)) + component_log_density(state.data.row(n), k, &state.book, &state.hp)?;
    }
    Ok(total + state.tree.tree_log_prior(state.hp.alpha))
}

/// Output of [`generate`].
#[derive(Clone, Debug)]
pub struct Generated {
    pub state: State,
}

/// Draw a component mean from the base measure `H`.
pub(crate) fn sample_base_mean(hp: &Hyperparams, rng: &mut Rng) -> Result<Vec<f64>> {
    sample_gaussian_diag(&hp.mu0, &hp.sigma0_diag, rng)
}

/// Root weights at initialisation: truncated GEM or symmetric Dirichlet.
pub(crate) fn initial_root_weights(hp: &Hyperparams, mode: MixingMode, rng: &mut Rng) -> Result<StickWeights> {
    match mode {
        MixingMode::Infinite => gem_stick_breaking(hp.gamma0, hp.epsilon, rng),
        MixingMode::Finite(k) => {
            if k == 0 {
                return Err(Error::InvalidParameter { name: "finite K", value: 0.0 });
            }
            let params = vec![hp.gamma0 / k as f64; k];
            Ok(StickWeights::from_parts(sample_dirichlet(&params, rng)?, 0.0))
        }
    }
}

/// Sample `n_obs` observations from the model.
pub fn generate(n_obs: usize, hp: &Hyperparams, mode: MixingMode, rng: &mut Rng) -> Result<Generated> {
    hp.validate()?;
    if n_obs == 0 {
        return Err(Error::EmptyData);
    }
    let root = initial_root_weights(hp, mode, rng)?;
    let mut book = ComponentBook::default();
    for _ in 0..root.len() {
        book.means.push(sample_base_mean(hp, rng)?);
    }
    let mut tree = Hierarchy::new(hp.levels, root);
    let mut assignments = Vec::with_capacity(n_obs);
    let mut values = Vec::with_capacity(n_obs * hp.dim());

    for _ in 0..n_obs {
        let proposal = sample_path(&tree, hp.alpha, rng)?;
        let path = tree.attach_path(&proposal.steps)?;
        hdp::init_new_nodes(&mut tree, &path, &proposal.steps, hp.gamma, rng)?;

        let leaf = &tree.node(*path.last().expect("non-empty path")).expect("attached").mixing;
        let mut weights: Vec<f64> = leaf.weights().to_vec();
        weights.push(leaf.remainder());
        let log_w: Vec<f64> = weights.iter().map(|&w| ln(w)).collect();
        let mut k = sample_log_categorical(&log_w, rng)?;
        if k == book.len() {
            book.means.push(sample_base_mean(hp, rng)?);
            hdp::extend_for_new_component(&mut tree, hp.gamma0, hp.gamma, rng)?;
            k = book.len() - 1;
        }
        tree.add_component_count(&path, k)?;
        let x = sample_gaussian_diag(&book.means[k], &vec![hp.sigma2; hp.dim()], rng)?;
        values.extend_from_slice(&x);
        assignments.push(PathAssignment { path, component: Some(k) });
    }

    let data = Dataset::from_flat(n_obs, hp.dim(), values)?;
    Ok(Generated {
        state: State { data: Arc::new(data), hp: hp.clone(), mode, tree, book, assignments },
    })
}

/// Path decisions that were `New`, paired with the node created for them.
pub(crate) fn created_nodes<'a>(path: &'a [NodeId], steps: &'a [PathStep]) -> impl Iterator<Item = NodeId> + 'a {
    steps
        .iter()
        .zip(&path[1..])
        .filter(|(s, _)| matches!(s, PathStep::New))
        .map(|(_, id)| *id)
}
