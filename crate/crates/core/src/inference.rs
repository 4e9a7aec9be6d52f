//! Metropolis-Hastings within partially collapsed Gibbs.
//!
//! One sweep visits the observations in shuffled order. For each one the
//! path is detached (with its component count), a replacement path is drawn
//! from the nCRP on the reduced tree and accepted or rejected with the
//! component label collapsed out, and then the label is redrawn given the
//! chosen leaf. Node weights, component means and optionally the
//! hyperparameters are refreshed once per sweep.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::hdp::{extend_for_new_component, init_new_nodes, resample_all_weights, weights_log_density};
use crate::hierarchy::{NodeId, PathStep, Pruned};
use crate::math::{exp, ln};
use crate::model::{
    complete_data_log_likelihood, component_log_density, initial_root_weights, mixture_log_likelihood,
    new_component_log_density, sample_base_mean, ComponentBook, Dataset, Hyperparams, MixingMode,
    PathAssignment, State,
};
use crate::ncrp::{path_log_density, sample_path};
use crate::stochastic::{ln_gamma_variate, sample_gaussian_diag, sample_log_categorical, Rng};
use crate::hierarchy::Hierarchy;
use crate::{Error, Result};

/// Priors for the hyperparameter move: `α ~ Ga(shape, rate)`,
/// `γ0 ~ Ga(shape, rate)`, `γ ~ U(0, gamma_max)`, `σ² ~ U(0, sigma2_max)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Hyperpriors {
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub gamma0_shape: f64,
    pub gamma0_rate: f64,
    pub gamma_max: f64,
    pub sigma2_max: f64,
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Hyperpriors {
            alpha_shape: 3.0,
            alpha_rate: 1.0,
            gamma0_shape: 3.5,
            gamma0_rate: 1.0,
            gamma_max: 1.5,
            sigma2_max: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SamplerConfig {
    pub burn_in: usize,
    /// Iterations kept after burn-in; the best of these is returned.
    pub draws: usize,
    /// Hyperparameter moves, applied during burn-in only.
    pub hyper_sampling: bool,
    pub hyperpriors: Hyperpriors,
    pub trace_every: usize,
    pub seed: u64,
    pub mode: MixingMode,
    /// Redraw component means each sweep. Off only for fixed-θ experiments.
    pub update_components: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: 500,
            draws: 500,
            hyper_sampling: false,
            hyperpriors: Hyperpriors::default(),
            trace_every: 1,
            seed: 0,
            mode: MixingMode::Infinite,
            update_components: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidParameter { name: "draws", value: 0.0 });
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidParameter { name: "trace_every", value: 0.0 });
        }
        let h = &self.hyperpriors;
        for (name, value) in [
            ("alpha_shape", h.alpha_shape),
            ("alpha_rate", h.alpha_rate),
            ("gamma0_shape", h.gamma0_shape),
            ("gamma0_rate", h.gamma0_rate),
            ("gamma_max", h.gamma_max),
            ("sigma2_max", h.sigma2_max),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Per-iteration record of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub iterations: Vec<usize>,
    pub log_likelihood: Vec<f64>,
    pub components: Vec<usize>,
    pub nodes: Vec<usize>,
    pub path_accepts: Vec<usize>,
    pub hyper_accepts: Vec<bool>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Conjugate posterior `N(μ̃, diag(ṽ))` of a component mean given the sum
/// and count of its observations.
pub fn component_posterior(sum: &[f64], count: usize, hp: &Hyperparams) -> (Vec<f64>, Vec<f64>) {
    let n = count as f64;
    let mut mean = Vec::with_capacity(sum.len());
    let mut var = Vec::with_capacity(sum.len());
    for ((&s, &m0), &s0) in sum.iter().zip(&hp.mu0).zip(&hp.sigma0_diag) {
        let precision = 1.0 / s0 + n / hp.sigma2;
        let v = 1.0 / precision;
        mean.push(v * (m0 / s0 + s / hp.sigma2));
        var.push(v);
    }
    (mean, var)
}

/// Redraw `c_n` at its current leaf; a draw from the remainder creates a new
/// component whose mean comes from the single-point posterior.
pub fn gibbs_update_assignment(state: &mut State, n: usize, rng: &mut Rng) -> Result<usize> {
    let path = state.assignments[n].path.clone();
    if let Some(old) = state.assignments[n].component.take() {
        state.tree.remove_component_count(&path, old)?;
    }
    let leaf = *path.last().ok_or(Error::EmptyPath)?;
    let x = state.data.row(n);
    let mixing = &state.tree.get(leaf)?.mixing;
    let mut log_w = Vec::with_capacity(mixing.len() + 1);
    for (k, &w) in mixing.weights().iter().enumerate() {
        log_w.push(if w > 0.0 {
            ln(w) + component_log_density(x, k, &state.book, &state.hp)?
        } else {
            f64::NEG_INFINITY
        });
    }
    log_w.push(if mixing.remainder() > 0.0 {
        ln(mixing.remainder()) + new_component_log_density(x, &state.hp)
    } else {
        f64::NEG_INFINITY
    });
    let mut k = sample_log_categorical(&log_w, rng)?;
    if k == state.book.len() {
        let (mean, var) = component_posterior(x, 1, &state.hp);
        let theta = sample_gaussian_diag(&mean, &var, rng)?;
        state.book.means.push(theta);
        extend_for_new_component(&mut state.tree, state.hp.gamma0, state.hp.gamma, rng)?;
        k = state.book.len() - 1;
    }
    state.tree.add_component_count(&path, k)?;
    state.assignments[n].component = Some(k);
    Ok(k)
}

/// An observation taken out of the tree, with everything needed to score a
/// replacement path and to put it back on rejection.
#[derive(Debug)]
pub struct PathMove {
    n: usize,
    old_path: Vec<NodeId>,
    pruned: Pruned,
    log_prior_old: f64,
    log_lik_old: f64,
    log_reverse: f64,
}

impl PathMove {
    pub fn old_path(&self) -> &[NodeId] {
        &self.old_path
    }

    /// `ln ncrp(v_n; V' \ v'_n)`, the reverse proposal density.
    pub fn log_reverse(&self) -> f64 {
        self.log_reverse
    }
}

/// A candidate path attached to the tree and its acceptance log-ratio.
#[derive(Debug)]
pub struct ProposedPath {
    pub path: Vec<NodeId>,
    pub log_accept: f64,
}

/// Cleanup: detach observation `n` and its component count.
pub fn begin_path_move(state: &mut State, n: usize) -> Result<PathMove> {
    let alpha = state.hp.alpha;
    let log_prior_old = state.tree.tree_log_prior(alpha);
    let a = &mut state.assignments[n];
    let old_path = core::mem::take(&mut a.path);
    let old_component = a.component.take();
    let pruned = state.tree.detach_path(&old_path, old_component)?;
    let leaf = *old_path.last().ok_or(Error::EmptyPath)?;
    let mixing = match pruned.get(leaf) {
        Some(node) => &node.mixing,
        None => &state.tree.get(leaf)?.mixing,
    };
    let log_lik_old = mixture_log_likelihood(state.data.row(n), mixing, &state.book, &state.hp);
    let log_reverse = path_log_density(&state.tree, &old_path, alpha)?;
    Ok(PathMove { n, old_path, pruned, log_prior_old, log_lik_old, log_reverse })
}

/// Attach `steps` (initialising any new nodes from the prior) and compute
/// the log acceptance ratio against the detached path.
pub fn propose_path(
    state: &mut State,
    mv: &PathMove,
    steps: &[PathStep],
    log_q: f64,
    rng: &mut Rng,
) -> Result<ProposedPath> {
    let path = state.tree.attach_path(steps)?;
    init_new_nodes(&mut state.tree, &path, steps, state.hp.gamma, rng)?;
    let leaf = *path.last().expect("attached path");
    let log_lik_new = mixture_log_likelihood(
        state.data.row(mv.n),
        &state.tree.get(leaf)?.mixing,
        &state.book,
        &state.hp,
    );
    let log_prior_new = state.tree.tree_log_prior(state.hp.alpha);
    let log_accept =
        (log_lik_new + log_prior_new + mv.log_reverse) - (mv.log_lik_old + mv.log_prior_old + log_q);
    Ok(ProposedPath { path, log_accept })
}

/// Keep the proposal, or detach it and reinstate the old path and any nodes
/// pruned with it. The component stays unassigned either way.
pub fn finish_path_move(state: &mut State, mv: PathMove, proposed: ProposedPath, accept: bool) -> Result<()> {
    let n = mv.n;
    if accept {
        state.assignments[n] = PathAssignment { path: proposed.path, component: None };
    } else {
        state.tree.detach_path(&proposed.path, None)?;
        state.tree.restore_path(&mv.old_path, None, mv.pruned)?;
        state.assignments[n] = PathAssignment { path: mv.old_path, component: None };
    }
    Ok(())
}

/// Path move for observation `n` followed by its Gibbs component step.
/// Returns whether the proposed path was accepted.
pub fn mh_update_path(state: &mut State, n: usize, rng: &mut Rng) -> Result<bool> {
    let mv = begin_path_move(state, n)?;
    let proposal = sample_path(&state.tree, state.hp.alpha, rng)?;
    let proposed = propose_path(state, &mv, &proposal.steps, proposal.log_q, rng)?;
    let accept = rng.uniform() < exp(proposed.log_accept);
    finish_path_move(state, mv, proposed, accept)?;
    gibbs_update_assignment(state, n, rng)?;
    Ok(accept)
}

/// Redraw every component mean from its conjugate posterior.
pub fn resample_components(state: &mut State, rng: &mut Rng) -> Result<()> {
    let k = state.book.len();
    let d = state.data.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (n, a) in state.assignments.iter().enumerate() {
        let c = a.component.ok_or(Error::Unassigned(n))?;
        counts[c] += 1;
        for (s, &x) in sums[c].iter_mut().zip(state.data.row(n)) {
            *s += x;
        }
    }
    for c in 0..k {
        let (mean, var) = component_posterior(&sums[c], counts[c], &state.hp);
        state.book.means[c] = sample_gaussian_diag(&mean, &var, rng)?;
    }
    Ok(())
}

/// Candidate values for the hyperparameter move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperProposal {
    pub alpha: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub sigma2: f64,
}

impl HyperProposal {
    pub fn current(hp: &Hyperparams) -> Self {
        HyperProposal { alpha: hp.alpha, gamma0: hp.gamma0, gamma: hp.gamma, sigma2: hp.sigma2 }
    }

    /// Independent draws from the hyperpriors.
    pub fn sample(priors: &Hyperpriors, rng: &mut Rng) -> Self {
        let alpha = exp(ln_gamma_variate(priors.alpha_shape, rng)) / priors.alpha_rate;
        let gamma0 = exp(ln_gamma_variate(priors.gamma0_shape, rng)) / priors.gamma0_rate;
        let gamma = priors.gamma_max * rng.uniform_open_low();
        let sigma2 = priors.sigma2_max * rng.uniform_open_low();
        HyperProposal { alpha, gamma0, gamma, sigma2 }
    }
}

/// Log acceptance ratio of moving to `proposal`. With proposals drawn from
/// the hyperpriors the prior terms cancel, leaving the σ²-dependent
/// component densities, the α-dependent tree prior and the (γ0, γ)-dependent
/// density of the node weights.
pub fn hyper_log_acceptance(state: &State, proposal: &HyperProposal) -> Result<f64> {
    let current = &state.hp;
    let mut log_ratio = 0.0;
    if proposal.sigma2 != current.sigma2 {
        let mut candidate = current.clone();
        candidate.sigma2 = proposal.sigma2;
        for (n, a) in state.assignments.iter().enumerate() {
            let c = a.component.ok_or(Error::Unassigned(n))?;
            let x = state.data.row(n);
            log_ratio += component_log_density(x, c, &state.book, &candidate)?
                - component_log_density(x, c, &state.book, current)?;
        }
    }
    if proposal.alpha != current.alpha {
        log_ratio += state.tree.tree_log_prior(proposal.alpha) - state.tree.tree_log_prior(current.alpha);
    }
    if proposal.gamma0 != current.gamma0 || proposal.gamma != current.gamma {
        log_ratio += weights_log_density(&state.tree, state.mode, proposal.gamma0, proposal.gamma)
            - weights_log_density(&state.tree, state.mode, current.gamma0, current.gamma);
    }
    Ok(log_ratio)
}

/// Independence Metropolis-Hastings move on `(α, γ0, γ, σ²)`.
pub fn resample_hyperparameters(state: &mut State, cfg: &SamplerConfig, rng: &mut Rng) -> Result<bool> {
    if !cfg.hyper_sampling {
        return Ok(false);
    }
    let proposal = HyperProposal::sample(&cfg.hyperpriors, rng);
    let log_a = hyper_log_acceptance(state, &proposal)?;
    let accept = rng.uniform() < exp(log_a);
    if accept {
        state.hp.alpha = proposal.alpha;
        state.hp.gamma0 = proposal.gamma0;
        state.hp.gamma = proposal.gamma;
        state.hp.sigma2 = proposal.sigma2;
    }
    Ok(accept)
}

/// Build the starting state: root weights from the truncated GEM (or the
/// finite Dirichlet), means for those components from the base measure, then
/// one sequential pass in which each observation draws a path from the nCRP
/// prior and a component from the Gibbs conditional.
pub fn initialize_state(data: Arc<Dataset>, hp: &Hyperparams, mode: MixingMode, rng: &mut Rng) -> Result<State> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != hp.dim() {
        return Err(Error::DimensionMismatch { expected: hp.dim(), got: data.dim() });
    }
    let root = initial_root_weights(hp, mode, rng)?;
    let mut book = ComponentBook::default();
    for _ in 0..root.len() {
        book.means.push(sample_base_mean(hp, rng)?);
    }
    let n_obs = data.len();
    let mut state = State {
        data,
        hp: hp.clone(),
        mode,
        tree: Hierarchy::new(hp.levels, root),
        book,
        assignments: vec![PathAssignment::default(); n_obs],
    };
    for n in 0..n_obs {
        let proposal = sample_path(&state.tree, hp.alpha, rng)?;
        let path = state.tree.attach_path(&proposal.steps)?;
        init_new_nodes(&mut state.tree, &path, &proposal.steps, hp.gamma, rng)?;
        state.assignments[n].path = path;
        gibbs_update_assignment(&mut state, n, rng)?;
    }
    Ok(state)
}

/// Outcome of one sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    pub path_accepts: usize,
    pub hyper_accepted: bool,
}

/// A single chain.
#[derive(Clone, Debug)]
pub struct Sampler {
    state: State,
    config: SamplerConfig,
    rng: Rng,
    iteration: usize,
}

impl Sampler {
    /// Initialise from data with an RNG seeded from `config.seed`.
    pub fn new(data: Dataset, hp: &Hyperparams, config: SamplerConfig) -> Result<Self> {
        Self::with_rng(data, hp, config.clone(), Rng::new(config.seed))
    }

    pub fn with_rng(data: Dataset, hp: &Hyperparams, config: SamplerConfig, mut rng: Rng) -> Result<Self> {
        config.validate()?;
        let state = initialize_state(Arc::new(data), hp, config.mode, &mut rng)?;
        Ok(Sampler { state, config, rng, iteration: 0 })
    }

    /// Continue from an existing state.
    pub fn from_state(state: State, config: SamplerConfig, rng: Rng) -> Result<Self> {
        config.validate()?;
        Ok(Sampler { state, config, rng, iteration: 0 })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn into_state(self) -> State {
        self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn sweep(&mut self) -> Result<SweepStats> {
        let mut order: Vec<usize> = (0..self.state.data.len()).collect();
        self.rng.shuffle(&mut order);
        let mut stats = SweepStats::default();
        for n in order {
            if mh_update_path(&mut self.state, n, &mut self.rng)? {
                stats.path_accepts += 1;
            }
        }
        resample_all_weights(&mut self.state, &mut self.rng)?;
        if self.config.update_components {
            resample_components(&mut self.state, &mut self.rng)?;
        }
        if self.config.hyper_sampling && self.iteration < self.config.burn_in {
            stats.hyper_accepted = resample_hyperparameters(&mut self.state, &self.config, &mut self.rng)?;
        }
        self.iteration += 1;
        Ok(stats)
    }

    /// Run `burn_in + draws` sweeps; return the post-burn-in state with the
    /// greatest complete-data log likelihood and the trace.
    pub fn run(mut self) -> Result<(State, Trace)> {
        let total = self.config.burn_in + self.config.draws;
        let mut trace = Trace::default();
        let mut best: Option<(f64, State)> = None;
        for iter in 0..total {
            let stats = self.sweep()?;
            let ll = complete_data_log_likelihood(&self.state)?;
            if iter % self.config.trace_every == 0 {
                trace.iterations.push(iter);
                trace.log_likelihood.push(ll);
                trace.components.push(self.state.num_components());
                trace.nodes.push(self.state.tree.len());
                trace.path_accepts.push(stats.path_accepts);
                trace.hyper_accepts.push(stats.hyper_accepted);
            }
            if iter >= self.config.burn_in && best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, self.state.clone()));
            }
        }
        let (_, state) = best.expect("draws >= 1");
        Ok((state, trace))
    }
}

/// Initialise and run one chain.
pub fn run_sampler(data: Dataset, hp: &Hyperparams, cfg: &SamplerConfig) -> Result<(State, Trace)> {
    Sampler::new(data, hp, cfg.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;
    use crate::stochastic::StickWeights;
    use PathStep::*;

    fn one_leaf_state(mixing: StickWeights, means: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> State {
        let mut hp = Hyperparams::animals_profile(x[0].len());
        hp.levels = 1;
        let k = mixing.len();
        let mut tree = Hierarchy::new(1, mixing.clone());
        let path = tree.attach_path(&[New]).unwrap();
        tree.node_mut(path[1]).unwrap().mixing = mixing;
        for _ in 1..x.len() {
            tree.attach_path(&[Existing(path[1])]).unwrap();
        }
        assert_eq!(k, means.len());
        let n = x.len();
        State {
            data: Arc::new(Dataset::from_rows(&x).unwrap()),
            hp,
            mode: MixingMode::Infinite,
            tree,
            book: ComponentBook { means },
            assignments: vec![PathAssignment { path, component: None }; n],
        }
    }

    #[test]
    fn no_remainder_means_no_birth() {
        let mut s = one_leaf_state(StickWeights::new(vec![0.5, 0.5], 0.0).unwrap(), vec![vec![0.0], vec![40.0]], vec![vec![20.0]]);
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let k = gibbs_update_assignment(&mut s, 0, &mut rng).unwrap();
            assert!(k < 2);
        }
        assert_eq!(s.book.len(), 2);
    }

    #[test]
    fn single_component_is_forced() {
        let mut s = one_leaf_state(StickWeights::new(vec![1.0], 0.0).unwrap(), vec![vec![5.0]], vec![vec![-3.0]]);
        let mut rng = Rng::new(2);
        for _ in 0..100 {
            assert_eq!(gibbs_update_assignment(&mut s, 0, &mut rng).unwrap(), 0);
        }
        s.verify().unwrap();
    }

    #[test]
    fn gibbs_frequency_matches_normalised_terms() {
        let mut s = one_leaf_state(
            StickWeights::new(vec![0.5, 0.5], 0.0).unwrap(),
            vec![vec![-3.0], vec![3.0]],
            vec![vec![-3.0]],
        );
        let f1 = exp(-0.5 * 0.0);
        let f2 = exp(-0.5 * 36.0);
        let p = f1 / (f1 + f2);
        let mut rng = Rng::new(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| gibbs_update_assignment(&mut s, 0, &mut rng).unwrap() == 0).count();
        let freq = hits as f64 / n as f64;
        let se = sqrt(p * (1.0 - p) / n as f64).max(1.0 / n as f64);
        assert!((freq - p).abs() <= 3.0 * se, "freq {freq}, p {p}");
    }

    #[test]
    fn birth_extends_every_node() {
        let mut s = one_leaf_state(StickWeights::new(vec![0.5], 0.5).unwrap(), vec![vec![0.0]], vec![vec![60.0]]);
        let mut rng = Rng::new(4);
        let k = gibbs_update_assignment(&mut s, 0, &mut rng).unwrap();
        assert_eq!(k, 1);
        assert_eq!(s.book.len(), 2);
        // Single-point posterior mean is (μ0 + x) / 2 with unit variances.
        assert!((s.book.means[1][0] - 30.0).abs() < 5.0);
        s.verify().unwrap();
    }

    #[test]
    fn conjugate_posterior_cases() {
        let hp = Hyperparams::animals_profile(2);
        let (m, v) = component_posterior(&[0.0, 0.0], 0, &hp);
        assert_eq!((m, v), (vec![0.0, 0.0], vec![1.0, 1.0]));
        let (m, v) = component_posterior(&[3.0, -1.0], 1, &hp);
        assert_eq!(m, vec![1.5, -0.5]);
        assert_eq!(v, vec![0.5, 0.5]);
    }

    #[test]
    fn conjugate_posterior_matches_grid() {
        let mut hp = Hyperparams::animals_profile(1);
        hp.mu0 = vec![0.5];
        hp.sigma0_diag = vec![2.0];
        hp.sigma2 = 0.7;
        let xs = [1.2, 0.4, 2.1, 1.7];
        let sum: f64 = xs.iter().sum();
        let (m, v) = component_posterior(&[sum], xs.len(), &hp);
        let (lo, hi, steps) = (-8.0, 10.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=steps {
            let t = lo + h * i as f64;
            let mut lp = -0.5 * (t - 0.5) * (t - 0.5) / 2.0;
            for x in xs {
                lp -= 0.5 * (x - t) * (x - t) / 0.7;
            }
            let w = exp(lp) * if i == 0 || i == steps { 0.5 } else { 1.0 };
            z += w;
            m1 += w * t;
            m2 += w * t * t;
        }
        let grid_mean = m1 / z;
        let grid_var = m2 / z - grid_mean * grid_mean;
        assert!((m[0] - grid_mean).abs() < 1e-6);
        assert!((v[0] - grid_var).abs() < 1e-6);
    }

    #[test]
    fn identical_proposal_has_zero_log_ratio() {
        let mut s = one_leaf_state(
            StickWeights::new(vec![0.6, 0.4], 0.0).unwrap(),
            vec![vec![-1.0], vec![1.0]],
            vec![vec![0.3], vec![0.2], vec![-0.5]],
        );
        let leaf = s.assignments[0].path[1];
        let mut rng = Rng::new(5);
        for n in 0..3 {
            gibbs_update_assignment(&mut s, n, &mut rng).unwrap();
        }
        let mv = begin_path_move(&mut s, 0).unwrap();
        let log_q = crate::ncrp::steps_log_density(&s.tree, &[Existing(leaf)], s.hp.alpha).unwrap();
        let prop = propose_path(&mut s, &mv, &[Existing(leaf)], log_q, &mut rng).unwrap();
        assert_eq!(prop.log_accept, 0.0);
        finish_path_move(&mut s, mv, prop, true).unwrap();
    }

    #[test]
    fn rejection_restores_tree_exactly() {
        let mut hp = Hyperparams::animals_profile(1);
        hp.levels = 2;
        let data = Dataset::from_rows(&[vec![-4.0], vec![-3.5], vec![4.0], vec![3.0], vec![0.1]]).unwrap();
        let mut rng = Rng::new(6);
        let mut s = initialize_state(Arc::new(data), &hp, MixingMode::Infinite, &mut rng).unwrap();
        let mut rejections = 0;
        for round in 0..200 {
            let n = round % 5;
            let mut reference = s.clone();
            let mv = begin_path_move(&mut s, n).unwrap();
            let proposal = sample_path(&s.tree, s.hp.alpha, &mut rng).unwrap();
            let prop = propose_path(&mut s, &mv, &proposal.steps, proposal.log_q, &mut rng).unwrap();
            finish_path_move(&mut s, mv, prop, false).unwrap();
            // Expected: the original tree minus only the component count.
            let a = &mut reference.assignments[n];
            let c = a.component.take().unwrap();
            reference.tree.remove_component_count(&a.path, c).unwrap();
            assert_eq!(s.assignments[n], reference.assignments[n]);
            assert_eq!(s.tree.nodes().collect::<Vec<_>>(), reference.tree.nodes().collect::<Vec<_>>());
            rejections += 1;
            gibbs_update_assignment(&mut s, n, &mut rng).unwrap();
            s.verify().unwrap();
        }
        assert_eq!(rejections, 200);
    }

    #[test]
    fn join_other_leaf_ratio_by_hand() {
        // Two observations on separate leaves, one component.
        let mut hp = Hyperparams::animals_profile(1);
        hp.levels = 1;
        hp.alpha = 0.7;
        let mut tree = Hierarchy::new(1, StickWeights::new(vec![0.9], 0.1).unwrap());
        let a = tree.attach_path(&[New]).unwrap();
        let b = tree.attach_path(&[New]).unwrap();
        tree.node_mut(a[1]).unwrap().mixing = StickWeights::new(vec![0.7], 0.3).unwrap();
        tree.node_mut(b[1]).unwrap().mixing = StickWeights::new(vec![0.95], 0.05).unwrap();
        tree.add_component_count(&a, 0).unwrap();
        tree.add_component_count(&b, 0).unwrap();
        let x = [0.4, 2.5];
        let mut s = State {
            data: Arc::new(Dataset::from_rows(&[vec![x[0]], vec![x[1]]]).unwrap()),
            hp: hp.clone(),
            mode: MixingMode::Infinite,
            tree,
            book: ComponentBook { means: vec![vec![1.0]] },
            assignments: vec![
                PathAssignment { path: a.clone(), component: Some(0) },
                PathAssignment { path: b.clone(), component: Some(0) },
            ],
        };
        let mut rng = Rng::new(7);
        let mv = begin_path_move(&mut s, 0).unwrap();
        let log_q = crate::ncrp::steps_log_density(&s.tree, &[Existing(b[1])], hp.alpha).unwrap();
        let prop = propose_path(&mut s, &mv, &[Existing(b[1])], log_q, &mut rng).unwrap();

        let norm = |x: f64, m: f64, v: f64| exp(-0.5 * (x - m) * (x - m) / v) / sqrt(2.0 * core::f64::consts::PI * v);
        let f = norm(x[0], 1.0, 1.0);
        let f_star = norm(x[0], 0.0, 2.0);
        let lik_new = 0.95 * f + 0.05 * f_star;
        let lik_old = 0.7 * f + 0.3 * f_star;
        // Tree prior and proposal factors cancel; expanded anyway.
        let al = hp.alpha;
        let prior_new = al * libm::tgamma(al) / libm::tgamma(2.0 + al);
        let prior_old = al * al * libm::tgamma(al) / libm::tgamma(2.0 + al);
        let q_fwd = 1.0 / (1.0 + al);
        let q_rev = al / (1.0 + al);
        let expected = (lik_new * prior_new * q_rev) / (lik_old * prior_old * q_fwd);
        let a_hand = expected.min(1.0);
        let a_impl = exp(prop.log_accept).min(1.0);
        assert!((a_hand - a_impl).abs() < 1e-10, "{a_hand} vs {a_impl}");
        finish_path_move(&mut s, mv, prop, true).unwrap();
    }

    #[test]
    fn hyper_ratio_sigma_only() {
        let mut s = one_leaf_state(StickWeights::new(vec![1.0], 0.0).unwrap(), vec![vec![0.5]], vec![vec![1.7]]);
        gibbs_update_assignment(&mut s, 0, &mut Rng::new(8)).unwrap();
        let mut p = HyperProposal::current(&s.hp);
        assert_eq!(hyper_log_acceptance(&s, &p).unwrap(), 0.0);
        p.sigma2 = 0.3;
        let d = 1.7 - 0.5;
        let f_new = exp(-0.5 * d * d / 0.3) / sqrt(2.0 * core::f64::consts::PI * 0.3);
        let f_old = exp(-0.5 * d * d / 1.0) / sqrt(2.0 * core::f64::consts::PI * 1.0);
        let ratio = exp(hyper_log_acceptance(&s, &p).unwrap());
        assert!((ratio - f_new / f_old).abs() < 1e-12 * (f_new / f_old));
    }

    #[test]
    fn hyper_sampling_off_keeps_phi() {
        let mut hp = Hyperparams::animals_profile(1);
        hp.levels = 2;
        let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let cfg = SamplerConfig { burn_in: 10, draws: 10, hyper_sampling: false, seed: 3, ..Default::default() };
        let (state, trace) = run_sampler(data, &hp, &cfg).unwrap();
        assert_eq!(state.hp, hp);
        assert!(trace.hyper_accepts.iter().all(|a| !a));
    }

    #[test]
    fn run_is_deterministic_and_traces_every_iteration() {
        let mut hp = Hyperparams::animals_profile(1);
        hp.levels = 2;
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 3) as f64 * 4.0 + 0.1 * i as f64]).collect();
        let cfg = SamplerConfig { burn_in: 15, draws: 25, hyper_sampling: true, seed: 9, ..Default::default() };
        let (s1, t1) = run_sampler(Dataset::from_rows(&rows).unwrap(), &hp, &cfg).unwrap();
        let (s2, t2) = run_sampler(Dataset::from_rows(&rows).unwrap(), &hp, &cfg).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), 40);
        let best = complete_data_log_likelihood(&s1).unwrap();
        for &ll in &t1.log_likelihood[15..] {
            assert!(best >= ll);
        }
        s1.verify().unwrap();
    }

    #[test]
    fn non_matching_dimension_is_rejected() {
        let hp = Hyperparams::animals_profile(3);
        let data = Dataset::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(run_sampler(data, &hp, &SamplerConfig::default()).is_err());
    }
}
