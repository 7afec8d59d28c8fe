//! Hidden Markov tree over wavelet states and the turbo loop exchanging
//! state beliefs between bandwise BAMP and tree inference.

use rand::RngExt;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::{bamp_decode_soft, state_likelihoods, AmpConfig, Encoder};
use crate::error::{Error, Result};
use crate::priors::GmdPrior;
use crate::rng::stream_rng;
use crate::wavelet::QuadTree;

pub const TURBO_ITERS: usize = 20;

/// Root activity and the scale-invariant transition probabilities
/// `p11 = p(s = 1 | parent 1)`, `p10 = p(s = 1 | parent 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmtParams {
    pub root_lambda: f64,
    pub p11: f64,
    pub p10: f64,
}

impl HmtParams {
    pub fn new(root_lambda: f64, p11: f64, p10: f64) -> Result<Self> {
        let p = HmtParams { root_lambda, p11, p10 };
        p.validate()?;
        Ok(p)
    }

    /// `p11 = 0.9`, `p10 = 0.1`.
    pub fn with_defaults(root_lambda: f64) -> Result<Self> {
        HmtParams::new(root_lambda, 0.9, 0.1)
    }

    fn validate(&self) -> Result<()> {
        if [self.root_lambda, self.p11, self.p10].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("HMT probabilities must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `p(s = 1 | parent state)`.
    fn activation(&self, parent_active: bool) -> f64 {
        if parent_active {
            self.p11
        } else {
            self.p10
        }
    }

    /// `[[p(0|0), p(1|0)], [p(0|1), p(1|1)]]`.
    fn transitions(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.p10, self.p10], [1.0 - self.p11, self.p11]]
    }
}

/// `λ₁ = root`, `λⱼ = p11 λⱼ₋₁ + p10 (1 − λⱼ₋₁)`.
pub fn marginal_activity(params: &HmtParams, scales: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if scales == 0 {
        return Err(Error::invalid("need at least one scale"));
    }
    let mut out = vec![params.root_lambda];
    for _ in 1..scales {
        let l = *out.last().unwrap();
        out.push(params.p11 * l + params.p10 * (1.0 - l));
    }
    Ok(out)
}

/// Ancestral draw of states down the tree, then coefficients from the
/// large or small Gaussian of each node's scale. `variances[j - 1]` is
/// `(σ_L², σ_S²)` of scale `j`.
pub fn hmt_sample(params: &HmtParams, tree: &QuadTree, variances: &[(f64, f64)], seed: u64) -> Result<(Vec<bool>, Vec<f64>)> {
    params.validate()?;
    let scales = tree.offsets.len() - 1;
    if variances.len() != scales {
        return Err(Error::Dimension(format!("{} variance pairs for {scales} scales", variances.len())));
    }
    if variances.iter().any(|&(l, s)| !(l >= 0.0 && s >= 0.0 && l.is_finite() && s.is_finite())) {
        return Err(Error::invalid("state variances must be finite and nonnegative"));
    }
    let mut states_rng = stream_rng(seed, 0);
    let mut states = vec![false; tree.len()];
    for i in 0..tree.len() {
        let p = match tree.parent[i] {
            None => params.root_lambda,
            Some(par) => params.activation(states[par]),
        };
        states[i] = states_rng.random::<f64>() < p;
    }
    let mut coef_rng = stream_rng(seed, 1);
    let coeffs = (0..tree.len())
        .map(|i| {
            let (l, s) = variances[tree.scale(i) - 1];
            let z: f64 = coef_rng.sample(StandardNormal);
            z * if states[i] { l } else { s }.sqrt()
        })
        .collect();
    Ok((states, coeffs))
}

/// Activity belief of one coefficient from its value alone:
/// `N(ω; 0, σ_L²) / (N(ω; 0, σ_L²) + N(ω; 0, σ_S²))`.
pub fn soft_information(omega: f64, sigma_l2: f64, sigma_s2: f64) -> Result<f64> {
    if !(sigma_s2 > 0.0 && sigma_l2 > sigma_s2 && sigma_l2.is_finite()) || !omega.is_finite() {
        return Err(Error::invalid("soft information needs sigma_l2 > sigma_s2 > 0 and a finite coefficient"));
    }
    Ok(state_likelihoods(omega, sigma_l2, sigma_s2, 0.0)[0])
}

/// Per-node state evidence and the results of tree inference.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBeliefs {
    /// `[p(obs | s = 1), p(obs | s = 0)]`.
    pub likelihoods: Vec<[f64; 2]>,
    /// `p(s = 1 | all evidence in the tree)`.
    pub posteriors: Vec<f64>,
    /// `p(s = 1 | all evidence except the node's own)`: the belief handed
    /// back to the coefficient decoder.
    pub extrinsic: Vec<f64>,
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let s = v[0] + v[1];
    if s > 0.0 {
        [v[0] / s, v[1] / s]
    } else {
        [0.5, 0.5]
    }
}

/// Exact sum-product (upward–downward) on every tree of the forest.
/// States are indexed `[s = 0, s = 1]` internally; messages are
/// renormalized at every step.
pub fn hmt_posterior(likelihoods: &[[f64; 2]], params: &HmtParams, tree: &QuadTree) -> Result<StateBeliefs> {
    params.validate()?;
    if likelihoods.len() != tree.len() {
        return Err(Error::Dimension(format!("{} likelihood pairs for {} nodes", likelihoods.len(), tree.len())));
    }
    if let Some(i) = likelihoods
        .iter()
        .position(|l| !(l[0] >= 0.0 && l[1] >= 0.0 && l[0].is_finite() && l[1].is_finite()) || l[0] + l[1] == 0.0)
    {
        return Err(Error::invalid(format!("likelihood pair of node {i} is invalid or all zero")));
    }
    let n = tree.len();
    let t = params.transitions();
    // local evidence, [s0, s1]
    let local: Vec<[f64; 2]> = likelihoods.iter().map(|l| normalize([l[1], l[0]])).collect();
    // up[i]: message from i to its parent, as a function of the parent state
    let mut up = vec![[1.0, 1.0]; n];
    // beta[i]: evidence from i's subtree, as a function of i's state
    let mut beta = vec![[1.0, 1.0]; n];
    for i in (0..n).rev() {
        let mut b = local[i];
        for &c in &tree.children[i] {
            b = normalize([b[0] * up[c][0], b[1] * up[c][1]]);
        }
        beta[i] = b;
        up[i] = normalize([t[0][0] * b[0] + t[0][1] * b[1], t[1][0] * b[0] + t[1][1] * b[1]]);
    }
    // alpha[i]: prior of i given evidence outside its subtree
    let mut alpha = vec![[0.0, 0.0]; n];
    for i in 0..n {
        alpha[i] = match tree.parent[i] {
            None => [1.0 - params.root_lambda, params.root_lambda],
            Some(p) => {
                let mut outside = [alpha[p][0] * local[p][0], alpha[p][1] * local[p][1]];
                for &c in tree.children[p].iter().filter(|&&c| c != i) {
                    outside = normalize([outside[0] * up[c][0], outside[1] * up[c][1]]);
                }
                let o = normalize(outside);
                normalize([o[0] * t[0][0] + o[1] * t[1][0], o[0] * t[0][1] + o[1] * t[1][1]])
            }
        };
    }
    let mut posteriors = vec![0.0; n];
    let mut extrinsic = vec![0.0; n];
    for i in 0..n {
        posteriors[i] = normalize([alpha[i][0] * beta[i][0], alpha[i][1] * beta[i][1]])[1];
        let mut ext = alpha[i];
        for &c in &tree.children[i] {
            ext = normalize([ext[0] * up[c][0], ext[1] * up[c][1]]);
        }
        extrinsic[i] = normalize(ext)[1];
    }
    Ok(StateBeliefs { likelihoods: likelihoods.to_vec(), posteriors, extrinsic })
}

/// Turbo decoding: bandwise soft-input BAMP, then tree inference on the
/// emitted state likelihoods, repeated `turbo_iters` times. Band 0 (scaling)
/// stays outside the tree. Activity rates start at each band's `λ`.
/// `observe` sees the estimate after every turbo iteration.
#[allow(clippy::too_many_arguments)]
pub fn turbo_decode_with(
    encoder: &Encoder,
    y: &[Vec<f64>],
    priors: &[GmdPrior],
    params: &HmtParams,
    tree: &QuadTree,
    turbo_iters: usize,
    cfg: &AmpConfig,
    mut observe: impl FnMut(usize, &[Vec<f64>]),
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if turbo_iters == 0 {
        return Err(Error::invalid("need at least one turbo iteration"));
    }
    let sizes: Vec<usize> = encoder.blocks.iter().map(|b| b.n()).collect();
    let scales = tree.offsets.len() - 1;
    if priors.len() != sizes.len() || sizes.len() != scales + 1 || (1..=scales).any(|j| sizes[j] != tree.offsets[j] - tree.offsets[j - 1]) {
        return Err(Error::Dimension("quad-tree does not match the band sizes".into()));
    }
    let mut activity: Vec<Vec<f64>> = priors.iter().zip(&sizes).map(|(p, &n)| vec![p.lambda; n]).collect();
    let mut theta = Vec::new();
    for it in 0..turbo_iters {
        let soft = bamp_decode_soft(encoder, y, priors, &activity, cfg)?;
        theta = soft.output.theta;
        observe(it, &theta);
        if it + 1 == turbo_iters {
            break;
        }
        let lik: Vec<[f64; 2]> = soft.likelihoods[1..].concat();
        let beliefs = hmt_posterior(&lik, params, tree)?;
        for (a, w) in activity[1..].iter_mut().zip(tree.offsets.windows(2)) {
            a.copy_from_slice(&beliefs.extrinsic[w[0]..w[1]]);
        }
    }
    Ok(theta)
}

pub fn turbo_decode(
    encoder: &Encoder,
    y: &[Vec<f64>],
    priors: &[GmdPrior],
    params: &HmtParams,
    tree: &QuadTree,
    turbo_iters: usize,
    cfg: &AmpConfig,
) -> Result<Vec<Vec<f64>>> {
    turbo_decode_with(encoder, y, priors, params, tree, turbo_iters, cfg, |_, _| {})
}

/// Splits a tree-ordered vector into per-scale pieces.
pub fn split_by_scale<T: Clone>(tree: &QuadTree, values: &[T]) -> Vec<Vec<T>> {
    tree.offsets.windows(2).map(|w| values[w[0]..w[1]].to_vec()).collect()
}

#[cfg(test)]
mod tests;
