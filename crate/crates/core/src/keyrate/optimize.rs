//! Minimisation of the conditional-entropy objective over the phase
//! weights `ν_Δ`.
//!
//! The objective only depends on `|Q_Δ − 2ν_Δ|`, so any `ν` can be folded
//! into the half box `ν_Δ ≤ Q_Δ/2` (or `≥ Q_Δ/2` when `Q_X > 1/2`) without
//! raising it. On that half box the search runs in `s_Δ = 2ν_Δ/Q_Δ ∈ [0,1]`
//! with `τ_{x,z} = (s_x + s_z − s_x s_z)/2` and the single constraint
//! `Σ Q_Δ s_Δ = 2 min(Q_X, 1 − Q_X)`. Patterns only interact with patterns
//! that agree on the CAD bits, so the Hessian is block diagonal by class.
//!
//! Each start runs a log-barrier path with damped Newton steps; indefinite
//! Hessian blocks are made positive definite by flipping and flooring their
//! eigenvalues. The optimum sits exponentially close to `s = 0` for
//! low-weight patterns, which is why plain gradient descent is not enough.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::noise::ErrorDistribution;

use super::CadMask;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Number of starts; the first seven are deterministic (centroid and
    /// greedy vertices of the constraint polytope), the rest random.
    pub starts: usize,
    /// Newton iterations allowed per barrier level.
    pub max_iter: usize,
    /// Barrier weight at which the path stops.
    pub final_barrier: f64,
    /// Newton decrement below which a barrier level counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            max_iter: 200,
            final_barrier: 1e-14,
            tol: 1e-11,
            seed: 0x5CAD_0001,
        }
    }
}

/// Classes larger than this use only the Hessian diagonal.
const DENSE_BLOCK_LIMIT: usize = 256;
const INITIAL_BARRIER: f64 = 1e-6;
const BARRIER_SHRINK: f64 = 0.1;
/// Relative distance under which two centered starts are merged.
const MERGE_TOL: f64 = 1e-9;

pub(super) struct Minimum {
    /// `ν_Δ` for every pattern value, dense.
    pub nu: Vec<f64>,
}

struct Problem {
    /// Pattern values with nonzero probability.
    active: Vec<usize>,
    /// `Q_Δ` of each active pattern.
    w: Vec<f64>,
    /// Active indices grouped by agreement on the CAD bits.
    classes: Vec<Vec<usize>>,
    p_a: f64,
    /// Right-hand side `Σ Q s = b`.
    b: f64,
    flipped: bool,
}

#[inline]
fn pair_tau(si: f64, sj: f64) -> f64 {
    0.5 * (si + sj - si * sj)
}

/// Binary entropy accurate for small arguments.
#[inline]
fn ent(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        -(t * t.ln() + (1.0 - t) * (-t).ln_1p()) / LN_2
    }
}

#[inline]
fn ent_d1(t: f64) -> f64 {
    let t = t.max(1e-300);
    ((1.0 - t) / t).ln() / LN_2
}

#[inline]
fn ent_d2(t: f64) -> f64 {
    let t = t.max(1e-300);
    -1.0 / (LN_2 * t * (1.0 - t))
}

impl Problem {
    fn new(d: &ErrorDistribution, mask: CadMask, p_a: f64) -> Self {
        let m = mask.pattern().value() as usize;
        let mut active = Vec::new();
        let mut w = Vec::new();
        for (v, &q) in d.probs().iter().enumerate() {
            if q > 0.0 {
                active.push(v);
                w.push(q);
            }
        }
        let mut keys: Vec<usize> = Vec::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (i, &v) in active.iter().enumerate() {
            let key = v & m;
            match keys.iter().position(|&k| k == key) {
                Some(k) => classes[k].push(i),
                None => {
                    keys.push(key);
                    classes.push(vec![i]);
                }
            }
        }
        let qx = d.qx().clamp(0.0, 1.0);
        Self {
            active,
            w,
            classes,
            p_a,
            b: 2.0 * qx.min(1.0 - qx),
            flipped: qx > 0.5,
        }
    }

    fn n(&self) -> usize {
        self.w.len()
    }

    /// `Σ_{(x,z)} Q_x Q_z h(τ_{x,z})` over accepted ordered pairs.
    fn entropy_mass(&self, s: &[f64]) -> f64 {
        let mut total = 0.0;
        for class in &self.classes {
            for (a, &i) in class.iter().enumerate() {
                total += self.w[i] * self.w[i] * ent(pair_tau(s[i], s[i]));
                for &j in &class[a + 1..] {
                    total += 2.0 * self.w[i] * self.w[j] * ent(pair_tau(s[i], s[j]));
                }
            }
        }
        total
    }

    fn objective(&self, s: &[f64]) -> f64 {
        1.0 - self.entropy_mass(s) / self.p_a
    }

    fn barrier_objective(&self, s: &[f64], mu: f64) -> f64 {
        let barrier: f64 = s.iter().map(|&x| x.ln() + (-x).ln_1p()).sum();
        self.objective(s) - mu * barrier
    }

    /// Gradient and per-class Hessian blocks of the objective.
    fn derivatives(&self, s: &[f64], grad: &mut [f64], blocks: &mut [DMatrix<f64>]) {
        let scale = -1.0 / self.p_a;
        for (class, block) in self.classes.iter().zip(blocks.iter_mut()) {
            let dense = class.len() <= DENSE_BLOCK_LIMIT;
            block.fill(0.0);
            for (a, &k) in class.iter().enumerate() {
                let mut gk = 0.0;
                let mut hkk = 0.0;
                for (b, &j) in class.iter().enumerate() {
                    let t = pair_tau(s[k], s[j]);
                    let d1 = ent_d1(t);
                    let d2 = ent_d2(t);
                    let wj = self.w[j];
                    gk += wj * d1 * (1.0 - s[j]);
                    if j == k {
                        hkk += wj * (d2 * (1.0 - s[k]).powi(2) - d1);
                    } else {
                        hkk += 0.5 * wj * d2 * (1.0 - s[j]).powi(2);
                        if dense {
                            block[(a, b)] = scale
                                * self.w[k]
                                * wj
                                * (0.5 * d2 * (1.0 - s[k]) * (1.0 - s[j]) - d1);
                        }
                    }
                }
                grad[k] = scale * self.w[k] * gk;
                block[(a, a)] = scale * self.w[k] * hkk;
            }
        }
    }

    /// Weighted projection onto `{0 ≤ s ≤ 1, Σ w s = b}`.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let mass = |lambda: f64| -> f64 {
            y.iter()
                .zip(&self.w)
                .map(|(&yi, &wi)| wi * (yi - lambda).clamp(0.0, 1.0))
                .sum()
        };
        let (mut lo, mut hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        lo -= 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(mid) > self.b {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let mut out: Vec<f64> = y.iter().map(|&v| (v - lambda).clamp(0.0, 1.0)).collect();
        self.repair(&mut out);
        out
    }

    /// Removes a rounding-level constraint residual through one coordinate with room.
    fn repair(&self, s: &mut [f64]) {
        let residual = self.b - s.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
        if residual == 0.0 {
            return;
        }
        let target = (0..s.len())
            .filter(|&k| (0.0..=1.0).contains(&(s[k] + residual / self.w[k])))
            .max_by(|&a, &b| self.w[a].total_cmp(&self.w[b]));
        if let Some(k) = target {
            s[k] += residual / self.w[k];
        }
    }

    /// Newton direction for the barrier problem restricted to `Σ w d = 0`.
    /// Returns the direction and the Newton decrement.
    fn newton_direction(
        &self,
        s: &[f64],
        mu: f64,
        grad: &mut [f64],
        blocks: &mut [DMatrix<f64>],
    ) -> (Vec<f64>, f64) {
        self.derivatives(s, grad, blocks);
        let n = self.n();
        let mut g = vec![0.0; n];
        for k in 0..n {
            g[k] = grad[k] - mu * (1.0 / s[k] - 1.0 / (1.0 - s[k]));
        }
        let mut hinv_g = vec![0.0; n];
        let mut hinv_w = vec![0.0; n];
        for (class, block) in self.classes.iter().zip(blocks.iter_mut()) {
            for (a, &k) in class.iter().enumerate() {
                block[(a, a)] += mu * (1.0 / (s[k] * s[k]) + 1.0 / ((1.0 - s[k]) * (1.0 - s[k])));
            }
            let gb = DVector::from_iterator(class.len(), class.iter().map(|&k| g[k]));
            let wb = DVector::from_iterator(class.len(), class.iter().map(|&k| self.w[k]));
            let (xg, xw) = if let Some(ch) = (class.len() <= DENSE_BLOCK_LIMIT)
                .then(|| block.clone().cholesky())
                .flatten()
            {
                (ch.solve(&gb), ch.solve(&wb))
            } else if class.len() <= DENSE_BLOCK_LIMIT {
                let eig = SymmetricEigen::new(block.clone());
                let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let floor = (top * 1e-12).max(1e-300);
                let inv = eig.eigenvalues.map(|v| 1.0 / v.abs().max(floor));
                let apply = |r: &DVector<f64>| -> DVector<f64> {
                    let c = eig.eigenvectors.transpose() * r;
                    &eig.eigenvectors * c.component_mul(&inv)
                };
                (apply(&gb), apply(&wb))
            } else {
                let diag: Vec<f64> = (0..class.len())
                    .map(|a| block[(a, a)].abs().max(1e-300))
                    .collect();
                (
                    DVector::from_iterator(class.len(), (0..class.len()).map(|a| gb[a] / diag[a])),
                    DVector::from_iterator(class.len(), (0..class.len()).map(|a| wb[a] / diag[a])),
                )
            };
            for (a, &k) in class.iter().enumerate() {
                hinv_g[k] = xg[a];
                hinv_w[k] = xw[a];
            }
        }
        let wg: f64 = (0..n).map(|k| self.w[k] * hinv_g[k]).sum();
        let ww: f64 = (0..n).map(|k| self.w[k] * hinv_w[k]).sum();
        let eta = -wg / ww;
        let d: Vec<f64> = (0..n).map(|k| -(hinv_g[k] + eta * hinv_w[k])).collect();
        let decrement = -(0..n).map(|k| g[k] * d[k]).sum::<f64>();
        (d, decrement)
    }

    fn workspace(&self) -> (Vec<f64>, Vec<DMatrix<f64>>) {
        let blocks = self
            .classes
            .iter()
            .map(|c| DMatrix::zeros(c.len(), c.len()))
            .collect();
        (vec![0.0; self.n()], blocks)
    }

    /// Strictly interior point derived from a start.
    fn interior(&self, start: &[f64]) -> Vec<f64> {
        self.project(start)
            .into_iter()
            .map(|x| 0.9 * x + 0.1 * self.b)
            .collect()
    }

    /// Damped Newton on the barrier problem at weight `mu`.
    fn center(
        &self,
        s: &mut Vec<f64>,
        mu: f64,
        cfg: &OptimizerConfig,
        ws: &mut (Vec<f64>, Vec<DMatrix<f64>>),
    ) {
        let n = self.n();
        let mut trial = vec![0.0; n];
        for _ in 0..cfg.max_iter {
            let (d, decrement) = self.newton_direction(s, mu, &mut ws.0, &mut ws.1);
            if !decrement.is_finite() || decrement <= cfg.tol {
                break;
            }
            let mut alpha: f64 = 1.0;
            for k in 0..n {
                if d[k] < 0.0 {
                    alpha = alpha.min(0.995 * s[k] / -d[k]);
                } else if d[k] > 0.0 {
                    alpha = alpha.min(0.995 * (1.0 - s[k]) / d[k]);
                }
            }
            let f0 = self.barrier_objective(s, mu);
            let mut accepted = false;
            for _ in 0..60 {
                for k in 0..n {
                    trial[k] = s[k] + alpha * d[k];
                }
                if self.barrier_objective(&trial, mu) <= f0 - 1e-4 * alpha * decrement {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(s, &mut trial);
        }
    }

    /// Follows the barrier path from every start. Starts that coincide
    /// after the first centering step share the rest of the path.
    fn solve(&self, cfg: &OptimizerConfig) -> Vec<f64> {
        let mut ws = self.workspace();
        let mu = INITIAL_BARRIER;
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in self.starts(cfg) {
            let mut raw = self.project(&start);
            self.repair(&mut raw);
            let f = self.objective(&raw);
            if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
                best = Some((raw, f));
            }
            let mut s = self.interior(&start);
            self.center(&mut s, mu, cfg, &mut ws);
            let dup = points.iter().any(|p| {
                p.iter()
                    .zip(&s)
                    .all(|(a, b)| (a - b).abs() <= MERGE_TOL * (a.abs() + b.abs()))
            });
            if !dup {
                points.push(s);
            }
        }
        for mut s in points {
            let mut level = mu;
            while level > cfg.final_barrier {
                level *= BARRIER_SHRINK;
                self.center(&mut s, level, cfg, &mut ws);
            }
            self.repair(&mut s);
            let f = self.objective(&s);
            if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
                best = Some((s, f));
            }
        }
        best.expect("at least one start").0
    }

    fn starts(&self, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut starts = vec![vec![self.b; n]];
        let mut by_w: Vec<usize> = (0..n).collect();
        by_w.sort_by(|&a, &b| self.w[a].total_cmp(&self.w[b]));
        let mut by_v: Vec<usize> = (0..n).collect();
        let mut by_errors: Vec<usize> = (0..n).collect();
        by_errors.sort_by_key(|&k| (self.active[k].count_ones(), self.active[k]));
        for order in [&mut by_w, &mut by_v, &mut by_errors] {
            starts.push(self.greedy_vertex(order));
            order.reverse();
            starts.push(self.greedy_vertex(order));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        while starts.len() < cfg.starts.max(1) {
            starts.push((0..n).map(|_| rng.random::<f64>()).collect());
        }
        starts.truncate(cfg.starts.max(1));
        starts
    }

    /// Vertex of the feasible polytope obtained by saturating coordinates in `order`.
    fn greedy_vertex(&self, order: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.n()];
        let mut budget = self.b;
        for &k in order {
            if budget <= 0.0 {
                break;
            }
            let take = (budget / self.w[k]).min(1.0);
            s[k] = take;
            budget -= take * self.w[k];
        }
        s
    }

    fn to_nu(&self, s: &[f64], probs: &[f64]) -> Vec<f64> {
        let mut nu = vec![0.0; probs.len()];
        for (k, &v) in self.active.iter().enumerate() {
            let half = 0.5 * probs[v] * s[k].clamp(0.0, 1.0);
            nu[v] = if self.flipped { probs[v] - half } else { half };
        }
        nu
    }
}

pub(super) fn minimize(
    d: &ErrorDistribution,
    mask: CadMask,
    p_a: f64,
    cfg: &OptimizerConfig,
) -> Minimum {
    let prob = Problem::new(d, mask, p_a);
    let n = prob.n();
    let s = if prob.b <= 0.0 {
        vec![0.0; n]
    } else if prob.b >= 1.0 {
        vec![1.0; n]
    } else {
        prob.solve(cfg)
    };
    Minimum {
        nu: prob.to_nu(&s, d.probs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseScenario;

    /// Central finite differences of the objective against the analytic
    /// gradient and Hessian blocks.
    #[test]
    fn derivatives_match_finite_differences() {
        let d = ErrorDistribution::from_scenario(
            &NoiseScenario::new(vec![0.12, 0.05, 0.2], 0.1).unwrap(),
        );
        let mask = CadMask::parse("100", 3).unwrap();
        let prob = Problem::new(&d, mask, super::super::p_accept(&d, mask).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..prob.n()).map(|_| rng.random_range(0.1..0.9)).collect();
        let mut grad = vec![0.0; prob.n()];
        let mut blocks: Vec<DMatrix<f64>> = prob
            .classes
            .iter()
            .map(|c| DMatrix::zeros(c.len(), c.len()))
            .collect();
        prob.derivatives(&s, &mut grad, &mut blocks);
        let eps = 1e-5;
        let bump = |k: usize, e: f64| {
            let mut t = s.clone();
            t[k] += e;
            t
        };
        for k in 0..prob.n() {
            let fd = (prob.objective(&bump(k, eps)) - prob.objective(&bump(k, -eps))) / (2.0 * eps);
            assert!((fd - grad[k]).abs() < 1e-8, "grad {k}: {fd} vs {}", grad[k]);
        }
        for (class, block) in prob.classes.iter().zip(&blocks) {
            for (a, &k) in class.iter().enumerate() {
                for (b, &j) in class.iter().enumerate() {
                    let f = |ek: f64, ej: f64| {
                        let mut t = s.clone();
                        t[k] += ek;
                        t[j] += ej;
                        prob.objective(&t)
                    };
                    let fd = (f(eps, eps) - f(eps, -eps) - f(-eps, eps) + f(-eps, -eps))
                        / (4.0 * eps * eps);
                    assert!(
                        (fd - block[(a, b)]).abs() < 1e-4 * (1.0 + fd.abs()),
                        "hess {k},{j}: {fd} vs {}",
                        block[(a, b)]
                    );
                }
            }
        }
    }
}
