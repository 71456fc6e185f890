//! Exact brute-force distributions and transition matrices on tiny
//! instances, used as ground truth by the verification suite.
//!
//! States are enumerated as base-`levels` numbers over the column-major site
//! order, site 0 least significant. The posterior that both samplers target
//! is
//!
//! ```text
//! pi_post(x) prop exp( beta J sum_i sum_{j~i} 1{x_i = x_j}
//!                      - (1/(2 sigma^2)) sum_i (lum(g_i) - lum(x_i))^2 )
//! ```
//!
//! whose single-site conditionals are exactly `softmax(E_i)`. The lazy-PCA
//! stationary measure is the closed form `Z_x / Z` of the symmetric pair
//! energy
//!
//! ```text
//! S(x, w) = -beta J C(x, w) + (phi(x) + phi(w)) / 2 + beta q ||x - w||
//! ```
//!
//! with `C(x, w) = sum_i sum_{j~i} 1{w_i = x_j}` and `phi` the data sum.
//! `S` differs from the negated log transition weights only by a function of
//! `x`, so it induces the same kernel while being symmetric, which is what
//! makes detailed balance exact.

use thiserror::Error;

use crate::image::{luminance_table, LevelImage};
use crate::lattice::NeighborTable;
use crate::model::{NoiseModel, PcaParams, PriorParams, ScoreKernel};
use crate::samplers::pca_transform;

/// Hard cap on the enumerable state space.
pub const MAX_STATES: usize = 1 << 18;
/// Cap for the dense matrix operations (S^2 doubles).
pub const MAX_MATRIX_STATES: usize = 1 << 10;
/// Most sites an instance may have.
pub const MAX_SITES: usize = 12;

const POWER_ITER_RESIDUAL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("state space too large: {0} sites, {1} states")]
    TooLarge(usize, u128),
    #[error("state space too large for dense matrices: {0} states")]
    TooLargeForMatrix(usize),
    #[error("pair energy not symmetric: max |S(x,w) - S(w,x)| = {0}")]
    AsymmetricPairEnergy(f64),
    #[error("instance has no PCA parameters")]
    MissingPcaParams,
    #[error("probability vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("power iteration did not reach residual {0} in {1} iterations")]
    NoConvergence(f64, usize),
}

/// A posterior instance small enough to enumerate exhaustively.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub g: LevelImage,
    pub prior: PriorParams,
    pub noise: NoiseModel,
    pub beta: f64,
    pub pca: Option<PcaParams>,
}

impl SmallInstance {
    pub fn new(
        g: LevelImage,
        prior: PriorParams,
        noise: NoiseModel,
        beta: f64,
        pca: Option<PcaParams>,
    ) -> Result<Self, OracleError> {
        let sites = g.len();
        let states = (g.levels() as u128).pow(sites as u32);
        if sites > MAX_SITES || states > MAX_STATES as u128 {
            return Err(OracleError::TooLarge(sites, states));
        }
        Ok(SmallInstance { g, prior, noise, beta, pca })
    }

    pub fn sites(&self) -> usize {
        self.g.len()
    }

    pub fn state_count(&self) -> usize {
        (self.g.levels() as usize).pow(self.sites() as u32)
    }

    /// Writes the level vector of state `index` into `out`.
    pub fn decode(&self, index: usize, out: &mut [u16]) {
        let l = self.g.levels() as usize;
        let mut rest = index;
        for slot in out.iter_mut() {
            *slot = (rest % l) as u16;
            rest /= l;
        }
    }

    /// Inverse of [`SmallInstance::decode`].
    pub fn encode(&self, levels: &[u16]) -> usize {
        let l = self.g.levels() as usize;
        levels.iter().rev().fold(0usize, |acc, &v| acc * l + v as usize)
    }

    fn ntab(&self) -> NeighborTable {
        NeighborTable::new(self.prior.neighborhood, self.g.width(), self.g.height())
    }

    /// Data sum `phi(x) = (1/(2 sigma^2)) sum_i (lum(g_i) - lum(x_i))^2`.
    fn phi(&self, levels: &[u16], lum: &[f64]) -> f64 {
        let inv = 1.0 / (2.0 * self.noise.sigma * self.noise.sigma);
        let mut d = 0.0;
        for i in 0..levels.len() {
            let r = self.g.luminance_at(i) - lum[levels[i] as usize];
            d += r * r;
        }
        inv * d
    }

    /// Ordered agreeing-neighbor count `C(x, w)`.
    fn cross_count(&self, ntab: &NeighborTable, x: &[u16], w: &[u16]) -> usize {
        let mut c = 0;
        for i in 0..x.len() {
            for &j in ntab.neighbors_of(i) {
                if w[i] == x[j as usize] {
                    c += 1;
                }
            }
        }
        c
    }

    fn require_matrix_size(&self) -> Result<usize, OracleError> {
        let s = self.state_count();
        if s > MAX_MATRIX_STATES {
            return Err(OracleError::TooLargeForMatrix(s));
        }
        Ok(s)
    }
}

/// Exact posterior over all states, normalized.
pub fn enumerate_posterior(inst: &SmallInstance) -> Result<Vec<f64>, OracleError> {
    let s = inst.state_count();
    let n = inst.sites();
    let ntab = inst.ntab();
    let lum = luminance_table(inst.g.levels());
    let mut buf = vec![0u16; n];
    let mut logw = Vec::with_capacity(s);
    for idx in 0..s {
        inst.decode(idx, &mut buf);
        let agree = inst.cross_count(&ntab, &buf, &buf);
        logw.push(inst.beta * inst.prior.coupling * agree as f64 - inst.phi(&buf, &lum));
    }
    Ok(normalize_log_weights(logw))
}

/// Dense single-site Gibbs kernel at `site`, row-major `S x S`.
pub fn gibbs_site_kernel(inst: &SmallInstance, site: usize) -> Result<Vec<f64>, OracleError> {
    let s = inst.require_matrix_size()?;
    let n = inst.sites();
    let l = inst.g.levels() as usize;
    let kernel = ScoreKernel::posterior(&inst.g, &inst.prior, &inst.noise)
        .expect("instance parameters already validated");
    let mut mat = vec![0.0; s * s];
    let mut buf = vec![0u16; n];
    let mut scores = vec![0.0; l];
    // Stride of site `i` in the state index is l^i.
    let stride = l.pow(site as u32);
    for idx in 0..s {
        inst.decode(idx, &mut buf);
        kernel.scores_into(&buf, site, inst.beta, &mut scores);
        let probs = softmax(&scores);
        let base = idx - buf[site] as usize * stride;
        for (lv, p) in probs.iter().enumerate() {
            mat[idx * s + base + lv * stride] = *p;
        }
    }
    Ok(mat)
}

/// Dense lazy-PCA transition matrix, row-major `S x S`; rows are products of
/// the per-site distributions.
pub fn pca_transition_matrix(inst: &SmallInstance) -> Result<Vec<f64>, OracleError> {
    let pca = inst.pca.ok_or(OracleError::MissingPcaParams)?;
    let s = inst.require_matrix_size()?;
    let n = inst.sites();
    let l = inst.g.levels() as usize;
    let kernel = ScoreKernel::posterior(&inst.g, &inst.prior, &inst.noise)
        .expect("instance parameters already validated");
    let lum = luminance_table(inst.g.levels());
    let mut mat = vec![0.0; s * s];
    let mut x = vec![0u16; n];
    let mut w = vec![0u16; n];
    let mut scores = vec![0.0; l];
    let mut site_probs = vec![0.0; n * l];
    for row in 0..s {
        inst.decode(row, &mut x);
        for i in 0..n {
            kernel.scores_into(&x, i, inst.beta, &mut scores);
            pca_transform(&mut scores, &pca, &lum, x[i], inst.beta);
            site_probs[i * l..(i + 1) * l].copy_from_slice(&softmax(&scores));
        }
        for col in 0..s {
            inst.decode(col, &mut w);
            let mut p = 1.0;
            for i in 0..n {
                p *= site_probs[i * l + w[i] as usize];
            }
            mat[row * s + col] = p;
        }
    }
    Ok(mat)
}

/// Closed-form stationary measure `Z_x / Z` of the lazy PCA.
///
/// Verifies the symmetry of the pair energy exhaustively before using it;
/// an asymmetry signals a model bug and is returned as an error.
pub fn pca_stationary_closed_form(inst: &SmallInstance) -> Result<Vec<f64>, OracleError> {
    let pca = inst.pca.ok_or(OracleError::MissingPcaParams)?;
    let s = inst.require_matrix_size()?;
    let n = inst.sites();
    let ntab = inst.ntab();
    let lum = luminance_table(inst.g.levels());

    let mut states = vec![0u16; s * n];
    let mut phi = vec![0.0; s];
    for idx in 0..s {
        let buf = &mut states[idx * n..(idx + 1) * n];
        let l = inst.g.levels() as usize;
        let mut rest = idx;
        for slot in buf.iter_mut() {
            *slot = (rest % l) as u16;
            rest /= l;
        }
        phi[idx] = inst.phi(buf, &lum);
    }

    let pair_energy = |xi: usize, wi: usize| -> f64 {
        let x = &states[xi * n..(xi + 1) * n];
        let w = &states[wi * n..(wi + 1) * n];
        let cross = inst.cross_count(&ntab, x, w) as f64;
        let mut inertia = 0.0;
        for i in 0..n {
            inertia += pca.cost(lum[x[i] as usize], lum[w[i] as usize]);
        }
        -inst.beta * inst.prior.coupling * cross
            + 0.5 * (phi[xi] + phi[wi])
            + inst.beta * inertia
    };

    let mut max_asym = 0.0f64;
    for xi in 0..s {
        for wi in (xi + 1)..s {
            max_asym = max_asym.max((pair_energy(xi, wi) - pair_energy(wi, xi)).abs());
        }
    }
    if max_asym > 1e-12 {
        return Err(OracleError::AsymmetricPairEnergy(max_asym));
    }

    let mut log_zx = Vec::with_capacity(s);
    for xi in 0..s {
        let energies: Vec<f64> = (0..s).map(|wi| -pair_energy(xi, wi)).collect();
        log_zx.push(log_sum_exp(&energies));
    }
    Ok(normalize_log_weights(log_zx))
}

/// Dominant left eigenvector of a row-stochastic matrix by power iteration.
pub fn stationary_by_power_iteration(matrix: &[f64], states: usize) -> Result<Vec<f64>, OracleError> {
    assert_eq!(matrix.len(), states * states);
    let mut v = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    for _ in 0..POWER_ITER_MAX {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (row, &mass) in v.iter().enumerate() {
            let r = &matrix[row * states..(row + 1) * states];
            for (col, &p) in r.iter().enumerate() {
                next[col] += mass * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let residual: f64 = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if residual <= POWER_ITER_RESIDUAL {
            return Ok(v);
        }
    }
    Err(OracleError::NoConvergence(POWER_ITER_RESIDUAL, POWER_ITER_MAX))
}

/// Total-variation distance `(1/2) sum |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, OracleError> {
    if p.len() != q.len() {
        return Err(OracleError::LengthMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = scores.iter().map(|&s| (s - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn normalize_log_weights(logw: Vec<f64>) -> Vec<f64> {
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|&lw| (lw - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + vals.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AnnealSchedule;

    fn checkerboard_3x3() -> SmallInstance {
        let g = LevelImage::new(
            3,
            3,
            2,
            (0..9u16).map(|i| ((i % 3) + (i / 3)) % 2).collect(),
        )
        .unwrap();
        SmallInstance::new(
            g,
            PriorParams::new(1.0 / 3.0).unwrap(),
            NoiseModel::new(0.25).unwrap(),
            1.0,
            Some(PcaParams::new(0.51, 0.0).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn size_limits_are_enforced() {
        let g = LevelImage::constant(4, 4, 2, 0).unwrap();
        let r = SmallInstance::new(
            g,
            PriorParams::new(1.0).unwrap(),
            NoiseModel::new(0.25).unwrap(),
            1.0,
            None,
        );
        assert!(matches!(r, Err(OracleError::TooLarge(16, _))));
    }

    #[test]
    fn encode_decode_round_trip() {
        let inst = checkerboard_3x3();
        let mut buf = vec![0u16; inst.sites()];
        for idx in [0usize, 1, 255, 511] {
            inst.decode(idx, &mut buf);
            assert_eq!(inst.encode(&buf), idx);
        }
    }

    #[test]
    fn posterior_sums_to_one() {
        let post = enumerate_posterior(&checkerboard_3x3()).unwrap();
        let total: f64 = post.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(post.iter().all(|&p| p > 0.0));
    }

    #[test]
    fn single_pixel_posterior_direct_arithmetic() {
        // 1x1, l=2: two-point distribution prop exp(-(1/(2 sigma^2))(g - s)^2).
        let g = LevelImage::constant(1, 1, 2, 1).unwrap();
        let inst = SmallInstance::new(
            g,
            PriorParams::new(1.0 / 3.0).unwrap(),
            NoiseModel::new(0.5).unwrap(),
            1.0,
            None,
        )
        .unwrap();
        let post = enumerate_posterior(&inst).unwrap();
        let w0 = (-2.0f64).exp(); // -(1/(2*0.25)) * 1
        let want0 = w0 / (w0 + 1.0);
        assert!((post[0] - want0).abs() < 1e-15);
        assert!((post[1] - (1.0 - want0)).abs() < 1e-15);
    }

    #[test]
    fn flat_limit_when_both_terms_vanish() {
        // beta -> 0 kills the coupling; sigma -> infinity kills the data
        // term; together the posterior is uniform.
        let g = LevelImage::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        let inst = SmallInstance::new(
            g,
            PriorParams::new(1.0 / 3.0).unwrap(),
            NoiseModel::new(1e6).unwrap(),
            1e-12,
            None,
        )
        .unwrap();
        let post = enumerate_posterior(&inst).unwrap();
        for &p in &post {
            assert!((p - 1.0 / 16.0).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn transition_rows_are_stochastic_and_positive() {
        let inst = checkerboard_3x3();
        let s = inst.state_count();
        let mat = pca_transition_matrix(&inst).unwrap();
        for row in 0..s {
            let r = &mat[row * s..(row + 1) * s];
            let total: f64 = r.iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "row {row} sums to {total}");
            assert!(r.iter().all(|&p| p > 0.0), "row {row} has a zero entry");
        }
    }

    #[test]
    fn huge_inertia_freezes_the_matrix() {
        let g = LevelImage::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        let inst = SmallInstance::new(
            g,
            PriorParams::new(1.0 / 3.0).unwrap(),
            NoiseModel::new(0.25).unwrap(),
            1.0,
            Some(PcaParams::new(50.0, 0.0).unwrap()),
        )
        .unwrap();
        let s = inst.state_count();
        let mat = pca_transition_matrix(&inst).unwrap();
        for row in 0..s {
            let off: f64 = (0..s)
                .filter(|&c| c != row)
                .map(|c| mat[row * s + c])
                .sum();
            assert!(off < 1e-6, "row {row} off-diagonal mass {off}");
        }
    }

    #[test]
    fn closed_form_matches_power_iteration_and_balances() {
        let inst = checkerboard_3x3();
        let s = inst.state_count();
        let pi = pca_stationary_closed_form(&inst).unwrap();
        let mat = pca_transition_matrix(&inst).unwrap();
        let eig = stationary_by_power_iteration(&mat, s).unwrap();
        assert!(tv_distance(&pi, &eig).unwrap() <= 1e-10);
        let mut worst = 0.0f64;
        for x in 0..s {
            for w in 0..s {
                let fwd = pi[x] * mat[x * s + w];
                let bwd = pi[w] * mat[w * s + x];
                worst = worst.max((fwd - bwd).abs());
            }
        }
        assert!(worst <= 1e-12, "detailed balance violation {worst}");
    }

    #[test]
    fn gibbs_site_kernels_preserve_the_posterior() {
        let inst = checkerboard_3x3();
        let s = inst.state_count();
        let post = enumerate_posterior(&inst).unwrap();
        for site in 0..inst.sites() {
            let k = gibbs_site_kernel(&inst, site).unwrap();
            let mut out = vec![0.0; s];
            for (row, &mass) in post.iter().enumerate() {
                for col in 0..s {
                    out[col] += mass * k[row * s + col];
                }
            }
            let worst = out
                .iter()
                .zip(&post)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-12, "site {site} residual {worst}");
        }
    }

    #[test]
    fn tv_distance_basics() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.5, 0.5], &[0.9, 0.1]).unwrap() - 0.4).abs() < 1e-15);
        assert!(tv_distance(&[0.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn schedule_type_is_compatible_with_fixed_beta_runs() {
        // Guard: the oracle instances run at fixed beta; make sure the
        // constant schedule helper matches beta_at everywhere.
        let s = AnnealSchedule::constant(1.4, 100).unwrap();
        assert_eq!(s.beta_at(0).unwrap(), 1.4);
        assert_eq!(s.beta_at(99).unwrap(), 1.4);
    }
}
