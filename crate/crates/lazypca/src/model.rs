//! Prior and posterior energy model.
//!
//! The prior couples each pixel to its Moore neighbors through the attractive
//! pair potential `V(z, w) = -J` when `z = w` and `+J` otherwise. Observations
//! are the truth plus Gaussian luminance noise, so the posterior adds the
//! quadratic data term `(1/(2 sigma^2)) (g_i - x_i)^2` in luminance units.
//!
//! Both samplers share one per-site score kernel,
//!
//! ```text
//! E_i(s) = 2 beta J n_i(s) - (1/(2 sigma^2)) (lum(g_i) - lum(s))^2
//! ```
//!
//! where `n_i(s)` counts neighbors of `i` currently at level `s`. Annealing
//! scales only the coupling term; the data term is temperature-free. The
//! softmax of `E_i` is exactly the single-site conditional of the posterior
//! the chains target (checked against full enumeration in the test suite).
//!
//! `prior_energy`/`posterior_energy` report energies in the per-site
//! double-sum convention, where every unordered neighbor pair contributes
//! once from each endpoint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{luminance_table, ImageError, LevelImage};
use crate::lattice::{NeighborTable, Neighborhood};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("coupling J must be positive, got {0}")]
    BadCoupling(f64),
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("schedule period must be positive")]
    BadPeriod,
    #[error("beta0 must be positive, got {0}")]
    BadBeta(f64),
    #[error("increment must be nonnegative, got {0}")]
    BadIncrement(f64),
    #[error("inertia q must be nonnegative, got {0}")]
    BadInertia(f64),
    #[error("norm exponent p must be nonnegative, got {0}")]
    BadExponent(f64),
    #[error("step {0} outside schedule of {1} steps")]
    StepOutOfRange(u32, u32),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Smoothing prior: coupling strength and neighborhood.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PriorParams {
    pub coupling: f64,
    pub neighborhood: Neighborhood,
}

impl PriorParams {
    pub fn new(coupling: f64) -> Result<Self, ModelError> {
        if !(coupling > 0.0) {
            return Err(ModelError::BadCoupling(coupling));
        }
        Ok(PriorParams { coupling, neighborhood: Neighborhood::Moore8 })
    }
}

/// Additive Gaussian observation noise on the luminance scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mean: f64,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self, ModelError> {
        if !(sigma > 0.0) {
            return Err(ModelError::BadSigma(sigma));
        }
        Ok(NoiseModel { mean: 0.0, sigma })
    }
}

/// Piecewise-constant inverse-temperature schedule:
/// `beta(t) = beta0 + increment * floor(t / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub beta0: f64,
    pub increment: f64,
    pub period: u32,
    pub total_steps: u32,
}

impl AnnealSchedule {
    pub fn new(
        beta0: f64,
        increment: f64,
        period: u32,
        total_steps: u32,
    ) -> Result<Self, ModelError> {
        if !(beta0 > 0.0) {
            return Err(ModelError::BadBeta(beta0));
        }
        if !(increment >= 0.0) {
            return Err(ModelError::BadIncrement(increment));
        }
        if period == 0 {
            return Err(ModelError::BadPeriod);
        }
        Ok(AnnealSchedule { beta0, increment, period, total_steps })
    }

    /// Constant-temperature schedule, used by the oracle checks.
    pub fn constant(beta: f64, total_steps: u32) -> Result<Self, ModelError> {
        Self::new(beta, 0.0, 1, total_steps)
    }

    pub fn beta_at(&self, step: u32) -> Result<f64, ModelError> {
        if step >= self.total_steps {
            return Err(ModelError::StepOutOfRange(step, self.total_steps));
        }
        Ok(self.beta0 + self.increment * (step / self.period) as f64)
    }
}

/// Lazy-PCA parameters: inertia weight and inertial norm exponent.
///
/// With `p = 0` (the only exercised value, convention `0^0 = 0`) the inertial
/// cost of a site is `q` whenever its level changes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PcaParams {
    pub inertia: f64,
    pub norm_exponent: f64,
}

impl PcaParams {
    pub fn new(inertia: f64, norm_exponent: f64) -> Result<Self, ModelError> {
        if !(inertia >= 0.0) {
            return Err(ModelError::BadInertia(inertia));
        }
        if !(norm_exponent >= 0.0) {
            return Err(ModelError::BadExponent(norm_exponent));
        }
        Ok(PcaParams { inertia, norm_exponent })
    }

    /// Inertial cost `q |a - b|^p` in luminance units, with `0^0 = 0`.
    #[inline]
    pub fn cost(&self, a: f64, b: f64) -> f64 {
        if self.norm_exponent == 0.0 {
            if a == b {
                0.0
            } else {
                self.inertia
            }
        } else {
            self.inertia * (a - b).abs().powf(self.norm_exponent)
        }
    }
}

/// Pair potential: `-J` on agreement, `+J` otherwise.
#[inline]
pub fn pair_potential(z: u16, w: u16, coupling: f64) -> f64 {
    if z == w {
        -coupling
    } else {
        coupling
    }
}

/// Prior energy `H(x) = sum_i sum_{j~i} V(x_j, x_i)` (each unordered pair
/// twice, once from each endpoint).
pub fn prior_energy(x: &LevelImage, prior: &PriorParams) -> f64 {
    let ntab = NeighborTable::new(prior.neighborhood, x.width(), x.height());
    prior_energy_with(x, prior, &ntab)
}

pub(crate) fn prior_energy_with(x: &LevelImage, prior: &PriorParams, ntab: &NeighborTable) -> f64 {
    let data = x.data();
    let mut h = 0.0;
    for i in 0..data.len() {
        for &j in ntab.neighbors_of(i) {
            h += pair_potential(data[j as usize], data[i], prior.coupling);
        }
    }
    h
}

/// Posterior energy `H_g(x) = H(x) + (1/beta) (1/(2 sigma^2)) sum_i
/// (lum(g_i) - lum(x_i))^2`. Note that `beta * H_g` carries the data term
/// unscaled by `beta`.
pub fn posterior_energy(
    x: &LevelImage,
    g: &LevelImage,
    prior: &PriorParams,
    noise: &NoiseModel,
    beta: f64,
) -> Result<f64, ModelError> {
    x.check_same_shape(g)?;
    if !(beta > 0.0) {
        return Err(ModelError::BadBeta(beta));
    }
    let data_sum: f64 = (0..x.len())
        .map(|i| {
            let d = g.luminance_at(i) - x.luminance_at(i);
            d * d
        })
        .sum();
    Ok(prior_energy(x, prior) + data_sum / (beta * 2.0 * noise.sigma * noise.sigma))
}

/// Shared per-site score kernel of both samplers.
///
/// Holds the neighbor table and the precomputed data-term row for every
/// observed level, so scoring a site is `O(neighbors + levels)`.
pub struct ScoreKernel {
    ntab: NeighborTable,
    levels: usize,
    coupling: f64,
    /// `data_term[gl * levels + s] = -(1/(2 sigma^2)) (lum(gl) - lum(s))^2`,
    /// all zero for the prior-only kernel.
    data_term: Vec<f64>,
    /// Observed level per site; empty for the prior-only kernel.
    g_levels: Vec<u16>,
}

impl ScoreKernel {
    /// Posterior kernel against the observation `g`.
    pub fn posterior(
        g: &LevelImage,
        prior: &PriorParams,
        noise: &NoiseModel,
    ) -> Result<Self, ModelError> {
        let levels = g.levels() as usize;
        let lum = luminance_table(g.levels());
        let inv = 1.0 / (2.0 * noise.sigma * noise.sigma);
        let mut data_term = vec![0.0; levels * levels];
        for gl in 0..levels {
            for s in 0..levels {
                let d = lum[gl] - lum[s];
                data_term[gl * levels + s] = -inv * d * d;
            }
        }
        Ok(ScoreKernel {
            ntab: NeighborTable::new(prior.neighborhood, g.width(), g.height()),
            levels,
            coupling: prior.coupling,
            data_term,
            g_levels: g.data().to_vec(),
        })
    }

    /// Prior-only kernel (no observation; formally sigma -> infinity).
    pub fn prior_only(
        width: usize,
        height: usize,
        levels: u16,
        prior: &PriorParams,
    ) -> Self {
        ScoreKernel {
            ntab: NeighborTable::new(prior.neighborhood, width, height),
            levels: levels as usize,
            coupling: prior.coupling,
            data_term: vec![0.0; levels as usize * levels as usize],
            g_levels: Vec::new(),
        }
    }

    pub fn sites(&self) -> usize {
        self.ntab.sites()
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Writes `E_i(s)` for every candidate level `s` into `out`, reading the
    /// neighbor levels from `x_levels`.
    #[inline]
    pub fn scores_into(&self, x_levels: &[u16], site: usize, beta: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.levels);
        let row = if self.g_levels.is_empty() {
            &self.data_term[..self.levels]
        } else {
            let gl = self.g_levels[site] as usize;
            &self.data_term[gl * self.levels..(gl + 1) * self.levels]
        };
        out.copy_from_slice(row);
        let two_beta_j = 2.0 * beta * self.coupling;
        for &j in self.ntab.neighbors_of(site) {
            out[x_levels[j as usize] as usize] += two_beta_j;
        }
    }
}

/// Score vector `E_i(s)` at one site; convenience wrapper over [`ScoreKernel`].
pub fn local_site_scores(
    x: &LevelImage,
    g: &LevelImage,
    site: (usize, usize),
    prior: &PriorParams,
    noise: &NoiseModel,
    beta: f64,
) -> Result<Vec<f64>, ModelError> {
    x.check_same_shape(g)?;
    let kernel = ScoreKernel::posterior(g, prior, noise)?;
    let mut out = vec![0.0; kernel.levels()];
    let i = crate::lattice::to_linear(site.0, site.1, x.height());
    kernel.scores_into(x.data(), i, beta, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> PriorParams {
        PriorParams::new(1.0 / 3.0).unwrap()
    }

    #[test]
    fn pair_potential_branches() {
        let j = 1.0 / 3.0;
        assert_eq!(pair_potential(3, 3, j), -j);
        assert_eq!(pair_potential(0, 4, j), j);
        for z in 0..5u16 {
            for w in 0..5u16 {
                assert_eq!(pair_potential(z, w, j), pair_potential(w, z, j));
            }
        }
    }

    #[test]
    fn prior_energy_constant_2x2() {
        // Each of the 4 sites has 3 agreeing neighbors: H = 4 * 3 * (-1/3).
        let img = LevelImage::constant(2, 2, 2, 1).unwrap();
        let h = prior_energy(&img, &prior());
        assert!((h - (-4.0)).abs() < 1e-12, "h = {h}");
    }

    #[test]
    fn prior_energy_single_site_is_zero() {
        let img = LevelImage::constant(1, 1, 2, 0).unwrap();
        assert_eq!(prior_energy(&img, &prior()), 0.0);
    }

    #[test]
    fn flipping_a_pixel_never_decreases_prior_energy() {
        let base = LevelImage::constant(3, 3, 3, 1).unwrap();
        let h0 = prior_energy(&base, &prior());
        for i in 0..9 {
            for s in 0..3u16 {
                let mut d = base.data().to_vec();
                d[i] = s;
                let img = base.with_data(d).unwrap();
                assert!(prior_energy(&img, &prior()) >= h0 - 1e-12);
            }
        }
    }

    #[test]
    fn prior_energy_invariant_under_level_relabeling() {
        let img = LevelImage::new(3, 2, 3, vec![0, 1, 2, 2, 0, 1]).unwrap();
        // Relabel 0->2, 1->0, 2->1.
        let perm = [2u16, 0, 1];
        let relabeled = img
            .with_data(img.data().iter().map(|&v| perm[v as usize]).collect())
            .unwrap();
        let a = prior_energy(&img, &prior());
        let b = prior_energy(&relabeled, &prior());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn posterior_equals_prior_on_zero_residual() {
        let img = LevelImage::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        let noise = NoiseModel::new(0.25).unwrap();
        let h = posterior_energy(&img, &img, &prior(), &noise, 1.7).unwrap();
        assert_eq!(h, prior_energy(&img, &prior()));
    }

    #[test]
    fn posterior_single_pixel_arithmetic() {
        // No neighbors; x = 0, g = 1 (l = 2), sigma = 0.25, beta = 1:
        // H_g = (1/(2*0.0625)) * 1 = 8.
        let x = LevelImage::constant(1, 1, 2, 0).unwrap();
        let g = LevelImage::constant(1, 1, 2, 1).unwrap();
        let noise = NoiseModel::new(0.25).unwrap();
        let h = posterior_energy(&x, &g, &prior(), &noise, 1.0).unwrap();
        assert!((h - 8.0).abs() < 1e-12, "h = {h}");
    }

    #[test]
    fn doubling_beta_halves_the_data_part() {
        let x = LevelImage::constant(1, 1, 2, 0).unwrap();
        let g = LevelImage::constant(1, 1, 2, 1).unwrap();
        let noise = NoiseModel::new(0.25).unwrap();
        let h1 = posterior_energy(&x, &g, &prior(), &noise, 1.0).unwrap();
        let h2 = posterior_energy(&x, &g, &prior(), &noise, 2.0).unwrap();
        assert!((h2 - h1 / 2.0).abs() < 1e-12);
        // beta * H_g is unchanged on the data part.
        assert!((2.0 * h2 - 1.0 * h1).abs() < 1e-12);
    }

    #[test]
    fn posterior_rejects_shape_mismatch() {
        let x = LevelImage::constant(2, 2, 2, 0).unwrap();
        let g = LevelImage::constant(2, 2, 3, 0).unwrap();
        let noise = NoiseModel::new(0.25).unwrap();
        assert!(posterior_energy(&x, &g, &prior(), &noise, 1.0).is_err());
    }

    #[test]
    fn scores_interior_site_arithmetic() {
        // Interior site with all 8 neighbors at level 1, beta=1, J=1/3,
        // sigma=0.25, g_i = level 1: E(1) - E(0) = 16/3 + 8.
        let mut d = vec![1u16; 9];
        d[4] = 0; // center of the 3x3 in column-major is index 4
        let x = LevelImage::new(3, 3, 2, d).unwrap();
        let g = LevelImage::constant(3, 3, 2, 1).unwrap();
        let noise = NoiseModel::new(0.25).unwrap();
        let e = local_site_scores(&x, &g, (1, 1), &prior(), &noise, 1.0).unwrap();
        let gap = e[1] - e[0];
        assert!((gap - (16.0 / 3.0 + 8.0)).abs() < 1e-12, "gap = {gap}");
    }

    #[test]
    fn scores_reduce_to_data_term_when_j_vanishes() {
        // J -> 0 is not a legal PriorParams; emulate with tiny J and check the
        // two-level scores collapse onto the symmetric data term when g sits
        // halfway between the two luminances. With l=2 there is no halfway
        // level, so check symmetry of the data term directly instead.
        let noise = NoiseModel::new(0.5).unwrap();
        let x = LevelImage::new(1, 2, 2, vec![0, 1]).unwrap();
        let tiny = PriorParams::new(1e-300).unwrap();
        let e = local_site_scores(&x, &x, (0, 0), &tiny, &noise, 1.0).unwrap();
        let d0 = e[0];
        let d1 = e[1] + 2.0 * 1e-300; // strip the lone neighbor contribution
        assert!((d0 - 0.0).abs() < 1e-15);
        assert!((d1 - (-2.0)).abs() < 1e-12); // -(1/(2*0.25)) * 1
    }

    #[test]
    fn beta_schedule_paper_values() {
        let s = AnnealSchedule::new(1.25, 0.25, 250, 1000).unwrap();
        assert_eq!(s.beta_at(0).unwrap(), 1.25);
        assert_eq!(s.beta_at(249).unwrap(), 1.25);
        assert_eq!(s.beta_at(250).unwrap(), 1.5);
        assert_eq!(s.beta_at(999).unwrap(), 2.0);
        assert!(s.beta_at(1000).is_err());
    }

    #[test]
    fn energy_differences_agree_across_potential_conventions() {
        // V in {-J, +J} versus 2J(1{z=w} - 1): per neighbor pair the two
        // differ by a constant, so energy differences must coincide.
        let j = 1.0 / 3.0;
        let p = prior();
        let alt_energy = |img: &LevelImage| -> f64 {
            let ntab = NeighborTable::new(p.neighborhood, img.width(), img.height());
            let d = img.data();
            let mut h = 0.0;
            for i in 0..d.len() {
                for &jj in ntab.neighbors_of(i) {
                    let agree = if d[jj as usize] == d[i] { 1.0 } else { 0.0 };
                    h -= 2.0 * j * (agree - 1.0);
                }
            }
            h
        };
        let imgs = [
            LevelImage::new(2, 2, 3, vec![0, 1, 2, 0]).unwrap(),
            LevelImage::new(2, 2, 3, vec![1, 1, 0, 2]).unwrap(),
            LevelImage::new(2, 2, 3, vec![2, 2, 2, 2]).unwrap(),
        ];
        for a in &imgs {
            for b in &imgs {
                let dv = prior_energy(a, &p) - prior_energy(b, &p);
                let da = alt_energy(a) - alt_energy(b);
                assert!((dv - da).abs() < 1e-12, "dv={dv} da={da}");
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(PriorParams::new(0.0).is_err());
        assert!(PriorParams::new(-1.0).is_err());
        assert!(NoiseModel::new(0.0).is_err());
        assert!(AnnealSchedule::new(0.0, 0.1, 10, 10).is_err());
        assert!(AnnealSchedule::new(1.0, -0.1, 10, 10).is_err());
        assert!(AnnealSchedule::new(1.0, 0.1, 0, 10).is_err());
        assert!(PcaParams::new(-0.1, 0.0).is_err());
        assert!(PcaParams::new(0.51, -1.0).is_err());
    }

    #[test]
    fn inertial_cost_convention() {
        let p0 = PcaParams::new(0.51, 0.0).unwrap();
        assert_eq!(p0.cost(0.5, 0.5), 0.0);
        assert_eq!(p0.cost(0.5, 0.75), 0.51);
        let p1 = PcaParams::new(2.0, 1.0).unwrap();
        assert!((p1.cost(0.25, 0.75) - 1.0).abs() < 1e-15);
    }
}
