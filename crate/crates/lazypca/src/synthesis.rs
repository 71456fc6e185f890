//! Test-image synthesis: MRF ground truths and their Gaussian degradations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::{luminance_table, LevelImage};
use crate::model::{AnnealSchedule, NoiseModel, PriorParams, ScoreKernel};
use crate::rng::{RngStream, Stage};
use crate::samplers::sweep_in_place;

/// Everything needed to synthesize one MRF sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrfGenSpec {
    pub width: usize,
    pub height: usize,
    pub levels: u16,
    pub coupling: f64,
    pub schedule: AnnealSchedule,
    pub seed: u64,
}

impl MrfGenSpec {
    pub fn prior(&self) -> PriorParams {
        PriorParams { coupling: self.coupling, neighborhood: crate::lattice::Neighborhood::Moore8 }
    }
}

/// Samples an MRF by annealed prior-only Gibbs sweeps from a uniform start.
pub fn generate_mrf(spec: &MrfGenSpec) -> LevelImage {
    let stream = RngStream::new(spec.seed);
    let n = spec.width * spec.height;
    let mut levels: Vec<u16> = (0..n)
        .map(|i| {
            let u = stream.uniform(Stage::Init, 0, i as u64, 0);
            ((u * spec.levels as f64) as u16).min(spec.levels - 1)
        })
        .collect();
    let kernel = ScoreKernel::prior_only(spec.width, spec.height, spec.levels, &spec.prior());
    for step in 0..spec.schedule.total_steps {
        let beta = spec.schedule.beta_at(step).expect("step < total_steps");
        sweep_in_place(&kernel, &mut levels, beta, &stream, Stage::Gen, step);
    }
    LevelImage::new(spec.width, spec.height, spec.levels, levels).expect("levels stay in range")
}

/// Standard normal draw for the given site context via Box-Muller on two
/// counter-based uniforms.
pub fn gaussian_draw(stream: &RngStream, stage: Stage, step: u64, site: u64, sigma: f64) -> f64 {
    let u1 = stream.uniform(stage, step, site, 0);
    let u2 = stream.uniform(stage, step, site, 1);
    // 1 - u1 lies in (0, 1], keeping the log finite.
    let mag = (-2.0 * (1.0 - u1).ln()).sqrt();
    sigma * mag * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Adds Gaussian luminance noise to every pixel, clamps to `[0, 1]`, and
/// rounds to the nearest gray level (ties toward the lower index).
pub fn degrade(x: &LevelImage, noise: &NoiseModel, seed: u64) -> LevelImage {
    let stream = RngStream::new(seed);
    let lum = luminance_table(x.levels());
    let span = (x.levels() - 1).max(1) as f64;
    let data: Vec<u16> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let eps = gaussian_draw(&stream, Stage::Noise, 0, i as u64, noise.sigma);
            let perturbed = (lum[x.level_at(i) as usize] + noise.mean + eps).clamp(0.0, 1.0);
            quantize(perturbed, span)
        })
        .collect();
    LevelImage::new(x.width(), x.height(), x.levels(), data).expect("quantizer stays in range")
}

/// Nearest level index to luminance `v`, ties toward the lower index.
#[inline]
fn quantize(v: f64, span: f64) -> u16 {
    let t = v * span;
    // ceil(t - 0.5) rounds half-way points down.
    let k = (t - 0.5).ceil();
    (k.max(0.0) as u16).min(span as u16)
}
