//! The two Markov-chain engines: sequential systematic Gibbs sweeps and
//! parallel lazy-PCA steps, both annealed.
//!
//! A Gibbs sweep visits every site in column-major order and resamples it
//! from `softmax(E_i)` against the partially updated configuration. A PCA
//! step redraws every site independently from
//! `softmax(E_i(s)/2 - beta * q * 1{s != x_i})` against the old
//! configuration, double-buffered. Halving the shared kernel makes the
//! lifted pair energy's diagonal coincide with the posterior energy the
//! Gibbs sweep targets, which is what gives the lazy chain its stationary
//! measure `Z_x / Z` and the q -> infinity convergence to the posterior
//! (see the oracle module's tests).
//!
//! All randomness is drawn from per-(stage, step, site) stream contexts, so
//! a PCA step is bit-identical no matter how the site loop is partitioned
//! across workers.

use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{luminance_table, ImageError, LevelImage};
use crate::model::{
    posterior_energy, AnnealSchedule, ModelError, NoiseModel, PcaParams, PriorParams, ScoreKernel,
};
use crate::rng::{RngStream, Stage};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("method pca requires PcaParams")]
    MissingPcaParams,
}

/// Retrieval kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gibbs,
    Pca,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gibbs" | "gs" => Ok(Method::Gibbs),
            "pca" => Ok(Method::Pca),
            other => Err(format!("unknown method '{other}' (expected gibbs or pca)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Gibbs => "gibbs",
            Method::Pca => "pca",
        })
    }
}

/// State of an annealed chain between steps.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: LevelImage,
    pub step: u32,
    pub seed: u64,
    pub schedule: AnnealSchedule,
}

impl ChainState {
    pub fn new(initial: LevelImage, seed: u64, schedule: AnnealSchedule) -> Self {
        ChainState { current: initial, step: 0, seed, schedule }
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TransitionRecord {
    pub step: u32,
    pub beta: f64,
    pub changed_sites: usize,
    /// `beta * H_g` of the state after the step.
    pub beta_hg: f64,
}

/// Inverse-CDF draw from `softmax(scores)`, ascending level order, consuming
/// the buffer. Ties in the cumulative sums cannot occur up to floating point;
/// the ascending order fixes any residual ambiguity.
#[inline]
pub(crate) fn sample_level(scores: &mut [f64], u: f64) -> u16 {
    let mut m = f64::NEG_INFINITY;
    for &s in scores.iter() {
        if s > m {
            m = s;
        }
    }
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - m).exp();
        total += *s;
    }
    let threshold = u * total;
    let mut acc = 0.0;
    for (k, &w) in scores.iter().enumerate() {
        acc += w;
        if acc > threshold {
            return k as u16;
        }
    }
    (scores.len() - 1) as u16
}

/// One systematic sweep in place; returns the number of changed sites.
pub(crate) fn sweep_in_place(
    kernel: &ScoreKernel,
    levels: &mut [u16],
    beta: f64,
    stream: &RngStream,
    stage: Stage,
    step: u32,
) -> usize {
    let mut scores = vec![0.0; kernel.levels()];
    let mut changed = 0;
    for site in 0..kernel.sites() {
        kernel.scores_into(levels, site, beta, &mut scores);
        let u = stream.uniform(stage, step as u64, site as u64, 0);
        let new = sample_level(&mut scores, u);
        if new != levels[site] {
            changed += 1;
        }
        levels[site] = new;
    }
    changed
}

/// Turns the shared scores `E_i(s)` into the lazy-PCA site exponents
/// `E_i(s)/2 - beta * q |x_i - s|^p`, in place.
#[inline]
pub(crate) fn pca_transform(scores: &mut [f64], pca: &PcaParams, lum: &[f64], cur: u16, beta: f64) {
    let cur_lum = lum[cur as usize];
    for (s, score) in scores.iter_mut().enumerate() {
        *score = 0.5 * *score - beta * pca.cost(cur_lum, lum[s]);
    }
}

/// One lazy-PCA step, reading `old` and writing `new`; returns the number of
/// changed sites. The site loop runs on the current rayon pool.
pub(crate) fn pca_step_buffers(
    kernel: &ScoreKernel,
    pca: &PcaParams,
    lum: &[f64],
    old: &[u16],
    new: &mut [u16],
    beta: f64,
    stream: &RngStream,
    step: u32,
) -> usize {
    const CHUNK: usize = 1024;
    let nlev = kernel.levels();
    new.par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK;
            let mut scores = vec![0.0; nlev];
            let mut changed = 0;
            for (k, slot) in chunk.iter_mut().enumerate() {
                let site = base + k;
                kernel.scores_into(old, site, beta, &mut scores);
                let cur = old[site];
                pca_transform(&mut scores, pca, lum, cur, beta);
                let u = stream.uniform(Stage::Pca, step as u64, site as u64, 0);
                let drawn = sample_level(&mut scores, u);
                if drawn != cur {
                    changed += 1;
                }
                *slot = drawn;
            }
            changed
        })
        .sum()
}

/// One annealed Gibbs sweep over all sites.
pub fn gibbs_sweep(
    state: ChainState,
    g: &LevelImage,
    prior: &PriorParams,
    noise: &NoiseModel,
) -> Result<ChainState, SamplerError> {
    state.current.check_same_shape(g)?;
    let kernel = ScoreKernel::posterior(g, prior, noise)?;
    let beta = state.schedule.beta_at(state.step)?;
    let stream = RngStream::new(state.seed);
    let mut state = state;
    sweep_in_place(
        &kernel,
        state.current.data_mut(),
        beta,
        &stream,
        Stage::Gibbs,
        state.step,
    );
    state.step += 1;
    Ok(state)
}

/// One annealed lazy-PCA step over all sites.
pub fn pca_step(
    state: ChainState,
    g: &LevelImage,
    prior: &PriorParams,
    noise: &NoiseModel,
    pca: &PcaParams,
) -> Result<ChainState, SamplerError> {
    state.current.check_same_shape(g)?;
    let kernel = ScoreKernel::posterior(g, prior, noise)?;
    let lum = luminance_table(g.levels());
    let beta = state.schedule.beta_at(state.step)?;
    let stream = RngStream::new(state.seed);
    let mut state = state;
    let mut new = state.current.data().to_vec();
    pca_step_buffers(
        &kernel,
        pca,
        &lum,
        state.current.data(),
        &mut new,
        beta,
        &stream,
        state.step,
    );
    state.current = state.current.with_data(new)?;
    state.step += 1;
    Ok(state)
}

/// Runs the full annealed chain and returns the last state as the MAP
/// estimate, plus the per-step trace.
pub fn run_chain(
    initial: LevelImage,
    g: &LevelImage,
    prior: &PriorParams,
    noise: &NoiseModel,
    schedule: AnnealSchedule,
    method: Method,
    pca: Option<&PcaParams>,
    seed: u64,
) -> Result<(LevelImage, Vec<TransitionRecord>), SamplerError> {
    run_chain_observed(initial, g, prior, noise, schedule, method, pca, seed, |_, _| {})
}

/// [`run_chain`] with a per-step observer (used for checkpoint dumps).
#[allow(clippy::too_many_arguments)]
pub fn run_chain_observed(
    initial: LevelImage,
    g: &LevelImage,
    prior: &PriorParams,
    noise: &NoiseModel,
    schedule: AnnealSchedule,
    method: Method,
    pca: Option<&PcaParams>,
    seed: u64,
    mut observer: impl FnMut(u32, &LevelImage),
) -> Result<(LevelImage, Vec<TransitionRecord>), SamplerError> {
    initial.check_same_shape(g)?;
    let pca_params = match (method, pca) {
        (Method::Pca, Some(p)) => Some(*p),
        (Method::Pca, None) => return Err(SamplerError::MissingPcaParams),
        (Method::Gibbs, _) => None,
    };
    let kernel = ScoreKernel::posterior(g, prior, noise)?;
    let lum = luminance_table(g.levels());
    let stream = RngStream::new(seed);
    let mut current = initial.data().to_vec();
    let mut scratch = current.clone();
    let mut trace = Vec::with_capacity(schedule.total_steps as usize);
    let mut img = initial;
    for step in 0..schedule.total_steps {
        let beta = schedule.beta_at(step)?;
        let changed = match method {
            Method::Gibbs => sweep_in_place(&kernel, &mut current, beta, &stream, Stage::Gibbs, step),
            Method::Pca => {
                let pca_params = pca_params.as_ref().unwrap();
                let changed = pca_step_buffers(
                    &kernel, pca_params, &lum, &current, &mut scratch, beta, &stream, step,
                );
                std::mem::swap(&mut current, &mut scratch);
                changed
            }
        };
        img = img.with_data(current.clone())?;
        let beta_hg = beta * posterior_energy(&img, g, prior, noise, beta)?;
        trace.push(TransitionRecord { step, beta, changed_sites: changed, beta_hg });
        observer(step, &img);
    }
    Ok((img, trace))
}

/// Writes the trace as CSV with columns `step,beta,changed_sites,beta_Hg`.
pub fn write_trace_csv(path: &Path, trace: &[TransitionRecord]) -> io::Result<()> {
    let mut out = Vec::with_capacity(32 * (trace.len() + 1));
    writeln!(out, "step,beta,changed_sites,beta_Hg")?;
    for r in trace {
        writeln!(out, "{},{},{},{}", r.step, r.beta, r.changed_sites, r.beta_hg)?;
    }
    std::fs::write(path, out)
}
