//! Scattershot experiments: every event picks its input pair at random.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::bayes::{uniform_grid, EventRecord, InputFamily, LikelihoodTable, OutcomeModel, Posterior, DEFAULT_GRID};
use crate::interference::{collision_free_inputs, ModeConfig};
use crate::matrix::UnitaryMatrix;
use crate::{par, rng, Error, Result};

/// Interferometer and input set, without the indistinguishability parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ScattershotConfig {
    unitary: UnitaryMatrix,
    photons: usize,
    inputs: Vec<ModeConfig>,
    model: OutcomeModel,
    weights: Option<Vec<f64>>,
}

impl ScattershotConfig {
    /// All collision-free inputs of `photons` photons, post-selected outcomes.
    pub fn new(unitary: UnitaryMatrix, photons: usize) -> Result<Self> {
        if photons == 0 || photons > unitary.dim() {
            return Err(Error::TooManyPhotons { photons, modes: unitary.dim() });
        }
        let inputs = collision_free_inputs(photons, unitary.dim());
        Ok(Self { unitary, photons, inputs, model: OutcomeModel::default(), weights: None })
    }

    pub fn with_inputs(mut self, inputs: Vec<ModeConfig>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameters("input set is empty".into()));
        }
        for i in &inputs {
            if i.modes_count() != self.unitary.dim() {
                return Err(Error::DimensionMismatch { expected: self.unitary.dim(), found: i.modes_count() });
            }
            if i.photons() != self.photons {
                return Err(Error::DimensionMismatch { expected: self.photons, found: i.photons() });
            }
            if !i.is_collision_free() {
                return Err(Error::CollisionalInput);
            }
        }
        let mut sorted = inputs.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameters("duplicate input".into()));
        }
        self.inputs = inputs;
        Ok(self)
    }

    pub fn with_model(mut self, model: OutcomeModel) -> Self {
        self.model = model;
        self
    }

    /// Non-uniform input selection probabilities (normalized internally).
    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn inputs(&self) -> &[ModeConfig] {
        &self.inputs
    }

    pub fn model(&self) -> OutcomeModel {
        self.model
    }

    /// Per-input hypothesis pairs.
    pub fn family(&self) -> Result<InputFamily> {
        InputFamily::from_unitary(&self.unitary, self.inputs.clone(), self.model, self.weights.clone())
    }
}

/// `count` events from `H(x_true)`; deterministic in `seed`.
pub fn sample_events(config: &ScattershotConfig, x_true: f64, count: usize, seed: u64) -> Result<Vec<EventRecord>> {
    sample_from_family(&config.family()?, x_true, count, seed)
}

pub fn sample_from_family(family: &InputFamily, x_true: f64, count: usize, seed: u64) -> Result<Vec<EventRecord>> {
    if !(0.0..=1.0).contains(&x_true) {
        return Err(Error::OutOfRange { name: "x_true", value: x_true });
    }
    let mut g = rng::seeded(seed);
    Ok((0..count)
        .map(|_| {
            let d = family.draw(&mut g);
            family.event(d.input, family.realize_mixture(&d, x_true))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResequenceOptions {
    pub permutations: usize,
    /// Event counts at which estimates are recorded.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
}

impl ResequenceOptions {
    pub fn new(total: usize, seed: u64) -> Self {
        Self { permutations: 100, checkpoints: default_checkpoints(total), seed }
    }
}

/// 1, 2, 5, 10, 20, 50, ... below `total`, then `total`.
pub fn default_checkpoints(total: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for k in [1, 2, 5] {
            let c = k * decade;
            if c >= total {
                break 'outer;
            }
            v.push(c);
        }
        decade *= 10;
    }
    if total > 0 {
        v.push(total);
    }
    v
}

/// Spread of the running estimate across reorderings of the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub events: usize,
    /// Estimate for the recorded order.
    pub x_est: f64,
    pub sigma_est: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub x_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub posterior: Posterior,
    /// Events per configured input, in configuration order.
    pub input_counts: Vec<(ModeConfig, u64)>,
    pub band: Option<Vec<BandPoint>>,
}

/// Posterior over `x` plus per-input counts, and optionally the resequencing band.
pub fn analyze(events: &[EventRecord], family: &InputFamily, grid_size: usize, resequence: Option<&ResequenceOptions>) -> Result<Analysis> {
    let mut table = LikelihoodTable::new(uniform_grid(grid_size)?);
    let mut rows = Vec::with_capacity(events.len());
    let mut per_input = vec![0u64; family.inputs().len()];
    for e in events {
        let (i, _) = family.locate(e)?;
        let (q, p) = family.resolve(e)?;
        per_input[i] += 1;
        rows.push(table.key(q, p)?);
    }
    let posterior = table.posterior(&row_counts(&rows, rows.len()))?;
    let input_counts = family.inputs().iter().cloned().zip(per_input).collect();
    let band = resequence.map(|opts| band(&table, &rows, opts)).transpose()?;
    Ok(Analysis { posterior, input_counts, band })
}

/// [`analyze`] with the default grid and no band.
pub fn analyze_config(events: &[EventRecord], config: &ScattershotConfig) -> Result<Analysis> {
    analyze(events, &config.family()?, DEFAULT_GRID, None)
}

fn row_counts(rows: &[usize], upto: usize) -> Vec<u64> {
    let mut c = Vec::new();
    for &r in &rows[..upto] {
        if r >= c.len() {
            c.resize(r + 1, 0);
        }
        c[r] += 1;
    }
    c
}

fn running(table: &LikelihoodTable, rows: &[usize], checkpoints: &[usize]) -> Result<Vec<(f64, f64)>> {
    let mut counts = vec![0u64; rows.iter().max().map_or(0, |m| m + 1)];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut done = 0;
    for &c in checkpoints {
        for &r in &rows[done..c] {
            counts[r] += 1;
        }
        done = c;
        let post = table.posterior(&counts)?;
        out.push((post.x_est, post.sigma_est));
    }
    Ok(out)
}

fn band(table: &LikelihoodTable, rows: &[usize], opts: &ResequenceOptions) -> Result<Vec<BandPoint>> {
    let mut checkpoints: Vec<usize> = opts.checkpoints.iter().copied().filter(|&c| c <= rows.len()).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let recorded = running(table, rows, &checkpoints)?;
    let shuffled = par::map_indexed(opts.permutations, |k| {
        let mut order = rows.to_vec();
        order.shuffle(&mut rng::stream(opts.seed, k as u64));
        running(table, &order, &checkpoints)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let vals = shuffled.iter().map(|s| s[j].0);
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for v in vals {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
            let mean = if shuffled.is_empty() { recorded[j].0 } else { sum / shuffled.len() as f64 };
            if shuffled.is_empty() {
                lo = recorded[j].0;
                hi = recorded[j].0;
            }
            BandPoint { events: n, x_est: recorded[j].0, sigma_est: recorded[j].1, x_min: lo, x_max: hi, x_mean: mean }
        })
        .collect())
}
