//! Searching interferometer space for large distances: Haar screening,
//! random-phase ensembles on the fast architecture, and local optimization.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::distance::tvd_values_serial;
use crate::interference::{collision_free_inputs, CollisionPolicy, ModeConfig, OutcomeSpace};
use crate::matrices::{bit_reverse, fast_circuit, fourier, haar_random_with, sylvester, CircuitParams};
use crate::matrix::{ComplexMatrix, UnitaryMatrix};
use crate::math::{self, TAU};
use crate::optimize::{compass_search, CompassOptions};
use crate::{par, rng, Error, Result};

/// Which number summarizes a matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TvdStatistic {
    /// Largest distance over collision-free inputs.
    BestInput,
    /// Mean distance over all collision-free inputs.
    Average,
    /// Distance for one fixed input.
    Input(ModeConfig),
}

/// A statistic bound to a photon number, mode count and policy.
#[derive(Clone, Debug)]
pub struct Objective {
    space: OutcomeSpace,
    inputs: Vec<Vec<usize>>,
    statistic: TvdStatistic,
}

impl Objective {
    pub fn new(modes: usize, photons: usize, policy: CollisionPolicy, statistic: TvdStatistic) -> Result<Self> {
        if photons == 0 || photons > modes {
            return Err(Error::TooManyPhotons { photons, modes });
        }
        let inputs = match &statistic {
            TvdStatistic::Input(c) => {
                if c.modes_count() != modes || c.photons() != photons {
                    return Err(Error::DimensionMismatch { expected: modes, found: c.modes_count() });
                }
                if !c.is_collision_free() {
                    return Err(Error::CollisionalInput);
                }
                vec![c.modes()]
            }
            _ => collision_free_inputs(photons, modes).iter().map(ModeConfig::modes).collect(),
        };
        Ok(Self { space: OutcomeSpace::new(photons, modes, policy)?, inputs, statistic })
    }

    pub fn modes(&self) -> usize {
        self.space.modes()
    }

    pub fn evaluate(&self, u: &UnitaryMatrix) -> f64 {
        let values = tvd_values_serial(u, &self.space, &self.inputs);
        match self.statistic {
            TvdStatistic::Average => values.iter().sum::<f64>() / values.len() as f64,
            _ => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Fixed-bin histogram of a statistic over an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_count: u64,
    pub markers: Vec<(String, f64)>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl EnsembleHistogram {
    pub const DEFAULT_BINS: usize = 100;

    /// Uniform bins on `[0, 1]`; the last bin is closed.
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let bin_edges = (0..=bins).map(|k| k as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = math::floor(v * bins as f64);
            let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            counts[k] += 1;
        }
        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / values.len() as f64 };
        Self { bin_edges, counts, sample_count: values.len() as u64, markers: Vec::new(), min, max, mean }
    }

    pub fn with_marker(mut self, name: &str, value: f64) -> Self {
        self.markers.push((name.to_string(), value));
        self
    }
}

/// Outcome of an ensemble run. Sample `i` can be regenerated from the seed and `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub histogram: EnsembleHistogram,
    pub values: Vec<f64>,
    pub best_index: usize,
    pub best: UnitaryMatrix,
    pub worst_index: usize,
    pub worst: UnitaryMatrix,
}

fn extremes(values: &[f64]) -> (usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
        if v < values[worst] {
            worst = i;
        }
    }
    (best, worst)
}

fn run_ensemble(
    objective: &Objective,
    num_samples: usize,
    sample: impl Fn(usize) -> UnitaryMatrix + Sync + Send,
) -> Result<(Vec<f64>, usize, usize)> {
    if num_samples == 0 {
        return Err(Error::InvalidParameters("num_samples must be at least 1".into()));
    }
    let values = par::map_indexed(num_samples, |i| objective.evaluate(&sample(i)));
    let (b, w) = extremes(&values);
    Ok((values, b, w))
}

/// The `index`-th Haar sample of a screen.
pub fn haar_sample(m: usize, seed: u64, index: usize) -> UnitaryMatrix {
    haar_random_with(m, &mut rng::stream(seed, index as u64))
}

/// Screens `num_samples` Haar-random unitaries.
pub fn haar_screen(
    m: usize,
    n: usize,
    policy: CollisionPolicy,
    statistic: TvdStatistic,
    num_samples: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    let objective = Objective::new(m, n, policy, statistic)?;
    let (values, b, w) = run_ensemble(&objective, num_samples, |i| haar_sample(m, seed, i))?;
    let mut histogram = EnsembleHistogram::from_values(&values, EnsembleHistogram::DEFAULT_BINS);
    if m.is_power_of_two() {
        histogram = histogram.with_marker("sylvester", objective.evaluate(&sylvester(m.trailing_zeros())));
    }
    histogram = histogram.with_marker("fourier", objective.evaluate(&fourier(m)));
    Ok(EnsembleResult { histogram, best: haar_sample(m, seed, b), worst: haar_sample(m, seed, w), values, best_index: b, worst_index: w })
}

/// Balanced-coupler circuit with phases drawn uniformly from `[0, 2π)`.
pub fn random_phase_circuit<R: Rng + ?Sized>(p: u32, rng: &mut R) -> Result<CircuitParams> {
    let base = CircuitParams::balanced(p)?;
    let phi = (0..p).map(|_| (0..base.pairs_per_layer()).map(|_| TAU * rng::uniform(rng)).collect()).collect();
    base.with_phi(phi)
}

/// The `index`-th circuit of a phase-noise ensemble.
pub fn phase_noise_sample(p: u32, seed: u64, index: usize) -> Result<UnitaryMatrix> {
    Ok(fast_circuit(&random_phase_circuit(p, &mut rng::stream(seed, index as u64))?))
}

/// Random-phase ensemble on the `2^p`-mode fast architecture.
pub fn phase_noise_ensemble(
    p: u32,
    n: usize,
    policy: CollisionPolicy,
    statistic: TvdStatistic,
    num_samples: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    let m = 1usize << p;
    let objective = Objective::new(m, n, policy, statistic)?;
    CircuitParams::balanced(p)?;
    let (values, b, w) = run_ensemble(&objective, num_samples, |i| phase_noise_sample(p, seed, i).expect("p validated"))?;
    let histogram = EnsembleHistogram::from_values(&values, EnsembleHistogram::DEFAULT_BINS)
        .with_marker("sylvester", objective.evaluate(&sylvester(p)))
        .with_marker("fourier", objective.evaluate(&fourier(m)));
    Ok(EnsembleResult {
        histogram,
        best: phase_noise_sample(p, seed, b)?,
        worst: phase_noise_sample(p, seed, w)?,
        values,
        best_index: b,
        worst_index: w,
    })
}

/// Two-photon cyclic inputs expressed in the fast architecture's labels.
///
/// The architecture realizes the Fourier matrix with bit-reversed inputs, so
/// its cyclic inputs are the bit-reversed images of [`cyclic_inputs`]: the
/// pairs that meet at a first-layer coupler.
///
/// [`cyclic_inputs`]: crate::distance::cyclic_inputs
pub fn fast_cyclic_inputs(p: u32) -> Result<Vec<ModeConfig>> {
    let m = 1usize << p;
    let mut out = crate::distance::cyclic_inputs(2, p)?
        .iter()
        .map(|c| {
            let modes: Vec<usize> = c.modes().iter().map(|&k| bit_reverse(k, p)).collect();
            ModeConfig::from_distinct_modes(m, &modes)
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Number of real parameters of [`unitary_from_params`]: `m²`.
pub fn parameter_count(m: usize) -> usize {
    m * m
}

/// Maps `m²` reals onto U(m): a rectangular mesh of `m(m−1)/2` two-mode
/// rotations (angle, phase) on neighbouring modes, then output phases.
pub fn unitary_from_params(m: usize, params: &[f64]) -> Result<UnitaryMatrix> {
    if params.len() != parameter_count(m) {
        return Err(Error::DimensionMismatch { expected: parameter_count(m), found: params.len() });
    }
    let mut u = ComplexMatrix::identity(m);
    let mut it = params.iter().copied();
    for layer in 0..m {
        let mut k = layer % 2;
        while k + 1 < m {
            let theta = it.next().expect("counted");
            let phi = it.next().expect("counted");
            let (c, s) = (math::cos(theta), math::sin(theta));
            let e = math::cis(phi);
            for col in 0..m {
                let a = u[(k, col)];
                let b = u[(k + 1, col)];
                u[(k, col)] = e * c * a - b * s;
                u[(k + 1, col)] = e * s * a + b * c;
            }
            k += 2;
        }
    }
    for r in 0..m {
        let e = math::cis(it.next().expect("counted"));
        for col in 0..m {
            u[(r, col)] *= e;
        }
    }
    UnitaryMatrix::new(u)
}

/// Result of [`local_optimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub unitary: UnitaryMatrix,
    pub value: f64,
    pub best_restart: usize,
    /// Best value of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Accepted objective values per restart; non-decreasing.
    pub traces: Vec<Vec<f64>>,
}

/// Multi-restart compass search over [`unitary_from_params`].
pub fn local_optimize(
    m: usize,
    n: usize,
    policy: CollisionPolicy,
    statistic: TvdStatistic,
    seed: u64,
    restarts: usize,
) -> Result<OptimizeResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameters("restarts must be at least 1".into()));
    }
    let objective = Objective::new(m, n, policy, statistic)?;
    let opts = CompassOptions { initial_step: 0.4, min_step: 1e-9, max_evaluations: 400_000 };
    let runs = par::map_indexed(restarts, |r| {
        let mut g = rng::stream(seed, r as u64);
        let x0: Vec<f64> = (0..parameter_count(m)).map(|_| TAU * rng::uniform(&mut g)).collect();
        let f = |x: &[f64]| -objective.evaluate(&unitary_from_params(m, x).expect("length fixed"));
        let (min, trace) = compass_search(f, &x0, &opts);
        (min.x, -min.value, trace.into_iter().map(|v| -v).collect::<Vec<_>>())
    });
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 > runs[best].1 {
            best = i;
        }
    }
    let unitary = unitary_from_params(m, &runs[best].0)?;
    Ok(OptimizeResult {
        value: runs[best].1,
        best_restart: best,
        restart_values: runs.iter().map(|r| r.1).collect(),
        traces: runs.into_iter().map(|r| r.2).collect(),
        unitary,
    })
}
