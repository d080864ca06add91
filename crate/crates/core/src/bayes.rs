//! Bayesian and likelihood-ratio validation of event data.
//!
//! Event probabilities come in pairs `(q, p)`: the probability of the observed
//! outcome for indistinguishable and for distinguishable photons.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::interference::{distribution_pair, CollisionPolicy, Distribution, ModeConfig, OutcomeLabel};
use crate::matrix::UnitaryMatrix;
use crate::optimize::{bisect, golden_section};
use crate::{math, par, rng, Error, Result};

/// Default saturation for `|log R|`.
pub const DEFAULT_LOG_CAP: f64 = 700.0;
/// Default posterior grid size.
pub const DEFAULT_GRID: usize = 2001;
/// Distance kept from the trivial root when locating the convex-test threshold.
pub const STAGE_A_EPSILON: f64 = 1e-6;

/// One detected event.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventRecord {
    pub input: ModeConfig,
    pub output: OutcomeLabel,
}

/// Running `Σ ln(q/p)` that tracks events impossible under one hypothesis.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LogRatio {
    finite: f64,
    /// Events with `p = 0 < q`.
    only_q: u64,
    /// Events with `q = 0 < p`.
    only_p: u64,
}

/// A capped log-likelihood ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CappedLogRatio {
    pub value: f64,
    pub saturated: bool,
}

impl LogRatio {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, q: f64, p: f64) -> Result<()> {
        match (q > 0.0, p > 0.0) {
            (true, true) => self.finite += math::ln(q / p),
            (true, false) => self.only_q += 1,
            (false, true) => self.only_p += 1,
            (false, false) => return Err(Error::ImpossibleEvent),
        }
        Ok(())
    }

    /// `ln R` clipped to `[-cap, cap]`; infinite evidence saturates.
    pub fn capped(&self, cap: f64) -> Result<CappedLogRatio> {
        match (self.only_q > 0, self.only_p > 0) {
            (true, true) => Err(Error::ContradictoryEvidence),
            (true, false) => Ok(CappedLogRatio { value: cap, saturated: true }),
            (false, true) => Ok(CappedLogRatio { value: -cap, saturated: true }),
            (false, false) => {
                let saturated = self.finite.abs() > cap;
                Ok(CappedLogRatio { value: self.finite.clamp(-cap, cap), saturated })
            }
        }
    }

    /// Uncapped value, possibly infinite.
    pub fn raw(&self) -> Result<f64> {
        match (self.only_q > 0, self.only_p > 0) {
            (true, true) => Err(Error::ContradictoryEvidence),
            (true, false) => Ok(f64::INFINITY),
            (false, true) => Ok(f64::NEG_INFINITY),
            (false, false) => Ok(self.finite),
        }
    }
}

/// `Pr(Q | data)` and `Pr(P | data)` under equal priors. The two always sum to 1.
pub fn posterior_probabilities(log_ratio: f64) -> (f64, f64) {
    let pq = math::sigmoid(log_ratio);
    (pq, 1.0 - pq)
}

/// `Σ ln(q_i/p_i)` over events, saturated at [`DEFAULT_LOG_CAP`].
pub fn log_likelihood_ratio<E>(events: &[E], q_of: impl Fn(&E) -> f64, p_of: impl Fn(&E) -> f64) -> Result<CappedLogRatio> {
    log_likelihood_ratio_capped(events, q_of, p_of, DEFAULT_LOG_CAP)
}

pub fn log_likelihood_ratio_capped<E>(
    events: &[E],
    q_of: impl Fn(&E) -> f64,
    p_of: impl Fn(&E) -> f64,
    cap: f64,
) -> Result<CappedLogRatio> {
    let mut acc = LogRatio::new();
    for e in events {
        acc.add(q_of(e), p_of(e))?;
    }
    acc.capped(cap)
}

/// Cumulative table for inverse-CDF sampling.
#[derive(Clone, Debug, PartialEq)]
struct Cdf {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Cdf {
    fn new(weights: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidDistribution(alloc::format!("weight {w}")));
            }
            if w > 0.0 {
                last_positive = Some(i);
            }
            acc += w;
            cumulative.push(acc);
        }
        let last_positive = last_positive.ok_or_else(|| Error::InvalidDistribution("all weights zero".into()))?;
        Ok(Self { cumulative, last_positive })
    }

    /// Index for a uniform `u ∈ [0, 1)`.
    fn sample(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.last_positive)
    }
}

/// `Q` and `P` over shared labels for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisPair {
    labels: Vec<OutcomeLabel>,
    q: Vec<f64>,
    p: Vec<f64>,
    q_cdf: Cdf,
    p_cdf: Cdf,
}

impl HypothesisPair {
    pub fn new(q: &Distribution, p: &Distribution) -> Result<Self> {
        if !q.same_labels(p) {
            return Err(Error::LabelMismatch);
        }
        Self::from_vectors(q.labels().to_vec(), q.probs().to_vec(), p.probs().to_vec())
    }

    pub fn from_vectors(labels: Vec<OutcomeLabel>, q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if labels.len() != q.len() || labels.len() != p.len() {
            return Err(Error::LabelMismatch);
        }
        let (q_cdf, p_cdf) = (Cdf::new(&q)?, Cdf::new(&p)?);
        Ok(Self { labels, q, p, q_cdf, p_cdf })
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn slot_of(&self, label: &OutcomeLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `x·q + (1−x)·p` for every outcome.
    pub fn mixture(&self, x: f64) -> Vec<f64> {
        self.q.iter().zip(&self.p).map(|(&q, &p)| x * q + (1.0 - x) * p).collect()
    }
}

/// How per-input distributions are formed from a unitary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutcomeModel {
    /// All outcomes under a collision policy.
    Policy(CollisionPolicy),
    /// Collision-free outcomes only, each hypothesis renormalized (events
    /// with a collision are never recorded).
    #[default]
    PostSelected,
}

/// Hypothesis pairs for a set of inputs, with input selection weights.
#[derive(Clone, Debug, PartialEq)]
pub struct InputFamily {
    inputs: Vec<ModeConfig>,
    pairs: Vec<HypothesisPair>,
    weights: Vec<f64>,
    input_cdf: Cdf,
}

impl InputFamily {
    /// Uniform input weights.
    pub fn new(inputs: Vec<ModeConfig>, pairs: Vec<HypothesisPair>) -> Result<Self> {
        let w = vec![1.0; inputs.len()];
        Self::with_weights(inputs, pairs, w)
    }

    pub fn with_weights(inputs: Vec<ModeConfig>, pairs: Vec<HypothesisPair>, weights: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != pairs.len() || inputs.len() != weights.len() {
            return Err(Error::InvalidParameters("inputs, pairs and weights must be non-empty and equally long".into()));
        }
        let mut sorted = inputs.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameters("duplicate input".into()));
        }
        let input_cdf = Cdf::new(&weights)?;
        let total: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self { inputs, pairs, weights, input_cdf })
    }

    /// One input, one pair.
    pub fn single(input: ModeConfig, pair: HypothesisPair) -> Result<Self> {
        Self::new(vec![input], vec![pair])
    }

    /// Pairs computed from a unitary.
    pub fn from_unitary(u: &UnitaryMatrix, inputs: Vec<ModeConfig>, model: OutcomeModel, weights: Option<Vec<f64>>) -> Result<Self> {
        let pairs = inputs
            .iter()
            .map(|input| {
                let policy = match model {
                    OutcomeModel::Policy(p) => p,
                    OutcomeModel::PostSelected => CollisionPolicy::WithCollisions,
                };
                let (q, p) = distribution_pair(u, input, policy)?;
                match model {
                    OutcomeModel::Policy(_) => HypothesisPair::new(&q, &p),
                    OutcomeModel::PostSelected => HypothesisPair::new(&q.collision_free_part()?, &p.collision_free_part()?),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = weights.unwrap_or_else(|| vec![1.0; inputs.len()]);
        Self::with_weights(inputs, pairs, weights)
    }

    pub fn inputs(&self) -> &[ModeConfig] {
        &self.inputs
    }

    pub fn pairs(&self) -> &[HypothesisPair] {
        &self.pairs
    }

    /// Normalized input weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn input_index(&self, input: &ModeConfig) -> Option<usize> {
        self.inputs.iter().position(|i| i == input)
    }

    /// `(input index, outcome slot)` of an event.
    pub fn locate(&self, event: &EventRecord) -> Result<(usize, usize)> {
        let i = self.input_index(&event.input).ok_or(Error::UnknownInput)?;
        let s = self.pairs[i].slot_of(&event.output).ok_or(Error::UnknownOutcome)?;
        Ok((i, s))
    }

    /// `(q, p)` of an event.
    pub fn resolve(&self, event: &EventRecord) -> Result<(f64, f64)> {
        let (i, s) = self.locate(event)?;
        Ok((self.pairs[i].q[s], self.pairs[i].p[s]))
    }

    pub fn resolve_all(&self, events: &[EventRecord]) -> Result<Vec<(f64, f64)>> {
        events.iter().map(|e| self.resolve(e)).collect()
    }

    /// Draws randomness for one simulated event.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SimDraw {
        let input = self.input_cdf.sample(rng::uniform(rng));
        SimDraw { input, mix: rng::uniform(rng), u: rng::uniform(rng) }
    }

    /// Outcome slot of a draw when photons are indistinguishable (`from_q`) or not.
    pub fn realize(&self, draw: &SimDraw, from_q: bool) -> usize {
        let pair = &self.pairs[draw.input];
        if from_q { pair.q_cdf.sample(draw.u) } else { pair.p_cdf.sample(draw.u) }
    }

    /// Outcome slot of a draw for data from `H(x)`.
    pub fn realize_mixture(&self, draw: &SimDraw, x: f64) -> usize {
        self.realize(draw, draw.mix < x)
    }

    pub fn event(&self, input: usize, slot: usize) -> EventRecord {
        EventRecord { input: self.inputs[input].clone(), output: self.pairs[input].labels[slot].clone() }
    }
}

/// Randomness behind one simulated event. Keeping the draw fixed while the
/// mixture parameter varies couples simulations at different parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimDraw {
    pub input: usize,
    /// Compared against `x`: below means the event follows `Q`.
    pub mix: f64,
    /// Inverse-CDF variate for the outcome.
    pub u: f64,
}

/// Trials are reduced in fixed-size chunks so sums do not depend on thread count.
const TRIAL_CHUNK: usize = 32;

/// `P_conf(N) = ½[Pr(Q|N) on Q-data + Pr(P|N) on P-data]`, averaged over trials,
/// for `N = 0..=max_events`.
pub fn confidence_curve(family: &InputFamily, max_events: usize, num_trials: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    if num_trials == 0 {
        return Err(Error::InvalidParameters("num_trials must be at least 1".into()));
    }
    let chunks = num_trials.div_ceil(TRIAL_CHUNK);
    let partial = par::map_indexed(chunks, |c| -> Result<Vec<f64>> {
        let mut sum = vec![0.0; max_events + 1];
        for trial in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(num_trials) {
            let mut g = rng::stream(seed, trial as u64);
            for from_q in [true, false] {
                let mut acc = LogRatio::new();
                sum[0] += 0.5;
                for slot in sum.iter_mut().skip(1) {
                    let d = family.draw(&mut g);
                    let s = family.realize(&d, from_q);
                    let pair = &family.pairs[d.input];
                    acc.add(pair.q[s], pair.p[s])?;
                    let (pq, pp) = posterior_probabilities(acc.capped(DEFAULT_LOG_CAP)?.value);
                    *slot += if from_q { pq } else { pp };
                }
            }
        }
        Ok(sum)
    });
    let mut total = vec![0.0; max_events + 1];
    for part in partial {
        for (t, v) in total.iter_mut().zip(part?) {
            *t += v;
        }
    }
    Ok(total.into_iter().enumerate().map(|(n, s)| (n, s / (2.0 * num_trials as f64))).collect())
}

/// Posterior density of the indistinguishability parameter on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub grid: Vec<f64>,
    /// Density values; trapezoid integral is 1.
    pub weights: Vec<f64>,
    pub x_est: f64,
    pub sigma_est: f64,
}

fn trapezoid(grid: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for k in 1..grid.len() {
        s += 0.5 * (grid[k] - grid[k - 1]) * (f(k) + f(k - 1));
    }
    s
}

/// Uniform grid on `[0, 1]`.
pub fn uniform_grid(size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidParameters("grid needs at least 2 points".into()));
    }
    Ok((0..size).map(|k| k as f64 / (size - 1) as f64).collect())
}

/// Precomputed `ln(x q + (1−x) p)` on a grid for each distinct `(q, p)`.
#[derive(Clone, Debug)]
pub struct LikelihoodTable {
    grid: Vec<f64>,
    keys: BTreeMap<(u64, u64), usize>,
    rows: Vec<Vec<f64>>,
}

impl LikelihoodTable {
    pub fn new(grid: Vec<f64>) -> Self {
        Self { grid, keys: BTreeMap::new(), rows: Vec::new() }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Row index for `(q, p)`, adding it if new.
    pub fn key(&mut self, q: f64, p: f64) -> Result<usize> {
        if !(q >= 0.0 && p >= 0.0) {
            return Err(Error::OutOfRange { name: "event probability", value: if q >= 0.0 { p } else { q } });
        }
        if q == 0.0 && p == 0.0 {
            return Err(Error::ImpossibleEvent);
        }
        let k = (q.to_bits(), p.to_bits());
        if let Some(&i) = self.keys.get(&k) {
            return Ok(i);
        }
        let row = self.grid.iter().map(|&x| math::ln(x * q + (1.0 - x) * p)).collect();
        self.rows.push(row);
        self.keys.insert(k, self.rows.len() - 1);
        Ok(self.rows.len() - 1)
    }

    /// Posterior from per-row event counts.
    pub fn posterior(&self, counts: &[u64]) -> Result<Posterior> {
        let mut log = vec![0.0; self.grid.len()];
        // Rows in key order keep the sum independent of event order.
        for (_, &r) in self.keys.iter() {
            let c = counts.get(r).copied().unwrap_or(0);
            if c == 0 {
                continue;
            }
            for (l, v) in log.iter_mut().zip(&self.rows[r]) {
                *l += c as f64 * v;
            }
        }
        posterior_from_log(&self.grid, log)
    }
}

fn posterior_from_log(grid: &[f64], mut log: Vec<f64>) -> Result<Posterior> {
    for l in log.iter_mut() {
        if l.is_nan() {
            *l = f64::NEG_INFINITY;
        }
    }
    let top = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood);
    }
    let mut w: Vec<f64> = log.iter().map(|&l| math::exp(l - top)).collect();
    let norm = trapezoid(grid, |k| w[k]);
    if !(norm > 0.0) {
        return Err(Error::ZeroLikelihood);
    }
    w.iter_mut().for_each(|v| *v /= norm);
    let x_est = trapezoid(grid, |k| grid[k] * w[k]).clamp(grid[0], grid[grid.len() - 1]);
    let var = trapezoid(grid, |k| (grid[k] - x_est) * (grid[k] - x_est) * w[k]);
    Ok(Posterior { grid: grid.to_vec(), weights: w, x_est, sigma_est: math::sqrt(var.max(0.0)) })
}

/// Posterior over `x` for `H(x) = xQ + (1−x)P` with a uniform prior.
pub fn infer_x(events: &[(f64, f64)], grid_size: usize) -> Result<Posterior> {
    let mut table = LikelihoodTable::new(uniform_grid(grid_size)?);
    let mut counts: Vec<u64> = Vec::new();
    for &(q, p) in events {
        let r = table.key(q, p)?;
        if r >= counts.len() {
            counts.resize(r + 1, 0);
        }
        counts[r] += 1;
    }
    table.posterior(&counts)
}

/// Hypothesis the binary test favoured on the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Favored {
    Q,
    P,
}

/// Distinct `(q, p)` values with multiplicities, in a canonical order.
fn grouped(events: &[(f64, f64)]) -> Result<Vec<(f64, f64, f64)>> {
    let mut map: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for &(q, p) in events {
        if q == 0.0 && p == 0.0 {
            return Err(Error::ImpossibleEvent);
        }
        *map.entry((q.to_bits(), p.to_bits())).or_insert(0) += 1;
    }
    Ok(map.into_iter().map(|((q, p), c)| (f64::from_bits(q), f64::from_bits(p), c as f64)).collect())
}

fn convex_terms(groups: &[(f64, f64, f64)], x: f64, favored: Favored) -> f64 {
    let mut s = 0.0;
    for &(q, p, c) in groups {
        let h = x * q + (1.0 - x) * p;
        s += c * match favored {
            Favored::Q => math::ln(q) - math::ln(h),
            Favored::P => math::ln(h) - math::ln(p),
        };
    }
    s
}

/// `ln R(x)` of the convex test: `Σ ln(q/h(x))` when `Q` is favoured,
/// `Σ ln(h(x)/p)` when `P` is. Zero at `x = 1` and `x = 0` respectively.
pub fn convex_log_ratio(events: &[(f64, f64)], x: f64, favored: Favored) -> Result<f64> {
    Ok(convex_terms(&grouped(events)?, x, favored))
}

/// Threshold `x_th`: the non-trivial root of `R(x) = 1` on `[ε, 1−ε]`.
pub fn stage_a(events: &[(f64, f64)], favored: Favored) -> Result<f64> {
    let groups = grouped(events)?;
    let f = |x: f64| convex_terms(&groups, x, favored);
    let (lo, hi) = (STAGE_A_EPSILON, 1.0 - STAGE_A_EPSILON);
    match favored {
        // Concave with f(0) = 0: locate the maximum, then the descent through zero.
        Favored::P => {
            let (peak, _) = golden_section(|x| -f(x), lo, hi, 1e-10);
            bisect(f, peak, hi, 1e-12, "stage A (favoured P)")
        }
        // Convex with f(1) = 0: locate the minimum, then the descent from the left.
        Favored::Q => {
            let (low, _) = golden_section(f, lo, hi, 1e-10);
            bisect(f, lo, low, 1e-12, "stage A (favoured Q)")
        }
    }
}

/// Result of [`stage_b`].
#[derive(Clone, Debug, PartialEq)]
pub struct StageBResult {
    /// Root `y'` for each repeat.
    pub roots: Vec<f64>,
    pub interval: (f64, f64),
}

/// Sum of per-event terms that may be infinite.
#[derive(Clone, Copy, Debug, Default)]
struct ExtSum {
    finite: f64,
    plus: u32,
    minus: u32,
}

impl ExtSum {
    fn add(&mut self, v: f64) {
        if v == f64::INFINITY {
            self.plus += 1;
        } else if v == f64::NEG_INFINITY {
            self.minus += 1;
        } else {
            self.finite += v;
        }
    }

    fn plus(self, o: Self) -> Self {
        Self { finite: self.finite + o.finite, plus: self.plus + o.plus, minus: self.minus + o.minus }
    }

    fn value(self) -> f64 {
        match (self.plus > 0, self.minus > 0) {
            (true, true) => f64::NAN,
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => self.finite,
        }
    }
}

/// A simulated sample whose log ratio can be evaluated exactly for any mixture parameter.
///
/// Events are sorted by their mixture variate; for parameter `y` the first
/// `k(y)` follow `Q` and the rest follow `P`, so the log ratio is
/// `prefix_q[k] + suffix_p[k]`.
struct CoupledSample {
    mix: Vec<f64>,
    prefix_q: Vec<ExtSum>,
    suffix_p: Vec<ExtSum>,
}

impl CoupledSample {
    fn new(family: &InputFamily, n: usize, seed: u64, index: u64, term: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = rng::stream(seed, index);
        let mut draws: Vec<SimDraw> = (0..n).map(|_| family.draw(&mut g)).collect();
        draws.sort_by(|a, b| a.mix.total_cmp(&b.mix));
        let value = |d: &SimDraw, from_q: bool| {
            let s = family.realize(d, from_q);
            let pair = &family.pairs[d.input];
            term(pair.q[s], pair.p[s])
        };
        let mut prefix_q = Vec::with_capacity(n + 1);
        let mut acc = ExtSum::default();
        prefix_q.push(acc);
        for d in &draws {
            acc.add(value(d, true));
            prefix_q.push(acc);
        }
        let mut suffix_p = vec![ExtSum::default(); n + 1];
        for k in (0..n).rev() {
            let mut e = suffix_p[k + 1];
            e.add(value(&draws[k], false));
            suffix_p[k] = e;
        }
        Self { mix: draws.iter().map(|d| d.mix).collect(), prefix_q, suffix_p }
    }

    /// Value when the first `k` events follow `Q`.
    fn at_count(&self, k: usize) -> f64 {
        self.prefix_q[k].plus(self.suffix_p[k]).value()
    }

    fn at(&self, y: f64) -> f64 {
        self.at_count(self.mix.partition_point(|&m| m < y))
    }

    /// Smallest `y` at which the value becomes non-negative.
    fn first_crossing(&self) -> Option<f64> {
        (0..=self.mix.len()).find(|&k| self.at_count(k) >= 0.0).map(|k| if k == 0 { 0.0 } else { self.mix[k - 1] })
    }

    /// Smallest `y` at which the value becomes non-positive.
    fn first_drop(&self) -> Option<f64> {
        (0..=self.mix.len()).find(|&k| self.at_count(k) <= 0.0).map(|k| if k == 0 { 0.0 } else { self.mix[k - 1] })
    }
}

/// Stage B: simulated samples of size `n_sim` from `H(y)` tested with the
/// hypotheses fixed at the favoured one and `H(x_th)`; `y'` is where the
/// ratio crosses 1. Repeated `n_repeats` times.
pub fn stage_b(x_th: f64, favored: Favored, family: &InputFamily, n_sim: usize, n_repeats: usize, seed: u64) -> Result<StageBResult> {
    if n_sim == 0 || n_repeats == 0 {
        return Err(Error::InvalidParameters("n_sim and n_repeats must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&x_th) {
        return Err(Error::OutOfRange { name: "x_th", value: x_th });
    }
    let roots = par::map_indexed(n_repeats, |r| {
        let term = |q: f64, p: f64| {
            let h = x_th * q + (1.0 - x_th) * p;
            match favored {
                Favored::P => math::ln(h) - math::ln(p),
                Favored::Q => math::ln(q) - math::ln(h),
            }
        };
        let s = CoupledSample::new(family, n_sim, seed, r as u64, term);
        // Favoured P: ln R' rises from negative (y = 0) through zero.
        // Favoured Q: ln R' falls from positive through zero.
        match favored {
            Favored::P => s.first_crossing(),
            Favored::Q => s.first_drop(),
        }
        .ok_or(Error::NoSignChange("stage B"))
    });
    let roots = roots.into_iter().collect::<Result<Vec<_>>>()?;
    let lo = roots.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = roots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StageBResult { roots, interval: (lo, hi) })
}

/// Coupled samples for the `Q` vs `P` test on data from `H(x)`.
pub struct ThresholdScan {
    samples: Vec<CoupledSample>,
}

impl ThresholdScan {
    pub fn new(family: &InputFamily, n_events: usize, num_samples: usize, seed: u64) -> Result<Self> {
        if n_events == 0 || num_samples == 0 {
            return Err(Error::InvalidParameters("n_events and num_samples must be at least 1".into()));
        }
        let term = |q: f64, p: f64| math::ln(q) - math::ln(p);
        let samples = par::map_indexed(num_samples, |i| CoupledSample::new(family, n_events, seed, i as u64, term));
        Ok(Self { samples })
    }

    /// Mean `Pr(Q | data)` over samples drawn from `H(x)`.
    pub fn confidence(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for sample in &self.samples {
            let v = sample.at(x);
            let l = if v.is_nan() { 0.0 } else { v.clamp(-DEFAULT_LOG_CAP, DEFAULT_LOG_CAP) };
            s += posterior_probabilities(l).0;
        }
        s / self.samples.len() as f64
    }

    /// Crossing of `confidence(x) = 0.5`.
    pub fn crossing(&self) -> Result<f64> {
        bisect(|x| self.confidence(x) - 0.5, 0.0, 1.0, 1e-9, "threshold scan")
    }
}

/// Indistinguishability above which data from `H(x)` is still assigned to `Q`.
pub fn threshold_scan(family: &InputFamily, n_events: usize, num_samples: usize, seed: u64) -> Result<f64> {
    ThresholdScan::new(family, n_events, num_samples, seed)?.crossing()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::collision_free_inputs;
    use crate::matrices::{fourier, sylvester};

    fn hom_family() -> InputFamily {
        let input: ModeConfig = "1-1".parse().unwrap();
        let (q, p) = distribution_pair(&fourier(2), &input, CollisionPolicy::WithCollisions).unwrap();
        InputFamily::single(input, HypothesisPair::new(&q, &p).unwrap()).unwrap()
    }

    #[test]
    fn llr_examples() {
        let e: [(f64, f64); 0] = [];
        assert_eq!(log_likelihood_ratio(&e, |x| x.0, |x| x.1).unwrap().value, 0.0);
        assert_eq!(log_likelihood_ratio(&[(0.3, 0.3)], |x| x.0, |x| x.1).unwrap().value, 0.0);
        let hom = [(0.5, 0.25); 10];
        let l = log_likelihood_ratio(&hom, |x| x.0, |x| x.1).unwrap().value;
        assert!((l - 10.0 * core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(log_likelihood_ratio(&[(0.0, 0.0)], |x| x.0, |x| x.1), Err(Error::ImpossibleEvent));
        let sat = log_likelihood_ratio(&[(0.5, 0.0), (0.1, 0.2)], |x| x.0, |x| x.1).unwrap();
        assert_eq!(sat, CappedLogRatio { value: DEFAULT_LOG_CAP, saturated: true });
        assert_eq!(log_likelihood_ratio(&[(0.5, 0.0), (0.0, 0.5)], |x| x.0, |x| x.1), Err(Error::ContradictoryEvidence));
    }

    #[test]
    fn confidence_curve_limits() {
        let c = confidence_curve(&hom_family(), 20, 50, 1).unwrap();
        assert_eq!(c[0], (0, 0.5));
        assert!(c[20].1 > 0.9);
        let input: ModeConfig = "1-1".parse().unwrap();
        let (q, _) = distribution_pair(&fourier(2), &input, CollisionPolicy::WithCollisions).unwrap();
        let same = InputFamily::single(input, HypothesisPair::new(&q, &q).unwrap()).unwrap();
        assert!(confidence_curve(&same, 20, 10, 1).unwrap().iter().all(|&(_, v)| v == 0.5));
    }

    #[test]
    fn posterior_probabilities_are_complementary() {
        for l in [-800.0, -3.3, -1e-9, 0.0, 0.1, 2.7, 35.0, 700.0] {
            let (a, b) = posterior_probabilities(l);
            assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn prior_moments() {
        let p = infer_x(&[], DEFAULT_GRID).unwrap();
        assert!((p.x_est - 0.5).abs() < 1e-12);
        assert!((p.sigma_est - 1.0 / math::sqrt(12.0)).abs() < 1e-4);
        assert!((trapezoid(&p.grid, |k| p.weights[k]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_is_order_invariant() {
        let ev = [(0.5, 0.25), (0.0, 0.5), (0.5, 0.25), (0.2, 0.3)];
        let mut rev = ev;
        rev.reverse();
        assert_eq!(infer_x(&ev, 501).unwrap(), infer_x(&rev, 501).unwrap());
        assert_eq!(infer_x(&[(0.0, 0.0)], 11), Err(Error::ImpossibleEvent));
    }

    #[test]
    fn convex_ratio_identities() {
        let ev = [(0.1, 0.3), (0.37, 0.2), (0.0, 0.25), (0.6, 0.15)];
        assert_eq!(convex_log_ratio(&ev[..2], 1.0, Favored::Q).unwrap(), 0.0);
        assert_eq!(convex_log_ratio(&ev, 0.0, Favored::P).unwrap(), 0.0);
    }

    #[test]
    fn stage_a_finds_interior_root() {
        // Data from H(0.5) on a family favouring neither extreme.
        let u = sylvester(2);
        let fam = InputFamily::from_unitary(&u, collision_free_inputs(2, 4), OutcomeModel::PostSelected, None).unwrap();
        let mut g = rng::seeded(4);
        let ev: Vec<(f64, f64)> = (0..5000)
            .map(|_| {
                let d = fam.draw(&mut g);
                let s = fam.realize_mixture(&d, 0.4);
                (fam.pairs()[d.input].q()[s], fam.pairs()[d.input].p()[s])
            })
            .collect();
        let x = stage_a(&ev, Favored::P).unwrap();
        assert!(x > 0.4 && x < 1.0, "{x}");
        assert!(convex_log_ratio(&ev, x, Favored::P).unwrap().abs() < 1e-6);
    }

    #[test]
    fn hom_stream_has_no_coincidences_at_full_indistinguishability() {
        let fam = hom_family();
        let mut g = rng::seeded(2);
        for _ in 0..1000 {
            let d = fam.draw(&mut g);
            assert_ne!(fam.event(d.input, fam.realize_mixture(&d, 1.0)).output.to_string(), "1-1");
        }
    }
}
