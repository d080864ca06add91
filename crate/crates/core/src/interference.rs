//! Exact output statistics for indistinguishable and distinguishable photons.
//!
//! The amplitude for a photon entering mode `k` to leave in mode `j` is `U[(j, k)]`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::math;
use crate::matrix::{RealMatrix, UnitaryMatrix};
use crate::permanent::glynn;
use crate::{Error, Result};

/// Probabilities below this are treated as exact zeros.
pub const CLAMP: f64 = 1e-15;
/// Allowed deviation of a distribution's total from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Photon counts per mode.
///
/// Ordering: by photon number, then by the sorted list of occupied modes
/// (with multiplicity). For two photons in two modes this gives
/// `2-0 < 1-1 < 0-2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeConfig {
    occupations: Vec<u16>,
}

impl ModeConfig {
    pub fn new(occupations: Vec<u16>) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::InvalidConfig("no modes".to_string()));
        }
        if occupations.iter().all(|&o| o == 0) {
            return Err(Error::InvalidConfig("no photons".to_string()));
        }
        Ok(Self { occupations })
    }

    /// One photon per listed (zero-based) mode; repeats stack.
    pub fn from_modes(m: usize, modes: &[usize]) -> Result<Self> {
        let mut occ = vec![0u16; m];
        for &k in modes {
            if k >= m {
                return Err(Error::ModeOutOfRange { index: k, modes: m });
            }
            occ[k] += 1;
        }
        Self::new(occ)
    }

    /// Collision-free configuration; rejects repeated modes.
    pub fn from_distinct_modes(m: usize, modes: &[usize]) -> Result<Self> {
        let c = Self::from_modes(m, modes)?;
        if !c.is_collision_free() {
            let dup = modes.iter().copied().find(|&k| c.occupations[k] > 1).unwrap_or(0);
            return Err(Error::DuplicateMode(dup));
        }
        Ok(c)
    }

    pub fn occupations(&self) -> &[u16] {
        &self.occupations
    }

    pub fn modes_count(&self) -> usize {
        self.occupations.len()
    }

    pub fn photons(&self) -> usize {
        self.occupations.iter().map(|&o| o as usize).sum()
    }

    /// Occupied modes with multiplicity, ascending.
    pub fn modes(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.photons());
        for (k, &o) in self.occupations.iter().enumerate() {
            v.extend(core::iter::repeat_n(k, o as usize));
        }
        v
    }

    pub fn is_collision_free(&self) -> bool {
        self.occupations.iter().all(|&o| o <= 1)
    }

    /// `∏ s_j!`.
    pub fn multiplicity_factor(&self) -> f64 {
        self.occupations.iter().map(|&o| math::factorial(o as usize)).product()
    }

    /// Relabels modes: photon count of mode `k` moves to `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.occupations.len() {
            return Err(Error::DimensionMismatch { expected: self.occupations.len(), found: perm.len() });
        }
        let mut occ = vec![0u16; perm.len()];
        for (k, &o) in self.occupations.iter().enumerate() {
            occ[perm[k]] = o;
        }
        Ok(Self { occupations: occ })
    }
}

impl Ord for ModeConfig {
    fn cmp(&self, other: &Self) -> Ordering {
        self.photons()
            .cmp(&other.photons())
            .then_with(|| self.modes().cmp(&other.modes()))
            .then_with(|| self.occupations.len().cmp(&other.occupations.len()))
    }
}

impl PartialOrd for ModeConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, o) in self.occupations.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{o}")?;
        }
        Ok(())
    }
}

impl FromStr for ModeConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let occ = s
            .trim()
            .split('-')
            .map(|t| t.trim().parse::<u16>().map_err(|_| Error::InvalidConfig(alloc::format!("bad occupation `{t}` in `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(occ)
    }
}

/// An outcome: a detected configuration, or the bin collecting all collision events.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutcomeLabel {
    Config(ModeConfig),
    Collision,
}

impl OutcomeLabel {
    pub const COLLISION_TOKEN: &'static str = "COLL";

    pub fn config(&self) -> Option<&ModeConfig> {
        match self {
            Self::Config(c) => Some(c),
            Self::Collision => None,
        }
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(c) => c.fmt(f),
            Self::Collision => f.write_str(Self::COLLISION_TOKEN),
        }
    }
}

impl FromStr for OutcomeLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == Self::COLLISION_TOKEN {
            Ok(Self::Collision)
        } else {
            s.parse().map(Self::Config)
        }
    }
}

/// How outputs with two or more photons in one mode are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CollisionPolicy {
    /// Every occupation pattern is its own outcome.
    #[default]
    WithCollisions,
    /// All collision patterns share one outcome.
    Binned,
}

impl fmt::Display for CollisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WithCollisions => "col",
            Self::Binned => "binned",
        })
    }
}

impl FromStr for CollisionPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "col" | "with-collisions" => Ok(Self::WithCollisions),
            "binned" | "no-col" => Ok(Self::Binned),
            other => Err(Error::InvalidParameters(alloc::format!("unknown collision policy `{other}`"))),
        }
    }
}

/// Calls `f` on every non-decreasing `n`-tuple of modes in `0..m`, in lexicographic order.
fn for_each_multiset(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m == 0 {
        return;
    }
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        // Advance the rightmost position that can still grow.
        let Some(pos) = (0..n).rev().find(|&i| idx[i] + 1 < m) else { return };
        let v = idx[pos] + 1;
        idx[pos..].iter_mut().for_each(|x| *x = v);
    }
}

fn config_from_sorted_modes(m: usize, modes: &[usize]) -> ModeConfig {
    let mut occ = vec![0u16; m];
    for &k in modes {
        occ[k] += 1;
    }
    ModeConfig { occupations: occ }
}

/// All output labels for `n` photons in `m` modes under `policy`, in [`ModeConfig`] order;
/// the collision bin, if any, comes last.
pub fn enumerate_outputs(n: usize, m: usize, policy: CollisionPolicy) -> Vec<OutcomeLabel> {
    let mut out = Vec::new();
    for_each_multiset(n, m, |modes| {
        let free = modes.windows(2).all(|w| w[0] != w[1]);
        if policy == CollisionPolicy::WithCollisions || free {
            out.push(OutcomeLabel::Config(config_from_sorted_modes(m, modes)));
        }
    });
    if policy == CollisionPolicy::Binned && n >= 2 {
        out.push(OutcomeLabel::Collision);
    }
    out
}

/// All collision-free inputs of `n` photons in `m` modes, in order.
pub fn collision_free_inputs(n: usize, m: usize) -> Vec<ModeConfig> {
    enumerate_outputs(n, m, CollisionPolicy::Binned)
        .into_iter()
        .filter_map(|l| match l {
            OutcomeLabel::Config(c) => Some(c),
            OutcomeLabel::Collision => None,
        })
        .collect()
}

/// Normalized probabilities over unique labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    labels: Vec<OutcomeLabel>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(labels: Vec<OutcomeLabel>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: probs.len() });
        }
        if labels.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".to_string()));
        }
        let mut sorted: Vec<&OutcomeLabel> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution("duplicate label".to_string()));
        }
        if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0 + NORMALIZATION_TOLERANCE).contains(*p)) {
            return Err(Error::InvalidDistribution(alloc::format!("probability {bad} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(alloc::format!("probabilities sum to {total}")));
        }
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OutcomeLabel, f64)> {
        self.labels.iter().zip(self.probs.iter().copied())
    }

    pub fn index_of(&self, label: &OutcomeLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn prob(&self, label: &OutcomeLabel) -> Option<f64> {
        self.index_of(label).map(|i| self.probs[i])
    }

    pub fn same_labels(&self, other: &Self) -> bool {
        self.labels == other.labels
    }

    /// Drops collision outcomes and renormalizes the rest.
    pub fn collision_free_part(&self) -> Result<Self> {
        let mut labels = Vec::new();
        let mut probs = Vec::new();
        for (l, p) in self.iter() {
            if l.config().is_some_and(ModeConfig::is_collision_free) {
                labels.push(l.clone());
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidDistribution("no collision-free probability".to_string()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { labels, probs })
    }
}

/// Output labels for a photon number and policy, with the map from
/// multiset outputs to label slots.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeSpace {
    photons: usize,
    modes: usize,
    policy: CollisionPolicy,
    labels: Vec<OutcomeLabel>,
    /// Sorted output modes for each multiset, and the slot it adds into.
    entries: Vec<(Vec<usize>, usize, f64)>,
}

impl OutcomeSpace {
    pub fn new(photons: usize, modes: usize, policy: CollisionPolicy) -> Result<Self> {
        if photons == 0 || modes == 0 {
            return Err(Error::InvalidParameters("need at least one photon and one mode".to_string()));
        }
        let labels = enumerate_outputs(photons, modes, policy);
        let coll_slot = labels.len().saturating_sub(1);
        let mut entries = Vec::new();
        let mut next = 0usize;
        for_each_multiset(photons, modes, |out| {
            let free = out.windows(2).all(|w| w[0] != w[1]);
            let factor = config_from_sorted_modes(modes, out).multiplicity_factor();
            let slot = if free || policy == CollisionPolicy::WithCollisions {
                next += 1;
                next - 1
            } else {
                coll_slot
            };
            entries.push((out.to_vec(), slot, factor));
        });
        Ok(Self { photons, modes, policy, labels, entries })
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn policy(&self) -> CollisionPolicy {
        self.policy
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Index of a label in [`Self::labels`].
    pub fn slot_of(&self, label: &OutcomeLabel) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    /// Indistinguishable and distinguishable probabilities for one input,
    /// aligned with [`Self::labels`].
    pub fn probabilities(&self, u: &UnitaryMatrix, input: &ModeConfig) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(u, input)?;
        let abs2 = u.matrix().squared_moduli();
        Ok(self.probabilities_unchecked(u, &abs2, &input.modes()))
    }

    pub(crate) fn check(&self, u: &UnitaryMatrix, input: &ModeConfig) -> Result<()> {
        if u.dim() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, found: u.dim() });
        }
        if input.modes_count() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, found: input.modes_count() });
        }
        if !input.is_collision_free() {
            return Err(Error::CollisionalInput);
        }
        if input.photons() != self.photons {
            return Err(Error::DimensionMismatch { expected: self.photons, found: input.photons() });
        }
        Ok(())
    }

    pub(crate) fn probabilities_unchecked(&self, u: &UnitaryMatrix, abs2: &RealMatrix, inputs: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.photons;
        let mut q = vec![0.0; self.labels.len()];
        let mut p = vec![0.0; self.labels.len()];
        let mut sub_c = vec![Complex64::new(0.0, 0.0); n * n];
        let mut sub_r = vec![0.0; n * n];
        for (outs, slot, factor) in &self.entries {
            for (r, &o) in outs.iter().enumerate() {
                for (c, &i) in inputs.iter().enumerate() {
                    sub_c[r * n + c] = u[(o, i)];
                    sub_r[r * n + c] = abs2[(o, i)];
                }
            }
            q[*slot] += glynn(&sub_c, n).norm_sqr() / factor;
            p[*slot] += glynn(&sub_r, n) / factor;
        }
        for v in q.iter_mut().chain(p.iter_mut()) {
            if *v < CLAMP {
                *v = 0.0;
            }
        }
        (q, p)
    }
}

fn check_fit(n: usize, m: usize) -> Result<()> {
    if n > m {
        return Err(Error::TooManyPhotons { photons: n, modes: m });
    }
    Ok(())
}

/// `Q` and `P` for one input, sharing labels.
pub fn distribution_pair(u: &UnitaryMatrix, input: &ModeConfig, policy: CollisionPolicy) -> Result<(Distribution, Distribution)> {
    if !input.is_collision_free() {
        return Err(Error::CollisionalInput);
    }
    check_fit(input.photons(), u.dim())?;
    let space = OutcomeSpace::new(input.photons(), u.dim(), policy)?;
    let (q, p) = space.probabilities(u, input)?;
    Ok((Distribution::new(space.labels.clone(), q)?, Distribution::new(space.labels, p)?))
}

/// Output distribution for indistinguishable photons.
pub fn distribution_indistinguishable(u: &UnitaryMatrix, input: &ModeConfig, policy: CollisionPolicy) -> Result<Distribution> {
    distribution_pair(u, input, policy).map(|(q, _)| q)
}

/// Output distribution for distinguishable photons.
pub fn distribution_distinguishable(u: &UnitaryMatrix, input: &ModeConfig, policy: CollisionPolicy) -> Result<Distribution> {
    distribution_pair(u, input, policy).map(|(_, p)| p)
}

/// `x·Q + (1−x)·P`.
pub fn convex_mixture(q: &Distribution, p: &Distribution, x: f64) -> Result<Distribution> {
    if !q.same_labels(p) {
        return Err(Error::LabelMismatch);
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange { name: "x", value: x });
    }
    let probs = q.probs.iter().zip(&p.probs).map(|(&a, &b)| x * a + (1.0 - x) * b).collect();
    Ok(Distribution { labels: q.labels.clone(), probs })
}

/// Renders an input as one-based mode indices, e.g. `1,3`.
pub fn one_based_modes(c: &ModeConfig) -> String {
    let mut s = String::new();
    for (i, k) in c.modes().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&(k + 1).to_string());
    }
    s
}
