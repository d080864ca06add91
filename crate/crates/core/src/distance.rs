//! Total variation distance between the two hypotheses.

use alloc::vec::Vec;

use crate::interference::{collision_free_inputs, CollisionPolicy, Distribution, ModeConfig, OutcomeSpace};
use crate::matrix::UnitaryMatrix;
use crate::{par, Error, Result};

/// `½ Σ |p_i − q_i|` over distributions with identical labels.
pub fn tvd(p: &Distribution, q: &Distribution) -> Result<f64> {
    if !p.same_labels(q) {
        return Err(Error::LabelMismatch);
    }
    Ok(tvd_slices(p.probs(), q.probs()))
}

pub(crate) fn tvd_slices(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    (0.5 * s).min(1.0)
}

/// Distances for every input of a set, with best and mean.
#[derive(Clone, Debug, PartialEq)]
pub struct TvdReport {
    pub per_input: Vec<(ModeConfig, f64)>,
    pub best_input: ModeConfig,
    pub max_tvd: f64,
    pub avg_tvd: f64,
}

impl TvdReport {
    fn from_values(per_input: Vec<(ModeConfig, f64)>) -> Self {
        // Inputs arrive sorted; a strict comparison keeps the smallest on ties.
        let mut best = 0;
        for (i, (_, t)) in per_input.iter().enumerate() {
            if *t > per_input[best].1 {
                best = i;
            }
        }
        let avg_tvd = per_input.iter().map(|(_, t)| t).sum::<f64>() / per_input.len() as f64;
        Self { best_input: per_input[best].0.clone(), max_tvd: per_input[best].1, avg_tvd, per_input }
    }
}

/// Distance for every collision-free input of `photons` photons.
pub fn tvd_report(u: &UnitaryMatrix, photons: usize, policy: CollisionPolicy) -> Result<TvdReport> {
    if photons == 0 || photons > u.dim() {
        return Err(Error::TooManyPhotons { photons, modes: u.dim() });
    }
    tvd_report_for(u, &collision_free_inputs(photons, u.dim()), policy)
}

/// Distance for each of the given collision-free inputs (all with the same photon number).
pub fn tvd_report_for(u: &UnitaryMatrix, inputs: &[ModeConfig], policy: CollisionPolicy) -> Result<TvdReport> {
    let first = inputs.first().ok_or_else(|| Error::InvalidParameters("no inputs".into()))?;
    let space = OutcomeSpace::new(first.photons(), u.dim(), policy)?;
    for input in inputs {
        space.check(u, input)?;
    }
    let mut sorted = inputs.to_vec();
    sorted.sort();
    let abs2 = u.matrix().squared_moduli();
    let values = par::map_indexed(sorted.len(), |i| {
        let (q, p) = space.probabilities_unchecked(u, &abs2, &sorted[i].modes());
        tvd_slices(&p, &q)
    });
    Ok(TvdReport::from_values(sorted.into_iter().zip(values).collect()))
}

/// Same statistics without parallel fan-out; for callers that already parallelize.
pub(crate) fn tvd_values_serial(u: &UnitaryMatrix, space: &OutcomeSpace, inputs: &[Vec<usize>]) -> Vec<f64> {
    let abs2 = u.matrix().squared_moduli();
    inputs
        .iter()
        .map(|modes| {
            let (q, p) = space.probabilities_unchecked(u, &abs2, modes);
            tvd_slices(&p, &q)
        })
        .collect()
}

/// Cyclic inputs for `n` photons in `n^p` modes: occupied modes
/// `s + r·n^(p−1)` for `r = 0..n`, one input per `s = 0..n^(p−1)`.
pub fn cyclic_inputs(n: usize, p: u32) -> Result<Vec<ModeConfig>> {
    if n < 1 || p < 1 {
        return Err(Error::InvalidParameters("cyclic inputs need n >= 1 and p >= 1".into()));
    }
    let stride = n.checked_pow(p - 1).ok_or(Error::NotAPower { modes: usize::MAX, photons: n })?;
    let m = stride * n;
    (0..stride)
        .map(|s| {
            let modes: Vec<usize> = (0..n).map(|r| s + r * stride).collect();
            ModeConfig::from_distinct_modes(m, &modes)
        })
        .collect()
}

/// [`cyclic_inputs`] for `m` modes, which must be an exact power of `n`.
pub fn cyclic_inputs_for_modes(n: usize, m: usize) -> Result<Vec<ModeConfig>> {
    if n < 2 {
        return Err(Error::NotAPower { modes: m, photons: n });
    }
    let mut size = n;
    let mut p = 1;
    while size < m {
        size *= n;
        p += 1;
    }
    if size != m {
        return Err(Error::NotAPower { modes: m, photons: n });
    }
    cyclic_inputs(n, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interference::{distribution_pair, OutcomeLabel};
    use crate::matrices::{fourier, notable, sylvester, NotableId};

    #[test]
    fn basic_distances() {
        let l = alloc::vec![OutcomeLabel::Collision, OutcomeLabel::Config("1-1".parse().unwrap())];
        let a = Distribution::new(l.clone(), alloc::vec![1.0, 0.0]).unwrap();
        let b = Distribution::new(l, alloc::vec![0.0, 1.0]).unwrap();
        assert_eq!(tvd(&a, &a).unwrap(), 0.0);
        assert_eq!(tvd(&a, &b).unwrap(), 1.0);
        let (q, p) = distribution_pair(&fourier(2), &"1-1".parse().unwrap(), CollisionPolicy::WithCollisions).unwrap();
        assert!((tvd(&p, &q).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn report_examples() {
        let r = tvd_report(&sylvester(2), 2, CollisionPolicy::WithCollisions).unwrap();
        assert!((r.max_tvd - 0.5).abs() < 1e-12 && (r.avg_tvd - 0.5).abs() < 1e-12);
        assert_eq!(r.best_input.to_string(), "1-1-0-0");
        let r = tvd_report(&fourier(4), 2, CollisionPolicy::WithCollisions).unwrap();
        assert!((r.max_tvd - 0.5).abs() < 1e-12 && (r.avg_tvd - 1.0 / 3.0).abs() < 1e-12);
        let r = tvd_report(&notable(NotableId::U4Main), 3, CollisionPolicy::WithCollisions).unwrap();
        assert!((r.max_tvd - 0.5625).abs() < 1e-12 && (r.avg_tvd - 0.53125).abs() < 1e-12);
    }

    #[test]
    fn cyclic_examples() {
        let s = |v: Vec<ModeConfig>| v.iter().map(crate::interference::one_based_modes).collect::<Vec<_>>();
        assert_eq!(s(cyclic_inputs(2, 2).unwrap()), ["1,3", "2,4"]);
        assert_eq!(s(cyclic_inputs(2, 1).unwrap()), ["1,2"]);
        assert_eq!(s(cyclic_inputs(2, 3).unwrap()), ["1,5", "2,6", "3,7", "4,8"]);
        assert_eq!(s(cyclic_inputs_for_modes(3, 9).unwrap()), ["1,4,7", "2,5,8", "3,6,9"]);
        assert!(matches!(cyclic_inputs_for_modes(2, 6), Err(Error::NotAPower { .. })));
    }
}
