//! Interferometer constructors.
//!
//! Mode indices in this module are zero-based.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::math::{self, FRAC_1_SQRT_2, PI, TAU};
use crate::matrix::{ComplexMatrix, UnitaryMatrix};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::{rng, Error, Result};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Normalized Sylvester–Hadamard matrix on `2^p` modes.
pub fn sylvester(p: u32) -> UnitaryMatrix {
    let dim = 1usize << p;
    let scale = math::pow(2.0, -(p as f64) / 2.0);
    // Entry sign is the parity of popcount(r & c).
    let m = ComplexMatrix::from_fn(dim, |r, c| {
        if (r & c).count_ones() % 2 == 0 { re(scale) } else { re(-scale) }
    });
    UnitaryMatrix::from_trusted(m)
}

/// Discrete Fourier transform on `m` modes, `(1/√m) exp(2πi lq/m)`.
pub fn fourier(m: usize) -> UnitaryMatrix {
    let scale = 1.0 / math::sqrt(m as f64);
    let mm = ComplexMatrix::from_fn(m, |l, q| math::cis(TAU * ((l * q) % m) as f64 / m as f64) * scale);
    UnitaryMatrix::from_trusted(mm)
}

/// Balanced beam splitter `(1/√2)[[1,1],[1,−1]]` between modes `a` and `b`.
pub fn beam_splitter(m: usize, a: usize, b: usize) -> Result<UnitaryMatrix> {
    embed(&sylvester(1), m, &[a, b])
}

/// Acts as `small` on `modes` and as the identity elsewhere.
pub fn embed(small: &UnitaryMatrix, m: usize, modes: &[usize]) -> Result<UnitaryMatrix> {
    if modes.len() != small.dim() {
        return Err(Error::DimensionMismatch { expected: small.dim(), found: modes.len() });
    }
    let mut seen = vec![false; m];
    for &k in modes {
        if k >= m {
            return Err(Error::ModeOutOfRange { index: k, modes: m });
        }
        if core::mem::replace(&mut seen[k], true) {
            return Err(Error::DuplicateMode(k));
        }
    }
    let mut out = ComplexMatrix::identity(m);
    for (i, &r) in modes.iter().enumerate() {
        for (j, &c) in modes.iter().enumerate() {
            out[(r, c)] = small[(i, j)];
        }
    }
    Ok(UnitaryMatrix::from_trusted(out))
}

/// Named designs from the optimal-interferometer table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NotableId {
    U1,
    U2,
    U3,
    U4,
    U5,
    U6,
    U7,
    U8,
    U9,
    U10,
    /// The explicit 4-mode, 3-photon design (same statistics as `U4`).
    U4Main,
}

impl NotableId {
    pub const ALL: [NotableId; 11] = [
        Self::U1,
        Self::U2,
        Self::U3,
        Self::U4,
        Self::U5,
        Self::U6,
        Self::U7,
        Self::U8,
        Self::U9,
        Self::U10,
        Self::U4Main,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::U1 => "U1",
            Self::U2 => "U2",
            Self::U3 => "U3",
            Self::U4 => "U4",
            Self::U5 => "U5",
            Self::U6 => "U6",
            Self::U7 => "U7",
            Self::U8 => "U8",
            Self::U9 => "U9",
            Self::U10 => "U10",
            Self::U4Main => "U4main",
        }
    }
}

impl fmt::Display for NotableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NotableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownNotable(s.to_string()))
    }
}

/// Builds a notable design. Beam splitters are the real balanced form.
pub fn notable(id: NotableId) -> UnitaryMatrix {
    let bs = |m, a, b| beam_splitter(m, a, b).expect("static mode indices");
    let then = |first: UnitaryMatrix, second: UnitaryMatrix| second.then_after(&first).expect("same dimension");
    match id {
        NotableId::U1 => then(bs(3, 0, 1), bs(3, 1, 2)),
        NotableId::U2 => {
            let rows = [[1.0, 2.0, 2.0], [2.0, -2.0, 1.0], [2.0, 1.0, -2.0]];
            UnitaryMatrix::from_trusted(ComplexMatrix::from_fn(3, |r, c| re(rows[r][c] / 3.0)))
        }
        NotableId::U3 => bs(3, 0, 1),
        NotableId::U4 => then(bs(4, 0, 1), then(bs(4, 0, 2), bs(4, 1, 3))),
        NotableId::U5 => embed(&fourier(3), 4, &[0, 1, 2]).expect("static mode indices"),
        NotableId::U6 => then(bs(4, 0, 2), bs(4, 1, 3)),
        NotableId::U7 => bs(4, 0, 1),
        NotableId::U8 => embed(&fourier(3), 8, &[0, 1, 2]).expect("static mode indices"),
        NotableId::U9 => bs(8, 0, 1),
        NotableId::U10 => embed(&fourier(4), 8, &[0, 1, 2, 3]).expect("static mode indices"),
        NotableId::U4Main => {
            let s = math::sqrt(2.0);
            let rows = [[1.0, 1.0, s, 0.0], [1.0, -1.0, 0.0, s], [1.0, 1.0, -s, 0.0], [1.0, -1.0, 0.0, -s]];
            UnitaryMatrix::from_trusted(ComplexMatrix::from_fn(4, |r, c| re(rows[r][c] / 2.0)))
        }
    }
}

/// Haar-random unitary drawn from a seed.
pub fn haar_random(m: usize, seed: u64) -> UnitaryMatrix {
    haar_random_with(m, &mut rng::seeded(seed))
}

/// Haar-random unitary from an existing generator.
///
/// Gram–Schmidt on the columns of a complex Gaussian matrix is the QR
/// decomposition with a positive real triangular diagonal, which is exactly
/// the phase fix Haar uniformity needs.
pub fn haar_random_with<R: Rng + ?Sized>(m: usize, rng: &mut R) -> UnitaryMatrix {
    let h = FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<Complex64>> = (0..m)
        .map(|_| (0..m).map(|_| Complex64::new(h * rng::standard_normal(rng), h * rng::standard_normal(rng))).collect())
        .collect();
    for k in 0..m {
        // Two passes of modified Gram–Schmidt keep the result unitary to rounding.
        for _ in 0..2 {
            for j in 0..k {
                let (done, rest) = cols.split_at_mut(k);
                let proj: Complex64 = done[j].iter().zip(rest[0].iter()).map(|(a, b)| a.conj() * b).sum();
                for (x, q) in rest[0].iter_mut().zip(done[j].iter()) {
                    *x -= proj * q;
                }
            }
        }
        let norm = math::sqrt(cols[k].iter().map(|z| z.norm_sqr()).sum());
        cols[k].iter_mut().for_each(|z| *z /= norm);
    }
    UnitaryMatrix::from_trusted(ComplexMatrix::from_fn(m, |r, c| cols[c][r]))
}

/// Parameters of the layered fast architecture on `2^p` modes.
///
/// Layer `t` (zero-based) couples modes `a` and `a + 2^t` for every `a` whose
/// bit `t` is clear; pairs are numbered by increasing `a`. Each coupler is
/// `[[τ, √(1−τ²)], [√(1−τ²), −τ]]` followed by a phase `e^{iφ}` on the
/// higher-index mode of the pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitParams {
    p: u32,
    tau: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
}

impl CircuitParams {
    pub fn new(p: u32, tau: Vec<Vec<f64>>, phi: Vec<Vec<f64>>) -> Result<Self> {
        if p == 0 || p > 16 {
            return Err(Error::InvalidParameters("fast architecture needs 1 <= p <= 16".to_string()));
        }
        let pairs = 1usize << (p - 1);
        for table in [&tau, &phi] {
            if table.len() != p as usize {
                return Err(Error::DimensionMismatch { expected: p as usize, found: table.len() });
            }
            for layer in table.iter() {
                if layer.len() != pairs {
                    return Err(Error::DimensionMismatch { expected: pairs, found: layer.len() });
                }
            }
        }
        for &t in tau.iter().flatten() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::OutOfRange { name: "tau", value: t });
            }
        }
        if let Some(&bad) = phi.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange { name: "phi", value: bad });
        }
        Ok(Self { p, tau, phi })
    }

    /// Every τ equal and every φ equal.
    pub fn uniform(p: u32, tau: f64, phi: f64) -> Result<Self> {
        let pairs = 1usize << p.saturating_sub(1);
        Self::new(p, vec![vec![tau; pairs]; p as usize], vec![vec![phi; pairs]; p as usize])
    }

    /// Balanced couplers, zero phases: realizes `sylvester(p)`.
    pub fn balanced(p: u32) -> Result<Self> {
        Self::uniform(p, FRAC_1_SQRT_2, 0.0)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        1 << self.p
    }

    pub fn pairs_per_layer(&self) -> usize {
        1 << (self.p - 1)
    }

    pub fn tau(&self) -> &[Vec<f64>] {
        &self.tau
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn with_phi(&self, phi: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.p, self.tau.clone(), phi)
    }

    pub fn with_tau(&self, tau: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.p, tau, self.phi.clone())
    }
}

/// The mode pair `(a, b)` of coupler `k` in zero-based layer `t`.
pub fn layer_pair(t: u32, k: usize) -> (usize, usize) {
    let half = 1usize << t;
    let a = (k / half) * (half << 1) + (k % half);
    (a, a + half)
}

/// Composes the layered circuit. Layer 0 acts first.
pub fn fast_circuit(params: &CircuitParams) -> UnitaryMatrix {
    let d = params.dim();
    let mut u = ComplexMatrix::identity(d);
    for t in 0..params.p {
        for k in 0..params.pairs_per_layer() {
            let (a, b) = layer_pair(t, k);
            let tau = params.tau[t as usize][k];
            let s = math::sqrt((1.0 - tau * tau).max(0.0));
            let phase = math::cis(params.phi[t as usize][k]);
            for c in 0..d {
                let xa = u[(a, c)];
                let xb = u[(b, c)];
                u[(a, c)] = xa * tau + xb * s;
                u[(b, c)] = (xa * s - xb * tau) * phase;
            }
        }
    }
    UnitaryMatrix::from_trusted(u)
}

/// `(1/d)|Tr(ideal† · rec)|`.
pub fn fidelity(ideal: &UnitaryMatrix, rec: &UnitaryMatrix) -> Result<f64> {
    fidelity_of(ideal.matrix(), rec.matrix())
}

/// Fidelity for general (possibly lossy) square matrices.
pub fn fidelity_of(ideal: &ComplexMatrix, rec: &ComplexMatrix) -> Result<f64> {
    let d = ideal.dim();
    if rec.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rec.dim() });
    }
    let tr: Complex64 = ideal.as_slice().iter().zip(rec.as_slice()).map(|(a, b)| a.conj() * b).sum();
    Ok(tr.norm() / d as f64)
}

/// Fidelity after choosing the best phase for every input column.
/// Input phases never change photon-counting statistics.
pub fn fidelity_up_to_input_phases(target: &ComplexMatrix, rec: &ComplexMatrix) -> Result<f64> {
    let d = target.dim();
    if rec.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rec.dim() });
    }
    let mut total = 0.0;
    for c in 0..d {
        let overlap: Complex64 = (0..d).map(|r| target[(r, c)].conj() * rec[(r, c)]).sum();
        total += overlap.norm();
    }
    Ok(total / d as f64)
}

/// Index `k` with its lowest `bits` bits reversed.
pub fn bit_reverse(k: usize, bits: u32) -> usize {
    if bits == 0 { 0 } else { k.reverse_bits() >> (usize::BITS - bits) }
}

/// Fourier matrix on `2^p` modes with its input columns in bit-reversed order,
/// the form the fast architecture realizes.
pub fn fourier_bit_reversed(p: u32) -> UnitaryMatrix {
    let f = fourier(1 << p);
    let d = f.dim();
    let m = ComplexMatrix::from_fn(d, |r, c| f[(r, bit_reverse(c, p))]);
    UnitaryMatrix::from_trusted(m)
}

/// Outcome of [`solve_phases`].
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSolution {
    pub params: CircuitParams,
    pub fidelity: f64,
}

/// Finds fast-architecture phases (τ fixed by `base`) that best reproduce `target`
/// up to input phases. Starts are drawn from multiples of π/4.
pub fn solve_phases(target: &UnitaryMatrix, base: &CircuitParams, starts: usize, seed: u64) -> Result<PhaseSolution> {
    if target.dim() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), found: target.dim() });
    }
    let p = base.p as usize;
    let pairs = base.pairs_per_layer();
    let unpack = |x: &[f64]| -> Vec<Vec<f64>> { x.chunks(pairs).map(|c| c.to_vec()).collect() };
    let objective = |x: &[f64]| -> f64 {
        let params = CircuitParams { p: base.p, tau: base.tau.clone(), phi: unpack(x) };
        let u = fast_circuit(&params);
        -fidelity_up_to_input_phases(target.matrix(), u.matrix()).unwrap_or(0.0)
    };
    let opts = NelderMeadOptions { step: PI / 8.0, max_evaluations: 40_000, f_tol: 1e-16, x_tol: 1e-12, restarts: 4 };
    let mut rng = rng::seeded(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..starts.max(1) {
        let x0: Vec<f64> = if s == 0 {
            vec![0.0; p * pairs]
        } else {
            (0..p * pairs).map(|_| PI / 4.0 * rng.random_range(0..4u32) as f64).collect()
        };
        let m = nelder_mead(objective, &x0, &opts);
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value));
        }
        if best.as_ref().is_some_and(|b| b.1 < -1.0 + 1e-13) {
            break;
        }
    }
    let (x, value) = best.expect("at least one start");
    let phi = unpack(&x).into_iter().map(|l| l.into_iter().map(|v| math::wrap_phase(v)).collect()).collect();
    Ok(PhaseSolution { params: base.with_phi(phi)?, fidelity: -value })
}
