//! Reconstruction of fast-architecture devices from single-photon
//! probabilities and two-photon interference visibilities.
//!
//! Phase gauge: input phases and the output layer's phases are unobservable
//! in these data and fixed to zero. The remaining identifiable phases are
//! listed by [`FastTemplate`].

use alloc::vec;
use alloc::vec::Vec;

use crate::matrices::{fast_circuit, fidelity, layer_pair, sylvester, CircuitParams};
use crate::matrix::{ComplexMatrix, RealMatrix, UnitaryMatrix};
use crate::math::{self, FRAC_1_SQRT_2, PI};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::{par, rng, Error, Result};

/// Upper bound on relative output loss amplitudes.
pub const ETA_MAX: f64 = 4.0;
/// Error floor for noiseless synthetic data.
pub const ERROR_FLOOR: f64 = 1e-6;

/// Fast-architecture parameters plus relative output losses.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    circuit: CircuitParams,
    eta: Vec<f64>,
}

impl DeviceModel {
    pub fn new(circuit: CircuitParams, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != circuit.dim() {
            return Err(Error::DimensionMismatch { expected: circuit.dim(), found: eta.len() });
        }
        if eta[0] != 1.0 {
            return Err(Error::OutOfRange { name: "eta_1 (must be 1)", value: eta[0] });
        }
        if let Some(&bad) = eta.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::OutOfRange { name: "eta", value: bad });
        }
        Ok(Self { circuit, eta })
    }

    /// Balanced couplers, zero phases, no losses.
    pub fn ideal(p: u32) -> Result<Self> {
        let c = CircuitParams::balanced(p)?;
        let m = c.dim();
        Self::new(c, vec![1.0; m])
    }

    /// 4-mode reference device used as synthetic ground truth.
    pub fn reference_four_mode() -> Self {
        let tau = vec![vec![0.6879, 0.7195], vec![0.7139, 0.7031]];
        let phi = vec![vec![0.229, 0.0], vec![0.0, 0.0]];
        let c = CircuitParams::new(2, tau, phi).expect("static parameters");
        Self::new(c, vec![1.0, 1.134, 1.147, 0.961]).expect("static parameters")
    }

    /// 8-mode reference device used as synthetic ground truth.
    pub fn reference_eight_mode() -> Self {
        let tau = vec![
            vec![0.669, 0.621, 0.639, 0.630],
            vec![0.750, 0.715, 0.755, 0.729],
            vec![0.748, 0.723, 0.774, 0.755],
        ];
        let template = FastTemplate::standard(3).expect("p = 3 is supported");
        let phi = template.phase_table(&[0.38, 0.36, -0.19, 0.43, -0.04]).expect("five free phases");
        let c = CircuitParams::new(3, tau, phi).expect("static parameters");
        Self::new(c, vec![1.0, 0.94, 1.07, 0.93, 0.96, 1.05, 1.01, 1.02]).expect("static parameters")
    }

    pub fn circuit(&self) -> &CircuitParams {
        &self.circuit
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn dim(&self) -> usize {
        self.circuit.dim()
    }

    pub fn unitary(&self) -> UnitaryMatrix {
        fast_circuit(&self.circuit)
    }

    /// `D(η) · U`.
    pub fn transfer(&self) -> ComplexMatrix {
        self.unitary().matrix().scale_rows(&self.eta).expect("lengths checked")
    }
}

/// `|M_ji|²`: row `j` is the output, column `i` the input.
pub fn single_photon_probs(model: &DeviceModel) -> RealMatrix {
    model.transfer().squared_moduli()
}

/// `V = (D − Q)/D` for photons entering `inputs` and leaving at `outputs`
/// (both distinct pairs). `None` when `D = 0`.
pub fn hom_visibility(m: &ComplexMatrix, inputs: (usize, usize), outputs: (usize, usize)) -> Result<Option<f64>> {
    let d = m.dim();
    for (a, b) in [inputs, outputs] {
        if a >= d || b >= d {
            return Err(Error::ModeOutOfRange { index: a.max(b), modes: d });
        }
        if a == b {
            return Err(Error::DuplicateMode(a));
        }
    }
    Ok(visibility_unchecked(m, inputs, outputs))
}

fn visibility_unchecked(m: &ComplexMatrix, (i, j): (usize, usize), (k, l): (usize, usize)) -> Option<f64> {
    let (a, b, c, e) = (m[(k, i)], m[(l, j)], m[(k, j)], m[(l, i)]);
    let dist = a.norm_sqr() * b.norm_sqr() + c.norm_sqr() * e.norm_sqr();
    if !(dist > 1e-300) {
        return None;
    }
    let q = (a * b + c * e).norm_sqr();
    Some((dist - q) / dist)
}

/// One measured two-photon visibility. Modes are zero-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityRecord {
    pub inputs: (usize, usize),
    pub outputs: (usize, usize),
    pub visibility: f64,
    pub sigma: f64,
}

impl VisibilityRecord {
    pub fn new(inputs: (usize, usize), outputs: (usize, usize), visibility: f64, sigma: f64) -> Result<Self> {
        if inputs.0 == inputs.1 || outputs.0 == outputs.1 {
            return Err(Error::InvalidParameters("visibility pairs must be collision-free".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::OutOfRange { name: "sigma_V", value: sigma });
        }
        if !visibility.is_finite() {
            return Err(Error::OutOfRange { name: "V", value: visibility });
        }
        Ok(Self { inputs, outputs, visibility, sigma })
    }
}

/// Parameters of a delay scan `C(Δτ) = B[1 − V exp(−Δτ²/(2σ²))]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomCurveParams {
    pub baseline: f64,
    pub visibility: f64,
    pub sigma_tau: f64,
}

impl HomCurveParams {
    pub fn new(baseline: f64, visibility: f64, sigma_tau: f64) -> Result<Self> {
        if !(baseline > 0.0) {
            return Err(Error::OutOfRange { name: "B", value: baseline });
        }
        if !(sigma_tau > 0.0) {
            return Err(Error::OutOfRange { name: "sigma_tau", value: sigma_tau });
        }
        if !(-1.0..=1.0).contains(&visibility) {
            return Err(Error::OutOfRange { name: "V", value: visibility });
        }
        Ok(Self { baseline, visibility, sigma_tau })
    }
}

/// Expected coincidences at delay `delta_tau`.
pub fn hom_curve(params: &HomCurveParams, delta_tau: f64) -> f64 {
    let g = math::exp(-delta_tau * delta_tau / (2.0 * params.sigma_tau * params.sigma_tau));
    params.baseline * (1.0 - params.visibility * g)
}

/// Least-squares fit of a delay scan.
pub fn fit_hom_curve(delays: &[f64], counts: &[f64]) -> Result<HomCurveParams> {
    if delays.len() != counts.len() || delays.len() < 4 {
        return Err(Error::InvalidParameters("need at least 4 scan points with counts".into()));
    }
    // Baseline from the scan edges, depth from the point nearest zero delay.
    let (mut lo, mut hi) = (0, 0);
    for (i, &d) in delays.iter().enumerate() {
        if d < delays[lo] {
            lo = i;
        }
        if d > delays[hi] {
            hi = i;
        }
    }
    let b0 = 0.5 * (counts[lo] + counts[hi]);
    let centre = (0..delays.len()).min_by(|&a, &b| delays[a].abs().total_cmp(&delays[b].abs())).expect("non-empty");
    let v0 = (1.0 - counts[centre] / b0).clamp(-0.99, 0.99);
    let s0 = (delays[hi] - delays[lo]) / 8.0;
    if !(b0 > 0.0 && s0 > 0.0) {
        return Err(Error::InvalidParameters("degenerate scan".into()));
    }
    // B = b0·e^a, V = sin v, σ = s0·e^s.
    let unpack = |x: &[f64]| HomCurveParams { baseline: b0 * math::exp(x[0]), visibility: math::sin(x[1]), sigma_tau: s0 * math::exp(x[2]) };
    let chi2 = |x: &[f64]| {
        let prm = unpack(x);
        delays.iter().zip(counts).map(|(&d, &c)| (c - hom_curve(&prm, d)) / b0).map(|r| r * r).sum::<f64>()
    };
    let opts = NelderMeadOptions { step: 0.2, ..NelderMeadOptions::default() };
    let m = nelder_mead(chi2, &[0.0, math::asin(v0), 0.0], &opts);
    let prm = unpack(&m.x);
    HomCurveParams::new(prm.baseline, prm.visibility, prm.sigma_tau)
}

/// Which phase slots of the fast architecture are fitted.
#[derive(Clone, Debug, PartialEq)]
pub struct FastTemplate {
    p: u32,
    /// `(layer, pair)` of each free phase, zero-based.
    free_phases: Vec<(u32, usize)>,
}

impl FastTemplate {
    /// The identifiable phases for `p ≤ 3`: every first-layer pair except
    /// the last, and for `p = 3` the first two second-layer pairs.
    pub fn standard(p: u32) -> Result<Self> {
        let free_phases = match p {
            1 => vec![],
            2 => vec![(0, 0)],
            3 => vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)],
            _ => return Err(Error::Unsupported(alloc::format!("phase gauge for p = {p}"))),
        };
        Ok(Self { p, free_phases })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        1 << self.p
    }

    pub fn free_phases(&self) -> &[(u32, usize)] {
        &self.free_phases
    }

    /// One-based mode carrying each free phase, with one-based layer: `(layer, mode)`.
    pub fn free_phase_labels(&self) -> Vec<(u32, usize)> {
        self.free_phases.iter().map(|&(t, k)| (t + 1, layer_pair(t, k).1 + 1)).collect()
    }

    pub fn tau_count(&self) -> usize {
        self.p as usize * (self.dim() / 2)
    }

    /// Full phase table with the free slots set and everything else zero.
    pub fn phase_table(&self, free: &[f64]) -> Result<Vec<Vec<f64>>> {
        if free.len() != self.free_phases.len() {
            return Err(Error::DimensionMismatch { expected: self.free_phases.len(), found: free.len() });
        }
        let mut phi = vec![vec![0.0; self.dim() / 2]; self.p as usize];
        for (&(t, k), &v) in self.free_phases.iter().zip(free) {
            phi[t as usize][k] = v;
        }
        Ok(phi)
    }

    /// Values of the free slots in a phase table.
    pub fn free_values(&self, phi: &[Vec<f64>]) -> Vec<f64> {
        self.free_phases.iter().map(|&(t, k)| phi[t as usize][k]).collect()
    }

    fn tau_table(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        flat.chunks(self.dim() / 2).map(<[f64]>::to_vec).collect()
    }

    /// Gauge-fixed copy of a model: non-free phases zeroed.
    pub fn gauge_fixed(&self, model: &DeviceModel) -> Result<DeviceModel> {
        let phi = self.phase_table(&self.free_values(model.circuit.phi()))?;
        DeviceModel::new(model.circuit.with_phi(phi)?, model.eta.clone())
    }
}

// Bounded parameters are optimized through periodic maps onto their ranges.
fn tau_of(u: f64) -> f64 {
    0.5 * (1.0 + math::sin(u))
}
fn tau_inv(t: f64) -> f64 {
    math::asin((2.0 * t - 1.0).clamp(-1.0, 1.0))
}
fn eta_of(v: f64) -> f64 {
    0.5 * ETA_MAX * (1.0 + math::sin(v))
}
fn eta_inv(e: f64) -> f64 {
    math::asin((2.0 * e / ETA_MAX - 1.0).clamp(-1.0, 1.0))
}
/// The first free phase lives on `[0, π]`: visibilities cannot tell `φ` from `−φ`.
fn first_phase_of(w: f64) -> f64 {
    0.5 * PI * (1.0 + math::sin(w))
}
fn first_phase_inv(phi: f64) -> f64 {
    math::asin((2.0 * phi / PI - 1.0).clamp(-1.0, 1.0))
}

fn phases_of(x: &[f64]) -> Vec<f64> {
    x.iter().enumerate().map(|(i, &w)| if i == 0 { first_phase_of(w) } else { math::wrap_phase(w) }).collect()
}

/// Folds phases into the fitted domain: conjugation maps `φ → −φ`.
pub fn canonical_phases(free: &[f64]) -> Vec<f64> {
    let flip = free.first().is_some_and(|&f| math::wrap_phase(f) < 0.0);
    free.iter()
        .map(|&f| {
            let w = math::wrap_phase(if flip { -f } else { f });
            if w == -PI { PI } else { w }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 16, seed: 0, max_evaluations: 60_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissivityFit {
    pub tau: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub chi2: f64,
}

fn check_square(m: &RealMatrix, d: usize) -> Result<()> {
    if m.rows() != d || m.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.rows() });
    }
    Ok(())
}

/// Collects the best of several independent local fits; start 0 is `x_ideal`.
fn multistart(
    dim: usize,
    opts: &FitOptions,
    starts: impl Fn(usize, &mut rng::StreamRng) -> Vec<f64> + Sync + Send,
    objective: impl Fn(&[f64]) -> f64 + Sync + Send,
) -> (Vec<f64>, f64) {
    let nm = NelderMeadOptions { step: 0.3, max_evaluations: opts.max_evaluations, f_tol: 1e-22, x_tol: 1e-12, restarts: 6 };
    let runs = par::map_indexed(opts.restarts.max(1), |r| {
        let mut g = rng::stream(opts.seed, r as u64);
        let x0 = starts(r, &mut g);
        debug_assert_eq!(x0.len(), dim);
        let m = nelder_mead(&objective, &x0, &nm);
        (m.x, m.value)
    });
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.1 < runs[best].1 {
            best = i;
        }
    }
    runs.into_iter().nth(best).expect("at least one run")
}

/// Minimizes `χ²_τ = Σ ((P̃_ji − |M_ji|²)/σ_ji)²` over every τ and `η_2..η_m`.
pub fn fit_transmissivities(probs: &RealMatrix, errors: &RealMatrix, template: &FastTemplate, opts: &FitOptions) -> Result<TransmissivityFit> {
    fit_transmissivities_from(probs, errors, template, opts, None)
}

/// As [`fit_transmissivities`]; the first start is `warm` when given.
fn fit_transmissivities_from(
    probs: &RealMatrix,
    errors: &RealMatrix,
    template: &FastTemplate,
    opts: &FitOptions,
    warm: Option<&DeviceModel>,
) -> Result<TransmissivityFit> {
    let d = template.dim();
    check_square(probs, d)?;
    check_square(errors, d)?;
    if let Some(&bad) = errors.as_slice().iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::OutOfRange { name: "probability error", value: bad });
    }
    let nt = template.tau_count();
    let unpack = |x: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let tau = template.tau_table(&x[..nt].iter().map(|&u| tau_of(u)).collect::<Vec<_>>());
        let mut eta = vec![1.0];
        eta.extend(x[nt..].iter().map(|&v| eta_of(v)));
        (tau, eta)
    };
    let zero_phi = template.phase_table(&vec![0.0; template.free_phases.len()])?;
    let chi2 = |x: &[f64]| -> f64 {
        let (tau, eta) = unpack(x);
        let Ok(c) = CircuitParams::new(template.p, tau, zero_phi.clone()) else { return f64::INFINITY };
        let Ok(model) = DeviceModel::new(c, eta) else { return f64::INFINITY };
        chi2_tau(&single_photon_probs(&model), probs, errors)
    };
    let first: Vec<f64> = match warm {
        Some(w) => w.circuit.tau().iter().flatten().map(|&t| tau_inv(t)).chain(w.eta[1..].iter().map(|&e| eta_inv(e))).collect(),
        None => core::iter::repeat_n(tau_inv(FRAC_1_SQRT_2), nt).chain(core::iter::repeat_n(eta_inv(1.0), d - 1)).collect(),
    };
    let starts = |r: usize, g: &mut rng::StreamRng| -> Vec<f64> {
        if r == 0 {
            return first.clone();
        }
        // Random transmissivities in [0.5, 0.9] and losses in [0.7, 1.3].
        let mut x: Vec<f64> = (0..nt).map(|_| tau_inv(0.5 + 0.4 * rng::uniform(g))).collect();
        x.extend((0..d - 1).map(|_| eta_inv(0.7 + 0.6 * rng::uniform(g))));
        x
    };
    let (x, value) = multistart(nt + d - 1, opts, starts, chi2);
    if !value.is_finite() {
        return Err(Error::NoConvergence("transmissivity fit".into()));
    }
    let (tau, eta) = unpack(&x);
    Ok(TransmissivityFit { tau, eta, chi2: value })
}

fn chi2_tau(model: &RealMatrix, data: &RealMatrix, errors: &RealMatrix) -> f64 {
    let mut s = 0.0;
    for ((m, d), e) in model.as_slice().iter().zip(data.as_slice()).zip(errors.as_slice()) {
        let r = (d - m) / e;
        s += r * r;
    }
    s
}

/// `χ²_φ` of a set of visibilities against a unitary.
pub fn chi2_phi(u: &ComplexMatrix, records: &[VisibilityRecord]) -> f64 {
    let mut s = 0.0;
    for r in records {
        let Some(v) = visibility_unchecked(u, r.inputs, r.outputs) else { return f64::INFINITY };
        let z = (r.visibility - v) / r.sigma;
        s += z * z;
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFit {
    /// Full phase table (gauge slots zero).
    pub phi: Vec<Vec<f64>>,
    /// Values of the free slots, in template order.
    pub free: Vec<f64>,
    pub chi2: f64,
}

/// Minimizes `χ²_φ` over the template's free phases with τ fixed.
pub fn fit_phases(records: &[VisibilityRecord], tau: &[Vec<f64>], template: &FastTemplate, opts: &FitOptions) -> Result<PhaseFit> {
    fit_phases_from(records, tau, template, opts, None)
}

/// As [`fit_phases`]; the first start is the free phases `warm` when given.
fn fit_phases_from(
    records: &[VisibilityRecord],
    tau: &[Vec<f64>],
    template: &FastTemplate,
    opts: &FitOptions,
    warm: Option<&[f64]>,
) -> Result<PhaseFit> {
    let d = template.dim();
    let nf = template.free_phases.len();
    if records.len() < nf {
        return Err(Error::InvalidParameters(alloc::format!("{} visibilities cannot fix {nf} phases", records.len())));
    }
    for r in records {
        for k in [r.inputs.0, r.inputs.1, r.outputs.0, r.outputs.1] {
            if k >= d {
                return Err(Error::ModeOutOfRange { index: k, modes: d });
            }
        }
    }
    let base = CircuitParams::new(template.p, tau.to_vec(), template.phase_table(&vec![0.0; nf])?)?;
    if nf == 0 {
        let chi2 = chi2_phi(fast_circuit(&base).matrix(), records);
        return Ok(PhaseFit { phi: base.phi().to_vec(), free: vec![], chi2 });
    }
    let objective = |x: &[f64]| -> f64 {
        let phi = template.phase_table(&phases_of(x)).expect("length fixed");
        let c = base.with_phi(phi).expect("finite phases");
        chi2_phi(fast_circuit(&c).matrix(), records)
    };
    let starts = |r: usize, g: &mut rng::StreamRng| -> Vec<f64> {
        if r == 0 {
            return match warm {
                Some(w) => w.iter().enumerate().map(|(i, &v)| if i == 0 { first_phase_inv(v) } else { v }).collect(),
                None => {
                    let mut z = vec![0.0; nf];
                    z[0] = first_phase_inv(0.0) + 1e-3;
                    z
                }
            };
        }
        (0..nf).map(|i| if i == 0 { first_phase_inv(PI * rng::uniform(g)) } else { PI * (2.0 * rng::uniform(g) - 1.0) }).collect()
    };
    let (x, value) = multistart(nf, opts, starts, objective);
    if !value.is_finite() {
        return Err(Error::NoConvergence("phase fit".into()));
    }
    let free = phases_of(&x);
    Ok(PhaseFit { phi: template.phase_table(&free)?, free, chi2: value })
}

/// Synthetic measurement set.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub probs: RealMatrix,
    pub prob_errors: RealMatrix,
    pub visibilities: Vec<VisibilityRecord>,
}

/// All collision-free input pairs of `d` modes.
pub fn all_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            v.push((i, j));
        }
    }
    v
}

/// Input pairs measured on the 8-mode reference device (zero-based).
pub fn eight_mode_input_pairs() -> Vec<(usize, usize)> {
    [(2, 5), (2, 6), (2, 8), (3, 7), (3, 8), (5, 7), (5, 8), (6, 8)].iter().map(|&(a, b)| (a - 1, b - 1)).collect()
}

/// Forward model plus Gaussian noise: probabilities get relative noise
/// `noise_rel`, visibilities absolute noise `noise_rel`. Error bars equal the
/// injected scale, floored at [`ERROR_FLOOR`].
pub fn synth_dataset(model: &DeviceModel, input_pairs: &[(usize, usize)], noise_rel: f64, seed: u64) -> Result<SyntheticData> {
    if !(noise_rel >= 0.0) {
        return Err(Error::OutOfRange { name: "noise_rel", value: noise_rel });
    }
    let d = model.dim();
    let mut g = rng::seeded(seed);
    let exact = single_photon_probs(model);
    let mut probs = RealMatrix::zeros(d, d);
    let mut prob_errors = RealMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let p = exact[(r, c)];
            let noise = rng::standard_normal(&mut g);
            probs[(r, c)] = p * (1.0 + noise_rel * noise);
            prob_errors[(r, c)] = (noise_rel * p).max(ERROR_FLOOR);
        }
    }
    let m = model.transfer();
    let sigma = noise_rel.max(ERROR_FLOOR);
    let mut visibilities = Vec::new();
    for &inp in input_pairs {
        for out in all_pairs(d) {
            if let Some(v) = hom_visibility(&m, inp, out)? {
                let noise = rng::standard_normal(&mut g);
                visibilities.push(VisibilityRecord::new(inp, out, v + noise_rel * noise, sigma)?);
            }
        }
    }
    Ok(SyntheticData { probs, prob_errors, visibilities })
}

/// Reconstructed device with bootstrap error bars.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub model: DeviceModel,
    pub chi2_tau: f64,
    pub chi2_phi: f64,
    /// Fidelity of the reconstructed unitary to the ideal Sylvester matrix.
    pub fidelity_to_ideal: f64,
    pub tau_err: Vec<Vec<f64>>,
    pub eta_err: Vec<f64>,
    pub phi_err: Vec<f64>,
    pub bootstrap_samples: usize,
}

impl Reconstruction {
    pub fn free_phases(&self, template: &FastTemplate) -> Vec<f64> {
        template.free_values(self.model.circuit.phi())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructOptions {
    pub fit: FitOptions,
    pub bootstrap: usize,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { fit: FitOptions::default(), bootstrap: 100 }
    }
}

fn fit_once(data: &SyntheticData, template: &FastTemplate, opts: &FitOptions, warm: Option<&DeviceModel>) -> Result<(DeviceModel, f64, f64)> {
    let t = fit_transmissivities_from(&data.probs, &data.prob_errors, template, opts, warm)?;
    let warm_phases = warm.map(|w| template.free_values(w.circuit.phi()));
    let ph = fit_phases_from(&data.visibilities, &t.tau, template, opts, warm_phases.as_deref())?;
    let model = DeviceModel::new(CircuitParams::new(template.p, t.tau, ph.phi)?, t.eta)?;
    Ok((model, t.chi2, ph.chi2))
}

/// Two-step fit, then a parametric bootstrap: `bootstrap` datasets are drawn
/// from the fitted model with the data's error bars and refitted.
pub fn reconstruct(data: &SyntheticData, template: &FastTemplate, opts: &ReconstructOptions) -> Result<Reconstruction> {
    let (model, chi2_tau, chi2_phi) = fit_once(data, template, &opts.fit, None)?;
    let fidelity_to_ideal = fidelity(&sylvester(template.p), &model.unitary())?;
    let d = template.dim();
    let nt = template.tau_count();
    let nf = template.free_phases.len();

    // Replicas are refitted from the estimate; they differ from the data by noise only.
    let boot_fit = FitOptions { restarts: 1, ..opts.fit };
    let replicas = par::map_indexed(opts.bootstrap, |b| -> Result<Vec<f64>> {
        let mut g = rng::stream(opts.fit.seed ^ 0xB007_5742_u64, b as u64);
        let exact = single_photon_probs(&model);
        let mut probs = RealMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                probs[(r, c)] = exact[(r, c)] + data.prob_errors[(r, c)] * rng::standard_normal(&mut g);
            }
        }
        let m = model.transfer();
        let visibilities = data
            .visibilities
            .iter()
            .map(|v| {
                let clean = visibility_unchecked(&m, v.inputs, v.outputs).unwrap_or(v.visibility);
                VisibilityRecord { visibility: clean + v.sigma * rng::standard_normal(&mut g), ..*v }
            })
            .collect();
        let replica = SyntheticData { probs, prob_errors: data.prob_errors.clone(), visibilities };
        let fit_opts = FitOptions { seed: rng::child_seed(opts.fit.seed, b as u64), ..boot_fit };
        let (fm, _, _) = fit_once(&replica, template, &fit_opts, Some(&model))?;
        let mut flat: Vec<f64> = fm.circuit.tau().iter().flatten().copied().collect();
        flat.extend_from_slice(&fm.eta);
        flat.extend(template.free_values(fm.circuit.phi()));
        Ok(flat)
    });
    let replicas = replicas.into_iter().collect::<Result<Vec<_>>>()?;

    let mut centre: Vec<f64> = model.circuit.tau().iter().flatten().copied().collect();
    centre.extend_from_slice(&model.eta);
    centre.extend(template.free_values(model.circuit.phi()));
    let spread: Vec<f64> = (0..centre.len())
        .map(|k| {
            if replicas.len() < 2 {
                return 0.0;
            }
            let is_phase = k >= nt + d;
            let vals: Vec<f64> = replicas
                .iter()
                .map(|r| if is_phase { centre[k] + math::wrap_phase(r[k] - centre[k]) } else { r[k] })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            math::sqrt(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64)
        })
        .collect();
    Ok(Reconstruction {
        tau_err: template.tau_table(&spread[..nt]),
        eta_err: spread[nt..nt + d].to_vec(),
        phi_err: spread[nt + d..nt + d + nf].to_vec(),
        model,
        chi2_tau,
        chi2_phi,
        fidelity_to_ideal,
        bootstrap_samples: replicas.len(),
    })
}
