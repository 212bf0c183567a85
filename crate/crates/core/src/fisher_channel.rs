//! Fisher information of channel families.
//!
//! RLD quantities use the explicit Choi formula `‖Tr[(∂Γ) Γ⁺ (∂Γ)]‖_∞`,
//! where the partial trace is selected by [`TraceConvention`]. The SLD channel
//! Fisher information is a supremum over input probes and is approximated
//! from below by a seeded multi-restart search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::{derivative, gradient, ChannelFamily, Differentiable, ParamPoint, StateFamily};
use crate::fisher_state::{
    rld_fisher, sld_fisher, sld_from_spectrum, FisherValue, WeightMatrix, FINITENESS_TOL,
};
use crate::linalg::{
    eig_unchecked, hermitian_eig, hermitian_part, identity, kron, max_eigenvalue, partial_trace,
    support_pinv_from_spectrum, CMatrix, CVector, Subsystem, SupportPinv, C64, DEFAULT_SUPPORT_TOL,
};

/// Which tensor factor of the Choi operator `Γ_RB` is traced out in the
/// RLD channel formula.
///
/// `Output` traces out `B` and leaves an operator on the reference system;
/// it is the default. `Reference` traces out `R` instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TraceConvention {
    #[default]
    Output,
    Reference,
}

impl TraceConvention {
    pub fn traced(self) -> Subsystem {
        match self {
            TraceConvention::Output => Subsystem::Second,
            TraceConvention::Reference => Subsystem::First,
        }
    }

    /// Dimension of the factor that survives the partial trace.
    pub fn kept_dim(self, dims: (usize, usize)) -> usize {
        match self {
            TraceConvention::Output => dims.0,
            TraceConvention::Reference => dims.1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TraceConvention::Output => "output",
            TraceConvention::Reference => "reference",
        }
    }
}

impl std::fmt::Display for TraceConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TraceConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "output" => Ok(Self::Output),
            "reference" => Ok(Self::Reference),
            other => Err(Error::InvalidArgument(format!("unknown convention '{other}'"))),
        }
    }
}

fn support_of(choi: &CMatrix) -> Result<SupportPinv> {
    support_pinv_from_spectrum(hermitian_eig(choi)?, DEFAULT_SUPPORT_TOL)
}

/// `Σ_jk w_kj Tr_conv[∂_jΓ Γ⁺ ∂_kΓ]` together with the finiteness residual
/// `‖(Σ_jk w_kj ∂_kΓ ∂_jΓ) Π⊥‖_F` and its tolerance.
///
/// `w` is any PSD matrix; no normalization is imposed.
pub fn rld_reduced_operator(
    choi: &CMatrix,
    grads: &[CMatrix],
    w: &CMatrix,
    dims: (usize, usize),
    conv: TraceConvention,
) -> Result<(CMatrix, f64, f64)> {
    let n = dims.0 * dims.1;
    if choi.nrows() != n || grads.iter().any(|g| g.nrows() != n || g.ncols() != n) {
        return Err(Error::DimensionMismatch(format!("Choi data must be {n}x{n}")));
    }
    if w.nrows() != grads.len() || w.ncols() != grads.len() {
        return Err(Error::InvalidWeight(format!(
            "weight is {}x{} but there are {} parameters",
            w.nrows(),
            w.ncols(),
            grads.len()
        )));
    }
    let sp = support_of(choi)?;
    let grads: Vec<CMatrix> = grads.iter().map(hermitian_part).collect();
    let mut inner = CMatrix::zeros(n, n);
    let mut cond = CMatrix::zeros(n, n);
    for (j, gj) in grads.iter().enumerate() {
        for (k, gk) in grads.iter().enumerate() {
            let wkj = w[(k, j)];
            if wkj == C64::new(0.0, 0.0) {
                continue;
            }
            inner += (gj * &sp.pinv * gk) * wkj;
            cond += (gk * gj) * wkj;
        }
    }
    let reduced = hermitian_part(&partial_trace(&inner, dims, conv.traced())?);
    let residual = (&cond * &sp.kernel_projector).norm();
    let tol = FINITENESS_TOL * cond.norm().max(1.0);
    Ok((reduced, residual, tol))
}

fn value_from_reduced(reduced: &CMatrix, residual: f64, tol: f64) -> FisherValue {
    if residual <= tol {
        FisherValue::finite(max_eigenvalue(reduced), residual)
    } else {
        FisherValue::infinite(residual)
    }
}

fn single_parameter(chan: &ChannelFamily) -> Result<()> {
    if chan.num_params() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a single-parameter channel family, got {} parameters",
            chan.num_params()
        )));
    }
    Ok(())
}

/// RLD channel Fisher information `‖Tr_conv[(∂Γ) Γ⁺ (∂Γ)]‖_∞`.
pub fn rld_fisher_channel(chan: &ChannelFamily, theta: &ParamPoint, conv: TraceConvention) -> Result<FisherValue> {
    single_parameter(chan)?;
    let choi = chan.choi(theta)?;
    let d = derivative(chan, theta, 0)?;
    let one = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let (reduced, residual, tol) = rld_reduced_operator(&choi, &[d], &one, chan.dims(), conv)?;
    Ok(value_from_reduced(&reduced, residual, tol))
}

/// Multiparameter RLD value `‖Σ_jk ⟨k|W|j⟩ Tr_conv[∂_jΓ Γ⁺ ∂_kΓ]‖_∞`.
pub fn rld_value_channel(
    chan: &ChannelFamily,
    theta: &ParamPoint,
    w: &WeightMatrix,
    conv: TraceConvention,
) -> Result<FisherValue> {
    rld_weighted_channel(chan, theta, w.matrix(), conv)
}

/// As [`rld_value_channel`] for an arbitrary PSD weight, without the unit
/// trace requirement. Positively homogeneous in `w`.
pub fn rld_weighted_channel(
    chan: &ChannelFamily,
    theta: &ParamPoint,
    w: &CMatrix,
    conv: TraceConvention,
) -> Result<FisherValue> {
    if w.nrows() != chan.num_params() {
        return Err(Error::InvalidWeight(format!(
            "weight is {}x{} but the family has {} parameters",
            w.nrows(),
            w.ncols(),
            chan.num_params()
        )));
    }
    let choi = chan.choi(theta)?;
    let grads = gradient(chan, theta)?;
    let (reduced, residual, tol) = rld_reduced_operator(&choi, &grads, w, chan.dims(), conv)?;
    Ok(value_from_reduced(&reduced, residual, tol))
}

/// Reduced blocks `B_jk = Tr_conv[∂_jΓ Γ⁺ ∂_kΓ]` for every parameter pair.
pub fn rld_channel_blocks(chan: &ChannelFamily, theta: &ParamPoint, conv: TraceConvention) -> Result<Vec<Vec<CMatrix>>> {
    let choi = chan.choi(theta)?;
    let sp = support_of(&choi)?;
    let grads: Vec<CMatrix> = gradient(chan, theta)?.iter().map(hermitian_part).collect();
    grads
        .iter()
        .map(|gj| {
            grads
                .iter()
                .map(|gk| partial_trace(&(gj * &sp.pinv * gk), chan.dims(), conv.traced()))
                .collect()
        })
        .collect()
}

/// Settings for the SLD probe search.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub restarts: usize,
    /// Cap on full coordinate sweeps per restart.
    pub max_sweeps: usize,
    pub seed: u64,
    pub initial_step: f64,
    pub step_tol: f64,
    /// Grid points for the one-dimensional prescan of diagonal-covariant channels.
    pub grid_points: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { restarts: 6, max_sweeps: 400, seed: 0, initial_step: 0.25, step_tol: 1e-7, grid_points: 101 }
    }
}

/// Outcome of an SLD probe search.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    /// Best SLD value found; a lower bound on the channel SLD Fisher information.
    pub value: FisherValue,
    /// Normalized pure probe on `R ⊗ A`, reference-major.
    pub probe: CVector,
    /// The probe's operator form: `|ψ⟩ = (Z ⊗ I)|Γ⟩`, `Tr[Z†Z] = 1`.
    pub z: CMatrix,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
}

/// Output state and its derivative for the probe `(Z ⊗ I)|Γ⟩`:
/// `(Z⊗I) Γ (Z⊗I)† / Tr[Z†Z]`.
pub fn probe_output(choi: &CMatrix, dchoi: &CMatrix, z: &CMatrix, d_out: usize) -> (CMatrix, CMatrix) {
    let norm = z.norm_squared();
    let big = kron(z, &identity(d_out));
    let adj = big.adjoint();
    ((&big * choi * &adj).unscale(norm), (&big * dchoi * &adj).unscale(norm))
}

/// SLD Fisher information of the channel output on the probe `Z`.
pub fn probe_value(choi: &CMatrix, dchoi: &CMatrix, z: &CMatrix, d_out: usize) -> FisherValue {
    if z.norm_squared() == 0.0 {
        return FisherValue::zero();
    }
    let (omega, domega) = probe_output(choi, dchoi, z, d_out);
    sld_from_spectrum(&eig_unchecked(&hermitian_part(&omega)), &domega)
}

fn probe_vector(z: &CMatrix) -> CVector {
    let (r, c) = z.shape();
    let norm = z.norm();
    CVector::from_fn(r * c, |idx, _| z[(idx / c, idx % c)] / norm)
}

fn probe_objective(choi: &CMatrix, dchoi: &CMatrix, d_out: usize, z: &CMatrix) -> f64 {
    let v = probe_value(choi, dchoi, z, d_out);
    if v.finite {
        v.value
    } else {
        f64::INFINITY
    }
}

pub(crate) struct RestartOutcome {
    pub value: f64,
    pub z: CMatrix,
    pub sweeps: usize,
    pub evaluations: usize,
}

/// Coordinate pattern search maximizing `f` over normalized `Z`, moving the
/// real and imaginary part of each entry (or only the real diagonal).
pub(crate) fn pattern_search<F: FnMut(&CMatrix) -> f64>(
    mut f: F,
    start: CMatrix,
    cfg: &ProbeConfig,
    real_diagonal: bool,
) -> RestartOutcome {
    let d = start.nrows();
    let mut evaluations = 1;
    let mut z = start.unscale(start.norm());
    let mut best = f(&z);
    let mut step = cfg.initial_step;
    let mut sweeps = 0;
    let coords: Vec<(usize, usize, bool)> = if real_diagonal {
        (0..d).map(|i| (i, i, false)).collect()
    } else {
        (0..d).flat_map(|i| (0..d).flat_map(move |j| [(i, j, false), (i, j, true)])).collect()
    };
    while step > cfg.step_tol && sweeps < cfg.max_sweeps && best.is_finite() {
        sweeps += 1;
        let mut improved = false;
        for &(i, j, imag) in &coords {
            for sign in [1.0, -1.0] {
                let mut trial = z.clone();
                let delta = if imag { C64::new(0.0, sign * step) } else { C64::new(sign * step, 0.0) };
                trial[(i, j)] += delta;
                let norm = trial.norm();
                if norm == 0.0 {
                    continue;
                }
                trial.unscale_mut(norm);
                evaluations += 1;
                let v = f(&trial);
                if v > best * (1.0 + 1e-14) || (v.is_infinite() && best.is_finite()) {
                    best = v;
                    z = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    RestartOutcome { value: best, z, sweeps, evaluations }
}

pub(crate) fn random_start(d: usize, seed: u64, restart: usize, real_diagonal: bool) -> CMatrix {
    if restart == 0 {
        return identity(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    if real_diagonal {
        let mut z = CMatrix::zeros(d, d);
        for i in 0..d {
            let x: f64 = StandardNormal.sample(&mut rng);
            z[(i, i)] = C64::new(x.abs() + 1e-3, 0.0);
        }
        z
    } else {
        CMatrix::from_fn(d, d, |_, _| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut evals = 2;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
        evals += 1;
    }
    if f1 > f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

fn qubit_schmidt_probe(p: f64) -> CMatrix {
    let p = p.clamp(0.0, 1.0);
    let mut z = CMatrix::zeros(2, 2);
    z[(0, 0)] = C64::new(p.sqrt(), 0.0);
    z[(1, 1)] = C64::new((1.0 - p).sqrt(), 0.0);
    z
}

/// SLD channel Fisher information, approximated from below by a probe search.
///
/// Channels flagged diagonal-covariant are searched over Schmidt-diagonal
/// probes `Σ_i √p_i |ii⟩`; for qubits this is a grid prescan followed by a
/// golden-section refinement in `p`. Other channels use a coordinate pattern
/// search over `Z` with `cfg.restarts` restarts (the first from the maximally
/// entangled probe), run in parallel. Results are deterministic for a given
/// configuration.
pub fn sld_fisher_channel(chan: &ChannelFamily, theta: &ParamPoint, cfg: &ProbeConfig) -> Result<ProbeResult> {
    single_parameter(chan)?;
    let choi = chan.choi(theta)?;
    let dchoi = derivative(chan, theta, 0)?;
    sld_fisher_channel_parts(&choi, &dchoi, chan.dims(), chan.is_diagonal_covariant(), cfg)
}

pub fn sld_fisher_channel_parts(
    choi: &CMatrix,
    dchoi: &CMatrix,
    dims: (usize, usize),
    diagonal_covariant: bool,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    let (d_in, d_out) = dims;
    if choi.nrows() != d_in * d_out || dchoi.shape() != choi.shape() {
        return Err(Error::DimensionMismatch("Choi data does not match channel dimensions".into()));
    }
    if diagonal_covariant && d_in == 2 {
        let mut evaluations = 0;
        let mut eval = |z: &CMatrix| {
            evaluations += 1;
            probe_objective(choi, dchoi, d_out, z)
        };
        let n = cfg.grid_points.max(3);
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = grid.iter().map(|&p| eval(&qubit_schmidt_probe(p))).collect();
        let (best_i, _) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let lo = grid[best_i.saturating_sub(1)];
        let hi = grid[(best_i + 1).min(n - 1)];
        let (p, v, evals) = golden_max(|p| eval(&qubit_schmidt_probe(p)), lo, hi, 1e-10);
        let (p, v) = if v >= values[best_i] { (p, v) } else { (grid[best_i], values[best_i]) };
        let z = qubit_schmidt_probe(p);
        let value = probe_value(choi, dchoi, &z, d_out);
        debug_assert!(!value.finite || (value.value - v).abs() <= 1e-12 * v.max(1.0));
        return Ok(ProbeResult {
            value,
            probe: probe_vector(&z),
            z,
            iterations: evals,
            evaluations,
            restarts: 1,
            seed: cfg.seed,
        });
    }
    let restarts = cfg.restarts.max(1);
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = random_start(d_in, cfg.seed, r, diagonal_covariant);
            pattern_search(|z| probe_objective(choi, dchoi, d_out, z), start, cfg, diagonal_covariant)
        })
        .collect();
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |bi, (i, o)| if o.value > outcomes[bi].value { i } else { bi });
    let z = outcomes[best].z.clone();
    Ok(ProbeResult {
        value: probe_value(choi, dchoi, &z, d_out),
        probe: probe_vector(&z),
        z,
        iterations: outcomes.iter().map(|o| o.sweeps).sum(),
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        restarts,
        seed: cfg.seed,
    })
}

/// SLD Fisher information of a classical-quantum channel: the largest SLD
/// value among its letters.
pub fn cq_channel_fisher(letters: &[StateFamily], theta: &ParamPoint) -> Result<FisherValue> {
    if letters.is_empty() {
        return Err(Error::InvalidArgument("empty alphabet".into()));
    }
    let mut best = FisherValue::zero();
    for l in letters {
        let v = sld_fisher(l, theta)?;
        if !v.finite {
            return Ok(v);
        }
        if v.value > best.value {
            best = v;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InequalityKind {
    /// `Î(N(ρ_θ)) ≤ Î(N) + Î(ρ_θ)`.
    RldChain,
    /// `√I(N(ρ_θ)) ≤ √I(N) + √I(ρ_θ)`.
    RootSldChain,
    /// `Î(M∘N) ≤ Î(M) + Î(N)`.
    RldSerial,
    /// `√I(M∘N) ≤ √I(M) + √I(N)`.
    RootSldSerial,
    /// `Î(N(Φ)) ≤ Î(N) ≤ d Î(N(Φ))`.
    DimensionBound,
}

#[derive(Debug, Clone)]
pub enum GapInput {
    /// A channel and an input family on `R ⊗ A` with `dim R = d_ref`.
    Chain { channel: ChannelFamily, input: StateFamily, d_ref: usize },
    /// Serial composition: `first` is applied before `second`.
    Serial { first: ChannelFamily, second: ChannelFamily },
    Single { channel: ChannelFamily },
}

fn require_finite(v: FisherValue, what: &str) -> Result<f64> {
    v.get().ok_or_else(|| Error::Vacuous(format!("{what} is infinite (residual {:.3e})", v.support_residual)))
}

/// RHS − LHS of the named inequality at `theta`; nonnegative up to numerical
/// error whenever the inequality holds.
///
/// Channel RLD values use the output convention. SLD channel values come
/// from [`sld_fisher_channel`] with `cfg`, so they are lower bounds.
pub fn inequality_gap(kind: InequalityKind, input: &GapInput, theta: &ParamPoint, cfg: &ProbeConfig) -> Result<f64> {
    let conv = TraceConvention::Output;
    match (kind, input) {
        (InequalityKind::RldChain, GapInput::Chain { channel, input, d_ref }) => {
            let out = channel.apply_to_family(input, *d_ref)?;
            let lhs = require_finite(rld_fisher(&out, theta)?, "output RLD")?;
            let ch = require_finite(rld_fisher_channel(channel, theta, conv)?, "channel RLD")?;
            let st = require_finite(rld_fisher(input, theta)?, "input RLD")?;
            Ok(ch + st - lhs)
        }
        (InequalityKind::RootSldChain, GapInput::Chain { channel, input, d_ref }) => {
            let out = channel.apply_to_family(input, *d_ref)?;
            let lhs = require_finite(sld_fisher(&out, theta)?, "output SLD")?;
            let ch = require_finite(sld_fisher_channel(channel, theta, cfg)?.value, "channel SLD")?;
            let st = require_finite(sld_fisher(input, theta)?, "input SLD")?;
            Ok(ch.sqrt() + st.sqrt() - lhs.sqrt())
        }
        (InequalityKind::RldSerial, GapInput::Serial { first, second }) => {
            let comp = second.compose(first)?;
            let lhs = require_finite(rld_fisher_channel(&comp, theta, conv)?, "composite RLD")?;
            let a = require_finite(rld_fisher_channel(first, theta, conv)?, "first RLD")?;
            let b = require_finite(rld_fisher_channel(second, theta, conv)?, "second RLD")?;
            Ok(a + b - lhs)
        }
        (InequalityKind::RootSldSerial, GapInput::Serial { first, second }) => {
            let comp = second.compose(first)?;
            let lhs = require_finite(sld_fisher_channel(&comp, theta, cfg)?.value, "composite SLD")?;
            let a = require_finite(sld_fisher_channel(first, theta, cfg)?.value, "first SLD")?;
            let b = require_finite(sld_fisher_channel(second, theta, cfg)?.value, "second SLD")?;
            Ok(a.sqrt() + b.sqrt() - lhs.sqrt())
        }
        (InequalityKind::DimensionBound, GapInput::Single { channel }) => {
            let d = channel.d_in();
            let choi = channel.choi(theta)?;
            let dchoi = derivative(channel, theta, 0)?;
            let phi_out = choi.unscale(d as f64);
            let dphi_out = dchoi.unscale(d as f64);
            let on_phi = require_finite(crate::fisher_state::rld_fisher_parts(&phi_out, &dphi_out)?, "RLD on Φ")?;
            let ch = require_finite(rld_fisher_channel(channel, theta, conv)?, "channel RLD")?;
            Ok((ch - on_phi).min(d as f64 * on_phi - ch))
        }
        (kind, _) => Err(Error::InvalidArgument(format!("input does not fit inequality {kind:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{outer, unitary_exp};

    fn diag(v: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    fn phase_channel() -> ChannelFamily {
        let z = diag(&[1.0, -1.0]);
        ChannelFamily::from_kraus(2, 2, 1, move |t| Ok(vec![unitary_exp(&z, t.get(0))]))
    }

    #[test]
    fn constant_channel_has_zero_rld() {
        let ch = ChannelFamily::constant_kraus(vec![diag(&[1.0, 1.0])], 1).unwrap();
        let v = rld_fisher_channel(&ch, &ParamPoint::scalar(0.1), TraceConvention::Output).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.finite);
    }

    #[test]
    fn unitary_family_rld_is_infinite_and_sld_is_four() {
        let ch = phase_channel();
        let t = ParamPoint::scalar(0.3);
        assert!(!rld_fisher_channel(&ch, &t, TraceConvention::Output).unwrap().finite);
        let choi = ch.choi(&t).unwrap();
        let d = derivative(&ch, &t, 0).unwrap();
        let v = probe_value(&choi, &d, &identity(2), 2);
        assert!((v.value - 4.0).abs() < 1e-6, "{}", v.value);
        let best = sld_fisher_channel(&ch, &t, &ProbeConfig::default()).unwrap();
        assert!((best.value.value - 4.0).abs() < 1e-6);
    }

    #[test]
    fn replacer_channel_reduces_to_state() {
        let fam = StateFamily::new(2, 1, |t| Ok(diag(&[t.get(0), 1.0 - t.get(0)]))).with_bounds(vec![(0.0, 1.0)]);
        let ch = ChannelFamily::replacer(2, &fam);
        let t = ParamPoint::scalar(0.25);
        let best = sld_fisher_channel(&ch, &t, &ProbeConfig::default()).unwrap();
        assert!((best.value.value - 16.0 / 3.0).abs() < 1e-6);
        let r = rld_fisher_channel(&ch, &t, TraceConvention::Output).unwrap();
        assert!((r.value - 16.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn probe_result_is_consistent_with_state_fisher() {
        let ch = phase_channel();
        let t = ParamPoint::scalar(0.2);
        let res = sld_fisher_channel(&ch, &t, &ProbeConfig { restarts: 2, ..Default::default() }).unwrap();
        let rho = outer(&res.probe);
        let out = ch.output_family(&rho, 2).unwrap();
        let direct = sld_fisher(&out, &t).unwrap();
        assert!((direct.value - res.value.value).abs() < 1e-8);
    }

    #[test]
    fn conventions_parse() {
        assert_eq!("reference".parse::<TraceConvention>().unwrap(), TraceConvention::Reference);
        assert!("both".parse::<TraceConvention>().is_err());
        assert_eq!(TraceConvention::default(), TraceConvention::Output);
    }

    #[test]
    fn gap_rejects_mismatched_input() {
        let ch = phase_channel();
        let err = inequality_gap(
            InequalityKind::RldSerial,
            &GapInput::Single { channel: ch },
            &ParamPoint::scalar(0.1),
            &ProbeConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v, _) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
    }
}
