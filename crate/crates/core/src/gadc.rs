//! The generalized amplitude damping channel: constructors, closed-form RLD
//! expressions, the Schmidt-diagonal SLD probe and bound curves.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bounds::{crb, BoundKind};
use crate::error::{Error, Result};
use crate::families::{ChannelFamily, ParamPoint};
use crate::fisher_channel::{rld_fisher_channel, rld_value_channel, sld_fisher_channel, ProbeConfig, TraceConvention};
use crate::fisher_state::{sld_matrix_parts, FisherMatrix, FisherValue, WeightMatrix};
use crate::format::sig;
use crate::linalg::{identity, kron, unitary_exp, CMatrix, C64};

/// Minimum distance from 0 and 1 required of `γ` and `N`.
pub const DOMAIN_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GadcParams {
    pub gamma: f64,
    pub noise: f64,
    /// Phase `φ` of the unitary `e^{−iφσ_Z}` applied before the channel.
    pub phase: f64,
}

fn in_open_unit(name: &str, x: f64) -> Result<()> {
    if !(DOMAIN_MARGIN..=1.0 - DOMAIN_MARGIN).contains(&x) {
        return Err(Error::OutOfDomain(format!("{name} = {x} must lie in (0, 1) with margin {DOMAIN_MARGIN}")));
    }
    Ok(())
}

impl GadcParams {
    pub fn new(gamma: f64, noise: f64, phase: f64) -> Result<Self> {
        in_open_unit("gamma", gamma)?;
        in_open_unit("N", noise)?;
        if !phase.is_finite() {
            return Err(Error::OutOfDomain(format!("phase {phase} is not finite")));
        }
        Ok(Self { gamma, noise, phase })
    }

    pub fn get(&self, p: GadcParam) -> f64 {
        match p {
            GadcParam::Loss => self.gamma,
            GadcParam::Noise => self.noise,
            GadcParam::Phase => self.phase,
        }
    }

    pub fn with(mut self, p: GadcParam, value: f64) -> Result<Self> {
        match p {
            GadcParam::Loss => self.gamma = value,
            GadcParam::Noise => self.noise = value,
            GadcParam::Phase => self.phase = value,
        }
        Self::new(self.gamma, self.noise, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GadcParam {
    Loss,
    Noise,
    Phase,
}

impl GadcParam {
    pub fn name(self) -> &'static str {
        match self {
            GadcParam::Loss => "loss",
            GadcParam::Noise => "noise",
            GadcParam::Phase => "phase",
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            GadcParam::Phase => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for GadcParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GadcParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" | "gamma" => Ok(Self::Loss),
            "noise" | "N" => Ok(Self::Noise),
            "phase" | "phi" => Ok(Self::Phase),
            other => Err(Error::InvalidArgument(format!("unknown GADC parameter '{other}'"))),
        }
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn sigma_z() -> CMatrix {
    let mut z = identity(2);
    z[(1, 1)] = c(-1.0);
    z
}

/// Kraus operators `K_k U_φ` with `U_φ = e^{−iφσ_Z}`.
pub fn gadc_kraus(p: &GadcParams) -> Vec<CMatrix> {
    let (g, n) = (p.gamma, p.noise);
    let m = |a: f64, b: f64, cc: f64, d: f64| CMatrix::from_row_slice(2, 2, &[c(a), c(b), c(cc), c(d)]);
    let k = [
        m(1.0, 0.0, 0.0, (1.0 - g).sqrt()).scale((1.0 - n).sqrt()),
        m(0.0, (g * (1.0 - n)).sqrt(), 0.0, 0.0),
        m((1.0 - g).sqrt(), 0.0, 0.0, 1.0).scale(n.sqrt()),
        m(0.0, 0.0, (g * n).sqrt(), 0.0),
    ];
    let u = unitary_exp(&sigma_z(), p.phase);
    k.iter().map(|k| k * &u).collect()
}

/// Choi operator, reference-major:
/// `[[1−γN, 0, 0, e^{−2iφ}√(1−γ)], [0, γN, 0, 0], [0, 0, γ(1−N), 0], [e^{2iφ}√(1−γ), 0, 0, 1−γ(1−N)]]`.
pub fn gadc_choi(p: &GadcParams) -> CMatrix {
    let (g, n) = (p.gamma, p.noise);
    let corner = (1.0 - g).sqrt();
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0 - g * n);
    m[(1, 1)] = c(g * n);
    m[(2, 2)] = c(g * (1.0 - n));
    m[(3, 3)] = c(1.0 - g * (1.0 - n));
    m[(0, 3)] = C64::from_polar(corner, -2.0 * p.phase);
    m[(3, 0)] = C64::from_polar(corner, 2.0 * p.phase);
    m
}

/// Analytic derivative of the Choi operator.
pub fn gadc_choi_derivative(p: &GadcParams, which: GadcParam) -> CMatrix {
    let (g, n) = (p.gamma, p.noise);
    let mut m = CMatrix::zeros(4, 4);
    match which {
        GadcParam::Loss => {
            m[(0, 0)] = c(-n);
            m[(1, 1)] = c(n);
            m[(2, 2)] = c(1.0 - n);
            m[(3, 3)] = c(-(1.0 - n));
            let corner = -1.0 / (2.0 * (1.0 - g).sqrt());
            m[(0, 3)] = C64::from_polar(corner, -2.0 * p.phase);
            m[(3, 0)] = C64::from_polar(corner, 2.0 * p.phase);
        }
        GadcParam::Noise => return kron(&identity(2), &sigma_z()).scale(-g),
        GadcParam::Phase => {
            let corner = (1.0 - g).sqrt();
            m[(0, 3)] = C64::new(0.0, -2.0) * C64::from_polar(corner, -2.0 * p.phase);
            m[(3, 0)] = C64::new(0.0, 2.0) * C64::from_polar(corner, 2.0 * p.phase);
        }
    }
    m
}

/// The GADC as a family in the parameters listed in `free`, the others held
/// at their values in `base`. The family's Choi operator comes from the
/// Kraus operators; its derivative is analytic.
pub fn gadc_channel(base: GadcParams, free: &[GadcParam]) -> Result<ChannelFamily> {
    if free.is_empty() {
        return Err(Error::InvalidArgument("at least one free parameter is required".into()));
    }
    let free_k: Vec<GadcParam> = free.to_vec();
    let free_d = free_k.clone();
    let params_at = move |free: &[GadcParam], t: &ParamPoint| {
        let mut p = base;
        for (&which, &x) in free.iter().zip(t.as_slice()) {
            p = p.with(which, x)?;
        }
        Ok::<_, Error>(p)
    };
    let params_at2 = params_at;
    Ok(ChannelFamily::from_kraus(2, 2, free.len(), move |t| Ok(gadc_kraus(&params_at(&free_k, t)?)))
        .with_derivative(move |t, j| Ok(gadc_choi_derivative(&params_at2(&free_d, t)?, free_d[j])))
        .with_bounds(free.iter().map(|p| p.bounds()).collect())
        .with_diagonal_covariance(true))
}

/// Parameter point for `gadc_channel(base, free)` at `base`.
pub fn gadc_point(base: &GadcParams, free: &[GadcParam]) -> ParamPoint {
    ParamPoint::new(free.iter().map(|&p| base.get(p)).collect()).expect("finite GADC parameters")
}

pub fn f1(gamma: f64, n: f64) -> f64 {
    ((4.0 * n - 3.0) * n + (1.0 - n) / (1.0 - gamma) + 4.0 * (1.0 - n) * n * (1.0 - 2.0 * n) * gamma)
        / (4.0 * n * (1.0 - n) * gamma * gamma)
}

pub fn f2(gamma: f64, n: f64) -> f64 {
    (8.0 * gamma * n + 1.0 / n + 1.0 / ((1.0 - n) * (1.0 - gamma)) - 4.0 * (1.0 + gamma)) / (4.0 * gamma * gamma)
}

fn unit_step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The printed closed-form RLD Fisher information for one parameter.
pub fn gadc_closed_form(p: &GadcParams, target: GadcParam) -> f64 {
    let (g, n) = (p.gamma, p.noise);
    match target {
        GadcParam::Loss => {
            if n <= 0.5 {
                f1(g, n)
            } else {
                f2(g, n)
            }
        }
        GadcParam::Noise => (1.0 + (1.0 - 2.0 * n).abs() * g) / ((1.0 - n) * n),
        GadcParam::Phase => {
            4.0 * (1.0 - g) * (1.0 - g * (n + (1.0 - 2.0 * n) * unit_step(2.0 * n - 1.0))) / ((1.0 - n) * n * g * g)
        }
    }
}

/// Diagonals of the printed reduced blocks `Tr_B[∂_jΓ Γ⁻¹ ∂_kΓ]` for the
/// (loss, noise) pair, as `[[γγ, γN], [Nγ, NN]]`.
pub fn gadc_two_param_blocks(p: &GadcParams) -> [[[f64; 2]; 2]; 2] {
    let (g, n) = (p.gamma, p.noise);
    let gg = [
        (1.0 / (n - g * n) + 1.0 / (1.0 - n) - 4.0) / (4.0 * g * g),
        (1.0 / ((g - 1.0) * (n - 1.0)) + 1.0 / n - 4.0) / (4.0 * g * g),
    ];
    let mixed = -(1.0 - 2.0 * n) / (2.0 * g * n * (1.0 - n));
    let nn = 1.0 / (n * (1.0 - n));
    [[gg, [mixed, mixed]], [[mixed, mixed], [nn, nn]]]
}

/// Two-parameter RLD value assembled from the printed blocks:
/// `‖Σ_jk ⟨k|W|j⟩ B_jk‖_∞` with every block diagonal.
pub fn gadc_two_param_closed_form(p: &GadcParams, w: &WeightMatrix) -> Result<f64> {
    if w.dim() != 2 {
        return Err(Error::InvalidWeight("the (loss, noise) value needs a 2x2 weight".into()));
    }
    let b = gadc_two_param_blocks(p);
    let wm = w.matrix();
    let mut diag = [0.0; 2];
    for (i, d) in diag.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                *d += wm[(k, j)].re * b[j][k][i];
            }
        }
    }
    Ok(diag[0].max(diag[1]))
}

/// The weight `(1/4)[[1, 1], [1, 3]]` used for the two-parameter example.
pub fn example_weight() -> WeightMatrix {
    WeightMatrix::from_real(2, &[0.25, 0.25, 0.25, 0.75]).expect("valid weight")
}

/// Output of the probe `√p|00⟩ + √(1−p)|11⟩` and its (loss, noise) SLD matrix.
#[derive(Debug, Clone)]
pub struct GadcProbe {
    pub p: f64,
    pub output: CMatrix,
    pub sld: FisherMatrix,
}

fn probe_operator(p: f64) -> CMatrix {
    let mut z = CMatrix::zeros(2, 2);
    z[(0, 0)] = c(p.sqrt());
    z[(1, 1)] = c((1.0 - p).sqrt());
    kron(&z, &identity(2))
}

pub fn gadc_sld_probe(params: &GadcParams, p: f64) -> Result<GadcProbe> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probe weight {p} not in [0, 1]")));
    }
    let z = probe_operator(p);
    let sandwich = |m: &CMatrix| &z * m * &z;
    let output = sandwich(&gadc_choi(params));
    let grads = [
        sandwich(&gadc_choi_derivative(params, GadcParam::Loss)),
        sandwich(&gadc_choi_derivative(params, GadcParam::Noise)),
    ];
    let sld = sld_matrix_parts(&output, &grads)?;
    Ok(GadcProbe { p, output, sld })
}

/// `Tr[W · F(p)⁻¹]`, or `None` where the SLD matrix is singular or infinite.
pub fn gadc_sld_objective(params: &GadcParams, p: f64, w: &WeightMatrix) -> Result<Option<f64>> {
    Ok(gadc_sld_probe(params, p)?.sld.weighted_inverse_trace(w))
}

/// Minimizes `Tr[W · F(p)⁻¹]` over the probe weight `p ∈ [0, 1]` by a grid
/// prescan and a golden-section refinement. Returns `(p, value)`.
pub fn gadc_sld_objective_min(params: &GadcParams, w: &WeightMatrix) -> Result<(f64, f64)> {
    let f = |p: f64| -> Result<f64> { Ok(gadc_sld_objective(params, p, w)?.unwrap_or(f64::INFINITY)) };
    let n = 201;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&p| f(p)).collect::<Result<_>>()?;
    let best = (0..n).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    if !values[best].is_finite() {
        return Err(Error::Evaluation {
            point: vec![params.gamma, params.noise],
            reason: "SLD matrix singular for every probe".into(),
        });
    }
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1v, mut f2v) = (f(x1)?, f(x2)?);
    while hi - lo > 1e-10 {
        if f1v > f2v {
            lo = x1;
            x1 = x2;
            f1v = f2v;
            x2 = lo + r * (hi - lo);
            f2v = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2v = f1v;
            x1 = hi - r * (hi - lo);
            f1v = f(x1)?;
        }
    }
    let (p, v) = if f1v < f2v { (x1, f1v) } else { (x2, f2v) };
    Ok(if v <= values[best] { (p, v) } else { (grid[best], values[best]) })
}

/// What a curve estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveTarget {
    Single(GadcParam),
    /// Loss and noise jointly, scalarized by `W`.
    LossNoise(WeightMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub target: CurveTarget,
    /// Parameter placed on the horizontal axis.
    pub sweep: GadcParam,
    /// Values of the parameters that are not swept.
    pub fixed: GadcParams,
    pub grid: Vec<f64>,
    pub convention: TraceConvention,
    pub n: u64,
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub param: f64,
    pub rld_bound: f64,
    pub sld_bound: f64,
}

/// Inclusive grid `start, start + step, …` with `count` points.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("grid must be nonempty".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let h = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|i| if i == count - 1 { stop } else { start + h * i as f64 }).collect())
}

/// `1/(n I)` for the achievable parallel SLD bound; 0 for infinite `I`.
fn shot_noise_bound(fisher: FisherValue, n: u64) -> f64 {
    fisher.get().map_or(0.0, |v| 1.0 / (n as f64 * v))
}

fn curve_point(cfg: &CurveConfig, x: f64) -> Result<CurveRow> {
    let params = cfg.fixed.with(cfg.sweep, x)?;
    let (rld, sld) = match &cfg.target {
        CurveTarget::Single(target) => {
            let chan = gadc_channel(params, &[*target])?;
            let theta = ParamPoint::scalar(params.get(*target));
            let rld = rld_fisher_channel(&chan, &theta, cfg.convention)?;
            let sld = sld_fisher_channel(&chan, &theta, &cfg.probe)?.value;
            (
                crb(rld, cfg.n, BoundKind::ChannelRld)?.bound,
                shot_noise_bound(sld, cfg.n),
            )
        }
        CurveTarget::LossNoise(w) => {
            let free = [GadcParam::Loss, GadcParam::Noise];
            let chan = gadc_channel(params, &free)?;
            let rld = rld_value_channel(&chan, &gadc_point(&params, &free), w, cfg.convention)?;
            let (_, sld_objective) = gadc_sld_objective_min(&params, w)?;
            (
                crb(rld, cfg.n, BoundKind::MultiScalar)?.bound,
                sld_objective / cfg.n as f64,
            )
        }
    };
    Ok(CurveRow { param: x, rld_bound: rld, sld_bound: sld })
}

/// Bound curves over the configured grid; rows follow grid order.
pub fn gadc_curve(cfg: &CurveConfig) -> Result<Vec<CurveRow>> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidArgument("grid must be nonempty".into()));
    }
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if let CurveTarget::Single(t) = cfg.target {
        if t == cfg.sweep && t == GadcParam::Phase {
            return Err(Error::InvalidArgument("phase curves sweep loss or noise".into()));
        }
    }
    cfg.grid.par_iter().map(|&x| curve_point(cfg, x)).collect()
}

pub const CSV_HEADER: &str = "param,log10_rld_bound,log10_sld_bound";

/// CSV text with LF line endings and `digits` significant digits.
pub fn curve_csv(rows: &[CurveRow], digits: usize) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            sig(r.param, digits),
            sig(r.rld_bound.log10(), digits),
            sig(r.sld_bound.log10(), digits)
        ));
    }
    out
}

/// Fisher value from a closed form, for reporting alongside numeric values.
pub fn closed_form_value(p: &GadcParams, target: GadcParam) -> FisherValue {
    FisherValue::finite(gadc_closed_form(p, target), 0.0)
}
