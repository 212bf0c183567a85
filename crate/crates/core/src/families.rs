//! Parameterized families of states and channels.
//!
//! A family maps a [`ParamPoint`] to a density matrix (or a Choi operator)
//! and can report derivatives with respect to each parameter, either from a
//! registered analytic expression or by central finite differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_density, hermitian_part, identity, kron, max_abs, max_entangled_vector,
    min_eigenvalue, outer, partial_trace, permute_subsystems, CMatrix, Subsystem, C64, ZERO,
};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Kraus completeness tolerance accepted by [`choi_from_kraus`].
pub const KRAUS_COMPLETENESS_TOL: f64 = 1e-10;

/// A point `θ = (θ_1, …, θ_D)` in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("parameter vector must be nonempty".into()));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter {bad}")));
        }
        Ok(Self(values))
    }

    /// Single-parameter point. Panics on a non-finite value.
    pub fn scalar(theta: f64) -> Self {
        Self::new(vec![theta]).expect("finite scalar parameter")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut v = self.0.clone();
        v[index] += delta;
        Self(v)
    }

    pub fn concat(&self, other: &ParamPoint) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn split(&self, at: usize) -> (Self, Self) {
        (Self(self.0[..at].to_vec()), Self(self.0[at..].to_vec()))
    }
}

impl From<f64> for ParamPoint {
    fn from(theta: f64) -> Self {
        Self::scalar(theta)
    }
}

pub type MatrixFn = dyn Fn(&ParamPoint) -> Result<CMatrix> + Send + Sync;
pub type DerivativeFn = dyn Fn(&ParamPoint, usize) -> Result<CMatrix> + Send + Sync;
pub type KrausFn = dyn Fn(&ParamPoint) -> Result<Vec<CMatrix>> + Send + Sync;

/// Anything that maps parameters to a matrix and can be differentiated.
pub trait Differentiable {
    fn num_params(&self) -> usize;
    fn value(&self, theta: &ParamPoint) -> Result<CMatrix>;
    /// Registered analytic derivative, if any.
    fn analytic_derivative(&self, theta: &ParamPoint, index: usize) -> Option<Result<CMatrix>>;
    fn fd_step(&self) -> f64;
    /// Open interval `(lo, hi)` for each parameter.
    fn bounds(&self) -> &[(f64, f64)];
}

fn check_point<F: Differentiable + ?Sized>(family: &F, theta: &ParamPoint, index: usize) -> Result<()> {
    if theta.dim() != family.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "family has {} parameters, point has {}",
            family.num_params(),
            theta.dim()
        )));
    }
    if index >= family.num_params() {
        return Err(Error::InvalidArgument(format!("parameter index {index} out of range")));
    }
    Ok(())
}

fn domain_distance<F: Differentiable + ?Sized>(family: &F, theta: &ParamPoint, index: usize) -> Result<f64> {
    let x = theta.get(index);
    let (lo, hi) = family.bounds().get(index).copied().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    if !(x > lo && x < hi) {
        return Err(Error::OutOfDomain(format!(
            "parameter {index} = {x} not in ({lo}, {hi})"
        )));
    }
    Ok((x - lo).min(hi - x))
}

/// Central finite difference `(f(θ+h) − f(θ−h)) / 2h`, Hermitian-symmetrized.
///
/// The step is clamped to half the distance to the nearest domain boundary.
pub fn finite_difference<F: Differentiable + ?Sized>(
    family: &F,
    theta: &ParamPoint,
    index: usize,
) -> Result<CMatrix> {
    check_point(family, theta, index)?;
    let dist = domain_distance(family, theta, index)?;
    let h = family.fd_step().min(dist / 2.0);
    let eval = |p: ParamPoint| {
        family.value(&p).map_err(|e| Error::Evaluation {
            point: p.as_slice().to_vec(),
            reason: e.to_string(),
        })
    };
    let plus = eval(theta.shifted(index, h))?;
    let minus = eval(theta.shifted(index, -h))?;
    Ok(hermitian_part(&((plus - minus).unscale(2.0 * h))))
}

/// Derivative with respect to parameter `index`: analytic if registered,
/// otherwise a central difference.
pub fn derivative<F: Differentiable + ?Sized>(family: &F, theta: &ParamPoint, index: usize) -> Result<CMatrix> {
    check_point(family, theta, index)?;
    match family.analytic_derivative(theta, index) {
        Some(d) => d.map(|m| hermitian_part(&m)),
        None => finite_difference(family, theta, index),
    }
}

/// All partial derivatives at `theta`.
pub fn gradient<F: Differentiable + ?Sized>(family: &F, theta: &ParamPoint) -> Result<Vec<CMatrix>> {
    (0..family.num_params()).map(|j| derivative(family, theta, j)).collect()
}

/// A differentiable family `θ ↦ ρ_θ` of density matrices.
#[derive(Clone)]
pub struct StateFamily {
    dim: usize,
    num_params: usize,
    eval: Arc<MatrixFn>,
    deriv: Option<Arc<DerivativeFn>>,
    fd_step: f64,
    bounds: Vec<(f64, f64)>,
}

impl fmt::Debug for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateFamily")
            .field("dim", &self.dim)
            .field("num_params", &self.num_params)
            .field("analytic_derivative", &self.deriv.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl StateFamily {
    pub fn new<F>(dim: usize, num_params: usize, eval: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<CMatrix> + Send + Sync + 'static,
    {
        Self {
            dim,
            num_params,
            eval: Arc::new(eval),
            deriv: None,
            fd_step: DEFAULT_FD_STEP,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_params],
        }
    }

    pub fn with_derivative<F>(mut self, deriv: F) -> Self
    where
        F: Fn(&ParamPoint, usize) -> Result<CMatrix> + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.num_params, "one bound per parameter");
        self.bounds = bounds;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Drops the analytic derivative so that finite differences are used.
    pub fn without_derivative(mut self) -> Self {
        self.deriv = None;
        self
    }

    /// A parameter-independent family.
    pub fn constant(rho: CMatrix, num_params: usize) -> Self {
        let dim = rho.nrows();
        let zero = CMatrix::zeros(dim, dim);
        Self::new(dim, num_params, move |_| Ok(rho.clone())).with_derivative(move |_, _| Ok(zero.clone()))
    }

    /// Classical family `diag(p_θ)`.
    pub fn diagonal(dist: DistributionFamily) -> Self {
        let d = dist.len();
        let n = dist.num_params();
        let dist2 = dist.clone();
        Self::new(d, n, move |t| Ok(diag_real(&dist.probabilities(t)?)))
            .with_derivative(move |t, j| Ok(diag_real(&dist2.derivative(t, j)?)))
            .with_bounds(dist_bounds(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, theta: &ParamPoint) -> Result<CMatrix> {
        self.value(theta)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    /// `ρ_θ ⊗ σ_θ` with both factors driven by the same parameters.
    pub fn tensor(&self, other: &StateFamily) -> Result<StateFamily> {
        if self.num_params != other.num_params {
            return Err(Error::DimensionMismatch("tensor factors need the same parameters".into()));
        }
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        Ok(StateFamily::new(self.dim * other.dim, self.num_params, move |t| {
            Ok(kron(&a.value(t)?, &b.value(t)?))
        })
        .with_derivative(move |t, j| {
            let (ra, rb) = (a2.value(t)?, b2.value(t)?);
            let (da, db) = (derivative(&a2, t, j)?, derivative(&b2, t, j)?);
            Ok(kron(&da, &rb) + kron(&ra, &db))
        })
        .with_bounds(intersect_bounds(&self.bounds, &other.bounds)))
    }

    /// `ρ_{θ_a} ⊗ σ_{θ_b}` with the parameter vectors concatenated.
    pub fn product(&self, other: &StateFamily) -> StateFamily {
        let split = self.num_params;
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        StateFamily::new(self.dim * other.dim, self.num_params + other.num_params, move |t| {
            let (ta, tb) = t.split(split);
            Ok(kron(&a.value(&ta)?, &b.value(&tb)?))
        })
        .with_derivative(move |t, j| {
            let (ta, tb) = t.split(split);
            if j < split {
                Ok(kron(&derivative(&a2, &ta, j)?, &b2.value(&tb)?))
            } else {
                Ok(kron(&a2.value(&ta)?, &derivative(&b2, &tb, j - split)?))
            }
        })
        .with_bounds(bounds)
    }

    /// `Σ_x w_x ρ^x_θ` for fixed weights.
    pub fn mixture(families: &[StateFamily], weights: &[f64]) -> Result<StateFamily> {
        if families.is_empty() || families.len() != weights.len() {
            return Err(Error::DimensionMismatch("one weight per family required".into()));
        }
        let dim = families[0].dim;
        let n = families[0].num_params;
        if families.iter().any(|f| f.dim != dim || f.num_params != n) {
            return Err(Error::DimensionMismatch("mixture components must agree in shape".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("weights must form a probability vector".into()));
        }
        let fams: Vec<StateFamily> = families.to_vec();
        let ws: Vec<f64> = weights.to_vec();
        let (fams2, ws2) = (fams.clone(), ws.clone());
        let bounds = fams.iter().fold(vec![(f64::NEG_INFINITY, f64::INFINITY); n], |acc, f| {
            intersect_bounds(&acc, &f.bounds)
        });
        Ok(StateFamily::new(dim, n, move |t| {
            let mut out = CMatrix::zeros(dim, dim);
            for (f, &w) in fams.iter().zip(&ws) {
                out += f.value(t)?.scale(w);
            }
            Ok(out)
        })
        .with_derivative(move |t, j| {
            let mut out = CMatrix::zeros(dim, dim);
            for (f, &w) in fams2.iter().zip(&ws2) {
                out += derivative(f, t, j)?.scale(w);
            }
            Ok(out)
        })
        .with_bounds(bounds))
    }

    /// Checks PSD-ness, unit trace and derivative consistency at each sample.
    pub fn validate(&self, samples: &[ParamPoint]) -> ValidationReport {
        let mut report = ValidationReport::default();
        for theta in samples {
            match self.value(theta) {
                Ok(rho) => {
                    report.observe_state(&rho);
                    if self.deriv.is_some() {
                        for j in 0..self.num_params {
                            report.observe_derivative(self, theta, j);
                        }
                    }
                }
                Err(e) => report.errors.push(e.to_string()),
            }
        }
        report
    }
}

impl Differentiable for StateFamily {
    fn num_params(&self) -> usize {
        self.num_params
    }

    fn value(&self, theta: &ParamPoint) -> Result<CMatrix> {
        if theta.dim() != self.num_params {
            return Err(Error::DimensionMismatch(format!(
                "family has {} parameters, point has {}",
                self.num_params,
                theta.dim()
            )));
        }
        let rho = (self.eval)(theta)?;
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "family declared dimension {}, produced {}x{}",
                self.dim,
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(rho)
    }

    fn analytic_derivative(&self, theta: &ParamPoint, index: usize) -> Option<Result<CMatrix>> {
        self.deriv.as_ref().map(|d| d(theta, index))
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// A family of probability vectors `θ ↦ p_θ`.
#[derive(Clone)]
pub struct DistributionFamily {
    len: usize,
    num_params: usize,
    eval: Arc<dyn Fn(&ParamPoint) -> Result<Vec<f64>> + Send + Sync>,
    deriv: Option<Arc<dyn Fn(&ParamPoint, usize) -> Result<Vec<f64>> + Send + Sync>>,
    fd_step: f64,
}

impl fmt::Debug for DistributionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributionFamily").field("len", &self.len).field("num_params", &self.num_params).finish()
    }
}

impl DistributionFamily {
    pub fn new<F>(len: usize, num_params: usize, eval: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self { len, num_params, eval: Arc::new(eval), deriv: None, fd_step: DEFAULT_FD_STEP }
    }

    pub fn with_derivative<F>(mut self, deriv: F) -> Self
    where
        F: Fn(&ParamPoint, usize) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    /// Bernoulli family `(θ, 1 − θ)`.
    pub fn bernoulli() -> Self {
        Self::new(2, 1, |t| Ok(vec![t.get(0), 1.0 - t.get(0)])).with_derivative(|_, _| Ok(vec![1.0, -1.0]))
    }

    /// Parameter-independent distribution.
    pub fn constant(p: Vec<f64>, num_params: usize) -> Self {
        let len = p.len();
        Self::new(len, num_params, move |_| Ok(p.clone())).with_derivative(move |_, _| Ok(vec![0.0; len]))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn probabilities(&self, theta: &ParamPoint) -> Result<Vec<f64>> {
        let p = (self.eval)(theta)?;
        if p.len() != self.len {
            return Err(Error::DimensionMismatch(format!("expected {} outcomes, got {}", self.len, p.len())));
        }
        Ok(p)
    }

    pub fn derivative(&self, theta: &ParamPoint, index: usize) -> Result<Vec<f64>> {
        if let Some(d) = &self.deriv {
            return d(theta, index);
        }
        let h = self.fd_step;
        let plus = self.probabilities(&theta.shifted(index, h))?;
        let minus = self.probabilities(&theta.shifted(index, -h))?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    }
}

fn diag_real(v: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(v.len(), v.len());
    for (i, &x) in v.iter().enumerate() {
        m[(i, i)] = C64::new(x, 0.0);
    }
    m
}

fn dist_bounds(n: usize) -> Vec<(f64, f64)> {
    vec![(f64::NEG_INFINITY, f64::INFINITY); n]
}

fn intersect_bounds(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    a.iter().zip(b).map(|(&(l1, h1), &(l2, h2))| (l1.max(l2), h1.min(h2))).collect()
}

/// Choi operator `Γ_RB = Σ_ij |i⟩⟨j| ⊗ N(|i⟩⟨j|)` of a Kraus channel.
pub fn choi_from_kraus(kraus: &[CMatrix]) -> Result<CMatrix> {
    let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let (d_out, d_in) = first.shape();
    if kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
        return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
    }
    let residual = kraus_completeness_residual(kraus);
    if residual > KRAUS_COMPLETENESS_TOL {
        return Err(Error::NotTracePreserving { residual });
    }
    Ok(choi_from_operators(kraus, d_in, d_out))
}

/// `max |Σ_k K_k^† K_k − I|`.
pub fn kraus_completeness_residual(kraus: &[CMatrix]) -> f64 {
    let d_in = kraus.first().map(|k| k.ncols()).unwrap_or(0);
    let mut sum = CMatrix::zeros(d_in, d_in);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    max_abs(&(sum - identity(d_in)))
}

fn choi_from_operators(kraus: &[CMatrix], d_in: usize, d_out: usize) -> CMatrix {
    let n = d_in * d_out;
    let mut choi = CMatrix::zeros(n, n);
    for k in kraus {
        // (I ⊗ K)|Γ⟩ has entry K[b, i] at index (i, b)
        let v = linalg::CVector::from_fn(n, |idx, _| k[(idx % d_out, idx / d_out)]);
        choi += outer(&v);
    }
    choi
}

/// Applies a channel given by its Choi operator to an operator on `R ⊗ A`.
///
/// Computes `⟨Γ|_{AS} (ρ_RA ⊗ Γ_SB) |Γ⟩_{AS}`; linear in both arguments.
pub fn apply_choi(choi: &CMatrix, dims: (usize, usize), input: &CMatrix, d_ref: usize) -> Result<CMatrix> {
    let (d_in, d_out) = dims;
    if choi.nrows() != d_in * d_out || choi.ncols() != d_in * d_out {
        return Err(Error::DimensionMismatch(format!(
            "Choi operator is {}x{}, channel dims ({d_in}, {d_out})",
            choi.nrows(),
            choi.ncols()
        )));
    }
    if d_ref == 0 || input.nrows() != d_ref * d_in || input.ncols() != d_ref * d_in {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, expected {}",
            input.nrows(),
            input.ncols(),
            d_ref * d_in
        )));
    }
    let n = d_ref * d_out;
    let mut out = CMatrix::zeros(n, n);
    for r in 0..d_ref {
        for r2 in 0..d_ref {
            for a in 0..d_in {
                for a2 in 0..d_in {
                    let coeff = input[(r * d_in + a, r2 * d_in + a2)];
                    if coeff == ZERO {
                        continue;
                    }
                    for b in 0..d_out {
                        for b2 in 0..d_out {
                            out[(r * d_out + b, r2 * d_out + b2)] += coeff * choi[(a * d_out + b, a2 * d_out + b2)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `Σ_k (I_R ⊗ K_k) ρ (I_R ⊗ K_k)^†`.
pub fn apply_kraus(kraus: &[CMatrix], input: &CMatrix, d_ref: usize) -> Result<CMatrix> {
    let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let (d_out, d_in) = first.shape();
    if input.nrows() != d_ref * d_in {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, expected {}",
            input.nrows(),
            input.ncols(),
            d_ref * d_in
        )));
    }
    let id = identity(d_ref);
    let mut out = CMatrix::zeros(d_ref * d_out, d_ref * d_out);
    for k in kraus {
        let big = kron(&id, k);
        out += &big * input * big.adjoint();
    }
    Ok(out)
}

/// A differentiable family of channels `θ ↦ N^θ_{A→B}`, carried by its
/// Choi operator and optionally by Kraus operators.
#[derive(Clone)]
pub struct ChannelFamily {
    d_in: usize,
    d_out: usize,
    num_params: usize,
    choi: Arc<MatrixFn>,
    kraus: Option<Arc<KrausFn>>,
    deriv: Option<Arc<DerivativeFn>>,
    fd_step: f64,
    bounds: Vec<(f64, f64)>,
    diagonal_covariant: bool,
}

impl fmt::Debug for ChannelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelFamily")
            .field("d_in", &self.d_in)
            .field("d_out", &self.d_out)
            .field("num_params", &self.num_params)
            .field("kraus", &self.kraus.is_some())
            .field("analytic_derivative", &self.deriv.is_some())
            .field("diagonal_covariant", &self.diagonal_covariant)
            .finish()
    }
}

impl ChannelFamily {
    pub fn from_choi<F>(d_in: usize, d_out: usize, num_params: usize, choi: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<CMatrix> + Send + Sync + 'static,
    {
        Self {
            d_in,
            d_out,
            num_params,
            choi: Arc::new(choi),
            kraus: None,
            deriv: None,
            fd_step: DEFAULT_FD_STEP,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); num_params],
            diagonal_covariant: false,
        }
    }

    pub fn from_kraus<F>(d_in: usize, d_out: usize, num_params: usize, kraus: F) -> Self
    where
        F: Fn(&ParamPoint) -> Result<Vec<CMatrix>> + Send + Sync + 'static,
    {
        let kraus: Arc<KrausFn> = Arc::new(kraus);
        let k2 = Arc::clone(&kraus);
        let mut fam = Self::from_choi(d_in, d_out, num_params, move |t| choi_from_kraus(&k2(t)?));
        fam.kraus = Some(kraus);
        fam
    }

    /// Parameter-independent channel from fixed Kraus operators.
    pub fn constant_kraus(kraus: Vec<CMatrix>, num_params: usize) -> Result<Self> {
        let choi = choi_from_kraus(&kraus)?;
        let (d_out, d_in) = kraus[0].shape();
        let zero = CMatrix::zeros(choi.nrows(), choi.ncols());
        let mut fam = Self::from_choi(d_in, d_out, num_params, move |_| Ok(choi.clone()))
            .with_derivative(move |_, _| Ok(zero.clone()));
        let ks = kraus.clone();
        fam.kraus = Some(Arc::new(move |_| Ok(ks.clone())));
        Ok(fam)
    }

    /// Identity channel on dimension `d`.
    pub fn identity_channel(d: usize, num_params: usize) -> Self {
        Self::constant_kraus(vec![identity(d)], num_params).expect("identity is trace preserving")
    }

    /// Replacer channel `ρ_A ↦ Tr[ρ_A] σ^θ_B`; its Choi operator is `I_R ⊗ σ^θ`.
    pub fn replacer(d_in: usize, family: &StateFamily) -> Self {
        let (f, f2) = (family.clone(), family.clone());
        Self::from_choi(d_in, family.dim(), family.num_params(), move |t| Ok(kron(&identity(d_in), &f.value(t)?)))
            .with_derivative(move |t, j| Ok(kron(&identity(d_in), &derivative(&f2, t, j)?)))
            .with_bounds(family.bounds().to_vec())
    }

    /// Classical-quantum channel: measure in the computational basis, prepare
    /// `ω^x_θ` on outcome `x`. Choi operator `Σ_x |x⟩⟨x| ⊗ ω^x_θ`.
    pub fn classical_quantum(letters: &[StateFamily]) -> Result<Self> {
        let first = letters.first().ok_or_else(|| Error::InvalidArgument("empty alphabet".into()))?;
        let (d_out, n) = (first.dim(), first.num_params());
        if letters.iter().any(|l| l.dim() != d_out || l.num_params() != n) {
            return Err(Error::DimensionMismatch("letters must share dimension and parameters".into()));
        }
        let k = letters.len();
        let (ls, ls2) = (letters.to_vec(), letters.to_vec());
        let bounds = letters.iter().fold(vec![(f64::NEG_INFINITY, f64::INFINITY); n], |acc, f| {
            intersect_bounds(&acc, f.bounds())
        });
        let assemble = move |blocks: Vec<CMatrix>| {
            let mut out = CMatrix::zeros(k * d_out, k * d_out);
            for (x, b) in blocks.iter().enumerate() {
                out.view_mut((x * d_out, x * d_out), (d_out, d_out)).copy_from(b);
            }
            out
        };
        let assemble2 = assemble;
        Ok(Self::from_choi(k, d_out, n, move |t| {
            Ok(assemble(ls.iter().map(|l| l.value(t)).collect::<Result<_>>()?))
        })
        .with_derivative(move |t, j| Ok(assemble2(ls2.iter().map(|l| derivative(l, t, j)).collect::<Result<_>>()?)))
        .with_bounds(bounds))
    }

    pub fn with_derivative<F>(mut self, deriv: F) -> Self
    where
        F: Fn(&ParamPoint, usize) -> Result<CMatrix> + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.num_params, "one bound per parameter");
        self.bounds = bounds;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Declares covariance under diagonal unitaries, which lets probe searches
    /// restrict to Schmidt-diagonal inputs `Σ_i √p_i |ii⟩`.
    pub fn with_diagonal_covariance(mut self, covariant: bool) -> Self {
        self.diagonal_covariant = covariant;
        self
    }

    pub fn without_derivative(mut self) -> Self {
        self.deriv = None;
        self
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_in, self.d_out)
    }

    pub fn is_diagonal_covariant(&self) -> bool {
        self.diagonal_covariant
    }

    pub fn choi(&self, theta: &ParamPoint) -> Result<CMatrix> {
        self.value(theta)
    }

    pub fn kraus(&self, theta: &ParamPoint) -> Option<Result<Vec<CMatrix>>> {
        self.kraus.as_ref().map(|k| k(theta))
    }

    /// Output `N_θ(ρ_RA)` via the post-selected teleportation identity.
    pub fn apply(&self, theta: &ParamPoint, input: &CMatrix, d_ref: usize) -> Result<CMatrix> {
        apply_choi(&self.choi(theta)?, self.dims(), input, d_ref)
    }

    /// Output family `θ ↦ N_θ(ρ_RA)` for a fixed input.
    pub fn output_family(&self, input: &CMatrix, d_ref: usize) -> Result<StateFamily> {
        if input.nrows() != d_ref * self.d_in {
            return Err(Error::DimensionMismatch("input does not match channel input".into()));
        }
        let (c, c2) = (self.clone(), self.clone());
        let (x, x2) = (input.clone(), input.clone());
        Ok(StateFamily::new(d_ref * self.d_out, self.num_params, move |t| c.apply(t, &x, d_ref))
            .with_derivative(move |t, j| apply_choi(&derivative(&c2, t, j)?, c2.dims(), &x2, d_ref))
            .with_bounds(self.bounds.clone()))
    }

    /// `θ ↦ N_θ(ρ^θ_RA)` for a parameter-dependent input; product rule for
    /// the derivative.
    pub fn apply_to_family(&self, input: &StateFamily, d_ref: usize) -> Result<StateFamily> {
        if input.dim() != d_ref * self.d_in || input.num_params() != self.num_params {
            return Err(Error::DimensionMismatch("input family does not match channel".into()));
        }
        let (c, c2) = (self.clone(), self.clone());
        let (f, f2) = (input.clone(), input.clone());
        Ok(StateFamily::new(d_ref * self.d_out, self.num_params, move |t| c.apply(t, &f.value(t)?, d_ref))
            .with_derivative(move |t, j| {
                let dims = c2.dims();
                let a = apply_choi(&derivative(&c2, t, j)?, dims, &f2.value(t)?, d_ref)?;
                let b = apply_choi(&c2.choi(t)?, dims, &derivative(&f2, t, j)?, d_ref)?;
                Ok(a + b)
            })
            .with_bounds(intersect_bounds(&self.bounds, input.bounds())))
    }

    /// Serial composition `self ∘ first` (apply `first`, then `self`).
    pub fn compose(&self, first: &ChannelFamily) -> Result<ChannelFamily> {
        if first.d_out != self.d_in || first.num_params != self.num_params {
            return Err(Error::DimensionMismatch("channels cannot be composed".into()));
        }
        let (outer_c, inner_c) = (self.clone(), first.clone());
        let (outer_d, inner_d) = (self.clone(), first.clone());
        let d_ref = first.d_in;
        Ok(ChannelFamily::from_choi(first.d_in, self.d_out, self.num_params, move |t| {
            outer_c.apply(t, &inner_c.choi(t)?, d_ref)
        })
        .with_derivative(move |t, j| {
            let dims = outer_d.dims();
            let a = apply_choi(&derivative(&outer_d, t, j)?, dims, &inner_d.choi(t)?, d_ref)?;
            let b = apply_choi(&outer_d.choi(t)?, dims, &derivative(&inner_d, t, j)?, d_ref)?;
            Ok(a + b)
        })
        .with_bounds(intersect_bounds(&self.bounds, &first.bounds)))
    }

    /// Parallel use `N_{θ_a} ⊗ M_{θ_b}` with the parameter vectors concatenated.
    pub fn parallel(&self, other: &ChannelFamily) -> ChannelFamily {
        let split = self.num_params;
        let dims = [self.d_in, self.d_out, other.d_in, other.d_out];
        // R1 B1 R2 B2 -> R1 R2 B1 B2
        let perm = [0usize, 2, 1, 3];
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        let reorder = move |m: CMatrix| permute_subsystems(&m, &dims, &perm);
        ChannelFamily::from_choi(self.d_in * other.d_in, self.d_out * other.d_out, self.num_params + other.num_params, move |t| {
            let (ta, tb) = t.split(split);
            reorder(kron(&a.choi(&ta)?, &b.choi(&tb)?))
        })
        .with_derivative(move |t, j| {
            let (ta, tb) = t.split(split);
            let m = if j < split {
                kron(&derivative(&a2, &ta, j)?, &b2.choi(&tb)?)
            } else {
                kron(&a2.choi(&ta)?, &derivative(&b2, &tb, j - split)?)
            };
            reorder(m)
        })
        .with_bounds(bounds)
    }

    /// Checks Choi positivity, trace preservation, Kraus/Choi agreement and
    /// derivative consistency at each sample.
    pub fn validate(&self, samples: &[ParamPoint]) -> ValidationReport {
        let mut report = ValidationReport::default();
        for theta in samples {
            let choi = match self.choi(theta) {
                Ok(c) => c,
                Err(e) => {
                    report.errors.push(e.to_string());
                    continue;
                }
            };
            let scale = max_abs(&choi).max(1.0);
            report.max_psd_violation = report.max_psd_violation.max((-min_eigenvalue(&choi)).max(0.0) / scale);
            if let Ok(marginal) = partial_trace(&choi, (self.d_in, self.d_out), Subsystem::Second) {
                report.max_cptp_deviation = report.max_cptp_deviation.max(max_abs(&(marginal - identity(self.d_in))));
            }
            if let Some(Ok(kraus)) = self.kraus(theta) {
                report.max_kraus_deviation =
                    report.max_kraus_deviation.max(max_abs(&(choi_from_operators(&kraus, self.d_in, self.d_out) - &choi)));
            }
            if self.deriv.is_some() {
                for j in 0..self.num_params {
                    report.observe_derivative(self, theta, j);
                }
            }
        }
        report
    }
}

impl Differentiable for ChannelFamily {
    fn num_params(&self) -> usize {
        self.num_params
    }

    fn value(&self, theta: &ParamPoint) -> Result<CMatrix> {
        if theta.dim() != self.num_params {
            return Err(Error::DimensionMismatch(format!(
                "family has {} parameters, point has {}",
                self.num_params,
                theta.dim()
            )));
        }
        let c = (self.choi)(theta)?;
        let n = self.d_in * self.d_out;
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!("Choi operator must be {n}x{n}")));
        }
        Ok(c)
    }

    fn analytic_derivative(&self, theta: &ParamPoint, index: usize) -> Option<Result<CMatrix>> {
        self.deriv.as_ref().map(|d| d(theta, index))
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// Thresholds used to flag a [`ValidationReport`].
pub const VALIDATION_TOL: f64 = 1e-10;
pub const DERIVATIVE_TOL: f64 = 1e-6;

/// Residuals collected by `validate`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Largest `max(0, −λ_min)`, relative to the matrix scale.
    pub max_psd_violation: f64,
    /// Largest `|Tr ρ − 1|` (state families only).
    pub max_trace_deviation: f64,
    /// Largest `max |Tr_B Γ − I_R|` (channel families only).
    pub max_cptp_deviation: f64,
    /// Largest `max |Choi(Kraus) − Γ|` (channel families with Kraus operators).
    pub max_kraus_deviation: f64,
    /// Largest `‖analytic − FD‖_F / (1 + ‖analytic‖_F)`.
    pub max_derivative_deviation: f64,
    pub errors: Vec<String>,
}

impl ValidationReport {
    fn observe_state(&mut self, rho: &CMatrix) {
        let scale = max_abs(rho).max(1.0);
        self.max_psd_violation = self.max_psd_violation.max((-min_eigenvalue(rho)).max(0.0) / scale);
        let tr = linalg::trace(rho);
        self.max_trace_deviation = self.max_trace_deviation.max((tr - C64::new(1.0, 0.0)).norm());
        if let Err(e) = check_density(rho, 1e-6) {
            if !matches!(e, Error::NotDensity(_)) {
                self.errors.push(e.to_string());
            }
        }
    }

    fn observe_derivative<F: Differentiable + ?Sized>(&mut self, family: &F, theta: &ParamPoint, j: usize) {
        let analytic = match family.analytic_derivative(theta, j) {
            Some(Ok(d)) => d,
            Some(Err(e)) => {
                self.errors.push(e.to_string());
                return;
            }
            None => return,
        };
        match finite_difference(family, theta, j) {
            Ok(fd) => {
                let dev = (&analytic - fd).norm() / (1.0 + analytic.norm());
                self.max_derivative_deviation = self.max_derivative_deviation.max(dev);
            }
            Err(e) => self.errors.push(e.to_string()),
        }
    }

    /// True when any residual exceeds its threshold or an evaluation failed.
    pub fn flagged(&self) -> bool {
        !self.errors.is_empty()
            || self.max_psd_violation > VALIDATION_TOL
            || self.max_trace_deviation > VALIDATION_TOL
            || self.max_cptp_deviation > VALIDATION_TOL
            || self.max_kraus_deviation > VALIDATION_TOL
            || self.max_derivative_deviation > DERIVATIVE_TOL
    }
}

/// Normalized maximally entangled state `|Γ⟩⟨Γ| / d`.
pub fn max_entangled_state(d: usize) -> Result<CMatrix> {
    Ok(outer(&max_entangled_vector(d)?).unscale(d as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_qubit() -> StateFamily {
        StateFamily::new(2, 1, |t| Ok(diag_real(&[t.get(0), 1.0 - t.get(0)]))).with_bounds(vec![(0.0, 1.0)])
    }

    #[test]
    fn constant_family_has_zero_derivative() {
        let fam = StateFamily::constant(identity(2).scale(0.5), 1).without_derivative();
        let d = derivative(&fam, &ParamPoint::scalar(0.3), 0).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn linear_family_derivative() {
        let d = derivative(&linear_qubit(), &ParamPoint::scalar(0.4), 0).unwrap();
        assert!((d - diag_real(&[1.0, -1.0])).norm() < 1e-9);
    }

    #[test]
    fn step_is_clamped_near_the_boundary() {
        let fam = linear_qubit().with_fd_step(0.5);
        let d = derivative(&fam, &ParamPoint::scalar(0.01), 0).unwrap();
        assert!((d - diag_real(&[1.0, -1.0])).norm() < 1e-9);
        assert!(matches!(derivative(&fam, &ParamPoint::scalar(1.0), 0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn evaluation_failure_names_the_point() {
        let fam = StateFamily::new(1, 1, |t| {
            if t.get(0) > 0.5 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                Ok(identity(1))
            }
        });
        match derivative(&fam, &ParamPoint::scalar(0.5), 0) {
            Err(Error::Evaluation { point, .. }) => assert!(point[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_channel_choi() {
        let choi = choi_from_kraus(&[identity(2)]).unwrap();
        let expected = outer(&max_entangled_vector(2).unwrap());
        assert_eq!(choi, expected);
        assert_eq!(choi[(0, 3)], ONE);
        assert_eq!(choi[(3, 0)], ONE);
    }

    #[test]
    fn non_trace_preserving_kraus_is_rejected() {
        let k = identity(2).scale(0.9);
        assert!(matches!(choi_from_kraus(&[k]), Err(Error::NotTracePreserving { .. })));
    }

    #[test]
    fn identity_channel_leaves_input_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = CMatrix::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let choi = choi_from_kraus(&[identity(2)]).unwrap();
        let out = apply_choi(&choi, (2, 2), &rho, 2).unwrap();
        assert!((out - rho).norm() < 1e-12);
    }

    #[test]
    fn replacer_channel_outputs_marginal_times_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = CMatrix::from_fn(6, 6, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut rho = &a * a.adjoint();
        rho /= linalg::trace(&rho);
        let sigma = diag_real(&[0.3, 0.7]);
        let choi = kron(&identity(3), &sigma);
        let out = apply_choi(&choi, (3, 2), &rho, 2).unwrap();
        let rho_r = partial_trace(&rho, (2, 3), Subsystem::Second).unwrap();
        assert!((out - kron(&rho_r, &sigma)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let choi = choi_from_kraus(&[identity(2)]).unwrap();
        assert!(apply_choi(&choi, (2, 2), &identity(3), 1).is_err());
    }

    #[test]
    fn validate_flags_bad_trace_and_bad_derivative() {
        let bad_trace = StateFamily::new(2, 1, |_| Ok(diag_real(&[0.45, 0.45])));
        let report = bad_trace.validate(&[ParamPoint::scalar(0.2)]);
        assert!(report.flagged());
        assert!((report.max_trace_deviation - 0.1).abs() < 1e-12);

        let wrong = linear_qubit().with_derivative(|_, _| Ok(diag_real(&[2.0, -2.0])));
        let report = wrong.validate(&[ParamPoint::scalar(0.3)]);
        assert!(report.flagged());
        assert!(report.max_derivative_deviation > 0.1);

        let good = linear_qubit().with_derivative(|_, _| Ok(diag_real(&[1.0, -1.0])));
        assert!(!good.validate(&[ParamPoint::scalar(0.3)]).flagged());
    }

    #[test]
    fn parallel_channel_choi_matches_tensor_of_channels() {
        let sigma = StateFamily::constant(diag_real(&[0.2, 0.8]), 1);
        let a = ChannelFamily::identity_channel(2, 1);
        let b = ChannelFamily::replacer(2, &sigma);
        let par = a.parallel(&b);
        let theta = ParamPoint::new(vec![0.1, 0.2]).unwrap();
        let choi = par.choi(&theta).unwrap();
        let marginal = partial_trace(&choi, (4, 4), Subsystem::Second).unwrap();
        assert!((marginal - identity(4)).norm() < 1e-12);
        // the product input |Γ⟩⟨Γ|/2 ⊗ |Γ⟩⟨Γ|/2 reordered to R1R2A1A2
        let phi = max_entangled_state(2).unwrap();
        let input = permute_subsystems(&kron(&phi, &phi), &[2, 2, 2, 2], &[0, 2, 1, 3]).unwrap();
        let out = apply_choi(&choi, (4, 4), &input, 4).unwrap();
        let expected_unordered = kron(&phi, &kron(&identity(2).scale(0.5), &diag_real(&[0.2, 0.8])));
        let expected = permute_subsystems(&expected_unordered, &[2, 2, 2, 2], &[0, 2, 1, 3]).unwrap();
        assert!((out - expected).norm() < 1e-12);
    }
}
