//! Fisher information of state families: classical, SLD, RLD, smoothed,
//! the root-SLD variational witness, cq decompositions and the
//! multiparameter RLD/SLD matrices.

use std::fmt;

use crate::error::{Error, Result};
use crate::families::{derivative, gradient, Differentiable, DistributionFamily, ParamPoint, StateFamily};
use crate::linalg::{
    check_density, eig_unchecked, hermitian_eig, hermitian_part, identity, kron, support_pinv_from_spectrum,
    trace, CMatrix, RMatrix, Spectrum, C64, DEFAULT_SUPPORT_TOL,
};

/// Absolute tolerance on finiteness residuals, scaled by `max(1, ‖·‖_F)` of
/// the derivative involved.
pub const FINITENESS_TOL: f64 = 1e-7;

/// Trace tolerance used when checking that a family emits density matrices.
pub const DENSITY_TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FisherKind {
    Sld,
    Rld,
}

impl fmt::Display for FisherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FisherKind::Sld => "sld",
            FisherKind::Rld => "rld",
        })
    }
}

/// A Fisher-information result. An infinite value is carried as
/// `finite = false` with `value = f64::INFINITY` and never enters arithmetic
/// silently; `support_residual` is the norm of the finiteness condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherValue {
    pub value: f64,
    pub finite: bool,
    pub support_residual: f64,
}

impl FisherValue {
    pub fn finite(value: f64, support_residual: f64) -> Self {
        Self { value: value.max(0.0), finite: true, support_residual }
    }

    pub fn infinite(support_residual: f64) -> Self {
        Self { value: f64::INFINITY, finite: false, support_residual }
    }

    pub fn zero() -> Self {
        Self::finite(0.0, 0.0)
    }

    /// The value if finite.
    pub fn get(&self) -> Option<f64> {
        self.finite.then_some(self.value)
    }

    fn from_parts(value: f64, residual: f64, tol: f64) -> Self {
        if residual <= tol {
            Self::finite(value, residual)
        } else {
            Self::infinite(residual)
        }
    }
}

impl fmt::Display for FisherValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.finite {
            write!(f, "{}", self.value)
        } else {
            f.write_str("inf")
        }
    }
}

/// A `D×D` weight matrix: PSD with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(CMatrix);

impl WeightMatrix {
    pub fn new(w: CMatrix) -> Result<Self> {
        let d = w.nrows();
        if d == 0 || w.ncols() != d {
            return Err(Error::InvalidWeight(format!("weight must be square, got {}x{}", w.nrows(), w.ncols())));
        }
        let spec = hermitian_eig(&w).map_err(|e| Error::InvalidWeight(e.to_string()))?;
        if spec.min_eigenvalue() < -1e-12 {
            return Err(Error::InvalidWeight(format!("negative eigenvalue {:.3e}", spec.min_eigenvalue())));
        }
        let tr = trace(&w);
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidWeight(format!("trace {} is not 1", tr.re)));
        }
        Ok(Self(hermitian_part(&w)))
    }

    /// Weight from real row-major entries.
    pub fn from_real(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::InvalidWeight(format!("need {} entries, got {}", d * d, entries.len())));
        }
        Self::new(CMatrix::from_fn(d, d, |i, j| C64::new(entries[i * d + j], 0.0)))
    }

    /// `|j⟩⟨j|`, which selects a single parameter.
    pub fn pinning(d: usize, j: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::InvalidWeight(format!("index {j} out of range for dimension {d}")));
        }
        let mut w = CMatrix::zeros(d, d);
        w[(j, j)] = C64::new(1.0, 0.0);
        Ok(Self(w))
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidWeight("dimension must be positive".into()));
        }
        Ok(Self(identity(d).unscale(d as f64)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// A multiparameter Fisher matrix.
///
/// `matrix` is the reported Hermitian matrix; `raw` keeps the unsymmetrized
/// entries. When `finite` is false both are restricted to the support of the
/// state and must not be used as Fisher values.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub matrix: CMatrix,
    pub raw: CMatrix,
    pub finite: bool,
    pub support_residual: f64,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn real(&self) -> RMatrix {
        self.matrix.map(|z| z.re)
    }

    /// `Re Tr[W F]`, or `None` when the matrix is not finite.
    pub fn weighted_trace(&self, w: &WeightMatrix) -> Option<f64> {
        self.finite.then(|| trace(&(w.matrix() * &self.matrix)).re)
    }

    /// `Re Tr[W F⁻¹]`, or `None` when the matrix is infinite or singular.
    pub fn weighted_inverse_trace(&self, w: &WeightMatrix) -> Option<f64> {
        if !self.finite {
            return None;
        }
        let spec = eig_unchecked(&self.matrix);
        if spec.min_eigenvalue() <= 1e-12 * spec.max_eigenvalue().max(1e-300) {
            return None;
        }
        let inv = spec.map(|x| 1.0 / x);
        Some(trace(&(w.matrix() * inv)).re)
    }
}

fn finiteness_tol(scale: f64) -> f64 {
    FINITENESS_TOL * scale.max(1.0)
}

/// `Σ_{p(x)>cutoff} (∂p(x))² / p(x)` for parameter `index`.
pub fn classical_fisher(dist: &DistributionFamily, theta: &ParamPoint, index: usize) -> Result<FisherValue> {
    let m = classical_fisher_matrix_with(dist, theta, &[index])?;
    Ok(if m.finite { FisherValue::finite(m.matrix[(0, 0)].re, m.support_residual) } else { FisherValue::infinite(m.support_residual) })
}

/// Classical Fisher matrix `Σ_x ∂_j p ∂_k p / p`.
pub fn classical_fisher_matrix(dist: &DistributionFamily, theta: &ParamPoint) -> Result<FisherMatrix> {
    let all: Vec<usize> = (0..dist.num_params()).collect();
    classical_fisher_matrix_with(dist, theta, &all)
}

fn classical_fisher_matrix_with(dist: &DistributionFamily, theta: &ParamPoint, indices: &[usize]) -> Result<FisherMatrix> {
    let p = dist.probabilities(theta)?;
    for (index, &value) in p.iter().enumerate() {
        if value < -1e-12 {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
    }
    let dp: Vec<Vec<f64>> = indices.iter().map(|&j| dist.derivative(theta, j)).collect::<Result<_>>()?;
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let cutoff = DEFAULT_SUPPORT_TOL * pmax;
    let d = indices.len();
    let mut f = RMatrix::zeros(d, d);
    let mut residual = 0.0_f64;
    for (x, &px) in p.iter().enumerate() {
        if px > cutoff {
            for j in 0..d {
                for k in 0..d {
                    f[(j, k)] += dp[j][x] * dp[k][x] / px;
                }
            }
        } else {
            for row in &dp {
                residual = residual.max(row[x].abs());
            }
        }
    }
    let scale = dp.iter().flatten().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let finite = residual <= finiteness_tol(scale);
    let matrix = f.map(|x| C64::new(x, 0.0));
    Ok(FisherMatrix { raw: matrix.clone(), matrix, finite, support_residual: residual })
}

/// `⟨ψ_j|A|ψ_k⟩` in the eigenbasis of a spectrum.
fn in_eigenbasis(spec: &Spectrum, a: &CMatrix) -> CMatrix {
    spec.eigenvectors.adjoint() * a * &spec.eigenvectors
}

fn support_cutoff(spec: &Spectrum) -> f64 {
    DEFAULT_SUPPORT_TOL * spec.max_eigenvalue().max(0.0)
}

/// Frobenius norm of `Π⊥ A Π⊥` computed in the eigenbasis.
fn kernel_block_norm(spec: &Spectrum, a_eig: &CMatrix) -> f64 {
    let cutoff = support_cutoff(spec);
    let kernel: Vec<usize> = (0..spec.dim()).filter(|&j| spec.eigenvalues[j] <= cutoff).collect();
    let mut s = 0.0;
    for &j in &kernel {
        for &k in &kernel {
            s += a_eig[(j, k)].norm_sqr();
        }
    }
    s.sqrt()
}

fn spectrum_of_state(rho: &CMatrix) -> Result<Spectrum> {
    hermitian_eig(rho)
}

fn check_derivative_shape(rho: &CMatrix, drho: &CMatrix) -> Result<()> {
    if drho.shape() != rho.shape() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, derivative is {}x{}",
            rho.nrows(),
            rho.ncols(),
            drho.nrows(),
            drho.ncols()
        )));
    }
    Ok(())
}

/// SLD Fisher information from the spectral sum
/// `2 Σ_{λ_j+λ_k>cutoff} |⟨ψ_j|∂ρ|ψ_k⟩|² / (λ_j+λ_k)`.
pub fn sld_fisher_parts(rho: &CMatrix, drho: &CMatrix) -> Result<FisherValue> {
    check_derivative_shape(rho, drho)?;
    let spec = spectrum_of_state(rho)?;
    Ok(sld_from_spectrum(&spec, drho))
}

pub(crate) fn sld_from_spectrum(spec: &Spectrum, drho: &CMatrix) -> FisherValue {
    let a = in_eigenbasis(spec, &hermitian_part(drho));
    let cutoff = support_cutoff(spec);
    let n = spec.dim();
    let mut sum = 0.0;
    for j in 0..n {
        for k in 0..n {
            let s = spec.eigenvalues[j] + spec.eigenvalues[k];
            if s > cutoff {
                sum += a[(j, k)].norm_sqr() / s;
            }
        }
    }
    let residual = kernel_block_norm(spec, &a);
    FisherValue::from_parts(2.0 * sum, residual, finiteness_tol(a.norm()))
}

/// SLD Fisher information from the basis-independent form
/// `2 ⟨Γ|(∂ρ⊗I)(ρ⊗I + I⊗ρᵀ)⁺(∂ρ⊗I)|Γ⟩`.
pub fn sld_fisher_vectorized(rho: &CMatrix, drho: &CMatrix) -> Result<FisherValue> {
    check_derivative_shape(rho, drho)?;
    let d = rho.nrows();
    let id = identity(d);
    let k = kron(rho, &id) + kron(&id, &rho.transpose());
    let gamma = crate::linalg::max_entangled_vector(d)?;
    let v = kron(&hermitian_part(drho), &id) * gamma;
    let pinv = support_pinv_from_spectrum(hermitian_eig(&hermitian_part(&k))?, DEFAULT_SUPPORT_TOL)?;
    let value = (v.adjoint() * &pinv.pinv * &v)[(0, 0)].re;
    let residual = (&pinv.kernel_projector * &v).norm();
    Ok(FisherValue::from_parts(2.0 * value, residual, finiteness_tol(drho.norm())))
}

/// SLD operator `L = 2 Σ ⟨ψ_j|∂ρ|ψ_k⟩/(λ_j+λ_k) |ψ_j⟩⟨ψ_k|` on the support.
pub fn sld_operator(rho: &CMatrix, drho: &CMatrix) -> Result<CMatrix> {
    check_derivative_shape(rho, drho)?;
    let spec = spectrum_of_state(rho)?;
    Ok(sld_operator_from_spectrum(&spec, drho))
}

pub(crate) fn sld_operator_from_spectrum(spec: &Spectrum, drho: &CMatrix) -> CMatrix {
    let a = in_eigenbasis(spec, &hermitian_part(drho));
    let cutoff = support_cutoff(spec);
    let n = spec.dim();
    let l = CMatrix::from_fn(n, n, |j, k| {
        let s = spec.eigenvalues[j] + spec.eigenvalues[k];
        if s > cutoff {
            a[(j, k)] * (2.0 / s)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    &spec.eigenvectors * l * spec.eigenvectors.adjoint()
}

/// RLD Fisher information `Tr[∂ρ ρ⁺ ∂ρ]`, finite iff `∂ρ Π⊥ = 0`.
pub fn rld_fisher_parts(rho: &CMatrix, drho: &CMatrix) -> Result<FisherValue> {
    check_derivative_shape(rho, drho)?;
    let pinv = support_pinv_from_spectrum(spectrum_of_state(rho)?, DEFAULT_SUPPORT_TOL)?;
    let d = hermitian_part(drho);
    let value = trace(&(&d * &pinv.pinv * &d)).re;
    let residual = (&d * &pinv.kernel_projector).norm();
    Ok(FisherValue::from_parts(value, residual, finiteness_tol(d.norm())))
}

/// Fisher information from `(ρ, ∂ρ)` for either kind.
pub fn fisher_parts(rho: &CMatrix, drho: &CMatrix, kind: FisherKind) -> Result<FisherValue> {
    match kind {
        FisherKind::Sld => sld_fisher_parts(rho, drho),
        FisherKind::Rld => rld_fisher_parts(rho, drho),
    }
}

fn state_and_derivative(family: &StateFamily, theta: &ParamPoint, index: usize) -> Result<(CMatrix, CMatrix)> {
    let rho = family.value(theta)?;
    check_density(&rho, DENSITY_TRACE_TOL)?;
    Ok((rho, derivative(family, theta, index)?))
}

fn single_parameter(family: &StateFamily) -> Result<()> {
    if family.num_params() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a single-parameter family, got {} parameters",
            family.num_params()
        )));
    }
    Ok(())
}

pub fn sld_fisher(family: &StateFamily, theta: &ParamPoint) -> Result<FisherValue> {
    single_parameter(family)?;
    let (rho, d) = state_and_derivative(family, theta, 0)?;
    sld_fisher_parts(&rho, &d)
}

pub fn rld_fisher(family: &StateFamily, theta: &ParamPoint) -> Result<FisherValue> {
    single_parameter(family)?;
    let (rho, d) = state_and_derivative(family, theta, 0)?;
    rld_fisher_parts(&rho, &d)
}

pub fn fisher(family: &StateFamily, theta: &ParamPoint, kind: FisherKind) -> Result<FisherValue> {
    match kind {
        FisherKind::Sld => sld_fisher(family, theta),
        FisherKind::Rld => rld_fisher(family, theta),
    }
}

/// Fisher information of `(1−ε)ρ_θ + ε I/d`.
pub fn smoothed_fisher(family: &StateFamily, theta: &ParamPoint, eps: f64, kind: FisherKind) -> Result<FisherValue> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("smoothing parameter {eps} not in (0, 1)")));
    }
    single_parameter(family)?;
    let (rho, d) = state_and_derivative(family, theta, 0)?;
    let dim = rho.nrows();
    let smoothed = rho.scale(1.0 - eps) + identity(dim).scale(eps / dim as f64);
    fisher_parts(&smoothed, &d.scale(1.0 - eps), kind)
}

/// `√2 |Tr[X ∂ρ]|` for a witness satisfying `Tr[(XX†+X†X)ρ] ≤ 1`.
///
/// Every feasible witness gives a lower bound on `√I_F`.
pub fn root_sld_witness(family: &StateFamily, theta: &ParamPoint, x: &CMatrix) -> Result<f64> {
    single_parameter(family)?;
    let (rho, d) = state_and_derivative(family, theta, 0)?;
    root_sld_witness_parts(&rho, &d, x)
}

pub fn root_sld_witness_parts(rho: &CMatrix, drho: &CMatrix, x: &CMatrix) -> Result<f64> {
    check_derivative_shape(rho, drho)?;
    check_derivative_shape(rho, x)?;
    let constraint = trace(&((x * x.adjoint() + x.adjoint() * x) * rho)).re;
    if constraint > 1.0 + 1e-10 {
        return Err(Error::InfeasibleWitness { constraint });
    }
    Ok(std::f64::consts::SQRT_2 * trace(&(x * drho)).norm())
}

/// The witness `L/√(2 I_F)` that attains `√I_F`; zero when `I_F = 0`.
pub fn optimal_root_sld_witness(rho: &CMatrix, drho: &CMatrix) -> Result<CMatrix> {
    let l = sld_operator(rho, drho)?;
    let value = sld_fisher_parts(rho, drho)?;
    let i = value.get().ok_or(Error::SupportViolation { residual: value.support_residual })?;
    if i <= 0.0 {
        return Ok(CMatrix::zeros(rho.nrows(), rho.ncols()));
    }
    Ok(l.unscale((2.0 * i).sqrt()))
}

/// The three terms of the cq decomposition `I(total) = I(p) + Σ_x p(x) I(ρ^x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqDecomposition {
    pub total: FisherValue,
    pub classical: FisherValue,
    pub average: FisherValue,
}

/// Block-diagonal cq family `Σ_x p_θ(x) |x⟩⟨x| ⊗ ρ^x_θ`.
pub fn cq_state_family(p: &DistributionFamily, conditionals: &[StateFamily]) -> Result<StateFamily> {
    if conditionals.is_empty() || p.len() != conditionals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes but {} conditional families",
            p.len(),
            conditionals.len()
        )));
    }
    let d = conditionals[0].dim();
    let n = p.num_params();
    if conditionals.iter().any(|c| c.dim() != d || c.num_params() != n) {
        return Err(Error::DimensionMismatch("conditional families must share dimension and parameters".into()));
    }
    let k = conditionals.len();
    let (p1, c1) = (p.clone(), conditionals.to_vec());
    let (p2, c2) = (p.clone(), conditionals.to_vec());
    let place = move |blocks: Vec<CMatrix>| {
        let mut out = CMatrix::zeros(k * d, k * d);
        for (x, b) in blocks.iter().enumerate() {
            out.view_mut((x * d, x * d), (d, d)).copy_from(b);
        }
        out
    };
    let place2 = place;
    Ok(StateFamily::new(k * d, n, move |t| {
        let probs = p1.probabilities(t)?;
        Ok(place(c1.iter().zip(&probs).map(|(c, &px)| Ok(c.value(t)?.scale(px))).collect::<Result<_>>()?))
    })
    .with_derivative(move |t, j| {
        let probs = p2.probabilities(t)?;
        let dprobs = p2.derivative(t, j)?;
        let blocks = c2
            .iter()
            .zip(probs.iter().zip(&dprobs))
            .map(|(c, (&px, &dpx))| Ok(c.value(t)?.scale(dpx) + derivative(c, t, j)?.scale(px)))
            .collect::<Result<_>>()?;
        Ok(place2(blocks))
    }))
}

pub fn cq_fisher_decomposition(
    p: &DistributionFamily,
    conditionals: &[StateFamily],
    theta: &ParamPoint,
    kind: FisherKind,
) -> Result<CqDecomposition> {
    if conditionals.is_empty() || p.len() != conditionals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outcomes but {} conditional families",
            p.len(),
            conditionals.len()
        )));
    }
    let classical = classical_fisher(p, theta, 0)?;
    let probs = p.probabilities(theta)?;
    let mut avg = 0.0;
    let mut avg_finite = true;
    let mut residual = 0.0_f64;
    for (c, &px) in conditionals.iter().zip(&probs) {
        if px <= 0.0 {
            continue;
        }
        let v = fisher(c, theta, kind)?;
        residual = residual.max(v.support_residual);
        match v.get() {
            Some(x) => avg += px * x,
            None => avg_finite = false,
        }
    }
    let average = if avg_finite { FisherValue::finite(avg, residual) } else { FisherValue::infinite(residual) };
    let total = match (classical.get(), average.get()) {
        (Some(a), Some(b)) => FisherValue::finite(a + b, classical.support_residual.max(residual)),
        _ => FisherValue::infinite(classical.support_residual.max(residual)),
    };
    Ok(CqDecomposition { total, classical, average })
}

fn state_and_gradient(family: &StateFamily, theta: &ParamPoint) -> Result<(CMatrix, Vec<CMatrix>)> {
    let rho = family.value(theta)?;
    check_density(&rho, DENSITY_TRACE_TOL)?;
    Ok((rho, gradient(family, theta)?))
}

/// RLD Fisher matrix `J_jk = Tr[∂_jρ ρ⁺ ∂_kρ]`.
pub fn rld_matrix(family: &StateFamily, theta: &ParamPoint) -> Result<FisherMatrix> {
    let (rho, grads) = state_and_gradient(family, theta)?;
    rld_matrix_parts(&rho, &grads)
}

pub fn rld_matrix_parts(rho: &CMatrix, grads: &[CMatrix]) -> Result<FisherMatrix> {
    for g in grads {
        check_derivative_shape(rho, g)?;
    }
    let pinv = support_pinv_from_spectrum(spectrum_of_state(rho)?, DEFAULT_SUPPORT_TOL)?;
    let grads: Vec<CMatrix> = grads.iter().map(hermitian_part).collect();
    let d = grads.len();
    let raw = CMatrix::from_fn(d, d, |j, k| trace(&(&grads[j] * &pinv.pinv * &grads[k])));
    // diagonal finiteness for every j implies finiteness of every entry
    let mut finite = true;
    let mut residual = 0.0_f64;
    for g in &grads {
        let r = (g * &pinv.kernel_projector).norm();
        finite &= r <= finiteness_tol(g.norm());
        residual = residual.max(r);
    }
    Ok(FisherMatrix { matrix: hermitian_part(&raw), raw, finite, support_residual: residual })
}

/// RLD Fisher value `Σ_jk ⟨k|W|j⟩ Tr[∂_jρ ρ⁺ ∂_kρ]`, finite iff
/// `(Σ_jk ⟨k|W|j⟩ ∂_kρ ∂_jρ) Π⊥ = 0`.
pub fn rld_value(family: &StateFamily, theta: &ParamPoint, w: &WeightMatrix) -> Result<FisherValue> {
    let (rho, grads) = state_and_gradient(family, theta)?;
    rld_value_parts(&rho, &grads, w)
}

pub fn rld_value_parts(rho: &CMatrix, grads: &[CMatrix], w: &WeightMatrix) -> Result<FisherValue> {
    if w.dim() != grads.len() {
        return Err(Error::InvalidWeight(format!(
            "weight is {0}x{0} but the family has {1} parameters",
            w.dim(),
            grads.len()
        )));
    }
    for g in grads {
        check_derivative_shape(rho, g)?;
    }
    let pinv = support_pinv_from_spectrum(spectrum_of_state(rho)?, DEFAULT_SUPPORT_TOL)?;
    let grads: Vec<CMatrix> = grads.iter().map(hermitian_part).collect();
    let n = rho.nrows();
    let wm = w.matrix();
    let mut value = C64::new(0.0, 0.0);
    let mut cond = CMatrix::zeros(n, n);
    for (j, gj) in grads.iter().enumerate() {
        for (k, gk) in grads.iter().enumerate() {
            let wkj = wm[(k, j)];
            if wkj == C64::new(0.0, 0.0) {
                continue;
            }
            value += wkj * trace(&(gj * &pinv.pinv * gk));
            cond += (gk * gj) * wkj;
        }
    }
    let residual = (&cond * &pinv.kernel_projector).norm();
    Ok(FisherValue::from_parts(value.re, residual, finiteness_tol(cond.norm())))
}

/// SLD Fisher matrix with entries `Re Tr[ρ L_j L_k]`, the symmetrization of
/// `Tr[ρ L_j L_k]` and `Tr[ρ L_k L_j]`; the unsymmetrized values are kept in
/// `raw`.
pub fn sld_matrix(family: &StateFamily, theta: &ParamPoint) -> Result<FisherMatrix> {
    let (rho, grads) = state_and_gradient(family, theta)?;
    sld_matrix_parts(&rho, &grads)
}

pub fn sld_matrix_parts(rho: &CMatrix, grads: &[CMatrix]) -> Result<FisherMatrix> {
    for g in grads {
        check_derivative_shape(rho, g)?;
    }
    let spec = spectrum_of_state(rho)?;
    let ls: Vec<CMatrix> = grads.iter().map(|g| sld_operator_from_spectrum(&spec, g)).collect();
    let d = grads.len();
    let raw = CMatrix::from_fn(d, d, |j, k| trace(&(rho * &ls[j] * &ls[k])));
    let matrix = raw.map(|z| C64::new(z.re, 0.0));
    let mut finite = true;
    let mut residual = 0.0_f64;
    for g in grads {
        let v = sld_from_spectrum(&spec, g);
        finite &= v.finite;
        residual = residual.max(v.support_residual);
    }
    Ok(FisherMatrix { matrix, raw, finite, support_residual: residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    fn linear_qubit() -> StateFamily {
        StateFamily::new(2, 1, |t| Ok(diag(&[t.get(0), 1.0 - t.get(0)])))
            .with_derivative(|_, _| Ok(diag(&[1.0, -1.0])))
            .with_bounds(vec![(0.0, 1.0)])
    }

    fn pure_rotation() -> StateFamily {
        let ket = |t: f64| crate::linalg::CVector::from_vec(vec![C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]);
        StateFamily::new(2, 1, move |t| Ok(crate::linalg::outer(&ket(t.get(0)))))
    }

    #[test]
    fn bernoulli_classical_fisher() {
        let v = classical_fisher(&DistributionFamily::bernoulli(), &ParamPoint::scalar(0.5), 0).unwrap();
        assert!((v.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn classical_support_violation_is_infinite() {
        let dist = DistributionFamily::new(2, 1, |t| Ok(vec![1.0, 0.0 * t.get(0)])).with_derivative(|_, _| Ok(vec![0.0, 1.0]));
        let v = classical_fisher(&dist, &ParamPoint::scalar(0.3), 0).unwrap();
        assert!(!v.finite);
        assert_eq!(v.to_string(), "inf");
    }

    #[test]
    fn negative_probability_rejected() {
        let dist = DistributionFamily::constant(vec![1.5, -0.5], 1);
        assert!(matches!(
            classical_fisher(&dist, &ParamPoint::scalar(0.3), 0),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
    }

    #[test]
    fn diagonal_family_sld_and_rld() {
        let t = ParamPoint::scalar(0.25);
        let s = sld_fisher(&linear_qubit(), &t).unwrap();
        let r = rld_fisher(&linear_qubit(), &t).unwrap();
        assert!((s.value - 16.0 / 3.0).abs() < 1e-12);
        assert!((r.value - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pure_family_has_sld_four_and_infinite_rld() {
        for &t in &[0.1, 0.7, 1.3] {
            let th = ParamPoint::scalar(t);
            let s = sld_fisher(&pure_rotation(), &th).unwrap();
            assert!((s.value - 4.0).abs() < 1e-8, "{}", s.value);
            assert!(!rld_fisher(&pure_rotation(), &th).unwrap().finite);
        }
    }

    #[test]
    fn spectral_and_vectorized_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..=4 {
            let a = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut rho = &a * a.adjoint();
            rho /= trace(&rho);
            let h = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let drho = hermitian_part(&(&h - identity(d) * (trace(&h) / C64::new(d as f64, 0.0))));
            let a = sld_fisher_parts(&rho, &drho).unwrap().value;
            let b = sld_fisher_vectorized(&rho, &drho).unwrap().value;
            assert!((a - b).abs() < 1e-8 * a.max(1.0));
        }
    }

    #[test]
    fn sld_finiteness_detects_kernel_block() {
        let rho = diag(&[1.0, 0.0]);
        let v = sld_fisher_parts(&rho, &diag(&[-1.0, 1.0])).unwrap();
        assert!(!v.finite);
        assert!((v.support_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_witness_attains_root_fisher() {
        let fam = linear_qubit();
        let t = ParamPoint::scalar(0.3);
        let rho = fam.value(&t).unwrap();
        let d = derivative(&fam, &t, 0).unwrap();
        let x = optimal_root_sld_witness(&rho, &d).unwrap();
        let w = root_sld_witness(&fam, &t, &x).unwrap();
        let i = sld_fisher(&fam, &t).unwrap().value;
        assert!((w - i.sqrt()).abs() < 1e-8);
        assert_eq!(root_sld_witness(&fam, &t, &CMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(
            root_sld_witness(&fam, &t, &identity(2)),
            Err(Error::InfeasibleWitness { .. })
        ));
    }

    #[test]
    fn smoothing_rejects_bad_eps_and_diverges_for_pure_rld() {
        let t = ParamPoint::scalar(0.4);
        assert!(smoothed_fisher(&linear_qubit(), &t, 0.0, FisherKind::Sld).is_err());
        let v = smoothed_fisher(&pure_rotation(), &t, 1e-7, FisherKind::Rld).unwrap();
        assert!(v.finite && v.value > 1e6);
    }

    #[test]
    fn unitary_family_sld_uses_variance() {
        // e^{-iθH}|+⟩ has SLD Fisher 4 Var(H) = 4 for H = σ_Z.
        let z = diag(&[1.0, -1.0]);
        let plus = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        let fam = StateFamily::new(2, 1, move |t| {
            let u = unitary_exp(&z, t.get(0));
            Ok(&u * &plus * u.adjoint())
        });
        let v = sld_fisher(&fam, &ParamPoint::scalar(0.2)).unwrap();
        assert!((v.value - 4.0).abs() < 1e-8);
    }

    #[test]
    fn weight_matrix_validation() {
        assert!(WeightMatrix::from_real(2, &[0.25, 0.25, 0.25, 0.75]).is_ok());
        assert!(WeightMatrix::from_real(2, &[0.5, 0.0, 0.0, 0.6]).is_err());
        assert!(WeightMatrix::from_real(2, &[1.5, 0.0, 0.0, -0.5]).is_err());
    }
}
