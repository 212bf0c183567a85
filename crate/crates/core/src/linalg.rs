//! Dense complex linear algebra on small square matrices.
//!
//! Composite indices are always first-factor-major: for a space `A ⊗ B` the
//! basis vector `|a⟩|b⟩` sits at index `a * d_B + b`. Every Kronecker product,
//! partial trace and Choi operator in this crate follows that convention.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative eigenvalue cutoff defining the support of a PSD operator.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-10;

/// Relative tolerance on `max |M - M^†|` accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `Σ_j f(λ_j) |v_j⟩⟨v_j|`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// `max_ij |M_ij - conj(M_ji)|`.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `(M + M^†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input must be Hermitian to within `1e-12 · max |M_ij|`; the
/// decomposition is computed on the exact Hermitian part.
pub fn hermitian_eig(m: &CMatrix) -> Result<Spectrum> {
    ensure_square(m)?;
    let residual = hermitian_residual(m);
    let tolerance = HERMITIAN_TOL * max_abs(m).max(f64::MIN_POSITIVE);
    if residual > tolerance {
        return Err(Error::NotHermitian { residual, tolerance });
    }
    Ok(eig_unchecked(&hermitian_part(m)))
}

/// Eigendecomposition of the Hermitian part of `m`, without the residual check.
pub(crate) fn eig_unchecked(h: &CMatrix) -> Spectrum {
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum { eigenvalues, eigenvectors }
}

/// Pseudo-inverse of a PSD matrix taken on its support.
#[derive(Debug, Clone)]
pub struct SupportPinv {
    pub pinv: CMatrix,
    /// Projector onto the support (eigenvalues above the cutoff).
    pub projector: CMatrix,
    /// Projector onto the kernel; `projector + kernel_projector = I`.
    pub kernel_projector: CMatrix,
    pub rank: usize,
    pub spectrum: Spectrum,
}

/// Support pseudo-inverse with the eigenvalue cutoff `tol · λ_max`.
pub fn support_pinv(m: &CMatrix, tol: f64) -> Result<SupportPinv> {
    let spectrum = hermitian_eig(m)?;
    support_pinv_from_spectrum(spectrum, tol)
}

pub(crate) fn support_pinv_from_spectrum(spectrum: Spectrum, tol: f64) -> Result<SupportPinv> {
    let lmax = spectrum.max_eigenvalue().max(0.0);
    let cutoff = tol * lmax;
    let lmin = spectrum.min_eigenvalue();
    if lmin < -cutoff && lmin < 0.0 {
        return Err(Error::NotPsd { min_eigenvalue: lmin });
    }
    let in_support = |x: f64| lmax > 0.0 && x > cutoff;
    let pinv = spectrum.map(|x| if in_support(x) { 1.0 / x } else { 0.0 });
    let projector = spectrum.map(|x| if in_support(x) { 1.0 } else { 0.0 });
    let kernel_projector = spectrum.map(|x| if in_support(x) { 0.0 } else { 1.0 });
    let rank = spectrum.eigenvalues.iter().filter(|&&x| in_support(x)).count();
    Ok(SupportPinv { pinv, projector, kernel_projector, rank, spectrum })
}

/// Which tensor factor of a bipartite operator to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace over one factor of a `d_A·d_B`-dimensional operator.
///
/// `Subsystem::Second` returns the `d_A × d_A` marginal, `Subsystem::First`
/// the `d_B × d_B` one.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), traced: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    if da == 0 || db == 0 || m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of {}x{} matrix over dims ({da}, {db})",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(match traced {
        Subsystem::Second => CMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Subsystem::First => CMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    })
}

/// Unnormalized maximally entangled vector `|Γ⟩ = Σ_i |i⟩|i⟩`.
pub fn max_entangled_vector(d: usize) -> Result<CVector> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        v[i * d + i] = ONE;
    }
    Ok(v)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// `|v⟩⟨v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Largest eigenvalue of the Hermitian part; equals `‖M‖_∞` for PSD `M`.
pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eig_unchecked(&hermitian_part(m)).max_eigenvalue()
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eig_unchecked(&hermitian_part(m)).min_eigenvalue()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &CMatrix, t: f64) -> CMatrix {
    let spec = eig_unchecked(&hermitian_part(h));
    let v = &spec.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in spec.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -t * lambda);
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// Real symmetric embedding `A + iB ↦ [[A, -B], [B, A]]`.
///
/// For Hermitian `H` the image has the spectrum of `H` with every eigenvalue
/// doubled in multiplicity, and `Tr[R(H) R(K)] = 2 Re Tr[H K]`.
pub fn realify(h: &CMatrix) -> RMatrix {
    let (r, c) = h.shape();
    let mut out = RMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`realify`] on matrices of the embedded form.
pub fn derealify(m: &RMatrix) -> CMatrix {
    let r = m.nrows() / 2;
    let c = m.ncols() / 2;
    CMatrix::from_fn(r, c, |i, j| C64::new(m[(i, j)], m[(i + r, j)]))
}

/// `[[a, b], [c, d]]` assembled from four blocks.
pub fn block2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rd, cd) = d.shape();
    let mut out = CMatrix::zeros(ra + rd, ca + cd);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((0, ca), (ra, cd)).copy_from(b);
    out.view_mut((ra, 0), (rd, ca)).copy_from(c);
    out.view_mut((ra, ca), (rd, cd)).copy_from(d);
    out
}

/// Reorders the tensor factors of an operator on `⊗_k H_k`.
///
/// `perm[k]` names the input factor that becomes output factor `k`.
pub fn permute_subsystems(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total || perm.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot permute {}x{} operator over factors {dims:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut seen = vec![false; dims.len()];
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    // map output index -> input index
    let index_map: Vec<usize> = (0..total)
        .map(|out| {
            let mut digits = vec![0usize; dims.len()];
            let mut rem = out;
            for k in (0..dims.len()).rev() {
                digits[k] = rem % new_dims[k];
                rem /= new_dims[k];
            }
            let mut input_digits = vec![0usize; dims.len()];
            for (k, &p) in perm.iter().enumerate() {
                input_digits[p] = digits[k];
            }
            input_digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
        })
        .collect();
    Ok(CMatrix::from_fn(total, total, |i, j| m[(index_map[i], index_map[j])]))
}

/// Density-matrix sanity check: square, Hermitian, PSD, unit trace.
pub fn check_density(rho: &CMatrix, trace_tol: f64) -> Result<()> {
    ensure_square(rho)?;
    let scale = max_abs(rho).max(1.0);
    let residual = hermitian_residual(rho);
    if residual > 1e-9 * scale {
        return Err(Error::NotDensity(format!("Hermitian residual {residual:.3e}")));
    }
    let tr = trace(rho);
    if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
        return Err(Error::NotDensity(format!("trace {:.12} deviates from 1", tr.re)));
    }
    let lmin = min_eigenvalue(rho);
    if lmin < -1e-9 * scale {
        return Err(Error::NotDensity(format!("negative eigenvalue {lmin:.3e}")));
    }
    Ok(())
}
