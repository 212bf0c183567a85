//! Semi-definite programs for Fisher quantities: construction, SDPA export
//! and import, and certification of candidate solutions.
//!
//! Problems follow the SDPA primal form
//!
//! ```text
//! minimize  Σ_i c_i x_i   subject to   Σ_i x_i F_i − F_0 ⪰ 0,
//! ```
//!
//! whose dual is `maximize Tr[F_0 Y]` subject to `Tr[F_i Y] = c_i`, `Y ⪰ 0`.
//! A complex Hermitian constraint `Σ x_i G_i − G_0 ⪰ 0` is stored through
//! the real embedding `R(A + iB) = [[A, −B], [B, A]]`, which preserves
//! positivity and satisfies `Tr[R(G) R(K)] = 2 Re Tr[G K]`. Objective
//! coefficients are `c_i = Re Tr[K E_i] = ½ Tr[R(K) R(E_i)]`, so the realified
//! objective carries the factor ½ that undoes the doubling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::families::{derivative, ChannelFamily, Differentiable, ParamPoint};
use crate::fisher_channel::{pattern_search, probe_output, probe_value, ProbeConfig, TraceConvention};
use crate::fisher_state::{optimal_root_sld_witness, sld_fisher_parts, WeightMatrix, FINITENESS_TOL};
use crate::linalg::{
    block2x2, eig_unchecked, hermitian_eig, hermitian_part, identity, kron, max_entangled_vector, partial_trace,
    realify, support_pinv_from_spectrum, trace, CMatrix, CVector, RMatrix, SupportPinv, C64, DEFAULT_SUPPORT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpKind {
    SldState,
    RldState,
    RldChannel,
    RldValueState,
    RldValueChannel,
}

impl SdpKind {
    pub const ALL: [SdpKind; 5] =
        [SdpKind::SldState, SdpKind::RldState, SdpKind::RldChannel, SdpKind::RldValueState, SdpKind::RldValueChannel];

    pub fn name(self) -> &'static str {
        match self {
            SdpKind::SldState => "sld_state",
            SdpKind::RldState => "rld_state",
            SdpKind::RldChannel => "rld_channel",
            SdpKind::RldValueState => "rld_value_state",
            SdpKind::RldValueChannel => "rld_value_channel",
        }
    }

    pub fn is_channel(self) -> bool {
        matches!(self, SdpKind::RldChannel | SdpKind::RldValueChannel)
    }
}

impl fmt::Display for SdpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SdpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SdpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown program kind '{s}'")))
    }
}

/// Data a program is built from.
#[derive(Debug, Clone)]
pub enum SdpInput {
    /// `ρ` and its partial derivatives.
    State { rho: CMatrix, grads: Vec<CMatrix>, weight: Option<WeightMatrix> },
    /// Choi operator `Γ_RB` and its partial derivatives.
    Channel {
        choi: CMatrix,
        grads: Vec<CMatrix>,
        dims: (usize, usize),
        conv: TraceConvention,
        weight: Option<WeightMatrix>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Psd,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    /// Size of the real block.
    pub size: usize,
    pub kind: BlockKind,
}

/// One nonzero upper-triangle entry `(F_mat)_{block}[i, j]`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub mat: usize,
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// How the SDPA variables map back to the program's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variable {
    /// A real scalar at the given index.
    Scalar { name: String, index: usize },
    /// A Hermitian matrix of dimension `dim` whose coordinates start at `offset`.
    Hermitian { name: String, dim: usize, offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub kind: Option<SdpKind>,
    pub num_vars: usize,
    pub blocks: Vec<Block>,
    pub objective: Vec<f64>,
    /// Sorted by `(mat, block, i, j)`; at most one entry per position.
    pub entries: Vec<Entry>,
    pub comments: Vec<String>,
    pub variables: Vec<Variable>,
}

impl SdpProblem {
    /// An empty problem with the given variable count and block structure.
    pub fn new(num_vars: usize, blocks: Vec<Block>, objective: Vec<f64>) -> Result<Self> {
        if objective.len() != num_vars {
            return Err(Error::DimensionMismatch(format!(
                "{num_vars} variables but {} objective coefficients",
                objective.len()
            )));
        }
        Ok(Self { kind: None, num_vars, blocks, objective, entries: Vec::new(), comments: Vec::new(), variables: Vec::new() })
    }

    /// Adds `value` at `(i, j)` of `F_mat` in `block`; symmetric positions
    /// are identified. Diagonal blocks accept only `i == j`.
    pub fn add_entry(&mut self, mat: usize, block: usize, i: usize, j: usize, value: f64) -> Result<()> {
        let b = self.blocks.get(block).ok_or_else(|| Error::InvalidArgument(format!("no block {block}")))?;
        let (i, j) = (i.min(j), i.max(j));
        if mat > self.num_vars || j >= b.size || (b.kind == BlockKind::Diagonal && i != j) {
            return Err(Error::InvalidArgument(format!("entry ({mat}, {block}, {i}, {j}) out of range")));
        }
        match self.entries.binary_search_by(|e| (e.mat, e.block, e.i, e.j).cmp(&(mat, block, i, j))) {
            Ok(pos) => self.entries[pos].value += value,
            Err(pos) => self.entries.insert(pos, Entry { mat, block, i, j, value }),
        }
        Ok(())
    }

    /// Dense symmetric `(F_mat)_{block}`.
    pub fn matrix(&self, mat: usize, block: usize) -> RMatrix {
        let n = self.blocks[block].size;
        let mut m = RMatrix::zeros(n, n);
        for e in self.entries.iter().filter(|e| e.mat == mat && e.block == block) {
            m[(e.i, e.j)] = e.value;
            m[(e.j, e.i)] = e.value;
        }
        m
    }

    /// `Σ_i x_i F_i − F_0` for every block.
    pub fn slack(&self, x: &[f64]) -> Result<Vec<RMatrix>> {
        if x.len() != self.num_vars {
            return Err(Error::DimensionMismatch(format!("{} variables expected, got {}", self.num_vars, x.len())));
        }
        let mut out: Vec<RMatrix> = self.blocks.iter().map(|b| RMatrix::zeros(b.size, b.size)).collect();
        for e in &self.entries {
            let coeff = if e.mat == 0 { -1.0 } else { x[e.mat - 1] };
            let m = &mut out[e.block];
            m[(e.i, e.j)] += coeff * e.value;
            if e.i != e.j {
                m[(e.j, e.i)] += coeff * e.value;
            }
        }
        Ok(out)
    }

    /// `Tr[F_mat Y]` summed over blocks.
    fn pairing(&self, mat: usize, y: &[RMatrix]) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.mat == mat)
            .map(|e| {
                let w = if e.i == e.j { 1.0 } else { 2.0 };
                w * e.value * y[e.block][(e.i, e.j)]
            })
            .sum()
    }

    /// Maximum asymmetry of the stored matrices; zero by construction.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for mat in 0..=self.num_vars {
            for b in 0..self.blocks.len() {
                let m = self.matrix(mat, b);
                worst = worst.max((&m - m.transpose()).amax());
            }
        }
        worst
    }
}

/// A constraint `Σ x_i G_i − G_0 ⪰ 0` over complex Hermitian matrices.
struct ComplexLmi {
    g0: CMatrix,
    gi: Vec<CMatrix>,
}

fn assemble(kind: SdpKind, objective: Vec<f64>, lmis: Vec<ComplexLmi>, variables: Vec<Variable>, comments: Vec<String>) -> Result<SdpProblem> {
    let m = objective.len();
    let blocks = lmis.iter().map(|l| Block { size: 2 * l.g0.nrows(), kind: BlockKind::Psd }).collect();
    let mut prob = SdpProblem::new(m, blocks, objective)?;
    let mut map: BTreeMap<(usize, usize, usize, usize), f64> = BTreeMap::new();
    for (b, lmi) in lmis.iter().enumerate() {
        for (mat, g) in std::iter::once(&lmi.g0).chain(lmi.gi.iter()).enumerate() {
            let r = realify(g);
            for i in 0..r.nrows() {
                for j in i..r.ncols() {
                    let v = r[(i, j)];
                    if v != 0.0 {
                        map.insert((mat, b, i, j), v);
                    }
                }
            }
        }
    }
    prob.entries = map.into_iter().map(|((mat, block, i, j), value)| Entry { mat, block, i, j, value }).collect();
    prob.kind = Some(kind);
    prob.variables = variables;
    prob.comments = comments;
    Ok(prob)
}

/// Hermitian basis of dimension `n`: `E_rr`, then for `r < c` the pair
/// `|r⟩⟨c| + |c⟩⟨r|` and `i|r⟩⟨c| − i|c⟩⟨r|`. Coordinates of `M` are
/// `M_rr`, `Re M_rc`, `Im M_rc`.
fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                let mut e = CMatrix::zeros(n, n);
                e[(r, r)] = C64::new(1.0, 0.0);
                out.push(e);
            } else {
                let mut re = CMatrix::zeros(n, n);
                re[(r, c)] = C64::new(1.0, 0.0);
                re[(c, r)] = C64::new(1.0, 0.0);
                let mut im = CMatrix::zeros(n, n);
                im[(r, c)] = C64::new(0.0, 1.0);
                im[(c, r)] = C64::new(0.0, -1.0);
                out.push(re);
                out.push(im);
            }
        }
    }
    out
}

fn encode_hermitian(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in r..n {
            if r == c {
                out.push(m[(r, r)].re);
            } else {
                let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                out.push(z.re);
                out.push(z.im);
            }
        }
    }
    out
}

/// Decodes a Hermitian variable from an SDPA vector.
pub fn decode_hermitian(x: &[f64], dim: usize, offset: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    let mut k = offset;
    for r in 0..dim {
        for c in r..dim {
            if r == c {
                m[(r, r)] = C64::new(x[k], 0.0);
                k += 1;
            } else {
                m[(r, c)] = C64::new(x[k], x[k + 1]);
                m[(c, r)] = C64::new(x[k], -x[k + 1]);
                k += 2;
            }
        }
    }
    m
}

/// Data of a program `min ... s.t. [[M, X†], [X, Y]] ⪰ 0`.
struct Schur {
    x: CMatrix,
    y: CMatrix,
    /// `D×D` weight; `[1]` for the single-parameter programs.
    w: CMatrix,
    n: usize,
    channel: Option<((usize, usize), TraceConvention)>,
}

impl Schur {
    fn m_dim(&self) -> usize {
        self.x.ncols()
    }

    fn params(&self) -> usize {
        self.w.nrows()
    }

    /// `Tr_conv Σ_jk W_jk M_kj` for channel programs.
    fn reduce(&self, m: &CMatrix) -> Result<CMatrix> {
        let ((d_in, d_out), conv) = self.channel.expect("channel program");
        let n = self.n;
        let mut acc = CMatrix::zeros(n, n);
        for j in 0..self.params() {
            for k in 0..self.params() {
                let wjk = self.w[(j, k)];
                if wjk != C64::new(0.0, 0.0) {
                    acc += m.view((k * n, j * n), (n, n)) * wjk;
                }
            }
        }
        partial_trace(&acc, (d_in, d_out), conv.traced())
    }

    /// Embedding adjoint to the reduced trace: `Tr[σ Tr_conv A] = Tr[emb(σ) A]`.
    fn embed(&self, sigma: &CMatrix) -> CMatrix {
        let ((d_in, d_out), conv) = self.channel.expect("channel program");
        match conv {
            TraceConvention::Output => kron(sigma, &identity(d_out)),
            TraceConvention::Reference => kron(&identity(d_in), sigma),
        }
    }

    fn support(&self) -> Result<SupportPinv> {
        support_pinv_from_spectrum(hermitian_eig(&self.y)?, DEFAULT_SUPPORT_TOL)
    }

    /// `X† Y⁺ X`, the smallest feasible `M`.
    fn schur_m(&self, sp: &SupportPinv) -> CMatrix {
        hermitian_part(&(self.x.adjoint() * &sp.pinv * &self.x))
    }

    fn objective_weight(&self) -> CMatrix {
        kron(&self.w, &identity(self.n))
    }
}

fn check_weight(weight: &Option<WeightMatrix>, d: usize, kind: SdpKind) -> Result<CMatrix> {
    let single = matches!(kind, SdpKind::RldState | SdpKind::RldChannel | SdpKind::SldState);
    match (single, weight) {
        (true, _) if d != 1 => Err(Error::InvalidArgument(format!("{kind} takes a single derivative, got {d}"))),
        (true, _) => Ok(CMatrix::from_element(1, 1, C64::new(1.0, 0.0))),
        (false, Some(w)) if w.dim() == d => Ok(w.matrix().clone()),
        (false, Some(w)) => Err(Error::InvalidWeight(format!("weight is {0}x{0}, {d} parameters given", w.dim()))),
        (false, None) => Err(Error::InvalidWeight(format!("{kind} requires a weight matrix"))),
    }
}

fn schur_data(kind: SdpKind, input: &SdpInput) -> Result<Schur> {
    let (y, grads, weight, channel) = match (kind.is_channel(), input) {
        (false, SdpInput::State { rho, grads, weight }) => (rho, grads, weight, None),
        (true, SdpInput::Channel { choi, grads, dims, conv, weight }) => (choi, grads, weight, Some((*dims, *conv))),
        _ => return Err(Error::InvalidArgument(format!("{kind} does not accept this input"))),
    };
    let n = y.nrows();
    if grads.is_empty() || grads.iter().any(|g| g.shape() != (n, n)) || y.ncols() != n {
        return Err(Error::DimensionMismatch("derivatives must match the base operator".into()));
    }
    if let Some(((d_in, d_out), _)) = channel {
        if d_in * d_out != n {
            return Err(Error::DimensionMismatch(format!("Choi operator is {n}x{n}, dims ({d_in}, {d_out})")));
        }
    }
    let w = check_weight(weight, grads.len(), kind)?;
    let mut x = CMatrix::zeros(n, n * grads.len());
    for (j, g) in grads.iter().enumerate() {
        x.view_mut((0, j * n), (n, n)).copy_from(&hermitian_part(g));
    }
    let data = Schur { x, y: hermitian_part(y), w, n, channel };
    let sp = data.support()?;
    let residual = (&sp.kernel_projector * &data.x).norm();
    if residual > FINITENESS_TOL * data.x.norm().max(1.0) {
        return Err(Error::SupportViolation { residual });
    }
    Ok(data)
}

fn sld_data(input: &SdpInput) -> Result<(CVector, CMatrix)> {
    let SdpInput::State { rho, grads, .. } = input else {
        return Err(Error::InvalidArgument("sld_state takes a state input".into()));
    };
    if grads.len() != 1 {
        return Err(Error::InvalidArgument(format!("sld_state takes a single derivative, got {}", grads.len())));
    }
    let value = sld_fisher_parts(rho, &grads[0])?;
    if !value.finite {
        return Err(Error::SupportViolation { residual: value.support_residual });
    }
    let d = rho.nrows();
    let id = identity(d);
    let k = hermitian_part(&(kron(rho, &id) + kron(&id, &rho.transpose())));
    let v = kron(&hermitian_part(&grads[0]), &id) * max_entangled_vector(d)?;
    Ok((v, k))
}

fn comment_lines(kind: SdpKind, input: &SdpInput, variables: &[Variable]) -> Vec<String> {
    let mut c = vec![
        format!("program: {kind}"),
        "form: minimize c.x subject to sum_i x_i F_i - F_0 >= 0".to_string(),
        "complex blocks realified as [[Re, -Im], [Im, Re]]; objective c_i = Re Tr[K E_i] (factor 1/2 of the realified trace)"
            .to_string(),
    ];
    if let SdpInput::Channel { conv, dims, .. } = input {
        c.push(format!("channel dims: in {} out {}; partial trace convention: {conv}", dims.0, dims.1));
    }
    for v in variables {
        c.push(match v {
            Variable::Scalar { name, index } => format!("variable {name}: x{}", index + 1),
            Variable::Hermitian { name, dim, offset } => format!(
                "variable {name}: Hermitian {dim}x{dim} in x{}..x{} (diagonal, then Re/Im pairs of the upper triangle, row-major)",
                offset + 1,
                offset + dim * dim
            ),
        });
    }
    c
}

/// Builds the named program from its input data.
///
/// Inputs violating the support condition are refused with the residual,
/// since the program would be infeasible.
pub fn build(kind: SdpKind, input: &SdpInput) -> Result<SdpProblem> {
    if kind == SdpKind::SldState {
        let (v, k) = sld_data(input)?;
        let n = v.len();
        let mut neg_g0 = CMatrix::zeros(n + 1, n + 1);
        neg_g0.view_mut((1, 0), (n, 1)).copy_from(&v);
        neg_g0.view_mut((0, 1), (1, n)).copy_from(&v.adjoint());
        neg_g0.view_mut((1, 1), (n, n)).copy_from(&k);
        let mut g_mu = CMatrix::zeros(n + 1, n + 1);
        g_mu[(0, 0)] = C64::new(1.0, 0.0);
        let variables = vec![Variable::Scalar { name: "mu".into(), index: 0 }];
        let comments = comment_lines(kind, input, &variables);
        return assemble(kind, vec![2.0], vec![ComplexLmi { g0: -neg_g0, gi: vec![g_mu] }], variables, comments);
    }
    let data = schur_data(kind, input)?;
    let md = data.m_dim();
    let ny = data.y.nrows();
    let basis = hermitian_basis(md);
    let schur_block = |e: &CMatrix| {
        let mut g = CMatrix::zeros(md + ny, md + ny);
        g.view_mut((0, 0), (md, md)).copy_from(e);
        g
    };
    let neg_g0 = block2x2(&CMatrix::zeros(md, md), &data.x.adjoint(), &data.x, &data.y);
    let (objective, lmis, variables) = if let Some((dims, conv)) = data.channel {
        let kept = conv.kept_dim(dims);
        let mut objective = vec![1.0];
        objective.extend(std::iter::repeat_n(0.0, basis.len()));
        let mut g_reduced = vec![identity(kept)];
        let mut g_schur = vec![CMatrix::zeros(md + ny, md + ny)];
        for e in &basis {
            g_reduced.push(-data.reduce(e)?);
            g_schur.push(schur_block(e));
        }
        let variables = vec![
            Variable::Scalar { name: "lambda".into(), index: 0 },
            Variable::Hermitian { name: "M".into(), dim: md, offset: 1 },
        ];
        let lmis = vec![
            ComplexLmi { g0: CMatrix::zeros(kept, kept), gi: g_reduced },
            ComplexLmi { g0: -neg_g0, gi: g_schur },
        ];
        (objective, lmis, variables)
    } else {
        let p = data.objective_weight();
        let objective = basis.iter().map(|e| trace(&(&p * e)).re).collect();
        let lmis = vec![
            ComplexLmi { g0: CMatrix::zeros(md, md), gi: basis.clone() },
            ComplexLmi { g0: -neg_g0, gi: basis.iter().map(schur_block).collect() },
        ];
        (objective, lmis, vec![Variable::Hermitian { name: "M".into(), dim: md, offset: 0 }])
    };
    let comments = comment_lines(kind, input, &variables);
    assemble(kind, objective, lmis, variables, comments)
}

/// Closed-form optimum of the program: the Fisher quantity it computes.
pub fn formula_value(kind: SdpKind, input: &SdpInput) -> Result<f64> {
    if kind == SdpKind::SldState {
        let (v, k) = sld_data(input)?;
        let sp = support_pinv_from_spectrum(hermitian_eig(&k)?, DEFAULT_SUPPORT_TOL)?;
        return Ok(2.0 * (v.adjoint() * &sp.pinv * &v)[(0, 0)].re);
    }
    let data = schur_data(kind, input)?;
    let m = data.schur_m(&data.support()?);
    if data.channel.is_some() {
        Ok(eig_unchecked(&hermitian_part(&data.reduce(&m)?)).max_eigenvalue())
    } else {
        Ok(trace(&(data.objective_weight() * m)).re)
    }
}

/// A candidate solution: an SDPA primal vector or one dual matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Primal(Vec<f64>),
    Dual(Vec<RMatrix>),
}

/// Primal candidate `M = X† Y⁺ X` (with `λ = λ_max` of the reduced operator
/// for channels; `μ = v† K⁺ v` for the SLD program).
pub fn schur_primal_candidate(kind: SdpKind, input: &SdpInput) -> Result<Candidate> {
    if kind == SdpKind::SldState {
        let (v, k) = sld_data(input)?;
        let sp = support_pinv_from_spectrum(hermitian_eig(&k)?, DEFAULT_SUPPORT_TOL)?;
        return Ok(Candidate::Primal(vec![(v.adjoint() * &sp.pinv * &v)[(0, 0)].re]));
    }
    let data = schur_data(kind, input)?;
    let m = data.schur_m(&data.support()?);
    let mut x = Vec::new();
    if data.channel.is_some() {
        x.push(eig_unchecked(&hermitian_part(&data.reduce(&m)?)).max_eigenvalue());
    }
    x.extend(encode_hermitian(&m));
    Ok(Candidate::Primal(x))
}

/// Dual block `[[P, −P X† Y⁺], [−Y⁺ X P, Y⁺ X P X† Y⁺]]`, PSD for `P ⪰ 0`.
fn schur_dual_block(p: &CMatrix, x: &CMatrix, y_pinv: &CMatrix) -> CMatrix {
    let q = -(y_pinv * x * p);
    let s = y_pinv * x * p * x.adjoint() * y_pinv;
    block2x2(p, &q.adjoint(), &q, &s)
}

fn realified_dual(yc: &CMatrix) -> RMatrix {
    realify(&hermitian_part(yc)) * 0.5
}

/// Dual candidate from the stationarity conditions of the Schur program.
///
/// States use `P = W ⊗ I` and a zero multiplier for `M ⪰ 0`. Channels use
/// `P = W ⊗ emb(σ)` with `σ` the projector onto a top eigenvector of the
/// reduced operator. The SLD program uses multiplier 2 on `μ`.
pub fn kkt_dual_candidate(kind: SdpKind, input: &SdpInput) -> Result<Candidate> {
    if kind == SdpKind::SldState {
        let (v, k) = sld_data(input)?;
        let sp = support_pinv_from_spectrum(hermitian_eig(&k)?, DEFAULT_SUPPORT_TOL)?;
        let p = CMatrix::from_element(1, 1, C64::new(2.0, 0.0));
        let x = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        return Ok(Candidate::Dual(vec![realified_dual(&schur_dual_block(&p, &x, &sp.pinv))]));
    }
    let data = schur_data(kind, input)?;
    let sp = data.support()?;
    let md = data.m_dim();
    if data.channel.is_some() {
        let reduced = hermitian_part(&data.reduce(&data.schur_m(&sp))?);
        let spec = eig_unchecked(&reduced);
        let top = spec.eigenvectors.column(spec.dim() - 1).into_owned();
        let sigma = &top * top.adjoint();
        let p = kron(&data.w, &data.embed(&sigma));
        Ok(Candidate::Dual(vec![realified_dual(&sigma), realified_dual(&schur_dual_block(&p, &data.x, &sp.pinv))]))
    } else {
        let p = data.objective_weight();
        Ok(Candidate::Dual(vec![
            RMatrix::zeros(2 * md, 2 * md),
            realified_dual(&schur_dual_block(&p, &data.x, &sp.pinv)),
        ]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Primal,
    Dual,
}

/// Feasibility and objective of a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub side: Side,
    /// Upper bound on the optimum for a feasible primal candidate, lower
    /// bound for a feasible dual candidate.
    pub objective: f64,
    /// Smallest eigenvalue of each constraint (primal) or dual block.
    pub min_eigenvalues: Vec<f64>,
    /// `max_i |Tr[F_i Y] − c_i|` for dual candidates; 0 for primal ones.
    pub equality_residual: f64,
    pub feasible: bool,
}

/// Eigenvalue floor accepted as feasible, relative to the block scale.
pub const FEASIBILITY_TOL: f64 = 1e-9;

fn min_eig_real(m: &RMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Checks a candidate against the problem.
pub fn verify_candidate(prob: &SdpProblem, cand: &Candidate) -> Result<Certificate> {
    match cand {
        Candidate::Primal(x) => {
            let slack = prob.slack(x)?;
            let min_eigenvalues: Vec<f64> = slack.iter().map(min_eig_real).collect();
            let feasible = slack
                .iter()
                .zip(&min_eigenvalues)
                .all(|(s, &e)| e >= -FEASIBILITY_TOL * s.amax().max(1.0));
            let objective = prob.objective.iter().zip(x).map(|(c, x)| c * x).sum();
            Ok(Certificate { side: Side::Primal, objective, min_eigenvalues, equality_residual: 0.0, feasible })
        }
        Candidate::Dual(y) => {
            if y.len() != prob.blocks.len() || y.iter().zip(&prob.blocks).any(|(m, b)| m.shape() != (b.size, b.size)) {
                return Err(Error::DimensionMismatch("dual candidate does not match the block structure".into()));
            }
            let min_eigenvalues: Vec<f64> = y.iter().map(min_eig_real).collect();
            let scale = y.iter().fold(1.0_f64, |a, m| a.max(m.amax()));
            let equality_residual = (1..=prob.num_vars)
                .map(|i| (prob.pairing(i, y) - prob.objective[i - 1]).abs())
                .fold(0.0, f64::max);
            let feasible = min_eigenvalues.iter().all(|&e| e >= -FEASIBILITY_TOL * scale)
                && equality_residual <= FEASIBILITY_TOL * scale;
            let objective = prob.pairing(0, y);
            Ok(Certificate { side: Side::Dual, objective, min_eigenvalues, equality_residual, feasible })
        }
    }
}

/// Two-sided bound from a primal and a dual certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub valid: bool,
}

pub fn sandwich(primal: &Certificate, dual: &Certificate) -> Sandwich {
    Sandwich {
        lower: dual.objective,
        upper: primal.objective,
        gap: primal.objective - dual.objective,
        valid: primal.side == Side::Primal && dual.side == Side::Dual && primal.feasible && dual.feasible,
    }
}

/// SDPA sparse text. Comment lines start with `"`; diagonal blocks have
/// negative sizes; entries are 1-based and sorted by `(mat, block, i, j)`.
pub fn export_sdpa(prob: &SdpProblem) -> String {
    let mut out = String::new();
    for c in &prob.comments {
        out.push_str(&format!("\"{c}\n"));
    }
    out.push_str(&format!("{}\n{}\n", prob.num_vars, prob.blocks.len()));
    let sizes: Vec<String> = prob
        .blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::Diagonal => format!("-{}", b.size),
        })
        .collect();
    out.push_str(&sizes.join(" "));
    out.push('\n');
    let obj: Vec<String> = prob.objective.iter().map(|c| format!("{c:?}")).collect();
    out.push_str(&obj.join(" "));
    out.push('\n');
    for e in &prob.entries {
        out.push_str(&format!("{} {} {} {} {:?}\n", e.mat, e.block + 1, e.i + 1, e.j + 1, e.value));
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

/// Reads SDPA sparse text; the inverse of [`export_sdpa`] up to `kind` and
/// the variable layout, which are not part of the format.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let comments = text.lines().filter_map(|l| l.strip_prefix('"')).map(str::to_string).collect();
    let tokens = |l: &str| -> Vec<String> {
        l.replace([',', '{', '}', '(', ')'], " ").split_whitespace().map(str::to_string).collect()
    };
    let mut next = |what: &str| lines.next().ok_or_else(|| parse_err(0, format!("missing {what}")));
    let (ln, l) = next("variable count")?;
    let m: usize = tokens(l).first().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(ln, "bad variable count"))?;
    let (ln, l) = next("block count")?;
    let nb: usize = tokens(l).first().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(ln, "bad block count"))?;
    let (ln, l) = next("block sizes")?;
    let sizes: Vec<i64> = tokens(l).iter().take(nb).map(|t| t.parse()).collect::<std::result::Result<_, _>>().map_err(|_| parse_err(ln, "bad block size"))?;
    if sizes.len() != nb || sizes.contains(&0) {
        return Err(parse_err(ln, "block sizes do not match the block count"));
    }
    let blocks = sizes
        .iter()
        .map(|&s| Block {
            size: s.unsigned_abs() as usize,
            kind: if s < 0 { BlockKind::Diagonal } else { BlockKind::Psd },
        })
        .collect();
    let (ln, l) = next("objective")?;
    let objective: Vec<f64> = tokens(l).iter().take(m).map(|t| t.parse()).collect::<std::result::Result<_, _>>().map_err(|_| parse_err(ln, "bad objective coefficient"))?;
    let mut prob = SdpProblem::new(m, blocks, objective).map_err(|e| parse_err(ln, e.to_string()))?;
    for (ln, l) in lines {
        let t = tokens(l);
        if t.len() < 5 {
            return Err(parse_err(ln, "entry needs five fields"));
        }
        let ints: Vec<usize> = t[..4].iter().map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| parse_err(ln, "bad entry index"))?;
        let value: f64 = t[4].parse().map_err(|_| parse_err(ln, "bad entry value"))?;
        if ints[1] == 0 || ints[2] == 0 || ints[3] == 0 {
            return Err(parse_err(ln, "indices are 1-based"));
        }
        prob.add_entry(ints[0], ints[1] - 1, ints[2] - 1, ints[3] - 1, value).map_err(|e| parse_err(ln, e.to_string()))?;
    }
    prob.comments = comments;
    Ok(prob)
}

/// `<kind>_<hash>.dat-s`, with the first 16 hex digits of the SHA-256 of the
/// exported text.
pub fn file_name(prob: &SdpProblem) -> String {
    let digest = Sha256::digest(export_sdpa(prob).as_bytes());
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    let kind = prob.kind.map_or("sdp", SdpKind::name);
    format!("{kind}_{hash}.dat-s")
}

/// Result of the alternating SLD channel optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct SeesawResult {
    /// Best SLD value found; a lower bound on the channel SLD Fisher information.
    pub value: f64,
    /// SLD value after each iteration; nondecreasing.
    pub trace: Vec<f64>,
    pub z: CMatrix,
    pub iterations: usize,
}

/// `√2 |Tr[X ∂ω]| / √Tr[(XX† + X†X) ω]` for the probe `Z`: the root-SLD
/// witness value after rescaling `X` to feasibility.
fn witness_ratio(choi: &CMatrix, dchoi: &CMatrix, d_out: usize, x: &CMatrix, g: &CMatrix, z: &CMatrix) -> f64 {
    if z.norm_squared() == 0.0 {
        return 0.0;
    }
    let (omega, domega) = probe_output(choi, dchoi, z, d_out);
    let denom = trace(&(g * &omega)).re;
    if denom <= 0.0 {
        return 0.0;
    }
    std::f64::consts::SQRT_2 * trace(&(x * &domega)).norm() / denom.sqrt()
}

/// Alternating optimization for the SLD channel Fisher information.
///
/// With the probe fixed, the optimal root-SLD witness `L/√(2I)` is computed
/// in closed form. With the witness fixed, the probe is moved by a local
/// search on the witness value, which lower-bounds `√I` of every probe and
/// equals it at the current one. The SLD value therefore never decreases.
pub fn seesaw_sld_channel(chan: &ChannelFamily, theta: &ParamPoint, iters: usize, seed: u64) -> Result<SeesawResult> {
    if chan.num_params() != 1 {
        return Err(Error::InvalidArgument("seesaw needs a single-parameter channel family".into()));
    }
    if iters == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let choi = chan.choi(theta)?;
    let dchoi = hermitian_part(&derivative(chan, theta, 0)?);
    let (d_in, d_out) = chan.dims();
    let diagonal = chan.is_diagonal_covariant();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = identity(d_in);
    for i in 0..d_in {
        for j in 0..d_in {
            if !diagonal || i == j {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = if diagonal { 0.0 } else { StandardNormal.sample(&mut rng) };
                z[(i, j)] += C64::new(re, im) * 0.1;
            }
        }
    }
    z.unscale_mut(z.norm());
    let value_of = |z: &CMatrix| {
        let v = probe_value(&choi, &dchoi, z, d_out);
        v.get().ok_or(Error::SupportViolation { residual: v.support_residual })
    };
    let mut best = value_of(&z)?;
    let mut trace_values = Vec::with_capacity(iters);
    let cfg = ProbeConfig { max_sweeps: 200, ..ProbeConfig::default() };
    let mut iterations = 0;
    for _ in 0..iters {
        iterations += 1;
        let (omega, domega) = probe_output(&choi, &dchoi, &z, d_out);
        let x = optimal_root_sld_witness(&omega, &domega)?;
        let g = &x * x.adjoint() + x.adjoint() * &x;
        let outcome = pattern_search(|zz| witness_ratio(&choi, &dchoi, d_out, &x, &g, zz), z.clone(), &cfg, diagonal);
        let candidate = value_of(&outcome.z)?;
        let improved = candidate > best * (1.0 + 1e-13);
        if improved {
            best = candidate;
            z = outcome.z;
        }
        trace_values.push(best);
        if !improved {
            break;
        }
    }
    Ok(SeesawResult { value: best, trace: trace_values, z, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadc::{example_weight, gadc_channel, gadc_point, GadcParam, GadcParams};
    use crate::families::gradient;

    fn diag(v: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    fn qubit_input() -> SdpInput {
        SdpInput::State { rho: diag(&[0.25, 0.75]), grads: vec![diag(&[1.0, -1.0])], weight: None }
    }

    fn certify(kind: SdpKind, input: &SdpInput) -> (f64, Sandwich) {
        let prob = build(kind, input).unwrap();
        let p = verify_candidate(&prob, &schur_primal_candidate(kind, input).unwrap()).unwrap();
        let d = verify_candidate(&prob, &kkt_dual_candidate(kind, input).unwrap()).unwrap();
        (formula_value(kind, input).unwrap(), sandwich(&p, &d))
    }

    #[test]
    fn toy_scalar_program_exports_six_lines() {
        let mut prob = SdpProblem::new(1, vec![Block { size: 1, kind: BlockKind::Diagonal }], vec![1.0]).unwrap();
        prob.add_entry(0, 0, 0, 0, 1.0).unwrap();
        prob.add_entry(1, 0, 0, 0, 1.0).unwrap();
        let text = export_sdpa(&prob);
        assert_eq!(text, "1\n1\n-1\n1.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n");
        assert_eq!(parse_sdpa(&text).unwrap(), prob);
        let ok = verify_candidate(&prob, &Candidate::Primal(vec![1.0])).unwrap();
        assert!(ok.feasible && ok.objective == 1.0);
        assert!(!verify_candidate(&prob, &Candidate::Primal(vec![0.5])).unwrap().feasible);
    }

    #[test]
    fn qubit_programs_certify_closed_form() {
        for kind in [SdpKind::RldState, SdpKind::SldState] {
            let (value, s) = certify(kind, &qubit_input());
            assert!((value - 16.0 / 3.0).abs() < 1e-12, "{kind}: {value}");
            assert!(s.valid, "{kind}: {s:?}");
            assert!((s.upper - value).abs() < 1e-10 && (s.lower - value).abs() < 1e-10, "{kind}: {s:?}");
        }
    }

    #[test]
    fn round_trip_and_determinism() {
        let prob = build(SdpKind::RldState, &qubit_input()).unwrap();
        let text = export_sdpa(&prob);
        let back = parse_sdpa(&text).unwrap();
        assert_eq!(back.entries, prob.entries);
        assert_eq!(back.objective, prob.objective);
        assert_eq!(back.blocks, prob.blocks);
        assert_eq!(text, export_sdpa(&build(SdpKind::RldState, &qubit_input()).unwrap()));
        assert!(file_name(&prob).starts_with("rld_state_") && file_name(&prob).ends_with(".dat-s"));
        assert_eq!(prob.max_asymmetry(), 0.0);
    }

    #[test]
    fn zero_candidate_is_infeasible() {
        let prob = build(SdpKind::RldState, &qubit_input()).unwrap();
        let c = verify_candidate(&prob, &Candidate::Primal(vec![0.0; prob.num_vars])).unwrap();
        assert!(!c.feasible);
        assert!(c.min_eigenvalues[1] < 0.0);
    }

    #[test]
    fn support_violation_refused() {
        let input = SdpInput::State { rho: diag(&[1.0, 0.0]), grads: vec![diag(&[-1.0, 1.0])], weight: None };
        assert!(matches!(build(SdpKind::RldState, &input), Err(Error::SupportViolation { .. })));
        assert!(matches!(build(SdpKind::SldState, &input), Err(Error::SupportViolation { .. })));
    }

    #[test]
    fn gadc_channel_programs_certify_both_conventions() {
        let base = GadcParams::new(0.5, 0.2, 0.0).unwrap();
        for conv in [TraceConvention::Output, TraceConvention::Reference] {
            let chan = gadc_channel(base, &[GadcParam::Loss]).unwrap();
            let t = gadc_point(&base, &[GadcParam::Loss]);
            let input = SdpInput::Channel {
                choi: chan.choi(&t).unwrap(),
                grads: gradient(&chan, &t).unwrap(),
                dims: (2, 2),
                conv,
                weight: None,
            };
            let (value, s) = certify(SdpKind::RldChannel, &input);
            let expected = if conv == TraceConvention::Output { 7.25 } else { 8.45 };
            assert!((value - expected).abs() < 1e-10);
            assert!(s.valid && s.gap.abs() < 1e-8 * value, "{conv}: {s:?}");

            let free = [GadcParam::Loss, GadcParam::Noise];
            let chan = gadc_channel(base, &free).unwrap();
            let t = gadc_point(&base, &free);
            let input = SdpInput::Channel {
                choi: chan.choi(&t).unwrap(),
                grads: gradient(&chan, &t).unwrap(),
                dims: (2, 2),
                conv,
                weight: Some(example_weight()),
            };
            let (value, s) = certify(SdpKind::RldValueChannel, &input);
            let expected = if conv == TraceConvention::Output { 4.625 } else { 5.79375 };
            assert!((value - expected).abs() < 1e-10, "{conv}: {value}");
            assert!(s.valid && s.gap.abs() < 1e-8 * value, "{conv}: {s:?}");
        }
    }

    #[test]
    fn seesaw_on_replacer_stops_after_one_iteration() {
        let fam = crate::families::StateFamily::new(2, 1, |t| Ok(diag(&[t.get(0), 1.0 - t.get(0)])))
            .with_bounds(vec![(0.0, 1.0)]);
        let chan = ChannelFamily::replacer(2, &fam);
        let r = seesaw_sld_channel(&chan, &ParamPoint::scalar(0.25), 10, 1).unwrap();
        assert!((r.value - 16.0 / 3.0).abs() < 1e-6);
        assert_eq!(r.iterations, 1);
    }
}
