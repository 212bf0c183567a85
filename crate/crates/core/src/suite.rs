//! Seeded randomized property suites behind `qfisher verify`.
//!
//! Every check returns a margin that is nonnegative exactly when the property
//! holds at its stated tolerance. Trials run in parallel; each trial draws
//! from its own ChaCha stream, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{crb, heisenberg_verdict, BoundKind, Verdict};
use crate::error::{Error, Result};
use crate::families::{
    apply_choi, apply_kraus, choi_from_kraus, derivative, finite_difference, ChannelFamily, DistributionFamily,
    ParamPoint, StateFamily,
};
use crate::fisher_channel::{
    cq_channel_fisher, inequality_gap, rld_fisher_channel, rld_reduced_operator, rld_value_channel,
    rld_weighted_channel, sld_fisher_channel, GapInput, InequalityKind, ProbeConfig, TraceConvention,
};
use crate::fisher_state::{
    cq_fisher_decomposition, cq_state_family, fisher, optimal_root_sld_witness, rld_fisher, rld_fisher_parts,
    rld_matrix, rld_value, rld_value_parts, root_sld_witness_parts, sld_fisher, sld_fisher_parts,
    sld_fisher_vectorized, sld_matrix, smoothed_fisher, FisherKind, FisherValue, WeightMatrix,
};
use crate::format::sig;
use crate::linalg::{
    hermitian_eig, hermitian_part, identity, kron, max_abs, max_eigenvalue, max_entangled_vector, operator_norm,
    partial_trace, realify, support_pinv, trace, unitary_exp, CMatrix, Subsystem, DEFAULT_SUPPORT_TOL,
};
use crate::random::{
    ginibre, random_channel_family, random_density, random_distribution_family, random_fixed_channel,
    random_hermitian, random_kraus, random_pure_state, random_state_family,
};
use crate::sdp::{
    build, export_sdpa, formula_value, kkt_dual_candidate, parse_sdpa, schur_primal_candidate, seesaw_sld_channel,
    verify_candidate, SdpInput, SdpKind,
};

type Check = fn(&mut ChaCha8Rng) -> Result<f64>;

/// A named randomized property.
#[derive(Clone, Copy)]
pub struct Suite {
    pub name: &'static str,
    pub property: &'static str,
    pub trials: usize,
    check: Check,
}

impl std::fmt::Debug for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Suite").field("name", &self.name).field("trials", &self.trials).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub property: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Smallest margin over all trials; negative when some trial failed.
    pub worst_margin: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn point(rng: &mut ChaCha8Rng) -> ParamPoint {
    ParamPoint::scalar(rng.random_range(-1.5..1.5))
}

fn finite(v: FisherValue, what: &str) -> Result<f64> {
    v.get().ok_or_else(|| Error::Vacuous(format!("{what} is infinite")))
}

fn close(a: f64, b: f64, tol: f64) -> f64 {
    tol * a.abs().max(b.abs()).max(1.0) - (a - b).abs()
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        -1.0
    }
}

fn min_all(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::INFINITY, f64::min)
}

/// Probe search settings used inside suites: fewer restarts than the
/// default, which only makes the SLD channel values smaller lower bounds.
fn suite_probe() -> ProbeConfig {
    ProbeConfig { restarts: 3, max_sweeps: 150, step_tol: 1e-6, ..ProbeConfig::default() }
}

fn faithfulness(rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = rng.random_range(2..=4);
    let rho = random_density(d, rng);
    let fam = StateFamily::constant(rho.clone(), 1);
    let t = point(rng);
    let zero = CMatrix::zeros(d, d);
    let chan = random_fixed_channel(2, d, 1, rng)?;
    let values = [
        sld_fisher(&fam, &t)?,
        rld_fisher(&fam, &t)?,
        sld_fisher_vectorized(&rho, &zero)?,
        rld_fisher_parts(&rho, &zero)?,
        smoothed_fisher(&fam, &t, 1e-3, FisherKind::Sld)?,
        rld_fisher_channel(&chan, &t, TraceConvention::Output)?,
        rld_fisher_channel(&chan, &t, TraceConvention::Reference)?,
    ];
    Ok(min_all(values.iter().map(|v| if v.finite { -v.value.abs() } else { f64::NEG_INFINITY })))
}

fn sld_le_rld(rng: &mut ChaCha8Rng) -> Result<f64> {
    let fam = random_state_family(rng.random_range(2..=3), rng);
    let t = point(rng);
    let sld = finite(sld_fisher(&fam, &t)?, "SLD")?;
    let rld = finite(rld_fisher(&fam, &t)?, "RLD")?;
    Ok(rld - sld + 1e-9)
}

fn sld_two_paths(rng: &mut ChaCha8Rng) -> Result<f64> {
    let fam = random_state_family(rng.random_range(2..=4), rng);
    let t = point(rng);
    let rho = fam.state(&t)?;
    let d = derivative(&fam, &t, 0)?;
    let a = finite(sld_fisher_parts(&rho, &d)?, "spectral SLD")?;
    let b = finite(sld_fisher_vectorized(&rho, &d)?, "vectorized SLD")?;
    Ok(close(a, b, 1e-8))
}

fn data_processing(rng: &mut ChaCha8Rng) -> Result<f64> {
    let d_in = rng.random_range(2..=3);
    let fam = random_state_family(d_in, rng);
    let chan = random_fixed_channel(d_in, rng.random_range(2..=3), 1, rng)?;
    let out = chan.apply_to_family(&fam, 1)?;
    let t = point(rng);
    let mut margin = f64::INFINITY;
    for kind in [FisherKind::Sld, FisherKind::Rld] {
        let before = finite(fisher(&fam, &t, kind)?, "input Fisher")?;
        let after = finite(fisher(&out, &t, kind)?, "output Fisher")?;
        margin = margin.min(before - after + 1e-9);
    }
    Ok(margin)
}

fn additivity(rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = random_state_family(2, rng);
    let b = random_state_family(rng.random_range(2..=3), rng);
    let ab = a.tensor(&b)?;
    let t = point(rng);
    let mut margin = f64::INFINITY;
    for kind in [FisherKind::Sld, FisherKind::Rld] {
        let joint = finite(fisher(&ab, &t, kind)?, "joint Fisher")?;
        let sum = finite(fisher(&a, &t, kind)?, "factor Fisher")? + finite(fisher(&b, &t, kind)?, "factor Fisher")?;
        margin = margin.min(1e-8 - (joint - sum).abs());
    }
    Ok(margin)
}

fn cq_decomposition(rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = rng.random_range(2..=3);
    let letters: Vec<StateFamily> = (0..k).map(|_| random_state_family(2, rng)).collect();
    let p = random_distribution_family(k, rng);
    let direct_family = cq_state_family(&p, &letters)?;
    let t = point(rng);
    let mut margin = f64::INFINITY;
    for kind in [FisherKind::Sld, FisherKind::Rld] {
        let split = finite(cq_fisher_decomposition(&p, &letters, &t, kind)?.total, "decomposed Fisher")?;
        let direct = finite(fisher(&direct_family, &t, kind)?, "block-state Fisher")?;
        margin = margin.min(1e-8 - (split - direct).abs());
    }
    Ok(margin)
}

fn convexity(rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = rng.random_range(2..=3);
    let d = rng.random_range(2..=3);
    let fams: Vec<StateFamily> = (0..k).map(|_| random_state_family(d, rng)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let mix = StateFamily::mixture(&fams, &w)?;
    let t = point(rng);
    let mut margin = f64::INFINITY;
    for kind in [FisherKind::Sld, FisherKind::Rld] {
        let mut avg = 0.0;
        for (f, wx) in fams.iter().zip(&w) {
            avg += wx * finite(fisher(f, &t, kind)?, "component Fisher")?;
        }
        let mixed = finite(fisher(&mix, &t, kind)?, "mixture Fisher")?;
        margin = margin.min(avg - mixed + 1e-9);
    }
    Ok(margin)
}

fn random_weight(d: usize, rng: &mut ChaCha8Rng) -> Result<WeightMatrix> {
    let g = ginibre(d, d, rng);
    let w = &g * g.adjoint();
    let tr = trace(&w).re;
    WeightMatrix::new(hermitian_part(&w.unscale(tr)))
}

/// Two-parameter family `(1 − s) ρ₀ + s U₁(θ₁) U₂(θ₂) σ U₂† U₁†` with
/// finite-difference derivatives.
fn two_parameter_family(d: usize, rng: &mut ChaCha8Rng) -> StateFamily {
    let rho0 = random_density(d, rng);
    let sigma = random_density(d, rng);
    let h1 = random_hermitian(d, rng).scale(2.0);
    let h2 = random_hermitian(d, rng).scale(2.0);
    let s: f64 = rng.random_range(0.2..0.8);
    StateFamily::new(d, 2, move |t| {
        let u = unitary_exp(&h1, t.get(0)) * unitary_exp(&h2, t.get(1));
        Ok(hermitian_part(&(rho0.scale(1.0 - s) + (&u * &sigma * u.adjoint()).scale(s))))
    })
}

fn rld_matrix_consistency(rng: &mut ChaCha8Rng) -> Result<f64> {
    let fam = two_parameter_family(rng.random_range(2..=3), rng);
    let t = ParamPoint::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])?;
    let w = random_weight(2, rng)?;
    let m = rld_matrix(&fam, &t)?;
    let psd = hermitian_eig(&m.matrix)?.min_eigenvalue() + 1e-10 * m.matrix.norm().max(1.0);
    let value = finite(rld_value(&fam, &t, &w)?, "RLD value")?;
    let contracted = m.weighted_trace(&w).ok_or(Error::Vacuous("RLD matrix".into()))?;
    let scalar = match m.weighted_inverse_trace(&w) {
        Some(inv) => inv - 1.0 / value + 1e-9,
        None => f64::INFINITY,
    };
    // Equality case: block-diagonal matrix and a pinning weight commute.
    let prod = random_state_family(2, rng).product(&random_state_family(2, rng));
    let pm = rld_matrix(&prod, &t)?;
    let pin = WeightMatrix::pinning(2, rng.random_range(0..2))?;
    let pv = finite(rld_value(&prod, &t, &pin)?, "pinned RLD value")?;
    let eq = match pm.weighted_inverse_trace(&pin) {
        Some(inv) => close(inv, 1.0 / pv, 1e-9),
        None => -1.0,
    };
    Ok(min_all([psd, close(value, contracted, 1e-10), scalar, eq]))
}

fn classical_reduction(rng: &mut ChaCha8Rng) -> Result<f64> {
    let theta: f64 = rng.random_range(0.05..0.95);
    let fam = StateFamily::diagonal(DistributionFamily::bernoulli());
    let t = ParamPoint::scalar(theta);
    let exact = 1.0 / (theta * (1.0 - theta));
    let sld = finite(sld_fisher(&fam, &t)?, "SLD")?;
    let rld = finite(rld_fisher(&fam, &t)?, "RLD")?;
    let a: f64 = rng.random_range(0.05..0.45);
    let b: f64 = rng.random_range(0.05..0.45);
    let multi = StateFamily::diagonal(
        DistributionFamily::new(3, 2, |t| Ok(vec![t.get(0), t.get(1), 1.0 - t.get(0) - t.get(1)]))
            .with_derivative(|_, j| Ok(if j == 0 { vec![1.0, 0.0, -1.0] } else { vec![0.0, 1.0, -1.0] })),
    );
    let tm = ParamPoint::new(vec![a, b])?;
    let c = 1.0 - a - b;
    let oracle = [[1.0 / a + 1.0 / c, 1.0 / c], [1.0 / c, 1.0 / b + 1.0 / c]];
    let mut margin = min_all([close(sld, exact, 1e-10), close(rld, exact, 1e-10)]);
    for m in [sld_matrix(&multi, &tm)?, rld_matrix(&multi, &tm)?] {
        for j in 0..2 {
            for k in 0..2 {
                margin = margin.min(close(m.matrix[(j, k)].re, oracle[j][k], 1e-10) - m.matrix[(j, k)].im.abs());
            }
        }
    }
    Ok(margin)
}

fn smoothing(rng: &mut ChaCha8Rng) -> Result<f64> {
    let fam = random_state_family(rng.random_range(2..=3), rng);
    let t = point(rng);
    let mut margin = f64::INFINITY;
    for kind in [FisherKind::Sld, FisherKind::Rld] {
        let exact = finite(fisher(&fam, &t, kind)?, "Fisher")?;
        let errs: Vec<f64> = (2..=6)
            .map(|k| Ok((finite(smoothed_fisher(&fam, &t, 10f64.powi(-k), kind)?, "smoothed")? - exact).abs()))
            .collect::<Result<_>>()?;
        // First-order convergence: each decade shrinks the error about tenfold.
        for w in errs.windows(2) {
            margin = margin.min(0.2 * w[0] + 1e-10 - w[1]);
        }
    }
    Ok(margin)
}

fn root_sld_witness(rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = rng.random_range(2..=3);
    let fam = random_state_family(d, rng);
    let t = point(rng);
    let rho = fam.state(&t)?;
    let drho = derivative(&fam, &t, 0)?;
    let root = finite(sld_fisher_parts(&rho, &drho)?, "SLD")?.sqrt();
    let x = ginibre(d, d, rng);
    let norm = trace(&((&x * x.adjoint() + x.adjoint() * &x) * &rho)).re;
    let x = x.unscale(norm.sqrt());
    let random = root_sld_witness_parts(&rho, &drho, &x)?;
    let best = root_sld_witness_parts(&rho, &drho, &optimal_root_sld_witness(&rho, &drho)?)?;
    Ok(min_all([root + 1e-8 - random, 1e-8 - (best - root).abs()]))
}

fn gap(kind: InequalityKind, input: GapInput, rng: &mut ChaCha8Rng) -> Result<f64> {
    let t = point(rng);
    let cfg = ProbeConfig { seed: rng.random(), ..suite_probe() };
    Ok(inequality_gap(kind, &input, &t, &cfg)? + 1e-8)
}

fn chain_input(rng: &mut ChaCha8Rng) -> GapInput {
    GapInput::Chain { channel: random_channel_family(2, 2, rng), input: random_state_family(4, rng), d_ref: 2 }
}

fn serial_input(rng: &mut ChaCha8Rng) -> GapInput {
    GapInput::Serial { first: random_channel_family(2, 2, rng), second: random_channel_family(2, 2, rng) }
}

fn rld_chain(rng: &mut ChaCha8Rng) -> Result<f64> {
    let input = chain_input(rng);
    gap(InequalityKind::RldChain, input, rng)
}

fn root_sld_chain(rng: &mut ChaCha8Rng) -> Result<f64> {
    let input = chain_input(rng);
    gap(InequalityKind::RootSldChain, input, rng)
}

fn rld_serial(rng: &mut ChaCha8Rng) -> Result<f64> {
    let input = serial_input(rng);
    gap(InequalityKind::RldSerial, input, rng)
}

fn root_sld_serial(rng: &mut ChaCha8Rng) -> Result<f64> {
    let input = serial_input(rng);
    gap(InequalityKind::RootSldSerial, input, rng)
}

fn dimension_bound(rng: &mut ChaCha8Rng) -> Result<f64> {
    let channel = random_channel_family(rng.random_range(2..=3), 2, rng);
    gap(InequalityKind::DimensionBound, GapInput::Single { channel }, rng)
}

fn channel_dominates_probes(rng: &mut ChaCha8Rng) -> Result<f64> {
    let chan = random_channel_family(2, 2, rng);
    let t = point(rng);
    let ch = finite(rld_fisher_channel(&chan, &t, TraceConvention::Output)?, "channel RLD")?;
    let mut best = 0.0_f64;
    for _ in 0..20 {
        let psi = random_pure_state(4, rng);
        let out = chan.output_family(&(&psi * psi.adjoint()), 2)?;
        best = best.max(finite(rld_fisher(&out, &t)?, "probe RLD")?);
    }
    Ok(ch - best + 1e-8)
}

fn rld_value_structure(rng: &mut ChaCha8Rng) -> Result<f64> {
    let c1 = random_channel_family(2, 2, rng);
    let c2 = random_channel_family(2, 2, rng);
    let par = c1.parallel(&c2);
    let (a, b) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let t = ParamPoint::new(vec![a, b])?;
    let conv = TraceConvention::Output;
    let i1 = finite(rld_fisher_channel(&c1, &ParamPoint::scalar(a), conv)?, "first RLD")?;
    let i2 = finite(rld_fisher_channel(&c2, &ParamPoint::scalar(b), conv)?, "second RLD")?;
    let x: f64 = rng.random_range(0.05..0.95);
    let w = WeightMatrix::from_real(2, &[x, 0.0, 0.0, 1.0 - x])?;
    let value = finite(rld_value_channel(&par, &t, &w, conv)?, "RLD value")?;
    let additive = close(value, x * i1 + (1.0 - x) * i2, 1e-8);
    let mut homogeneous = 0.0_f64;
    for c in [0.25, 0.5, 2.0, 4.0] {
        let scaled = finite(rld_weighted_channel(&par, &t, &w.matrix().scale(c), conv)?, "scaled value")?;
        homogeneous = homogeneous.min(-(scaled - c * value).abs());
    }
    let pinned = finite(rld_value_channel(&par, &t, &WeightMatrix::pinning(2, 0)?, conv)?, "pinned value")?;
    let bound_multi = crb(FisherValue::finite(pinned, 0.0), 3, BoundKind::MultiScalar)?.bound;
    let bound_single = crb(FisherValue::finite(i1, 0.0), 3, BoundKind::ChannelRld)?.bound;
    Ok(min_all([additive, homogeneous, close(pinned, i1, 1e-8), close(bound_multi, bound_single, 1e-8)]))
}

fn heisenberg_consistency(rng: &mut ChaCha8Rng) -> Result<f64> {
    let chan = random_channel_family(2, rng.random_range(2..=3), rng);
    let t = point(rng);
    let mut margin = 0.0_f64;
    for conv in [TraceConvention::Output, TraceConvention::Reference] {
        let report = heisenberg_verdict(&chan, &t, None, conv)?;
        margin = margin.min(flag(report.verdict == Verdict::NoGo && report.fisher.finite));
    }
    let f1: f64 = rng.random_range(0.1..50.0);
    let f2 = f1 * rng.random_range(1.01..3.0);
    let n: u64 = rng.random_range(1..1000);
    for kind in BoundKind::ALL {
        let b = |f: f64, n: u64| crb(FisherValue::finite(f, 0.0), n, kind).map(|r| r.bound);
        let ratio = b(f1, n)? / b(f1, 2 * n)?;
        let expected = if kind == BoundKind::ChannelSldHeisenberg { 4.0 } else { 2.0 };
        margin = margin.min(flag(ratio == expected && b(f2, n)? < b(f1, n)? && b(f1, n + 1)? < b(f1, n)?));
    }
    let sld = crb(FisherValue::finite(f1, 0.0), n, BoundKind::StateSld)?.bound;
    let rld = crb(FisherValue::finite(f2, 0.0), n, BoundKind::StateRld)?.bound;
    Ok(margin.min(flag(rld <= sld)))
}

fn certify(kind: SdpKind, input: &SdpInput, module_value: f64) -> Result<f64> {
    let prob = build(kind, input)?;
    let primal = verify_candidate(&prob, &schur_primal_candidate(kind, input)?)?;
    let dual = verify_candidate(&prob, &kkt_dual_candidate(kind, input)?)?;
    let formula = formula_value(kind, input)?;
    let back = parse_sdpa(&export_sdpa(&prob))?;
    let round_trip = back.entries == prob.entries && back.objective == prob.objective && back.blocks == prob.blocks;
    Ok(min_all([
        flag(primal.feasible && dual.feasible && round_trip),
        close(primal.objective, formula, 1e-8),
        close(dual.objective, formula, 1e-8),
        close(formula, module_value, 1e-8),
    ]))
}

fn sdp_certificates(rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = rng.random_range(2..=3);
    let fam = two_parameter_family(d, rng);
    let t = ParamPoint::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])?;
    let rho = fam.state(&t)?;
    let grads = vec![derivative(&fam, &t, 0)?, derivative(&fam, &t, 1)?];
    let w = random_weight(2, rng)?;
    let one = |g: &CMatrix| SdpInput::State { rho: rho.clone(), grads: vec![g.clone()], weight: None };
    let mut margin = min_all([
        certify(SdpKind::RldState, &one(&grads[0]), finite(rld_fisher_parts(&rho, &grads[0])?, "RLD")?)?,
        certify(SdpKind::SldState, &one(&grads[0]), finite(sld_fisher_parts(&rho, &grads[0])?, "SLD")?)?,
        certify(
            SdpKind::RldValueState,
            &SdpInput::State { rho: rho.clone(), grads: grads.clone(), weight: Some(w.clone()) },
            finite(rld_value_parts(&rho, &grads, &w)?, "RLD value")?,
        )?,
    ]);
    let chan = random_channel_family(2, 2, rng);
    let tc = point(rng);
    let choi = chan.choi(&tc)?;
    let dchoi = derivative(&chan, &tc, 0)?;
    // The value program only needs Hermitian directions; a derivative taken
    // at another point serves as the second one.
    let cgrads = vec![dchoi.clone(), derivative(&chan, &point(rng), 0)?];
    for conv in [TraceConvention::Output, TraceConvention::Reference] {
        let single = finite(rld_fisher_channel(&chan, &tc, conv)?, "RLD")?;
        let input = SdpInput::Channel { choi: choi.clone(), grads: vec![dchoi.clone()], dims: (2, 2), conv, weight: None };
        margin = margin.min(certify(SdpKind::RldChannel, &input, single)?);
        let (reduced, _, _) = rld_reduced_operator(&choi, &cgrads, w.matrix(), (2, 2), conv)?;
        let value = hermitian_eig(&hermitian_part(&reduced))?.max_eigenvalue();
        let input =
            SdpInput::Channel { choi: choi.clone(), grads: cgrads.clone(), dims: (2, 2), conv, weight: Some(w.clone()) };
        margin = margin.min(certify(SdpKind::RldValueChannel, &input, value)?);
    }
    Ok(margin)
}

fn seesaw(rng: &mut ChaCha8Rng) -> Result<f64> {
    let chan = random_channel_family(2, 2, rng);
    let t = point(rng);
    let r = seesaw_sld_channel(&chan, &t, 8, rng.random())?;
    let rld = finite(rld_fisher_channel(&chan, &t, TraceConvention::Output)?, "channel RLD")?;
    let monotone = min_all(r.trace.windows(2).map(|w| w[1] - w[0]));
    Ok(min_all([monotone, rld + 1e-6 - r.value]))
}

fn cq_collapse(rng: &mut ChaCha8Rng) -> Result<f64> {
    let letters: Vec<StateFamily> = (0..2).map(|_| random_state_family(2, rng)).collect();
    let t = point(rng);
    let collapsed = finite(cq_channel_fisher(&letters, &t)?, "cq channel")?;
    let chan = ChannelFamily::classical_quantum(&letters)?.with_diagonal_covariance(true);
    let searched = finite(sld_fisher_channel(&chan, &t, &ProbeConfig::default())?.value, "probe search")?;
    Ok(close(collapsed, searched, 1e-8))
}

fn linalg_identities(rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = rng.random_range(2..=4);
    let r = rng.random_range(1..=d);
    let g = ginibre(d, r, rng);
    let m = &g * g.adjoint();
    let sp = support_pinv(&m, DEFAULT_SUPPORT_TOL)?;
    let back = support_pinv(&sp.pinv, DEFAULT_SUPPORT_TOL)?.pinv;
    let idem = 1e-9 * m.norm().max(1.0) - (&back - &m).norm();
    let a = random_density(d, rng);
    let b = random_density(rng.random_range(2..=3), rng);
    let pt = partial_trace(&kron(&a, &b), (d, b.nrows()), Subsystem::Second)?;
    let product = 1e-12 - max_abs(&(&pt - &a.scale(trace(&b).re)));
    let norms = close(operator_norm(&m), max_eigenvalue(&m), 1e-12);
    let k = ginibre(d, d, rng);
    let gamma = max_entangled_vector(d)?;
    let sandwich = (gamma.adjoint() * kron(&k, &identity(d)) * &gamma)[(0, 0)];
    let trick = (kron(&identity(d), &k) * &gamma - kron(&k.transpose(), &identity(d)) * &gamma).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let h = random_hermitian(d, rng);
    let mut eh: Vec<f64> = hermitian_eig(&h)?.eigenvalues.iter().flat_map(|&x| [x, x]).collect();
    eh.sort_by(f64::total_cmp);
    let mut er: Vec<f64> = realify(&h).symmetric_eigen().eigenvalues.iter().copied().collect();
    er.sort_by(f64::total_cmp);
    let real = 1e-10 - eh.iter().zip(&er).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(min_all([idem, product, norms, 1e-12 - (sandwich - trace(&k)).norm(), 1e-12 - trick, real]))
}

fn channel_representations(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (d_in, d_out) = (rng.random_range(2..=3), rng.random_range(2..=3));
    let kraus = random_kraus(d_in, d_out, rng.random_range(1..=d_in * d_out), rng);
    let choi = choi_from_kraus(&kraus)?;
    let d_ref = 2;
    let input = random_density(d_ref * d_in, rng);
    let a = apply_choi(&choi, (d_in, d_out), &input, d_ref)?;
    let b = apply_kraus(&kraus, &input, d_ref)?;
    let chan = random_channel_family(d_in, d_out, rng);
    let t = point(rng);
    let fd = finite_difference(&chan, &t, 0)?;
    let analytic = derivative(&chan, &t, 0)?;
    Ok(min_all([1e-10 - max_abs(&(&a - &b)), 1e-6 * (1.0 + analytic.norm()) - (&fd - &analytic).norm()]))
}

fn reduced_operator_hermitian(rng: &mut ChaCha8Rng) -> Result<f64> {
    // The reduced operator of a PSD weight is PSD in both conventions.
    let chan = random_channel_family(2, 2, rng).parallel(&random_channel_family(2, 2, rng));
    let t = ParamPoint::new(vec![rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)])?;
    let w = random_weight(2, rng)?;
    let choi = chan.choi(&t)?;
    let grads = vec![derivative(&chan, &t, 0)?, derivative(&chan, &t, 1)?];
    let mut margin = f64::INFINITY;
    for conv in [TraceConvention::Output, TraceConvention::Reference] {
        let (reduced, _, _) = rld_reduced_operator(&choi, &grads, w.matrix(), chan.dims(), conv)?;
        let spec = hermitian_eig(&hermitian_part(&reduced))?;
        margin = margin.min(spec.min_eigenvalue() + 1e-9 * spec.max_eigenvalue().max(1.0));
    }
    Ok(margin)
}

/// All suites with their trial counts.
pub fn suites() -> Vec<Suite> {
    let s = |name, property, trials, check: Check| Suite { name, property, trials, check };
    vec![
        s("faithfulness", "constant families give exactly zero", 100, faithfulness),
        s("sld_le_rld", "SLD <= RLD + 1e-9", 100, sld_le_rld),
        s("sld_two_paths", "spectral and vectorized SLD agree to 1e-8", 100, sld_two_paths),
        s("data_processing", "Fisher does not increase under channels (-1e-9)", 100, data_processing),
        s("additivity", "tensor products add to 1e-8", 100, additivity),
        s("cq_decomposition", "decomposition equals block-state Fisher to 1e-8", 100, cq_decomposition),
        s("convexity", "mixing does not increase Fisher (-1e-9)", 100, convexity),
        s("rld_matrix", "PSD, Tr[W J] = value, scalar bound, commuting equality", 100, rld_matrix_consistency),
        s("classical_reduction", "diagonal families give classical Fisher to 1e-10", 100, classical_reduction),
        s("smoothing", "smoothed Fisher converges at first order", 100, smoothing),
        s("root_sld_witness", "witnesses bounded by sqrt(I), optimum attained", 100, root_sld_witness),
        s("rld_chain", "RLD chain rule gap >= -1e-8", 100, rld_chain),
        s("root_sld_chain", "root-SLD chain rule gap >= -1e-8", 100, root_sld_chain),
        s("rld_serial", "RLD serial subadditivity gap >= -1e-8", 100, rld_serial),
        s("root_sld_serial", "root-SLD serial subadditivity gap >= -1e-8", 100, root_sld_serial),
        s("dimension_bound", "I(N(Phi)) <= I(N) <= d I(N(Phi)) (-1e-8)", 50, dimension_bound),
        s("probe_dominance", "channel RLD dominates pure-probe RLD (+1e-8)", 100, channel_dominates_probes),
        s("rld_value_channel", "additive, homogeneous, pinning-consistent", 100, rld_value_structure),
        s("reduced_operator", "weighted reduced operator is PSD", 100, reduced_operator_hermitian),
        s("heisenberg", "finite RLD means no-go; bound scalings", 100, heisenberg_consistency),
        s("sdp_certificates", "primal/dual candidates certify to 1e-8; exact round trip", 100, sdp_certificates),
        s("seesaw", "monotone iterates below channel RLD", 25, seesaw),
        s("cq_collapse", "cq channel value equals diagonal probe search to 1e-8", 100, cq_collapse),
        s("linalg", "pseudo-inverse, partial trace, transpose trick, realification", 100, linalg_identities),
        s("channel_representations", "Choi and Kraus actions agree; derivatives match", 50, channel_representations),
    ]
}

/// Runs one suite. Trial `i` uses ChaCha stream `(suite index, i)` of `seed`.
pub fn run_suite(index: usize, suite: &Suite, seed: u64) -> SuiteReport {
    let results: Vec<(f64, Option<String>)> = (0..suite.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((index as u64) << 32) | i as u64);
            match (suite.check)(&mut rng) {
                Ok(m) if m >= 0.0 => (m, None),
                Ok(m) => (m, Some(format!("trial {i}: margin {}", sig(m, 6)))),
                Err(e) => (f64::NEG_INFINITY, Some(format!("trial {i}: {e}"))),
            }
        })
        .collect();
    SuiteReport {
        name: suite.name,
        property: suite.property,
        trials: suite.trials,
        failures: results.iter().filter(|r| r.1.is_some()).count(),
        worst_margin: results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        first_failure: results.into_iter().find_map(|r| r.1),
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    suites().iter().enumerate().map(|(i, s)| run_suite(i, s, seed)).collect()
}

/// Fixed-width pass/fail table.
pub fn report_table(reports: &[SuiteReport], digits: usize) -> String {
    let mut out = format!("{:<24} {:>6} {:>8} {:>14}  {}\n", "suite", "trials", "status", "worst_margin", "property");
    for r in reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        out.push_str(&format!(
            "{:<24} {:>6} {:>8} {:>14}  {}\n",
            r.name,
            r.trials,
            status,
            sig(r.worst_margin, digits.min(6)),
            r.property
        ));
        if let Some(f) = &r.first_failure {
            out.push_str(&format!("    {f}\n"));
        }
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    out.push_str(&format!("{} suites, {} failed\n", reports.len(), failed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_are_unique_and_enough() {
        let all = suites();
        assert!(all.len() >= 10);
        let mut names: Vec<_> = all.iter().map(|s| s.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
    }

    #[test]
    fn trials_are_deterministic() {
        let all = suites();
        let a = run_suite(1, &Suite { trials: 5, ..all[1] }, 9);
        let b = run_suite(1, &Suite { trials: 5, ..all[1] }, 9);
        assert_eq!(a, b);
        assert!(a.passed());
    }
}
