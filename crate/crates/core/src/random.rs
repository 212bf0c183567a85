//! Seeded generators of random states, channels and differentiable families
//! for the property suites.
//!
//! Families are kept full rank (eigenvalues bounded away from zero) so that
//! RLD quantities stay finite and the inequalities under test are not vacuous.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::families::{ChannelFamily, DistributionFamily, StateFamily};
use crate::linalg::{hermitian_part, identity, kron, max_entangled_vector, trace, unitary_exp, CMatrix, CVector, C64};

/// Weight of the maximally mixed state in [`random_density`]; bounds the
/// smallest eigenvalue below by `FULL_RANK_MIX / d`.
pub const FULL_RANK_MIX: f64 = 0.1;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Hermitian matrix with operator norm at most 1.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, d, rng);
    let h = hermitian_part(&g);
    let norm = h.norm().max(f64::MIN_POSITIVE);
    h / C64::new(norm, 0.0)
}

/// Unit vector, uniformly distributed on the sphere.
pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Full-rank density matrix: a Ginibre state mixed with `I/d`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(d, d, rng);
    let w = &g * g.adjoint();
    let w = w.clone() / trace(&w);
    hermitian_part(&(w * C64::new(1.0 - FULL_RANK_MIX, 0.0) + identity(d) * C64::new(FULL_RANK_MIX / d as f64, 0.0)))
}

/// Kraus operators of a random channel from a Haar-like isometry
/// `d_in → rank·d_out`. `rank` is raised to `⌈d_in/d_out⌉` if needed.
pub fn random_kraus<R: Rng + ?Sized>(d_in: usize, d_out: usize, rank: usize, rng: &mut R) -> Vec<CMatrix> {
    let rank = rank.max(d_in.div_ceil(d_out));
    let g = ginibre(rank * d_out, d_in, rng);
    let q = g.qr().q();
    (0..rank).map(|k| q.rows(k * d_out, d_out).into_owned()).collect()
}

/// State family `(1 − s) ρ₀ + s U_θ σ U_θ†` with `U_θ = exp(−iθH)`, full-rank
/// `ρ₀`, `s ∈ [0.2, 0.8]` and an analytic derivative.
pub fn random_state_family<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateFamily {
    let rho0 = random_density(d, rng);
    let sigma = random_density(d, rng);
    let h = random_hermitian(d, rng) * C64::new(2.0, 0.0);
    let s: f64 = rng.random_range(0.2..0.8);
    let (h2, sigma2) = (h.clone(), sigma.clone());
    StateFamily::new(d, 1, move |t| {
        let u = unitary_exp(&h, t.get(0));
        Ok(hermitian_part(&(&rho0 * C64::new(1.0 - s, 0.0) + &u * &sigma * u.adjoint() * C64::new(s, 0.0))))
    })
    .with_derivative(move |t, _| {
        let u = unitary_exp(&h2, t.get(0));
        let rot = &u * &sigma2 * u.adjoint();
        let comm = &h2 * &rot - &rot * &h2;
        Ok(hermitian_part(&(comm * C64::new(0.0, -s))))
    })
}

/// Distribution family `softmax(a + θ b)` on `k` outcomes.
pub fn random_distribution_family<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DistributionFamily {
    let a: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let b: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let softmax = move |theta: f64, a: &[f64], b: &[f64]| -> Vec<f64> {
        let z: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + theta * b).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|e| e / s).collect()
    };
    let (a2, b2) = (a.clone(), b.clone());
    DistributionFamily::new(k, 1, move |t| Ok(softmax(t.get(0), &a, &b))).with_derivative(move |t, _| {
        let p = softmax(t.get(0), &a2, &b2);
        let mean: f64 = p.iter().zip(&b2).map(|(p, b)| p * b).sum();
        Ok(p.iter().zip(&b2).map(|(p, b)| p * (b - mean)).collect())
    })
}

/// `Σ_k (I ⊗ K_k)|Γ⟩⟨Γ|(I ⊗ L_k)†`.
fn choi_bilinear(ks: &[CMatrix], ls: &[CMatrix]) -> CMatrix {
    let d_in = ks[0].ncols();
    let gamma = max_entangled_vector(d_in).expect("d_in ≥ 1");
    let mut out = CMatrix::zeros(d_in * ks[0].nrows(), d_in * ks[0].nrows());
    for (k, l) in ks.iter().zip(ls) {
        let a = kron(&identity(d_in), k) * &gamma;
        let b = kron(&identity(d_in), l) * &gamma;
        out += &a * b.adjoint();
    }
    out
}

/// Channel family `V_θ ∘ [(1 − q_θ) N_a + q_θ N_b] ∘ U_θ` with random
/// full-Kraus-rank channels `N_a`, `N_b`, unitaries `exp(−iθH)` on input and
/// output, and `q_θ = (2 + sin θ)/4`. The Choi operator is full rank and the
/// derivative is analytic.
pub fn random_channel_family<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> ChannelFamily {
    let rank = d_in * d_out;
    let ka = random_kraus(d_in, d_out, rank, rng);
    let kb = random_kraus(d_in, d_out, rank, rng);
    let h_in = random_hermitian(d_in, rng);
    let h_out = random_hermitian(d_out, rng);
    let kraus = move |theta: f64| -> (Vec<CMatrix>, Vec<CMatrix>) {
        let u = unitary_exp(&h_in, theta);
        let v = unitary_exp(&h_out, theta);
        let q = (2.0 + theta.sin()) / 4.0;
        let dq = theta.cos() / 4.0;
        let mut ks = Vec::with_capacity(2 * rank);
        let mut dks = Vec::with_capacity(2 * rank);
        let minus_i = C64::new(0.0, -1.0);
        for (set, w, dw) in [(&ka, 1.0 - q, -dq), (&kb, q, dq)] {
            let sw = w.sqrt();
            for k in set.iter() {
                let core = &v * k * &u;
                // d/dθ of √w V K U
                let dcore = (&h_out * &core + &core * &h_in) * minus_i;
                dks.push(&dcore * C64::new(sw, 0.0) + &core * C64::new(dw / (2.0 * sw), 0.0));
                ks.push(core * C64::new(sw, 0.0));
            }
        }
        (ks, dks)
    };
    let kraus2 = kraus.clone();
    ChannelFamily::from_kraus(d_in, d_out, 1, move |t| Ok(kraus(t.get(0)).0)).with_derivative(move |t, _| {
        let (ks, dks) = kraus2(t.get(0));
        let half = choi_bilinear(&dks, &ks);
        Ok(hermitian_part(&(&half + half.adjoint())))
    })
}

/// Parameter-independent random channel with full Kraus rank.
pub fn random_fixed_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, num_params: usize, rng: &mut R) -> Result<ChannelFamily> {
    ChannelFamily::constant_kraus(random_kraus(d_in, d_out, d_in * d_out, rng), num_params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{kraus_completeness_residual, ParamPoint};
    use crate::linalg::min_eigenvalue;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn densities_are_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..5 {
            let rho = random_density(d, &mut rng);
            assert!((trace(&rho).re - 1.0).abs() < 1e-12);
            assert!(min_eigenvalue(&rho) >= FULL_RANK_MIX / d as f64 - 1e-12);
        }
    }

    #[test]
    fn kraus_sets_are_trace_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ks = random_kraus(3, 2, 6, &mut rng);
        assert!(kraus_completeness_residual(&ks) < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples = [ParamPoint::scalar(0.3), ParamPoint::scalar(-1.1)];
        let fam = random_state_family(3, &mut rng);
        let r = fam.validate(&samples);
        assert!(!r.flagged(), "{r:?}");
        let chan = random_channel_family(2, 3, &mut rng);
        let r = chan.validate(&samples);
        assert!(!r.flagged(), "{r:?}");
        assert!(min_eigenvalue(&chan.choi(&samples[0]).unwrap()) > 1e-6);
        let dist = StateFamily::diagonal(random_distribution_family(4, &mut rng));
        assert!(!dist.validate(&samples).flagged());
    }
}
