use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qfisher::families::{derivative, ParamPoint};
use qfisher::fisher_channel::{rld_fisher_channel, sld_fisher_channel, ProbeConfig, TraceConvention};
use qfisher::fisher_state::{rld_fisher, sld_fisher, sld_fisher_parts, sld_fisher_vectorized};
use qfisher::gadc::{gadc_channel, gadc_closed_form, gadc_point, GadcParam, GadcParams};
use qfisher::linalg::{derealify, max_abs, max_eigenvalue, realify, trace};
use qfisher::random::{random_channel_family, random_hermitian, random_state_family};
use qfisher::sdp::{export_sdpa, parse_sdpa, seesaw_sld_channel, build, SdpInput, SdpKind};
use qfisher::suite::{report_table, run_all};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sld_never_exceeds_rld(seed in any::<u64>(), d in 2usize..4, theta in -2.0f64..2.0) {
        let fam = random_state_family(d, &mut rng(seed));
        let t = ParamPoint::scalar(theta);
        let sld = sld_fisher(&fam, &t).unwrap().get().unwrap();
        let rld = rld_fisher(&fam, &t).unwrap().get().unwrap();
        prop_assert!(sld <= rld * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn sld_routes_agree(seed in any::<u64>(), d in 2usize..5, theta in -2.0f64..2.0) {
        let fam = random_state_family(d, &mut rng(seed));
        let t = ParamPoint::scalar(theta);
        let rho = fam.state(&t).unwrap();
        let drho = derivative(&fam, &t, 0).unwrap();
        let a = sld_fisher_parts(&rho, &drho).unwrap().get().unwrap();
        let b = sld_fisher_vectorized(&rho, &drho).unwrap().get().unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn realification_preserves_spectrum_and_pairing(seed in any::<u64>(), d in 1usize..5) {
        let mut r = rng(seed);
        let h = random_hermitian(d, &mut r);
        let k = random_hermitian(d, &mut r);
        let (rh, rk) = (realify(&h), realify(&k));
        prop_assert!(max_abs(&(derealify(&rh) - &h)) < 1e-14);
        let pairing = (&rh * &rk).trace();
        prop_assert!((pairing - 2.0 * trace(&(&h * &k)).re).abs() < 1e-12);
        let top = rh.symmetric_eigen().eigenvalues.max();
        prop_assert!((top - max_eigenvalue(&h)).abs() < 1e-12);
    }

    #[test]
    fn gadc_rld_matches_closed_forms(g in 0.05f64..0.95, n in 0.05f64..0.95, phi in -1.0f64..1.0) {
        let base = GadcParams::new(g, n, phi).unwrap();
        for which in [GadcParam::Loss, GadcParam::Noise, GadcParam::Phase] {
            let chan = gadc_channel(base, &[which]).unwrap();
            let v = rld_fisher_channel(&chan, &gadc_point(&base, &[which]), TraceConvention::Reference)
                .unwrap().get().unwrap();
            let exact = gadc_closed_form(&base, which);
            prop_assert!((v - exact).abs() <= 1e-9 * exact, "{which}: {v} vs {exact}");
        }
    }

    #[test]
    fn sdpa_round_trip(g in 0.1f64..0.9, n in 0.1f64..0.9) {
        let base = GadcParams::new(g, n, 0.0).unwrap();
        let chan = gadc_channel(base, &[GadcParam::Loss]).unwrap();
        let t = gadc_point(&base, &[GadcParam::Loss]);
        let input = SdpInput::Channel {
            choi: chan.choi(&t).unwrap(),
            grads: vec![derivative(&chan, &t, 0).unwrap()],
            dims: (2, 2),
            conv: TraceConvention::Output,
            weight: None,
        };
        let prob = build(SdpKind::RldChannel, &input).unwrap();
        let text = export_sdpa(&prob);
        let back = parse_sdpa(&text).unwrap();
        prop_assert_eq!(export_sdpa(&back), text);
    }
}

#[test]
fn seesaw_reaches_gadc_value_at_half_noise() {
    let base = GadcParams::new(0.2, 0.5, 0.0).unwrap();
    let chan = gadc_channel(base, &[GadcParam::Loss]).unwrap();
    let t = gadc_point(&base, &[GadcParam::Loss]);
    let exact = gadc_closed_form(&base, GadcParam::Loss);
    let res = seesaw_sld_channel(&chan, &t, 200, 3).unwrap();
    assert!(res.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(res.value <= exact * (1.0 + 1e-9));
    assert!((exact - res.value) / exact < 1e-3, "{} vs {exact}", res.value);
}

#[test]
fn seesaw_agrees_with_probe_search_on_qubit_channels() {
    for seed in 0..4 {
        let chan = random_channel_family(2, 2, &mut rng(seed));
        let t = ParamPoint::scalar(0.3);
        let search = sld_fisher_channel(&chan, &t, &ProbeConfig::default()).unwrap().value.get().unwrap();
        let seesaw = seesaw_sld_channel(&chan, &t, 300, seed).unwrap().value;
        let rld = rld_fisher_channel(&chan, &t, TraceConvention::Output).unwrap().get().unwrap();
        assert!(seesaw <= rld * (1.0 + 1e-9) && search <= rld * (1.0 + 1e-9));
        assert!((seesaw - search).abs() <= 1e-4 * search.max(1.0), "seed {seed}: {seesaw} vs {search}");
    }
}

#[test]
fn all_suites_pass_for_several_seeds() {
    for seed in [1, 42] {
        let reports = run_all(seed);
        let table = report_table(&reports, 6);
        assert!(reports.iter().all(|r| r.passed()), "seed {seed}\n{table}");
    }
}
