use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qfisher::families::{derivative, gradient};
use qfisher::fisher_channel::{rld_fisher_channel, sld_fisher_channel, ProbeConfig, TraceConvention};
use qfisher::fisher_state::{rld_fisher_parts, sld_fisher_parts, sld_fisher_vectorized};
use qfisher::gadc::{example_weight, gadc_channel, gadc_point, gadc_sld_objective_min, GadcParam, GadcParams};
use qfisher::random::random_state_family;
use qfisher::sdp::{build, export_sdpa, SdpInput, SdpKind};
use qfisher::ParamPoint;

fn state_fisher(c: &mut Criterion) {
    let mut group = c.benchmark_group("state_fisher");
    for d in [2, 4, 8, 16] {
        let fam = random_state_family(d, &mut ChaCha8Rng::seed_from_u64(1));
        let t = ParamPoint::scalar(0.4);
        let rho = fam.state(&t).unwrap();
        let drho = derivative(&fam, &t, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("sld_eigen", d), &d, |b, _| {
            b.iter(|| sld_fisher_parts(black_box(&rho), black_box(&drho)).unwrap())
        });
        if d <= 8 {
            group.bench_with_input(BenchmarkId::new("sld_vectorized", d), &d, |b, _| {
                b.iter(|| sld_fisher_vectorized(black_box(&rho), black_box(&drho)).unwrap())
            });
        }
        group.bench_with_input(BenchmarkId::new("rld", d), &d, |b, _| {
            b.iter(|| rld_fisher_parts(black_box(&rho), black_box(&drho)).unwrap())
        });
    }
    group.finish();
}

fn gadc_channel_fisher(c: &mut Criterion) {
    let base = GadcParams::new(0.3, 0.2, 0.0).unwrap();
    let free = [GadcParam::Loss];
    let chan = gadc_channel(base, &free).unwrap();
    let t = gadc_point(&base, &free);
    c.bench_function("gadc_rld_channel", |b| {
        b.iter(|| rld_fisher_channel(black_box(&chan), &t, TraceConvention::Output).unwrap())
    });
    let cfg = ProbeConfig { restarts: 2, ..ProbeConfig::default() };
    c.bench_function("gadc_sld_probe_search", |b| b.iter(|| sld_fisher_channel(black_box(&chan), &t, &cfg).unwrap()));
    let w = example_weight();
    c.bench_function("gadc_two_param_sld_objective", |b| {
        b.iter(|| gadc_sld_objective_min(black_box(&base), &w).unwrap())
    });
}

fn sdp_export(c: &mut Criterion) {
    let base = GadcParams::new(0.3, 0.2, 0.0).unwrap();
    let free = [GadcParam::Loss, GadcParam::Noise];
    let chan = gadc_channel(base, &free).unwrap();
    let t = gadc_point(&base, &free);
    let input = SdpInput::Channel {
        choi: chan.choi(&t).unwrap(),
        grads: gradient(&chan, &t).unwrap(),
        dims: (2, 2),
        conv: TraceConvention::Output,
        weight: Some(example_weight()),
    };
    c.bench_function("sdp_build_export_rld_value_channel", |b| {
        b.iter(|| export_sdpa(&build(SdpKind::RldValueChannel, black_box(&input)).unwrap()))
    });
}

criterion_group!(benches, state_fisher, gadc_channel_fisher, sdp_export);
criterion_main!(benches);
