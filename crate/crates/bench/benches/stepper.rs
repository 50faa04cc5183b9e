use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use bzlm_core::{edge_site, integrate, make_disc_mask, stimulate, Compass, IntegratorConfig, OregonatorParams, PhiSchedule, SimState};

const STEPS: u64 = 20;

fn stepper(c: &mut Criterion) {
    let params = OregonatorParams::default();
    let cfg = IntegratorConfig::default();
    let schedule = PhiSchedule::constant(params.phi);
    let mut group = c.benchmark_group("integrate");
    group.sample_size(20);
    for radius in [50, 185] {
        let mask = make_disc_mask(radius).unwrap();
        let site = edge_site(&mask, Compass::NE).unwrap();
        // A wave in flight, so the kinetics are not trivially at rest.
        let start = stimulate(SimState::quiescent(&mask, &params).unwrap(), &site, &mask).unwrap();
        let start = integrate(start, &params, &cfg, &mask, &schedule, 500, &mut []).unwrap();
        group.throughput(Throughput::Elements(mask.domain_count() as u64 * STEPS));
        group.bench_with_input(BenchmarkId::new("disc", radius), &start, |b, s| {
            b.iter(|| integrate(s.clone(), &params, &cfg, &mask, &schedule, STEPS, &mut []).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stepper);
criterion_main!(benches);
