//! Parallel vs sequential timings for the three fan-out hot paths: witness
//! envelope construction, Monte-Carlo refits, and batch entanglement
//! potentials. The parallel and sequential variants produce identical
//! results; these benches quantify what the `parallel` feature buys.

use criterion::{criterion_group, criterion_main, Criterion};
use std::f64::consts::PI;
use std::hint::black_box;

use phonon_sim::dynamics::iterate;
use phonon_sim::fock::{thermal_distribution, PhononDistribution, TruncationPolicy};
use phonon_sim::metrics::{
    entanglement_potentials, entanglement_potentials_seq, QngEnvelope, QngSearchConfig,
};
use phonon_sim::tomography::{
    default_probe_times, monte_carlo_uncertainty, monte_carlo_uncertainty_seq,
    simulate_measurement, synthesize_rabi, DecayModel,
};
use phonon_sim::StepParams;

fn envelope_build(c: &mut Criterion) {
    // A reduced grid keeps one build in the millisecond range; the full
    // 200x200 default scales the same way.
    let cfg = QngSearchConfig {
        d_points: 80,
        r_points: 80,
        slope_points: 20,
        ..QngSearchConfig::default()
    };
    let mut group = c.benchmark_group("qng_envelope_level2");
    group.bench_function("parallel", |b| {
        b.iter(|| QngEnvelope::build(black_box(2), &cfg).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| QngEnvelope::build_seq(black_box(2), &cfg).unwrap())
    });
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let model = DecayModel::default();
    let times = default_probe_times(&model, 120, 3.0);
    let truth = thermal_distribution(1.19, 7)
        .unwrap()
        .renormalize()
        .unwrap();
    let clean = synthesize_rabi(&truth, &model, &times).unwrap();
    let noisy = simulate_measurement(&clean, 7).unwrap();
    let mut group = c.benchmark_group("mc_uncertainty_32_resamples");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| monte_carlo_uncertainty(black_box(&noisy), &model, 7, 32, 13).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| monte_carlo_uncertainty_seq(black_box(&noisy), &model, 7, 32, 13).unwrap())
    });
    group.finish();
}

fn batch_entanglement(c: &mut Criterion) {
    // The accumulation trajectory is the natural batch workload: one EP per
    // stored state.
    let d0 = thermal_distribution(1.19, 33).unwrap();
    let params = StepParams::new(0.9 * PI, 0.97, 0.17).unwrap();
    let states: Vec<PhononDistribution> = iterate(&d0, &params, 20, &TruncationPolicy::default())
        .unwrap()
        .states;
    let mut group = c.benchmark_group("entanglement_potentials_k0_to_20");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| entanglement_potentials(black_box(&states)).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| entanglement_potentials_seq(black_box(&states)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, envelope_build, monte_carlo, batch_entanglement);
criterion_main!(benches);
