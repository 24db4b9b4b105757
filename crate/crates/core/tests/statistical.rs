//! Distributional checks of the engines against closed forms and the oracle.

use spatial_rumor::experiments::{
    compare_with_oracle, estimate_extinction_time, estimate_survival, sweep_phase_diagram, wilson_interval,
    EngineKind, InitialCondition, SurvivalOptions, Z95,
};
use spatial_rumor::harris::Mark;
use spatial_rumor::{
    ArrivalStream, Boundary, Configuration, EventEngine, GeneratorMatrix, Lattice, Params, StepOutcome,
};

#[test]
fn spread_arrivals_are_poisson() {
    let lattice = Lattice::ring(3).unwrap();
    let params = Params::new(2.0, 0.5).unwrap();
    let n = 10_000;
    let total: usize = (0..n)
        .map(|seed| {
            let s = ArrivalStream::generate(lattice, params, 100.0, seed).unwrap();
            s.count(|m| matches!(m, Mark::Spread { src: 0, dst: 1 }))
        })
        .sum();
    let mean = total as f64 / n as f64;
    // count ~ Poisson(λ T = 200); sd of the mean is sqrt(200 / n)
    let sd = (200.0 / n as f64).sqrt();
    assert!((mean - 200.0).abs() < 3.0 * sd, "mean {mean}");
}

#[test]
fn pure_death_extinction_time_is_harmonic() {
    let lattice = Lattice::new(1, 11, Boundary::FrozenIgnorant).unwrap();
    let k = 5;
    let eta0 = Configuration::with_spreaders(lattice, &[1, 3, 5, 7, 9]).unwrap();
    let summary = estimate_extinction_time(
        &Params::new(0.0, 0.0).unwrap(),
        lattice,
        &InitialCondition::Fixed(eta0),
        20_000,
        17,
        1e6,
    )
    .unwrap();
    // maximum of k independent Exp(1) lifetimes
    let h_k: f64 = (1..=k).map(|i| 1.0 / i as f64).sum();
    assert_eq!(summary.censored, 0);
    assert!((summary.mean - h_k).abs() < 4.0 * summary.std_err, "{} vs {h_k}", summary.mean);
}

#[test]
fn lone_spreader_dies_after_exp1() {
    let lattice = Lattice::ring(5).unwrap();
    let s = estimate_extinction_time(
        &Params::new(0.0, 0.0).unwrap(),
        lattice,
        &InitialCondition::SingleCenter,
        10_000,
        4,
        1e6,
    )
    .unwrap();
    assert!((s.mean - 1.0).abs() < 3.0 * s.std_err, "{}", s.mean);
    assert!((s.median - std::f64::consts::LN_2).abs() < 0.05, "{}", s.median);
}

#[test]
fn survival_does_not_grow_with_alpha() {
    let alphas = [0.0, 0.5, 2.0, 5.0, 20.0];
    let grid = sweep_phase_diagram(
        &[3.0],
        &alphas,
        Lattice::ring(100).unwrap(),
        &InitialCondition::SingleCenter,
        50.0,
        400,
        31,
        SurvivalOptions::default(),
    )
    .unwrap();
    for j in 1..alphas.len() {
        let (prev, next) = (grid.cell(0, j - 1), grid.cell(0, j));
        let width = next.ci_hi - next.ci_lo;
        assert!(next.p_hat - prev.p_hat <= width, "α={}: {} -> {}", alphas[j], prev.p_hat, next.p_hat);
    }
    assert!(grid.cell(0, 0).p_hat > grid.cell(0, alphas.len() - 1).p_hat);
}

#[test]
fn frozen_box_matches_oracle() {
    let lattice = Lattice::new(1, 5, Boundary::FrozenIgnorant).unwrap();
    let params = Params::new(1.5, 2.0).unwrap();
    let gen = GeneratorMatrix::build(lattice, params).unwrap();
    let eta0 = Configuration::with_spreaders(lattice, &[2]).unwrap();
    let exact = gen.transient_distribution(&eta0, 0.8).unwrap();
    for engine in [EngineKind::Gillespie, EngineKind::Harris] {
        let c = compare_with_oracle(&gen, &exact, engine, &eta0, 0.8, 40_000, 5, 0.03).unwrap();
        assert!(c.pass, "{engine:?}: tv {}", c.tv);
    }
}

#[test]
fn engines_agree_on_survival() {
    let lattice = Lattice::ring(40).unwrap();
    let params = Params::new(2.5, 0.5).unwrap();
    let init = InitialCondition::SingleCenter;
    let run = |engine, seed| {
        let opts = SurvivalOptions { engine, ..Default::default() };
        estimate_survival(&params, lattice, &init, 10.0, 4000, seed, opts).unwrap()
    };
    let g = run(EngineKind::Gillespie, 1);
    let h = run(EngineKind::Harris, 2);
    assert!(!g.separated_from(&h), "{} vs {}", g.p_hat, h.p_hat);
}

#[test]
fn wilson_width_shrinks_like_root_n() {
    let width = |n: u64| {
        let (lo, hi) = wilson_interval(3 * n / 10, n, Z95);
        hi - lo
    };
    for n in [1_000, 10_000, 100_000] {
        let ratio = width(4 * n) / width(n);
        assert!((ratio - 0.5).abs() < 0.01, "n={n}: {ratio}");
    }
}

#[test]
fn rates_stay_consistent_past_a_rebuild() {
    let lattice = Lattice::ring(500).unwrap();
    let eta0 = Configuration::with_spreaders(lattice, &(0..500).step_by(2).collect::<Vec<_>>()).unwrap();
    let mut engine = EventEngine::new(eta0, Params::new(3.0, 0.1).unwrap(), 21);
    let target = (1u64 << 20) + 1000;
    while engine.event_count() < target {
        match engine.step().unwrap() {
            StepOutcome::Event { .. } => {}
            other => panic!("stopped early: {other:?}"),
        }
    }
    engine.check_consistency().unwrap();
}
