use mpqc::harness::stats::marginal_distances;
use mpqc::harness::{
    assert_coalition_blind, run_real_coalition_world, run_simulated_client_world, stats::Marginal, Coalition,
    CoalitionRun,
};
use mpqc::mbqc::{reference_execute, BrickworkGraph, MeasurementPattern};
use mpqc::parties::ClientScript;
use mpqc::quantum::{Octant, Outcome, PureState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type World = fn(
    &Coalition,
    &PureState,
    &MeasurementPattern,
    usize,
    &mut ChaCha20Rng,
) -> Result<CoalitionRun, mpqc::harness::HarnessError>;

const WORLDS: [(&str, World); 2] = [
    ("real", run_real_coalition_world::<ChaCha20Rng>),
    ("simulated", run_simulated_client_world::<ChaCha20Rng>),
];

fn random_inputs(n: usize, rng: &mut ChaCha20Rng) -> PureState {
    let mut s = PureState::empty();
    for _ in 0..n {
        let amps = (0..2)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        s = s.tensor(&PureState::normalized(amps).unwrap()).unwrap();
    }
    s
}

#[test]
fn both_worlds_deliver_the_ideal_output() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for (n, cols, members) in [(2, 2, vec![1]), (2, 5, vec![2]), (4, 2, vec![1, 3])] {
        let pattern = MeasurementPattern::random(BrickworkGraph::build(n, cols).unwrap(), &mut rng);
        let inputs = random_inputs(n, &mut rng)
            .tensor(&PureState::plus(Octant::new(1)))
            .unwrap();
        let expected = reference_execute(&pattern, &inputs, &mut rng).unwrap();
        let coalition = Coalition::new(members, n).unwrap();
        for (name, world) in WORLDS {
            let run = world(&coalition, &inputs, &pattern, 2, &mut rng).unwrap();
            let f = run.output.expect("honest coalition").fidelity(&expected).unwrap();
            assert!(f > 1.0 - 1e-9, "{name} {n}x{cols}: {f}");
            assert!(!run.view.aborted);
            assert_coalition_blind(&run.transcript, &coalition, pattern.graph()).unwrap();
            assert_eq!(run.view.deltas.len(), pattern.graph().q(), "{name}");
            assert_eq!(run.view.keys.len(), coalition.members().len(), "{name}");
        }
    }
}

#[test]
fn copies_off_by_pi_always_abort() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let pattern = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let inputs = PureState::zero(2).unwrap();
    let liar = ClientScript {
        copy_offset: Octant::PI,
        ..ClientScript::default()
    };
    let coalition = Coalition::new([1], 2).unwrap().with_script(1, liar).unwrap();
    for (name, world) in WORLDS {
        for _ in 0..20 {
            let run = world(&coalition, &inputs, &pattern, 3, &mut rng).unwrap();
            assert!(run.view.aborted && run.output.is_none(), "{name}");
            assert_eq!(run.view.verdicts, vec![(2, 1, false)], "{name}");
            assert!(run.view.deltas.is_empty());
        }
    }
}

#[test]
fn eighth_turn_lies_are_caught_equally_often() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let pattern = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let inputs = PureState::zero(2).unwrap();
    let liar = ClientScript {
        copy_offset: Octant::new(1),
        ..ClientScript::default()
    };
    let coalition = Coalition::new([2], 2).unwrap().with_script(2, liar).unwrap();
    let target = (std::f64::consts::PI / 8.0).sin().powi(2);
    for (name, world) in WORLDS {
        let runs = 3_000;
        let aborted = (0..runs)
            .filter(|_| world(&coalition, &inputs, &pattern, 2, &mut rng).unwrap().view.aborted)
            .count();
        let rate = aborted as f64 / runs as f64;
        assert!((rate - target).abs() < 0.025, "{name}: {rate}");
    }
}

#[test]
fn a_chosen_mask_moves_the_angle_by_pi_in_both_worlds() {
    let pattern = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut ChaCha20Rng::seed_from_u64(4));
    let inputs = PureState::zero(2).unwrap();
    let first = pattern.flow().order()[0];
    for (name, world) in WORLDS {
        for seed in 0..20 {
            let mut deltas = Vec::new();
            for r in Outcome::both() {
                let script = ClientScript {
                    r_override: [(first, r)].into(),
                    ..ClientScript::default()
                };
                let coalition = Coalition::new([1], 2).unwrap().with_script(1, script).unwrap();
                let run = world(&coalition, &inputs, &pattern, 2, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
                deltas.push(run.view.deltas[0].1);
            }
            assert_eq!(deltas[1] - deltas[0], Octant::PI, "{name} seed {seed}");
        }
    }
}

#[test]
fn views_agree_between_worlds() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let pattern = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let inputs = random_inputs(2, &mut rng);
    let coalition = Coalition::new([1], 2).unwrap();
    let sample = |world: World, rng: &mut ChaCha20Rng| -> Vec<CoalitionRun> {
        (0..3_000)
            .map(|_| world(&coalition, &inputs, &pattern, 2, rng).unwrap())
            .collect()
    };
    let real = sample(WORLDS[0].1, &mut rng);
    let sim = sample(WORLDS[1].1, &mut rng);
    let marginals = vec![
        Marginal::new("delta_1", |r: &CoalitionRun| r.view.deltas[0].1.value() as u64),
        Marginal::new("delta_2", |r: &CoalitionRun| r.view.deltas[1].1.value() as u64),
        Marginal::new("b", |r: &CoalitionRun| {
            (r.view.b[0].1.value() + 2 * r.view.b[1].1.value()) as u64
        }),
        Marginal::new("t", |r: &CoalitionRun| {
            r.view
                .t
                .iter()
                .fold(0, |acc, (_, t)| acc * 2 + t.iter().next().unwrap().1.value() as u64)
        }),
        Marginal::new("keys", |r: &CoalitionRun| {
            let (_, sx, sz) = r.view.keys[0];
            (sx.value() + 2 * sz.value()) as u64
        }),
    ];
    for (name, d) in marginal_distances(&marginals, &real, &sim) {
        assert!(d < 0.04, "{name}: {d}");
    }
}
