use std::collections::BTreeMap;

use mpqc::mbqc::{reference_execute, BrickworkGraph, MeasurementPattern};
use mpqc::oracle::SecretTag;
use mpqc::parties::{
    run_full_protocol, Body, ClientScript, Party, PartyError, Protocol, ProtocolConfig, ServerStrategy,
};
use mpqc::quantum::{Gate, Octant, Outcome, Pauli, PureState};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_qubit(rng: &mut ChaCha20Rng) -> PureState {
    let amps = (0..2)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    PureState::normalized(amps).unwrap()
}

fn random_inputs(n: usize, rng: &mut ChaCha20Rng) -> PureState {
    (0..n).fold(PureState::empty(), |acc, _| acc.tensor(&random_qubit(rng)).unwrap())
}

fn config(seed: u64, m: usize) -> ProtocolConfig {
    ProtocolConfig {
        seed,
        m_copies: m,
        ..Default::default()
    }
}

fn assert_close(a: &PureState, b: &PureState) {
    let f = a.fidelity(b).unwrap();
    assert!(f > 1.0 - 1e-6, "fidelity {f}");
}

#[test]
fn identity_pattern_returns_the_input() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let p = MeasurementPattern::zero(BrickworkGraph::build(2, 5).unwrap());
    for seed in 0..5 {
        let input = random_inputs(2, &mut rng);
        let run = run_full_protocol(&input, &p, &config(seed, 3)).unwrap();
        assert_close(&run.output, &input);
    }
}

#[test]
fn random_patterns_match_reference_execution() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for (wires, cols) in [(2, 2), (2, 5), (4, 2)] {
        for seed in 0..8 {
            let p = MeasurementPattern::random(BrickworkGraph::build(wires, cols).unwrap(), &mut rng);
            let input = random_inputs(wires, &mut rng);
            let expected = reference_execute(&p, &input, &mut rng).unwrap();
            let run = run_full_protocol(&input, &p, &config(seed, 2)).unwrap();
            assert_close(&run.output, &expected);
        }
    }
}

#[test]
fn correlations_with_a_reference_survive() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 5).unwrap(), &mut rng);
    // Client 1's qubit is maximally entangled with the reference.
    let bell = PureState::epr();
    let input = random_qubit(&mut rng)
        .tensor(&bell)
        .unwrap()
        .permuted(&[1, 0, 2])
        .unwrap();
    let expected = reference_execute(&p, &input, &mut rng).unwrap();
    for seed in 0..5 {
        let run = run_full_protocol(&input, &p, &config(seed, 2)).unwrap();
        assert_eq!(run.output.num_qubits(), 3);
        assert_close(&run.output, &expected);
        let a = run.output.reduced_density(&[0, 2]).unwrap();
        let b = expected.reduced_density(&[0, 2]).unwrap();
        assert!(mpqc::quantum::trace_distance(&a, &b).unwrap() < 1e-6);
    }
}

#[test]
fn output_is_independent_of_secret_draws() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 5).unwrap(), &mut rng);
    let input = random_inputs(2, &mut rng);
    let first = run_full_protocol(&input, &p, &config(0, 2)).unwrap().output;
    for seed in 1..100 {
        let out = run_full_protocol(&input, &p, &config(seed, 2)).unwrap().output;
        assert_close(&out, &first);
    }
}

#[test]
fn fixed_seed_runs_are_reproducible() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 5).unwrap(), &mut rng);
    let input = random_inputs(2, &mut rng);
    let a = run_full_protocol(&input, &p, &config(11, 3)).unwrap();
    let b = run_full_protocol(&input, &p, &config(11, 3)).unwrap();
    assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
    assert_eq!(a.output, b.output);
    let c = run_full_protocol(&input, &p, &config(12, 3)).unwrap();
    assert_ne!(a.transcript.to_jsonl(), c.transcript.to_jsonl());
}

#[test]
fn message_counts_follow_the_protocol_structure() {
    let (n, m) = (2, 3);
    let g = BrickworkGraph::build(n, 5).unwrap();
    let q = g.q();
    let p = MeasurementPattern::zero(g.clone());
    let run = run_full_protocol(&PureState::zero(n).unwrap(), &p, &config(1, m)).unwrap();
    let t = &run.transcript;
    let mut per_node: BTreeMap<usize, usize> = BTreeMap::new();
    for msg in t.messages() {
        if let Body::QubitTransfer { label, .. } = &msg.body {
            assert_eq!(msg.receiver, Party::Server);
            *per_node.entry(label.node()).or_default() += 1;
        }
    }
    for j in g.measured() {
        let expected = if g.is_input(j) { 1 + (n - 1) * m } else { n * m };
        assert_eq!(per_node[&j], expected, "node {j}");
    }
    // One outcome vector per prepared node, sent to the oracle and each client.
    assert_eq!(t.count("OutcomeVector"), q * (n + 1));
    assert_eq!(
        t.count("TestBasis"),
        (g.num_nodes() - n - n) * n * (m - 1) + n * (n - 1) * (m - 1)
    );
    let deltas: Vec<_> = t
        .messages()
        .iter()
        .filter(|msg| msg.receiver == Party::Server && msg.body.variant() == "DeltaAnnounce")
        .collect();
    assert_eq!(deltas.len(), q);
    assert_eq!(t.count("OutputQubit"), n);
    assert_eq!(t.count("OutputKeys"), n);
    assert_eq!(run.server.b_log().len(), q);
    assert_eq!(t.outputs().len(), n);
}

#[test]
fn graph_state_has_every_node_before_computation() {
    let g = BrickworkGraph::build(2, 5).unwrap();
    let p = MeasurementPattern::zero(g.clone());
    let mut proto = Protocol::new(
        &PureState::zero(2).unwrap(),
        p,
        &config(3, 2),
        ChaCha20Rng::seed_from_u64(3),
    )
    .unwrap();
    proto.prepare().unwrap();
    assert_eq!(proto.server().held().len(), g.num_nodes());
    assert_eq!(proto.network().register().owned_by(&Party::Server).len(), g.num_nodes());
    assert_eq!(proto.server().t_log().len(), g.q());
}

#[test]
fn server_only_receives_blinded_message_kinds() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 5).unwrap(), &mut rng);
    let run = run_full_protocol(&random_inputs(2, &mut rng), &p, &config(6, 2)).unwrap();
    let allowed = ["QubitTransfer", "TestBasis", "TestVerdict", "DeltaAnnounce"];
    for msg in run.transcript.received_by(Party::Server) {
        assert!(allowed.contains(&msg.body.variant()), "{:?}", msg.body);
        assert!(!matches!(
            msg.body,
            Body::QubitTransfer {
                amplitudes: Some(_),
                ..
            }
        ));
    }
}

#[test]
fn transferred_qubits_leave_the_sender() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let mut proto = Protocol::new(&random_inputs(2, &mut rng), p, &config(7, 2), rng.clone()).unwrap();
    proto.prepare().unwrap();
    // Every client qubit has been handed over; clients own nothing.
    for k in 1..=2 {
        assert!(proto.network().register().owned_by(&Party::Client(k)).is_empty());
    }
    let run = {
        proto.compute().unwrap();
        proto.deliver_outputs().unwrap();
        proto.finish().unwrap()
    };
    for &(k, id) in run.transcript.outputs() {
        assert_eq!(run.clients[k - 1].output(), Some(id));
    }
}

#[test]
fn delta_of_one_node_is_uniform() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let input = random_inputs(2, &mut rng);
    let mut counts = [0u32; 8];
    let runs = 10_000;
    for seed in 0..runs {
        let run = run_full_protocol(&input, &p, &config(seed, 2)).unwrap();
        counts[run.server.deltas()[&1].value() as usize] += 1;
    }
    let expected = runs as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let pval = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
    assert!(pval > 0.01, "{counts:?}");
}

#[test]
fn lying_client_aborts_with_a_typed_record() {
    let p = MeasurementPattern::zero(BrickworkGraph::build(2, 2).unwrap());
    let mut cfg = config(1, 4);
    cfg.client_scripts.insert(
        2,
        ClientScript {
            copy_offset: Octant::PI,
            ..Default::default()
        },
    );
    match run_full_protocol(&PureState::zero(2).unwrap(), &p, &cfg) {
        Err(PartyError::Aborted(run)) => {
            let text = run.record.to_string();
            assert!(text.contains("client 2"), "{text}");
            assert_eq!(run.transcript.abort(), Some(&run.record));
            assert!(run.transcript.count("Abort") >= 3);
        }
        other => panic!("expected an abort, got {:?}", other.map(|r| r.output)),
    }
}

#[test]
fn chosen_masks_shift_delta_by_pi() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let p = MeasurementPattern::random(BrickworkGraph::build(2, 2).unwrap(), &mut rng);
    let input = random_inputs(2, &mut rng);
    let with = |r: Outcome| {
        let mut cfg = config(21, 2);
        cfg.client_scripts.insert(
            1,
            ClientScript {
                r_override: BTreeMap::from([(1, r)]),
                ..Default::default()
            },
        );
        run_full_protocol(&input, &p, &cfg).unwrap()
    };
    let (a, b) = (with(Outcome::ZERO), with(Outcome::ONE));
    assert_eq!(b.server.deltas()[&1] - a.server.deltas()[&1], Octant::PI);
    assert_close(&a.output, &b.output);
}

#[test]
fn deviating_server_corrupts_the_output() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let p = MeasurementPattern::zero(BrickworkGraph::build(2, 2).unwrap());
    let input = random_inputs(2, &mut rng);
    let mut cfg = config(2, 2);
    cfg.server = ServerStrategy {
        output_paulis: vec![(3, Pauli::Z)],
        ..Default::default()
    };
    let run = run_full_protocol(&input, &p, &cfg).unwrap();
    let expected = reference_execute(&p, &input, &mut rng)
        .unwrap()
        .with(Gate::Z(0))
        .unwrap();
    assert_close(&run.output, &expected);
}

#[test]
fn debug_transcripts_carry_amplitudes_and_parse_as_json() {
    let p = MeasurementPattern::zero(BrickworkGraph::build(2, 2).unwrap());
    let mut cfg = config(4, 2);
    cfg.debug_secrets = true;
    let run = run_full_protocol(&PureState::zero(2).unwrap(), &p, &cfg).unwrap();
    let lines: Vec<serde_json::Value> = run
        .transcript
        .to_jsonl()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), run.transcript.len());
    for (i, v) in lines.iter().enumerate() {
        assert_eq!(v["seq"], i as u64);
        for key in ["sender", "receiver", "variant", "payload"] {
            assert!(v.get(key).is_some(), "{key} missing in {v}");
        }
    }
    assert!(lines
        .iter()
        .any(|v| v["variant"] == "QubitTransfer" && v["payload"]["amplitudes"].is_array()));
}

/// H·Z(−φ) on a single qubit.
fn step(phi: Octant, psi: [Complex64; 2]) -> [Complex64; 2] {
    let e = Complex64::from_polar(1.0, -phi.radians());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [(psi[0] + e * psi[1]) * s, (psi[0] - e * psi[1]) * s]
}

#[test]
fn single_client_reduces_to_the_one_client_delegated_protocol() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for cols in 2..6 {
        for seed in 0..10 {
            let g = BrickworkGraph::line(cols).unwrap();
            let p = MeasurementPattern::random(g, &mut rng);
            let input = random_qubit(&mut rng);
            let run = run_full_protocol(&input, &p, &config(seed, 2)).unwrap();

            let psi = [input.amplitudes()[0], input.amplitudes()[1]];
            let out = (1..cols).fold(psi, |acc, j| step(p.angle(j), acc));
            assert_close(&run.output, &PureState::from_amplitudes(out.to_vec()).unwrap());

            // δ_j = (−1)^{a_j}(φ'_j + θ_j) + π r_j with line-graph dependencies.
            let l = &run.ledger;
            let a = l.bit(SecretTag::InputPad { node: 1 }).unwrap();
            let s: BTreeMap<usize, Outcome> = run
                .server
                .b_log()
                .iter()
                .map(|&(j, b)| (j, b ^ l.mask(j).unwrap()))
                .collect();
            let sig = |j: usize| {
                if j == 0 {
                    Outcome::ZERO
                } else {
                    s.get(&j).copied().unwrap_or_default()
                }
            };
            for j in 1..cols {
                let aj = if j == 1 { a } else { Outcome::ZERO };
                let sx = sig(j - 1);
                let sz = if j >= 3 { sig(j - 2) } else { Outcome::ZERO };
                let carried = if j == 2 { a } else { Outcome::ZERO };
                let theta = l.theta(j).unwrap();
                let expected =
                    (p.angle(j).flip_if(sx) + theta).flip_if(aj) + Octant::pi_times(sz ^ carried ^ l.mask(j).unwrap());
                assert_eq!(run.server.deltas()[&j], expected, "cols {cols} node {j}");
            }
            assert_eq!(run.transcript.count("OutcomeVector"), 0);
        }
    }
}
