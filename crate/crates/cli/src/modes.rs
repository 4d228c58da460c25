use mpqc::harness::stats::{clopper_pearson_radius, Marginal};
use mpqc::harness::{
    assert_coalition_blind, blindness_check, compare_marginals, measure_bits, run_real_coalition_world,
    run_simulated_client_world, run_world, ClassicalLog, Coalition, CoalitionView, ExactBudget, HarnessError,
    MarginalComparison, Scenario, World, CONFIDENCE,
};
use mpqc::mbqc::{reference_execute, MeasurementPattern};
use mpqc::oracle::{share_secret, verify_client, OracleError, SecretShare, SecretTag};
use mpqc::parties::{run_full_protocol, Message, PartyError, ProtocolConfig, ServerStrategy, Transcript};
use mpqc::quantum::{Basis, Octant, Outcome, PureState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{build_inputs, build_pattern, ExperimentConfig, InputSpec, Mode, PatternSpec};

/// Largest TV a sampled comparison may show beyond its confidence radius.
pub const TV_TOLERANCE: f64 = 0.02;
pub const FIDELITY_TOLERANCE: f64 = 1e-6;
pub const BLINDNESS_TOLERANCE: f64 = 1e-9;
/// Allowed distance of a copy-test rejection rate from `sin²(dπ/8)`.
pub const DETECTION_BAND: f64 = 0.02;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Party(#[from] PartyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub mode: &'static str,
    pub scenario_ids: Vec<String>,
    pub metric: String,
    pub value: f64,
    pub confidence_radius: f64,
    pub trials: usize,
    pub seed: u64,
    pub threshold: String,
    pub passed: bool,
}

/// Everything a mode produces.
#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    /// Extra `(name, value)` lines for the summary.
    pub details: Vec<(String, String)>,
    pub transcript: Vec<String>,
    pub secrets: Option<Value>,
    pub aborted: bool,
}

#[derive(Serialize)]
struct Line<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    world: Option<&'a str>,
    trial: usize,
    #[serde(flatten)]
    message: &'a Message,
}

fn lines(transcript: &Transcript, world: Option<&str>, trial: usize) -> Vec<String> {
    transcript
        .messages()
        .iter()
        .map(|message| serde_json::to_string(&Line { world, trial, message }).expect("messages serialize"))
        .collect()
}

/// Independent randomness for trial `i` of sample set `set`.
fn trial_rng(seed: u64, set: u64, i: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(set << 32 | i as u64);
    rng
}

fn describe_inputs(inputs: &[InputSpec]) -> String {
    inputs
        .iter()
        .map(|i| match i {
            InputSpec::Named(s) => s.clone(),
            InputSpec::Amplitudes(_) => "amplitudes".into(),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn describe_pattern(p: &PatternSpec) -> String {
    match p {
        PatternSpec::Named(s) => s.clone(),
        PatternSpec::Angles(a) => a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(""),
    }
}

fn scenario_id(n: usize, cols: usize, pattern: &PatternSpec, inputs: &[InputSpec]) -> String {
    format!("{n}x{cols}/{}/{}", describe_pattern(pattern), describe_inputs(inputs))
}

struct Setup {
    seed: u64,
    inputs: PureState,
    pattern: MeasurementPattern,
    id: String,
}

fn setup(config: &ExperimentConfig) -> Setup {
    let seed = config.seed.expect("validated seed");
    Setup {
        seed,
        inputs: build_inputs(&config.inputs),
        pattern: build_pattern(&config.pattern, config.n_clients, config.n_columns, seed, 0),
        id: scenario_id(config.n_clients, config.n_columns, &config.pattern, &config.inputs),
    }
}

pub fn run(config: &ExperimentConfig, debug_secrets: bool) -> Result<RunOutput, RunError> {
    match config.mode {
        Mode::HonestRun => honest_run(config, debug_secrets),
        Mode::Blindness => blindness(config),
        Mode::ServerSimEquiv => world_equivalence(config, &[World::Real, World::SimulatedServer]),
        Mode::IntermediateEquiv => world_equivalence(config, &[World::Real, World::Teleport, World::Delayed]),
        Mode::ClientSimEquiv => client_equivalence(config),
        Mode::Protocol1Detection => protocol1_detection(config),
    }
}

enum Trial {
    Done {
        fidelity: f64,
        transcript: Transcript,
        secrets: Option<Value>,
    },
    Aborted {
        transcript: Transcript,
        reason: String,
    },
}

fn honest_run(config: &ExperimentConfig, debug_secrets: bool) -> Result<RunOutput, RunError> {
    let s = setup(config);
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(s.seed, 0, i);
            let protocol = ProtocolConfig {
                m_copies: config.m_copies,
                seed: rng.random(),
                debug_secrets,
                client_scripts: config.client_scripts.clone(),
                server: config.server.clone(),
            };
            let expected = reference_execute(&s.pattern, &s.inputs, &mut rng).map_err(PartyError::from)?;
            match run_full_protocol(&s.inputs, &s.pattern, &protocol) {
                Ok(run) => Ok(Trial::Done {
                    fidelity: run.output.fidelity(&expected).map_err(PartyError::from)?,
                    secrets: debug_secrets.then(|| run.ledger.debug_dump()),
                    transcript: run.transcript,
                }),
                Err(PartyError::Aborted(a)) => Ok(Trial::Aborted {
                    reason: a.record.to_string(),
                    transcript: a.transcript,
                }),
                Err(e) => Err(RunError::from(e)),
            }
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let mut transcript = Vec::new();
    let mut secrets = Vec::new();
    let mut details = Vec::new();
    let mut min_fidelity: f64 = 1.0;
    let mut aborts = 0;
    for (i, t) in trials.iter().enumerate() {
        match t {
            Trial::Done {
                fidelity,
                transcript: tr,
                secrets: sec,
            } => {
                min_fidelity = min_fidelity.min(*fidelity);
                transcript.extend(lines(tr, None, i));
                secrets.extend(sec.clone());
            }
            Trial::Aborted { transcript: tr, reason } => {
                aborts += 1;
                transcript.extend(lines(tr, None, i));
                details.push((format!("trial {i} aborted"), reason.clone()));
            }
        }
    }
    let completed = config.trials - aborts;
    details.insert(0, ("completed runs".into(), completed.to_string()));
    let value = if completed == 0 { 0.0 } else { min_fidelity };
    let threshold = 1.0 - FIDELITY_TOLERANCE;
    Ok(RunOutput {
        report: Report {
            mode: config.mode.name(),
            scenario_ids: vec![s.id],
            metric: "min_output_fidelity".into(),
            value,
            confidence_radius: 0.0,
            trials: config.trials,
            seed: s.seed,
            threshold: format!(">= {threshold}"),
            passed: completed > 0 && value >= threshold,
        },
        details,
        transcript,
        secrets: debug_secrets.then(|| {
            serde_json::json!({
                "warning": "DEBUG SECRETS: every client's pads, angles and masks in clear",
                "trials": secrets,
            })
        }),
        aborted: aborts > 0,
    })
}

fn blindness(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let s = setup(config);
    let compare = config.compare.as_ref().expect("validated compare scenario");
    let other = Scenario {
        inputs: build_inputs(&compare.inputs),
        pattern: build_pattern(&compare.pattern, config.n_clients, config.n_columns, s.seed, 1),
    };
    let base = Scenario {
        inputs: s.inputs,
        pattern: s.pattern,
    };
    let report = blindness_check(&base, &other, ExactBudget::default())?;
    let value = report.max_distance();
    Ok(RunOutput {
        report: Report {
            mode: config.mode.name(),
            scenario_ids: vec![
                s.id,
                scenario_id(config.n_clients, config.n_columns, &compare.pattern, &compare.inputs),
            ],
            metric: "max_trace_distance".into(),
            value,
            confidence_radius: 0.0,
            trials: 0,
            seed: s.seed,
            threshold: format!("<= {BLINDNESS_TOLERANCE:e}"),
            passed: value <= BLINDNESS_TOLERANCE,
        },
        details: report
            .distances
            .iter()
            .map(|(c, d)| (format!("{c:?}"), format!("{d:.3e}")))
            .collect(),
        transcript: Vec::new(),
        secrets: None,
        aborted: false,
    })
}

fn bits(values: impl IntoIterator<Item = Outcome>) -> u64 {
    values
        .into_iter()
        .enumerate()
        .map(|(i, b)| (b.value() as u64) << i)
        .sum()
}

/// Bits `3c..3c+3` of a packed word, so each marginal takes ≤ 8 values.
fn chunk(word: u64, c: usize) -> u64 {
    word >> (3 * c) & 0b111
}

/// Marginals over a classical transcript record and measured output bits:
/// every announced angle, then announced results, outcome vectors and
/// output bits in groups of three.
fn transcript_marginals<S, F>(
    pattern: &MeasurementPattern,
    out_bits: usize,
    t_bits: usize,
    record: F,
) -> Vec<Marginal<S>>
where
    S: 'static,
    F: Fn(&S) -> Option<(&ClassicalLog, u64)> + Copy + Send + Sync + 'static,
{
    let order = pattern.flow().order().to_vec();
    let mut m = Vec::new();
    m.push(Marginal::new("completed", move |s: &S| record(s).is_some() as u64));
    for &j in &order {
        m.push(Marginal::new(format!("delta_{j}"), move |s: &S| {
            record(s)
                .and_then(|(log, _)| log.delta(j))
                .map_or(0, |d| d.value() as u64)
        }));
    }
    for c in 0..order.len().div_ceil(3) {
        m.push(Marginal::new(format!("b[{c}]"), move |s: &S| {
            record(s).map_or(0, |(log, _)| chunk(bits(log.b.iter().map(|&(_, b)| b)), c))
        }));
    }
    for c in 0..t_bits.div_ceil(3) {
        m.push(Marginal::new(format!("t[{c}]"), move |s: &S| {
            record(s).map_or(0, |(log, _)| {
                chunk(bits(log.t.values().flat_map(|t| t.iter().map(|(_, b)| b))), c)
            })
        }));
    }
    for c in 0..out_bits.div_ceil(3) {
        m.push(Marginal::new(format!("output[{c}]"), move |s: &S| {
            record(s).map_or(0, |(_, out)| chunk(out, c))
        }));
    }
    m
}

fn t_bit_count(pattern: &MeasurementPattern) -> usize {
    let n = pattern.graph().n_wires();
    pattern
        .graph()
        .nodes()
        .map(|j| {
            let input = pattern.graph().is_input(j).then_some(j);
            mpqc::rsp::measured_registers(input, n).map_or(0, |r| r.len())
        })
        .sum()
}

/// The largest TV among `rows`, and whether every row stays within
/// tolerance of its own radius.
fn max_row(rows: &[(String, MarginalComparison)]) -> (&MarginalComparison, bool) {
    let worst = rows
        .iter()
        .map(|(_, c)| c)
        .max_by(|a, b| a.tv.total_cmp(&b.tv))
        .expect("at least one marginal");
    (worst, rows.iter().all(|(_, c)| c.excess() <= TV_TOLERANCE))
}

fn comparison_details(rows: &[(String, MarginalComparison)]) -> Vec<(String, String)> {
    rows.iter()
        .map(|(label, c)| {
            (
                format!("{label} {}", c.marginal),
                format!("tv {:.4} radius {:.4}", c.tv, c.confidence_radius),
            )
        })
        .collect()
}

fn world_equivalence(config: &ExperimentConfig, worlds: &[World]) -> Result<RunOutput, RunError> {
    let s = setup(config);
    let expected = {
        let mut rng = trial_rng(s.seed, u32::MAX as u64, 0);
        reference_execute(&s.pattern, &s.inputs, &mut rng).map_err(PartyError::from)?
    };
    let qubits: Vec<usize> = (0..s.inputs.num_qubits()).collect();
    let server: &ServerStrategy = &config.server;
    let mut samples = Vec::new();
    let mut transcript = Vec::new();
    let mut min_fidelity: f64 = 1.0;
    for (w, &world) in worlds.iter().enumerate() {
        let runs = (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(s.seed, w as u64 + 1, i);
                let sample = run_world(world, &s.inputs, &s.pattern, server, config.m_copies, &mut rng)?;
                let out = measure_bits(&sample.output, &qubits, &mut rng);
                let fidelity = sample.output.fidelity(&expected).map_err(HarnessError::from)?;
                let first = (i == 0).then(|| lines(&sample.transcript, Some(world.name()), 0));
                Ok(((sample.log, out), fidelity, first))
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        let mut logs = Vec::with_capacity(runs.len());
        for (log, fidelity, first) in runs {
            if world != World::Real && server.is_honest() {
                min_fidelity = min_fidelity.min(fidelity);
            }
            transcript.extend(first.into_iter().flatten());
            logs.push(log);
        }
        samples.push(logs);
    }
    let marginals = transcript_marginals(
        &s.pattern,
        qubits.len(),
        t_bit_count(&s.pattern),
        |x: &(ClassicalLog, u64)| Some((&x.0, x.1)),
    );
    let mut rows = Vec::new();
    for (w, world) in worlds.iter().enumerate().skip(1) {
        for c in compare_marginals(&marginals, &samples[0], &samples[w])? {
            rows.push((world.name().to_string(), c));
        }
    }
    let (worst, within) = max_row(&rows);
    let mut details = comparison_details(&rows);
    let fidelity_ok = !server.is_honest() || min_fidelity >= 1.0 - FIDELITY_TOLERANCE;
    if server.is_honest() {
        details.insert(
            0,
            ("min output fidelity vs reference".into(), format!("{min_fidelity:.12}")),
        );
    }
    Ok(RunOutput {
        report: Report {
            mode: config.mode.name(),
            scenario_ids: std::iter::once(s.id)
                .chain(worlds.iter().map(|w| w.name().to_string()))
                .collect(),
            metric: format!("max_marginal_tv ({})", worst.marginal),
            value: worst.tv,
            confidence_radius: worst.confidence_radius,
            trials: config.trials,
            seed: s.seed,
            threshold: format!("every marginal <= {TV_TOLERANCE} + radius"),
            passed: within && fidelity_ok,
        },
        details,
        transcript,
        secrets: None,
        aborted: false,
    })
}

/// A coalition view flattened into a classical log, plus key bits.
fn as_log(view: &CoalitionView) -> ClassicalLog {
    ClassicalLog {
        t: view.t.iter().cloned().collect(),
        deltas: view.deltas.clone(),
        b: view.b.clone(),
    }
}

type CoalitionSample = Option<(ClassicalLog, u64, u64)>;

fn client_equivalence(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let s = setup(config);
    let mut coalition = Coalition::new(config.coalition.iter().copied(), config.n_clients)?;
    for (&k, script) in &config.client_scripts {
        coalition = coalition.with_script(k, script.clone())?;
    }
    let qubits: Vec<usize> = (0..s.inputs.num_qubits()).collect();
    let mut samples: Vec<Vec<CoalitionSample>> = Vec::new();
    let mut transcript = Vec::new();
    let mut leaks = Vec::new();
    for (w, simulated) in [false, true].into_iter().enumerate() {
        let name = if simulated { "simulated" } else { "real" };
        let runs = (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = trial_rng(s.seed, w as u64 + 1, i);
                let run = if simulated {
                    run_simulated_client_world(&coalition, &s.inputs, &s.pattern, config.m_copies, &mut rng)?
                } else {
                    run_real_coalition_world(&coalition, &s.inputs, &s.pattern, config.m_copies, &mut rng)?
                };
                let leak = assert_coalition_blind(&run.transcript, &coalition, s.pattern.graph()).err();
                let sample = run.output.as_ref().map(|out| {
                    let keys = bits(run.view.keys.iter().flat_map(|&(_, sx, sz)| [sx, sz]));
                    (as_log(&run.view), measure_bits(out, &qubits, &mut rng), keys)
                });
                let first = (i == 0).then(|| lines(&run.transcript, Some(name), 0));
                Ok((sample, leak, first))
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        let mut set = Vec::with_capacity(runs.len());
        for (i, (sample, leak, first)) in runs.into_iter().enumerate() {
            if let Some(l) = leak {
                leaks.push(format!("{name} trial {i}: {l}"));
            }
            transcript.extend(first.into_iter().flatten());
            set.push(sample);
        }
        samples.push(set);
    }
    let mut marginals = transcript_marginals(
        &s.pattern,
        qubits.len(),
        t_bit_count(&s.pattern),
        |x: &CoalitionSample| x.as_ref().map(|(log, out, _)| (log, *out)),
    );
    for c in 0..(2 * config.coalition.len()).div_ceil(3) {
        marginals.push(Marginal::new(format!("keys[{c}]"), move |x: &CoalitionSample| {
            x.as_ref().map_or(0, |&(_, _, keys)| chunk(keys, c))
        }));
    }
    let rows: Vec<(String, MarginalComparison)> = compare_marginals(&marginals, &samples[0], &samples[1])?
        .into_iter()
        .map(|c| ("simulated".to_string(), c))
        .collect();
    let (worst, within) = max_row(&rows);
    let mut details = comparison_details(&rows);
    details.insert(0, ("structural leaks".into(), leaks.len().to_string()));
    details.extend(leaks.iter().take(10).map(|l| ("leak".to_string(), l.clone())));
    Ok(RunOutput {
        report: Report {
            mode: config.mode.name(),
            scenario_ids: vec![s.id, format!("coalition {:?}", config.coalition)],
            metric: format!("max_marginal_tv ({})", worst.marginal),
            value: worst.tv,
            confidence_radius: worst.confidence_radius,
            trials: config.trials,
            seed: s.seed,
            threshold: format!("every marginal <= {TV_TOLERANCE} + radius, no leaks"),
            passed: within && leaks.is_empty(),
        },
        details,
        transcript,
        secrets: None,
        aborted: false,
    })
}

fn protocol1_detection(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let seed = config.seed.expect("validated seed");
    let offset = Octant::new(config.deviation);
    let m = config.m_copies;
    let counts = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, 0, i);
            let angles: Vec<Octant> = (0..m).map(|_| Octant::random(&mut rng)).collect();
            let shares = angles
                .iter()
                .enumerate()
                .map(|(copy, &a)| {
                    let tag = SecretTag::CopyAngle {
                        node: 1,
                        contributor: 1,
                        copy,
                    };
                    share_secret(tag, a.into(), config.n_clients, &mut rng)
                })
                .collect::<Result<Vec<Vec<SecretShare>>, _>>()?;
            let sent: Vec<PureState> = angles.iter().map(|&a| PureState::plus(a + offset)).collect();
            let mut sampler = ChaCha20Rng::seed_from_u64(rng.random());
            let v = verify_client(
                &shares,
                |copy, basis| Ok(sent[copy].measure(0, Basis::Rotated(basis), &mut sampler)?.0),
                &mut rng,
            )?;
            Ok((v.rejections() as u64, v.tested.len() as u64))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let (rejected, tested) = counts.iter().fold((0, 0), |(r, t), &(a, b)| (r + a, t + b));
    let rate = rejected as f64 / tested as f64;
    let target = (offset.radians() / 2.0).sin().powi(2);
    let (lo, hi) = (target - DETECTION_BAND, target + DETECTION_BAND);
    Ok(RunOutput {
        report: Report {
            mode: config.mode.name(),
            scenario_ids: vec![format!("m={m}/deviation={}", offset.value())],
            metric: "per_copy_rejection_rate".into(),
            value: rate,
            confidence_radius: clopper_pearson_radius(rejected, tested, CONFIDENCE),
            trials: config.trials,
            seed,
            threshold: format!("in [{lo:.4}, {hi:.4}]"),
            passed: (lo..=hi).contains(&rate),
        },
        details: vec![
            ("tested copies".into(), tested.to_string()),
            ("rejections".into(), rejected.to_string()),
            ("target sin^2(d/2)".into(), format!("{target:.4}")),
        ],
        transcript: Vec::new(),
        secrets: None,
        aborted: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_every_bit() {
        let w = 0b101_110_011;
        assert_eq!([chunk(w, 0), chunk(w, 1), chunk(w, 2)], [0b011, 0b110, 0b101]);
        assert_eq!(bits([Outcome::ONE, Outcome::ZERO, Outcome::ONE]), 0b101);
    }

    #[test]
    fn trial_streams_are_distinct_and_stable() {
        let a: u64 = trial_rng(1, 0, 0).random();
        let b: u64 = trial_rng(1, 0, 1).random();
        let c: u64 = trial_rng(1, 1, 0).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, trial_rng(1, 0, 0).random::<u64>());
    }
}
