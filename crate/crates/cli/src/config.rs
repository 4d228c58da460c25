use std::collections::BTreeMap;
use std::path::PathBuf;

use mpqc::mbqc::{BrickworkGraph, MeasurementPattern};
use mpqc::parties::{ClientScript, ServerStrategy};
use mpqc::quantum::{Octant, PureState};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    HonestRun,
    Blindness,
    ServerSimEquiv,
    ClientSimEquiv,
    Protocol1Detection,
    IntermediateEquiv,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::HonestRun => "honest-run",
            Mode::Blindness => "blindness",
            Mode::ServerSimEquiv => "server-sim-equiv",
            Mode::ClientSimEquiv => "client-sim-equiv",
            Mode::Protocol1Detection => "protocol1-detection",
            Mode::IntermediateEquiv => "intermediate-equiv",
        }
    }
}

/// One amplitude: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Amplitude> for Complex64 {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Real(re) => Complex64::new(re, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// A client's input qubit: `"zero"`, `"one"`, `"plus"`, `"minus"`,
/// `"bell"` (half of a Bell pair whose other half joins the reference),
/// or an amplitude pair `[α, β]`, normalized on use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Named(String),
    Amplitudes([Amplitude; 2]),
}

pub const INPUT_NAMES: [&str; 5] = ["zero", "one", "plus", "minus", "bell"];

/// Measurement angles: `"zero"`, `"random"` (drawn from the seed), or
/// octant integers for the measured nodes in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Named(String),
    Angles(Vec<i64>),
}

impl Default for PatternSpec {
    fn default() -> Self {
        PatternSpec::Named("random".into())
    }
}

/// The second scenario of a blindness comparison. Missing sizes default
/// to the main scenario's.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub n_clients: Option<usize>,
    pub n_columns: Option<usize>,
    pub inputs: Vec<InputSpec>,
    #[serde(default)]
    pub pattern: PatternSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n_clients: usize,
    pub n_columns: usize,
    #[serde(default = "default_copies")]
    pub m_copies: usize,
    #[serde(default)]
    pub pattern: PatternSpec,
    pub inputs: Vec<InputSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Blindness: the scenario compared against.
    pub compare: Option<CompareSpec>,
    /// Client-sim-equiv: the corrupted clients.
    #[serde(default = "default_coalition")]
    pub coalition: Vec<usize>,
    /// Protocol1-detection: offset of the sent copies, in octants.
    #[serde(default = "default_deviation")]
    pub deviation: i64,
    #[serde(default)]
    pub client_scripts: BTreeMap<usize, ClientScript>,
    #[serde(default)]
    pub server: ServerStrategy,
}

fn default_copies() -> usize {
    mpqc::oracle::DEFAULT_COPIES
}

fn default_trials() -> usize {
    1
}

fn default_coalition() -> Vec<usize> {
    vec![1]
}

fn default_deviation() -> i64 {
    1
}

pub const SIZE_LEAK: &str = "size leak is permitted; scenarios must match";

/// Every reason `config` cannot run; empty iff it can.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    if config.n_clients < 2 || config.n_clients % 2 == 1 {
        v.push("brickwork requires even wire count".to_string());
    }
    if config.n_columns < 2 {
        v.push(format!("n_columns must be at least 2, got {}", config.n_columns));
    } else if BrickworkGraph::build(2, config.n_columns).is_err() {
        v.push(format!("n_columns must be 2 or 1 mod 4, got {}", config.n_columns));
    }
    if config.m_copies < 2 {
        v.push("Protocol 1 requires m ≥ 2".to_string());
    }
    if config.trials < 1 {
        v.push("trials must be at least 1".to_string());
    }
    let sampled = matches!(
        config.mode,
        Mode::ServerSimEquiv | Mode::ClientSimEquiv | Mode::IntermediateEquiv
    );
    if sampled && config.trials < mpqc::harness::MIN_TRIALS {
        v.push(format!(
            "{} compares sampled statistics and needs at least {} trials",
            config.mode.name(),
            mpqc::harness::MIN_TRIALS
        ));
    }
    if config.seed.is_none() {
        v.push("seed is required (set it in the config or pass --seed)".to_string());
    }
    check_scenario(
        "inputs",
        config.n_clients,
        config.n_columns,
        &config.inputs,
        &config.pattern,
        &mut v,
    );
    for &k in config.client_scripts.keys() {
        if k == 0 || k > config.n_clients {
            v.push(format!("client_scripts names unknown client {k}"));
        }
    }
    match config.mode {
        Mode::Blindness => match &config.compare {
            None => v.push("blindness needs a `compare` scenario".to_string()),
            Some(c) => {
                let n = c.n_clients.unwrap_or(config.n_clients);
                let cols = c.n_columns.unwrap_or(config.n_columns);
                if n != config.n_clients || cols != config.n_columns || c.inputs.len() != config.inputs.len() {
                    v.push(SIZE_LEAK.to_string());
                } else {
                    check_scenario("compare.inputs", n, cols, &c.inputs, &c.pattern, &mut v);
                    if bell_count(&c.inputs) != bell_count(&config.inputs) {
                        v.push(SIZE_LEAK.to_string());
                    }
                }
            }
        },
        Mode::ClientSimEquiv => {
            let mut members = config.coalition.clone();
            members.sort_unstable();
            members.dedup();
            if members.len() != config.coalition.len() {
                v.push("coalition lists a client twice".to_string());
            }
            if members.is_empty() || members.len() >= config.n_clients {
                v.push("coalition must have at least one member and leave an honest client".to_string());
            }
            if let Some(k) = members.iter().find(|&&k| k == 0 || k > config.n_clients) {
                v.push(format!("coalition names unknown client {k}"));
            }
            if let Some(k) = config.client_scripts.keys().find(|k| !config.coalition.contains(k)) {
                v.push(format!("client {k} has a script but is not in the coalition"));
            }
        }
        Mode::HonestRun => {}
        _ if !config.client_scripts.is_empty() => {
            v.push(format!("client scripts are not used by {}", config.mode.name()))
        }
        _ => {}
    }
    let uses_server = matches!(
        config.mode,
        Mode::HonestRun | Mode::ServerSimEquiv | Mode::IntermediateEquiv
    );
    if !uses_server && !config.server.is_honest() {
        v.push(format!("a server strategy is not used by {}", config.mode.name()));
    }
    v
}

fn bell_count(inputs: &[InputSpec]) -> usize {
    inputs
        .iter()
        .filter(|i| matches!(i, InputSpec::Named(s) if s == "bell"))
        .count()
}

fn check_scenario(what: &str, n: usize, cols: usize, inputs: &[InputSpec], pattern: &PatternSpec, v: &mut Vec<String>) {
    if inputs.len() != n {
        v.push(format!("{what} lists {} inputs for {n} clients", inputs.len()));
    }
    for (k, input) in inputs.iter().enumerate() {
        match input {
            InputSpec::Named(s) if !INPUT_NAMES.contains(&s.as_str()) => v.push(format!(
                "{what}[{k}]: unknown input {s:?}, expected one of {INPUT_NAMES:?}"
            )),
            InputSpec::Amplitudes(a) if a.iter().map(|&x| Complex64::from(x).norm_sqr()).sum::<f64>() < 1e-12 => {
                v.push(format!("{what}[{k}]: amplitudes are zero"))
            }
            _ => {}
        }
    }
    match pattern {
        PatternSpec::Named(s) if s != "zero" && s != "random" => v.push(format!(
            "unknown pattern {s:?}, expected \"zero\", \"random\" or a list of octants"
        )),
        PatternSpec::Angles(a) if a.len() != n * cols.saturating_sub(1) => v.push(format!(
            "pattern lists {} angles, the {n}x{cols} graph measures {}",
            a.len(),
            n * cols.saturating_sub(1)
        )),
        _ => {}
    }
}

/// Joint input state: client inputs first, then one reference qubit per
/// `"bell"` input.
pub fn build_inputs(inputs: &[InputSpec]) -> PureState {
    let mut state = PureState::empty();
    let mut input_pos = Vec::new();
    let mut ref_pos = Vec::new();
    for spec in inputs {
        let at = state.num_qubits();
        let factor = match spec {
            InputSpec::Named(s) => match s.as_str() {
                "zero" => PureState::zero(1).expect("one qubit"),
                "one" => PureState::basis_state(&[mpqc::Outcome::ONE]).expect("one qubit"),
                "plus" => PureState::plus(Octant::ZERO),
                "minus" => PureState::plus(Octant::PI),
                "bell" => {
                    ref_pos.push(at + 1);
                    PureState::epr()
                }
                other => unreachable!("validated input {other}"),
            },
            InputSpec::Amplitudes(a) => {
                PureState::normalized(a.iter().map(|&x| x.into()).collect()).expect("validated amplitudes")
            }
        };
        input_pos.push(at);
        state = state.tensor(&factor).expect("within the qubit limit");
    }
    input_pos.extend(ref_pos);
    state.permuted(&input_pos).expect("a permutation")
}

/// Seed for the random pattern of scenario `which`; distinct from the
/// per-trial streams.
pub fn build_pattern(spec: &PatternSpec, n: usize, cols: usize, seed: u64, which: u64) -> MeasurementPattern {
    let graph = BrickworkGraph::build(n, cols).expect("validated size");
    match spec {
        PatternSpec::Named(s) if s == "zero" => MeasurementPattern::zero(graph),
        PatternSpec::Named(_) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - which);
            MeasurementPattern::random(graph, &mut rng)
        }
        PatternSpec::Angles(a) => {
            let angles = graph.measured().zip(a).map(|(j, &x)| (j, Octant::new(x))).collect();
            MeasurementPattern::new(graph, angles).expect("one angle per measured node")
        }
    }
}
