use std::fmt;

use serde::Serialize;

use super::Party;
use crate::mbqc::Node;
use crate::oracle::SecretShare;
use crate::quantum::{Octant, Outcome, QubitId};
use crate::rsp::OutcomeVector;

/// What a transferred qubit is for. Labels carry positions only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QubitLabel {
    /// Client `node`'s one-time padded input.
    PaddedInput { node: Node },
    /// One of the copies `contributor` sends for `node` in the honesty test.
    TestCopy {
        node: Node,
        contributor: usize,
        copy: usize,
    },
}

impl QubitLabel {
    pub fn node(&self) -> Node {
        match *self {
            QubitLabel::PaddedInput { node } | QubitLabel::TestCopy { node, .. } => node,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// A client failed the copy test for `node`.
    ClientRejected {
        client: usize,
        node: Node,
        failed_copies: usize,
    },
}

/// Typed abort, naming the step that triggered it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbortRecord {
    pub step: String,
    pub reason: AbortReason,
}

impl fmt::Display for AbortRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            AbortReason::ClientRejected {
                client,
                node,
                failed_copies,
            } => write!(
                f,
                "{}: client {client} failed {failed_copies} tested copies for node {node}",
                self.step
            ),
        }
    }
}

/// Message payloads.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", content = "payload")]
pub enum Body {
    QubitTransfer {
        label: QubitLabel,
        qubit: QubitId,
        #[serde(skip_serializing_if = "Option::is_none")]
        amplitudes: Option<Vec<[f64; 2]>>,
    },
    ShareDistribution {
        share: SecretShare,
    },
    TestBasis {
        node: Node,
        contributor: usize,
        copy: usize,
        basis: Octant,
    },
    TestOutcome {
        node: Node,
        contributor: usize,
        copy: usize,
        outcome: Outcome,
    },
    TestVerdict {
        node: Node,
        contributor: usize,
        survivor: usize,
        accepted: bool,
    },
    OutcomeVector {
        node: Node,
        t: OutcomeVector,
    },
    DeltaAnnounce {
        node: Node,
        delta: Octant,
    },
    ResultBroadcast {
        node: Node,
        b: Outcome,
    },
    OutputQubit {
        node: Node,
        qubit: QubitId,
        #[serde(skip_serializing_if = "Option::is_none")]
        amplitudes: Option<Vec<[f64; 2]>>,
    },
    OutputKeys {
        node: Node,
        sx: Outcome,
        sz: Outcome,
    },
    Abort {
        record: AbortRecord,
    },
}

impl Body {
    pub fn variant(&self) -> &'static str {
        match self {
            Body::QubitTransfer { .. } => "QubitTransfer",
            Body::ShareDistribution { .. } => "ShareDistribution",
            Body::TestBasis { .. } => "TestBasis",
            Body::TestOutcome { .. } => "TestOutcome",
            Body::TestVerdict { .. } => "TestVerdict",
            Body::OutcomeVector { .. } => "OutcomeVector",
            Body::DeltaAnnounce { .. } => "DeltaAnnounce",
            Body::ResultBroadcast { .. } => "ResultBroadcast",
            Body::OutputQubit { .. } => "OutputQubit",
            Body::OutputKeys { .. } => "OutputKeys",
            Body::Abort { .. } => "Abort",
        }
    }
}

/// The only messages the server accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerInbound {
    QubitTransfer {
        label: QubitLabel,
        qubit: QubitId,
    },
    TestBasis {
        node: Node,
        contributor: usize,
        copy: usize,
        basis: Octant,
    },
    TestVerdict {
        node: Node,
        contributor: usize,
        survivor: usize,
        accepted: bool,
    },
    DeltaAnnounce {
        node: Node,
        delta: Octant,
    },
}

impl ServerInbound {
    pub(crate) fn body(self, amplitudes: Option<Vec<[f64; 2]>>) -> Body {
        match self {
            ServerInbound::QubitTransfer { label, qubit } => Body::QubitTransfer {
                label,
                qubit,
                amplitudes,
            },
            ServerInbound::TestBasis {
                node,
                contributor,
                copy,
                basis,
            } => Body::TestBasis {
                node,
                contributor,
                copy,
                basis,
            },
            ServerInbound::TestVerdict {
                node,
                contributor,
                survivor,
                accepted,
            } => Body::TestVerdict {
                node,
                contributor,
                survivor,
                accepted,
            },
            ServerInbound::DeltaAnnounce { node, delta } => Body::DeltaAnnounce { node, delta },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Message {
    pub seq: u64,
    pub sender: Party,
    pub receiver: Party,
    #[serde(flatten)]
    pub body: Body,
}

/// Ordered log of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    messages: Vec<Message>,
    outputs: Vec<(usize, QubitId)>,
    abort: Option<AbortRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, sender: Party, receiver: Party, body: Body) -> u64 {
        let seq = self.messages.len() as u64;
        self.messages.push(Message {
            seq,
            sender,
            receiver,
            body,
        });
        seq
    }

    pub(crate) fn set_outputs(&mut self, outputs: Vec<(usize, QubitId)>) {
        self.outputs = outputs;
    }

    pub(crate) fn set_abort(&mut self, record: AbortRecord) {
        self.abort = Some(record);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Output qubit handed to each client, by client index.
    pub fn outputs(&self) -> &[(usize, QubitId)] {
        &self.outputs
    }

    pub fn abort(&self) -> Option<&AbortRecord> {
        self.abort.as_ref()
    }

    pub fn count(&self, variant: &str) -> usize {
        self.messages.iter().filter(|m| m.body.variant() == variant).count()
    }

    pub fn received_by(&self, party: Party) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.receiver == party)
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m).expect("messages serialize"));
            out.push('\n');
        }
        out
    }
}
