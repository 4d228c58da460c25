use super::{Body, Party, PartyError, QubitLabel, ServerInbound, ServerState, Transcript};
use crate::quantum::{QubitId, Register};

/// The shared quantum register plus the message log.
#[derive(Clone, Debug)]
pub struct Network {
    register: Register<Party>,
    transcript: Transcript,
    debug: bool,
}

impl Network {
    /// With `debug`, transferred qubits are logged with their amplitudes
    /// whenever they are not entangled with anything else.
    pub fn new(debug: bool) -> Self {
        Network {
            register: Register::new(),
            transcript: Transcript::new(),
            debug,
        }
    }

    pub fn register(&self) -> &Register<Party> {
        &self.register
    }

    pub fn register_mut(&mut self) -> &mut Register<Party> {
        &mut self.register
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub(crate) fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn post(&mut self, sender: Party, receiver: Party, body: Body) -> u64 {
        self.transcript.push(sender, receiver, body)
    }

    pub fn broadcast(&mut self, sender: Party, receivers: &[Party], body: Body) {
        for &r in receivers {
            self.post(sender, r, body.clone());
        }
    }

    fn amplitudes(&self, id: QubitId) -> Option<Vec<[f64; 2]>> {
        if !self.debug {
            return None;
        }
        let state = self.register.joint_state(&[id]).ok()?;
        Some(state.amplitudes().iter().map(|c| [c.re, c.im]).collect())
    }

    /// Moves `id` from `from` to `to` and logs it with `body`, which is
    /// given the qubit's debug amplitudes.
    pub(crate) fn move_qubit(
        &mut self,
        from: Party,
        to: Party,
        id: QubitId,
        body: impl FnOnce(Option<Vec<[f64; 2]>>) -> Body,
    ) -> Result<(), PartyError> {
        let amps = self.amplitudes(id);
        self.register.transfer(&from, to, id)?;
        self.post(from, to, body(amps));
        Ok(())
    }

    /// Sends a qubit to a party other than the server.
    pub fn transfer(&mut self, from: Party, to: Party, label: QubitLabel, id: QubitId) -> Result<(), PartyError> {
        self.move_qubit(from, to, id, |amplitudes| Body::QubitTransfer {
            label,
            qubit: id,
            amplitudes,
        })
    }

    /// Logs `msg`, moves any qubit it carries, and hands it to the server.
    pub fn deliver(&mut self, from: Party, server: &mut ServerState, msg: ServerInbound) -> Result<(), PartyError> {
        match msg {
            ServerInbound::QubitTransfer { qubit, .. } => {
                self.move_qubit(from, Party::Server, qubit, |amps| msg.body(amps))?;
            }
            _ => {
                self.post(from, Party::Server, msg.body(None));
            }
        }
        server.accept(msg)
    }
}
