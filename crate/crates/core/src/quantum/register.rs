use std::collections::BTreeMap;
use std::fmt::{self, Debug};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Basis, DensityMatrix, Gate, Outcome, PureState, QuantumError};

/// Stable handle to a qubit living in a [`Register`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QubitId(pub u32);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Clone, Debug)]
struct Block {
    ids: Vec<QubitId>,
    state: PureState,
}

impl Block {
    fn position(&self, id: QubitId) -> Option<usize> {
        self.ids.iter().position(|&q| q == id)
    }
}

/// A multi-party quantum register.
///
/// The global state is kept as a product of independent blocks that merge
/// when a two-qubit gate couples them, so many unentangled single-qubit
/// transfers stay cheap. Every qubit has exactly one owner, and only the
/// owner may act on it.
#[derive(Clone, Debug)]
pub struct Register<O> {
    blocks: Vec<Block>,
    owners: BTreeMap<QubitId, O>,
    next: u32,
}

impl<O> Default for Register<O> {
    fn default() -> Self {
        Register {
            blocks: Vec::new(),
            owners: BTreeMap::new(),
            next: 0,
        }
    }
}

impl<O: Clone + PartialEq + Debug> Register<O> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `state` as a fresh block owned by `owner`; returns ids in qubit order.
    pub fn alloc(&mut self, owner: O, state: PureState) -> Vec<QubitId> {
        let ids: Vec<QubitId> = (0..state.num_qubits())
            .map(|_| {
                let id = QubitId(self.next);
                self.next += 1;
                self.owners.insert(id, owner.clone());
                id
            })
            .collect();
        if !ids.is_empty() {
            self.blocks.push(Block {
                ids: ids.clone(),
                state,
            });
        }
        ids
    }

    pub fn alloc_one(&mut self, owner: O, state: PureState) -> Result<QubitId, QuantumError> {
        if state.num_qubits() != 1 {
            return Err(QuantumError::DimensionMismatch(state.num_qubits(), 1));
        }
        Ok(self.alloc(owner, state)[0])
    }

    pub fn owner(&self, id: QubitId) -> Option<&O> {
        self.owners.get(&id)
    }

    pub fn contains(&self, id: QubitId) -> bool {
        self.owners.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }

    pub fn owned_by(&self, owner: &O) -> Vec<QubitId> {
        self.owners
            .iter()
            .filter(|(_, o)| *o == owner)
            .map(|(&id, _)| id)
            .collect()
    }

    fn check_owner(&self, actor: &O, id: QubitId) -> Result<(), QuantumError> {
        match self.owners.get(&id) {
            None => Err(QuantumError::UnknownQubit(id)),
            Some(o) if o == actor => Ok(()),
            Some(o) => Err(QuantumError::NotOwner {
                qubit: id,
                owner: format!("{o:?}"),
                actor: format!("{actor:?}"),
            }),
        }
    }

    fn block_of(&self, id: QubitId) -> Result<usize, QuantumError> {
        self.blocks
            .iter()
            .position(|b| b.position(id).is_some())
            .ok_or(QuantumError::UnknownQubit(id))
    }

    /// Merges the blocks at the given indices into a single block and
    /// returns its index.
    fn merge(&mut self, mut idx: Vec<usize>) -> Result<usize, QuantumError> {
        idx.sort_unstable();
        idx.dedup();
        let first = idx[0];
        for &i in idx[1..].iter().rev() {
            let other = self.blocks.remove(i);
            let b = &mut self.blocks[first];
            b.state = b.state.tensor(&other.state)?;
            b.ids.extend(other.ids);
        }
        Ok(first)
    }

    pub fn apply(&mut self, actor: &O, gate: Gate<QubitId>) -> Result<(), QuantumError> {
        let qubits = gate.qubits();
        for &q in &qubits {
            self.check_owner(actor, q)?;
        }
        let idx = qubits
            .iter()
            .map(|&q| self.block_of(q))
            .collect::<Result<Vec<_>, _>>()?;
        let b = self.merge(idx)?;
        let block = &mut self.blocks[b];
        let local = gate.map(|q| block.position(q).ok_or(QuantumError::UnknownQubit(q)))?;
        block.state.apply(local)
    }

    pub fn probabilities(&self, id: QubitId, basis: Basis) -> Result<[f64; 2], QuantumError> {
        let b = &self.blocks[self.block_of(id)?];
        b.state.probabilities(b.position(id).unwrap_or_default(), basis)
    }

    fn remove_measured(&mut self, b: usize, id: QubitId, post: PureState) {
        let block = &mut self.blocks[b];
        block.ids.retain(|&q| q != id);
        block.state = post;
        if block.ids.is_empty() {
            self.blocks.remove(b);
        }
        self.owners.remove(&id);
    }

    /// Measures and discards `id`.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        actor: &O,
        id: QubitId,
        basis: Basis,
        rng: &mut R,
    ) -> Result<Outcome, QuantumError> {
        self.check_owner(actor, id)?;
        let b = self.block_of(id)?;
        let pos = self.blocks[b].position(id).unwrap_or_default();
        let (outcome, post) = self.blocks[b].state.measure(pos, basis, rng)?;
        self.remove_measured(b, id, post);
        Ok(outcome)
    }

    /// Forces the measurement branch `outcome` and returns its probability.
    pub fn collapse(&mut self, actor: &O, id: QubitId, basis: Basis, outcome: Outcome) -> Result<f64, QuantumError> {
        self.check_owner(actor, id)?;
        let b = self.block_of(id)?;
        let pos = self.blocks[b].position(id).unwrap_or_default();
        match self.blocks[b].state.collapse(pos, basis, outcome)? {
            (p, Some(post)) => {
                self.remove_measured(b, id, post);
                Ok(p)
            }
            (_, None) => Err(QuantumError::ImpossibleOutcome),
        }
    }

    /// Hands `id` to `to`; the previous owner loses all access.
    pub fn transfer(&mut self, from: &O, to: O, id: QubitId) -> Result<(), QuantumError> {
        self.check_owner(from, id)?;
        self.owners.insert(id, to);
        Ok(())
    }

    /// Tensor of every block touching `ids`, with the ids of its qubits.
    fn gather(&self, ids: &[QubitId]) -> Result<(Vec<QubitId>, PureState), QuantumError> {
        let mut idx: Vec<usize> = ids.iter().map(|&q| self.block_of(q)).collect::<Result<_, _>>()?;
        idx.sort_unstable();
        idx.dedup();
        let mut all = Vec::new();
        let mut state = PureState::empty();
        for i in idx {
            all.extend(&self.blocks[i].ids);
            state = state.tensor(&self.blocks[i].state)?;
        }
        Ok((all, state))
    }

    fn positions(all: &[QubitId], ids: &[QubitId]) -> Result<Vec<usize>, QuantumError> {
        let mut out = Vec::with_capacity(ids.len());
        for (i, &q) in ids.iter().enumerate() {
            if ids[..i].contains(&q) {
                return Err(QuantumError::DuplicateQubit(q));
            }
            out.push(all.iter().position(|&a| a == q).ok_or(QuantumError::UnknownQubit(q))?);
        }
        Ok(out)
    }

    /// Joint pure state of `ids` in the given order. Fails if any of them is
    /// entangled with a qubit outside the set.
    pub fn joint_state(&self, ids: &[QubitId]) -> Result<PureState, QuantumError> {
        let (all, state) = self.gather(ids)?;
        if let Some(&q) = all.iter().find(|q| !ids.contains(q)) {
            return Err(QuantumError::Entangled(q));
        }
        state.permuted(&Self::positions(&all, ids)?)
    }

    /// Removes `ids`, all owned by `actor` and entangled with nothing else,
    /// and returns their joint state.
    pub fn take(&mut self, actor: &O, ids: &[QubitId]) -> Result<PureState, QuantumError> {
        for &q in ids {
            self.check_owner(actor, q)?;
        }
        let state = self.joint_state(ids)?;
        self.blocks.retain(|b| !b.ids.iter().any(|q| ids.contains(q)));
        for q in ids {
            self.owners.remove(q);
        }
        Ok(state)
    }

    /// Reduced density matrix of `ids` in the given order.
    pub fn reduced_density(&self, ids: &[QubitId]) -> Result<DensityMatrix, QuantumError> {
        let (all, state) = self.gather(ids)?;
        state.reduced_density(&Self::positions(&all, ids)?)
    }
}
