//! A repository as a single-writer actor: one message in, zero or more out.
//!
//! Both the simulated network and the socket daemons drive the same
//! [`RepositoryNode`], so protocol behavior cannot drift between them.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::archive::{PendingHalf, RepositoryState};
use crate::csif;
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::group::GroupParams;
use crate::message::{
    ChainMessage, ErrorCode, ErrorMessage, Message, QueryTermMessage, ResultMessage, Scheme, TxnId,
};
use crate::sif::{self, InitiatorSession, QueryOptions};

/// Network address of a participant: a repository coordinate, or
/// [`CLIENT`] for the inserting or querying user.
pub type Address = u64;

/// Coordinate 0 is never a share point, so it names the client.
pub const CLIENT: Address = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outgoing<M = Message> {
    pub to: Address,
    pub message: M,
}

#[derive(Clone, Copy, Debug)]
pub struct NodeConfig {
    /// Half-session lifetime in substrate clock units.
    pub session_timeout: u64,
    pub options: QueryOptions,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            session_timeout: crate::transport::SIM_TIMEOUT_STEPS,
            options: QueryOptions::default(),
        }
    }
}

/// Query outcome as seen by the initiator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Answered(bool),
    Failed(ErrorMessage),
}

pub struct RepositoryNode {
    state: RepositoryState,
    group: Option<Arc<GroupParams>>,
    rng: ChaCha20Rng,
    config: NodeConfig,
    awaiting: BTreeMap<TxnId, InitiatorSession>,
    outcomes: BTreeMap<TxnId, Outcome>,
    retained_nonces: BTreeMap<TxnId, Vec<FieldElement>>,
}

impl RepositoryNode {
    /// The node's random stream is `seed` on ChaCha stream `repo_id`, so a
    /// node draws the same nonces on every substrate.
    pub fn new(state: RepositoryState, group: Option<Arc<GroupParams>>, seed: u64, config: NodeConfig) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(state.repo_id() as u64);
        Self {
            state,
            group,
            rng,
            config,
            awaiting: BTreeMap::new(),
            outcomes: BTreeMap::new(),
            retained_nonces: BTreeMap::new(),
        }
    }

    pub fn address(&self) -> Address {
        self.state.x().value()
    }

    pub fn state(&self) -> &RepositoryState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut RepositoryState {
        &mut self.state
    }

    pub fn into_state(self) -> RepositoryState {
        self.state
    }

    pub fn group(&self) -> Option<&Arc<GroupParams>> {
        self.group.as_ref()
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn set_options(&mut self, options: QueryOptions) {
        self.config.options = options;
    }

    /// Nonces kept for `txn` when erasure is disabled.
    pub fn retained_nonces(&self, txn: &TxnId) -> Option<&[FieldElement]> {
        self.retained_nonces.get(txn).map(Vec::as_slice)
    }

    /// All retained nonce vectors, by transaction.
    pub fn retained(&self) -> &BTreeMap<TxnId, Vec<FieldElement>> {
        &self.retained_nonces
    }

    pub fn awaiting(&self) -> &BTreeMap<TxnId, InitiatorSession> {
        &self.awaiting
    }

    pub fn take_outcome(&mut self, txn: &TxnId) -> Option<Outcome> {
        self.outcomes.remove(txn)
    }

    pub fn outcome(&self, txn: &TxnId) -> Option<&Outcome> {
        self.outcomes.get(txn)
    }

    fn group_for(&self, scheme: Scheme) -> Result<&Arc<GroupParams>> {
        debug_assert_eq!(scheme, Scheme::Csif);
        self.group
            .as_ref()
            .ok_or_else(|| Error::InvalidGroup("this repository has no group configured".into()))
    }

    /// Starts a query with this repository as `R_1`.
    pub fn start_query(
        &mut self,
        value: FieldElement,
        chain: &[FieldElement],
        scheme: Scheme,
    ) -> Result<(TxnId, Vec<Outgoing>)> {
        let options = self.config.options;
        let init = match scheme {
            Scheme::Sif => sif::initiate_query(&self.state, value, chain, options, &mut self.rng)?,
            Scheme::Csif => {
                let group = self.group_for(scheme)?.clone();
                csif::csif_initiate(&self.state, &group, value, chain, options, &mut self.rng)?
            }
        };
        let txn = init.session.txn;
        let mut session = init.session;
        if let Some(nonces) = session.retained_nonces.take() {
            self.retained_nonces.insert(txn, nonces);
        }
        self.awaiting.insert(txn, session);
        Ok((
            txn,
            vec![
                Outgoing {
                    to: init.next_hop.value(),
                    message: Message::Chain(init.chain_message),
                },
                Outgoing {
                    to: init.last_hop.value(),
                    message: Message::QueryTerm(init.query_term),
                },
            ],
        ))
    }

    /// Gives up on a query this node initiated.
    pub fn abandon(&mut self, txn: &TxnId) {
        self.awaiting.remove(txn);
    }

    /// Drops half-sessions older than the configured timeout.
    pub fn expire(&mut self, now: u64) {
        for txn in self.state.expire_sessions(now, self.config.session_timeout) {
            debug!("repository {}: half-session {txn} expired", self.state.repo_id());
        }
    }

    /// Processes one delivered message. Protocol errors are answered with an
    /// error message to the sender.
    pub fn handle(&mut self, from: Address, message: Message, now: u64) -> Vec<Outgoing> {
        self.expire(now);
        let txn = message.txn();
        match self.dispatch(from, message, now) {
            Ok(out) => out,
            Err(e) => {
                warn!("repository {}: {e}", self.state.repo_id());
                vec![Outgoing {
                    to: from,
                    message: Message::Error(error_message(txn, &e)),
                }]
            }
        }
    }

    fn dispatch(&mut self, from: Address, message: Message, now: u64) -> Result<Vec<Outgoing>> {
        match message {
            Message::Chain(msg) => self.on_chain(msg, now),
            Message::QueryTerm(msg) => self.on_query_term(msg, now),
            Message::Result(msg) => {
                self.on_result(from, msg);
                Ok(vec![])
            }
            Message::Insert(msg) => {
                self.state.apply_insert(&msg)?;
                Ok(vec![])
            }
            Message::Error(msg) => {
                if self.awaiting.remove(&msg.txn).is_some() {
                    self.outcomes.insert(msg.txn, Outcome::Failed(msg));
                } else {
                    warn!("repository {}: error from {from}: {}", self.state.repo_id(), msg.detail);
                }
                Ok(vec![])
            }
        }
    }

    fn on_chain(&mut self, msg: ChainMessage, now: u64) -> Result<Vec<Outgoing>> {
        let is_last = msg.chain.last() == Some(&self.state.x());
        if !is_last {
            let (next, forwarded) = match msg.gamma.scheme() {
                Scheme::Sif => sif::continue_chain(&self.state, &msg)?,
                Scheme::Csif => {
                    let group = self.group_for(Scheme::Csif)?.clone();
                    csif::csif_continue(&self.state, &group, &msg)?
                }
            };
            return Ok(vec![Outgoing {
                to: next.value(),
                message: Message::Chain(forwarded),
            }]);
        }
        // validate before buffering so a bad chain fails fast
        sif::validate_chain(self.state.policy(), &msg.chain)?;
        match self.state.take_or_buffer(msg.txn, PendingHalf::Chain(msg.clone()), now) {
            Some(PendingHalf::QueryTerm(q)) => self.finish(msg, q),
            _ => Ok(vec![]),
        }
    }

    fn on_query_term(&mut self, msg: QueryTermMessage, now: u64) -> Result<Vec<Outgoing>> {
        match self.state.take_or_buffer(msg.txn, PendingHalf::QueryTerm(msg.clone()), now) {
            Some(PendingHalf::Chain(c)) => self.finish(c, msg),
            _ => Ok(vec![]),
        }
    }

    fn finish(&mut self, chain: ChainMessage, qterm: QueryTermMessage) -> Result<Vec<Outgoing>> {
        if chain.gamma.scheme() != qterm.terms.scheme() {
            return Err(Error::InvalidChain("chain and query term use different schemes".into()));
        }
        let result = match chain.gamma.scheme() {
            Scheme::Sif => sif::finalize_query(&self.state, &chain, &qterm)?,
            Scheme::Csif => {
                let group = self.group_for(Scheme::Csif)?.clone();
                csif::csif_finalize(&self.state, &group, &chain, &qterm)?
            }
        };
        Ok(vec![Outgoing {
            to: chain.chain[0].value(),
            message: Message::Result(result),
        }])
    }

    fn on_result(&mut self, from: Address, msg: ResultMessage) {
        match self.awaiting.get(&msg.txn) {
            Some(session) if session.chain.last().map(|x| x.value()) == Some(from) => {
                self.awaiting.remove(&msg.txn);
                self.outcomes.insert(msg.txn, Outcome::Answered(msg.result));
            }
            Some(_) => warn!("repository {}: result for {} from unexpected sender {from}", self.state.repo_id(), msg.txn),
            None => debug!("repository {}: unsolicited result for {}", self.state.repo_id(), msg.txn),
        }
    }
}

/// Maps a local error onto the wire error message.
pub fn error_message(txn: TxnId, e: &Error) -> ErrorMessage {
    let code = match e {
        Error::Alignment(_) => ErrorCode::Alignment,
        Error::InvalidChain(_) | Error::DegenerateBasis(_) => ErrorCode::InvalidChain,
        Error::Routing(_) => ErrorCode::Routing,
        Error::ParamsMismatch { .. } | Error::OutOfRange { .. } => ErrorCode::ParamsMismatch,
        Error::Decode { .. } | Error::NotInSubgroup => ErrorCode::Decode,
        Error::InvalidGroup(_) => ErrorCode::Unsupported,
        Error::Timeout(_) => ErrorCode::Timeout,
        _ => ErrorCode::Internal,
    };
    ErrorMessage {
        txn,
        code,
        detail: e.to_string(),
    }
}

/// Converts a received error message back into a local error.
pub fn remote_error(msg: &ErrorMessage) -> Error {
    match msg.code {
        ErrorCode::Alignment => Error::Alignment(msg.detail.clone()),
        ErrorCode::Timeout => Error::Timeout(msg.detail.clone()),
        code => Error::Remote {
            code: code as u16,
            detail: msg.detail.clone(),
        },
    }
}
