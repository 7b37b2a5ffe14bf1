//! Deterministic in-process network.
//!
//! Every message is encoded on send and decoded on delivery, so the
//! simulator exercises the same bytes the daemons put on a socket. Links
//! are FIFO per ordered (sender, receiver) pair; the schedule decides which
//! link delivers next.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use log::trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::archive::{prepare_insert, Archive};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::group::GroupParams;
use crate::message::{ErrorMessage, Message, Scheme, TxnId};
use crate::node::{remote_error, Address, NodeConfig, Outcome, RepositoryNode, CLIENT};
use crate::shamir::SharingPolicy;
use crate::sif::QueryOptions;
use crate::transport::wire::{self, WireContext};

/// Which non-empty link delivers next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// Oldest pending message first, across all links.
    Fifo,
    /// A uniformly chosen non-empty link, from a seeded stream.
    Shuffled(u64),
}

/// One delivery as seen by a wire tap.
#[derive(Clone, Debug)]
pub struct TapEvent {
    pub step: u64,
    pub from: Address,
    pub to: Address,
    pub bytes: Vec<u8>,
    pub message: Message,
}

#[derive(Debug)]
struct Pending {
    seq: u64,
    bytes: Vec<u8>,
}

pub struct SimNetwork {
    policy: SharingPolicy,
    ctx: WireContext,
    nodes: BTreeMap<Address, RepositoryNode>,
    links: BTreeMap<(Address, Address), VecDeque<Pending>>,
    schedule: Schedule,
    schedule_rng: ChaCha20Rng,
    seq: u64,
    steps: u64,
    delivered: u64,
    timeout: u64,
    tap: Option<Vec<TapEvent>>,
    client_inbox: Vec<(Address, Message)>,
}

impl SimNetwork {
    /// Builds one node per repository of `archive`. Node random streams are
    /// derived from `seed`, so equal seeds give byte-identical transcripts.
    pub fn new(archive: Archive, group: Option<Arc<GroupParams>>, seed: u64) -> Self {
        Self::with_config(archive, group, seed, NodeConfig::default())
    }

    pub fn with_config(archive: Archive, group: Option<Arc<GroupParams>>, seed: u64, config: NodeConfig) -> Self {
        let policy = archive.policy().clone();
        let nodes = archive
            .into_repositories()
            .into_iter()
            .map(|state| {
                let node = RepositoryNode::new(state, group.clone(), seed, config);
                (node.address(), node)
            })
            .collect();
        Self {
            ctx: WireContext::new(policy.field(), group),
            policy,
            nodes,
            links: BTreeMap::new(),
            schedule: Schedule::Fifo,
            schedule_rng: ChaCha20Rng::seed_from_u64(seed),
            seq: 0,
            steps: 0,
            delivered: 0,
            timeout: config.session_timeout,
            tap: None,
            client_inbox: Vec::new(),
        }
    }

    pub fn set_schedule(&mut self, schedule: Schedule) {
        if let Schedule::Shuffled(seed) = schedule {
            self.schedule_rng = ChaCha20Rng::seed_from_u64(seed);
        }
        self.schedule = schedule;
    }

    /// Starts recording every delivery.
    pub fn enable_tap(&mut self) {
        self.tap.get_or_insert_with(Vec::new);
    }

    pub fn tap(&self) -> &[TapEvent] {
        self.tap.as_deref().unwrap_or(&[])
    }

    pub fn take_tap(&mut self) -> Vec<TapEvent> {
        self.tap.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn policy(&self) -> &SharingPolicy {
        &self.policy
    }

    pub fn group(&self) -> Option<&Arc<GroupParams>> {
        self.ctx.group.as_ref()
    }

    pub fn node(&self, addr: Address) -> Option<&RepositoryNode> {
        self.nodes.get(&addr)
    }

    pub fn node_mut(&mut self, addr: Address) -> Option<&mut RepositoryNode> {
        self.nodes.get_mut(&addr)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &RepositoryNode> {
        self.nodes.values()
    }

    /// Applies query options to every node.
    pub fn set_options(&mut self, options: QueryOptions) {
        for node in self.nodes.values_mut() {
            node.set_options(options);
        }
    }

    /// Total deliveries since construction.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Messages addressed to the client, oldest first.
    pub fn take_client_inbox(&mut self) -> Vec<(Address, Message)> {
        std::mem::take(&mut self.client_inbox)
    }

    pub fn pending(&self) -> usize {
        self.links.values().map(VecDeque::len).sum()
    }

    /// Queues `message` on the link `from → to`.
    pub fn deliver(&mut self, message: &Message, from: Address, to: Address) -> Result<()> {
        if to != CLIENT && !self.nodes.contains_key(&to) {
            return Err(Error::Routing(format!("no repository at address {to}")));
        }
        let bytes = wire::encode(message);
        self.seq += 1;
        self.links.entry((from, to)).or_default().push_back(Pending { seq: self.seq, bytes });
        Ok(())
    }

    fn next_link(&mut self) -> Option<(Address, Address)> {
        let ready = self.links.iter().filter(|(_, q)| !q.is_empty());
        match self.schedule {
            Schedule::Fifo => ready.min_by_key(|(_, q)| q[0].seq).map(|(k, _)| *k),
            Schedule::Shuffled(_) => {
                let keys: Vec<_> = ready.map(|(k, _)| *k).collect();
                if keys.is_empty() {
                    None
                } else {
                    Some(keys[self.schedule_rng.gen_range(0..keys.len())])
                }
            }
        }
    }

    /// Delivers one pending message. Returns `Ok(None)` when idle.
    pub fn step(&mut self) -> Result<Option<(Address, Address, Message)>> {
        let Some((from, to)) = self.next_link() else {
            return Ok(None);
        };
        let pending = self
            .links
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .expect("selected link is non-empty");
        self.steps += 1;
        self.delivered += 1;
        let message = wire::decode(&pending.bytes, &self.ctx)?;
        trace!("step {}: {from} -> {to} type {}", self.steps, message.msg_type());
        if let Some(tap) = self.tap.as_mut() {
            tap.push(TapEvent {
                step: self.steps,
                from,
                to,
                bytes: pending.bytes,
                message: message.clone(),
            });
        }
        if to == CLIENT {
            self.client_inbox.push((from, message.clone()));
            return Ok(Some((from, to, message)));
        }
        let now = self.steps;
        let node = self.nodes.get_mut(&to).expect("destination checked on send");
        let outgoing = node.handle(from, message.clone(), now);
        for out in outgoing {
            self.deliver(&out.message, to, out.to)?;
        }
        Ok(Some((from, to, message)))
    }

    /// Steps until no message is pending or `limit` deliveries have been made.
    pub fn run_until_idle(&mut self, limit: u64) -> Result<u64> {
        let mut n = 0;
        while n < limit && self.step()?.is_some() {
            n += 1;
        }
        Ok(n)
    }

    /// Starts a query at the first repository of `chain` and runs the
    /// network until that repository has an answer.
    pub fn run_query(&mut self, value: FieldElement, chain: &[FieldElement], scheme: Scheme) -> Result<bool> {
        let initiator = chain
            .first()
            .ok_or_else(|| Error::InvalidChain("empty chain".into()))?
            .value();
        let (txn, outgoing) = self
            .nodes
            .get_mut(&initiator)
            .ok_or_else(|| Error::Routing(format!("no repository at address {initiator}")))?
            .start_query(value, chain, scheme)?;
        for out in outgoing {
            self.deliver(&out.message, initiator, out.to)?;
        }
        self.await_outcome(initiator, txn)
    }

    fn await_outcome(&mut self, initiator: Address, txn: TxnId) -> Result<bool> {
        let deadline = self.steps + self.timeout;
        loop {
            if let Some(outcome) = self.nodes.get_mut(&initiator).and_then(|n| n.take_outcome(&txn)) {
                return match outcome {
                    Outcome::Answered(b) => Ok(b),
                    Outcome::Failed(e) => Err(remote_error(&e)),
                };
            }
            if self.steps >= deadline || self.step()?.is_none() {
                if let Some(node) = self.nodes.get_mut(&initiator) {
                    node.abandon(&txn);
                }
                return Err(Error::Timeout(format!("query {txn} unanswered after {} steps", self.timeout)));
            }
        }
    }

    /// Inserts `element` with one message per repository, sent from the
    /// client. Fails if any repository rejects its share.
    pub fn insert<R: Rng + ?Sized>(&mut self, element: FieldElement, rng: &mut R) -> Result<()> {
        let index = self.aligned_count()? as u64;
        let messages = prepare_insert(&self.policy, index, element, rng)?;
        for (repo_id, msg) in messages {
            let addr = self
                .policy
                .coordinate(repo_id)
                .ok_or_else(|| Error::Routing(format!("no repository {repo_id}")))?
                .value();
            self.deliver(&Message::Insert(msg), CLIENT, addr)?;
        }
        self.run_until_idle(self.timeout)?;
        let errors: Vec<ErrorMessage> = self
            .take_client_inbox()
            .into_iter()
            .filter_map(|(_, m)| match m {
                Message::Error(e) => Some(e),
                _ => None,
            })
            .collect();
        match errors.first() {
            Some(e) => Err(remote_error(e)),
            None => Ok(()),
        }
    }

    /// Element count shared by all repositories.
    pub fn aligned_count(&self) -> Result<usize> {
        crate::archive::aligned_count(self.nodes.values().map(|n| (n.state().repo_id(), n.state().element_count())))
    }

    /// Returns the archive held by the nodes, dropping pending traffic.
    pub fn into_archive(self) -> Result<Archive> {
        Archive::from_repositories(self.nodes.into_values().map(RepositoryNode::into_state).collect())
    }
}
