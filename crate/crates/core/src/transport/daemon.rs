//! Socket substrate: one repository per TCP listener.
//!
//! Protocol frames travel inside a small envelope that names the sender and
//! the field modulus, so a daemon can refuse traffic from a differently
//! configured archive before decoding any payload:
//!
//! ```text
//! u32 length (bytes after this field)
//! "SIFD"
//! u8  kind      1=protocol 2=query request 3=status request 4=ack 5=status reply
//! u64 field modulus
//! u64 sender address (0 = client)
//! payload
//! ```
//!
//! * protocol: one complete wire frame
//! * query request: `u8 scheme`, `u64 value`, `u16 count`, 8-byte coordinates
//! * status reply: `u64 element count`, `u32 N`, `u32 k`
//!
//! Every envelope gets exactly one reply on the same connection. A daemon
//! replies before forwarding anything, so a chain of hops never holds more
//! than one connection waiting at a time. Messages for peers go out over
//! persistent per-peer connections. A peer that cannot be reached is logged
//! and the message dropped; the initiator then times out.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::Rng;

use crate::archive::{aligned_count, prepare_insert};
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldParams};
use crate::message::{Message, Scheme, TxnId};
use crate::node::{error_message, remote_error, Address, Outcome, Outgoing, RepositoryNode, CLIENT};
use crate::shamir::SharingPolicy;
use crate::transport::wire::{self, read_frame, WireContext};
use crate::transport::{state_file, timeout_from_env};

pub const ENVELOPE_MAGIC: [u8; 4] = *b"SIFD";
pub const ENVELOPE_HEADER_LEN: usize = 4 + 4 + 1 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Protocol = 1,
    QueryRequest = 2,
    StatusRequest = 3,
    Ack = 4,
    StatusReply = 5,
}

impl Kind {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => Kind::Protocol,
            2 => Kind::QueryRequest,
            3 => Kind::StatusRequest,
            4 => Kind::Ack,
            5 => Kind::StatusReply,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub kind: Kind,
    pub modulus: u64,
    pub sender: Address,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(kind: Kind, modulus: u64, sender: Address, payload: Vec<u8>) -> Self {
        Self {
            kind,
            modulus,
            sender,
            payload,
        }
    }

    pub fn protocol(modulus: u64, sender: Address, msg: &Message) -> Self {
        Self::new(Kind::Protocol, modulus, sender, wire::encode(msg))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&((ENVELOPE_HEADER_LEN - 4 + self.payload.len()) as u32).to_be_bytes());
        out.extend_from_slice(&ENVELOPE_MAGIC);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.modulus.to_be_bytes());
        out.extend_from_slice(&self.sender.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses a frame as returned by [`read_frame`].
    pub fn decode(frame: &[u8]) -> Result<Self> {
        let bad = |offset: usize, reason: &str| Error::Decode {
            offset,
            reason: reason.to_string(),
        };
        if frame.len() < ENVELOPE_HEADER_LEN {
            return Err(bad(frame.len(), "truncated envelope"));
        }
        if frame[4..8] != ENVELOPE_MAGIC {
            return Err(bad(4, "bad envelope magic"));
        }
        let kind = Kind::from_u8(frame[8]).ok_or_else(|| bad(8, "unknown envelope kind"))?;
        Ok(Self {
            kind,
            modulus: u64::from_be_bytes(frame[9..17].try_into().expect("8 bytes")),
            sender: u64::from_be_bytes(frame[17..25].try_into().expect("8 bytes")),
            payload: frame[ENVELOPE_HEADER_LEN..].to_vec(),
        })
    }
}

fn encode_query_request(scheme: Scheme, value: FieldElement, chain: &[FieldElement]) -> Vec<u8> {
    let mut out = Vec::with_capacity(11 + 8 * chain.len());
    out.push(scheme as u8);
    out.extend_from_slice(&value.to_be_bytes());
    out.extend_from_slice(&(chain.len() as u16).to_be_bytes());
    for x in chain {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out
}

fn decode_query_request(payload: &[u8], field: FieldParams) -> Result<(Scheme, FieldElement, Vec<FieldElement>)> {
    let bad = |offset: usize, reason: &str| Error::Decode {
        offset: ENVELOPE_HEADER_LEN + offset,
        reason: reason.to_string(),
    };
    if payload.len() < 11 {
        return Err(bad(payload.len(), "truncated query request"));
    }
    let scheme = match payload[0] {
        0 => Scheme::Sif,
        1 => Scheme::Csif,
        _ => return Err(bad(0, "unknown scheme")),
    };
    let element = |o: usize| -> Result<FieldElement> {
        field
            .from_be_bytes(payload[o..o + 8].try_into().expect("8 bytes"))
            .map_err(|e| bad(o, &e.to_string()))
    };
    let value = element(1)?;
    let n = u16::from_be_bytes([payload[9], payload[10]]) as usize;
    if payload.len() != 11 + 8 * n {
        return Err(bad(payload.len(), "query request length does not match chain count"));
    }
    let chain = (0..n).map(|i| element(11 + 8 * i)).collect::<Result<_>>()?;
    Ok((scheme, value, chain))
}

/// Repository size report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Status {
    pub address: Address,
    pub element_count: u64,
    pub n: u32,
    pub k: u32,
}

/// Orders frames received by all daemons in this process.
static RECEIVE_SEQ: AtomicU64 = AtomicU64::new(0);

/// One protocol frame received by a daemon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Received {
    /// Process-wide arrival order.
    pub seq: u64,
    pub from: Address,
    pub to: Address,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct DaemonOptions {
    /// Query and half-session timeout.
    pub timeout: Duration,
    /// Rewritten after every accepted insert.
    pub state_path: Option<PathBuf>,
    /// Record every received protocol frame.
    pub record: bool,
}

impl Default for DaemonOptions {
    fn default() -> Self {
        Self {
            timeout: timeout_from_env(),
            state_path: None,
            record: false,
        }
    }
}

struct Shared {
    me: Address,
    ctx: WireContext,
    node: Mutex<RepositoryNode>,
    changed: Condvar,
    peers: BTreeMap<Address, SocketAddr>,
    links: Mutex<BTreeMap<Address, Arc<Mutex<Option<TcpStream>>>>>,
    open: Mutex<Vec<TcpStream>>,
    transcript: Mutex<Vec<Received>>,
    options: DaemonOptions,
    started: Instant,
    stopped: AtomicBool,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Shared {
    fn modulus(&self) -> u64 {
        self.ctx.field.modulus()
    }

    fn now(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn error_reply(&self, txn: TxnId, e: &Error) -> Envelope {
        Envelope::protocol(self.modulus(), self.me, &Message::Error(error_message(txn, e)))
    }

    /// Handles one envelope; returns the reply and messages to forward
    /// after replying.
    fn process(&self, frame: &[u8]) -> (Envelope, Vec<Outgoing>) {
        let env = match Envelope::decode(frame) {
            Ok(env) => env,
            Err(e) => return (self.error_reply(TxnId::default(), &e), vec![]),
        };
        if env.modulus != self.modulus() {
            let e = Error::ParamsMismatch {
                left: self.modulus(),
                right: env.modulus,
            };
            return (self.error_reply(TxnId::default(), &e), vec![]);
        }
        match env.kind {
            Kind::Protocol => self.on_protocol(env.sender, &env.payload),
            Kind::QueryRequest => (self.on_query_request(&env.payload), vec![]),
            Kind::StatusRequest => {
                let node = lock(&self.node);
                let state = node.state();
                let mut payload = Vec::with_capacity(16);
                payload.extend_from_slice(&(state.element_count() as u64).to_be_bytes());
                payload.extend_from_slice(&(state.policy().n() as u32).to_be_bytes());
                payload.extend_from_slice(&(state.policy().k() as u32).to_be_bytes());
                (Envelope::new(Kind::StatusReply, self.modulus(), self.me, payload), vec![])
            }
            Kind::Ack | Kind::StatusReply => {
                let e = Error::Decode {
                    offset: 8,
                    reason: "reply kind sent as a request".into(),
                };
                (self.error_reply(TxnId::default(), &e), vec![])
            }
        }
    }

    fn on_protocol(&self, from: Address, payload: &[u8]) -> (Envelope, Vec<Outgoing>) {
        let msg = match wire::decode(payload, &self.ctx) {
            Ok(m) => m,
            Err(e) => return (self.error_reply(TxnId::default(), &e), vec![]),
        };
        if self.options.record {
            lock(&self.transcript).push(Received {
                seq: RECEIVE_SEQ.fetch_add(1, Ordering::SeqCst),
                from,
                to: self.me,
                bytes: payload.to_vec(),
            });
        }
        let is_insert = matches!(msg, Message::Insert(_));
        let mut outgoing = {
            let mut node = lock(&self.node);
            let out = node.handle(from, msg, self.now());
            let failed = out.iter().any(|o| matches!(o.message, Message::Error(_)));
            if is_insert && !failed {
                if let Some(path) = &self.options.state_path {
                    if let Err(e) = state_file::save(node.state(), path) {
                        warn!("repository {}: saving {}: {e}", self.me, path.display());
                    }
                }
            }
            out
        };
        self.changed.notify_all();
        let reply = match outgoing.iter().position(|o| o.to == CLIENT) {
            Some(i) => {
                let o = outgoing.remove(i);
                Envelope::protocol(self.modulus(), self.me, &o.message)
            }
            None => Envelope::new(Kind::Ack, self.modulus(), self.me, vec![]),
        };
        (reply, outgoing)
    }

    fn on_query_request(&self, payload: &[u8]) -> Envelope {
        let (scheme, value, chain) = match decode_query_request(payload, self.ctx.field) {
            Ok(r) => r,
            Err(e) => return self.error_reply(TxnId::default(), &e),
        };
        let started = lock(&self.node).start_query(value, &chain, scheme);
        let (txn, outgoing) = match started {
            Ok(s) => s,
            Err(e) => return self.error_reply(TxnId::default(), &e),
        };
        for out in outgoing {
            self.send(out);
        }
        let deadline = Instant::now() + self.options.timeout;
        let mut node = lock(&self.node);
        loop {
            if let Some(outcome) = node.take_outcome(&txn) {
                let msg = match outcome {
                    Outcome::Answered(result) => Message::Result(crate::message::ResultMessage { txn, result }),
                    Outcome::Failed(e) => Message::Error(e),
                };
                return Envelope::protocol(self.modulus(), self.me, &msg);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() || self.stopped.load(Ordering::SeqCst) {
                node.abandon(&txn);
                let e = Error::Timeout(format!("query {txn} unanswered after {:?}", self.options.timeout));
                return self.error_reply(txn, &e);
            }
            node = self
                .changed
                .wait_timeout(node, left)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    fn link(&self, to: Address) -> Arc<Mutex<Option<TcpStream>>> {
        lock(&self.links).entry(to).or_default().clone()
    }

    /// Forwards one message to a peer and processes an error reply, if any.
    fn send(&self, out: Outgoing) {
        let Some(addr) = self.peers.get(&out.to).copied() else {
            warn!("repository {}: no endpoint for address {}", self.me, out.to);
            return;
        };
        let frame = Envelope::protocol(self.modulus(), self.me, &out.message).encode();
        let link = self.link(out.to);
        let mut slot = lock(&link);
        let mut reply = None;
        for attempt in 0..2 {
            if slot.is_none() {
                match connect(addr, self.options.timeout) {
                    Ok(s) => {
                        if let Ok(clone) = s.try_clone() {
                            lock(&self.open).push(clone);
                        }
                        *slot = Some(s);
                    }
                    Err(e) => {
                        debug!("repository {}: connect {addr}: {e}", self.me);
                        break;
                    }
                }
            }
            let stream = slot.as_mut().expect("connected above");
            match exchange(stream, &frame) {
                Ok(r) => {
                    reply = Some(r);
                    break;
                }
                Err(e) => {
                    debug!("repository {}: send to {addr} (attempt {attempt}): {e}", self.me);
                    *slot = None;
                }
            }
        }
        drop(slot);
        let Some(reply) = reply else {
            warn!("repository {}: dropped message for unreachable peer {}", self.me, out.to);
            return;
        };
        if reply.kind == Kind::Protocol {
            if let Ok(msg @ Message::Error(_)) = wire::decode(&reply.payload, &self.ctx) {
                lock(&self.node).handle(out.to, msg, self.now());
                self.changed.notify_all();
            }
        }
    }

    fn serve_connection(self: Arc<Self>, mut stream: TcpStream) {
        let _ = stream.set_nodelay(true);
        while let Ok(frame) = read_frame(&mut stream) {
            if self.stopped.load(Ordering::SeqCst) {
                break;
            }
            let (reply, outgoing) = self.process(&frame);
            if stream.write_all(&reply.encode()).is_err() {
                break;
            }
            for out in outgoing {
                self.send(out);
            }
        }
    }
}

fn connect(addr: SocketAddr, timeout: Duration) -> std::io::Result<TcpStream> {
    let s = TcpStream::connect_timeout(&addr, timeout)?;
    s.set_nodelay(true)?;
    s.set_read_timeout(Some(timeout))?;
    Ok(s)
}

fn exchange(stream: &mut TcpStream, frame: &[u8]) -> Result<Envelope> {
    stream.write_all(frame)?;
    Envelope::decode(&read_frame(stream)?)
}

/// A listening socket bound before peers are known, so a set of daemons
/// can be wired together on ephemeral ports.
pub struct BoundDaemon {
    listener: TcpListener,
}

impl BoundDaemon {
    pub fn bind(addr: SocketAddr) -> Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Starts serving `node`. `peers` maps every repository address to its
    /// endpoint.
    pub fn start(
        self,
        node: RepositoryNode,
        peers: BTreeMap<Address, SocketAddr>,
        options: DaemonOptions,
    ) -> Result<DaemonHandle> {
        let local = self.listener.local_addr()?;
        let group = node.group().cloned();
        let shared = Arc::new(Shared {
            me: node.address(),
            ctx: WireContext::new(node.state().policy().field(), group),
            node: Mutex::new(node),
            changed: Condvar::new(),
            peers,
            links: Mutex::new(BTreeMap::new()),
            open: Mutex::new(Vec::new()),
            transcript: Mutex::new(Vec::new()),
            options,
            started: Instant::now(),
            stopped: AtomicBool::new(false),
        });
        info!("repository {} listening on {local}", shared.me);
        let accept_shared = shared.clone();
        let listener = self.listener;
        let accept = thread::Builder::new()
            .name(format!("sif-accept-{}", shared.me))
            .spawn(move || {
                for stream in listener.incoming() {
                    if accept_shared.stopped.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    if let Ok(clone) = stream.try_clone() {
                        lock(&accept_shared.open).push(clone);
                    }
                    let conn_shared = accept_shared.clone();
                    let _ = thread::Builder::new()
                        .name(format!("sif-conn-{}", accept_shared.me))
                        .spawn(move || conn_shared.serve_connection(stream));
                }
            })?;
        Ok(DaemonHandle {
            shared,
            local,
            accept: Some(accept),
        })
    }
}

pub struct DaemonHandle {
    shared: Arc<Shared>,
    local: SocketAddr,
    accept: Option<JoinHandle<()>>,
}

impl DaemonHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    pub fn address(&self) -> Address {
        self.shared.me
    }

    /// Protocol frames received so far, when recording is enabled.
    pub fn transcript(&self) -> Vec<Received> {
        lock(&self.shared.transcript).clone()
    }

    pub fn clear_transcript(&self) {
        lock(&self.shared.transcript).clear();
    }

    /// Runs `f` with the repository node locked.
    pub fn with_node<T>(&self, f: impl FnOnce(&mut RepositoryNode) -> T) -> T {
        f(&mut lock(&self.shared.node))
    }

    /// Stops accepting, closes every connection and waits for the accept
    /// loop to exit.
    pub fn shutdown(&mut self) {
        if self.shared.stopped.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = TcpStream::connect_timeout(&self.local, Duration::from_secs(1));
        for s in lock(&self.shared.open).drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        self.shared.changed.notify_all();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        info!("repository {} stopped", self.shared.me);
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for DaemonHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Talks to daemons as the inserting or querying user. Connections are
/// kept open between requests.
#[derive(Clone, Debug)]
pub struct Client {
    endpoints: BTreeMap<Address, SocketAddr>,
    field: FieldParams,
    timeout: Duration,
    idle: Arc<Mutex<BTreeMap<Address, TcpStream>>>,
}

impl Client {
    pub fn new(endpoints: BTreeMap<Address, SocketAddr>, field: FieldParams, timeout: Duration) -> Self {
        Self {
            endpoints,
            field,
            timeout,
            idle: Arc::default(),
        }
    }

    fn endpoint(&self, addr: Address) -> Result<SocketAddr> {
        self.endpoints
            .get(&addr)
            .copied()
            .ok_or_else(|| Error::Routing(format!("no endpoint for repository address {addr}")))
    }

    /// Sends one envelope and returns the reply. A stale kept-open
    /// connection is replaced once; a fresh connection's failure is final.
    pub fn request(&self, addr: Address, env: &Envelope) -> Result<Envelope> {
        let endpoint = self.endpoint(addr)?;
        let frame = env.encode();
        let idle = lock(&self.idle).remove(&addr);
        if let Some(mut stream) = idle {
            if let Ok(reply) = exchange(&mut stream, &frame) {
                lock(&self.idle).insert(addr, stream);
                return Ok(reply);
            }
        }
        let mut stream = connect(endpoint, self.timeout)?;
        // the daemon itself waits up to its own timeout for a query answer
        stream.set_read_timeout(Some(self.timeout * 2 + Duration::from_secs(1)))?;
        let reply = exchange(&mut stream, &frame)?;
        lock(&self.idle).insert(addr, stream);
        Ok(reply)
    }

    /// Closes kept-open connections.
    pub fn disconnect(&self) {
        lock(&self.idle).clear();
    }

    fn protocol_reply(&self, reply: Envelope) -> Result<Message> {
        if reply.kind != Kind::Protocol {
            return Err(Error::Decode {
                offset: 8,
                reason: format!("expected a protocol reply, got {:?}", reply.kind),
            });
        }
        wire::decode(&reply.payload, &WireContext::new(self.field, None))
    }

    /// Asks `chain[0]` to run a query and returns its answer.
    pub fn query(&self, value: FieldElement, chain: &[FieldElement], scheme: Scheme) -> Result<bool> {
        let initiator = chain
            .first()
            .ok_or_else(|| Error::InvalidChain("empty chain".into()))?
            .value();
        let env = Envelope::new(
            Kind::QueryRequest,
            self.field.modulus(),
            CLIENT,
            encode_query_request(scheme, value, chain),
        );
        match self.protocol_reply(self.request(initiator, &env)?)? {
            Message::Result(r) => Ok(r.result),
            Message::Error(e) => Err(remote_error(&e)),
            other => Err(Error::Decode {
                offset: 0,
                reason: format!("unexpected reply type {}", other.msg_type()),
            }),
        }
    }

    pub fn status(&self, addr: Address) -> Result<Status> {
        let env = Envelope::new(Kind::StatusRequest, self.field.modulus(), CLIENT, vec![]);
        let reply = self.request(addr, &env)?;
        match reply.kind {
            Kind::StatusReply if reply.payload.len() == 16 => Ok(Status {
                address: reply.sender,
                element_count: u64::from_be_bytes(reply.payload[..8].try_into().expect("8 bytes")),
                n: u32::from_be_bytes(reply.payload[8..12].try_into().expect("4 bytes")),
                k: u32::from_be_bytes(reply.payload[12..].try_into().expect("4 bytes")),
            }),
            _ => match self.protocol_reply(reply)? {
                Message::Error(e) => Err(remote_error(&e)),
                _ => Err(Error::Decode {
                    offset: 0,
                    reason: "malformed status reply".into(),
                }),
            },
        }
    }

    /// Inserts `element` into every repository of `policy`. All
    /// repositories must be reachable and aligned before any share is sent.
    pub fn insert<R: Rng + ?Sized>(&self, policy: &SharingPolicy, element: FieldElement, rng: &mut R) -> Result<()> {
        let mut counts = Vec::with_capacity(policy.n());
        for (i, x) in policy.x_coords().iter().enumerate() {
            let status = self.status(x.value()).map_err(|e| {
                Error::Alignment(format!(
                    "repository {} unreachable ({e}); insert aborted before any share was sent",
                    i + 1
                ))
            })?;
            counts.push((i + 1, status.element_count as usize));
        }
        let index = aligned_count(counts)? as u64;
        for (repo_id, msg) in prepare_insert(policy, index, element, rng)? {
            let addr = policy.x_coords()[repo_id - 1].value();
            let env = Envelope::protocol(self.field.modulus(), CLIENT, &Message::Insert(msg));
            let reply = self.request(addr, &env)?;
            if reply.kind == Kind::Protocol {
                if let Message::Error(e) = self.protocol_reply(reply)? {
                    return Err(remote_error(&e));
                }
            }
        }
        Ok(())
    }
}

/// Every repository of an archive served on loopback ephemeral ports.
pub struct LocalCluster {
    pub daemons: Vec<DaemonHandle>,
    pub client: Client,
    pub policy: SharingPolicy,
}

impl LocalCluster {
    /// Node random streams match a [`SimNetwork`](super::sim::SimNetwork)
    /// built from the same archive and seed.
    pub fn spawn(
        archive: crate::archive::Archive,
        group: Option<Arc<crate::group::GroupParams>>,
        seed: u64,
        options: DaemonOptions,
    ) -> Result<Self> {
        let policy = archive.policy().clone();
        let config = crate::node::NodeConfig {
            session_timeout: options.timeout.as_millis() as u64,
            ..Default::default()
        };
        let states = archive.into_repositories();
        let mut bound = Vec::with_capacity(states.len());
        let mut endpoints = BTreeMap::new();
        for state in &states {
            let b = BoundDaemon::bind(SocketAddr::from(([127, 0, 0, 1], 0)))?;
            endpoints.insert(state.x().value(), b.local_addr()?);
            bound.push(b);
        }
        let daemons = states
            .into_iter()
            .zip(bound)
            .map(|(state, b)| {
                let node = RepositoryNode::new(state, group.clone(), seed, config);
                b.start(node, endpoints.clone(), options.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            client: Client::new(endpoints, policy.field(), options.timeout),
            daemons,
            policy,
        })
    }

    pub fn daemon(&self, addr: Address) -> Option<&DaemonHandle> {
        self.daemons.iter().find(|d| d.address() == addr)
    }

    pub fn daemon_mut(&mut self, addr: Address) -> Option<&mut DaemonHandle> {
        self.daemons.iter_mut().find(|d| d.address() == addr)
    }

    pub fn shutdown(&mut self) {
        for d in &mut self.daemons {
            d.shutdown();
        }
    }
}
