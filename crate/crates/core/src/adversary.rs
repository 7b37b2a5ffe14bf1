//! Threat-model harness.
//!
//! Honest-but-curious analysis works on wire transcripts: every value a
//! repository legitimately sees is tallied per position and tested for
//! uniformity. Collusion drivers pool the state and transcripts of a set of
//! repositories and try to extract plaintext (SIF) or test candidates
//! against exponentiated elements (cSIF).
//!
//! Everything here runs on [`SimNetwork`]; nothing in this module is used by
//! honest nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::archive::RepositoryState;
use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldParams};
use crate::group::{exp_generator, GroupElement, GroupParams};
use crate::message::{Blinded, ChainMessage, Message, TxnId};
use crate::node::Address;
use crate::shamir::lagrange_weight_at_zero;
use crate::transport::sim::{SimNetwork, TapEvent};

/// Fewest distinct queries the uniformity report accepts.
pub const MIN_QUERIES: usize = 10_000;

/// Positions with a p-value below this are flagged.
pub const SIGNIFICANCE: f64 = 1e-3;

/// Largest modulus the uniformity report will bin.
pub const MAX_BINNED_MODULUS: u64 = 1 << 16;

#[derive(Clone, Debug)]
pub struct TranscriptEvent {
    pub sender: Address,
    pub receiver: Address,
    pub message: Message,
    pub step: u64,
}

/// Append-only record of delivered messages.
#[derive(Clone, Debug, Default)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tap(tap: &[TapEvent]) -> Self {
        let mut t = Self::new();
        t.extend_from_tap(tap);
        t
    }

    pub fn extend_from_tap(&mut self, tap: &[TapEvent]) {
        self.events.extend(tap.iter().map(|e| TranscriptEvent {
            sender: e.from,
            receiver: e.to,
            message: e.message.clone(),
            step: e.step,
        }));
    }

    pub fn push(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn transactions(&self) -> BTreeSet<TxnId> {
        self.events.iter().map(|e| e.message.txn()).collect()
    }

    /// Events seen by any of `members`, as sender or receiver.
    pub fn seen_by(&self, members: &BTreeSet<Address>) -> Self {
        Self {
            events: self
                .events
                .iter()
                .filter(|e| members.contains(&e.sender) || members.contains(&e.receiver))
                .cloned()
                .collect(),
        }
    }

    fn chain_messages(&self, txn: TxnId) -> impl Iterator<Item = (&TranscriptEvent, &ChainMessage)> {
        self.events.iter().filter_map(move |e| match &e.message {
            Message::Chain(m) if m.txn == txn => Some((e, m)),
            _ => None,
        })
    }

    fn query_term(&self, txn: TxnId) -> Option<&Blinded> {
        self.events.iter().find_map(|e| match &e.message {
            Message::QueryTerm(m) if m.txn == txn => Some(&m.terms),
            _ => None,
        })
    }

    /// Field values at one wire position, one per matching event.
    pub fn field_samples(&self, sender: Address, receiver: Address, msg_type: u8, component: usize) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| e.sender == sender && e.receiver == receiver && e.message.msg_type() == msg_type)
            .filter_map(|e| blinded_of(&e.message))
            .filter_map(|b| match b {
                Blinded::Field(v) => v.get(component).map(|x| x.value()),
                Blinded::Group(_) => None,
            })
            .collect()
    }
}

fn blinded_of(msg: &Message) -> Option<&Blinded> {
    match msg {
        Message::Chain(m) => Some(&m.gamma),
        Message::QueryTerm(m) => Some(&m.terms),
        _ => None,
    }
}

/// A wire position: one component of the vector carried on one link by
/// one message type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub sender: Address,
    pub receiver: Address,
    pub msg_type: u8,
    pub component: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionStat {
    pub position: Position,
    pub samples: u64,
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformityReport {
    pub modulus: u64,
    pub queries: usize,
    pub significance: f64,
    pub positions: Vec<PositionStat>,
}

impl UniformityReport {
    pub fn flagged(&self) -> impl Iterator<Item = &PositionStat> {
        self.positions.iter().filter(|p| p.flagged)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let flagged = self.flagged().count();
        let _ = writeln!(
            out,
            "uniformity over GF({}): {} queries, {} positions, {} flagged at {}",
            self.modulus,
            self.queries,
            self.positions.len(),
            flagged,
            self.significance
        );
        for p in &self.positions {
            let _ = writeln!(
                out,
                "{} -> {} type {} component {}: chi2 = {:.3} (dof {}), p = {:.4}{}",
                p.position.sender,
                p.position.receiver,
                p.position.msg_type,
                p.position.component,
                p.statistic,
                p.dof,
                p.p_value,
                if p.flagged { "  FLAGGED" } else { "" }
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sender,receiver,msg_type,component,samples,chi2,dof,p_value,flagged\n");
        for p in &self.positions {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{},{:.6e},{}",
                p.position.sender,
                p.position.receiver,
                p.position.msg_type,
                p.position.component,
                p.samples,
                p.statistic,
                p.dof,
                p.p_value,
                p.flagged
            );
        }
        out
    }
}

/// Pearson statistic of `counts` against the uniform distribution, with
/// its upper-tail probability.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    (statistic, dof, upper_tail(statistic, dof))
}

fn upper_tail(statistic: f64, dof: f64) -> f64 {
    if dof < 1.0 {
        return 1.0;
    }
    ChiSquared::new(dof).expect("positive degrees of freedom").sf(statistic)
}

/// Tallies every field-valued wire position in `transcript` and tests each
/// for uniformity over `field`.
pub fn hbc_uniformity_report(transcript: &Transcript, field: FieldParams) -> Result<UniformityReport> {
    let queries = transcript.transactions().len();
    if queries < MIN_QUERIES {
        return Err(Error::InsufficientSamples {
            needed: MIN_QUERIES,
            got: queries,
        });
    }
    let p = field.modulus();
    if p > MAX_BINNED_MODULUS {
        return Err(Error::AttackPrecondition(format!(
            "uniformity binning needs a toy field, modulus {p} exceeds {MAX_BINNED_MODULUS}"
        )));
    }
    let mut counts: BTreeMap<Position, Vec<u64>> = BTreeMap::new();
    for e in transcript.events() {
        let Some(Blinded::Field(values)) = blinded_of(&e.message) else {
            continue;
        };
        for (component, v) in values.iter().enumerate() {
            let position = Position {
                sender: e.sender,
                receiver: e.receiver,
                msg_type: e.message.msg_type(),
                component,
            };
            counts.entry(position).or_insert_with(|| vec![0; p as usize])[v.value() as usize] += 1;
        }
    }
    let positions = counts
        .into_iter()
        .map(|(position, c)| {
            let (statistic, dof, p_value) = chi_square_uniform(&c);
            PositionStat {
                position,
                samples: c.iter().sum(),
                statistic,
                dof,
                p_value,
                flagged: p_value < SIGNIFICANCE,
            }
        })
        .collect();
    Ok(UniformityReport {
        modulus: p,
        queries,
        significance: SIGNIFICANCE,
        positions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneityTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Chi-square test that two samples over `0..categories` come from the
/// same distribution. Empty categories are dropped.
pub fn homogeneity_test(a: &[u64], b: &[u64], categories: u64) -> Result<HomogeneityTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: 0,
        });
    }
    let tally = |s: &[u64]| {
        let mut c = vec![0u64; categories as usize];
        for &v in s {
            c[v as usize] += 1;
        }
        c
    };
    let (ca, cb) = (tally(a), tally(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&x, &y) in ca.iter().zip(&cb) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        let ea = col * na / (na + nb);
        let eb = col * nb / (na + nb);
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let dof = used.saturating_sub(1) as f64;
    Ok(HomogeneityTest {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    })
}

/// Pooled knowledge of a set of colluding repositories.
#[derive(Clone, Debug)]
pub struct CollusionCoalition {
    members: BTreeSet<Address>,
    states: BTreeMap<Address, RepositoryState>,
    retained: BTreeMap<(Address, TxnId), Vec<FieldElement>>,
    transcript: Transcript,
}

impl CollusionCoalition {
    /// Pools the state, retained nonces and tapped traffic of `members`.
    /// The network's tap must have been enabled before the queries of
    /// interest ran.
    pub fn pool(sim: &SimNetwork, members: impl IntoIterator<Item = Address>) -> Result<Self> {
        let members: BTreeSet<Address> = members.into_iter().collect();
        let mut states = BTreeMap::new();
        let mut retained = BTreeMap::new();
        for &m in &members {
            let node = sim
                .node(m)
                .ok_or_else(|| Error::Routing(format!("no repository at address {m}")))?;
            states.insert(m, node.state().clone());
            for (txn, nonces) in node.retained() {
                retained.insert((m, *txn), nonces.clone());
            }
        }
        let transcript = Transcript::from_tap(sim.tap()).seen_by(&members);
        Ok(Self {
            members,
            states,
            retained,
            transcript,
        })
    }

    pub fn members(&self) -> &BTreeSet<Address> {
        &self.members
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn states(&self) -> &BTreeMap<Address, RepositoryState> {
        &self.states
    }

    fn chain_of(&self, txn: TxnId) -> Result<Vec<FieldElement>> {
        self.transcript
            .chain_messages(txn)
            .next()
            .map(|(_, m)| m.chain.clone())
            .ok_or_else(|| Error::AttackPrecondition(format!("no chain message of {txn} was observed")))
    }

    fn initiator_nonces(&self, txn: TxnId, chain: &[FieldElement]) -> Result<&[FieldElement]> {
        let r1 = chain[0].value();
        if !self.members.contains(&r1) {
            return Err(Error::AttackPrecondition(format!("initiator {r1} is not in the coalition")));
        }
        self.retained
            .get(&(r1, txn))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::AttackPrecondition(format!("initiator {r1} erased the nonces of {txn}")))
    }

    /// `gamma_k`, completed from what the last hop received and its own
    /// shares, if it is a member.
    fn final_gamma(&self, txn: TxnId, chain: &[FieldElement]) -> Result<Option<Blinded>> {
        let k = chain.len();
        let rk = chain[k - 1].value();
        let Some(state) = self.states.get(&rk) else {
            return Ok(None);
        };
        let Some(received) = self
            .transcript
            .chain_messages(txn)
            .find(|(e, _)| e.receiver == rk)
            .map(|(_, m)| &m.gamma)
        else {
            return Ok(None);
        };
        let w = lagrange_weight_at_zero(chain, k - 1)?;
        let shares = state.shares().entries();
        if shares.len() != received.len() {
            return Err(Error::Alignment("last hop share count differs from gamma".into()));
        }
        Ok(Some(match received {
            Blinded::Field(v) => Blinded::Field(v.iter().zip(shares).map(|(&g, &s)| g + w * s).collect()),
            Blinded::Group(v) => {
                let group = v.first().map(|g| g.params().clone());
                let mut out = Vec::with_capacity(v.len());
                for (g, &s) in v.iter().zip(shares) {
                    let group = group.as_ref().expect("non-empty vector");
                    out.push(g.mul(&exp_generator(group, w * s)?)?);
                }
                Blinded::Group(out)
            }
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CollusionOutcome {
    /// The archive in plaintext, in index order.
    Recovered(Vec<FieldElement>),
    /// Without the last hop only nonce-blinded partial sums are visible.
    BlindedPartials(Vec<Vec<FieldElement>>),
}

impl CollusionOutcome {
    pub fn recovered(&self) -> &[FieldElement] {
        match self {
            CollusionOutcome::Recovered(v) => v,
            CollusionOutcome::BlindedPartials(_) => &[],
        }
    }
}

fn field_vector(b: &Blinded) -> Result<&[FieldElement]> {
    match b {
        Blinded::Field(v) => Ok(v),
        Blinded::Group(_) => Err(Error::AttackPrecondition("transaction is not a SIF query".into())),
    }
}

fn group_vector(b: &Blinded) -> Result<&[GroupElement]> {
    match b {
        Blinded::Group(v) => Ok(v),
        Blinded::Field(_) => Err(Error::AttackPrecondition("transaction is not a cSIF query".into())),
    }
}

fn observed_partials(coalition: &CollusionCoalition, txn: TxnId) -> Result<Vec<Vec<FieldElement>>> {
    coalition
        .transcript
        .chain_messages(txn)
        .map(|(_, m)| field_vector(&m.gamma).map(<[_]>::to_vec))
        .collect()
}

/// `R_1` keeps `nu`, `R_k` sees `gamma_k = d + nu`; together they read the
/// archive as `gamma_k - nu`.
pub fn sif_collusion_attack(coalition: &CollusionCoalition, txn: TxnId) -> Result<CollusionOutcome> {
    let chain = coalition.chain_of(txn)?;
    let nonces = coalition.initiator_nonces(txn, &chain)?;
    let Some(gamma) = coalition.final_gamma(txn, &chain)? else {
        return Ok(CollusionOutcome::BlindedPartials(observed_partials(coalition, txn)?));
    };
    let gamma = field_vector(&gamma)?;
    Ok(CollusionOutcome::Recovered(
        gamma.iter().zip(nonces).map(|(&g, &n)| g - n).collect(),
    ))
}

/// The same recovery without retained nonces: `R_k` holds `Q = Z + nu` and
/// the initiator knows the `Z` it asked about, so `nu = Q - Z`.
pub fn sif_collusion_attack_from_query(
    coalition: &CollusionCoalition,
    txn: TxnId,
    queried: FieldElement,
) -> Result<CollusionOutcome> {
    let chain = coalition.chain_of(txn)?;
    let r1 = chain[0].value();
    if !coalition.members.contains(&r1) {
        return Err(Error::AttackPrecondition(format!("initiator {r1} is not in the coalition")));
    }
    let Some(gamma) = coalition.final_gamma(txn, &chain)? else {
        return Ok(CollusionOutcome::BlindedPartials(observed_partials(coalition, txn)?));
    };
    let q = coalition
        .transcript
        .query_term(txn)
        .ok_or_else(|| Error::AttackPrecondition(format!("no query term of {txn} was observed")))?;
    let (gamma, q) = (field_vector(&gamma)?, field_vector(q)?);
    Ok(CollusionOutcome::Recovered(
        gamma.iter().zip(q).map(|(&g, &qv)| g - (qv - queried)).collect(),
    ))
}

/// A candidate whose `g^c` equals the coalition's `g^(d_l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeHit {
    pub index: usize,
    pub candidate: FieldElement,
}

/// Strips the nonces from `gamma_k` to get `g^(d_l)` and tests every
/// candidate against it. Share values stay hidden behind the discrete log;
/// the archive elements do not, if their domain is small enough to list.
pub fn csif_collusion_probe(
    coalition: &CollusionCoalition,
    group: &Arc<GroupParams>,
    txn: TxnId,
    candidates: &[FieldElement],
) -> Result<Vec<ProbeHit>> {
    let chain = coalition.chain_of(txn)?;
    let nonces = coalition.initiator_nonces(txn, &chain)?;
    let gamma = coalition.final_gamma(txn, &chain)?.ok_or_else(|| {
        Error::AttackPrecondition(format!("last hop {} is not in the coalition", chain[chain.len() - 1]))
    })?;
    let gamma = group_vector(&gamma)?;
    let mut table: BTreeMap<Vec<u8>, Vec<FieldElement>> = BTreeMap::new();
    for &c in candidates {
        table.entry(exp_generator(group, c)?.to_bytes_be()).or_default().push(c);
    }
    let mut hits = Vec::new();
    for (index, (g, &n)) in gamma.iter().zip(nonces).enumerate() {
        let unblinded = g.mul(&exp_generator(group, -n)?)?;
        for &candidate in table.get(&unblinded.to_bytes_be()).into_iter().flatten() {
            hits.push(ProbeHit { index, candidate });
        }
    }
    Ok(hits)
}

pub fn probe_hits_csv(hits: &[ProbeHit]) -> String {
    let mut out = String::from("index,candidate\n");
    for h in hits {
        let _ = writeln!(out, "{},{}", h.index, h.candidate.value());
    }
    out
}

/// Where a pooled value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    /// A member's own share.
    MemberShare(Address),
    /// A nonce kept by a member initiator.
    RetainedNonce(Address),
    /// A vector component sent on the wire by this repository.
    Wire(Address),
    /// `(gamma_j - gamma_{j-1}) / w_j` for a non-member hop `j` whose input
    /// and output the coalition both saw.
    Derived(Address),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExposedShare {
    pub repository: Address,
    pub index: usize,
    pub provenance: Provenance,
}

/// What a coalition holds, by domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub field_items: usize,
    pub group_items: usize,
    /// Field-domain values that originate at a non-member.
    pub foreign_field_items: usize,
    /// Non-member raw shares found among the pooled field values.
    pub exposed_shares: Vec<ExposedShare>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.foreign_field_items == 0 && self.exposed_shares.is_empty()
    }

    pub fn to_text(&self) -> String {
        format!(
            "field values: {} ({} from non-members), group values: {}, exposed non-member shares: {}\n",
            self.field_items,
            self.foreign_field_items,
            self.group_items,
            self.exposed_shares.len()
        )
    }
}

/// Collects every value the coalition holds, tagged with its origin, and
/// checks it against the raw shares of every non-member in `all_states`.
///
/// Matching is by value, so the field must be large enough that chance
/// collisions are negligible; toy fields are refused.
pub fn pooled_state_audit(coalition: &CollusionCoalition, all_states: &[RepositoryState]) -> Result<AuditReport> {
    let field = all_states
        .first()
        .map(|s| s.policy().field())
        .ok_or_else(|| Error::AttackPrecondition("no repositories to audit".into()))?;
    if field.modulus() < 1 << 32 {
        return Err(Error::AttackPrecondition(format!(
            "value matching needs a field of at least 2^32, got {}",
            field.modulus()
        )));
    }
    let mut pooled: Vec<(FieldElement, Provenance)> = Vec::new();
    let mut report = AuditReport::default();
    for (&m, state) in &coalition.states {
        pooled.extend(state.shares().entries().iter().map(|&s| (s, Provenance::MemberShare(m))));
    }
    for (&(m, _), nonces) in &coalition.retained {
        pooled.extend(nonces.iter().map(|&n| (n, Provenance::RetainedNonce(m))));
    }
    for e in coalition.transcript.events() {
        match blinded_of(&e.message) {
            Some(Blinded::Field(v)) => pooled.extend(v.iter().map(|&x| (x, Provenance::Wire(e.sender)))),
            Some(Blinded::Group(v)) => report.group_items += v.len(),
            None => {}
        }
    }
    for txn in coalition.transcript.transactions() {
        derive_hops(coalition, txn, &mut pooled, &mut report)?;
    }
    report.field_items = pooled.len();
    report.foreign_field_items = pooled
        .iter()
        .filter(|(_, p)| match p {
            Provenance::Wire(a) | Provenance::Derived(a) => !coalition.members.contains(a),
            _ => false,
        })
        .count();
    let mut by_value: BTreeMap<u64, Vec<Provenance>> = BTreeMap::new();
    for (v, p) in pooled {
        by_value.entry(v.value()).or_default().push(p);
    }
    for state in all_states {
        let addr = state.x().value();
        if coalition.members.contains(&addr) {
            continue;
        }
        for (index, s) in state.shares().entries().iter().enumerate() {
            if let Some(p) = by_value.get(&s.value()).and_then(|ps| ps.first()) {
                report.exposed_shares.push(ExposedShare {
                    repository: addr,
                    index,
                    provenance: *p,
                });
            }
        }
    }
    Ok(report)
}

/// For each non-member hop bracketed by observed messages, strips the
/// neighbours' contributions: a field value in SIF, a group value in cSIF.
fn derive_hops(
    coalition: &CollusionCoalition,
    txn: TxnId,
    pooled: &mut Vec<(FieldElement, Provenance)>,
    report: &mut AuditReport,
) -> Result<()> {
    let msgs: Vec<(&TranscriptEvent, &ChainMessage)> = coalition.transcript.chain_messages(txn).collect();
    let Some((_, first)) = msgs.first() else {
        return Ok(());
    };
    let chain = &first.chain;
    for (j, x) in chain.iter().enumerate().skip(1).take(chain.len().saturating_sub(2)) {
        let hop = x.value();
        if coalition.members.contains(&hop) {
            continue;
        }
        let input = msgs.iter().find(|(e, _)| e.receiver == hop).map(|(_, m)| &m.gamma);
        let output = msgs.iter().find(|(e, _)| e.sender == hop).map(|(_, m)| &m.gamma);
        let (Some(input), Some(output)) = (input, output) else {
            continue;
        };
        match (input, output) {
            (Blinded::Field(a), Blinded::Field(b)) => {
                let w = lagrange_weight_at_zero(chain, j)?;
                let w_inv = w.inv()?;
                pooled.extend(
                    a.iter()
                        .zip(b)
                        .map(|(&a, &b)| ((b - a) * w_inv, Provenance::Derived(hop))),
                );
            }
            (Blinded::Group(a), Blinded::Group(_)) => report.group_items += a.len(),
            _ => {}
        }
    }
    Ok(())
}
