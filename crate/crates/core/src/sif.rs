//! Serial interpolation membership queries with additive nonce blinding.
//!
//! The initiator `R_1` blinds its weighted shares with a fresh nonce vector
//! and sends the running sum down the chain; the same nonces blind the query
//! term, which goes straight to `R_k`. `R_k` completes the interpolation and
//! compares index by index, so a match happens exactly when some
//! `p_l(0) + nu_l = Z + nu_l`.

use std::collections::HashSet;

use rand::Rng;

use crate::archive::{Archive, RepositoryState};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::message::{Blinded, ChainMessage, QueryTermMessage, ResultMessage, Scheme, TxnId};
use crate::shamir::{lagrange_weight_at_zero, SharingPolicy};

/// How the initiator draws its nonce vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NonceMode {
    #[default]
    Uniform,
    /// All-zero nonces. Negative control for the blinding analysis only.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryOptions {
    /// Forget the nonces once both outgoing messages are built.
    pub erase_nonces: bool,
    pub nonce_mode: NonceMode,
}

impl Default for QueryOptions {
    fn default() -> Self {
        Self {
            erase_nonces: true,
            nonce_mode: NonceMode::Uniform,
        }
    }
}

/// What the initiator keeps while it waits for the result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitiatorSession {
    pub txn: TxnId,
    pub scheme: Scheme,
    pub chain: Vec<FieldElement>,
    /// Present only when erasure is disabled.
    pub retained_nonces: Option<Vec<FieldElement>>,
}

/// The two outgoing messages of a query and where they go.
#[derive(Clone, Debug)]
pub struct Initiation {
    pub chain_message: ChainMessage,
    pub next_hop: FieldElement,
    pub query_term: QueryTermMessage,
    pub last_hop: FieldElement,
    pub session: InitiatorSession,
}

/// Maps 1-based repository ids to their coordinates.
pub fn chain_from_ids(policy: &SharingPolicy, ids: &[usize]) -> Result<Vec<FieldElement>> {
    ids.iter()
        .map(|&id| {
            policy
                .coordinate(id)
                .ok_or_else(|| Error::Routing(format!("unknown repository {id}")))
        })
        .collect()
}

/// Checks that `chain` lists `k` distinct repository coordinates.
pub fn validate_chain(policy: &SharingPolicy, chain: &[FieldElement]) -> Result<()> {
    if chain.len() != policy.k() {
        return Err(Error::InvalidChain(format!(
            "chain has {} repositories, threshold is {}",
            chain.len(),
            policy.k()
        )));
    }
    let mut seen = HashSet::new();
    for &x in chain {
        if policy.repo_id_of(x).is_none() {
            return Err(Error::Routing(format!("coordinate {x} is not a repository")));
        }
        if !seen.insert(x.value()) {
            return Err(Error::InvalidChain(format!("repository at {x} listed twice")));
        }
    }
    Ok(())
}

/// Position of `repo` in `chain` and its Lagrange weight there.
pub(crate) fn chain_role(repo: &RepositoryState, chain: &[FieldElement]) -> Result<(usize, FieldElement)> {
    validate_chain(repo.policy(), chain)?;
    let index = chain
        .iter()
        .position(|&x| x == repo.x())
        .ok_or_else(|| Error::Routing(format!("repository {} is not in the chain", repo.repo_id())))?;
    Ok((index, lagrange_weight_at_zero(chain, index)?))
}

pub(crate) fn check_value(repo: &RepositoryState, value: FieldElement) -> Result<()> {
    if value.params() != repo.policy().field() {
        return Err(Error::ParamsMismatch {
            left: repo.policy().field().modulus(),
            right: value.params().modulus(),
        });
    }
    Ok(())
}

pub(crate) fn draw_nonces<R: Rng + ?Sized>(
    repo: &RepositoryState,
    mode: NonceMode,
    rng: &mut R,
) -> Vec<FieldElement> {
    let field = repo.policy().field();
    match mode {
        NonceMode::Uniform => field.random_vector(rng, repo.element_count()),
        NonceMode::Zero => vec![field.zero(); repo.element_count()],
    }
}

pub(crate) fn initiator_checks(initiator: &RepositoryState, chain: &[FieldElement]) -> Result<FieldElement> {
    let (index, weight) = chain_role(initiator, chain)?;
    if index != 0 {
        return Err(Error::InvalidChain("the initiator must be first in the chain".into()));
    }
    Ok(weight)
}

fn weighted_shares(repo: &RepositoryState, weight: FieldElement) -> impl Iterator<Item = FieldElement> + '_ {
    repo.shares().entries().iter().map(move |&s| weight * s)
}

fn field_vector<'a>(blinded: &'a Blinded, what: &str) -> Result<&'a [FieldElement]> {
    match blinded {
        Blinded::Field(v) => Ok(v),
        Blinded::Group(_) => Err(Error::InvalidChain(format!("{what} carries group elements in a field query"))),
    }
}

fn check_len(repo: &RepositoryState, len: usize) -> Result<()> {
    if len != repo.element_count() {
        return Err(Error::Alignment(format!(
            "vector of length {len} at repository {} holding {} shares",
            repo.repo_id(),
            repo.element_count()
        )));
    }
    Ok(())
}

/// Initiator side: `gamma_1 = w_1 p(x_1) + nu` and `Q = Z + nu`.
pub fn initiate_query<R: Rng + ?Sized>(
    initiator: &RepositoryState,
    value: FieldElement,
    chain: &[FieldElement],
    options: QueryOptions,
    rng: &mut R,
) -> Result<Initiation> {
    initiator_checks(initiator, chain)?;
    let txn = TxnId::random(rng);
    let nonces = draw_nonces(initiator, options.nonce_mode, rng);
    initiate_with_nonces(initiator, value, chain, txn, nonces, options.erase_nonces)
}

/// [`initiate_query`] with a caller-chosen transaction id and nonce vector.
pub fn initiate_with_nonces(
    initiator: &RepositoryState,
    value: FieldElement,
    chain: &[FieldElement],
    txn: TxnId,
    nonces: Vec<FieldElement>,
    erase_nonces: bool,
) -> Result<Initiation> {
    check_value(initiator, value)?;
    let weight = initiator_checks(initiator, chain)?;
    check_len(initiator, nonces.len())?;
    let gamma: Vec<FieldElement> = weighted_shares(initiator, weight)
        .zip(&nonces)
        .map(|(w, &nu)| w.try_add(nu))
        .collect::<Result<_>>()?;
    let terms: Vec<FieldElement> = nonces.iter().map(|&nu| value + nu).collect();
    Ok(Initiation {
        chain_message: ChainMessage {
            txn,
            gamma: Blinded::Field(gamma),
            chain: chain.to_vec(),
        },
        next_hop: chain[1],
        query_term: QueryTermMessage {
            txn,
            terms: Blinded::Field(terms),
        },
        last_hop: chain[chain.len() - 1],
        session: InitiatorSession {
            txn,
            scheme: Scheme::Sif,
            chain: chain.to_vec(),
            retained_nonces: (!erase_nonces).then_some(nonces),
        },
    })
}

/// Middle hop: `gamma_i = w_i p(x_i) + gamma_{i-1}`.
/// Returns the next hop and the forwarded message.
pub fn continue_chain(repo: &RepositoryState, msg: &ChainMessage) -> Result<(FieldElement, ChainMessage)> {
    let (index, weight) = chain_role(repo, &msg.chain)?;
    if index == 0 || index + 1 >= msg.chain.len() {
        return Err(Error::InvalidChain(format!(
            "repository {} is at position {} of {}, not a middle hop",
            repo.repo_id(),
            index + 1,
            msg.chain.len()
        )));
    }
    let incoming = field_vector(&msg.gamma, "chain message")?;
    check_len(repo, incoming.len())?;
    let gamma = weighted_shares(repo, weight)
        .zip(incoming)
        .map(|(w, &g)| w.try_add(g))
        .collect::<Result<_>>()?;
    Ok((
        msg.chain[index + 1],
        ChainMessage {
            txn: msg.txn,
            gamma: Blinded::Field(gamma),
            chain: msg.chain.clone(),
        },
    ))
}

/// Last hop `R_k`: completes the interpolation and compares index by index.
pub fn finalize_query(repo: &RepositoryState, chain: &ChainMessage, qterm: &QueryTermMessage) -> Result<ResultMessage> {
    if chain.txn != qterm.txn {
        return Err(Error::InvalidChain(format!("transaction {} paired with {}", chain.txn, qterm.txn)));
    }
    let (index, weight) = chain_role(repo, &chain.chain)?;
    if index + 1 != chain.chain.len() {
        return Err(Error::InvalidChain(format!("repository {} is not last in the chain", repo.repo_id())));
    }
    let incoming = field_vector(&chain.gamma, "chain message")?;
    let terms = field_vector(&qterm.terms, "query term")?;
    check_len(repo, incoming.len())?;
    check_len(repo, terms.len())?;
    let mut found = false;
    for ((w, &g), &q) in weighted_shares(repo, weight).zip(incoming).zip(terms) {
        found |= w.try_add(g)? == q;
    }
    Ok(ResultMessage {
        txn: chain.txn,
        result: found,
    })
}

/// Runs one query directly over in-memory repository states.
pub fn run_query<R: Rng + ?Sized>(
    archive: &Archive,
    value: FieldElement,
    chain: &[FieldElement],
    options: QueryOptions,
    rng: &mut R,
) -> Result<bool> {
    validate_chain(archive.policy(), chain)?;
    let repo = |x: FieldElement| {
        archive
            .repository_by_coordinate(x)
            .ok_or_else(|| Error::Routing(format!("no repository at {x}")))
    };
    let init = initiate_query(repo(chain[0])?, value, chain, options, rng)?;
    let mut msg = init.chain_message;
    let mut hop = init.next_hop;
    while hop != init.last_hop {
        let (next, forwarded) = continue_chain(repo(hop)?, &msg)?;
        hop = next;
        msg = forwarded;
    }
    Ok(finalize_query(repo(hop)?, &msg, &init.query_term)?.result)
}
