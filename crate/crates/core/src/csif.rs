//! The exponent-carrying query variant.
//!
//! Same chain topology as [`crate::sif`], but every partial sum travels as
//! `g^(...)` in a prime-order subgroup, and repositories combine by
//! component-wise multiplication. Sharing happens over `Z_q`, the exponent
//! field of the group.

use std::sync::Arc;

use rand::Rng;

use crate::archive::{Archive, RepositoryState};
use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::group::{exp_generator, hadamard, GroupElement, GroupParams};
use crate::message::{Blinded, ChainMessage, QueryTermMessage, ResultMessage, Scheme, TxnId};
use crate::sif::{
    chain_role, check_value, draw_nonces, initiator_checks, validate_chain, Initiation, InitiatorSession,
    QueryOptions,
};

fn check_group(repo: &RepositoryState, group: &GroupParams) -> Result<()> {
    if repo.policy().field() != group.field() {
        return Err(Error::ParamsMismatch {
            left: repo.policy().field().modulus(),
            right: group.field().modulus(),
        });
    }
    Ok(())
}

fn group_vector<'a>(blinded: &'a Blinded, group: &Arc<GroupParams>, what: &str) -> Result<&'a [GroupElement]> {
    match blinded {
        Blinded::Group(v) => {
            if v.iter().any(|e| e.params() != group) {
                return Err(Error::InvalidGroup(format!("{what} uses a different group")));
            }
            Ok(v)
        }
        Blinded::Field(_) => Err(Error::InvalidChain(format!("{what} carries field elements in a group query"))),
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

/// `g^(w_i p(x_i))` for every share of `repo`.
fn exponentiated_shares(repo: &RepositoryState, group: &Arc<GroupParams>, weight: FieldElement) -> Result<Vec<GroupElement>> {
    repo.shares()
        .entries()
        .iter()
        .map(|&s| exp_generator(group, weight * s))
        .collect()
}

/// Initiator side: `gamma_1 = g^(w_1 p(x_1) + nu)` and `Q = g^(Z + nu)`.
pub fn csif_initiate<R: Rng + ?Sized>(
    initiator: &RepositoryState,
    group: &Arc<GroupParams>,
    value: FieldElement,
    chain: &[FieldElement],
    options: QueryOptions,
    rng: &mut R,
) -> Result<Initiation> {
    check_group(initiator, group)?;
    initiator_checks(initiator, chain)?;
    let txn = TxnId::random(rng);
    let nonces = draw_nonces(initiator, options.nonce_mode, rng);
    csif_initiate_with_nonces(initiator, group, value, chain, txn, nonces, options.erase_nonces)
}

pub fn csif_initiate_with_nonces(
    initiator: &RepositoryState,
    group: &Arc<GroupParams>,
    value: FieldElement,
    chain: &[FieldElement],
    txn: TxnId,
    nonces: Vec<FieldElement>,
    erase_nonces: bool,
) -> Result<Initiation> {
    check_group(initiator, group)?;
    check_value(initiator, value)?;
    let weight = initiator_checks(initiator, chain)?;
    check_len(initiator, nonces.len())?;
    let gamma = initiator
        .shares()
        .entries()
        .iter()
        .zip(&nonces)
        .map(|(&s, &nu)| exp_generator(group, weight * s + nu))
        .collect::<Result<Vec<_>>>()?;
    let terms = nonces
        .iter()
        .map(|&nu| exp_generator(group, value + nu))
        .collect::<Result<Vec<_>>>()?;
    Ok(Initiation {
        chain_message: ChainMessage {
            txn,
            gamma: Blinded::Group(gamma),
            chain: chain.to_vec(),
        },
        next_hop: chain[1],
        query_term: QueryTermMessage {
            txn,
            terms: Blinded::Group(terms),
        },
        last_hop: chain[chain.len() - 1],
        session: InitiatorSession {
            txn,
            scheme: Scheme::Csif,
            chain: chain.to_vec(),
            retained_nonces: (!erase_nonces).then_some(nonces),
        },
    })
}

/// Middle hop: `gamma_i = gamma_{i-1} ⊙ g^(w_i p(x_i))`.
pub fn csif_continue(
    repo: &RepositoryState,
    group: &Arc<GroupParams>,
    msg: &ChainMessage,
) -> Result<(FieldElement, ChainMessage)> {
    check_group(repo, group)?;
    let (index, weight) = chain_role(repo, &msg.chain)?;
    if index == 0 || index + 1 >= msg.chain.len() {
        return Err(Error::InvalidChain(format!(
            "repository {} is at position {} of {}, not a middle hop",
            repo.repo_id(),
            index + 1,
            msg.chain.len()
        )));
    }
    let incoming = group_vector(&msg.gamma, group, "chain message")?;
    check_len(repo, incoming.len())?;
    let gamma = hadamard(incoming, &exponentiated_shares(repo, group, weight)?)?;
    Ok((
        msg.chain[index + 1],
        ChainMessage {
            txn: msg.txn,
            gamma: Blinded::Group(gamma),
            chain: msg.chain.clone(),
        },
    ))
}

/// Last hop: final multiplication and index-aligned comparison with `Q`.
pub fn csif_finalize(
    repo: &RepositoryState,
    group: &Arc<GroupParams>,
    chain: &ChainMessage,
    qterm: &QueryTermMessage,
) -> Result<ResultMessage> {
    check_group(repo, group)?;
    if chain.txn != qterm.txn {
        return Err(Error::InvalidChain(format!("transaction {} paired with {}", chain.txn, qterm.txn)));
    }
    let (index, weight) = chain_role(repo, &chain.chain)?;
    if index + 1 != chain.chain.len() {
        return Err(Error::InvalidChain(format!("repository {} is not last in the chain", repo.repo_id())));
    }
    let incoming = group_vector(&chain.gamma, group, "chain message")?;
    let terms = group_vector(&qterm.terms, group, "query term")?;
    check_len(repo, incoming.len())?;
    check_len(repo, terms.len())?;
    let gamma = hadamard(incoming, &exponentiated_shares(repo, group, weight)?)?;
    Ok(ResultMessage {
        txn: chain.txn,
        result: gamma.iter().zip(terms).any(|(g, q)| g == q),
    })
}

/// Runs one group query directly over in-memory repository states.
pub fn run_query<R: Rng + ?Sized>(
    archive: &Archive,
    group: &Arc<GroupParams>,
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
    let init = csif_initiate(repo(chain[0])?, group, value, chain, options, rng)?;
    let mut msg = init.chain_message;
    let mut hop = init.next_hop;
    while hop != init.last_hop {
        let (next, forwarded) = csif_continue(repo(hop)?, group, &msg)?;
        hop = next;
        msg = forwarded;
    }
    Ok(csif_finalize(repo(hop)?, group, &msg, &init.query_term)?.result)
}
