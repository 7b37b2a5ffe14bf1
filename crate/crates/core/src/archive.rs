//! Repository state and the archive lifecycle.
//!
//! Each repository keeps only its coordinate, its column of shares and the
//! sharing policy. Elements are never retained after they are split.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::FieldElement;
pub use crate::message::InsertMessage;
use crate::message::{ChainMessage, QueryTermMessage, TxnId};
use crate::shamir::{split, SharingPolicy};

/// A repository's private column `p(x_r)`: entry `l` is `p_l(x_r)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShareVector(Vec<FieldElement>);

impl ShareVector {
    pub fn new(entries: Vec<FieldElement>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[FieldElement] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Whichever half of a query reached the last repository first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PendingHalf {
    Chain(ChainMessage),
    QueryTerm(QueryTermMessage),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingSession {
    pub arrived_at: u64,
    pub half: PendingHalf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepositoryState {
    repo_id: usize,
    x: FieldElement,
    shares: ShareVector,
    policy: SharingPolicy,
    sessions: BTreeMap<TxnId, PendingSession>,
}

impl RepositoryState {
    pub fn new(repo_id: usize, policy: SharingPolicy) -> Result<Self> {
        Self::with_shares(repo_id, policy, ShareVector::default())
    }

    pub fn with_shares(repo_id: usize, policy: SharingPolicy, shares: ShareVector) -> Result<Self> {
        let x = policy
            .coordinate(repo_id)
            .ok_or_else(|| Error::Routing(format!("repository {repo_id} outside 1..={}", policy.n())))?;
        if let Some(bad) = shares.entries().iter().find(|s| s.params() != policy.field()) {
            return Err(Error::ParamsMismatch {
                left: policy.field().modulus(),
                right: bad.params().modulus(),
            });
        }
        Ok(Self {
            repo_id,
            x,
            shares,
            policy,
            sessions: BTreeMap::new(),
        })
    }

    pub fn repo_id(&self) -> usize {
        self.repo_id
    }

    pub fn x(&self) -> FieldElement {
        self.x
    }

    pub fn shares(&self) -> &ShareVector {
        &self.shares
    }

    pub fn policy(&self) -> &SharingPolicy {
        &self.policy
    }

    pub fn element_count(&self) -> usize {
        self.shares.len()
    }

    /// Appends an inserted share. The index must equal the current length.
    pub fn apply_insert(&mut self, msg: &InsertMessage) -> Result<()> {
        if msg.index != self.shares.len() as u64 {
            return Err(Error::Alignment(format!(
                "repository {} holds {} shares, insert targets index {}",
                self.repo_id,
                self.shares.len(),
                msg.index
            )));
        }
        if msg.share.params() != self.policy.field() {
            return Err(Error::ParamsMismatch {
                left: self.policy.field().modulus(),
                right: msg.share.params().modulus(),
            });
        }
        self.shares.0.push(msg.share);
        Ok(())
    }

    pub fn sessions(&self) -> &BTreeMap<TxnId, PendingSession> {
        &self.sessions
    }

    /// Stores a half-query; a second half for the same txn replaces nothing
    /// and is returned to the caller for pairing instead.
    pub fn take_or_buffer(&mut self, txn: TxnId, half: PendingHalf, now: u64) -> Option<PendingHalf> {
        match self.sessions.remove(&txn) {
            Some(existing) if std::mem::discriminant(&existing.half) != std::mem::discriminant(&half) => {
                Some(existing.half)
            }
            Some(existing) => {
                // duplicate of the same half: keep the first one
                self.sessions.insert(txn, existing);
                None
            }
            None => {
                self.sessions.insert(txn, PendingSession { arrived_at: now, half });
                None
            }
        }
    }

    /// Drops half-sessions older than `timeout`; returns the expired txns.
    pub fn expire_sessions(&mut self, now: u64, timeout: u64) -> Vec<TxnId> {
        let expired: Vec<TxnId> = self
            .sessions
            .iter()
            .filter(|(_, s)| now.saturating_sub(s.arrived_at) > timeout)
            .map(|(t, _)| *t)
            .collect();
        for t in &expired {
            self.sessions.remove(t);
        }
        expired
    }
}

/// The N repositories of one archive.
#[derive(Clone, Debug)]
pub struct Archive {
    policy: SharingPolicy,
    repositories: Vec<RepositoryState>,
}

impl Archive {
    pub fn from_repositories(repositories: Vec<RepositoryState>) -> Result<Self> {
        let Some(first) = repositories.first() else {
            return Err(Error::InvalidPolicy("archive needs at least one repository".into()));
        };
        let policy = first.policy.clone();
        for (i, r) in repositories.iter().enumerate() {
            if r.policy != policy || r.repo_id != i + 1 {
                return Err(Error::InvalidPolicy(format!("repository {} does not match the archive policy", r.repo_id)));
            }
        }
        Ok(Self { policy, repositories })
    }

    pub fn policy(&self) -> &SharingPolicy {
        &self.policy
    }

    pub fn repositories(&self) -> &[RepositoryState] {
        &self.repositories
    }

    pub fn repository(&self, repo_id: usize) -> Option<&RepositoryState> {
        repo_id.checked_sub(1).and_then(|i| self.repositories.get(i))
    }

    pub fn repository_by_coordinate(&self, x: FieldElement) -> Option<&RepositoryState> {
        self.repositories.iter().find(|r| r.x == x)
    }

    pub fn into_repositories(self) -> Vec<RepositoryState> {
        self.repositories
    }

    /// Shared element count, or an alignment error if repositories disagree.
    pub fn element_count(&self) -> Result<usize> {
        aligned_count(self.repositories.iter().map(|r| (r.repo_id, r.element_count())))
    }

    /// Splits `element` and applies one insert message per repository.
    /// Returns the N messages that were delivered.
    pub fn insert<R: Rng + ?Sized>(&mut self, element: FieldElement, rng: &mut R) -> Result<Vec<InsertMessage>> {
        let index = self.element_count()?;
        let messages = prepare_insert(&self.policy, index as u64, element, rng)?;
        for (repo, (_, msg)) in self.repositories.iter_mut().zip(&messages) {
            repo.apply_insert(msg)?;
        }
        Ok(messages.into_iter().map(|(_, m)| m).collect())
    }
}

/// Builds a fresh N-repository archive holding `elements`.
pub fn create_archive<R: Rng + ?Sized>(
    policy: &SharingPolicy,
    elements: &[FieldElement],
    rng: &mut R,
) -> Result<Archive> {
    let mut columns = vec![Vec::with_capacity(elements.len()); policy.n()];
    for &element in elements {
        for (column, share) in columns.iter_mut().zip(split(element, policy, rng)?) {
            column.push(share.y);
        }
    }
    let repositories = columns
        .into_iter()
        .enumerate()
        .map(|(i, column)| RepositoryState::with_shares(i + 1, policy.clone(), ShareVector::new(column)))
        .collect::<Result<Vec<_>>>()?;
    Archive::from_repositories(repositories)
}

/// Splits `element` into `(repo_id, InsertMessage)` pairs for row `index`,
/// all under one transaction id.
pub fn prepare_insert<R: Rng + ?Sized>(
    policy: &SharingPolicy,
    index: u64,
    element: FieldElement,
    rng: &mut R,
) -> Result<Vec<(usize, InsertMessage)>> {
    let txn = TxnId::random(rng);
    let shares = split(element, policy, rng)?;
    Ok(shares
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i + 1, InsertMessage { txn, index, share: s.y }))
        .collect())
}

/// Common count across `(repo_id, count)` pairs.
pub fn aligned_count(counts: impl IntoIterator<Item = (usize, usize)>) -> Result<usize> {
    let mut iter = counts.into_iter();
    let Some((_, first)) = iter.next() else {
        return Ok(0);
    };
    for (id, c) in iter {
        if c != first {
            return Err(Error::Alignment(format!("repository {id} holds {c} shares, expected {first}")));
        }
    }
    Ok(first)
}
