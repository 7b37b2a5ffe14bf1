//! Secret-shared set archive with private membership queries.
//!
//! Elements are split with Shamir sharing across `N` repositories. A
//! membership query walks a chain of `k` repositories that accumulate a
//! nonce-blinded Lagrange interpolation ([`sif`]) or the same sum in the
//! exponent of a prime-order group ([`csif`]). No party ever holds a
//! reassembled element.

pub mod adversary;
pub mod archive;
pub mod csif;
pub mod error;
pub mod field;
pub mod group;
pub mod message;
pub mod node;
pub mod shamir;
pub mod sif;
pub mod transport;

pub use archive::{create_archive, Archive, RepositoryState, ShareVector};
pub use error::{Error, Result};
pub use field::{FieldElement, FieldParams, DEFAULT_MODULUS};
pub use group::{GroupElement, GroupParams};
pub use message::{Message, Scheme, TxnId};
pub use node::{Address, Outcome, RepositoryNode, CLIENT};
pub use shamir::{split, Share, SharingPolicy};
pub use sif::{NonceMode, QueryOptions};
