//! Protocol messages exchanged between repositories and clients.

use std::fmt;

use rand::Rng;

use crate::field::FieldElement;
use crate::group::GroupElement;

/// Unique 16-byte transaction identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TxnId(pub [u8; 16]);

impl TxnId {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill(&mut bytes);
        Self(bytes)
    }
}

impl fmt::Debug for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxnId({self})")
    }
}

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Which query protocol a payload belongs to. Doubles as the wire variant tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Field-valued vectors blinded additively.
    Sif = 0,
    /// Group-valued vectors with the sums carried in the exponent.
    Csif = 1,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Sif => "sif",
            Scheme::Csif => "csif",
        })
    }
}

/// A blinded vector: one component per archived element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Blinded {
    Field(Vec<FieldElement>),
    Group(Vec<GroupElement>),
}

impl Blinded {
    pub fn len(&self) -> usize {
        match self {
            Blinded::Field(v) => v.len(),
            Blinded::Group(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Blinded::Field(_) => Scheme::Sif,
            Blinded::Group(_) => Scheme::Csif,
        }
    }
}

/// `m_i = [q, gamma_i, S]`: the running interpolation and the ordered chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMessage {
    pub txn: TxnId,
    pub gamma: Blinded,
    pub chain: Vec<FieldElement>,
}

/// `m_Q = [q, Q]`: the nonced query term sent straight to the last repository.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryTermMessage {
    pub txn: TxnId,
    pub terms: Blinded,
}

/// `m_r = [q, true|false]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResultMessage {
    pub txn: TxnId,
    pub result: bool,
}

/// One share of a newly inserted element, stamped with its row index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertMessage {
    pub txn: TxnId,
    pub index: u64,
    pub share: FieldElement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    Alignment = 1,
    InvalidChain = 2,
    Routing = 3,
    ParamsMismatch = 4,
    Decode = 5,
    Unsupported = 6,
    Timeout = 7,
    Internal = 8,
}

impl ErrorCode {
    pub fn from_u16(code: u16) -> Option<Self> {
        Some(match code {
            1 => Self::Alignment,
            2 => Self::InvalidChain,
            3 => Self::Routing,
            4 => Self::ParamsMismatch,
            5 => Self::Decode,
            6 => Self::Unsupported,
            7 => Self::Timeout,
            8 => Self::Internal,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMessage {
    pub txn: TxnId,
    pub code: ErrorCode,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Chain(ChainMessage),
    QueryTerm(QueryTermMessage),
    Result(ResultMessage),
    Insert(InsertMessage),
    Error(ErrorMessage),
}

impl Message {
    pub fn txn(&self) -> TxnId {
        match self {
            Message::Chain(m) => m.txn,
            Message::QueryTerm(m) => m.txn,
            Message::Result(m) => m.txn,
            Message::Insert(m) => m.txn,
            Message::Error(m) => m.txn,
        }
    }

    /// Wire type byte.
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Chain(_) => 1,
            Message::QueryTerm(_) => 2,
            Message::Result(_) => 3,
            Message::Insert(_) => 4,
            Message::Error(_) => 5,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Message::Chain(m) => m.gamma.scheme(),
            Message::QueryTerm(m) => m.terms.scheme(),
            _ => Scheme::Sif,
        }
    }

    /// Same message with the transaction id zeroed, for transcript comparison.
    pub fn without_txn(&self) -> Message {
        let mut m = self.clone();
        let zero = TxnId::default();
        match &mut m {
            Message::Chain(x) => x.txn = zero,
            Message::QueryTerm(x) => x.txn = zero,
            Message::Result(x) => x.txn = zero,
            Message::Insert(x) => x.txn = zero,
            Message::Error(x) => x.txn = zero,
        }
        m
    }
}
