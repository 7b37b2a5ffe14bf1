//! Bit-exact frame format for protocol messages.
//!
//! ```text
//! u32 frame length (bytes after this field)
//! "SIF1"
//! u8  type      1=chain 2=query-term 3=result 4=insert 5=error
//! [16] txn
//! u8  variant   0=field vectors 1=group vectors
//! body
//! ```
//!
//! Bodies, all integers big-endian:
//!
//! * chain: `u32 count`, elements, `u16 chain length`, 8-byte coordinates
//! * query-term: `u32 count`, elements
//! * result: `u8` 0 or 1
//! * insert: `u64 index`, 8-byte share
//! * error: `u16 code`, `u32 length`, UTF-8 detail
//!
//! Field elements are 8 bytes. Group elements are a `u16` byte length
//! followed by the big-endian magnitude.

use std::io::{self, Read};
use std::sync::Arc;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldParams};
use crate::group::{GroupElement, GroupParams};
use crate::message::{
    Blinded, ChainMessage, ErrorCode, ErrorMessage, InsertMessage, Message, QueryTermMessage, ResultMessage, TxnId,
};

pub const MAGIC: [u8; 4] = *b"SIF1";

/// Length prefix, magic, type, txn and variant.
pub const HEADER_LEN: usize = 4 + 4 + 1 + 16 + 1;

/// Largest frame accepted from a stream.
pub const MAX_FRAME_LEN: usize = 1 << 30;

/// What a receiver needs to validate payload values.
#[derive(Clone, Debug)]
pub struct WireContext {
    pub field: FieldParams,
    pub group: Option<Arc<GroupParams>>,
}

impl WireContext {
    pub fn new(field: FieldParams, group: Option<Arc<GroupParams>>) -> Self {
        Self { field, group }
    }
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&MAGIC);
    out.push(msg.msg_type());
    out.extend_from_slice(&msg.txn().0);
    out.push(msg.scheme() as u8);
    match msg {
        Message::Chain(m) => {
            put_blinded(&mut out, &m.gamma);
            out.extend_from_slice(&(m.chain.len() as u16).to_be_bytes());
            for x in &m.chain {
                out.extend_from_slice(&x.to_be_bytes());
            }
        }
        Message::QueryTerm(m) => put_blinded(&mut out, &m.terms),
        Message::Result(m) => out.push(u8::from(m.result)),
        Message::Insert(m) => {
            out.extend_from_slice(&m.index.to_be_bytes());
            out.extend_from_slice(&m.share.to_be_bytes());
        }
        Message::Error(m) => {
            out.extend_from_slice(&(m.code as u16).to_be_bytes());
            out.extend_from_slice(&(m.detail.len() as u32).to_be_bytes());
            out.extend_from_slice(m.detail.as_bytes());
        }
    }
    let len = (out.len() - 4) as u32;
    out[..4].copy_from_slice(&len.to_be_bytes());
    out
}

fn put_blinded(out: &mut Vec<u8>, blinded: &Blinded) {
    out.extend_from_slice(&(blinded.len() as u32).to_be_bytes());
    match blinded {
        Blinded::Field(v) => {
            for e in v {
                out.extend_from_slice(&e.to_be_bytes());
            }
        }
        Blinded::Group(v) => {
            for e in v {
                let bytes = e.to_bytes_be();
                out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
                out.extend_from_slice(&bytes);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Decode {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.fail(format!("truncated: need {n} bytes, {} left", self.buf.len() - self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn field(&mut self, field: FieldParams) -> Result<FieldElement> {
        let at = self.pos;
        let raw = self.array()?;
        field.from_be_bytes(raw).map_err(|e| Error::Decode {
            offset: at,
            reason: e.to_string(),
        })
    }

    fn count(&mut self, min_item: usize) -> Result<usize> {
        let count = self.u32()? as usize;
        if count.saturating_mul(min_item) > self.remaining() {
            return self.fail(format!("count {count} exceeds remaining frame"));
        }
        Ok(count)
    }

    fn blinded(&mut self, variant: u8, ctx: &WireContext) -> Result<Blinded> {
        match variant {
            0 => {
                let count = self.count(8)?;
                (0..count)
                    .map(|_| self.field(ctx.field))
                    .collect::<Result<_>>()
                    .map(Blinded::Field)
            }
            1 => {
                let Some(group) = &ctx.group else {
                    return self.fail("group payload but no group configured");
                };
                let count = self.count(2)?;
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    let at = self.pos;
                    let len = self.u16()? as usize;
                    let bytes = self.take(len)?;
                    let e = GroupElement::new(BigUint::from_bytes_be(bytes), group).map_err(|e| Error::Decode {
                        offset: at,
                        reason: e.to_string(),
                    })?;
                    out.push(e);
                }
                Ok(Blinded::Group(out))
            }
            other => self.fail(format!("unknown variant {other}")),
        }
    }
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn decode(bytes: &[u8], ctx: &WireContext) -> Result<Message> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let len = r.u32()? as usize;
    if len != r.remaining() {
        return r.fail(format!("frame length {len} but {} bytes follow", r.remaining()));
    }
    if r.array::<4>()? != MAGIC {
        r.pos -= 4;
        return r.fail("bad magic");
    }
    let msg_type = r.u8()?;
    let txn = TxnId(r.array()?);
    let variant = r.u8()?;
    if !matches!(msg_type, 1 | 2) && variant != 0 {
        r.pos -= 1;
        return r.fail(format!("variant {variant} not allowed for type {msg_type}"));
    }
    let msg = match msg_type {
        1 => {
            let gamma = r.blinded(variant, ctx)?;
            let n = r.u16()? as usize;
            let chain = (0..n).map(|_| r.field(ctx.field)).collect::<Result<_>>()?;
            Message::Chain(ChainMessage { txn, gamma, chain })
        }
        2 => Message::QueryTerm(QueryTermMessage {
            txn,
            terms: r.blinded(variant, ctx)?,
        }),
        3 => {
            let result = match r.u8()? {
                0 => false,
                1 => true,
                b => {
                    r.pos -= 1;
                    return r.fail(format!("invalid boolean {b}"));
                }
            };
            Message::Result(ResultMessage { txn, result })
        }
        4 => {
            let index = r.u64()?;
            let share = r.field(ctx.field)?;
            Message::Insert(InsertMessage { txn, index, share })
        }
        5 => {
            let raw = r.u16()?;
            let Some(code) = ErrorCode::from_u16(raw) else {
                r.pos -= 2;
                return r.fail(format!("unknown error code {raw}"));
            };
            let n = r.u32()? as usize;
            let at = r.pos;
            let detail = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::Decode {
                    offset: at,
                    reason: "detail is not UTF-8".into(),
                })?
                .to_owned();
            Message::Error(ErrorMessage { txn, code, detail })
        }
        other => {
            r.pos = 8;
            return r.fail(format!("unknown message type {other}"));
        }
    };
    if r.remaining() != 0 {
        return r.fail(format!("{} trailing bytes", r.remaining()));
    }
    Ok(msg)
}

/// Reads one length-prefixed frame, returning it with its prefix.
pub fn read_frame<R: Read>(reader: &mut R) -> io::Result<Vec<u8>> {
    let mut prefix = [0u8; 4];
    reader.read_exact(&mut prefix)?;
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes")));
    }
    let mut frame = vec![0u8; 4 + len];
    frame[..4].copy_from_slice(&prefix);
    reader.read_exact(&mut frame[4..])?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> WireContext {
        WireContext::new(FieldParams::default(), Some(GroupParams::toy()))
    }

    fn toy_ctx() -> WireContext {
        WireContext::new(GroupParams::toy().field(), Some(GroupParams::toy()))
    }

    #[test]
    fn chain_size_law() {
        let f = FieldParams::default();
        for (d, k) in [(0usize, 2usize), (5, 3), (100, 7)] {
            let msg = Message::Chain(ChainMessage {
                txn: TxnId([9; 16]),
                gamma: Blinded::Field(vec![f.one(); d]),
                chain: (1..=k as u64).map(|x| f.reduce(x)).collect(),
            });
            assert_eq!(encode(&msg).len(), 26 + 4 + 8 * d + 2 + 8 * k);
        }
    }

    #[test]
    fn empty_vector_round_trip() {
        let msg = Message::QueryTerm(QueryTermMessage {
            txn: TxnId([1; 16]),
            terms: Blinded::Field(vec![]),
        });
        let bytes = encode(&msg);
        assert_eq!(bytes.len(), HEADER_LEN + 4);
        assert_eq!(&bytes[HEADER_LEN..], &[0, 0, 0, 0]);
        assert_eq!(decode(&bytes, &ctx()).unwrap(), msg);
    }

    #[test]
    fn header_layout() {
        let msg = Message::Result(ResultMessage {
            txn: TxnId([0xab; 16]),
            result: true,
        });
        let bytes = encode(&msg);
        assert_eq!(&bytes[..4], &23u32.to_be_bytes());
        assert_eq!(&bytes[4..8], b"SIF1");
        assert_eq!(bytes[8], 3);
        assert_eq!(&bytes[9..25], &[0xab; 16]);
        assert_eq!(bytes[25], 0);
        assert_eq!(bytes[26], 1);
    }

    #[test]
    fn truncated_frames_never_decode() {
        let f = FieldParams::default();
        let msg = Message::Chain(ChainMessage {
            txn: TxnId([2; 16]),
            gamma: Blinded::Field(vec![f.reduce(5), f.reduce(6)]),
            chain: vec![f.reduce(1), f.reduce(2)],
        });
        let bytes = encode(&msg);
        for cut in 0..bytes.len() {
            assert!(matches!(decode(&bytes[..cut], &ctx()), Err(Error::Decode { .. })), "cut {cut}");
        }
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(decode(&trailing, &ctx()).is_err());
        // a consistent length prefix with an extra byte is still rejected
        let len = (trailing.len() - 4) as u32;
        trailing[..4].copy_from_slice(&len.to_be_bytes());
        assert!(matches!(decode(&trailing, &ctx()), Err(Error::Decode { .. })));
    }

    #[test]
    fn rejects_bad_magic_type_and_values() {
        let f = FieldParams::default();
        let msg = Message::Insert(InsertMessage {
            txn: TxnId([0; 16]),
            index: 3,
            share: f.reduce(4),
        });
        let good = encode(&msg);

        let mut bad = good.clone();
        bad[4] = b'X';
        assert!(matches!(decode(&bad, &ctx()), Err(Error::Decode { offset: 4, .. })));

        let mut bad = good.clone();
        bad[8] = 9;
        assert!(decode(&bad, &ctx()).is_err());

        let mut bad = good.clone();
        bad[25] = 1;
        assert!(decode(&bad, &ctx()).is_err());

        // share >= modulus
        let mut bad = good.clone();
        let n = bad.len();
        bad[n - 8..].copy_from_slice(&u64::MAX.to_be_bytes());
        assert!(decode(&bad, &ctx()).is_err());
    }

    #[test]
    fn group_payload_validated_on_decode() {
        let group = GroupParams::toy();
        let msg = Message::QueryTerm(QueryTermMessage {
            txn: TxnId([5; 16]),
            terms: Blinded::Group(vec![GroupElement::new(3u32.into(), &group).unwrap()]),
        });
        let mut bytes = encode(&msg);
        assert_eq!(decode(&bytes, &toy_ctx()).unwrap(), msg);
        // 5 generates the full group of order 22, not the order-11 subgroup
        let n = bytes.len();
        bytes[n - 1] = 5;
        assert!(matches!(decode(&bytes, &toy_ctx()), Err(Error::Decode { .. })));
        let no_group = WireContext::new(group.field(), None);
        assert!(decode(&encode(&msg), &no_group).is_err());
    }

    #[test]
    fn read_frame_from_stream() {
        let msg = Message::Result(ResultMessage {
            txn: TxnId([1; 16]),
            result: false,
        });
        let mut stream = encode(&msg);
        stream.extend(encode(&msg));
        let mut cursor = io::Cursor::new(stream);
        let a = read_frame(&mut cursor).unwrap();
        let b = read_frame(&mut cursor).unwrap();
        assert_eq!(a, b);
        assert!(read_frame(&mut cursor).is_err());
    }

    fn arb_field_vec(field: FieldParams, max: usize) -> impl Strategy<Value = Vec<FieldElement>> {
        proptest::collection::vec(0..field.modulus(), 0..max)
            .prop_map(move |v| v.into_iter().map(|x| field.reduce(x)).collect())
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        let f = FieldParams::default();
        let txn = any::<[u8; 16]>().prop_map(TxnId);
        let group = GroupParams::toy();
        let toy_vec = proptest::collection::vec(0u64..11, 0..8).prop_map(move |v| {
            v.into_iter()
                .map(|e| crate::group::exp_generator(&group, group.field().reduce(e)).unwrap())
                .collect::<Vec<_>>()
        });
        prop_oneof![
            (txn.clone(), arb_field_vec(f, 40), arb_field_vec(f, 9))
                .prop_map(|(txn, g, chain)| Message::Chain(ChainMessage { txn, gamma: Blinded::Field(g), chain })),
            (txn.clone(), toy_vec.clone(), arb_field_vec(f, 9))
                .prop_map(|(txn, g, chain)| Message::Chain(ChainMessage { txn, gamma: Blinded::Group(g), chain })),
            (txn.clone(), arb_field_vec(f, 40))
                .prop_map(|(txn, t)| Message::QueryTerm(QueryTermMessage { txn, terms: Blinded::Field(t) })),
            (txn.clone(), toy_vec)
                .prop_map(|(txn, t)| Message::QueryTerm(QueryTermMessage { txn, terms: Blinded::Group(t) })),
            (txn.clone(), any::<bool>()).prop_map(|(txn, result)| Message::Result(ResultMessage { txn, result })),
            (txn.clone(), any::<u64>(), 0..f.modulus()).prop_map(move |(txn, index, s)| {
                Message::Insert(InsertMessage { txn, index, share: f.reduce(s) })
            }),
            (txn, 1u16..=8, ".{0,40}").prop_map(|(txn, code, detail)| {
                Message::Error(ErrorMessage { txn, code: ErrorCode::from_u16(code).unwrap(), detail })
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(msg in arb_message()) {
            let bytes = encode(&msg);
            prop_assert_eq!(decode(&bytes, &ctx()).unwrap(), msg);
        }
    }
}
