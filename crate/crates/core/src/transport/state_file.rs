//! Repository state persistence.
//!
//! ```text
//! "SIFR"
//! u64 field modulus
//! u32 repository id
//! u64 x coordinate
//! u32 N
//! u32 k
//! 8-byte shares in index order, to end of file
//! ```
//!
//! All integers are big-endian. Pending sessions are not persisted.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::archive::{RepositoryState, ShareVector};
use crate::error::{Error, Result};
use crate::field::FieldParams;
use crate::shamir::SharingPolicy;

pub const STATE_MAGIC: [u8; 4] = *b"SIFR";
pub const STATE_HEADER_LEN: usize = 4 + 8 + 4 + 8 + 4 + 4;

pub fn encode_state(state: &RepositoryState) -> Vec<u8> {
    let policy = state.policy();
    let mut out = Vec::with_capacity(STATE_HEADER_LEN + 8 * state.element_count());
    out.extend_from_slice(&STATE_MAGIC);
    out.extend_from_slice(&policy.field().modulus().to_be_bytes());
    out.extend_from_slice(&(state.repo_id() as u32).to_be_bytes());
    out.extend_from_slice(&state.x().to_be_bytes());
    out.extend_from_slice(&(policy.n() as u32).to_be_bytes());
    out.extend_from_slice(&(policy.k() as u32).to_be_bytes());
    for share in state.shares().entries() {
        out.extend_from_slice(&share.to_be_bytes());
    }
    out
}

/// Rebuilds a repository from its file image. The policy uses coordinates
/// `1..=N` except that this repository's slot holds the stored `x`.
pub fn decode_state(bytes: &[u8]) -> Result<RepositoryState> {
    let bad = |offset: usize, reason: &str| Error::Decode {
        offset,
        reason: reason.to_string(),
    };
    if bytes.len() < STATE_HEADER_LEN {
        return Err(bad(bytes.len(), "truncated state header"));
    }
    if bytes[..4] != STATE_MAGIC {
        return Err(bad(0, "bad state magic"));
    }
    let u64_at = |o: usize| u64::from_be_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let u32_at = |o: usize| u32::from_be_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let field = FieldParams::new(u64_at(4)).map_err(|e| bad(4, &e.to_string()))?;
    let repo_id = u32_at(12) as usize;
    let x = field.element(u64_at(16)).map_err(|e| bad(16, &e.to_string()))?;
    let n = u32_at(24) as usize;
    let k = u32_at(28) as usize;
    if repo_id == 0 || repo_id > n {
        return Err(bad(12, "repository id outside 1..=N"));
    }
    let body = &bytes[STATE_HEADER_LEN..];
    if !body.len().is_multiple_of(8) {
        return Err(bad(bytes.len(), "share section is not a multiple of 8 bytes"));
    }
    let mut coords: Vec<_> = (1..=n as u64).map(|c| field.reduce(c)).collect();
    coords[repo_id - 1] = x;
    let policy = SharingPolicy::with_coordinates(k, field, coords).map_err(|e| bad(24, &e.to_string()))?;
    let shares = body
        .chunks_exact(8)
        .enumerate()
        .map(|(i, c)| {
            field
                .from_be_bytes(c.try_into().expect("8 bytes"))
                .map_err(|e| bad(STATE_HEADER_LEN + 8 * i, &e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    RepositoryState::with_shares(repo_id, policy, ShareVector::new(shares))
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written state file.
pub fn save(state: &RepositoryState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_state(state))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<RepositoryState> {
    decode_state(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::create_archive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn archive() -> Vec<RepositoryState> {
        let f = FieldParams::default();
        let policy = SharingPolicy::new(5, 3, f).unwrap();
        let els: Vec<_> = (0..20).map(|i| f.reduce(0x0a00_0000 + i)).collect();
        create_archive(&policy, &els, &mut ChaCha20Rng::seed_from_u64(1))
            .unwrap()
            .into_repositories()
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        for state in archive() {
            let path = dir.path().join(format!("r{}.state", state.repo_id()));
            save(&state, &path).unwrap();
            let size = fs::metadata(&path).unwrap().len() as usize;
            assert_eq!(size, STATE_HEADER_LEN + 8 * 20);
            let back = load(&path).unwrap();
            assert_eq!(back.repo_id(), state.repo_id());
            assert_eq!(back.x(), state.x());
            assert_eq!(back.shares(), state.shares());
            assert_eq!(back.policy(), state.policy());
        }
    }

    #[test]
    fn header_layout() {
        let state = &archive()[1];
        let bytes = encode_state(state);
        assert_eq!(&bytes[..4], b"SIFR");
        assert_eq!(&bytes[4..12], &4_294_967_311u64.to_be_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_be_bytes());
        assert_eq!(&bytes[16..24], &2u64.to_be_bytes());
        assert_eq!(&bytes[24..28], &5u32.to_be_bytes());
        assert_eq!(&bytes[28..32], &3u32.to_be_bytes());
    }

    #[test]
    fn rejects_damaged_files() {
        let good = encode_state(&archive()[0]);
        for cut in [0, 3, STATE_HEADER_LEN - 1, good.len() - 3] {
            assert!(decode_state(&good[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode_state(&bad).is_err());
        let mut bad = good.clone();
        bad[4..12].copy_from_slice(&4_294_967_312u64.to_be_bytes());
        assert!(decode_state(&bad).is_err());
        let mut bad = good;
        bad[12..16].copy_from_slice(&9u32.to_be_bytes());
        assert!(decode_state(&bad).is_err());
    }
}
