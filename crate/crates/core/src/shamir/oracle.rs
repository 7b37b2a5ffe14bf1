//! Test oracles: full reconstruction and exhaustive privacy enumeration.

use std::collections::HashSet;

use super::{lagrange_basis_at_zero, Share, SharingPolicy};
use crate::error::{Error, Result};
use crate::field::FieldElement;

/// Upper bound on `p^k` polynomials walked by [`enumerate_consistent_secrets`].
pub const MAX_ENUMERATION: u64 = 1 << 24;

/// Interpolates `p(0)` from the first `k` shares after checking that the
/// supplied x-coordinates are distinct.
pub fn reconstruct(shares: &[Share], policy: &SharingPolicy) -> Result<FieldElement> {
    if shares.len() < policy.k() {
        return Err(Error::InsufficientShares {
            needed: policy.k(),
            got: shares.len(),
        });
    }
    let mut seen = HashSet::new();
    if let Some(dup) = shares.iter().find(|s| !seen.insert(s.x.value())) {
        return Err(Error::DegenerateBasis(format!("duplicate coordinate {}", dup.x)));
    }
    let used = &shares[..policy.k()];
    let xs: Vec<_> = used.iter().map(|s| s.x).collect();
    let weights = lagrange_basis_at_zero(&xs)?;
    used.iter()
        .zip(weights)
        .try_fold(policy.field().zero(), |acc, (s, w)| acc.try_add(w.try_mul(s.y)?))
}

/// For every candidate secret `d`, counts the polynomials of degree at most
/// `k - 1` that pass through `partial` and have `p(0) = d`.
///
/// Walks all `p^k` polynomials, so it refuses fields where that exceeds
/// [`MAX_ENUMERATION`].
pub fn enumerate_consistent_secrets(partial: &[Share], policy: &SharingPolicy) -> Result<Vec<u64>> {
    let field = policy.field();
    let p = field.modulus();
    let k = policy.k() as u32;
    let total = p.checked_pow(k).filter(|t| *t <= MAX_ENUMERATION).ok_or(Error::FieldTooLarge(p))?;

    let mut histogram = vec![0u64; p as usize];
    let mut coeffs = vec![0u64; k as usize];
    for mut code in 0..total {
        for c in coeffs.iter_mut() {
            *c = code % p;
            code /= p;
        }
        let consistent = partial.iter().all(|s| {
            let x = s.x.value();
            let y = coeffs.iter().rev().fold(0u64, |acc, &c| (acc * x + c) % p);
            y == s.y.value()
        });
        if consistent {
            histogram[coeffs[0] as usize] += 1;
        }
    }
    Ok(histogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldParams;
    use crate::shamir::split;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn christine_shares(ids: &[u64]) -> Vec<Share> {
        let f = FieldParams::default();
        let ys = [1183, 1618, 2159, 2806, 3559];
        ids.iter()
            .map(|&x| Share {
                x: f.reduce(x),
                y: f.reduce(ys[x as usize - 1]),
            })
            .collect()
    }

    #[test]
    fn christine_reconstruction() {
        let policy = SharingPolicy::new(5, 3, FieldParams::default()).unwrap();
        assert_eq!(reconstruct(&christine_shares(&[1, 2, 3]), &policy).unwrap().value(), 854);
        assert_eq!(reconstruct(&christine_shares(&[2, 4, 5]), &policy).unwrap().value(), 854);
        assert!(matches!(
            reconstruct(&christine_shares(&[1, 2]), &policy),
            Err(Error::InsufficientShares { needed: 3, got: 2 })
        ));
        assert!(matches!(
            reconstruct(&christine_shares(&[1, 2, 2]), &policy),
            Err(Error::DegenerateBasis(_))
        ));
    }

    #[test]
    fn round_trip_over_random_subsets() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for i in 0..1000 {
            let n = 2 + i % 6;
            let k = 2 + (i / 6) % (n - 1);
            let policy = SharingPolicy::new(n, k, f).unwrap();
            let d = f.random_element(&mut rng, false);
            let mut shares = split(d, &policy, &mut rng).unwrap();
            // rotate to pick a different k-subset each time
            shares.rotate_left(i % n);
            assert_eq!(reconstruct(&shares[..k], &policy).unwrap(), d);
        }
    }

    #[test]
    fn partial_shares_leave_flat_histogram() {
        let f = FieldParams::new(11).unwrap();
        let policy = SharingPolicy::new(5, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let shares = split(f.reduce(6), &policy, &mut rng).unwrap();
        let hist = enumerate_consistent_secrets(&shares[1..3], &policy).unwrap();
        assert_eq!(hist, vec![1; 11]);

        let f7 = FieldParams::new(7).unwrap();
        let policy7 = SharingPolicy::new(3, 2, f7).unwrap();
        let shares7 = split(f7.reduce(2), &policy7, &mut rng).unwrap();
        let hist7 = enumerate_consistent_secrets(&shares7[..1], &policy7).unwrap();
        assert!(hist7.iter().all(|&c| c == hist7[0]));
    }

    #[test]
    fn threshold_shares_pin_the_secret() {
        let f = FieldParams::new(11).unwrap();
        let policy = SharingPolicy::new(5, 3, f).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let shares = split(f.reduce(9), &policy, &mut rng).unwrap();
        let hist = enumerate_consistent_secrets(&shares[..3], &policy).unwrap();
        let mut expected = vec![0; 11];
        expected[9] = 1;
        assert_eq!(hist, expected);
    }

    #[test]
    fn large_field_refused() {
        let policy = SharingPolicy::new(5, 3, FieldParams::default()).unwrap();
        assert!(matches!(
            enumerate_consistent_secrets(&[], &policy),
            Err(Error::FieldTooLarge(_))
        ));
    }
}
