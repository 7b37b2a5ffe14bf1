//! Arithmetic in a prime field `Z_p` for moduli below 2^64.
//!
//! Field parameters travel with every element, so toy fields (p = 7, 11, 23)
//! and the production field can be used side by side. Binary operators panic
//! on mismatched parameters; the `try_*` methods report the mismatch instead.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};

/// Smallest prime above 2^32, so every IPv4 address is a distinct residue.
pub const DEFAULT_MODULUS: u64 = 4_294_967_311;

/// A validated prime modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldParams {
    modulus: u64,
}

impl FieldParams {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus <= 2 || !is_prime_u64(modulus) {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Wraps `value`, rejecting anything outside `[0, p)`.
    pub fn element(&self, value: u64) -> Result<FieldElement> {
        if value >= self.modulus {
            return Err(Error::OutOfRange {
                value,
                modulus: self.modulus,
            });
        }
        Ok(FieldElement {
            value,
            params: *self,
        })
    }

    pub fn reduce(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            params: *self,
        }
    }

    /// Maps a signed integer to its residue.
    pub fn from_i64(&self, value: i64) -> FieldElement {
        let m = self.modulus as i128;
        let v = (value as i128).rem_euclid(m);
        FieldElement {
            value: v as u64,
            params: *self,
        }
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement {
            value: 0,
            params: *self,
        }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement {
            value: 1,
            params: *self,
        }
    }

    /// Uniform draw over `[0, p)`, or `[1, p)` when `exclude_zero` is set.
    ///
    /// `gen_range` samples by rejection, so there is no modulo bias.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, exclude_zero: bool) -> FieldElement {
        let low = u64::from(exclude_zero);
        FieldElement {
            value: rng.gen_range(low..self.modulus),
            params: *self,
        }
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<FieldElement> {
        (0..len).map(|_| self.random_element(rng, false)).collect()
    }

    /// Decodes the 8-byte big-endian wire form.
    pub fn from_be_bytes(&self, bytes: [u8; 8]) -> Result<FieldElement> {
        self.element(u64::from_be_bytes(bytes))
    }
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            modulus: DEFAULT_MODULUS,
        }
    }
}

/// A canonical residue in `[0, p)` tagged with its field.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    params: FieldParams,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn params(&self) -> FieldParams {
        self.params
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::ParamsMismatch {
                left: self.params.modulus,
                right: other.params.modulus,
            });
        }
        Ok(())
    }

    pub fn try_add(self, other: Self) -> Result<Self> {
        self.check(&other)?;
        Ok(self.add_unchecked(other))
    }

    pub fn try_sub(self, other: Self) -> Result<Self> {
        self.check(&other)?;
        Ok(self.add_unchecked(other.neg()))
    }

    pub fn try_mul(self, other: Self) -> Result<Self> {
        self.check(&other)?;
        Ok(self.mul_unchecked(other))
    }

    fn add_unchecked(self, other: Self) -> Self {
        let m = self.params.modulus as u128;
        let sum = (self.value as u128 + other.value as u128) % m;
        Self {
            value: sum as u64,
            params: self.params,
        }
    }

    fn mul_unchecked(self, other: Self) -> Self {
        Self {
            value: mul_mod(self.value, other.value, self.params.modulus),
            params: self.params,
        }
    }

    /// Square-and-multiply exponentiation.
    pub fn pow(self, exponent: u64) -> Self {
        Self {
            value: pow_mod(self.value, exponent, self.params.modulus),
            params: self.params,
        }
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(self) -> Result<Self> {
        if self.value == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(self.params.modulus - 2))
    }

    pub fn to_be_bytes(&self) -> [u8; 8] {
        self.value.to_be_bytes()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.params.modulus)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElement {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field add")
    }
}

impl Sub for FieldElement {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field sub")
    }
}

impl Mul for FieldElement {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field mul")
    }
}

impl Neg for FieldElement {
    type Output = Self;

    fn neg(self) -> Self {
        let value = if self.value == 0 {
            0
        } else {
            self.params.modulus - self.value
        };
        Self {
            value,
            params: self.params,
        }
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; these bases are exact for every `u64`.
pub fn is_prime_u64(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn f7() -> FieldParams {
        FieldParams::new(7).unwrap()
    }

    #[test]
    fn small_field_examples() {
        let f = f7();
        let e = |v| f.element(v).unwrap();
        assert_eq!((e(3) + e(5)).value(), 1);
        assert_eq!((e(3) * e(5)).value(), 1);
        assert_eq!((e(2) - e(5)).value(), 4);
        assert_eq!(e(1).inv().unwrap().value(), 1);
    }

    #[test]
    fn inverse_matches_brute_force_scan() {
        let f = f7();
        let three = f.element(3).unwrap();
        let scanned = (1..7).find(|b| (3 * b) % 7 == 1).unwrap();
        assert_eq!(scanned, 5);
        assert_eq!(three.inv().unwrap().value(), scanned);
    }

    #[test]
    fn wraparound_at_default_modulus() {
        let f = FieldParams::default();
        let top = f.element(DEFAULT_MODULUS - 1).unwrap();
        assert_eq!((top + f.one()).value(), 0);
        assert_eq!(f.element(2).unwrap().pow(10).value(), 1024);
    }

    #[test]
    fn wide_multiply_matches_bigint() {
        let f = FieldParams::default();
        let two32 = f.element(1 << 32).unwrap();
        let oracle = {
            let p = BigUint::from(DEFAULT_MODULUS);
            let a = BigUint::from(1u64 << 32) % &p;
            (&a * &a) % &p
        };
        assert_eq!(oracle, BigUint::from(225u32));
        assert_eq!((two32 * two32).value(), 225);
    }

    #[test]
    fn zero_has_no_inverse() {
        assert!(matches!(f7().zero().inv(), Err(Error::DivisionByZero)));
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let a = f7().one();
        let b = FieldParams::new(11).unwrap().one();
        assert!(matches!(a.try_add(b), Err(Error::ParamsMismatch { .. })));
        assert!(matches!(a.try_mul(b), Err(Error::ParamsMismatch { .. })));
        assert!(matches!(a.try_sub(b), Err(Error::ParamsMismatch { .. })));
    }

    #[test]
    fn composite_and_tiny_moduli_are_rejected() {
        for m in [0, 1, 2, 4, 9, 561, 4_294_967_297] {
            assert!(FieldParams::new(m).is_err(), "{m}");
        }
        for m in [3, 7, 11, 23, DEFAULT_MODULUS, 18_446_744_073_709_551_557] {
            assert!(FieldParams::new(m).is_ok(), "{m}");
        }
    }

    #[test]
    fn out_of_range_element_rejected() {
        assert!(f7().element(7).is_err());
        assert!(f7().from_be_bytes(9u64.to_be_bytes()).is_err());
    }

    #[test]
    fn uniform_sampling_chi_square() {
        let f = f7();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut counts = [0u64; 7];
        for _ in 0..70_000 {
            counts[f.random_element(&mut rng, false).value() as usize] += 1;
        }
        let sigma = (70_000.0f64 * (1.0 / 7.0) * (6.0 / 7.0)).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn exclude_zero_never_returns_zero() {
        let f = f7();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1_000_000 {
            assert!(!f.random_element(&mut rng, true).is_zero());
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let f = FieldParams::default();
        let a = f.random_vector(&mut ChaCha20Rng::seed_from_u64(99), 64);
        let b = f.random_vector(&mut ChaCha20Rng::seed_from_u64(99), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn ops_match_bigint_oracle_on_random_triples() {
        let f = FieldParams::default();
        let p = BigUint::from(DEFAULT_MODULUS);
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let a = f.random_element(&mut rng, false);
            let b = f.random_element(&mut rng, false);
            let c = f.random_element(&mut rng, true);
            let (ba, bb, bc) = (
                BigUint::from(a.value()),
                BigUint::from(b.value()),
                BigUint::from(c.value()),
            );
            assert_eq!(BigUint::from((a + b).value()), (&ba + &bb) % &p);
            assert_eq!(BigUint::from((a * b).value()), (&ba * &bb) % &p);
            let ci = BigUint::from(c.inv().unwrap().value());
            assert_eq!((&bc * &ci) % &p, BigUint::from(1u32));
        }
    }

    fn any_element() -> impl Strategy<Value = FieldElement> {
        (0..DEFAULT_MODULUS).prop_map(|v| FieldParams::default().element(v).unwrap())
    }

    proptest! {
        #[test]
        fn field_axioms(a in any_element(), b in any_element(), c in any_element()) {
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - a, a.params().zero());
            prop_assert!((a * b).value() < DEFAULT_MODULUS);
        }

        #[test]
        fn inverse_is_an_involution(a in any_element()) {
            prop_assume!(!a.is_zero());
            prop_assert_eq!(a.inv().unwrap().inv().unwrap(), a);
            prop_assert_eq!(a * a.inv().unwrap(), a.params().one());
            prop_assert_eq!(a.pow(DEFAULT_MODULUS - 1), a.params().one());
        }
    }
}
