//! Prime-order subgroups of `Z_P^*` for the exponent-carrying query variant.
//!
//! The subgroup order `q` doubles as the sharing field modulus, so it must
//! fit the 64-bit field. `P` itself is arbitrary precision.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{Num, One, Zero};

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldParams};

/// Default 2048-bit modulus; `P - 1` is divisible by the order below.
const DEFAULT_MODULUS_HEX: &str = "a12ee5d3109f9477743ea604df7c00d7607ed0ff247c9a04cd77c88109b143ae\
2fd12ba38fb67b6276797f0a10453de7ddfd399865956f9bda81be4174ec8278\
eaa49c1c2ce03263bb017c02edb5385289d8b224baf10b406c9ab58d8a6b348c\
3562d58888615474e2e96c52a02d5b5f41560c3c5c150bbb9978b515caed536e\
c55fd7cf0eff495c9595cdd60ca0b03c20694a308e355bfc14cffa4db77f3a55\
30893ee57a93230f58f878dab96c5fc38d2d1f4f237fd61a6486dda76faa3d71\
2dc77790b6bdca5b0d5120b3abbbbcf1e91efd3e2132ab5298c86769515718bb\
44f7e207444633a3516bed2e283c70d53a8fa78877d10bdba129d89a87b7aab3";

/// Largest prime below 2^64.
pub const DEFAULT_ORDER: u64 = 18_446_744_073_709_551_557;

/// `2^((P-1)/q) mod P`.
const DEFAULT_GENERATOR_HEX: &str = "469c49c08085bc1d3b59e0b3fe6a25b48212a234f1e02e23c30be22c9e969bbd\
7eb6263342ea1b1c4e247caf192dc7b9f1e3286fce6391823d71614f80935ab0\
74e5bf50211332e8d98f59a9d3f5b71cbcf3eec90b0545c976de6a9fc7698852\
7dde80cbcda6a872dea04d17e563c3bd624bbd00c546045373f95f2efd753f30\
7227db4568d9c5563ddb6a132887742e9cface1c764649c7a311071d627e6f78\
72e0d6b0ba9cc6c68809b55e2011e841e8fa23beb19067d7d311c2f1754eab92\
16bebc866a2b5bb5e07511b2c7a75f1cce694f8e9a7b0139e1d75f70eeb2ca9e\
3e4b8e9433b697d25526526e5f90eb1052ad3dfa8cfdd87b8582999aee16d342";

/// `(P, q, g)` with `q | P - 1`, `g^q = 1`, `g != 1`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    modulus: BigUint,
    order: BigUint,
    generator: BigUint,
    field: FieldParams,
}

impl GroupParams {
    pub fn new(modulus: BigUint, order: BigUint, generator: BigUint) -> Result<Self> {
        let order_u64 = u64::try_from(&order)
            .map_err(|_| Error::InvalidGroup("subgroup order must fit in 64 bits".into()))?;
        let field = FieldParams::new(order_u64)
            .map_err(|_| Error::InvalidGroup(format!("order {order} is not prime")))?;
        if modulus <= BigUint::from(3u32) || !is_probable_prime(&modulus) {
            return Err(Error::InvalidGroup("modulus is not prime".into()));
        }
        if !(&modulus - 1u32).is_multiple_of(&order) {
            return Err(Error::InvalidGroup("order does not divide P - 1".into()));
        }
        if generator.is_zero() || generator.is_one() || generator >= modulus {
            return Err(Error::InvalidGroup("generator outside (1, P)".into()));
        }
        if !generator.modpow(&order, &modulus).is_one() {
            return Err(Error::InvalidGroup("generator does not have order q".into()));
        }
        Ok(Self {
            modulus,
            order,
            generator,
            field,
        })
    }

    /// `(P, q, g) = (23, 11, 2)`.
    pub fn toy() -> Arc<Self> {
        static TOY: OnceLock<Arc<GroupParams>> = OnceLock::new();
        TOY.get_or_init(|| {
            Arc::new(Self::new(23u32.into(), 11u32.into(), 2u32.into()).expect("toy group"))
        })
        .clone()
    }

    /// Built-in 2048-bit modulus with a 64-bit prime-order subgroup.
    pub fn default_2048() -> Arc<Self> {
        static DEFAULT: OnceLock<Arc<GroupParams>> = OnceLock::new();
        DEFAULT
            .get_or_init(|| {
                let p = BigUint::from_str_radix(DEFAULT_MODULUS_HEX, 16).expect("modulus hex");
                let g = BigUint::from_str_radix(DEFAULT_GENERATOR_HEX, 16).expect("generator hex");
                Arc::new(Self::new(p, DEFAULT_ORDER.into(), g).expect("default group"))
            })
            .clone()
    }

    /// Parses three integers `P`, `q`, `g` (decimal or `0x` hex), one per
    /// line or whitespace separated. `#` starts a comment; an optional
    /// `name =` prefix on a line is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            let line = line.rsplit('=').next().unwrap_or(line);
            for token in line.split_whitespace() {
                values.push(parse_integer(token)?);
            }
        }
        let [p, q, g]: [BigUint; 3] = values
            .try_into()
            .map_err(|v: Vec<_>| Error::InvalidGroup(format!("expected 3 integers, found {}", v.len())))?;
        Self::new(p, q, g)
    }

    pub fn to_text(&self) -> String {
        format!(
            "P = 0x{:x}\nq = {}\ng = 0x{:x}\n",
            self.modulus, self.order, self.generator
        )
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    /// The exponent field `Z_q`.
    pub fn field(&self) -> FieldParams {
        self.field
    }

    /// Byte width of the modulus, the largest encoded element size.
    pub fn element_width(&self) -> usize {
        self.modulus.bits().div_ceil(8) as usize
    }
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("modulus_bits", &self.modulus.bits())
            .field("order", &self.order)
            .finish()
    }
}

fn parse_integer(token: &str) -> Result<BigUint> {
    let parsed = match token.strip_prefix("0x").or_else(|| token.strip_prefix("0X")) {
        Some(hex) => BigUint::from_str_radix(hex, 16),
        None => BigUint::from_str_radix(token, 10),
    };
    parsed.map_err(|_| Error::InvalidGroup(format!("not an integer: {token:?}")))
}

/// Miller-Rabin with the first 24 primes as witnesses.
fn is_probable_prime(n: &BigUint) -> bool {
    const WITNESSES: [u32; 24] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    ];
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &w in &WITNESSES {
        let w = BigUint::from(w);
        if *n == w {
            return true;
        }
        if (n % &w).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for &w in &WITNESSES {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Member of the order-`q` subgroup.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupElement {
    value: BigUint,
    params: Arc<GroupParams>,
}

impl GroupElement {
    /// Validates subgroup membership: `1 <= v < P` and `v^q = 1`.
    pub fn new(value: BigUint, params: &Arc<GroupParams>) -> Result<Self> {
        if value.is_zero() || value >= params.modulus || !value.modpow(&params.order, &params.modulus).is_one() {
            return Err(Error::NotInSubgroup);
        }
        Ok(Self {
            value,
            params: params.clone(),
        })
    }

    pub fn generator(params: &Arc<GroupParams>) -> Self {
        Self {
            value: params.generator.clone(),
            params: params.clone(),
        }
    }

    pub fn identity(params: &Arc<GroupParams>) -> Self {
        Self {
            value: BigUint::one(),
            params: params.clone(),
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn params(&self) -> &Arc<GroupParams> {
        &self.params
    }

    /// `self^e mod P`, with `e` taken from `Z_q`.
    pub fn exp(&self, e: FieldElement) -> Result<Self> {
        if e.params() != self.params.field {
            return Err(Error::ParamsMismatch {
                left: self.params.field.modulus(),
                right: e.params().modulus(),
            });
        }
        Ok(Self {
            value: self.value.modpow(&BigUint::from(e.value()), &self.params.modulus),
            params: self.params.clone(),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.params != other.params {
            return Err(Error::InvalidGroup("elements from different groups".into()));
        }
        Ok(Self {
            value: (&self.value * &other.value) % &self.params.modulus,
            params: self.params.clone(),
        })
    }

    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.value.to_bytes_be()
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", self.value)
    }
}

/// `g^e`.
pub fn exp_generator(params: &Arc<GroupParams>, e: FieldElement) -> Result<GroupElement> {
    GroupElement::generator(params).exp(e)
}

/// Component-wise product `a ⊙ b`.
pub fn hadamard(a: &[GroupElement], b: &[GroupElement]) -> Result<Vec<GroupElement>> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("hadamard of lengths {} and {}", a.len(), b.len())));
    }
    a.iter().zip(b).map(|(x, y)| x.mul(y)).collect()
}
