//! Threshold sharing: random polynomials with the secret as intercept,
//! share evaluation, and Lagrange weights at zero.
//!
//! Full reconstruction lives in [`oracle`] and is only used to check the
//! protocols; nothing on the query path imports it.

pub mod oracle;

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldParams};

/// A `(k, N)` sharing configuration with one evaluation point per repository.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharingPolicy {
    n: usize,
    k: usize,
    field: FieldParams,
    x_coords: Vec<FieldElement>,
}

impl SharingPolicy {
    /// Policy with the default coordinates `x_r = r` for `r` in `1..=n`.
    pub fn new(n: usize, k: usize, field: FieldParams) -> Result<Self> {
        if (n as u128) >= field.modulus() as u128 {
            return Err(Error::InvalidPolicy(format!(
                "{n} repositories need {n} distinct nonzero points in a field of size {}",
                field.modulus()
            )));
        }
        let coords = (1..=n as u64).map(|r| field.reduce(r)).collect();
        Self::with_coordinates(k, field, coords)
    }

    pub fn with_coordinates(k: usize, field: FieldParams, x_coords: Vec<FieldElement>) -> Result<Self> {
        let n = x_coords.len();
        if k < 2 || k > n {
            return Err(Error::InvalidPolicy(format!("threshold k={k} must satisfy 2 <= k <= N={n}")));
        }
        let mut seen = HashSet::new();
        for x in &x_coords {
            if x.params() != field {
                return Err(Error::ParamsMismatch {
                    left: field.modulus(),
                    right: x.params().modulus(),
                });
            }
            if x.is_zero() {
                return Err(Error::InvalidPolicy("coordinate 0 would expose the secret".into()));
            }
            if !seen.insert(x.value()) {
                return Err(Error::InvalidPolicy(format!("duplicate coordinate {x}")));
            }
        }
        Ok(Self { n, k, field, x_coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> FieldParams {
        self.field
    }

    pub fn x_coords(&self) -> &[FieldElement] {
        &self.x_coords
    }

    /// Coordinate of repository `repo_id` (1-based).
    pub fn coordinate(&self, repo_id: usize) -> Option<FieldElement> {
        repo_id.checked_sub(1).and_then(|i| self.x_coords.get(i)).copied()
    }

    /// Repository id (1-based) owning coordinate `x`.
    pub fn repo_id_of(&self, x: FieldElement) -> Option<usize> {
        self.x_coords.iter().position(|c| *c == x).map(|i| i + 1)
    }
}

/// `p(x) = d + a_1 x + ... + a_{k-1} x^{k-1}`; coefficient 0 is the secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretPolynomial {
    coefficients: Vec<FieldElement>,
}

impl SecretPolynomial {
    /// Fresh polynomial with uniformly random higher coefficients (zero allowed,
    /// so the true degree may fall below `k - 1`).
    pub fn random<R: Rng + ?Sized>(secret: FieldElement, k: usize, rng: &mut R) -> Self {
        let field = secret.params();
        let mut coefficients = Vec::with_capacity(k);
        coefficients.push(secret);
        coefficients.extend((1..k).map(|_| field.random_element(rng, false)));
        Self { coefficients }
    }

    pub fn from_coefficients(coefficients: Vec<FieldElement>) -> Result<Self> {
        let Some(first) = coefficients.first() else {
            return Err(Error::InvalidPolicy("polynomial needs at least one coefficient".into()));
        };
        let field = first.params();
        if let Some(bad) = coefficients.iter().find(|c| c.params() != field) {
            return Err(Error::ParamsMismatch {
                left: field.modulus(),
                right: bad.params().modulus(),
            });
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn secret(&self) -> FieldElement {
        self.coefficients[0]
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: FieldElement) -> FieldElement {
        self.coefficients
            .iter()
            .rev()
            .fold(x.params().zero(), |acc, c| acc * x + *c)
    }
}

/// A point `(x, p(x))` with `x != 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Share {
    pub x: FieldElement,
    pub y: FieldElement,
}

/// Splits `secret` into one share per policy coordinate.
pub fn split<R: Rng + ?Sized>(secret: FieldElement, policy: &SharingPolicy, rng: &mut R) -> Result<Vec<Share>> {
    if secret.params() != policy.field {
        return Err(Error::ParamsMismatch {
            left: policy.field.modulus(),
            right: secret.params().modulus(),
        });
    }
    let poly = SecretPolynomial::random(secret, policy.k, rng);
    split_with(&poly, policy)
}

/// Evaluates a caller-supplied polynomial at every policy coordinate.
pub fn split_with(poly: &SecretPolynomial, policy: &SharingPolicy) -> Result<Vec<Share>> {
    if poly.coefficients.len() != policy.k {
        return Err(Error::InvalidPolicy(format!(
            "polynomial has {} coefficients, threshold is {}",
            poly.coefficients.len(),
            policy.k
        )));
    }
    if poly.secret().params() != policy.field {
        return Err(Error::ParamsMismatch {
            left: policy.field.modulus(),
            right: poly.secret().params().modulus(),
        });
    }
    Ok(policy
        .x_coords
        .iter()
        .map(|&x| Share { x, y: poly.evaluate(x) })
        .collect())
}

fn check_basis_points(xs: &[FieldElement]) -> Result<FieldParams> {
    let Some(first) = xs.first() else {
        return Err(Error::DegenerateBasis("empty coordinate list".into()));
    };
    let field = first.params();
    let mut seen = HashSet::with_capacity(xs.len());
    for x in xs {
        if x.params() != field {
            return Err(Error::ParamsMismatch {
                left: field.modulus(),
                right: x.params().modulus(),
            });
        }
        if x.is_zero() {
            return Err(Error::DegenerateBasis("coordinate 0 in basis".into()));
        }
        if !seen.insert(x.value()) {
            return Err(Error::DegenerateBasis(format!("duplicate coordinate {x}")));
        }
    }
    Ok(field)
}

/// `L_{i,S}(0) = prod_{j != i} x_j / (x_j - x_i)` for the point at `index`.
pub fn lagrange_weight_at_zero(xs: &[FieldElement], index: usize) -> Result<FieldElement> {
    let field = check_basis_points(xs)?;
    if index >= xs.len() {
        return Err(Error::DegenerateBasis(format!("index {index} outside basis of size {}", xs.len())));
    }
    Ok(weight_unchecked(field, xs, index))
}

fn weight_unchecked(field: FieldParams, xs: &[FieldElement], index: usize) -> FieldElement {
    let xi = xs[index];
    let (num, den) = xs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != index)
        .fold((field.one(), field.one()), |(num, den), (_, &xj)| (num * xj, den * (xj - xi)));
    // Distinct coordinates make every factor of `den` nonzero.
    num * den.inv().expect("distinct coordinates")
}

/// All Lagrange weights at zero for the ordered coordinate list `xs`.
pub fn lagrange_basis_at_zero(xs: &[FieldElement]) -> Result<Vec<FieldElement>> {
    let field = check_basis_points(xs)?;
    Ok((0..xs.len()).map(|i| weight_unchecked(field, xs, i)).collect())
}
