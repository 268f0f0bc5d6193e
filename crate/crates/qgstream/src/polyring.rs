//! Dense univariate polynomial arithmetic over Z_p and root extraction.
//!
//! Coefficients are stored in ascending degree with no trailing zeros;
//! the zero polynomial is the empty coefficient list. Root finding
//! isolates the linear part with gcd(X^p - X, f) and then splits it with
//! the randomized map gcd((X + d)^((p-1)/2) - 1, g), which is all the
//! chosen-plaintext attack needs (degree <= 3).

use std::collections::BTreeSet;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numtheory::mod_inv;

/// Retry budget for one equal-degree split; each retry fails with
/// probability about 1/2.
const SPLIT_RETRIES: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyZp {
    p: BigUint,
    coeffs: Vec<BigUint>,
}

impl PolyZp {
    /// Builds a polynomial from ascending-degree coefficients, reducing
    /// them mod `p` and trimming trailing zeros.
    pub fn new(p: BigUint, coeffs: Vec<BigUint>) -> Result<Self> {
        if p < BigUint::from(2u32) {
            return Err(Error::InvalidModulus);
        }
        let coeffs = coeffs.into_iter().map(|c| c % &p).collect();
        let mut poly = PolyZp { p, coeffs };
        poly.trim();
        Ok(poly)
    }

    pub fn zero(p: BigUint) -> Self {
        PolyZp { p, coeffs: vec![] }
    }

    pub fn constant(p: BigUint, c: BigUint) -> Result<Self> {
        PolyZp::new(p, vec![c])
    }

    /// The monomial X.
    pub fn x(p: BigUint) -> Self {
        PolyZp {
            coeffs: vec![BigUint::zero(), BigUint::one()],
            p,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    fn check_same_modulus(&self, other: &Self) -> Result<()> {
        if self.p == other.p {
            Ok(())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    /// Horner evaluation at `x`.
    pub fn eval(&self, x: &BigUint) -> BigUint {
        let mut acc = BigUint::zero();
        for c in self.coeffs.iter().rev() {
            acc = (acc * x + c) % &self.p;
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_modulus(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        let zero = BigUint::zero();
        for i in 0..n {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = other.coeffs.get(i).unwrap_or(&zero);
            coeffs.push((a + b) % &self.p);
        }
        let mut out = PolyZp {
            p: self.p.clone(),
            coeffs,
        };
        out.trim();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_modulus(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        let zero = BigUint::zero();
        for i in 0..n {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = other.coeffs.get(i).unwrap_or(&zero);
            coeffs.push((a + &self.p - b) % &self.p);
        }
        let mut out = PolyZp {
            p: self.p.clone(),
            coeffs,
        };
        out.trim();
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_modulus(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(PolyZp::zero(self.p.clone()));
        }
        let mut coeffs = vec![BigUint::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = (&coeffs[i + j] + a * b) % &self.p;
            }
        }
        let mut out = PolyZp {
            p: self.p.clone(),
            coeffs,
        };
        out.trim();
        Ok(out)
    }

    /// Euclidean division: returns `(q, r)` with `self = q * other + r`
    /// and `deg r < deg other`.
    pub fn divmod(&self, other: &Self) -> Result<(Self, Self)> {
        self.check_same_modulus(other)?;
        if other.is_zero() {
            return Err(Error::ZeroDivisor);
        }
        let divisor_deg = other.coeffs.len() - 1;
        if self.coeffs.len() <= divisor_deg {
            return Ok((PolyZp::zero(self.p.clone()), self.clone()));
        }
        let lead_inv = mod_inv(other.coeffs.last().unwrap(), &self.p)?;
        let mut rem = self.coeffs.clone();
        let quot_len = rem.len() - divisor_deg;
        let mut quot = vec![BigUint::zero(); quot_len];
        for i in (0..quot_len).rev() {
            let factor = (&rem[i + divisor_deg] * &lead_inv) % &self.p;
            if factor.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let sub = (&factor * b) % &self.p;
                rem[i + j] = (&rem[i + j] + &self.p - sub) % &self.p;
            }
            quot[i] = factor;
        }
        let mut q = PolyZp {
            p: self.p.clone(),
            coeffs: quot,
        };
        let mut r = PolyZp {
            p: self.p.clone(),
            coeffs: rem,
        };
        q.trim();
        r.trim();
        debug_assert!(r.is_zero() || r.coeffs.len() <= divisor_deg);
        Ok((q, r))
    }

    pub fn rem(&self, other: &Self) -> Result<Self> {
        Ok(self.divmod(other)?.1)
    }

    /// Monic gcd by the Euclidean algorithm.
    pub fn gcd(&self, other: &Self) -> Result<Self> {
        self.check_same_modulus(other)?;
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b)?;
            a = b;
            b = r;
        }
        a.into_monic()
    }

    fn into_monic(mut self) -> Result<Self> {
        if let Some(lead) = self.coeffs.last() {
            if !lead.is_one() {
                let inv = mod_inv(lead, &self.p)?;
                for c in &mut self.coeffs {
                    *c = (&*c * &inv) % &self.p;
                }
            }
        }
        Ok(self)
    }

    /// `base^exp` in the quotient ring Z_p[X]/(self).
    fn powmod(&self, base: &Self, exp: &BigUint) -> Result<Self> {
        let mut result = PolyZp::constant(self.p.clone(), BigUint::one())?.rem(self)?;
        let mut sq = base.rem(self)?;
        for i in 0..exp.bits() {
            if exp.bit(i) {
                result = result.mul(&sq)?.rem(self)?;
            }
            if i + 1 < exp.bits() {
                sq = sq.mul(&sq)?.rem(self)?;
            }
        }
        Ok(result)
    }

    /// `X^p mod self`, the Frobenius image used for isolating roots.
    pub fn powmod_x(&self) -> Result<Self> {
        if self.degree().unwrap_or(0) < 1 {
            return Err(Error::InvalidParameter(
                "quotient-ring modulus must have degree >= 1",
            ));
        }
        let p = self.p.clone();
        self.powmod(&PolyZp::x(p.clone()), &p)
    }

    /// All roots of `self` in Z_p. Expected polynomial time in
    /// `deg * log p`; the modulus 2 is rejected since the splitting
    /// exponent (p-1)/2 degenerates there.
    pub fn roots(&self, rng: &mut impl Rng) -> Result<BTreeSet<BigUint>> {
        if self.p == BigUint::from(2u32) {
            return Err(Error::InvalidModulus);
        }
        if self.is_zero() {
            return Err(Error::InvalidParameter("zero polynomial has no root set"));
        }
        let mut roots = BTreeSet::new();
        if self.degree() == Some(0) {
            return Ok(roots);
        }
        // Linear part: gcd(X^p - X, f) is squarefree with exactly the
        // distinct roots of f as its roots.
        let xp = self.powmod_x()?;
        let x = PolyZp::x(self.p.clone()).rem(self)?;
        let linear_part = self.gcd(&xp.sub(&x)?)?;
        self.split_linear(&linear_part, rng, &mut roots)?;
        Ok(roots)
    }

    /// Recursively splits a squarefree product of linear factors and
    /// collects its roots.
    fn split_linear(
        &self,
        g: &Self,
        rng: &mut impl Rng,
        roots: &mut BTreeSet<BigUint>,
    ) -> Result<()> {
        match g.degree() {
            None | Some(0) => return Ok(()),
            Some(1) => {
                // Monic X + c has root p - c.
                let c = &g.coeffs[0];
                let root = if c.is_zero() {
                    BigUint::zero()
                } else {
                    &self.p - c
                };
                roots.insert(root);
                return Ok(());
            }
            Some(_) => {}
        }
        let half_order = (&self.p - 1u32) >> 1;
        for _ in 0..SPLIT_RETRIES {
            let delta = rng.gen_biguint_below(&self.p);
            let shifted = PolyZp::new(self.p.clone(), vec![delta, BigUint::one()])?;
            let s = g.powmod(&shifted, &half_order)?;
            let s_minus_1 = s.sub(&PolyZp::constant(self.p.clone(), BigUint::one())?)?;
            let h = g.gcd(&s_minus_1)?;
            let h_deg = h.degree();
            if h_deg > Some(0) && h_deg < g.degree() {
                let (rest, r) = g.divmod(&h)?;
                debug_assert!(r.is_zero());
                self.split_linear(&h, rng, roots)?;
                self.split_linear(&rest, rng, roots)?;
                return Ok(());
            }
        }
        Err(Error::SplittingFailed)
    }
}
