//! The key-derived quasigroup on Q = {1, ..., p-1} and its string
//! transformations.
//!
//! A key K in [1, p-2] defines the permutation
//! `f_K(j) = (1 + (K + j) mod (p-1))^(-1) mod p`, the product
//! `i * j = i * f_K(j) mod p`, and the left parastrophe
//! `i \ j = g` where `g = ((i * j^(-1) mod p) - 1 - K) mod (p-1)`,
//! mapped to `p-1` when the residue is 0. No multiplication table is
//! ever materialized; a small-order table type exists for exhaustive
//! Latin-square checks only.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numtheory::mod_inv;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasigroupZp {
    p: BigUint,
    p_minus_1: BigUint,
    key: BigUint,
}

impl QuasigroupZp {
    /// Requires `p >= 3` and a key in [1, p-2]; `p-1` would alias key 0
    /// under the mod (p-1) wrap, so it is excluded.
    pub fn new(p: BigUint, key: BigUint) -> Result<Self> {
        if p < BigUint::from(3u32) {
            return Err(Error::InvalidModulus);
        }
        if key.is_zero() || key > &p - 2u32 {
            return Err(Error::InvalidParameter("key outside [1, p-2]"));
        }
        let p_minus_1 = &p - 1u32;
        Ok(QuasigroupZp { p, p_minus_1, key })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn key(&self) -> &BigUint {
        &self.key
    }

    fn check_element(&self, x: &BigUint) -> Result<()> {
        if x.is_zero() || x >= &self.p {
            return Err(Error::OutOfDomain("element outside [1, p-1]"));
        }
        Ok(())
    }

    /// The column permutation: j -> (1 + (key + j) mod (p-1))^(-1) mod p.
    /// The denominator lies in [1, p-1], so the inverse always exists.
    pub fn column_perm(&self, j: &BigUint) -> Result<BigUint> {
        self.check_element(j)?;
        let denom = BigUint::one() + (&self.key + j) % &self.p_minus_1;
        mod_inv(&denom, &self.p)
    }

    /// The quasigroup product i * j = i * f_K(j) mod p.
    pub fn star(&self, i: &BigUint, j: &BigUint) -> Result<BigUint> {
        self.check_element(i)?;
        Ok((i * self.column_perm(j)?) % &self.p)
    }

    /// The left parastrophe: the unique y with i * y = j.
    pub fn left_div(&self, i: &BigUint, j: &BigUint) -> Result<BigUint> {
        self.check_element(i)?;
        self.check_element(j)?;
        let ratio = (i * mod_inv(j, &self.p)?) % &self.p;
        // ratio is in [1, p-1]; keep the subtraction nonnegative.
        let g = (ratio - 1u32 + &self.p_minus_1 - &self.key) % &self.p_minus_1;
        Ok(if g.is_zero() { self.p_minus_1.clone() } else { g })
    }

    /// The e-transformation: chained products seeded by `leader`,
    /// `out[0] = leader * w[0]`, `out[i] = out[i-1] * w[i]`.
    pub fn e_transform(&self, leader: &BigUint, word: &[BigUint]) -> Result<Vec<BigUint>> {
        self.check_element(leader)?;
        let mut out = Vec::with_capacity(word.len());
        let mut prev = leader.clone();
        for sym in word {
            prev = self.star(&prev, sym)?;
            out.push(prev.clone());
        }
        Ok(out)
    }

    /// The d-transformation, the inverse of `e_transform` for the same
    /// leader: `out[0] = leader \ w[0]`, `out[i] = w[i-1] \ w[i]`.
    pub fn d_transform(&self, leader: &BigUint, word: &[BigUint]) -> Result<Vec<BigUint>> {
        self.check_element(leader)?;
        let mut out = Vec::with_capacity(word.len());
        let mut prev = leader;
        for sym in word {
            out.push(self.left_div(prev, sym)?);
            prev = sym;
        }
        Ok(out)
    }

    /// k-fold e-transformation: applies e with each leader in order.
    pub fn e_chain(&self, leaders: &[BigUint], word: &[BigUint]) -> Result<Vec<BigUint>> {
        if leaders.is_empty() {
            return Err(Error::InvalidParameter("at least one leader required"));
        }
        let mut w = word.to_vec();
        for leader in leaders {
            w = self.e_transform(leader, &w)?;
        }
        Ok(w)
    }

    /// k-fold d-transformation; with the leader order reversed it inverts
    /// `e_chain`.
    pub fn d_chain(&self, leaders: &[BigUint], word: &[BigUint]) -> Result<Vec<BigUint>> {
        if leaders.is_empty() {
            return Err(Error::InvalidParameter("at least one leader required"));
        }
        let mut w = word.to_vec();
        for leader in leaders {
            w = self.d_transform(leader, &w)?;
        }
        Ok(w)
    }
}

/// A fully materialized quasigroup of small order built from its first
/// row: `table[i][j] = i * row[j] mod p`. O(p^2) memory — test tooling for
/// exhaustive checks, capped at p <= 257.
#[derive(Debug, Clone)]
pub struct SmallQuasigroupTable {
    p: u32,
    row: Vec<u32>,
    table: Vec<Vec<u32>>,
}

/// Builds the table from a permutation of {1, ..., p-1}.
pub fn build_small_table(p: u32, row: &[u32]) -> Result<SmallQuasigroupTable> {
    if !(3..=257).contains(&p) {
        return Err(Error::InvalidParameter("small table requires 3 <= p <= 257"));
    }
    let n = (p - 1) as usize;
    if row.len() != n {
        return Err(Error::InvalidParameter("first row has wrong length"));
    }
    let mut seen = vec![false; n];
    for &v in row {
        if v == 0 || v >= p || seen[(v - 1) as usize] {
            return Err(Error::InvalidParameter("first row is not a permutation"));
        }
        seen[(v - 1) as usize] = true;
    }
    let table = (1..p)
        .map(|i| row.iter().map(|&r| (i * r) % p).collect())
        .collect();
    Ok(SmallQuasigroupTable {
        p,
        row: row.to_vec(),
        table,
    })
}

impl SmallQuasigroupTable {
    pub fn order(&self) -> u32 {
        self.p - 1
    }

    pub fn first_row(&self) -> &[u32] {
        &self.row
    }

    /// Product of elements i, j in [1, p-1].
    pub fn get(&self, i: u32, j: u32) -> u32 {
        self.table[(i - 1) as usize][(j - 1) as usize]
    }

    /// True when every row and every column is a permutation of
    /// {1, ..., p-1}.
    pub fn is_latin_square(&self) -> bool {
        let n = self.order() as usize;
        let perm = |values: &mut dyn Iterator<Item = u32>| {
            let mut seen = vec![false; n];
            for v in values {
                if v == 0 || v > n as u32 || seen[(v - 1) as usize] {
                    return false;
                }
                seen[(v - 1) as usize] = true;
            }
            true
        };
        (0..n).all(|i| perm(&mut self.table[i].iter().copied()))
            && (0..n).all(|j| perm(&mut (0..n).map(|i| self.table[i][j])))
    }
}
