//! Lehmer-accelerated extended Euclid on raw u64 limbs, specialized to
//! modular inversion.
//!
//! The classical algorithm simulates Euclid on the 63-bit leading
//! windows of the two values, accumulating the quotient sequence in a
//! 2x2 single-precision matrix that is then applied to the full-size
//! values in one pass each. Cofactor signs follow a checkerboard that
//! alternates every step, so the matrix is kept as four magnitudes plus
//! the step parity, and all full-size updates are carried out on plain
//! limb slices without sign handling. One inversion at 785 bits costs a
//! few microseconds versus a few hundred for digit-by-digit Euclid,
//! which is what makes the per-block cipher cost small compared to a
//! modular exponentiation.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;

/// Coefficient cap: keeps every scalar product below 2^126 (no i128
/// overflow in the linear combinations) and window sums below 2^64.
const COEF_CAP: u64 = 1 << 62;

/// x^(-1) mod m, or None when gcd(x, m) != 1. m >= 2.
pub(crate) fn invert(x: &BigUint, m: &BigUint) -> Option<BigUint> {
    let x = x % m;
    if x.is_zero() {
        return None;
    }
    let mut r0 = to_limbs(m);
    let mut r1 = to_limbs(&x);
    // t0/t1 are the x-cofactors of r0/r1 as magnitudes. Their true signs
    // alternate: sign(t0) = s, sign(t1) = -s, where s is "negative" when
    // `phase_negative` holds. t1 starts at +1, so the phase starts
    // negative (t0 is zero and carries no sign of its own).
    let mut cof = Cofactors {
        t0: vec![],
        t1: vec![1],
        phase_negative: true,
        scratch_a: vec![],
        scratch_b: vec![],
    };
    let mut new_r0: Vec<u64> = Vec::new();
    let mut new_r1: Vec<u64> = Vec::new();

    loop {
        if r1.is_empty() {
            break;
        }
        let n = bits(&r0);
        if n <= 64 {
            break;
        }
        let shift = n - 63;
        let x_top = extract64(&r0, shift); // in [2^62, 2^63)
        let y_top = extract64(&r1, shift);

        let (matrix, steps) = simulate(x_top, y_top);
        if steps == 0 {
            // the windows predicted nothing (huge quotient); take one
            // exact full-precision division step
            full_division_step(&mut r0, &mut r1, &mut cof);
            continue;
        }
        let Matrix { au, bu, cu, du } = matrix;
        // after an even number of steps the signed matrix has the
        // pattern (a >= 0, b <= 0, c <= 0, d >= 0); odd flips all signs.
        // Both r updates cancel, both t updates accumulate.
        if steps % 2 == 0 {
            lincomb_sub(&mut new_r0, au, &r0, bu, &r1);
            lincomb_sub(&mut new_r1, du, &r1, cu, &r0);
        } else {
            lincomb_sub(&mut new_r0, bu, &r1, au, &r0);
            lincomb_sub(&mut new_r1, cu, &r0, du, &r1);
        }
        std::mem::swap(&mut r0, &mut new_r0);
        std::mem::swap(&mut r1, &mut new_r1);
        cof.apply_matrix(&matrix, steps);
        if cmp_limbs(&r0, &r1) == std::cmp::Ordering::Less {
            std::mem::swap(&mut r0, &mut r1);
            cof.swap_pair();
        }
    }

    // tail: both remainders fit in one limb; exact u64 Euclid, flushing
    // the accumulated matrix into the cofactors only when it fills up
    let mut x_small = r0.first().copied().unwrap_or(0);
    let mut y_small = r1.first().copied().unwrap_or(0);
    let mut matrix = Matrix::identity();
    let mut steps = 0u32;
    while y_small != 0 {
        let q = x_small / y_small;
        match matrix.push_quotient(q) {
            Some(next) => {
                matrix = next;
                steps += 1;
            }
            None => {
                cof.apply_matrix(&matrix, steps);
                matrix = Matrix::identity();
                steps = 0;
                cof.apply_big_quotient(q);
            }
        }
        (x_small, y_small) = (y_small, x_small - q * y_small);
    }
    cof.apply_matrix(&matrix, steps);

    if x_small != 1 {
        return None; // gcd != 1
    }
    let magnitude = from_limbs(&cof.t0) % m;
    Some(if cof.phase_negative && !magnitude.is_zero() {
        m - magnitude
    } else {
        magnitude
    })
}

/// Single-precision quotient matrix as magnitudes; the signs are implied
/// by the step parity tracked alongside.
struct Matrix {
    au: u64,
    bu: u64,
    cu: u64,
    du: u64,
}

impl Matrix {
    fn identity() -> Self {
        Matrix {
            au: 1,
            bu: 0,
            cu: 0,
            du: 1,
        }
    }

    /// Absorbs one quotient; None when the result would breach the cap.
    fn push_quotient(&self, q: u64) -> Option<Matrix> {
        let nc = q.checked_mul(self.cu)?.checked_add(self.au)?;
        let nd = q.checked_mul(self.du)?.checked_add(self.bu)?;
        (nc < COEF_CAP && nd < COEF_CAP).then_some(Matrix {
            au: self.cu,
            bu: self.du,
            cu: nc,
            du: nd,
        })
    }
}

/// Runs Euclid on the leading windows. A quotient is accepted only when
/// the two sign-extreme estimates agree (the classical validity test),
/// so every accepted quotient is exact for the full-size values.
fn simulate(mut x: u64, mut y: u64) -> (Matrix, u32) {
    let mut m = Matrix::identity();
    let mut steps = 0u32;
    loop {
        let even = steps.is_multiple_of(2);
        let quotients = if even {
            match (y.checked_sub(m.cu), x.checked_sub(m.bu)) {
                (Some(q1d), Some(q2n)) if q1d != 0 => Some((x + m.au, q1d, q2n, y + m.du)),
                _ => None,
            }
        } else {
            match (x.checked_sub(m.au), y.checked_sub(m.du)) {
                (Some(q1n), Some(q2d)) if q2d != 0 => Some((q1n, y + m.cu, x + m.bu, q2d)),
                _ => None,
            }
        };
        let Some((q1n, q1d, q2n, q2d)) = quotients else {
            break;
        };
        let q = q1n / q1d;
        if q != q2n / q2d || q == 0 {
            break;
        }
        let Some(next) = m.push_quotient(q) else {
            break;
        };
        // q <= x/y by construction, so the remainder stays nonnegative
        (x, y) = (y, x - q * y);
        m = next;
        steps += 1;
    }
    (m, steps)
}

/// The big cofactor pair plus its sign phase and reusable scratch.
struct Cofactors {
    t0: Vec<u64>,
    t1: Vec<u64>,
    phase_negative: bool,
    scratch_a: Vec<u64>,
    scratch_b: Vec<u64>,
}

impl Cofactors {
    /// t0' = a*t0 + b*t1, t1' = c*t0 + d*t1. With opposite signs on
    /// t0/t1 and the checkerboard on the matrix, both combinations are
    /// additive in magnitudes; an odd step count flips the phase.
    fn apply_matrix(&mut self, m: &Matrix, steps: u32) {
        if steps == 0 {
            return;
        }
        lincomb_add(&mut self.scratch_a, m.au, &self.t0, m.bu, &self.t1);
        lincomb_add(&mut self.scratch_b, m.cu, &self.t0, m.du, &self.t1);
        std::mem::swap(&mut self.t0, &mut self.scratch_a);
        std::mem::swap(&mut self.t1, &mut self.scratch_b);
        if !steps.is_multiple_of(2) {
            self.phase_negative = !self.phase_negative;
        }
    }

    /// One exact division step with a quotient too large for the matrix:
    /// t0' = t1, t1' = t0 + q*t1, phase flips.
    fn apply_big_quotient(&mut self, q: u64) {
        lincomb_add(&mut self.scratch_a, 1, &self.t0, q, &self.t1);
        std::mem::swap(&mut self.t1, &mut self.scratch_a);
        std::mem::swap(&mut self.t0, &mut self.scratch_a);
        self.phase_negative = !self.phase_negative;
    }

    fn swap_pair(&mut self) {
        std::mem::swap(&mut self.t0, &mut self.t1);
        self.phase_negative = !self.phase_negative;
    }
}

/// Exact full-precision Euclid step for quotients the window cannot
/// certify; rare, so plain bignum arithmetic is fine here.
fn full_division_step(r0: &mut Vec<u64>, r1: &mut Vec<u64>, cof: &mut Cofactors) {
    let (q, r) = from_limbs(r0).div_rem(&from_limbs(r1));
    *r0 = std::mem::take(r1);
    *r1 = to_limbs(&r);
    match u64::try_from(&q) {
        Ok(q_small) => cof.apply_big_quotient(q_small),
        Err(_) => {
            // t1' = t0 + q*t1 in bignum space
            let nt1 = from_limbs(&cof.t0) + q * from_limbs(&cof.t1);
            let old_t1 = std::mem::take(&mut cof.t1);
            cof.t1 = to_limbs(&nt1);
            cof.t0 = old_t1;
            cof.phase_negative = !cof.phase_negative;
        }
    }
}

// ---- limb primitives (little-endian u64 slices, no leading zeros) ----

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn to_limbs(v: &BigUint) -> Vec<u64> {
    let mut out: Vec<u64> = v.iter_u64_digits().collect();
    trim(&mut out);
    out
}

fn from_limbs(v: &[u64]) -> BigUint {
    let mut bytes = Vec::with_capacity(v.len() * 8);
    for limb in v {
        bytes.extend_from_slice(&limb.to_le_bytes());
    }
    BigUint::from_bytes_le(&bytes)
}

fn bits(a: &[u64]) -> u64 {
    match a.last() {
        None => 0,
        Some(&top) => a.len() as u64 * 64 - top.leading_zeros() as u64,
    }
}

fn cmp_limbs(a: &[u64], b: &[u64]) -> std::cmp::Ordering {
    if a.len() != b.len() {
        return a.len().cmp(&b.len());
    }
    for i in (0..a.len()).rev() {
        if a[i] != b[i] {
            return a[i].cmp(&b[i]);
        }
    }
    std::cmp::Ordering::Equal
}

/// (a >> shift) truncated to 64 bits; zero when shifted past the top.
fn extract64(a: &[u64], shift: u64) -> u64 {
    let w = (shift / 64) as usize;
    let s = (shift % 64) as u32;
    let lo = a.get(w).copied().unwrap_or(0);
    let hi = a.get(w + 1).copied().unwrap_or(0);
    if s == 0 {
        lo
    } else {
        (lo >> s) | (hi << (64 - s))
    }
}

/// out = alpha*u - beta*v, which the caller guarantees is nonnegative.
/// Coefficients stay below 2^62, so the i128 accumulator cannot overflow.
fn lincomb_sub(out: &mut Vec<u64>, alpha: u64, u: &[u64], beta: u64, v: &[u64]) {
    let n = u.len().max(v.len());
    out.clear();
    out.reserve(n + 1);
    let mut carry: i128 = 0;
    for i in 0..n {
        let pu = alpha as u128 * u.get(i).copied().unwrap_or(0) as u128;
        let pv = beta as u128 * v.get(i).copied().unwrap_or(0) as u128;
        let acc = pu as i128 - pv as i128 + carry;
        out.push(acc as u64);
        carry = acc >> 64;
    }
    debug_assert!(carry >= 0, "linear combination went negative");
    if carry > 0 {
        out.push(carry as u64);
    }
    trim(out);
}

/// out = alpha*u + beta*v.
fn lincomb_add(out: &mut Vec<u64>, alpha: u64, u: &[u64], beta: u64, v: &[u64]) {
    let n = u.len().max(v.len());
    out.clear();
    out.reserve(n + 1);
    let mut carry: u128 = 0;
    for i in 0..n {
        let acc = alpha as u128 * u.get(i).copied().unwrap_or(0) as u128
            + beta as u128 * v.get(i).copied().unwrap_or(0) as u128
            + carry;
        out.push(acc as u64);
        carry = acc >> 64;
    }
    while carry > 0 {
        out.push(carry as u64);
        carry >>= 64;
    }
    trim(out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::{BigInt, RandBigInt};
    use num_integer::Integer;
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn reference(x: &BigUint, m: &BigUint) -> Option<BigUint> {
        let e = BigInt::from(x % m).extended_gcd(&BigInt::from(m.clone()));
        if !e.gcd.is_one() {
            return None;
        }
        Some(e.x.mod_floor(&BigInt::from(m.clone())).to_biguint().unwrap())
    }

    #[test]
    fn exhaustive_small_moduli() {
        for m in 2u64..512 {
            let m_big = BigUint::from(m);
            for x in 0..m {
                let x_big = BigUint::from(x);
                assert_eq!(
                    invert(&x_big, &m_big),
                    reference(&x_big, &m_big),
                    "m={m} x={x}"
                );
            }
        }
    }

    #[test]
    fn differential_random_widths() {
        let mut rng = ChaCha20Rng::seed_from_u64(0x1e13);
        for mbits in [65u64, 96, 128, 256, 784, 1024, 2008] {
            let moduli = [
                (BigUint::one() << mbits) + 3u32,
                (BigUint::one() << mbits) - 1u32, // composite, gcd cases
                rng.gen_biguint(mbits) | (BigUint::one() << (mbits - 1)),
            ];
            for m in moduli {
                for _ in 0..300 {
                    let x = rng.gen_biguint_below(&m);
                    assert_eq!(invert(&x, &m), reference(&x, &m), "m={m} x={x}");
                }
                for x in [
                    BigUint::one(),
                    &m - 1u32,
                    &m - 2u32,
                    BigUint::from(2u32),
                    (&m >> 1) - 1u32,
                    (&m >> 1) + 1u32,
                    BigUint::one() << (mbits / 2),
                ] {
                    assert_eq!(invert(&x, &m), reference(&x, &m), "m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn values_exceeding_modulus_are_reduced() {
        let m = BigUint::from(65537u32);
        let x = BigUint::from(3u32) + &m * 12345u32;
        assert_eq!(invert(&x, &m), reference(&x, &m));
    }

    #[test]
    fn fibonacci_worst_case_quotients() {
        // Consecutive Fibonacci numbers make every quotient 1, the
        // longest possible division chain for their size.
        let mut a = BigUint::from(1u32);
        let mut b = BigUint::from(1u32);
        while b.bits() < 2100 {
            let next = &a + &b;
            a = std::mem::replace(&mut b, next);
            if b.bits() % 97 == 0 {
                assert_eq!(invert(&a, &b), reference(&a, &b), "bits {}", b.bits());
            }
        }
    }

    /// Heavier differential sweep; run on demand with
    /// `cargo test -p qgstream --release -- --ignored`.
    #[test]
    #[ignore]
    fn stress_differential() {
        let mut rng = ChaCha20Rng::seed_from_u64(0x57e55);
        for round in 0..50_000u64 {
            let mbits = 64 + (round % 30) * 67;
            let m = rng.gen_biguint(mbits) | (BigUint::one() << (mbits - 1)) | BigUint::one();
            let x = match round % 5 {
                0 => rng.gen_biguint_below(&m),
                1 => rng.gen_biguint(mbits / 2 + 1) % &m,
                2 => (&m - 1u32) >> (round % 40) as usize,
                3 => BigUint::one() << (round % mbits) as usize,
                _ => &m - BigUint::from(round % 97 + 1),
            };
            assert_eq!(invert(&x, &m), reference(&x, &m), "round {round} m={m} x={x}");
        }
    }
}
