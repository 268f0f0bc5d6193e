//! Arbitrary-precision modular arithmetic and prime machinery.
//!
//! Everything here is a pure function of its inputs plus an injected
//! random source, so callers can replay test vectors with a seeded rng.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

mod lehmer;

/// Default Miller-Rabin round count; error probability <= 4^-40.
pub const DEFAULT_MR_ROUNDS: u32 = 40;

/// Primes below 1000, used for trial division before Miller-Rabin.
const SMALL_PRIMES: [u32; 168] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419,
    421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541,
    547, 557, 563, 569, 571, 577, 587, 593, 599, 601, 607, 613, 617, 619, 631, 641, 643, 647, 653,
    659, 661, 673, 677, 683, 691, 701, 709, 719, 727, 733, 739, 743, 751, 757, 761, 769, 773, 787,
    797, 809, 811, 821, 823, 827, 829, 839, 853, 857, 859, 863, 877, 881, 883, 887, 907, 911, 919,
    929, 937, 941, 947, 953, 967, 971, 977, 983, 991, 997,
];

/// Public group context: a prime `p`, a group element `alpha` intended as a
/// generator of Z_p*, and optionally the distinct prime factors of `p - 1`
/// with which the generator claim was actually verified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeParams {
    p: BigUint,
    alpha: BigUint,
    p_minus_1_factors: Option<Vec<BigUint>>,
    generator_verified: bool,
}

impl PrimeParams {
    /// Build params and verify `alpha` is a generator using the supplied
    /// distinct prime factors of `p - 1`. The factor list must account for
    /// all of `p - 1`; a partial or wrong list is rejected rather than
    /// silently accepted.
    pub fn verified(
        p: BigUint,
        alpha: BigUint,
        p_minus_1_factors: Vec<BigUint>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        check_prime_and_alpha(&p, &alpha, rng)?;
        check_factor_cover(&p, &p_minus_1_factors, rng)?;
        if !is_generator(&p, &p_minus_1_factors, &alpha) {
            return Err(Error::CannotVerify("alpha is not a generator"));
        }
        Ok(PrimeParams {
            p,
            alpha,
            p_minus_1_factors: Some(p_minus_1_factors),
            generator_verified: true,
        })
    }

    /// Build params without a factorization of `p - 1`. Primality of `p`
    /// and the range of `alpha` are still checked; the generator property
    /// is recorded as unverified.
    pub fn unverified(p: BigUint, alpha: BigUint, rng: &mut impl Rng) -> Result<Self> {
        check_prime_and_alpha(&p, &alpha, rng)?;
        Ok(PrimeParams {
            p,
            alpha,
            p_minus_1_factors: None,
            generator_verified: false,
        })
    }

    /// Rebuild params from stored fields (key files). Primality is
    /// re-checked; the recorded generator status is trusted as-is.
    pub fn from_stored(
        p: BigUint,
        alpha: BigUint,
        generator_verified: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        check_prime_and_alpha(&p, &alpha, rng)?;
        Ok(PrimeParams {
            p,
            alpha,
            p_minus_1_factors: None,
            generator_verified,
        })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn alpha(&self) -> &BigUint {
        &self.alpha
    }

    pub fn p_minus_1_factors(&self) -> Option<&[BigUint]> {
        self.p_minus_1_factors.as_deref()
    }

    pub fn generator_verified(&self) -> bool {
        self.generator_verified
    }
}

fn check_prime_and_alpha(p: &BigUint, alpha: &BigUint, rng: &mut impl Rng) -> Result<()> {
    if !is_probable_prime(p, DEFAULT_MR_ROUNDS, rng) {
        return Err(Error::InvalidParameter("p is not prime"));
    }
    let two = BigUint::from(2u32);
    if alpha < &two || alpha > &(p - 1u32) {
        return Err(Error::InvalidParameter("alpha outside [2, p-1]"));
    }
    Ok(())
}

/// Checks that the listed primes are prime, divide `p - 1`, and jointly
/// account for all of `p - 1` (stripping every listed prime to full
/// multiplicity must leave cofactor 1).
fn check_factor_cover(p: &BigUint, factors: &[BigUint], rng: &mut impl Rng) -> Result<()> {
    if factors.is_empty() {
        return Err(Error::CannotVerify("empty factor list for p - 1"));
    }
    let order = p - 1u32;
    let mut cofactor = order.clone();
    for q in factors {
        if !is_probable_prime(q, DEFAULT_MR_ROUNDS, rng) {
            return Err(Error::CannotVerify("listed factor is not prime"));
        }
        if !(&order % q).is_zero() {
            return Err(Error::CannotVerify("listed factor does not divide p - 1"));
        }
        while (&cofactor % q).is_zero() {
            cofactor /= q;
        }
    }
    if !cofactor.is_one() {
        return Err(Error::CannotVerify("factor list does not cover p - 1"));
    }
    Ok(())
}

/// Square-and-multiply exponentiation `base^exp mod modulus`.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if modulus < &BigUint::from(2u32) {
        return Err(Error::InvalidModulus);
    }
    Ok(base.modpow(exp, modulus))
}

/// Multiplicative inverse mod `modulus` by Lehmer's variant of the
/// extended Euclidean algorithm (the cipher pays one inversion per
/// quasigroup step, so this is the hot operation). Errors when `x` is 0
/// mod `modulus` or shares a factor with it.
pub fn mod_inv(x: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if modulus < &BigUint::from(2u32) {
        return Err(Error::InvalidModulus);
    }
    lehmer::invert(x, modulus).ok_or(Error::NotInvertible)
}

/// Miller-Rabin with `rounds` random bases, preceded by trial division
/// over the primes below 1000. False positives occur with probability
/// at most 4^-rounds.
pub fn is_probable_prime(n: &BigUint, rounds: u32, rng: &mut impl Rng) -> bool {
    match trial_division(n) {
        Some(answer) => answer,
        None => {
            let two = BigUint::from(2u32);
            let n_minus_2 = n - 2u32;
            (0..rounds.max(1)).all(|_| {
                let base = rng.gen_biguint_range(&two, &n_minus_2);
                !mr_witnesses_composite(n, &base)
            })
        }
    }
}

/// Deterministic variant used as an internal guard: Miller-Rabin over the
/// first twelve primes as bases (exact below 3.3 * 10^24, an extremely
/// strong heuristic above).
pub(crate) fn is_probable_prime_fixed_bases(n: &BigUint) -> bool {
    match trial_division(n) {
        Some(answer) => answer,
        None => SMALL_PRIMES[..12]
            .iter()
            .all(|b| !mr_witnesses_composite(n, &BigUint::from(*b))),
    }
}

/// Resolves small inputs outright; `None` means undecided (no small factor
/// and too large to settle by trial division).
fn trial_division(n: &BigUint) -> Option<bool> {
    if n < &BigUint::from(2u32) {
        return Some(false);
    }
    for q in SMALL_PRIMES {
        let q_big = BigUint::from(q);
        if n == &q_big {
            return Some(true);
        }
        if (n % q_big).is_zero() {
            return Some(false);
        }
    }
    // No factor below 1000: composite n must exceed 1009^2.
    if n < &BigUint::from(1_018_081u32) {
        return Some(true);
    }
    None
}

/// One Miller-Rabin round; true means `base` proves `n` composite.
/// Caller guarantees n odd, n > 3, gcd(n, base) considerations handled by
/// trial division beforehand.
fn mr_witnesses_composite(n: &BigUint, base: &BigUint) -> bool {
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let d = &n_minus_1 >> s;

    let mut x = base.modpow(&d, n);
    if x.is_one() || x == n_minus_1 {
        return false;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n_minus_1 {
            return false;
        }
    }
    true
}

/// The modulus candidate `2^(8l) + 3` for `l`-byte plaintext blocks.
pub fn pl_modulus(l: u32) -> BigUint {
    (BigUint::one() << (8 * l as usize)) + 3u32
}

/// Returns `2^(8l) + 3` when that number is probably prime, `None`
/// otherwise (e.g. l = 1: 259 = 7 * 37).
pub fn gen_pl_prime(l: u32, rng: &mut impl Rng) -> Option<BigUint> {
    let candidate = pl_modulus(l);
    is_probable_prime(&candidate, DEFAULT_MR_ROUNDS, rng).then_some(candidate)
}

/// True when `alpha^((p-1)/q) != 1` for every listed prime factor `q`.
/// Only meaningful when the list covers all distinct prime factors.
pub fn is_generator(p: &BigUint, p_minus_1_factors: &[BigUint], alpha: &BigUint) -> bool {
    let order = p - 1u32;
    p_minus_1_factors.iter().all(|q| {
        let e = &order / q;
        !alpha.modpow(&e, p).is_one()
    })
}

/// Samples group elements until one passes the generator test for the
/// supplied complete factorization of `p - 1`.
pub fn find_generator(
    p: &BigUint,
    p_minus_1_factors: &[BigUint],
    rng: &mut impl Rng,
) -> Result<BigUint> {
    if p < &BigUint::from(5u32) {
        return Err(Error::CannotVerify("modulus too small"));
    }
    check_factor_cover(p, p_minus_1_factors, rng)?;
    let two = BigUint::from(2u32);
    let upper = p - 1u32; // gen range is half-open: candidates in [2, p-2]
    loop {
        let candidate = rng.gen_biguint_range(&two, &upper);
        if is_generator(p, p_minus_1_factors, &candidate) {
            return Ok(candidate);
        }
    }
}

/// Square roots of `a` mod an odd prime `p`. Returns the pair `(r, p - r)`
/// with `r <= p - r` when `a` is a quadratic residue, `Some((0, 0))` for
/// `a = 0`, and `None` for a non-residue.
pub fn tonelli_shanks(a: &BigUint, p: &BigUint) -> Result<Option<(BigUint, BigUint)>> {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if p < &BigUint::from(3u32) || (p % &two).is_zero() || !is_probable_prime_fixed_bases(p) {
        return Err(Error::InvalidModulus);
    }
    let a = a % p;
    if a.is_zero() {
        return Ok(Some((BigUint::zero(), BigUint::zero())));
    }

    let p_minus_1 = p - &one;
    let legendre = a.modpow(&(&p_minus_1 / &two), p);
    if legendre == p_minus_1 {
        return Ok(None);
    }

    let root = if (p % 4u32) == BigUint::from(3u32) {
        a.modpow(&((p + &one) / 4u32), p)
    } else {
        // p = 1 (mod 4): full Tonelli-Shanks. Write p - 1 = q * 2^s.
        let s = p_minus_1.trailing_zeros().expect("p > 1");
        let q = &p_minus_1 >> s;

        // Any quadratic non-residue serves as the progression seed.
        let mut z = two.clone();
        while z.modpow(&(&p_minus_1 / &two), p) != p_minus_1 {
            z += 1u32;
        }

        let mut c = z.modpow(&q, p);
        let mut t = a.modpow(&q, p);
        let mut r = a.modpow(&((&q + &one) / &two), p);
        let mut m = s;
        while !t.is_one() {
            let mut i = 0u64;
            let mut t2 = t.clone();
            while !t2.is_one() {
                t2 = (&t2 * &t2) % p;
                i += 1;
                if i == m {
                    // Unreachable for residues; guards against misuse.
                    return Ok(None);
                }
            }
            let b = c.modpow(&(one.clone() << (m - i - 1) as usize), p);
            r = (&r * &b) % p;
            c = (&b * &b) % p;
            t = (&t * &c) % p;
            m = i;
        }
        r
    };

    let other = p - &root;
    Ok(Some(if root <= other {
        (root, other)
    } else {
        (other, root)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(0x1234)
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn mod_pow_session_vector() {
        // 13^10307 mod 65537 = 29656
        assert_eq!(
            mod_pow(&big(13), &big(10307), &big(65537)).unwrap(),
            big(29656)
        );
    }

    #[test]
    fn mod_pow_zero_exponent() {
        assert_eq!(mod_pow(&big(7), &big(0), &big(65537)).unwrap(), big(1));
    }

    #[test]
    fn mod_pow_fermat() {
        // 13^(p-1) = 1 mod p, cross-checked against a plain repeated-squaring
        // chain written out independently of modpow.
        let p = big(65537);
        assert_eq!(mod_pow(&big(13), &big(65536), &p).unwrap(), big(1));
        let mut x = big(13);
        for _ in 0..16 {
            x = (&x * &x) % &p;
        }
        assert_eq!(x, big(1));
        // and for random bases
        let mut rng = rng();
        for _ in 0..50 {
            let a = rng.gen_biguint_range(&big(1), &p);
            assert_eq!(mod_pow(&a, &big(65536), &p).unwrap(), big(1));
        }
    }

    #[test]
    fn mod_pow_rejects_tiny_modulus() {
        assert!(matches!(
            mod_pow(&big(3), &big(4), &big(1)),
            Err(Error::InvalidModulus)
        ));
    }

    #[test]
    fn mod_inv_basics() {
        let p = big(65537);
        assert_eq!(mod_inv(&big(1), &p).unwrap(), big(1));
        assert_eq!(mod_inv(&big(65536), &p).unwrap(), big(65536));
        let y = mod_inv(&big(34750), &p).unwrap();
        assert_eq!((&y * 34750u32) % &p, big(1));
        assert_eq!(y, big(18439));
        assert!(matches!(mod_inv(&big(0), &p), Err(Error::NotInvertible)));
    }

    #[test]
    fn mod_inv_randomized_identity() {
        let mut rng = rng();
        for p in [big(65537), pl_modulus(98)] {
            for _ in 0..1000 {
                let x = rng.gen_biguint_range(&big(1), &p);
                let y = mod_inv(&x, &p).unwrap();
                assert_eq!((&x * &y) % &p, big(1));
            }
        }
    }

    #[test]
    fn primality_examples() {
        let mut rng = rng();
        assert!(is_probable_prime(&big(65537), 40, &mut rng));
        assert!(!is_probable_prime(&big(65536), 40, &mut rng));
        assert!(!is_probable_prime(&big(259), 40, &mut rng)); // 7 * 37
        assert!(is_probable_prime(&big(2), 40, &mut rng));
        assert!(!is_probable_prime(&big(1), 40, &mut rng));
        // Strong pseudoprime to base 2; must still be rejected.
        assert!(!is_probable_prime(&big(3_215_031_751), 40, &mut rng));
    }

    #[test]
    fn pl_primes() {
        let mut rng = rng();
        assert_eq!(gen_pl_prime(1, &mut rng), None);
        let p98 = gen_pl_prime(98, &mut rng).expect("2^784 + 3 is prime");
        assert_eq!(p98, (BigUint::one() << 784) + 3u32);
        assert_eq!(p98.bits(), 785); // 784-bit blocks plus the carry bit
        let p213 = gen_pl_prime(213, &mut rng).expect("2^1704 + 3 is prime");
        assert_eq!(p213.bits(), 1705);
    }

    #[test]
    fn generator_acceptance() {
        // p - 1 = 2^16, so the only condition is alpha^32768 != 1.
        let p = big(65537);
        let factors = [big(2)];
        assert_eq!(mod_pow(&big(3), &big(32768), &p).unwrap(), big(65536));
        assert!(is_generator(&p, &factors, &big(3)));
        assert!(!is_generator(&p, &factors, &big(65536))); // order 2
        // 13 is a quadratic residue mod 65537 (order 8192), so it fails
        // the test even though it appears as "a generator" in folklore
        // descriptions of this prime.
        assert_eq!(mod_pow(&big(13), &big(32768), &p).unwrap(), big(1));
        assert!(!is_generator(&p, &factors, &big(13)));
    }

    #[test]
    fn find_generator_small_field() {
        // Brute-force oracle: the generators of Z_11* are exactly {2, 6, 7, 8}.
        let p = big(11);
        let mut expected = Vec::new();
        for g in 2u64..10 {
            let mut seen = std::collections::HashSet::new();
            let mut x = big(1);
            for _ in 0..10 {
                seen.insert(x.clone());
                x = (&x * g) % &p;
            }
            if seen.len() == 10 {
                expected.push(big(g));
            }
        }
        assert_eq!(expected, vec![big(2), big(6), big(7), big(8)]);

        let mut rng = rng();
        for _ in 0..20 {
            let g = find_generator(&p, &[big(2), big(5)], &mut rng).unwrap();
            assert!(expected.contains(&g));
        }
    }

    #[test]
    fn find_generator_rejects_bad_factor_lists() {
        let mut rng = rng();
        let p = big(65537);
        assert!(matches!(
            find_generator(&p, &[], &mut rng),
            Err(Error::CannotVerify(_))
        ));
        // 3 does not divide 2^16.
        assert!(matches!(
            find_generator(&p, &[big(2), big(3)], &mut rng),
            Err(Error::CannotVerify(_))
        ));
        // Incomplete cover: p = 11, p - 1 = 2 * 5, listing only 2.
        assert!(matches!(
            find_generator(&big(11), &[big(2)], &mut rng),
            Err(Error::CannotVerify(_))
        ));
    }

    #[test]
    fn generator_output_has_full_order_small_p() {
        let mut rng = rng();
        for (p, factors) in [
            (big(11), vec![big(2), big(5)]),
            (big(257), vec![big(2)]),
            (big(101), vec![big(2), big(5)]),
        ] {
            let g = find_generator(&p, &factors, &mut rng).unwrap();
            let mut seen = std::collections::HashSet::new();
            let mut x = big(1);
            let order = (&p - 1u32).to_u64_digits()[0];
            for _ in 0..order {
                seen.insert(x.clone());
                x = (&x * &g) % &p;
            }
            assert_eq!(seen.len() as u64, order);
        }
    }

    #[test]
    fn tonelli_shanks_examples() {
        let p = big(65537);
        assert_eq!(
            tonelli_shanks(&big(4), &p).unwrap(),
            Some((big(2), big(65535)))
        );
        assert_eq!(
            tonelli_shanks(&big(0), &p).unwrap(),
            Some((big(0), big(0)))
        );
        assert!(matches!(
            tonelli_shanks(&big(4), &big(65536)),
            Err(Error::InvalidModulus)
        ));
        assert!(matches!(
            tonelli_shanks(&big(4), &big(259)),
            Err(Error::InvalidModulus)
        ));
    }

    #[test]
    fn tonelli_shanks_matches_squaring_table_mod_11() {
        // Exhaustive oracle over Z_11 (p = 3 mod 4 path).
        let p = big(11);
        let mut squares: std::collections::HashMap<u64, Vec<u64>> = Default::default();
        for x in 0u64..11 {
            squares.entry(x * x % 11).or_default().push(x);
        }
        for a in 1u64..11 {
            let got = tonelli_shanks(&big(a), &p).unwrap();
            match squares.get(&a) {
                Some(roots) => {
                    let (lo, hi) = got.expect("residue must have roots");
                    let mut expect = roots.clone();
                    expect.sort_unstable();
                    assert_eq!(lo, big(expect[0]));
                    assert_eq!(hi, big(expect[expect.len() - 1]));
                }
                None => assert_eq!(got, None),
            }
        }
    }

    #[test]
    fn tonelli_shanks_random_round_trip() {
        // p = 1 mod 4 path at the session prime and a big p_l prime.
        let mut rng = rng();
        for p in [big(65537), pl_modulus(98)] {
            for _ in 0..25 {
                let x = rng.gen_biguint_range(&big(1), &p);
                let sq = (&x * &x) % &p;
                let (lo, hi) = tonelli_shanks(&sq, &p).unwrap().expect("constructed residue");
                assert!(x == lo || x == hi);
                assert_eq!((&lo * &lo) % &p, sq);
                assert_eq!((&hi * &hi) % &p, sq);
            }
        }
    }

    #[test]
    fn prime_params_validation() {
        let mut rng = rng();
        let ok = PrimeParams::verified(big(65537), big(3), vec![big(2)], &mut rng).unwrap();
        assert!(ok.generator_verified());
        // 13 has order 8192, so strict verification must refuse it.
        assert!(matches!(
            PrimeParams::verified(big(65537), big(13), vec![big(2)], &mut rng),
            Err(Error::CannotVerify(_))
        ));
        assert!(matches!(
            PrimeParams::verified(big(65537), big(65536), vec![big(2)], &mut rng),
            Err(Error::CannotVerify(_))
        ));
        assert!(matches!(
            PrimeParams::verified(big(65536), big(13), vec![big(2)], &mut rng),
            Err(Error::InvalidParameter(_))
        ));
        let unv = PrimeParams::unverified(pl_modulus(98), big(2), &mut rng).unwrap();
        assert!(!unv.generator_verified());
    }
}
