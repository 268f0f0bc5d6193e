//! Working breaks of the cipher's weak configurations.
//!
//! k = 1: from one known plaintext/ciphertext stream the second-block
//! leader is publicly `1 + (c_1 mod (p-1))`, so the key falls out of one
//! linear relation and the initial leader from one division; candidates
//! are confirmed by full replay.
//!
//! k = 2, chosen plaintext, mod-p model: feeding the constant plaintext
//! p - 2 makes every step a division (`x * (p-2) = x / K`), and with all
//! arithmetic taken mod p only, three ciphertext blocks pin the key as a
//! root of a univariate cubic. k = 3 instances of the same model are
//! generated for external study but not solved here.

use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::numtheory::mod_inv;
use crate::polyring::PolyZp;
use crate::quasigroup::QuasigroupZp;
use crate::stream::StreamState;

/// A known plaintext/ciphertext block stream from the real cipher.
#[derive(Debug, Clone)]
pub struct KnownPlaintextSample {
    p: BigUint,
    plaintext: Vec<BigUint>,
    ciphertext: Vec<BigUint>,
}

impl KnownPlaintextSample {
    pub fn new(p: BigUint, plaintext: Vec<BigUint>, ciphertext: Vec<BigUint>) -> Result<Self> {
        if plaintext.len() != ciphertext.len() || plaintext.len() < 2 {
            return Err(Error::InvalidParameter(
                "need equally many plaintext and ciphertext blocks, at least 2",
            ));
        }
        for v in plaintext.iter().chain(&ciphertext) {
            if v.is_zero() || v >= &p {
                return Err(Error::OutOfDomain("sample block outside [1, p-1]"));
            }
        }
        Ok(KnownPlaintextSample {
            p,
            plaintext,
            ciphertext,
        })
    }
}

/// Key material recovered by [`attack_k1`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredK1 {
    pub key: BigUint,
    pub leader: BigUint,
}

/// Breaks a k = 1 stream: recovers (K, a_1) and verifies the pair by
/// re-encrypting the whole sample. A sample that was not produced by a
/// k = 1 cipher fails the replay and is rejected.
pub fn attack_k1(sample: &KnownPlaintextSample) -> Result<RecoveredK1> {
    let p = &sample.p;
    let p_minus_1 = p - 1u32;

    // After block one the single leader is publicly 1 + (c_1 mod (p-1)).
    let second_leader = BigUint::one() + &sample.ciphertext[0] % &p_minus_1;
    // c_2 = a'_1 * f_K(m_2), so f_K(m_2)^(-1) = a'_1 / c_2 = 1 + (K + m_2 mod (p-1)).
    let denom = (second_leader * mod_inv(&sample.ciphertext[1], p)?) % p;
    let key = (&denom - 1u32 + &p_minus_1 - &sample.plaintext[1] % &p_minus_1) % &p_minus_1;
    if key.is_zero() {
        return Err(Error::AttackFailed("derived key outside [1, p-2]"));
    }

    let qg = QuasigroupZp::new(p.clone(), key.clone())?;
    let perm = qg.column_perm(&sample.plaintext[0])?;
    let leader = (&sample.ciphertext[0] * mod_inv(&perm, p)?) % p;

    // Full replay is mandatory: the derivation used only blocks 1 and 2.
    let mut state = StreamState::new(qg, vec![leader.clone()])?;
    for (m, c) in sample.plaintext.iter().zip(&sample.ciphertext) {
        if &state.encrypt_block(m)? != c {
            return Err(Error::AttackFailed("replay mismatch; not a k = 1 stream"));
        }
    }
    Ok(RecoveredK1 { key, leader })
}

/// Parameters of the mod-p analysis model: same key and leader domains as
/// the real cipher, but every operation is taken mod p only.
#[derive(Debug, Clone)]
pub struct SimplifiedModelParams {
    p: BigUint,
    key: BigUint,
    leaders: Vec<BigUint>,
}

impl SimplifiedModelParams {
    pub fn new(p: BigUint, key: BigUint, leaders: Vec<BigUint>) -> Result<Self> {
        if key.is_zero() || key > &p - 2u32 {
            return Err(Error::InvalidParameter("key outside [1, p-2]"));
        }
        if leaders.is_empty() {
            return Err(Error::InvalidParameter("at least one leader required"));
        }
        for a in &leaders {
            if a.is_zero() || a >= &p {
                return Err(Error::OutOfDomain("leader outside [1, p-1]"));
            }
        }
        Ok(SimplifiedModelParams { p, key, leaders })
    }

    pub fn k(&self) -> usize {
        self.leaders.len()
    }
}

/// Encrypts `blocks` copies of the chosen plaintext p - 2 in the mod-p
/// model: the first step of each block divides by K, every later step
/// divides by (1 + K + x), and the k-th leader update drops the real
/// cipher's `1 + ... mod (p-1)` wrap, becoming the plain mod-p sum of the
/// intermediates. A vanishing denominator makes the instance degenerate.
pub fn simplified_encrypt(params: &SimplifiedModelParams, blocks: usize) -> Result<Vec<BigUint>> {
    let p = &params.p;
    let key_inv = mod_inv(&params.key, p)?;
    let k = params.k();
    let mut state = params.leaders.clone();
    let mut out = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut intermediates = Vec::with_capacity(k);
        let mut x = (&state[0] * &key_inv) % p;
        intermediates.push(x.clone());
        for a in &state[1..] {
            let denom = (BigUint::one() + &params.key + &x) % p;
            if denom.is_zero() {
                return Err(Error::DegenerateInstance);
            }
            x = (a * mod_inv(&denom, p)?) % p;
            intermediates.push(x.clone());
        }
        out.push(x);
        let sum = intermediates.iter().sum::<BigUint>() % p;
        state = intermediates;
        state[k - 1] = sum;
    }
    Ok(out)
}

/// The univariate cubic in the key satisfied by three mod-p-model
/// ciphertext blocks:
/// c3*K^3 + (-2 c2 + c3 - c2 c3)*K^2 + (c1 - c2 + c2^2)*K + (c2 c3 - c1 c3).
pub fn k2_cubic(c1: &BigUint, c2: &BigUint, c3: &BigUint, p: &BigUint) -> Result<PolyZp> {
    let c1 = BigInt::from(c1 % p);
    let c2 = BigInt::from(c2 % p);
    let c3 = BigInt::from(c3 % p);
    let coeffs = [
        &c2 * &c3 - &c1 * &c3,
        &c1 - &c2 + &c2 * &c2,
        -2 * &c2 + &c3 - &c2 * &c3,
        c3.clone(),
    ];
    let p_int = BigInt::from(p.clone());
    PolyZp::new(
        p.clone(),
        coeffs
            .into_iter()
            .map(|c| c.mod_floor(&p_int).to_biguint().expect("reduced"))
            .collect(),
    )
}

/// Recovers the first leader for a candidate key from the second (or, if
/// that degenerates, third) block relation of the k = 2 model.
fn recover_first_leader(
    c: [&BigUint; 3],
    key: &BigUint,
    p: &BigUint,
) -> Result<Option<BigUint>> {
    let p_int = BigInt::from(p.clone());
    let to_int = |v: &BigUint| BigInt::from(v.clone());
    // From block i+1: a_1 (c_{i+1} - K) = (c_i - c_{i+1} - c_{i+1} K) K^(i+1)
    for i in 0..2usize {
        let lead = c[i + 1];
        if lead == key {
            continue;
        }
        let diff = (to_int(lead) - to_int(key)).mod_floor(&p_int);
        let diff_inv = mod_inv(&diff.to_biguint().expect("reduced"), p)?;
        let numer = (to_int(c[i]) - to_int(lead) - to_int(lead) * to_int(key)).mod_floor(&p_int);
        let key_pow = key.modpow(&BigUint::from(i as u32 + 2), p);
        let a1 = numer.to_biguint().expect("reduced") * key_pow % p * diff_inv % p;
        return Ok(Some(a1));
    }
    Ok(None)
}

/// Chosen-plaintext break of the k = 2 mod-p model: finds the roots of
/// [`k2_cubic`], reconstructs (a_1, a_2) for each candidate key, and
/// returns the candidates whose replay reproduces all three blocks.
pub fn attack_k2_simplified(
    c1: &BigUint,
    c2: &BigUint,
    c3: &BigUint,
    p: &BigUint,
    rng: &mut impl Rng,
) -> Result<Vec<BigUint>> {
    let poly = k2_cubic(c1, c2, c3, p)?;
    if poly.is_zero() {
        return Err(Error::AttackFailed("cubic vanished; degenerate instance"));
    }
    let mut verified = Vec::new();
    for key in poly.roots(rng)? {
        if key.is_zero() || key > p - 2u32 {
            continue;
        }
        let Some(a1) = recover_first_leader([c1, c2, c3], &key, p)? else {
            continue;
        };
        if a1.is_zero() {
            continue;
        }
        // Block one gives a_2 = c_1 (1 + a_1/K + K).
        let denom = (BigUint::one() + &a1 * mod_inv(&key, p)? + &key) % p;
        let a2 = (c1 * denom) % p;
        if a2.is_zero() {
            continue;
        }
        let Ok(params) = SimplifiedModelParams::new(p.clone(), key.clone(), vec![a1, a2]) else {
            continue;
        };
        match simplified_encrypt(&params, 3) {
            Ok(replay) if replay == [c1.clone(), c2.clone(), c3.clone()] => verified.push(key),
            _ => {}
        }
    }
    if verified.is_empty() {
        return Err(Error::AttackFailed("no candidate key verified"));
    }
    Ok(verified)
}

/// A generated k = 3 mod-p-model instance: four ciphertext blocks plus
/// the two substitution values `a_1/K` and `a_2/(1 + a_1/K + K)` that
/// reduce the system to two bivariate polynomial equations. Solving that
/// system is out of scope here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct K3Instance {
    pub ciphertexts: Vec<BigUint>,
    pub subst_a1: BigUint,
    pub subst_a2: BigUint,
}

pub fn emit_k3_instance(params: &SimplifiedModelParams) -> Result<K3Instance> {
    if params.k() != 3 {
        return Err(Error::InvalidParameter("instance generator requires k = 3"));
    }
    let p = &params.p;
    let ciphertexts = simplified_encrypt(params, 4)?;
    let subst_a1 = (&params.leaders[0] * mod_inv(&params.key, p)?) % p;
    // simplified_encrypt succeeded, so this denominator is nonzero
    let denom = (BigUint::one() + &subst_a1 + &params.key) % p;
    let subst_a2 = (&params.leaders[1] * mod_inv(&denom, p)?) % p;
    Ok(K3Instance {
        ciphertexts,
        subst_a1,
        subst_a2,
    })
}

/// One line of the attack report.
#[derive(Debug, Clone)]
pub struct AttackTrial {
    pub seed: u64,
    pub p_bits: u64,
    pub success: bool,
    pub recovered_key: Option<BigUint>,
    pub elapsed: Duration,
}

/// Generates a fresh k = 1 instance from `seed`, runs [`attack_k1`], and
/// reports whether the true key and leader were recovered.
pub fn run_k1_trial(p: &BigUint, seed: u64) -> AttackTrial {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let one = BigUint::one();
    let upper = p - 1u32;
    let key = rng.gen_biguint_range(&one, &upper);
    let leader = rng.gen_biguint_range(&one, &upper);
    let qg = QuasigroupZp::new(p.clone(), key.clone()).expect("key in range");
    let mut state = StreamState::new(qg, vec![leader.clone()]).expect("leader in range");
    let plaintext: Vec<BigUint> = (0..4).map(|_| rng.gen_biguint_range(&one, p)).collect();
    let ciphertext: Vec<BigUint> = plaintext
        .iter()
        .map(|m| state.encrypt_block(m).expect("domain"))
        .collect();
    let sample = KnownPlaintextSample::new(p.clone(), plaintext, ciphertext).expect("valid");

    let start = Instant::now();
    let outcome = attack_k1(&sample);
    let elapsed = start.elapsed();
    match outcome {
        Ok(found) => AttackTrial {
            seed,
            p_bits: p.bits(),
            success: found.key == key && found.leader == leader,
            recovered_key: Some(found.key),
            elapsed,
        },
        Err(_) => AttackTrial {
            seed,
            p_bits: p.bits(),
            success: false,
            recovered_key: None,
            elapsed,
        },
    }
}

/// Generates a non-degenerate k = 2 mod-p-model instance from `seed`
/// (resampling on degeneracy) and reports whether the true key appears in
/// the verified candidate set.
pub fn run_k2_trial(p: &BigUint, seed: u64) -> AttackTrial {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let one = BigUint::one();
    let upper = p - 1u32;
    let (params, blocks) = loop {
        let key = rng.gen_biguint_range(&one, &upper);
        let leaders = vec![
            rng.gen_biguint_range(&one, &upper),
            rng.gen_biguint_range(&one, &upper),
        ];
        let params =
            SimplifiedModelParams::new(p.clone(), key, leaders).expect("draws in range");
        match simplified_encrypt(&params, 3) {
            Ok(blocks) => break (params, blocks),
            Err(Error::DegenerateInstance) => continue,
            Err(e) => unreachable!("unexpected generation failure: {e}"),
        }
    };

    let start = Instant::now();
    let outcome = attack_k2_simplified(&blocks[0], &blocks[1], &blocks[2], p, &mut rng);
    let elapsed = start.elapsed();
    let success = matches!(&outcome, Ok(keys) if keys.contains(&params.key));
    AttackTrial {
        seed,
        p_bits: p.bits(),
        success,
        recovered_key: outcome.ok().and_then(|keys| keys.first().cloned()),
        elapsed,
    }
}
