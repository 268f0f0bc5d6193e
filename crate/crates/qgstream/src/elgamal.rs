//! Textbook ElGamal over Z_p*, used only to transport the session key
//! material, plus the binary key-file encoding.
//!
//! Key file layout ("QGEK"): magic, version byte 0x01, flags byte
//! (bit 0 = generator verified), then length-prefixed big-endian unsigned
//! p, alpha, alpha^a — and, in private files only, the exponent a.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::bytesio::{get_uint, put_uint};
use crate::error::{Error, Result};
use crate::numtheory::{mod_pow, PrimeParams};

pub const KEY_FILE_MAGIC: &[u8; 4] = b"QGEK";
pub const KEY_FILE_VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalPublicKey {
    params: PrimeParams,
    /// alpha^a mod p.
    y: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalKeyPair {
    public: ElGamalPublicKey,
    /// The private exponent, in [1, p-2].
    a: BigUint,
}

/// The pair (gamma, delta) = (alpha^e, m * (alpha^a)^e) mod p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElGamalCiphertext {
    pub gamma: BigUint,
    pub delta: BigUint,
}

impl ElGamalPublicKey {
    pub fn new(params: PrimeParams, y: BigUint) -> Result<Self> {
        if y.is_zero() || &y >= params.p() {
            return Err(Error::InvalidParameter("public element outside [1, p-1]"));
        }
        Ok(ElGamalPublicKey { params, y })
    }

    pub fn params(&self) -> &PrimeParams {
        &self.params
    }

    pub fn p(&self) -> &BigUint {
        self.params.p()
    }

    pub fn alpha(&self) -> &BigUint {
        self.params.alpha()
    }

    pub fn y(&self) -> &BigUint {
        &self.y
    }

    /// Byte width of one group element when serialized fixed-width.
    pub fn element_width(&self) -> usize {
        self.p().bits().div_ceil(8) as usize
    }
}

impl ElGamalKeyPair {
    pub fn public(&self) -> &ElGamalPublicKey {
        &self.public
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.a
    }
}

/// Draws a uniform private exponent in [1, p-2] and derives the public
/// element.
pub fn keygen(params: PrimeParams, rng: &mut impl Rng) -> ElGamalKeyPair {
    let one = BigUint::one();
    let a = rng.gen_biguint_range(&one, &(params.p() - 1u32));
    keypair_from_exponent(params, a).expect("sampled exponent is in range")
}

/// Builds a key pair from an explicit exponent (key-file loading and
/// reproducible tests).
pub fn keypair_from_exponent(params: PrimeParams, a: BigUint) -> Result<ElGamalKeyPair> {
    if a.is_zero() || a > params.p() - 2u32 {
        return Err(Error::InvalidParameter("private exponent outside [1, p-2]"));
    }
    let y = mod_pow(params.alpha(), &a, params.p())?;
    Ok(ElGamalKeyPair {
        public: ElGamalPublicKey { params, y },
        a,
    })
}

/// Encrypts `m` in [0, p-1] under a fresh random exponent.
pub fn encrypt(
    public: &ElGamalPublicKey,
    m: &BigUint,
    rng: &mut impl Rng,
) -> Result<ElGamalCiphertext> {
    let e = rng.gen_biguint_range(&BigUint::one(), &(public.p() - 1u32));
    encrypt_with_exponent(public, m, &e)
}

/// Deterministic encryption with a caller-chosen exponent `e` in
/// [1, p-2]; exists so known test vectors reproduce bit-for-bit.
pub fn encrypt_with_exponent(
    public: &ElGamalPublicKey,
    m: &BigUint,
    e: &BigUint,
) -> Result<ElGamalCiphertext> {
    let p = public.p();
    if m >= p {
        return Err(Error::OutOfDomain("message outside [0, p-1]"));
    }
    if e.is_zero() || e > &(p - 2u32) {
        return Err(Error::InvalidParameter("encryption exponent outside [1, p-2]"));
    }
    let gamma = mod_pow(public.alpha(), e, p)?;
    let delta = (m * mod_pow(&public.y, e, p)?) % p;
    Ok(ElGamalCiphertext { gamma, delta })
}

/// Recovers m = delta * gamma^(-a) mod p, with the inverse folded into a
/// single exponentiation gamma^(p-1-a).
pub fn decrypt(keypair: &ElGamalKeyPair, ciphertext: &ElGamalCiphertext) -> Result<BigUint> {
    let p = keypair.public.p();
    if ciphertext.gamma.is_zero() || &ciphertext.gamma >= p || &ciphertext.delta >= p {
        return Err(Error::InvalidCiphertext);
    }
    let neg_a = p - 1u32 - &keypair.a;
    let mask = mod_pow(&ciphertext.gamma, &neg_a, p)?;
    Ok((&ciphertext.delta * mask) % p)
}

impl ElGamalCiphertext {
    /// Fixed-width serialization: gamma then delta, each padded to the
    /// group-element width. Exactly two elements wide — the algorithm's
    /// factor-2 message expansion.
    pub fn to_bytes(&self, public: &ElGamalPublicKey) -> Vec<u8> {
        let width = public.element_width();
        let mut out = Vec::with_capacity(2 * width);
        out.extend_from_slice(&pad_be(&self.gamma, width));
        out.extend_from_slice(&pad_be(&self.delta, width));
        out
    }
}

fn pad_be(v: &BigUint, width: usize) -> Vec<u8> {
    let bytes = v.to_bytes_be();
    let mut out = vec![0u8; width - bytes.len()];
    out.extend_from_slice(&bytes);
    out
}

const FLAG_GENERATOR_VERIFIED: u8 = 0x01;

/// The p || alpha || alpha^a section of a key file, used both for the
/// file body and as fingerprint preimage.
pub fn public_key_digest_input(public: &ElGamalPublicKey) -> Vec<u8> {
    let mut buf = Vec::new();
    put_uint(&mut buf, public.p());
    put_uint(&mut buf, public.alpha());
    put_uint(&mut buf, &public.y);
    buf
}

fn key_file_header(public: &ElGamalPublicKey) -> Vec<u8> {
    let mut buf = Vec::with_capacity(6);
    buf.extend_from_slice(KEY_FILE_MAGIC);
    buf.push(KEY_FILE_VERSION);
    buf.push(if public.params.generator_verified() {
        FLAG_GENERATOR_VERIFIED
    } else {
        0
    });
    buf
}

pub fn encode_public_key(public: &ElGamalPublicKey) -> Vec<u8> {
    let mut buf = key_file_header(public);
    buf.extend_from_slice(&public_key_digest_input(public));
    buf
}

pub fn encode_private_key(keypair: &ElGamalKeyPair) -> Vec<u8> {
    let mut buf = encode_public_key(&keypair.public);
    put_uint(&mut buf, &keypair.a);
    buf
}

fn decode_header(bytes: &[u8]) -> Result<(bool, usize)> {
    if bytes.len() < 6 || &bytes[..4] != KEY_FILE_MAGIC {
        return Err(Error::Format("bad key file magic"));
    }
    if bytes[4] != KEY_FILE_VERSION {
        return Err(Error::Format("unsupported key file version"));
    }
    Ok((bytes[5] & FLAG_GENERATOR_VERIFIED != 0, 6))
}

pub fn decode_public_key(bytes: &[u8], rng: &mut impl Rng) -> Result<ElGamalPublicKey> {
    let (verified, mut pos) = decode_header(bytes)?;
    let p = get_uint(bytes, &mut pos)?;
    let alpha = get_uint(bytes, &mut pos)?;
    let y = get_uint(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes in public key file"));
    }
    let params = PrimeParams::from_stored(p, alpha, verified, rng)?;
    ElGamalPublicKey::new(params, y)
}

pub fn decode_private_key(bytes: &[u8], rng: &mut impl Rng) -> Result<ElGamalKeyPair> {
    let (verified, mut pos) = decode_header(bytes)?;
    let p = get_uint(bytes, &mut pos)?;
    let alpha = get_uint(bytes, &mut pos)?;
    let y = get_uint(bytes, &mut pos)?;
    let a = get_uint(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes in private key file"));
    }
    let params = PrimeParams::from_stored(p, alpha, verified, rng)?;
    let keypair = keypair_from_exponent(params, a)?;
    if keypair.public.y != y {
        return Err(Error::Format("stored public element does not match exponent"));
    }
    Ok(keypair)
}
