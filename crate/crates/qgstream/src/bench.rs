//! Per-block throughput measurement: the stream cipher against ElGamal
//! encryption at the same prime. One modular exponentiation costs
//! O(log p) multiplications while a stream block costs k multiplications
//! and k inversions, so the ratio grows with the prime size.

use std::time::{Duration, Instant};

use num_bigint::{BigUint, RandBigInt};
use rand::Rng;

use crate::elgamal::{encrypt, keygen, ElGamalPublicKey};
use crate::error::{Error, Result};
use crate::numtheory::PrimeParams;
use crate::quasigroup::QuasigroupZp;
use crate::stream::StreamState;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub p_bits: u64,
    pub k: usize,
    pub blocks: u64,
    pub stream_per_block: Duration,
    pub elgamal_per_block: Duration,
}

impl BenchReport {
    /// How many stream blocks fit in one ElGamal encryption.
    pub fn ratio(&self) -> f64 {
        self.elgamal_per_block.as_secs_f64() / self.stream_per_block.as_secs_f64().max(1e-12)
    }
}

/// Times `blocks` stream encryptions with a random key and k random
/// leaders. Message blocks are drawn up front so only cipher work is
/// inside the clock.
pub fn measure_stream_per_block(
    p: &BigUint,
    k: usize,
    blocks: u64,
    rng: &mut impl Rng,
) -> Result<Duration> {
    if blocks == 0 {
        return Err(Error::InvalidParameter("block count must be positive"));
    }
    let one = BigUint::from(1u32);
    let upper = p - 1u32;
    let key = rng.gen_biguint_range(&one, &upper);
    let leaders: Vec<BigUint> = (0..k)
        .map(|_| rng.gen_biguint_range(&one, &upper))
        .collect();
    let mut state = StreamState::new(QuasigroupZp::new(p.clone(), key)?, leaders)?;
    let messages: Vec<BigUint> = (0..blocks)
        .map(|_| rng.gen_biguint_range(&one, p))
        .collect();

    let start = Instant::now();
    for m in &messages {
        std::hint::black_box(state.encrypt_block(m)?);
    }
    Ok(start.elapsed() / blocks as u32)
}

/// Times `blocks` ElGamal encryptions of random messages. Drawing the
/// per-message exponent stays inside the clock: it is part of the
/// encryption procedure.
pub fn measure_elgamal_per_block(
    public: &ElGamalPublicKey,
    blocks: u64,
    rng: &mut impl Rng,
) -> Result<Duration> {
    if blocks == 0 {
        return Err(Error::InvalidParameter("block count must be positive"));
    }
    let one = BigUint::from(1u32);
    let messages: Vec<BigUint> = (0..blocks)
        .map(|_| rng.gen_biguint_range(&one, public.p()))
        .collect();

    let start = Instant::now();
    for m in &messages {
        std::hint::black_box(encrypt(public, m, rng)?);
    }
    Ok(start.elapsed() / blocks as u32)
}

/// Runs both measurements at the same prime.
pub fn run(params: PrimeParams, k: usize, blocks: u64, rng: &mut impl Rng) -> Result<BenchReport> {
    let p_bits = params.p().bits();
    let p = params.p().clone();
    let keypair = keygen(params, rng);
    let stream_per_block = measure_stream_per_block(&p, k, blocks, rng)?;
    let elgamal_per_block = measure_elgamal_per_block(keypair.public(), blocks, rng)?;
    Ok(BenchReport {
        p_bits,
        k,
        blocks,
        stream_per_block,
        elgamal_per_block,
    })
}
