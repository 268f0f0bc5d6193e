//! Byte framing for the cipher's block domain.
//!
//! With a prime of the form p = 2^(8l) + 3, every l-byte plaintext block
//! maps to the group element B + 1 in [1, 2^(8l)] (the +1 keeps the
//! invalid element 0 out of reach), and a ciphertext element in [1, p-1]
//! serializes in exactly l + 1 bytes — one byte of expansion per block.
//! The final partial block is padded 0x80-then-zeros, so every input,
//! including the empty one, ends in a padded block.
//!
//! Ciphertext file layout ("QGSD"): magic, version byte 0x01, l as u16
//! big-endian, block count as u64 big-endian, then the fixed-width blocks.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub const CIPHERTEXT_FILE_MAGIC: &[u8; 4] = b"QGSD";
pub const CIPHERTEXT_FILE_VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCodecParams {
    l: usize,
    p: BigUint,
    /// 2^(8l), the largest encoded plaintext value.
    max_encoded: BigUint,
}

impl BlockCodecParams {
    /// Requires 2^(8l) <= p - 1 (every encoded block is a group element)
    /// and p < 2^(8(l+1)) (ciphertext fits in l + 1 bytes).
    pub fn new(l: usize, p: BigUint) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParameter("block size must be >= 1 byte"));
        }
        let max_encoded = BigUint::one() << (8 * l);
        if max_encoded > &p - 1u32 {
            return Err(Error::InvalidParameter("2^(8l) exceeds p - 1"));
        }
        if p >= (BigUint::one() << (8 * (l + 1))) {
            return Err(Error::InvalidParameter("p does not fit in l + 1 bytes"));
        }
        Ok(BlockCodecParams { l, p, max_encoded })
    }

    /// Derives l from the prime: the largest whole number of plaintext
    /// bytes per block. Exact for p = 2^(8l) + 3 and for 65537 (l = 2).
    pub fn for_prime(p: &BigUint) -> Result<Self> {
        let l = ((p.bits() - 1) / 8) as usize;
        BlockCodecParams::new(l, p.clone())
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    /// Serialized ciphertext block width, always l + 1.
    pub fn cipher_block_width(&self) -> usize {
        self.l + 1
    }

    /// Maps exactly l bytes to the group element B + 1.
    pub fn encode_block(&self, block: &[u8]) -> Result<BigUint> {
        if block.len() != self.l {
            return Err(Error::InvalidParameter("plaintext block has wrong length"));
        }
        Ok(BigUint::from_bytes_be(block) + 1u32)
    }

    /// Inverse of [`Self::encode_block`]; values outside [1, 2^(8l)] indicate a
    /// corrupt or desynchronized block.
    pub fn decode_block(&self, value: &BigUint) -> Result<Vec<u8>> {
        if value.is_zero() || value > &self.max_encoded {
            return Err(Error::CorruptValue);
        }
        Ok(pad_to(&(value - 1u32), self.l))
    }

    /// Fixed-width big-endian serialization of a ciphertext element in
    /// [1, p-1].
    pub fn serialize_cipher_block(&self, c: &BigUint) -> Result<Vec<u8>> {
        if c.is_zero() || c >= &self.p {
            return Err(Error::CorruptValue);
        }
        Ok(pad_to(c, self.cipher_block_width()))
    }

    pub fn deserialize_cipher_block(&self, bytes: &[u8]) -> Result<BigUint> {
        if bytes.len() != self.cipher_block_width() {
            return Err(Error::Format("cipher block has wrong width"));
        }
        let v = BigUint::from_bytes_be(bytes);
        if v.is_zero() || v >= self.p {
            return Err(Error::CorruptValue);
        }
        Ok(v)
    }

    /// Splits arbitrary bytes into encoded blocks, always appending the
    /// 0x80 padding (a fresh block when the input length is an exact
    /// multiple of l).
    pub fn encode_stream(&self, data: &[u8]) -> Vec<BigUint> {
        let mut blocks = Vec::with_capacity(data.len() / self.l + 1);
        let mut chunks = data.chunks_exact(self.l);
        for chunk in &mut chunks {
            blocks.push(self.encode_block(chunk).expect("exact chunk"));
        }
        let mut last = chunks.remainder().to_vec();
        last.push(0x80);
        last.resize(self.l, 0);
        blocks.push(self.encode_block(&last).expect("padded to l"));
        blocks
    }

    /// Inverse of [`Self::encode_stream`]. Decoding failures carry the index of
    /// the offending block.
    pub fn decode_stream(&self, blocks: &[BigUint]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(blocks.len() * self.l);
        for (index, value) in blocks.iter().enumerate() {
            self.decode_block(value)
                .map(|bytes| out.extend_from_slice(&bytes))
                .map_err(|e| match e {
                    Error::CorruptValue => Error::CorruptBlock {
                        index: index as u64,
                    },
                    other => other,
                })?;
        }
        let kept = unpad_len(&out, self.l)?;
        out.truncate(kept);
        Ok(out)
    }
}

fn pad_to(v: &BigUint, width: usize) -> Vec<u8> {
    let bytes = v.to_bytes_be();
    debug_assert!(bytes.len() <= width);
    let mut out = vec![0u8; width - bytes.len()];
    out.extend_from_slice(&bytes);
    out
}

/// Length to keep after stripping 0x80-then-zeros padding confined to the
/// final block of `l` bytes.
pub fn unpad_len(data: &[u8], l: usize) -> Result<usize> {
    if data.is_empty() || !data.len().is_multiple_of(l) {
        return Err(Error::BadPadding);
    }
    let search_floor = data.len() - l;
    let mut i = data.len();
    while i > search_floor {
        i -= 1;
        match data[i] {
            0 => continue,
            0x80 => return Ok(i),
            _ => return Err(Error::BadPadding),
        }
    }
    Err(Error::BadPadding)
}

/// Serializes cipher blocks into the QGSD container.
pub fn encode_ciphertext_file(
    params: &BlockCodecParams,
    blocks: &[BigUint],
) -> Result<Vec<u8>> {
    let width = params.cipher_block_width();
    let mut out = Vec::with_capacity(15 + blocks.len() * width);
    out.extend_from_slice(CIPHERTEXT_FILE_MAGIC);
    out.push(CIPHERTEXT_FILE_VERSION);
    out.extend_from_slice(&(params.l() as u16).to_be_bytes());
    out.extend_from_slice(&(blocks.len() as u64).to_be_bytes());
    for c in blocks {
        out.extend_from_slice(&params.serialize_cipher_block(c)?);
    }
    Ok(out)
}

/// Parses a QGSD container, validating the header against `params` and
/// reporting truncation as a corrupt block at the exact index.
pub fn parse_ciphertext_file(params: &BlockCodecParams, bytes: &[u8]) -> Result<Vec<BigUint>> {
    if bytes.len() < 15 || &bytes[..4] != CIPHERTEXT_FILE_MAGIC {
        return Err(Error::Format("bad ciphertext file magic"));
    }
    if bytes[4] != CIPHERTEXT_FILE_VERSION {
        return Err(Error::Format("unsupported ciphertext file version"));
    }
    let l = u16::from_be_bytes(bytes[5..7].try_into().unwrap()) as usize;
    if l != params.l() {
        return Err(Error::Format("ciphertext block size does not match key"));
    }
    let count = u64::from_be_bytes(bytes[7..15].try_into().unwrap());
    let width = params.cipher_block_width();
    let body = &bytes[15..];
    let mut blocks = Vec::with_capacity(count.min(1 << 20) as usize);
    for index in 0..count {
        let start = (index as usize) * width;
        let chunk = body
            .get(start..start + width)
            .ok_or(Error::CorruptBlock { index })?;
        blocks.push(
            params
                .deserialize_cipher_block(chunk)
                .map_err(|_| Error::CorruptBlock { index })?,
        );
    }
    if body.len() != (count as usize) * width {
        return Err(Error::Format("trailing bytes in ciphertext file"));
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::pl_modulus;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(0xc0dec)
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn test_params() -> BlockCodecParams {
        BlockCodecParams::new(2, big(65537)).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(BlockCodecParams::new(2, big(65537)).is_ok());
        // 2^16 = 65536 > 65535 - 1
        assert!(BlockCodecParams::new(2, big(65535)).is_err());
        assert!(BlockCodecParams::new(0, big(65537)).is_err());
        // p too wide for l + 1 bytes
        assert!(BlockCodecParams::new(1, big(65537)).is_err());
        assert!(BlockCodecParams::new(98, pl_modulus(98)).is_ok());
    }

    #[test]
    fn for_prime_derives_block_size() {
        assert_eq!(BlockCodecParams::for_prime(&big(65537)).unwrap().l(), 2);
        assert_eq!(
            BlockCodecParams::for_prime(&pl_modulus(98)).unwrap().l(),
            98
        );
        assert_eq!(
            BlockCodecParams::for_prime(&pl_modulus(251)).unwrap().l(),
            251
        );
    }

    #[test]
    fn encode_block_bounds() {
        let params = test_params();
        assert_eq!(params.encode_block(&[0, 0]).unwrap(), big(1));
        assert_eq!(params.encode_block(&[0xFF, 0xFF]).unwrap(), big(65536));
        assert!(params.encode_block(&[0]).is_err());
        assert_eq!(params.decode_block(&big(1)).unwrap(), vec![0, 0]);
        assert!(matches!(
            params.decode_block(&big(0)),
            Err(Error::CorruptValue)
        ));
        assert!(matches!(
            params.decode_block(&big(65537)),
            Err(Error::CorruptValue)
        ));
    }

    #[test]
    fn exhaustive_two_byte_round_trip() {
        let params = test_params();
        for hi in 0..=255u8 {
            for lo in 0..=255u8 {
                let block = [hi, lo];
                let v = params.encode_block(&block).unwrap();
                assert!(!v.is_zero() && v <= big(65536));
                assert_eq!(params.decode_block(&v).unwrap(), block);
            }
        }
    }

    #[test]
    fn cipher_block_serialization() {
        let params = test_params();
        assert_eq!(
            params.serialize_cipher_block(&big(19753)).unwrap(),
            vec![0x00, 0x4D, 0x29]
        );
        assert_eq!(
            params.serialize_cipher_block(&big(65536)).unwrap(),
            vec![0x01, 0x00, 0x00]
        );
        assert!(params.serialize_cipher_block(&big(0)).is_err());
        assert!(params.serialize_cipher_block(&big(65537)).is_err());
        assert_eq!(
            params.deserialize_cipher_block(&[0x00, 0x4D, 0x29]).unwrap(),
            big(19753)
        );
        // 0x010002 = 65538 >= p
        assert!(matches!(
            params.deserialize_cipher_block(&[0x01, 0x00, 0x02]),
            Err(Error::CorruptValue)
        ));
        assert!(params.deserialize_cipher_block(&[0x4D, 0x29]).is_err());
    }

    #[test]
    fn cipher_block_random_round_trip() {
        let mut rng = rng();
        for params in [test_params(), BlockCodecParams::new(98, pl_modulus(98)).unwrap()] {
            for _ in 0..200 {
                let c = num_bigint::RandBigInt::gen_biguint_range(
                    &mut rng,
                    &big(1),
                    params.p(),
                );
                let bytes = params.serialize_cipher_block(&c).unwrap();
                assert_eq!(bytes.len(), params.l() + 1);
                assert_eq!(params.deserialize_cipher_block(&bytes).unwrap(), c);
            }
        }
    }

    #[test]
    fn stream_padding_shapes() {
        let params = test_params();
        // empty input: one padded block
        let blocks = params.encode_stream(&[]);
        assert_eq!(blocks.len(), 1);
        assert_eq!(params.decode_stream(&blocks).unwrap(), Vec::<u8>::new());
        // exactly l bytes: padding forces a second block
        let blocks = params.encode_stream(&[0xAA, 0xBB]);
        assert_eq!(blocks.len(), 2);
        assert_eq!(params.decode_stream(&blocks).unwrap(), vec![0xAA, 0xBB]);
    }

    #[test]
    fn stream_random_round_trips() {
        let mut rng = rng();
        let params = test_params();
        for len in 0..=(5 * params.l()) {
            for _ in 0..8 {
                let mut data = vec![0u8; len];
                rng.fill_bytes(&mut data);
                let blocks = params.encode_stream(&data);
                assert_eq!(blocks.len(), (len + 1).div_ceil(params.l()));
                assert_eq!(params.decode_stream(&blocks).unwrap(), data);
            }
        }
    }

    #[test]
    fn padding_violations_detected() {
        let params = test_params();
        // a lone all-zero block cannot carry padding
        assert!(matches!(
            params.decode_stream(&[big(1)]),
            Err(Error::BadPadding)
        ));
        assert!(matches!(
            params.decode_stream(&[]),
            Err(Error::BadPadding)
        ));
        // corrupt value reported with its index
        let mut blocks = params.encode_stream(b"hello");
        blocks[1] = big(0);
        assert!(matches!(
            params.decode_stream(&blocks),
            Err(Error::CorruptBlock { index: 1 })
        ));
    }

    #[test]
    fn expansion_is_one_byte_per_block() {
        let mut rng = rng();
        for params in [test_params(), BlockCodecParams::new(98, pl_modulus(98)).unwrap()] {
            for len in [0usize, 1, params.l() - 1, params.l(), 3 * params.l() + 1] {
                let mut data = vec![0u8; len];
                rng.fill_bytes(&mut data);
                let blocks = params.encode_stream(&data);
                let wire: usize = blocks
                    .iter()
                    .map(|c| params.serialize_cipher_block(c).unwrap().len())
                    .sum();
                assert_eq!(wire, blocks.len() * (params.l() + 1));
            }
        }
    }

    #[test]
    fn ciphertext_file_round_trip() {
        let params = test_params();
        let mut rng = rng();
        let blocks: Vec<BigUint> = (0..20)
            .map(|_| num_bigint::RandBigInt::gen_biguint_range(&mut rng, &big(1), params.p()))
            .collect();
        let bytes = encode_ciphertext_file(&params, &blocks).unwrap();
        assert_eq!(parse_ciphertext_file(&params, &bytes).unwrap(), blocks);

        // truncation points at the failing block index
        let cut = bytes.len() - 2;
        match parse_ciphertext_file(&params, &bytes[..cut]) {
            Err(Error::CorruptBlock { index: 19 }) => {}
            other => panic!("expected corrupt block 19, got {other:?}"),
        }
        assert!(parse_ciphertext_file(&params, b"QGSX").is_err());
    }
}
