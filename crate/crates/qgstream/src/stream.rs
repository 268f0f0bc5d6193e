//! The per-block stream cipher state machine.
//!
//! Encryption pushes a block through k chained quasigroup products,
//! decryption pulls it back through k parastrophe divisions, and both
//! sides then replace their leaders with the block's intermediate values
//! plus a checksum-style k-th leader `1 + (sum of intermediates) mod (p-1)`.
//! Two states initialized identically therefore stay synchronized as long
//! as every ciphertext block is delivered in order.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::quasigroup::QuasigroupZp;

/// Sequential cipher state: exclusive access per state, independent
/// states are unrelated. Cloning forks the state (used to build the
/// encryptor/decryptor twins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamState {
    qg: QuasigroupZp,
    leaders: Vec<BigUint>,
    blocks_processed: u64,
}

impl StreamState {
    /// The type permits any k >= 1 so the weak configurations can be
    /// built for the attack demos; sessions enforce k >= 3 themselves.
    pub fn new(qg: QuasigroupZp, leaders: Vec<BigUint>) -> Result<Self> {
        if leaders.is_empty() {
            return Err(Error::InvalidParameter("at least one leader required"));
        }
        for a in &leaders {
            if a.is_zero() || a >= qg.p() {
                return Err(Error::OutOfDomain("leader outside [1, p-1]"));
            }
        }
        Ok(StreamState {
            qg,
            leaders,
            blocks_processed: 0,
        })
    }

    pub fn quasigroup(&self) -> &QuasigroupZp {
        &self.qg
    }

    pub fn k(&self) -> usize {
        self.leaders.len()
    }

    pub fn leaders(&self) -> &[BigUint] {
        &self.leaders
    }

    /// Blocks pushed through this state so far; the wire layer uses this
    /// as the next sequence number.
    pub fn blocks_processed(&self) -> u64 {
        self.blocks_processed
    }

    fn check_block(&self, x: &BigUint) -> Result<()> {
        if x.is_zero() || x >= self.qg.p() {
            return Err(Error::OutOfDomain("block outside [1, p-1]"));
        }
        Ok(())
    }

    /// One block forward: m^(0) = m, m^(i) = a_i * m^(i-1); returns
    /// c = m^(k). The intermediates are snapshotted before any leader is
    /// overwritten, then a_i <- m^(i) for i < k and
    /// a_k <- 1 + (sum m^(i)) mod (p-1).
    pub fn encrypt_block(&mut self, m: &BigUint) -> Result<BigUint> {
        self.check_block(m)?;
        let k = self.k();
        let mut intermediates = Vec::with_capacity(k);
        let mut x = m.clone();
        for a in &self.leaders {
            x = self.qg.star(a, &x)?;
            intermediates.push(x.clone());
        }
        let ciphertext = x;

        let p_minus_1 = self.qg.p() - 1u32;
        let sum: BigUint = intermediates.iter().sum();
        self.leaders[k - 1] = sum % &p_minus_1 + 1u32;
        for (slot, value) in self.leaders[..k - 1]
            .iter_mut()
            .zip(intermediates)
        {
            *slot = value;
        }
        self.blocks_processed += 1;
        Ok(ciphertext)
    }

    /// One block backward: c^(k) = a_k \ c, c^(i) = a_i \ c^(i+1);
    /// returns m = c^(1). Leader update mirrors the encryptor's:
    /// a_i <- c^(i+1) for i < k and a_k <- 1 + (c + sum_{i>=2} c^(i))
    /// mod (p-1), which equals the encryptor's sum of intermediates.
    pub fn decrypt_block(&mut self, c: &BigUint) -> Result<BigUint> {
        self.check_block(c)?;
        let k = self.k();
        // downward[0] = c^(k), downward[1] = c^(k-1), ..., downward[k-1] = c^(1)
        let mut downward = Vec::with_capacity(k);
        let mut x = c.clone();
        for a in self.leaders.iter().rev() {
            x = self.qg.left_div(a, &x)?;
            downward.push(x.clone());
        }
        let plaintext = downward[k - 1].clone();

        let p_minus_1 = self.qg.p() - 1u32;
        let sum: BigUint = c + downward[..k - 1].iter().sum::<BigUint>();
        self.leaders[k - 1] = sum % &p_minus_1 + 1u32;
        for i in 0..k - 1 {
            // a_i <- c^(i+1), and c^(i+1) sits at downward[k-2-i]
            self.leaders[i] = downward[k - 2 - i].clone();
        }
        self.blocks_processed += 1;
        Ok(plaintext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::RandBigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(0x57)
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn session_state() -> StreamState {
        let qg = QuasigroupZp::new(big(65537), big(35469)).unwrap();
        StreamState::new(qg, vec![big(41866), big(44005), big(27025)]).unwrap()
    }

    #[test]
    fn session_first_block() {
        let mut enc = session_state();
        let c = enc.encrypt_block(&big(64816)).unwrap();
        assert_eq!(c, big(19753));
        assert_eq!(enc.leaders(), &[big(6851), big(44908), big(5977)]);
        assert_eq!(enc.blocks_processed(), 1);

        let mut dec = session_state();
        let m = dec.decrypt_block(&big(19753)).unwrap();
        assert_eq!(m, big(64816));
        assert_eq!(dec.leaders(), enc.leaders());
    }

    #[test]
    fn session_continuation_blocks() {
        // Values continued past the known first block with an independent
        // replay of the update rule.
        let mut enc = session_state();
        let mut dec = session_state();
        let messages = [big(64816), big(47513), big(52916)];
        let expected_c = [big(19753), big(27000), big(38834)];
        for (m, want) in messages.iter().zip(&expected_c) {
            let c = enc.encrypt_block(m).unwrap();
            assert_eq!(&c, want);
            assert_eq!(&dec.decrypt_block(&c).unwrap(), m);
            assert_eq!(dec.leaders(), enc.leaders());
        }
        assert_eq!(enc.leaders(), &[big(63033), big(63437), big(34233)]);
    }

    #[test]
    fn k1_update_collapses() {
        let qg = QuasigroupZp::new(big(65537), big(123)).unwrap();
        let mut st = StreamState::new(qg.clone(), vec![big(999)]).unwrap();
        let c = st.encrypt_block(&big(555)).unwrap();
        assert_eq!(c, qg.star(&big(999), &big(555)).unwrap());
        assert_eq!(st.leaders(), &[&c % 65536u32 + 1u32]);
    }

    #[test]
    fn domain_violations_rejected() {
        let mut st = session_state();
        assert!(matches!(
            st.encrypt_block(&big(0)),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(
            st.decrypt_block(&big(65537)),
            Err(Error::OutOfDomain(_))
        ));
        let qg = QuasigroupZp::new(big(65537), big(1)).unwrap();
        assert!(StreamState::new(qg.clone(), vec![]).is_err());
        assert!(StreamState::new(qg, vec![big(0)]).is_err());
    }

    #[test]
    fn twin_state_synchronization_random() {
        let mut rng = rng();
        let p = big(65537);
        let qg = QuasigroupZp::new(p.clone(), big(29001)).unwrap();
        let leaders: Vec<BigUint> = (0..3)
            .map(|_| rng.gen_biguint_range(&big(1), &p))
            .collect();
        let mut enc = StreamState::new(qg.clone(), leaders.clone()).unwrap();
        let mut dec = StreamState::new(qg, leaders).unwrap();
        for _ in 0..1000 {
            let m = rng.gen_biguint_range(&big(1), &p);
            let c = enc.encrypt_block(&m).unwrap();
            assert_eq!(dec.decrypt_block(&c).unwrap(), m);
            assert_eq!(dec, enc);
        }
    }

    #[test]
    fn leaders_stay_in_domain() {
        let mut rng = rng();
        let p = big(257);
        let qg = QuasigroupZp::new(p.clone(), big(77)).unwrap();
        let mut st = StreamState::new(qg, vec![big(1), big(256), big(100), big(7), big(250)])
            .unwrap();
        for _ in 0..500 {
            let m = rng.gen_biguint_range(&big(1), &p);
            st.encrypt_block(&m).unwrap();
            for a in st.leaders() {
                assert!(!a.is_zero() && a < &p);
            }
        }
    }

    #[test]
    fn fixed_state_is_bijection() {
        // Without the update, one block through a k = 5 pipeline permutes
        // [1, 256]; checked by encrypting every block from a cloned state.
        let p = 257u64;
        let qg = QuasigroupZp::new(big(p), big(90)).unwrap();
        let base =
            StreamState::new(qg, vec![big(13), big(200), big(5), big(111), big(42)]).unwrap();
        let mut seen = std::collections::HashSet::new();
        for m in 1..p {
            let mut st = base.clone();
            let c = st.encrypt_block(&big(m)).unwrap();
            assert!(!c.is_zero() && c < big(p));
            seen.insert(c);
        }
        assert_eq!(seen.len() as u64, p - 1);

        // and the decryption pipeline inverts it for the same fixed state
        for m in 1..p {
            let mut e = base.clone();
            let mut d = base.clone();
            let c = e.encrypt_block(&big(m)).unwrap();
            assert_eq!(d.decrypt_block(&c).unwrap(), big(m));
        }
    }

    #[test]
    fn round_trip_at_largest_parameter_set() {
        let mut rng = rng();
        let p = crate::numtheory::pl_modulus(251);
        let key = rng.gen_biguint_range(&big(1), &(&p - 1u32));
        let leaders: Vec<BigUint> = (0..3)
            .map(|_| rng.gen_biguint_range(&big(1), &(&p - 1u32)))
            .collect();
        let qg = QuasigroupZp::new(p.clone(), key).unwrap();
        let mut enc = StreamState::new(qg.clone(), leaders.clone()).unwrap();
        let mut dec = StreamState::new(qg, leaders).unwrap();
        for _ in 0..8 {
            let m = rng.gen_biguint_range(&big(1), &p);
            let c = enc.encrypt_block(&m).unwrap();
            assert_eq!(dec.decrypt_block(&c).unwrap(), m);
        }
        assert_eq!(dec, enc);
    }

    #[test]
    fn constant_stream_does_not_repeat() {
        // Statistical check, not a theorem: consecutive ciphertexts of a
        // constant plaintext stream differ for this seed.
        let qg = QuasigroupZp::new(big(65537), big(31337)).unwrap();
        let mut st = StreamState::new(qg, vec![big(101), big(202), big(303)]).unwrap();
        let m = big(4242);
        let mut prev = BigUint::zero();
        for i in 0..100 {
            let c = st.encrypt_block(&m).unwrap();
            if i > 0 {
                assert_ne!(c, prev);
            }
            prev = c;
        }
    }
}
