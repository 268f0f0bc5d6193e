//! Session establishment: one side draws the quasigroup key K and k
//! leaders, ElGamal-encrypts them to the key holder, and both sides end
//! up with identical stream states.
//!
//! K and the leaders are drawn from [1, p-2]: the key range is what keeps
//! K -> f_K injective, and leaders get the same range at offer time. On
//! accept, leaders up to p-1 are tolerated.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::elgamal::{
    decrypt, encrypt, encrypt_with_exponent, ElGamalCiphertext, ElGamalKeyPair, ElGamalPublicKey,
};
use crate::error::{Error, Result};
use crate::quasigroup::QuasigroupZp;
use crate::stream::StreamState;

/// Fewer leaders than this is breakable (k = 1 by known plaintext, k = 2
/// by chosen plaintext in the mod-p model).
pub const MIN_LEADERS: usize = 3;

/// The encrypted session material: the key ciphertext followed by one
/// ciphertext per leader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOffer {
    pub key_ct: ElGamalCiphertext,
    pub leader_cts: Vec<ElGamalCiphertext>,
}

impl SessionOffer {
    pub fn k(&self) -> usize {
        self.leader_cts.len()
    }
}

/// Draws K, k leaders and fresh encryption exponents, returning the offer
/// to send and the sender's own encryptor state. Refuses k < 3.
pub fn make_offer(
    public: &ElGamalPublicKey,
    k: usize,
    rng: &mut impl Rng,
) -> Result<(SessionOffer, StreamState)> {
    if k < MIN_LEADERS {
        return Err(Error::InvalidParameter("k < 3 is breakable; see attacks"));
    }
    make_offer_any_k(public, k, rng)
}

/// Same as [`make_offer`] but admits k >= 1; exists only so the attack
/// demos can build the weak configurations deliberately.
pub fn make_offer_any_k(
    public: &ElGamalPublicKey,
    k: usize,
    rng: &mut impl Rng,
) -> Result<(SessionOffer, StreamState)> {
    if k == 0 {
        return Err(Error::InvalidParameter("at least one leader required"));
    }
    let one = BigUint::one();
    let upper = public.p() - 1u32; // draws are uniform over [1, p-2]
    let key = rng.gen_biguint_range(&one, &upper);
    let leaders: Vec<BigUint> = (0..k)
        .map(|_| rng.gen_biguint_range(&one, &upper))
        .collect();
    let key_ct = encrypt(public, &key, rng)?;
    let leader_cts = leaders
        .iter()
        .map(|a| encrypt(public, a, rng))
        .collect::<Result<Vec<_>>>()?;
    let state = StreamState::new(QuasigroupZp::new(public.p().clone(), key)?, leaders)?;
    Ok((
        SessionOffer {
            key_ct,
            leader_cts,
        },
        state,
    ))
}

/// Deterministic offer construction from explicit material: the key, the
/// leaders, and one encryption exponent for the key plus one per leader.
/// This is the single construction path [`make_offer`] funnels into and
/// lets known vectors reproduce exactly.
pub fn offer_from_parts(
    public: &ElGamalPublicKey,
    key: &BigUint,
    leaders: &[BigUint],
    exponents: &[BigUint],
) -> Result<(SessionOffer, StreamState)> {
    if leaders.is_empty() {
        return Err(Error::InvalidParameter("at least one leader required"));
    }
    if exponents.len() != leaders.len() + 1 {
        return Err(Error::InvalidParameter(
            "need one exponent for the key plus one per leader",
        ));
    }
    let key_ct = encrypt_with_exponent(public, key, &exponents[0])?;
    let leader_cts = leaders
        .iter()
        .zip(&exponents[1..])
        .map(|(a, e)| encrypt_with_exponent(public, a, e))
        .collect::<Result<Vec<_>>>()?;
    let state = StreamState::new(
        QuasigroupZp::new(public.p().clone(), key.clone())?,
        leaders.to_vec(),
    )?;
    Ok((
        SessionOffer {
            key_ct,
            leader_cts,
        },
        state,
    ))
}

/// Decrypts the offer and validates the recovered material: K must lie in
/// [1, p-2] and every leader in [1, p-1]. Anything else means tampering
/// or a range bug and rejects the handshake.
pub fn accept_offer(keypair: &ElGamalKeyPair, offer: &SessionOffer) -> Result<StreamState> {
    let p = keypair.public().p();
    let key = decrypt(keypair, &offer.key_ct)?;
    if key.is_zero() || key > p - 2u32 {
        return Err(Error::HandshakeRejected("decrypted key outside [1, p-2]"));
    }
    let mut leaders = Vec::with_capacity(offer.leader_cts.len());
    for ct in &offer.leader_cts {
        let a = decrypt(keypair, ct)?;
        if a.is_zero() || &a >= p {
            return Err(Error::HandshakeRejected(
                "decrypted leader outside [1, p-1]",
            ));
        }
        leaders.push(a);
    }
    StreamState::new(QuasigroupZp::new(p.clone(), key)?, leaders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::keypair_from_exponent;
    use crate::numtheory::{pl_modulus, PrimeParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(0x5e55)
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn session_keypair() -> ElGamalKeyPair {
        let params = PrimeParams::unverified(big(65537), big(13), &mut rng()).unwrap();
        keypair_from_exponent(params, big(10307)).unwrap()
    }

    #[test]
    fn known_offer_vector() {
        let kp = session_keypair();
        let (offer, state) = offer_from_parts(
            kp.public(),
            &big(35469),
            &[big(41866), big(44005), big(27025)],
            &[big(53882), big(19495), big(7737), big(4256)],
        )
        .unwrap();
        assert_eq!(offer.key_ct.gamma, big(1845));
        assert_eq!(offer.key_ct.delta, big(57308));
        assert_eq!(offer.leader_cts[0].gamma, big(13023));
        assert_eq!(offer.leader_cts[0].delta, big(32389));
        assert_eq!(offer.leader_cts[1].gamma, big(39691));
        assert_eq!(offer.leader_cts[1].delta, big(7691));
        assert_eq!(offer.leader_cts[2].gamma, big(14791));
        assert_eq!(offer.leader_cts[2].delta, big(21654));

        let accepted = accept_offer(&kp, &offer).unwrap();
        assert_eq!(accepted, state);
        assert_eq!(accepted.quasigroup().key(), &big(35469));
        assert_eq!(
            accepted.leaders(),
            &[big(41866), big(44005), big(27025)]
        );
    }

    #[test]
    fn k_floor_enforced() {
        let kp = session_keypair();
        let mut rng = rng();
        assert!(matches!(
            make_offer(kp.public(), 2, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
        assert!(make_offer_any_k(kp.public(), 1, &mut rng).is_ok());
        assert!(make_offer_any_k(kp.public(), 0, &mut rng).is_err());
    }

    #[test]
    fn twin_states_at_session_prime() {
        let kp = session_keypair();
        let mut rng = rng();
        for _ in 0..50 {
            let (offer, enc_state) = make_offer(kp.public(), 3, &mut rng).unwrap();
            let dec_state = accept_offer(&kp, &offer).unwrap();
            assert_eq!(dec_state, enc_state);
        }
    }

    #[test]
    fn twin_states_at_big_prime() {
        let mut rng = rng();
        let params = PrimeParams::unverified(pl_modulus(98), big(2), &mut rng).unwrap();
        let kp = crate::elgamal::keygen(params, &mut rng);
        for _ in 0..100 {
            let (offer, enc_state) = make_offer(kp.public(), 3, &mut rng).unwrap();
            let dec_state = accept_offer(&kp, &offer).unwrap();
            assert_eq!(dec_state, enc_state);
        }
    }

    #[test]
    fn rejects_out_of_range_key() {
        let kp = session_keypair();
        let mut rng = rng();
        // K = 0 and K = p-1 are both outside the key domain.
        for bad_key in [big(0), big(65536)] {
            let key_ct = encrypt(kp.public(), &bad_key, &mut rng).unwrap();
            let leader_ct = encrypt(kp.public(), &big(5), &mut rng).unwrap();
            let offer = SessionOffer {
                key_ct,
                leader_cts: vec![leader_ct; 3],
            };
            assert!(matches!(
                accept_offer(&kp, &offer),
                Err(Error::HandshakeRejected(_))
            ));
        }
    }

    #[test]
    fn rejects_out_of_range_leader() {
        let kp = session_keypair();
        let mut rng = rng();
        let key_ct = encrypt(kp.public(), &big(35469), &mut rng).unwrap();
        let zero_ct = encrypt(kp.public(), &big(0), &mut rng).unwrap();
        let good_ct = encrypt(kp.public(), &big(7), &mut rng).unwrap();
        let offer = SessionOffer {
            key_ct,
            leader_cts: vec![good_ct.clone(), zero_ct, good_ct],
        };
        assert!(matches!(
            accept_offer(&kp, &offer),
            Err(Error::HandshakeRejected(_))
        ));
    }
}
