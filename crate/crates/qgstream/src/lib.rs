//! A public-key stream cipher working in the multiplicative group of a
//! prime field.
//!
//! Session setup transports a key `K` and `k >= 3` leader values with
//! textbook ElGamal; the data phase then encrypts one group element per
//! block with chained quasigroup products `i * j = i * f_K(j) mod p`,
//! where `f_K` is a key-derived permutation of `{1, ..., p-1}`. Each
//! block mutates the leader schedule, so equal plaintext blocks produce
//! different ciphertext blocks.
//!
//! Modules:
//! - [`numtheory`]: bignum modular arithmetic, Miller-Rabin, generator
//!   search, Tonelli-Shanks.
//! - [`polyring`]: dense univariate polynomials over Z_p and root finding.
//! - [`elgamal`]: textbook ElGamal and the key-file encoding.
//! - [`quasigroup`]: the key-derived quasigroup, its left parastrophe and
//!   the e/d string transformations.
//! - [`stream`]: the per-block cipher state machine with leader updates.
//! - [`session`]: offer/accept handshake producing twin stream states.
//! - [`codec`]: byte framing for primes of the form `2^(8l) + 3` (one byte
//!   of ciphertext expansion per block) and the ciphertext file format.
//! - [`wire`]: length-prefixed frame protocol and the two endpoint loops.
//! - [`attacks`]: working breaks of the weak configurations (`k = 1`
//!   known-plaintext, `k = 2` chosen-plaintext in the mod-p model).
//! - [`mod@bench`]: per-block throughput measurement of the stream cipher
//!   against ElGamal at the same prime.

pub mod attacks;
pub mod bench;
pub mod codec;
pub mod elgamal;
mod error;
pub mod numtheory;
pub mod polyring;
pub mod quasigroup;
pub mod session;
pub mod stream;
pub mod wire;

mod bytesio;

pub use error::{Error, Result};
