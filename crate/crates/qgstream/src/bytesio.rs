//! Length-prefixed big-endian integer encoding shared by the key-file and
//! wire formats: u32 length, then the minimal big-endian magnitude bytes.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

pub(crate) fn put_uint(buf: &mut Vec<u8>, value: &BigUint) {
    let bytes = if value.is_zero() {
        Vec::new()
    } else {
        value.to_bytes_be()
    };
    buf.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    buf.extend_from_slice(&bytes);
}

/// Reads one integer starting at `*pos`, advancing it past the field.
pub(crate) fn get_uint(buf: &[u8], pos: &mut usize) -> Result<BigUint> {
    let head = buf
        .get(*pos..*pos + 4)
        .ok_or(Error::Format("truncated integer length"))?;
    let len = u32::from_be_bytes(head.try_into().unwrap()) as usize;
    *pos += 4;
    let body = buf
        .get(*pos..*pos + len)
        .ok_or(Error::Format("truncated integer body"))?;
    *pos += len;
    Ok(BigUint::from_bytes_be(body))
}
