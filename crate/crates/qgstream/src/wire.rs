//! Byte-exact framing and the two endpoint loops.
//!
//! Frame layout: magic "QGSC", version 0x01, type byte, payload length as
//! u32 big-endian, payload. The initiator requests the responder's public
//! key, sends the encrypted session offer, then streams DATA frames whose
//! payload is an 8-byte big-endian sequence number followed by one
//! serialized cipher block. Reliability is the transport's job; the
//! sequence numbers only detect desynchronization, which is fatal because
//! diverged leader schedules cannot resynchronize.

use std::io::{Read, Write};

use rand::Rng;

use crate::bytesio::{get_uint, put_uint};
use crate::codec::{unpad_len, BlockCodecParams};
use crate::elgamal::{ElGamalCiphertext, ElGamalKeyPair, ElGamalPublicKey};
use crate::error::{Error, Result};
use crate::numtheory::PrimeParams;
use crate::session::{accept_offer, make_offer, SessionOffer};

pub const FRAME_MAGIC: &[u8; 4] = b"QGSC";
pub const FRAME_VERSION: u8 = 0x01;
/// Frames larger than this are rejected outright.
pub const MAX_PAYLOAD: usize = 1 << 24;
const HEADER_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    PubkeyReq = 0x01,
    Pubkey = 0x02,
    Offer = 0x03,
    Data = 0x04,
    Close = 0x05,
    Error = 0x7F,
}

impl FrameType {
    fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0x01 => FrameType::PubkeyReq,
            0x02 => FrameType::Pubkey,
            0x03 => FrameType::Offer,
            0x04 => FrameType::Data,
            0x05 => FrameType::Close,
            0x7F => FrameType::Error,
            _ => return Err(Error::Protocol("unknown frame type")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_type: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(frame_type: FrameType, payload: Vec<u8>) -> Self {
        Frame {
            frame_type,
            payload,
        }
    }
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + frame.payload.len());
    out.extend_from_slice(FRAME_MAGIC);
    out.push(FRAME_VERSION);
    out.push(frame.frame_type as u8);
    out.extend_from_slice(&(frame.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&frame.payload);
    out
}

/// Incremental decoder: `Ok(None)` means the buffer does not yet hold a
/// complete frame; otherwise returns the frame and the bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<Option<(Frame, usize)>> {
    if buf.len() < HEADER_LEN {
        return Ok(None);
    }
    if &buf[..4] != FRAME_MAGIC {
        return Err(Error::Format("bad frame magic"));
    }
    if buf[4] != FRAME_VERSION {
        return Err(Error::Format("unsupported frame version"));
    }
    let frame_type = FrameType::from_byte(buf[5])?;
    let len = u32::from_be_bytes(buf[6..10].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(Error::Format("frame payload too large"));
    }
    if buf.len() < HEADER_LEN + len {
        return Ok(None);
    }
    let payload = buf[HEADER_LEN..HEADER_LEN + len].to_vec();
    Ok(Some((Frame::new(frame_type, payload), HEADER_LEN + len)))
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<()> {
    w.write_all(&encode_frame(frame))?;
    Ok(())
}

/// Blocking read of exactly one frame.
pub fn read_frame(r: &mut impl Read) -> Result<Frame> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..4] != FRAME_MAGIC {
        return Err(Error::Format("bad frame magic"));
    }
    if header[4] != FRAME_VERSION {
        return Err(Error::Format("unsupported frame version"));
    }
    let frame_type = FrameType::from_byte(header[5])?;
    let len = u32::from_be_bytes(header[6..10].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(Error::Format("frame payload too large"));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Frame::new(frame_type, payload))
}

pub fn encode_pubkey_payload(public: &ElGamalPublicKey) -> Vec<u8> {
    let mut buf = Vec::new();
    put_uint(&mut buf, public.p());
    put_uint(&mut buf, public.alpha());
    put_uint(&mut buf, public.y());
    buf
}

pub fn decode_pubkey_payload(buf: &[u8], rng: &mut impl Rng) -> Result<ElGamalPublicKey> {
    let mut pos = 0;
    let p = get_uint(buf, &mut pos)?;
    let alpha = get_uint(buf, &mut pos)?;
    let y = get_uint(buf, &mut pos)?;
    if pos != buf.len() {
        return Err(Error::Format("trailing bytes in pubkey payload"));
    }
    let params = PrimeParams::from_stored(p, alpha, false, rng)?;
    ElGamalPublicKey::new(params, y)
}

/// Offer payload: leader count as u32, then the (gamma, delta) pair of
/// the key ciphertext, then one pair per leader, all length-prefixed
/// big-endian.
pub fn encode_offer_payload(offer: &SessionOffer) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&(offer.k() as u32).to_be_bytes());
    let mut put_ct = |ct: &ElGamalCiphertext| {
        put_uint(&mut buf, &ct.gamma);
        put_uint(&mut buf, &ct.delta);
    };
    put_ct(&offer.key_ct);
    for ct in &offer.leader_cts {
        put_ct(ct);
    }
    buf
}

pub fn decode_offer_payload(buf: &[u8]) -> Result<SessionOffer> {
    if buf.len() < 4 {
        return Err(Error::Format("truncated offer payload"));
    }
    let k = u32::from_be_bytes(buf[..4].try_into().unwrap()) as usize;
    if k == 0 || k > 1024 {
        return Err(Error::Format("unreasonable leader count"));
    }
    let mut pos = 4;
    let get_ct = |pos: &mut usize| -> Result<ElGamalCiphertext> {
        let gamma = get_uint(buf, pos)?;
        let delta = get_uint(buf, pos)?;
        Ok(ElGamalCiphertext { gamma, delta })
    };
    let key_ct = get_ct(&mut pos)?;
    let leader_cts = (0..k)
        .map(|_| get_ct(&mut pos))
        .collect::<Result<Vec<_>>>()?;
    if pos != buf.len() {
        return Err(Error::Format("trailing bytes in offer payload"));
    }
    Ok(SessionOffer {
        key_ct,
        leader_cts,
    })
}

fn data_payload(seq: u64, block: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + block.len());
    buf.extend_from_slice(&seq.to_be_bytes());
    buf.extend_from_slice(block);
    buf
}

/// What a finished session looked like from one endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSummary {
    pub blocks: u64,
    pub plaintext_bytes: u64,
}

/// Drives the encrypting side over a connected reliable transport: fetch
/// the peer's public key, send the offer, stream every block of `source`,
/// close. Refuses k < 3.
pub fn run_initiator<T: Read + Write>(
    transport: &mut T,
    k: usize,
    source: &mut impl Read,
    rng: &mut impl Rng,
) -> Result<SessionSummary> {
    initiate(transport, k, source, rng, make_offer)
}

/// Initiator admitting the breakable k < 3 configurations, for the
/// attack demos only.
pub fn run_initiator_any_k<T: Read + Write>(
    transport: &mut T,
    k: usize,
    source: &mut impl Read,
    rng: &mut impl Rng,
) -> Result<SessionSummary> {
    initiate(transport, k, source, rng, crate::session::make_offer_any_k)
}

fn initiate<T: Read + Write, R: Rng>(
    transport: &mut T,
    k: usize,
    source: &mut impl Read,
    rng: &mut R,
    make: fn(&ElGamalPublicKey, usize, &mut R) -> Result<(SessionOffer, crate::stream::StreamState)>,
) -> Result<SessionSummary> {
    write_frame(transport, &Frame::new(FrameType::PubkeyReq, vec![]))?;
    transport.flush()?;
    let public = match read_frame(transport)? {
        f if f.frame_type == FrameType::Pubkey => decode_pubkey_payload(&f.payload, rng)?,
        f if f.frame_type == FrameType::Error => return Err(peer_error(&f)),
        _ => return Err(Error::Protocol("expected a pubkey frame")),
    };
    let codec = BlockCodecParams::for_prime(public.p())?;
    let (offer, mut state) = make(&public, k, rng)?;
    write_frame(
        transport,
        &Frame::new(FrameType::Offer, encode_offer_payload(&offer)),
    )?;

    let mut plaintext = Vec::new();
    source.read_to_end(&mut plaintext)?;
    let mut blocks = 0u64;
    for value in codec.encode_stream(&plaintext) {
        let seq = state.blocks_processed();
        let c = state.encrypt_block(&value)?;
        let serialized = codec.serialize_cipher_block(&c)?;
        write_frame(
            transport,
            &Frame::new(FrameType::Data, data_payload(seq, &serialized)),
        )?;
        blocks += 1;
    }
    write_frame(transport, &Frame::new(FrameType::Close, vec![]))?;
    transport.flush()?;
    Ok(SessionSummary {
        blocks,
        plaintext_bytes: plaintext.len() as u64,
    })
}

/// Drives the decrypting side: answer the pubkey request, accept the
/// offer, then decrypt DATA frames in sequence into `sink` until CLOSE.
/// The final block's padding is stripped with one block of lookahead so
/// plaintext streams out as it arrives.
pub fn run_responder<T: Read + Write>(
    transport: &mut T,
    keypair: &ElGamalKeyPair,
    sink: &mut impl Write,
) -> Result<SessionSummary> {
    match read_frame(transport)? {
        f if f.frame_type == FrameType::PubkeyReq => {}
        _ => return Err(Error::Protocol("expected a pubkey request")),
    }
    write_frame(
        transport,
        &Frame::new(
            FrameType::Pubkey,
            encode_pubkey_payload(keypair.public()),
        ),
    )?;
    transport.flush()?;

    let offer = match read_frame(transport)? {
        f if f.frame_type == FrameType::Offer => decode_offer_payload(&f.payload)?,
        f if f.frame_type == FrameType::Error => return Err(peer_error(&f)),
        _ => return Err(Error::Protocol("expected an offer frame")),
    };
    let codec = BlockCodecParams::for_prime(keypair.public().p())?;
    let mut state = match accept_offer(keypair, &offer) {
        Ok(state) => state,
        Err(e) => {
            let report = Frame::new(FrameType::Error, e.to_string().into_bytes());
            let _ = write_frame(transport, &report);
            let _ = transport.flush();
            return Err(e);
        }
    };

    let width = codec.cipher_block_width();
    let mut held: Option<Vec<u8>> = None;
    let mut bytes_out = 0u64;
    loop {
        let frame = read_frame(transport)?;
        match frame.frame_type {
            FrameType::Data => {
                if frame.payload.len() != 8 + width {
                    return Err(Error::Format("bad data frame size"));
                }
                let seq = u64::from_be_bytes(frame.payload[..8].try_into().unwrap());
                let expected = state.blocks_processed();
                if seq != expected {
                    let report = Frame::new(
                        FrameType::Error,
                        format!("desync: expected {expected}, got {seq}").into_bytes(),
                    );
                    let _ = write_frame(transport, &report);
                    let _ = transport.flush();
                    return Err(Error::Desync {
                        expected,
                        got: seq,
                    });
                }
                let value = codec.deserialize_cipher_block(&frame.payload[8..])?;
                let m = state.decrypt_block(&value)?;
                let decoded = codec.decode_block(&m).map_err(|e| match e {
                    Error::CorruptValue => Error::CorruptBlock { index: seq },
                    other => other,
                })?;
                if let Some(previous) = held.replace(decoded) {
                    sink.write_all(&previous)?;
                    bytes_out += previous.len() as u64;
                }
            }
            FrameType::Close => {
                let last = held.take().ok_or(Error::BadPadding)?;
                let keep = unpad_len(&last, codec.l())?;
                sink.write_all(&last[..keep])?;
                bytes_out += keep as u64;
                sink.flush()?;
                return Ok(SessionSummary {
                    blocks: state.blocks_processed(),
                    plaintext_bytes: bytes_out,
                });
            }
            FrameType::Error => return Err(peer_error(&frame)),
            _ => return Err(Error::Protocol("unexpected frame during data phase")),
        }
    }
}

fn peer_error(frame: &Frame) -> Error {
    Error::Peer(String::from_utf8_lossy(&frame.payload).into_owned())
}

/// Exposed so tests and harnesses can drive a responder against crafted
/// initiator traffic.
pub fn serialize_data_frame(seq: u64, block: &[u8]) -> Frame {
    Frame::new(FrameType::Data, data_payload(seq, block))
}
