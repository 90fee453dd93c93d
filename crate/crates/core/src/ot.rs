//! 1-out-of-2 oblivious transfer of wire labels.
//!
//! Two-flow Diffie-Hellman OT over the Ristretto group:
//!
//! 1. sender picks `a`, publishes `A = aG`;
//! 2. receiver with choice `s` picks `b`, replies `B = bG` (s = 0) or `B = A + bG` (s = 1);
//! 3. sender derives `k0 = H(aB)`, `k1 = H(a(B - A))` and sends `X0 ^ k0`, `X1 ^ k1`;
//! 4. receiver derives `k_s = H(bA)` and opens its ciphertext.
//!
//! Keys come from the fixed-key hash used for garbling, under a separate tweak domain. Group
//! elements travel as 32-byte canonical encodings; anything else is rejected.
//!
//! Each transfer is an independent instance; a batch is `n` instances run side by side.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::garbling::{hash_tweaked, WireLabel, DOMAIN_OT};

/// Bytes of an encoded group element.
pub const POINT_BYTES: usize = 32;
/// Bytes of one ciphertext.
pub const CIPHERTEXT_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OtError {
    #[error("group element is not a canonical encoding")]
    MalformedPoint,
    #[error("group element is the identity")]
    IdentityPoint,
    #[error("ciphertext is {0} bytes, expected 16")]
    CiphertextLength(usize),
    #[error("batch carries {got} entries, expected {expected}")]
    BatchSize { expected: usize, got: usize },
}

fn decode_point(bytes: &[u8; POINT_BYTES]) -> Result<RistrettoPoint, OtError> {
    let p = CompressedRistretto(*bytes)
        .decompress()
        .ok_or(OtError::MalformedPoint)?;
    if p == RistrettoPoint::identity() {
        return Err(OtError::IdentityPoint);
    }
    Ok(p)
}

fn derive_key(shared: &RistrettoPoint, slot: bool) -> u128 {
    let bytes = shared.compress().to_bytes();
    let lo = u128::from_le_bytes(bytes[..16].try_into().unwrap());
    let hi = u128::from_le_bytes(bytes[16..].try_into().unwrap());
    hash_tweaked(lo, hi, DOMAIN_OT | slot as u128)
}

/// First flow, sender to receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtSenderMsg(pub [u8; POINT_BYTES]);

/// Second flow, receiver to sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtReceiverMsg(pub [u8; POINT_BYTES]);

/// Third flow: both labels, each under its own key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtCiphertexts {
    pub c0: [u8; CIPHERTEXT_BYTES],
    pub c1: [u8; CIPHERTEXT_BYTES],
}

impl OtCiphertexts {
    pub fn from_slices(c0: &[u8], c1: &[u8]) -> Result<Self, OtError> {
        let fix = |c: &[u8]| -> Result<[u8; CIPHERTEXT_BYTES], OtError> {
            c.try_into().map_err(|_| OtError::CiphertextLength(c.len()))
        };
        Ok(OtCiphertexts {
            c0: fix(c0)?,
            c1: fix(c1)?,
        })
    }

    pub fn to_bytes(&self) -> [u8; 2 * CIPHERTEXT_BYTES] {
        let mut out = [0u8; 2 * CIPHERTEXT_BYTES];
        out[..CIPHERTEXT_BYTES].copy_from_slice(&self.c0);
        out[CIPHERTEXT_BYTES..].copy_from_slice(&self.c1);
        out
    }
}

pub struct OtSenderState {
    a: Scalar,
    big_a: RistrettoPoint,
}

pub struct OtReceiverState {
    choice: bool,
    key: u128,
}

pub fn ot_sender_setup<R: RngCore + CryptoRng>(rng: &mut R) -> (OtSenderState, OtSenderMsg) {
    let a = Scalar::random(rng);
    let big_a = &a * RISTRETTO_BASEPOINT_TABLE;
    let msg = OtSenderMsg(big_a.compress().to_bytes());
    (OtSenderState { a, big_a }, msg)
}

pub fn ot_receiver_choose<R: RngCore + CryptoRng>(
    choice: bool,
    msg: &OtSenderMsg,
    rng: &mut R,
) -> Result<(OtReceiverState, OtReceiverMsg), OtError> {
    let big_a = decode_point(&msg.0)?;
    let b = Scalar::random(rng);
    let bg = &b * RISTRETTO_BASEPOINT_TABLE;
    let big_b = if choice { big_a + bg } else { bg };
    let key = derive_key(&(b * big_a), choice);
    Ok((
        OtReceiverState { choice, key },
        OtReceiverMsg(big_b.compress().to_bytes()),
    ))
}

/// The sender side never sees the choice bit: only its own state, both labels and the
/// receiver's group element go in.
pub fn ot_sender_transfer(
    state: OtSenderState,
    x0: WireLabel,
    x1: WireLabel,
    msg: &OtReceiverMsg,
) -> Result<OtCiphertexts, OtError> {
    let big_b = decode_point(&msg.0)?;
    let k0 = derive_key(&(state.a * big_b), false);
    let k1 = derive_key(&(state.a * (big_b - state.big_a)), true);
    Ok(OtCiphertexts {
        c0: (x0.0 ^ k0).to_le_bytes(),
        c1: (x1.0 ^ k1).to_le_bytes(),
    })
}

pub fn ot_receiver_retrieve(state: OtReceiverState, ct: &OtCiphertexts) -> WireLabel {
    let c = if state.choice { ct.c1 } else { ct.c0 };
    WireLabel(u128::from_le_bytes(c) ^ state.key)
}

/// Sender half of `n` independent instances.
pub struct OtBatchSender {
    states: Vec<OtSenderState>,
}

impl OtBatchSender {
    pub fn setup<R: RngCore + CryptoRng>(n: usize, rng: &mut R) -> (Self, Vec<OtSenderMsg>) {
        let (states, msgs) = (0..n).map(|_| ot_sender_setup(rng)).unzip();
        (OtBatchSender { states }, msgs)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transfer(
        self,
        pairs: &[(WireLabel, WireLabel)],
        msgs: &[OtReceiverMsg],
    ) -> Result<Vec<OtCiphertexts>, OtError> {
        let n = self.states.len();
        for got in [pairs.len(), msgs.len()] {
            if got != n {
                return Err(OtError::BatchSize { expected: n, got });
            }
        }
        self.states
            .into_iter()
            .zip(pairs)
            .zip(msgs)
            .map(|((st, &(x0, x1)), m)| ot_sender_transfer(st, x0, x1, m))
            .collect()
    }
}

/// Receiver half of `n` independent instances.
pub struct OtBatchReceiver {
    states: Vec<OtReceiverState>,
}

impl OtBatchReceiver {
    pub fn choose<R: RngCore + CryptoRng>(
        choices: &[bool],
        msgs: &[OtSenderMsg],
        rng: &mut R,
    ) -> Result<(Self, Vec<OtReceiverMsg>), OtError> {
        if msgs.len() != choices.len() {
            return Err(OtError::BatchSize {
                expected: choices.len(),
                got: msgs.len(),
            });
        }
        let (states, replies) = choices
            .iter()
            .zip(msgs)
            .map(|(&s, m)| ot_receiver_choose(s, m, rng))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();
        Ok((OtBatchReceiver { states }, replies))
    }

    pub fn retrieve(self, cts: &[OtCiphertexts]) -> Result<Vec<WireLabel>, OtError> {
        if cts.len() != self.states.len() {
            return Err(OtError::BatchSize {
                expected: self.states.len(),
                got: cts.len(),
            });
        }
        Ok(self
            .states
            .into_iter()
            .zip(cts)
            .map(|(st, ct)| ot_receiver_retrieve(st, ct))
            .collect())
    }
}

/// Insecure stand-in for protocol tests: the dealer sees the choice and hands over `X_s`.
pub mod insecure {
    use crate::garbling::WireLabel;

    pub fn dealer_transfer(x0: WireLabel, x1: WireLabel, choice: bool) -> WireLabel {
        if choice {
            x1
        } else {
            x0
        }
    }
}
