//! Output masking with a one-time polynomial MAC.
//!
//! The masked output is `m = y ^ pad`. Its tag is `s + sum_i m_i * k^(i+1)` over GF(2^128), with
//! `(k, s)` fresh per session and `k != 0`.
//!
//! Inside a session the evaluator never sees `k` or `s`. For every output `i` the garbler deals
//! additive shares `u_i^0, u_i^1 = u_i^0 + k^(i+1)` with `sum_i u_i^0 = s`, each encrypted under
//! the output label that yields the matching masked bit. Summing the shares it can open gives the
//! tag of the masked output it actually computed.

use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garbling::{hash_tweaked, Delta, WireLabel, DOMAIN_TAG};
use crate::gf128::mul;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MaskError {
    #[error("pad has {got} bits, expected {expected}")]
    PadLength { expected: usize, got: usize },
    #[error("MAC verification failed")]
    MacMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacKey {
    pub k: u128,
    pub s: u128,
}

impl MacKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = 0;
        while k == 0 {
            k = rng.gen();
        }
        MacKey { k, s: rng.gen() }
    }
}

/// Garbler-side secret for one masked session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMask {
    pub pad: Vec<bool>,
    pub key: MacKey,
}

impl OutputMask {
    pub fn random<R: RngCore + CryptoRng>(outputs: usize, rng: &mut R) -> Self {
        let pad = (0..outputs).map(|_| rng.gen()).collect();
        OutputMask {
            pad,
            key: MacKey::random(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedOutput {
    pub bits: Vec<bool>,
    pub tag: u128,
}

fn powers(k: u128, n: usize) -> impl Iterator<Item = u128> {
    std::iter::successors(Some(k), move |p| Some(mul(*p, k))).take(n)
}

pub fn mac_tag(key: &MacKey, bits: &[bool]) -> u128 {
    powers(key.k, bits.len())
        .zip(bits)
        .filter(|(_, &b)| b)
        .fold(key.s, |acc, (p, _)| acc ^ p)
}

pub fn mask_outputs(y: &[bool], pad: &[bool], key: &MacKey) -> Result<MaskedOutput, MaskError> {
    if pad.len() != y.len() {
        return Err(MaskError::PadLength {
            expected: y.len(),
            got: pad.len(),
        });
    }
    let bits: Vec<bool> = y.iter().zip(pad).map(|(a, b)| a ^ b).collect();
    let tag = mac_tag(key, &bits);
    Ok(MaskedOutput { bits, tag })
}

pub fn unmask_verify(masked: &MaskedOutput, pad: &[bool], key: &MacKey) -> Result<Vec<bool>, MaskError> {
    if pad.len() != masked.bits.len() {
        return Err(MaskError::PadLength {
            expected: masked.bits.len(),
            got: pad.len(),
        });
    }
    if mac_tag(key, &masked.bits) != masked.tag {
        return Err(MaskError::MacMismatch);
    }
    Ok(masked.bits.iter().zip(pad).map(|(a, b)| a ^ b).collect())
}

#[inline]
fn share_pad(label: WireLabel, i: usize) -> u128 {
    hash_tweaked(label.0, 0, DOMAIN_TAG | i as u128)
}

/// Encrypted tag shares, two rows per output indexed by label color.
pub(crate) fn tag_share_rows<R: RngCore + CryptoRng>(
    mask: &OutputMask,
    zero_labels: &[WireLabel],
    delta: Delta,
    rng: &mut R,
) -> Vec<[u128; 2]> {
    let n = zero_labels.len();
    let mut base: Vec<u128> = (0..n).map(|_| rng.gen()).collect();
    if n > 0 {
        base[n - 1] = base[..n - 1].iter().fold(mask.key.s, |acc, u| acc ^ u);
    }
    powers(mask.key.k, n)
        .enumerate()
        .map(|(i, p)| {
            let mut rows = [0u128; 2];
            for y in [false, true] {
                let label = if y {
                    zero_labels[i] ^ delta.as_label()
                } else {
                    zero_labels[i]
                };
                let m = y ^ mask.pad[i];
                let share = if m { base[i] ^ p } else { base[i] };
                rows[label.color() as usize] = share ^ share_pad(label, i);
            }
            rows
        })
        .collect()
}

pub(crate) fn open_tag_share(rows: &[u128; 2], label: WireLabel, i: usize) -> u128 {
    rows[label.color() as usize] ^ share_pad(label, i)
}
