//! Fixed-key block-cipher hash.
//!
//! `H(A, B, T) = pi(K) ^ K` with `K = 2A ^ 4B ^ T`, where doubling is multiplication by x in
//! GF(2^128) and `pi` is AES-128 under the all-zero key. Values enter and leave AES as 16
//! little-endian bytes.
//!
//! Gate tweaks occupy the low 64 bits with the high 64 bits zero. Other uses of the hash (OT key
//! derivation, instruction keystreams, output tag shares) put a nonzero domain constant in the
//! high 64 bits.

use std::sync::LazyLock;

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;

use super::WireLabel;
use crate::gf128::double;

static FIXED_KEY: LazyLock<Aes128> = LazyLock::new(|| Aes128::new(&[0u8; 16].into()));

pub(crate) const DOMAIN_OT: u128 = 0x4f54_0000_0000_0001 << 64;
pub(crate) const DOMAIN_STREAM: u128 = 0x5354_0000_0000_0002 << 64;
pub(crate) const DOMAIN_TAG: u128 = 0x5447_0000_0000_0003 << 64;

#[inline]
fn pi(x: u128) -> u128 {
    let mut block = x.to_le_bytes().into();
    FIXED_KEY.encrypt_block(&mut block);
    u128::from_le_bytes(block.into())
}

#[inline]
pub(crate) fn key_input(a: u128, b: u128, tweak: u128) -> u128 {
    double(a) ^ double(double(b)) ^ tweak
}

#[inline]
pub(crate) fn hash_tweaked(a: u128, b: u128, tweak: u128) -> u128 {
    let k = key_input(a, b, tweak);
    pi(k) ^ k
}

/// Hash of two input labels under a 64-bit gate id.
#[inline]
pub fn gate_hash(a: WireLabel, b: WireLabel, tweak: u64) -> u128 {
    hash_tweaked(a.0, b.0, tweak as u128)
}
