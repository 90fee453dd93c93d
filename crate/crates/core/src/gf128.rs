//! Arithmetic in GF(2^128) with modulus x^128 + x^7 + x^2 + x + 1.
//!
//! Bit `i` of the `u128` is the coefficient of x^i.

const REDUCTION: u128 = 0x87;

/// Multiplication by x.
#[inline]
pub fn double(v: u128) -> u128 {
    let carry = (v >> 127) as u8;
    (v << 1) ^ (REDUCTION * carry as u128)
}

/// Field multiplication (shift-and-add).
pub fn mul(a: u128, b: u128) -> u128 {
    let mut acc = 0u128;
    let mut x = a;
    let mut y = b;
    while y != 0 {
        if y & 1 == 1 {
            acc ^= x;
        }
        x = double(x);
        y >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Schoolbook carry-less product into 256 bits, then long division by the modulus.
    fn mul_oracle(a: u128, b: u128) -> u128 {
        let mut wide = [0u128; 2]; // [low, high]
        for i in 0..128 {
            if (b >> i) & 1 == 1 {
                wide[0] ^= a << i;
                if i > 0 {
                    wide[1] ^= a >> (128 - i);
                }
            }
        }
        // Reduce coefficient by coefficient from the top: x^(128+k) = x^k * (x^7 + x^2 + x + 1).
        for k in (0..128).rev() {
            if (wide[1] >> k) & 1 == 1 {
                wide[1] ^= 1 << k;
                for t in [7u32, 2, 1, 0] {
                    let pos = k + t as usize;
                    if pos >= 128 {
                        wide[1] ^= 1 << (pos - 128);
                    } else {
                        wide[0] ^= 1 << pos;
                    }
                }
            }
        }
        wide[0]
    }

    #[test]
    fn doubling_wraps_top_bit() {
        assert_eq!(double(1), 2);
        assert_eq!(double(1 << 127), 0x87);
    }

    #[test]
    fn identities() {
        assert_eq!(mul(0xdead_beef, 1), 0xdead_beef);
        assert_eq!(mul(0xdead_beef, 0), 0);
        assert_eq!(mul(1 << 127, 2), 0x87);
    }

    proptest! {
        #[test]
        fn mul_matches_oracle(a: u128, b: u128) {
            prop_assert_eq!(mul(a, b), mul_oracle(a, b));
        }

        #[test]
        fn mul_commutes_and_distributes(a: u128, b: u128, c: u128) {
            prop_assert_eq!(mul(a, b), mul(b, a));
            prop_assert_eq!(mul(a, b ^ c), mul(a, b) ^ mul(a, c));
        }

        #[test]
        fn double_is_mul_by_x(a: u128) {
            prop_assert_eq!(double(a), mul(a, 2));
        }
    }
}
