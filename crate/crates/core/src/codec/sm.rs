// SPDX-License-Identifier: Apache-2.0

/// 1 sign bit + 7-bit magnitude. Zero is always positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SignMagnitude {
    negative: bool,
    magnitude: u8,
}

impl SignMagnitude {
    pub const ZERO: SignMagnitude = SignMagnitude {
        negative: false,
        magnitude: 0,
    };

    /// Returns `None` when `magnitude > 127`.
    pub fn new(negative: bool, magnitude: u8) -> Option<Self> {
        (magnitude <= 0x7f).then_some(SignMagnitude {
            negative: negative && magnitude != 0,
            magnitude,
        })
    }

    /// Encodes `v`; -128 has no 7-bit magnitude and is clamped to -127,
    /// which is reported through the flag.
    pub fn from_i8(v: i8) -> (Self, bool) {
        let clamped = v == i8::MIN;
        let magnitude = v.unsigned_abs().min(0x7f);
        (
            SignMagnitude {
                negative: v < 0,
                magnitude,
            },
            clamped,
        )
    }

    /// Decodes the packed byte form (bit 7 sign, bits 6..0 magnitude).
    /// A negative zero byte (0x80) normalises to +0.
    pub fn from_byte(b: u8) -> Self {
        let magnitude = b & 0x7f;
        SignMagnitude {
            negative: b & 0x80 != 0 && magnitude != 0,
            magnitude,
        }
    }

    pub fn to_byte(self) -> u8 {
        ((self.negative as u8) << 7) | self.magnitude
    }

    pub fn is_negative(self) -> bool {
        self.negative
    }

    pub fn magnitude(self) -> u8 {
        self.magnitude
    }

    pub fn value(self) -> i8 {
        if self.negative {
            -(self.magnitude as i8)
        } else {
            self.magnitude as i8
        }
    }
}

/// Sign-magnitude encoding of `v` plus a flag set when -128 was clamped.
pub fn to_sign_magnitude(v: i8) -> (SignMagnitude, bool) {
    SignMagnitude::from_i8(v)
}

/// Packed sign-magnitude byte of `v` (clamping -128).
#[inline]
pub fn sm_byte(v: i8) -> u8 {
    SignMagnitude::from_i8(v).0.to_byte()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minus_three() {
        let (sm, clamped) = to_sign_magnitude(-3);
        assert!(sm.is_negative());
        assert_eq!(sm.magnitude(), 0b000_0011);
        assert_eq!(sm.to_byte(), 0b1000_0011);
        assert!(!clamped);
    }

    #[test]
    fn zero_is_positive() {
        let (sm, _) = to_sign_magnitude(0);
        assert_eq!(sm, SignMagnitude::ZERO);
        assert_eq!(SignMagnitude::from_byte(0x80), SignMagnitude::ZERO);
        assert_eq!(SignMagnitude::new(true, 0), Some(SignMagnitude::ZERO));
        assert_eq!(SignMagnitude::new(false, 128), None);
    }

    #[test]
    fn min_value_clamps() {
        let (sm, clamped) = to_sign_magnitude(-128);
        assert!(clamped);
        assert!(sm.is_negative());
        assert_eq!(sm.magnitude(), 127);
        assert_eq!(sm.value(), -127);
    }

    #[test]
    fn exhaustive_round_trip() {
        for v in -127i8..=127 {
            let (sm, clamped) = to_sign_magnitude(v);
            assert!(!clamped);
            assert_eq!(sm.value(), v);
            assert_eq!(SignMagnitude::from_byte(sm.to_byte()), sm);
        }
    }

    #[test]
    fn clamp_count_over_random_tensor() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<i8> = (0..50_000).map(|_| rng.gen()).collect();
        let expected = values.iter().filter(|&&v| v == i8::MIN).count();
        let counted = values.iter().filter(|&&v| to_sign_magnitude(v).1).count();
        assert_eq!(counted, expected);
        assert!(expected > 0);
    }
}
