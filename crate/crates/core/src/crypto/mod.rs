//! Primitives the protocol composes: SHA-1 hashing, width-normalized XOR,
//! AES-128 block encryption and the digest-to-key adapter.

mod bits;
mod time;

use std::fmt;

use aes::cipher::{BlockCipherDecrypt, BlockCipherEncrypt, KeyInit};
use aes::Aes128;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha1::{Digest, Sha1};
use thiserror::Error;

pub use bits::{BitReader, BitString};
pub use time::{
    check_freshness, Clock, FreshnessVerdict, FreshnessWindow, LogicalClock, Staleness, SystemClock,
    Timestamp32,
};

pub const BLOCK_BITS: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("cannot encrypt an empty plaintext")]
    EmptyPlaintext,
    #[error("ciphertext of {0} bits is not a positive multiple of 128")]
    MalformedCiphertext(usize),
    #[error("expected {expected} hex digits, got {got:?}")]
    BadHex { expected: usize, got: String },
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const BYTES: usize = $len;
            pub const WIDTH: usize = $len * 8;

            pub fn to_bits(&self) -> BitString {
                BitString::from_bytes(&self.0)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                let bad = || CryptoError::BadHex { expected: $len * 2, got: s.to_owned() };
                let raw = hex::decode(s.trim()).map_err(|_| bad())?;
                let arr: [u8; $len] = raw.try_into().map_err(|_| bad())?;
                Ok(Self(arr))
            }

            /// The bit string must be exactly this type's width.
            pub fn from_bits(bits: &BitString) -> Option<Self> {
                (bits.len() == Self::WIDTH).then(|| {
                    let mut out = [0u8; $len];
                    out.copy_from_slice(&bits.to_bytes());
                    Self(out)
                })
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.to_hex())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

fixed_bytes!(
    /// 160-bit SHA-1 output.
    Digest160,
    20
);
fixed_bytes!(
    /// 128-bit AES key.
    Key128,
    16
);

/// 160-bit random salt (`r_d`). Same width as a digest so it XORs cleanly
/// with a hashed password.
pub type Salt160 = Digest160;

/// A sequence of AES-128 blocks.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CipherText(Vec<[u8; 16]>);

impl CipherText {
    /// At least one block is required.
    pub fn from_blocks(blocks: Vec<[u8; 16]>) -> Result<Self, CryptoError> {
        if blocks.is_empty() {
            return Err(CryptoError::MalformedCiphertext(0));
        }
        Ok(Self(blocks))
    }

    pub fn from_bits(bits: &BitString) -> Result<Self, CryptoError> {
        if bits.is_empty() || !bits.len().is_multiple_of(BLOCK_BITS) {
            return Err(CryptoError::MalformedCiphertext(bits.len()));
        }
        let bytes = bits.to_bytes();
        let blocks = bytes
            .chunks_exact(16)
            .map(|c| c.try_into().expect("chunk of 16"))
            .collect();
        Ok(Self(blocks))
    }

    pub fn blocks(&self) -> &[[u8; 16]] {
        &self.0
    }

    pub fn block_count(&self) -> usize {
        self.0.len()
    }

    pub fn bit_len(&self) -> usize {
        self.0.len() * BLOCK_BITS
    }

    pub fn to_bits(&self) -> BitString {
        BitString::from_bytes(&self.0.concat())
    }
}

impl fmt::Debug for CipherText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CipherText({})", hex::encode(self.0.concat()))
    }
}

/// SHA-1 of the input after left zero-padding to a whole number of bytes.
pub fn hash160(input: &BitString) -> Digest160 {
    Digest160(Sha1::digest(input.to_bytes()).into())
}

/// Bitwise XOR; the narrower operand is zero-extended on the left.
pub fn xor_norm(a: &BitString, b: &BitString) -> BitString {
    let width = a.len().max(b.len());
    let a = a.zero_extend(width);
    let b = b.zero_extend(width);
    a.iter().zip(b.iter()).map(|(x, y)| x ^ y).collect()
}

/// The 128 most significant bits of a digest.
pub fn derive_key(digest: &Digest160) -> Key128 {
    let mut key = [0u8; 16];
    key.copy_from_slice(&digest.0[..16]);
    Key128(key)
}

/// AES-128-ECB over the plaintext zero-padded on the right to whole blocks.
pub fn encrypt(key: &Key128, plaintext: &BitString) -> Result<CipherText, CryptoError> {
    if plaintext.is_empty() {
        return Err(CryptoError::EmptyPlaintext);
    }
    let cipher = Aes128::new(&key.0.into());
    let padded = plaintext.pad_right(plaintext.len().div_ceil(BLOCK_BITS) * BLOCK_BITS);
    let bytes = padded.to_bytes();
    let blocks = bytes
        .chunks_exact(16)
        .map(|chunk| {
            let mut block: [u8; 16] = chunk.try_into().expect("chunk of 16");
            cipher.encrypt_block((&mut block).into());
            block
        })
        .collect();
    Ok(CipherText(blocks))
}

/// Inverse of [`encrypt`]; the result keeps its zero padding.
pub fn decrypt(key: &Key128, ciphertext: &CipherText) -> BitString {
    let cipher = Aes128::new(&key.0.into());
    let mut out = Vec::with_capacity(ciphertext.0.len() * 16);
    for block in &ciphertext.0 {
        let mut block = *block;
        cipher.decrypt_block((&mut block).into());
        out.extend_from_slice(&block);
    }
    BitString::from_bytes(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // FIPS 180 published test vectors.
    #[test]
    fn sha1_known_vectors() {
        assert_eq!(
            hash160(&BitString::from_bytes(b"abc")).to_hex(),
            "a9993e364706816aba3e25717850c26c9cd0d89d"
        );
        assert_eq!(
            hash160(&BitString::new()).to_hex(),
            "da39a3ee5e6b4b0d3255bfef95601890afd80709"
        );
        assert_eq!(
            hash160(&BitString::from_bytes(
                b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"
            ))
            .to_hex(),
            "84983e441c3bd26ebaae4aa1f95129e5e54670f1"
        );
    }

    // FIPS 197 appendix C.1.
    #[test]
    fn aes128_known_vector() {
        let key = Key128::from_hex("000102030405060708090a0b0c0d0e0f").unwrap();
        let pt = BitString::from_bytes(&hex::decode("00112233445566778899aabbccddeeff").unwrap());
        let ct = encrypt(&key, &pt).unwrap();
        assert_eq!(hex::encode(ct.blocks()[0]), "69c4e0d86a7b0430d8cdb78070b4c55a");
        assert_eq!(decrypt(&key, &ct), pt);
    }

    #[test]
    fn xor_zero_extends_left() {
        let a = BitString::from_uint(0xdead_beef, 32);
        let b = BitString::from_uint(0x0123_4567_89ab_cdef, 64);
        let out = xor_norm(&a, &b);
        assert_eq!(out.len(), 64);
        assert_eq!(out.read_uint(0..64), 0x0123_4567_89ab_cdef ^ 0xdead_beef);
    }

    #[test]
    fn xor_identity_and_self_inverse() {
        let a = BitString::from_uint(0x1234_5678, 32);
        assert_eq!(xor_norm(&a, &BitString::zeros(32)), a);
        assert!(xor_norm(&a, &a).is_zero());
        assert_eq!(xor_norm(&a, &a).len(), 32);
    }

    #[test]
    fn derive_key_truncates_trailing_bits() {
        let mut d = [0u8; 20];
        for (i, b) in d.iter_mut().enumerate() {
            *b = i as u8;
        }
        let k = derive_key(&Digest160(d));
        assert_eq!(&k.0[..], &d[..16]);
        let mut other = d;
        other[16..].copy_from_slice(&[0xff; 4]);
        assert_eq!(derive_key(&Digest160(other)), k);
    }

    #[test]
    fn block_counts_match_reported_sizes() {
        let key = Key128([7; 16]);
        assert_eq!(encrypt(&key, &BitString::zeros(448)).unwrap().bit_len(), 512);
        assert_eq!(encrypt(&key, &BitString::zeros(224)).unwrap().bit_len(), 256);
        assert_eq!(encrypt(&key, &BitString::zeros(96)).unwrap().bit_len(), 128);
    }

    #[test]
    fn empty_plaintext_is_an_error() {
        assert_eq!(
            encrypt(&Key128([0; 16]), &BitString::new()),
            Err(CryptoError::EmptyPlaintext)
        );
    }

    #[test]
    fn malformed_ciphertext_lengths() {
        assert_eq!(
            CipherText::from_bits(&BitString::zeros(100)),
            Err(CryptoError::MalformedCiphertext(100))
        );
        assert_eq!(
            CipherText::from_bits(&BitString::new()),
            Err(CryptoError::MalformedCiphertext(0))
        );
        let ct = CipherText::from_bits(&BitString::zeros(512)).unwrap();
        assert_eq!(decrypt(&Key128([1; 16]), &ct).len(), 512);
    }

    #[test]
    fn wrong_key_never_recovers_plaintext() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k1 = Key128(rng.gen());
            let k2 = Key128(rng.gen());
            if k1 == k2 {
                continue;
            }
            let pt = BitString::from_bytes(&rng.gen::<[u8; 28]>());
            let ct = encrypt(&k1, &pt).unwrap();
            assert_ne!(decrypt(&k2, &ct).slice(0..pt.len()), pt);
        }
    }

    #[test]
    fn hex_round_trip_and_errors() {
        let k = Key128([0xab; 16]);
        assert_eq!(Key128::from_hex(&k.to_hex()).unwrap(), k);
        assert!(Key128::from_hex("abcd").is_err());
        assert!(Digest160::from_hex("zz").is_err());
    }

    fn bit_string(max: usize) -> impl Strategy<Value = BitString> {
        prop::collection::vec(any::<bool>(), 1..max).prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn encrypt_round_trips(key in any::<[u8; 16]>(), pt in bit_string(700)) {
            let key = Key128(key);
            let ct = encrypt(&key, &pt).unwrap();
            prop_assert_eq!(decrypt(&key, &ct).slice(0..pt.len()), pt);
        }

        #[test]
        fn ciphertext_length_is_whole_blocks(len in 1usize..=2048) {
            let ct = encrypt(&Key128([3; 16]), &BitString::zeros(len)).unwrap();
            prop_assert_eq!(ct.bit_len(), 128 * len.div_ceil(128));
        }

        #[test]
        fn xor_commutes_and_associates(a in bit_string(100), b in bit_string(100), c in bit_string(100)) {
            prop_assert_eq!(xor_norm(&a, &b), xor_norm(&b, &a));
            prop_assert_eq!(
                xor_norm(&xor_norm(&a, &b), &c),
                xor_norm(&a, &xor_norm(&b, &c))
            );
        }

        #[test]
        fn hash_and_key_derivation_are_pure(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let x = BitString::from_bytes(&bytes);
            prop_assert_eq!(hash160(&x), hash160(&x));
            prop_assert_eq!(derive_key(&hash160(&x)), derive_key(&hash160(&x)));
        }
    }
}
