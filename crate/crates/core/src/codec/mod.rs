//! Bit-exact wire encoding of the four handshake messages.
//!
//! Every message is a fixed-size big-endian concatenation of its fields in
//! declaration order. Sizes are constants:
//!
//! | kind              | layout                         | bits |
//! |-------------------|--------------------------------|------|
//! | `AuthRequest`     | `CID(512) C(128) T1(32)`       | 672  |
//! | `GatewayToMobile` | `V(256) T3(32)`                | 288  |
//! | `MobileToSensor`  | `V'(256) T5(32)`               | 288  |
//! | `SensorToExpert`  | `L(128) T7(32)`                | 160  |

mod plain;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{BitReader, BitString, CipherText, Timestamp32, BLOCK_BITS};

pub use plain::{CidPlain, CredentialPlain, InnerXPlain, LPlain, Plaintext, ViPlain, ViPrimePlain};

/// Sum of all four message sizes.
pub const HANDSHAKE_TOTAL_BITS: usize = 1408;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("{kind} must be {expected} bits on the wire, got {got}")]
    WrongLength { kind: MessageKind, expected: usize, got: usize },
    #[error("{field} must span {expected} cipher blocks, got {got}")]
    WrongBlockCount { field: &'static str, expected: usize, got: usize },
    #[error("{schema} plaintext needs {needed} bits, got {got}")]
    Truncated { schema: &'static str, needed: usize, got: usize },
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    AuthRequest,
    GatewayToMobile,
    MobileToSensor,
    SensorToExpert,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::AuthRequest,
        MessageKind::GatewayToMobile,
        MessageKind::MobileToSensor,
        MessageKind::SensorToExpert,
    ];

    pub fn wire_size_bits(self) -> usize {
        match self {
            MessageKind::AuthRequest => 672,
            MessageKind::GatewayToMobile => 288,
            MessageKind::MobileToSensor => 288,
            MessageKind::SensorToExpert => 160,
        }
    }

    /// Bit range of the companion cleartext timestamp inside the wire string.
    pub fn timestamp_range(self) -> std::ops::Range<usize> {
        let end = self.wire_size_bits();
        end - Timestamp32::WIDTH..end
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::AuthRequest => "auth-request",
            MessageKind::GatewayToMobile => "gateway-to-mobile",
            MessageKind::MobileToSensor => "mobile-to-sensor",
            MessageKind::SensorToExpert => "sensor-to-expert",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownKind(s.to_owned()))
    }
}

pub fn wire_size_bits(kind: MessageKind) -> usize {
    kind.wire_size_bits()
}

macro_rules! single_block {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; 16]);

        impl $name {
            pub fn to_bits(&self) -> BitString {
                BitString::from_bytes(&self.0)
            }

            pub fn to_cipher(&self) -> CipherText {
                CipherText::from_blocks(vec![self.0]).expect("one block")
            }

            pub fn from_cipher(ct: &CipherText) -> Result<Self, SchemaError> {
                match ct.blocks() {
                    [block] => Ok(Self(*block)),
                    other => Err(SchemaError::WrongBlockCount {
                        field: stringify!($name),
                        expected: 1,
                        got: other.len(),
                    }),
                }
            }
        }
    };
}

single_block!(
    /// The expert's credential `C = E_Kj[M_id || ID_gw]`.
    CredentialC
);
single_block!(
    /// The gateway-to-sensor inner ciphertext `X = E_{K_GW-SNj}[M_id || M]`.
    InnerX
);

impl serde::Serialize for CredentialC {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> serde::Deserialize<'de> for CredentialC {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 16] = raw
            .try_into()
            .map_err(|_| serde::de::Error::custom("credential must be 16 bytes"))?;
        Ok(Self(arr))
    }
}

/// `<CID_i, C, T_1>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthRequest {
    pub cid: CipherText,
    pub c: CredentialC,
    pub t1: Timestamp32,
}

impl AuthRequest {
    /// Companion fields are taken from the sealed plaintext so the cleartext
    /// `T_1` always matches the one inside `CID_i`.
    pub fn assemble(plain: &CidPlain, cid: CipherText) -> Self {
        Self { cid, c: plain.c, t1: plain.t1 }
    }
}

/// `<V_i, T_3>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GatewayToMobile {
    pub vi: CipherText,
    pub t3: Timestamp32,
}

impl GatewayToMobile {
    pub fn assemble(plain: &ViPlain, vi: CipherText) -> Self {
        Self { vi, t3: plain.t3 }
    }
}

/// `<V'_i, T_5>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobileToSensor {
    pub vi_prime: CipherText,
    pub t5: Timestamp32,
}

impl MobileToSensor {
    pub fn assemble(plain: &ViPrimePlain, vi_prime: CipherText) -> Self {
        Self { vi_prime, t5: plain.t5 }
    }
}

/// `<L, T_7>`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensorToExpert {
    pub l: CipherText,
    pub t7: Timestamp32,
}

impl SensorToExpert {
    pub fn assemble(plain: &LPlain, l: CipherText) -> Self {
        Self { l, t7: plain.t7 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolMessage {
    AuthRequest(AuthRequest),
    GatewayToMobile(GatewayToMobile),
    MobileToSensor(MobileToSensor),
    SensorToExpert(SensorToExpert),
}

impl ProtocolMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::AuthRequest(_) => MessageKind::AuthRequest,
            ProtocolMessage::GatewayToMobile(_) => MessageKind::GatewayToMobile,
            ProtocolMessage::MobileToSensor(_) => MessageKind::MobileToSensor,
            ProtocolMessage::SensorToExpert(_) => MessageKind::SensorToExpert,
        }
    }
}

macro_rules! into_message {
    ($($ty:ident),*) => {$(
        impl From<$ty> for ProtocolMessage {
            fn from(m: $ty) -> Self {
                ProtocolMessage::$ty(m)
            }
        }
    )*};
}
into_message!(AuthRequest, GatewayToMobile, MobileToSensor, SensorToExpert);

/// An encoded message.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WireBits(BitString);

impl WireBits {
    pub fn from_bits(bits: BitString) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flip(&mut self, index: usize) {
        self.0.flip(index);
    }

    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }
}

impl fmt::Debug for WireBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WireBits({} bits, {})", self.len(), self.to_hex())
    }
}

fn expect_blocks(field: &'static str, ct: &CipherText, expected: usize) -> Result<(), SchemaError> {
    if ct.block_count() == expected {
        Ok(())
    } else {
        Err(SchemaError::WrongBlockCount { field, expected, got: ct.block_count() })
    }
}

pub fn encode(msg: &ProtocolMessage) -> Result<WireBits, SchemaError> {
    let bits = match msg {
        ProtocolMessage::AuthRequest(m) => {
            expect_blocks("CID", &m.cid, 4)?;
            BitString::concat([&m.cid.to_bits(), &m.c.to_bits(), &m.t1.to_bits()])
        }
        ProtocolMessage::GatewayToMobile(m) => {
            expect_blocks("V", &m.vi, 2)?;
            BitString::concat([&m.vi.to_bits(), &m.t3.to_bits()])
        }
        ProtocolMessage::MobileToSensor(m) => {
            expect_blocks("V'", &m.vi_prime, 2)?;
            BitString::concat([&m.vi_prime.to_bits(), &m.t5.to_bits()])
        }
        ProtocolMessage::SensorToExpert(m) => {
            expect_blocks("L", &m.l, 1)?;
            BitString::concat([&m.l.to_bits(), &m.t7.to_bits()])
        }
    };
    debug_assert_eq!(bits.len(), msg.kind().wire_size_bits());
    Ok(WireBits(bits))
}

pub fn decode(kind: MessageKind, wire: &WireBits) -> Result<ProtocolMessage, SchemaError> {
    let expected = kind.wire_size_bits();
    if wire.len() != expected {
        return Err(SchemaError::WrongLength { kind, expected, got: wire.len() });
    }
    let mut r = BitReader::new(&wire.0);
    let mut cipher = |blocks: usize| {
        let bits = r.take(blocks * BLOCK_BITS).expect("length checked");
        CipherText::from_bits(&bits).expect("whole blocks")
    };
    let msg = match kind {
        MessageKind::AuthRequest => {
            let cid = cipher(4);
            let c = CredentialC::from_cipher(&cipher(1))?;
            AuthRequest { cid, c, t1: Timestamp32(0) }.into()
        }
        MessageKind::GatewayToMobile => GatewayToMobile { vi: cipher(2), t3: Timestamp32(0) }.into(),
        MessageKind::MobileToSensor => MobileToSensor { vi_prime: cipher(2), t5: Timestamp32(0) }.into(),
        MessageKind::SensorToExpert => SensorToExpert { l: cipher(1), t7: Timestamp32(0) }.into(),
    };
    let ts = Timestamp32(wire.0.read_uint(kind.timestamp_range()) as u32);
    Ok(with_timestamp(msg, ts))
}

fn with_timestamp(msg: ProtocolMessage, ts: Timestamp32) -> ProtocolMessage {
    match msg {
        ProtocolMessage::AuthRequest(m) => AuthRequest { t1: ts, ..m }.into(),
        ProtocolMessage::GatewayToMobile(m) => GatewayToMobile { t3: ts, ..m }.into(),
        ProtocolMessage::MobileToSensor(m) => MobileToSensor { t5: ts, ..m }.into(),
        ProtocolMessage::SensorToExpert(m) => SensorToExpert { t7: ts, ..m }.into(),
    }
}

/// Replaces the cleartext companion timestamp of an encoded message.
pub fn rewrite_timestamp(kind: MessageKind, wire: &WireBits, ts: Timestamp32) -> WireBits {
    let range = kind.timestamp_range();
    let mut bits = wire.0.slice(0..range.start);
    bits.append(&ts.to_bits());
    WireBits(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ct(blocks: usize, fill: u8) -> CipherText {
        CipherText::from_blocks(vec![[fill; 16]; blocks]).unwrap()
    }

    fn sample(kind: MessageKind) -> ProtocolMessage {
        match kind {
            MessageKind::AuthRequest => {
                AuthRequest { cid: ct(4, 1), c: CredentialC([2; 16]), t1: Timestamp32(3) }.into()
            }
            MessageKind::GatewayToMobile => GatewayToMobile { vi: ct(2, 4), t3: Timestamp32(5) }.into(),
            MessageKind::MobileToSensor => MobileToSensor { vi_prime: ct(2, 6), t5: Timestamp32(7) }.into(),
            MessageKind::SensorToExpert => SensorToExpert { l: ct(1, 8), t7: Timestamp32(9) }.into(),
        }
    }

    #[test]
    fn sizes_are_fixed() {
        assert_eq!(wire_size_bits(MessageKind::AuthRequest), 672);
        assert_eq!(wire_size_bits(MessageKind::GatewayToMobile), 288);
        assert_eq!(wire_size_bits(MessageKind::MobileToSensor), 288);
        assert_eq!(wire_size_bits(MessageKind::SensorToExpert), 160);
        let total: usize = MessageKind::ALL.iter().map(|k| k.wire_size_bits()).sum();
        assert_eq!(total, HANDSHAKE_TOTAL_BITS);
        assert_eq!(HANDSHAKE_TOTAL_BITS, 1408);
    }

    #[test]
    fn encoded_lengths_and_round_trip() {
        for kind in MessageKind::ALL {
            let msg = sample(kind);
            let wire = encode(&msg).unwrap();
            assert_eq!(wire.len(), kind.wire_size_bits(), "{kind}");
            assert_eq!(decode(kind, &wire).unwrap(), msg);
        }
    }

    #[test]
    fn off_by_one_length_is_rejected() {
        let wire = encode(&sample(MessageKind::AuthRequest)).unwrap();
        let short = WireBits::from_bits(wire.bits().slice(0..671));
        assert_eq!(
            decode(MessageKind::AuthRequest, &short),
            Err(SchemaError::WrongLength { kind: MessageKind::AuthRequest, expected: 672, got: 671 })
        );
    }

    #[test]
    fn wrong_block_count_is_schema_error() {
        let bad = ProtocolMessage::SensorToExpert(SensorToExpert { l: ct(2, 0), t7: Timestamp32(0) });
        assert!(matches!(encode(&bad), Err(SchemaError::WrongBlockCount { field: "L", .. })));
    }

    #[test]
    fn companion_timestamp_sits_at_the_tail() {
        let wire = encode(&sample(MessageKind::SensorToExpert)).unwrap();
        assert_eq!(wire.bits().read_uint(128..160), 9);
        let moved = rewrite_timestamp(MessageKind::SensorToExpert, &wire, Timestamp32(77));
        match decode(MessageKind::SensorToExpert, &moved).unwrap() {
            ProtocolMessage::SensorToExpert(m) => assert_eq!(m.t7, Timestamp32(77)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kind_names_parse() {
        for kind in MessageKind::ALL {
            assert_eq!(kind.as_str().parse::<MessageKind>().unwrap(), kind);
        }
        assert!("nope".parse::<MessageKind>().is_err());
    }

    fn blocks(n: usize) -> impl Strategy<Value = CipherText> {
        prop::collection::vec(any::<[u8; 16]>(), n).prop_map(|b| CipherText::from_blocks(b).unwrap())
    }

    fn any_message() -> impl Strategy<Value = ProtocolMessage> {
        prop_oneof![
            (blocks(4), any::<[u8; 16]>(), any::<u32>()).prop_map(|(cid, c, t)| {
                AuthRequest { cid, c: CredentialC(c), t1: Timestamp32(t) }.into()
            }),
            (blocks(2), any::<u32>()).prop_map(|(vi, t)| GatewayToMobile { vi, t3: Timestamp32(t) }.into()),
            (blocks(2), any::<u32>())
                .prop_map(|(vi_prime, t)| MobileToSensor { vi_prime, t5: Timestamp32(t) }.into()),
            (blocks(1), any::<u32>()).prop_map(|(l, t)| SensorToExpert { l, t7: Timestamp32(t) }.into()),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_under_fuzzing(msg in any_message()) {
            let wire = encode(&msg).unwrap();
            prop_assert_eq!(wire.len(), msg.kind().wire_size_bits());
            prop_assert_eq!(decode(msg.kind(), &wire).unwrap(), msg);
        }
    }
}
