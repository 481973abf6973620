//! Plaintext layouts sealed inside each ciphertext, in concatenation order.

use crate::crypto::{BitReader, BitString, Digest160, Timestamp32};
use crate::ids::{Identity, Nonce64};

use super::{CredentialC, InnerX, SchemaError};

/// A fixed-layout plaintext. Parsing reads the leading `WIDTH` bits and
/// ignores block padding after them.
pub trait Plaintext: Sized {
    const NAME: &'static str;
    const WIDTH: usize;

    fn to_bits(&self) -> BitString;

    fn read(r: &mut BitReader<'_>) -> Option<Self>;

    fn from_padded(bits: &BitString) -> Result<Self, SchemaError> {
        if bits.len() < Self::WIDTH {
            return Err(SchemaError::Truncated { schema: Self::NAME, needed: Self::WIDTH, got: bits.len() });
        }
        let mut r = BitReader::new(bits);
        Self::read(&mut r).ok_or(SchemaError::Truncated { schema: Self::NAME, needed: Self::WIDTH, got: bits.len() })
    }
}

fn id(r: &mut BitReader<'_>) -> Option<Identity> {
    r.take_uint(Identity::WIDTH).map(|v| Identity(v as u32))
}

fn ts(r: &mut BitReader<'_>) -> Option<Timestamp32> {
    r.take_uint(Timestamp32::WIDTH).map(|v| Timestamp32(v as u32))
}

fn nonce(r: &mut BitReader<'_>) -> Option<Nonce64> {
    r.take_uint(Nonce64::WIDTH).map(Nonce64)
}

/// Contents of `C`: `M_id || ID_gw`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CredentialPlain {
    pub m_id: Identity,
    pub id_gw: Identity,
}

impl Plaintext for CredentialPlain {
    const NAME: &'static str = "C";
    const WIDTH: usize = 64;

    fn to_bits(&self) -> BitString {
        BitString::concat([&self.m_id.to_bits(), &self.id_gw.to_bits()])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { m_id: id(r)?, id_gw: id(r)? })
    }
}

/// Contents of `CID_i`: `H(M_id) || M || U_i || SN_j || C || T_1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CidPlain {
    pub h_mid: Digest160,
    pub nonce: Nonce64,
    pub u_i: Identity,
    pub sn_j: Identity,
    pub c: CredentialC,
    pub t1: Timestamp32,
}

impl Plaintext for CidPlain {
    const NAME: &'static str = "CID";
    const WIDTH: usize = 448;

    fn to_bits(&self) -> BitString {
        BitString::concat([
            &self.h_mid.to_bits(),
            &self.nonce.to_bits(),
            &self.u_i.to_bits(),
            &self.sn_j.to_bits(),
            &self.c.to_bits(),
            &self.t1.to_bits(),
        ])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self {
            h_mid: Digest160(r.take_bytes()?),
            nonce: nonce(r)?,
            u_i: id(r)?,
            sn_j: id(r)?,
            c: CredentialC(r.take_bytes()?),
            t1: ts(r)?,
        })
    }
}

/// Contents of `X`: `M_id || M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InnerXPlain {
    pub m_id: Identity,
    pub nonce: Nonce64,
}

impl Plaintext for InnerXPlain {
    const NAME: &'static str = "X";
    const WIDTH: usize = 96;

    fn to_bits(&self) -> BitString {
        BitString::concat([&self.m_id.to_bits(), &self.nonce.to_bits()])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { m_id: id(r)?, nonce: nonce(r)? })
    }
}

/// Contents of `V_i`: `U_i || SN_j || X || T_3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViPlain {
    pub u_i: Identity,
    pub sn_j: Identity,
    pub x: InnerX,
    pub t3: Timestamp32,
}

impl Plaintext for ViPlain {
    const NAME: &'static str = "V";
    const WIDTH: usize = 224;

    fn to_bits(&self) -> BitString {
        BitString::concat([&self.u_i.to_bits(), &self.sn_j.to_bits(), &self.x.to_bits(), &self.t3.to_bits()])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { u_i: id(r)?, sn_j: id(r)?, x: InnerX(r.take_bytes()?), t3: ts(r)? })
    }
}

/// Contents of `V'_i`: `X || U_i || SN_j || T_5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ViPrimePlain {
    pub x: InnerX,
    pub u_i: Identity,
    pub sn_j: Identity,
    pub t5: Timestamp32,
}

impl Plaintext for ViPrimePlain {
    const NAME: &'static str = "V'";
    const WIDTH: usize = 224;

    fn to_bits(&self) -> BitString {
        BitString::concat([&self.x.to_bits(), &self.u_i.to_bits(), &self.sn_j.to_bits(), &self.t5.to_bits()])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { x: InnerX(r.take_bytes()?), u_i: id(r)?, sn_j: id(r)?, t5: ts(r)? })
    }
}

/// Contents of `L`: `SN_j || M_id || T_7`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LPlain {
    pub sn_j: Identity,
    pub m_id: Identity,
    pub t7: Timestamp32,
}

impl Plaintext for LPlain {
    const NAME: &'static str = "L";
    const WIDTH: usize = 96;

    fn to_bits(&self) -> BitString {
        BitString::concat([&self.sn_j.to_bits(), &self.m_id.to_bits(), &self.t7.to_bits()])
    }

    fn read(r: &mut BitReader<'_>) -> Option<Self> {
        Some(Self { sn_j: id(r)?, m_id: id(r)?, t7: ts(r)? })
    }
}
