use rand::Rng;

use crate::codec::{AuthRequest, CidPlain, CredentialC, LPlain, Plaintext, SensorToExpert};
use crate::crypto::{
    check_freshness, hash160, xor_norm, BitString, Digest160, FreshnessWindow, Key128, Salt160, Timestamp32,
};
use crate::ids::{Identity, Nonce64, Password};
use crate::metrics::Meter;

use super::gateway::{ExpertCredentials, ExpertKeys, Gateway};
use super::{fresh, ProtocolError, Result, SessionKey};

/// `EPW = H(H(PW) xor r_d)`.
pub(crate) fn extended_password(pw: &Password, salt: &Salt160) -> Digest160 {
    hash160(&xor_norm(&pw.digest().to_bits(), &salt.to_bits()))
}

/// The in-flight handshake: what the expert needs to derive `K_ssk` and
/// check `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingHandshake {
    pub nonce: Nonce64,
    pub u_i: Identity,
    pub sn_j: Identity,
    pub t1: Timestamp32,
}

/// The medical expert's authorized device.
#[derive(Clone, Debug)]
pub struct ExpertDevice {
    m_id: Identity,
    n_i: Digest160,
    r_d: Salt160,
    keys: ExpertKeys,
    c: CredentialC,
    window: FreshnessWindow,
    logged_in: bool,
    pending: Option<PendingHandshake>,
    pub meter: Meter,
}

impl ExpertDevice {
    /// Device side of expert registration: draws `r_d`, sends
    /// `<M_id, EPW>` to the gateway and stores the returned bundle.
    pub fn enroll<R: Rng + ?Sized>(
        gw: &mut Gateway,
        m_id: Identity,
        pw: &Password,
        rng: &mut R,
    ) -> Result<Self> {
        let salt = Digest160(rng.gen());
        let creds = gw.register_expert(m_id, &extended_password(pw, &salt), rng)?;
        Ok(Self::provision(m_id, salt, creds, gw.window()))
    }

    /// Registration with caller-chosen salt and keys.
    pub fn enroll_with(
        gw: &mut Gateway,
        m_id: Identity,
        pw: &Password,
        salt: Salt160,
        keys: ExpertKeys,
    ) -> Result<Self> {
        let creds = gw.register_expert_with_keys(m_id, &extended_password(pw, &salt), keys)?;
        Ok(Self::provision(m_id, salt, creds, gw.window()))
    }

    pub fn provision(m_id: Identity, r_d: Salt160, creds: ExpertCredentials, window: FreshnessWindow) -> Self {
        Self {
            m_id,
            n_i: creds.n_i,
            r_d,
            keys: creds.keys,
            c: creds.c,
            window,
            logged_in: false,
            pending: None,
            meter: Meter::enabled(),
        }
    }

    pub fn m_id(&self) -> Identity {
        self.m_id
    }

    pub fn credential(&self) -> CredentialC {
        self.c
    }

    pub fn n_i(&self) -> Digest160 {
        self.n_i
    }

    pub fn salt(&self) -> Salt160 {
        self.r_d
    }

    pub fn keys(&self) -> &ExpertKeys {
        &self.keys
    }

    pub fn pending(&self) -> Option<&PendingHandshake> {
        self.pending.as_ref()
    }

    pub fn is_logged_in(&self) -> bool {
        self.logged_in
    }

    pub fn set_window(&mut self, window: FreshnessWindow) {
        self.window = window;
    }

    fn login_verifier(meter: &mut Meter, m_id: Identity, pw: &Password, salt: &Salt160, s_key: &Key128) -> Digest160 {
        let salted = meter.xor(&pw.digest().to_bits(), &salt.to_bits());
        let epw = meter.hash(&salted);
        let with_id = meter.xor(&m_id.to_bits(), &epw.to_bits());
        let with_key = meter.xor(&with_id, &s_key.to_bits());
        meter.hash(&with_key)
    }

    pub(crate) fn check_password(&self, m_id: Identity, pw: &Password) -> bool {
        let mut scratch = Meter::disabled();
        Self::login_verifier(&mut scratch, m_id, pw, &self.r_d, &self.keys.s_key) == self.n_i
    }

    pub(crate) fn replace_password_state(&mut self, n_i: Digest160, r_d: Salt160) {
        self.n_i = n_i;
        self.r_d = r_d;
    }

    /// Step 1 login check: `N*_i = H(M_id xor H(PW xor r_d) xor S_key)`.
    pub fn login(&mut self, m_id: Identity, pw: &Password) -> Result<()> {
        let n_star = Self::login_verifier(&mut self.meter, m_id, pw, &self.r_d, &self.keys.s_key);
        if n_star != self.n_i {
            return Err(ProtocolError::LoginRejected);
        }
        self.logged_in = true;
        Ok(())
    }

    pub fn logout(&mut self) {
        self.logged_in = false;
    }

    /// Step 1: draws the nonce `M` and seals `CID_i` under `K_l`.
    ///
    /// Only one handshake may be pending per device.
    pub fn start_auth<R: Rng + ?Sized>(
        &mut self,
        u_i: Identity,
        sn_j: Identity,
        now: Timestamp32,
        rng: &mut R,
    ) -> Result<AuthRequest> {
        if !self.logged_in {
            return Err(ProtocolError::NotAuthenticated);
        }
        if self.pending.is_some() {
            return Err(ProtocolError::ProtocolViolation("a handshake is already pending"));
        }
        let nonce = Nonce64(rng.gen());
        let plain = CidPlain {
            h_mid: self.meter.hash(&self.m_id.to_bits()),
            nonce,
            u_i,
            sn_j,
            c: self.c,
            t1: now,
        };
        let cid = self.meter.encrypt(&self.keys.k_l, &plain.to_bits())?;
        self.pending = Some(PendingHandshake { nonce, u_i, sn_j, t1: now });
        Ok(AuthRequest::assemble(&plain, cid))
    }

    /// Drops the pending handshake without completing it.
    pub fn abandon(&mut self) -> Option<PendingHandshake> {
        self.pending.take()
    }

    /// Step 5: derives `K_ssk` from the pending state and confirms it by
    /// opening `L`.
    ///
    /// Identities are compared before timestamps, so an `L` sealed under a
    /// different session key surfaces as an identity mismatch.
    pub fn finish(&mut self, msg: &SensorToExpert, now: Timestamp32) -> Result<SessionKey> {
        let pending = self.pending.ok_or(ProtocolError::ProtocolViolation("no handshake is pending"))?;
        let key = session_key(&mut self.meter, self.m_id, pending.sn_j, pending.nonce);
        let plain = LPlain::from_padded(&self.meter.decrypt(&key.cipher_key, &msg.l))?;
        if plain.sn_j != pending.sn_j || plain.m_id != self.m_id {
            return Err(ProtocolError::IdentityMismatch);
        }
        fresh(check_freshness(msg.t7, plain.t7, now, self.window))?;
        self.pending = None;
        Ok(key)
    }
}

/// `K_ssk = H(M_id xor SN_j xor M)`.
pub(crate) fn session_key(meter: &mut Meter, m_id: Identity, sn_j: Identity, nonce: Nonce64) -> SessionKey {
    let ids: BitString = meter.xor(&m_id.to_bits(), &sn_j.to_bits());
    let mixed = meter.xor(&ids, &nonce.to_bits());
    SessionKey::from_digest(meter.hash(&mixed))
}
