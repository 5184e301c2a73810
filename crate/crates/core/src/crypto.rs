//! Primitive layer: SHA-256 hashing, AES-GCM authenticated encryption,
//! HMAC-SHA256 tags and a deterministic public-key scheme for keywords.
//!
//! Every function is pure given its inputs. Randomness is always supplied by
//! the caller so that simulations can run from a seeded CSPRNG.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes128Gcm, Aes256Gcm, Nonce};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{Error, Result};

pub const DIGEST_LEN: usize = 32;
pub const MAC_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

/// Fixed-width SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    /// Low-order 64 bits, read big-endian.
    pub fn low_u64(&self) -> u64 {
        let mut tail = [0u8; 8];
        tail.copy_from_slice(&self.0[DIGEST_LEN - 8..]);
        u64::from_be_bytes(tail)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Key-length profile of the two deployments: 128-bit keys for the
/// keyword-at-owner framework, 256-bit keys for the ciphertext-retrieval one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    FrameworkI,
    FrameworkII,
}

impl Profile {
    pub const fn key_len(self) -> usize {
        match self {
            Profile::FrameworkI => 16,
            Profile::FrameworkII => 32,
        }
    }

    pub const fn key_bits(self) -> u64 {
        self.key_len() as u64 * 8
    }

    pub const fn tag(self) -> u8 {
        match self {
            Profile::FrameworkI => 1,
            Profile::FrameworkII => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Profile::FrameworkI),
            2 => Some(Profile::FrameworkII),
            _ => None,
        }
    }

    /// Whether files carry Bloom filters and queries travel to the provider.
    pub const fn ciphertext_retrieval(self) -> bool {
        matches!(self, Profile::FrameworkII)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::FrameworkI => "I",
            Profile::FrameworkII => "II",
        })
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Profile::FrameworkI),
            "II" | "ii" | "2" => Ok(Profile::FrameworkII),
            other => Err(format!("unknown framework {other:?}, expected I or II")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyRole {
    Root,
    Derived,
    /// Randomly drawn replacement key held in the update tree.
    Fresh,
    Pairwise,
}

/// Symmetric key. Equality compares key material only.
#[derive(Clone)]
pub struct SymKey {
    bytes: Vec<u8>,
    role: KeyRole,
}

impl SymKey {
    pub fn from_bytes(bytes: Vec<u8>, role: KeyRole) -> Result<Self> {
        match bytes.len() {
            16 | 32 => Ok(SymKey { bytes, role }),
            n => Err(Error::KeyLength { expected: 16, actual: n }),
        }
    }

    pub fn random<R: RngCore + CryptoRng>(profile: Profile, role: KeyRole, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; profile.key_len()];
        rng.fill_bytes(&mut bytes);
        SymKey { bytes, role }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn role(&self) -> KeyRole {
        self.role
    }

    pub fn with_role(mut self, role: KeyRole) -> Self {
        self.role = role;
        self
    }

    pub fn check_profile(&self, profile: Profile) -> Result<()> {
        if self.bytes.len() == profile.key_len() {
            Ok(())
        } else {
            Err(Error::KeyLength { expected: profile.key_len(), actual: self.bytes.len() })
        }
    }
}

impl PartialEq for SymKey {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for SymKey {}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey({:?}, {} bytes)", self.role, self.bytes.len())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct MacTag(pub [u8; MAC_LEN]);

impl fmt::Debug for MacTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacTag({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct KeywordPublicKey(pub [u8; 32]);

#[derive(Clone, PartialEq, Eq)]
pub struct KeywordPrivateKey([u8; 32]);

impl KeywordPrivateKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for KeywordPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeywordPublicKey({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

impl fmt::Debug for KeywordPrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("KeywordPrivateKey(..)")
    }
}

/// Key pair for keyword encryption.
#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: KeywordPublicKey,
    pub private: KeywordPrivateKey,
}

pub fn hash_bytes(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Member `index` of the hash family: `hash(be32(index) || data)`.
pub fn indexed_hash(index: u32, data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update(index.to_be_bytes());
    h.update(data);
    Digest(h.finalize().into())
}

pub(crate) fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// AES-GCM under a 128- or 256-bit key. Output is `nonce || ciphertext || tag`.
pub fn sym_encrypt<R: RngCore + CryptoRng>(key: &SymKey, plaintext: &[u8], associated: &[u8], rng: &mut R) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let payload = Payload { msg: plaintext, aad: associated };
    let body = match key.len() {
        16 => {
            Aes128Gcm::new_from_slice(key.as_bytes()).expect("16-byte key").encrypt(Nonce::from_slice(&nonce), payload)
        }
        _ => {
            Aes256Gcm::new_from_slice(key.as_bytes()).expect("32-byte key").encrypt(Nonce::from_slice(&nonce), payload)
        }
    }
    .expect("AES-GCM encryption does not fail for in-memory buffers");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out
}

pub fn sym_decrypt(key: &SymKey, ciphertext: &[u8], associated: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < NONCE_LEN + TAG_LEN {
        return Err(Error::IntegrityFailure);
    }
    let (nonce, body) = ciphertext.split_at(NONCE_LEN);
    let payload = Payload { msg: body, aad: associated };
    let res = match key.len() {
        16 => Aes128Gcm::new_from_slice(key.as_bytes())
            .map_err(|_| Error::IntegrityFailure)?
            .decrypt(Nonce::from_slice(nonce), payload),
        32 => Aes256Gcm::new_from_slice(key.as_bytes())
            .map_err(|_| Error::IntegrityFailure)?
            .decrypt(Nonce::from_slice(nonce), payload),
        _ => return Err(Error::IntegrityFailure),
    };
    res.map_err(|_| Error::IntegrityFailure)
}

/// Length of a keyword ciphertext for a plaintext of `len` octets.
pub const fn det_ciphertext_len(len: usize) -> usize {
    32 + len + TAG_LEN
}

const DPKE_COINS: &[u8] = b"treevault/dpke/coins";
const DPKE_KEY: &[u8] = b"treevault/dpke/key";

fn dpke_seal_key(shared: &[u8; 32], ephemeral: &[u8; 32], public: &[u8; 32]) -> Aes256Gcm {
    let k = hash_parts(&[DPKE_KEY, shared, ephemeral, public]);
    Aes256Gcm::new_from_slice(&k.0).expect("32-byte key")
}

/// Deterministic keyword encryption (encrypt-with-hash over X25519).
///
/// The ephemeral scalar is `hash(public || keyword)`, so equal inputs give
/// equal ciphertexts. The per-message AEAD key is unique per keyword, which
/// makes the all-zero nonce safe.
pub fn det_pub_encrypt(public: &KeywordPublicKey, keyword: &[u8]) -> Vec<u8> {
    let coins = hash_parts(&[DPKE_COINS, &public.0, keyword]);
    let ephemeral = StaticSecret::from(coins.0);
    let eph_pub = PublicKey::from(&ephemeral);
    let shared = ephemeral.diffie_hellman(&PublicKey::from(public.0));
    let aead = dpke_seal_key(shared.as_bytes(), eph_pub.as_bytes(), &public.0);
    let body = aead
        .encrypt(Nonce::from_slice(&[0u8; NONCE_LEN]), keyword)
        .expect("AES-GCM encryption does not fail for in-memory buffers");
    let mut out = Vec::with_capacity(32 + body.len());
    out.extend_from_slice(eph_pub.as_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn det_pub_decrypt(keys: &KeyPair, ciphertext: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < 32 + TAG_LEN {
        return Err(Error::IntegrityFailure);
    }
    let mut eph = [0u8; 32];
    eph.copy_from_slice(&ciphertext[..32]);
    let secret = StaticSecret::from(keys.private.0);
    let shared = secret.diffie_hellman(&PublicKey::from(eph));
    let aead = dpke_seal_key(shared.as_bytes(), &eph, &keys.public.0);
    let keyword =
        aead.decrypt(Nonce::from_slice(&[0u8; NONCE_LEN]), &ciphertext[32..]).map_err(|_| Error::IntegrityFailure)?;
    // Only the canonical (re-derivable) ciphertext is accepted.
    if det_pub_encrypt(&keys.public, &keyword) != ciphertext {
        return Err(Error::IntegrityFailure);
    }
    Ok(keyword)
}

type HmacSha256 = Hmac<Sha256>;

pub fn mac_compute(key: &SymKey, message: &[u8]) -> MacTag {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key.as_bytes()).expect("HMAC takes any key length");
    mac.update(message);
    MacTag(mac.finalize().into_bytes().into())
}

pub fn mac_verify(key: &SymKey, message: &[u8], tag: &MacTag) -> bool {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key.as_bytes()).expect("HMAC takes any key length");
    mac.update(message);
    mac.verify_slice(&tag.0).is_ok()
}

pub fn gen_root_key<R: RngCore + CryptoRng>(profile: Profile, rng: &mut R) -> SymKey {
    SymKey::random(profile, KeyRole::Root, rng)
}

pub fn gen_keypair<R: RngCore + CryptoRng>(rng: &mut R) -> KeyPair {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let secret = StaticSecret::from(seed);
    KeyPair {
        public: KeywordPublicKey(PublicKey::from(&secret).to_bytes()),
        private: KeywordPrivateKey(secret.to_bytes()),
    }
}
