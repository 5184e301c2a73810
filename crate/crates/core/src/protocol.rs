//! Wire messages exchanged between owner, provider and users.
//!
//! An envelope on the wire is
//!
//! ```text
//! version(1) profile(1) kind(1) sender(1+4) receiver(1+4)
//! len(4) clear | len(4) body | mac(32)
//! ```
//!
//! `clear` holds fields the receiving provider must read as-is (certificates,
//! encrypted query keywords, returned ciphertexts). `body` is the remaining
//! payload sealed with AES-GCM under the sender/receiver pairwise key, with
//! the header and `clear` as associated data. `mac` is HMAC-SHA256 over
//! everything before it, keyed by a subkey of the pairwise key, and is
//! checked before anything is decrypted or decoded.

use std::fmt;

use rand::{CryptoRng, RngCore};

use crate::bloom::BloomFilter;
use crate::codec::{Reader, Writer};
use crate::crypto::{
    hash_parts, mac_compute, mac_verify, sym_decrypt, sym_encrypt, KeyRole, MacTag, Profile, SymKey, MAC_LEN,
};
use crate::error::{Error, Result};
use crate::key_tree::{KeyGroup, NumberPath};

pub const WIRE_VERSION: u8 = 1;

const CERT_AAD: &[u8] = b"treevault/cert/v1";
const MAC_SUBKEY: &[u8] = b"treevault/mac";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Owner,
    Provider,
    User,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::Owner => 1,
            Role::Provider => 2,
            Role::User => 3,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            1 => Ok(Role::Owner),
            2 => Ok(Role::Provider),
            3 => Ok(Role::User),
            _ => Err(Error::Malformed("principal role")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Principal {
    pub role: Role,
    pub id: u32,
}

impl Principal {
    pub const fn owner(id: u32) -> Self {
        Principal { role: Role::Owner, id }
    }

    pub const fn provider(id: u32) -> Self {
        Principal { role: Role::Provider, id }
    }

    pub const fn user(id: u32) -> Self {
        Principal { role: Role::User, id }
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = match self.role {
            Role::Owner => "A",
            Role::Provider => "C",
            Role::User => "U",
        };
        write!(f, "{r}{}", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    StoreFiles,
    RequestAuth,
    GrantAuth,
    FetchByNumbers,
    FetchByKeyword,
    ReturnFiles,
    AccessRightUpdate,
    DeleteFile,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::StoreFiles,
        MessageKind::RequestAuth,
        MessageKind::GrantAuth,
        MessageKind::FetchByNumbers,
        MessageKind::FetchByKeyword,
        MessageKind::ReturnFiles,
        MessageKind::AccessRightUpdate,
        MessageKind::DeleteFile,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MessageKind::StoreFiles => 1,
            MessageKind::RequestAuth => 2,
            MessageKind::GrantAuth => 3,
            MessageKind::FetchByNumbers => 4,
            MessageKind::FetchByKeyword => 5,
            MessageKind::ReturnFiles => 6,
            MessageKind::AccessRightUpdate => 7,
            MessageKind::DeleteFile => 8,
        }
    }

    pub fn from_tag(t: u8) -> Result<Self> {
        MessageKind::ALL.into_iter().find(|k| k.tag() == t).ok_or(Error::UnknownKind(t))
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::StoreFiles => "StoreFiles",
            MessageKind::RequestAuth => "RequestAuth",
            MessageKind::GrantAuth => "GrantAuth",
            MessageKind::FetchByNumbers => "FetchByNumbers",
            MessageKind::FetchByKeyword => "FetchByKeyword",
            MessageKind::ReturnFiles => "ReturnFiles",
            MessageKind::AccessRightUpdate => "AccessRightUpdate",
            MessageKind::DeleteFile => "DeleteFile",
        }
    }

    /// Kinds whose payload travels in the clear portion.
    fn payload_in_clear(self) -> bool {
        matches!(self, MessageKind::FetchByNumbers | MessageKind::FetchByKeyword | MessageKind::ReturnFiles)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One stored or returned file: its number, encrypted name and content, and
/// (ciphertext-retrieval profile, upload only) its Bloom filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobRecord {
    pub path: NumberPath,
    pub encrypted_name: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub bloom: Option<BloomFilter>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefusalReason {
    CertificateExpired,
    InconsistentState,
    ScopeViolation,
    BadCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServeStatus {
    Served,
    StaleKeyNotice,
    Refused(RefusalReason),
}

impl ServeStatus {
    fn tag(self) -> u8 {
        match self {
            ServeStatus::Served => 0,
            ServeStatus::StaleKeyNotice => 1,
            ServeStatus::Refused(RefusalReason::CertificateExpired) => 2,
            ServeStatus::Refused(RefusalReason::InconsistentState) => 3,
            ServeStatus::Refused(RefusalReason::ScopeViolation) => 4,
            ServeStatus::Refused(RefusalReason::BadCertificate) => 5,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        Ok(match t {
            0 => ServeStatus::Served,
            1 => ServeStatus::StaleKeyNotice,
            2 => ServeStatus::Refused(RefusalReason::CertificateExpired),
            3 => ServeStatus::Refused(RefusalReason::InconsistentState),
            4 => ServeStatus::Refused(RefusalReason::ScopeViolation),
            5 => ServeStatus::Refused(RefusalReason::BadCertificate),
            _ => return Err(Error::Malformed("serve status")),
        })
    }
}

/// Owner-issued token binding a user to a retrieval scope. Opaque to users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    sealed: Vec<u8>,
}

impl Certificate {
    pub fn from_sealed(sealed: Vec<u8>) -> Self {
        Certificate { sealed }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.sealed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateFields {
    pub user: u32,
    pub number_min: Vec<NumberPath>,
    pub t_cert: u64,
    pub ar: u32,
}

impl CertificateFields {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.user).paths(&self.number_min).u64(self.t_cert).u32(self.ar);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let f = CertificateFields {
            user: r.u32("certificate user")?,
            number_min: r.paths()?,
            t_cert: r.u64("certificate time")?,
            ar: r.u32("certificate AR")?,
        };
        r.finish("certificate trailing bytes")?;
        Ok(f)
    }

    /// Whether `path` lies under some number in the scope.
    pub fn in_scope(&self, path: &NumberPath) -> bool {
        self.number_min.iter().any(|n| n.covers(path))
    }
}

fn mac_subkey(key: &SymKey) -> SymKey {
    let d = hash_parts(&[MAC_SUBKEY, key.as_bytes()]);
    SymKey::from_bytes(d.0[..key.len()].to_vec(), KeyRole::Pairwise).expect("profile-length key")
}

/// Seals `fields` (plus a MAC over them) under the owner/provider key.
pub fn make_certificate<R: RngCore + CryptoRng>(
    owner_provider_key: &SymKey,
    fields: &CertificateFields,
    rng: &mut R,
) -> Certificate {
    let mut plain = fields.encode();
    let tag = mac_compute(&mac_subkey(owner_provider_key), &plain);
    plain.extend_from_slice(&tag.0);
    Certificate { sealed: sym_encrypt(owner_provider_key, &plain, CERT_AAD, rng) }
}

pub fn open_certificate(owner_provider_key: &SymKey, cert: &Certificate) -> Result<CertificateFields> {
    let plain = sym_decrypt(owner_provider_key, &cert.sealed, CERT_AAD)?;
    if plain.len() < MAC_LEN {
        return Err(Error::IntegrityFailure);
    }
    let (fields, tag) = plain.split_at(plain.len() - MAC_LEN);
    let tag = MacTag(tag.try_into().expect("MAC_LEN octets"));
    if !mac_verify(&mac_subkey(owner_provider_key), fields, &tag) {
        return Err(Error::IntegrityFailure);
    }
    CertificateFields::decode(fields)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    StoreFiles {
        t_modified: u64,
        blobs: Vec<BlobRecord>,
    },
    /// Framework I carries the keyword to the owner; framework II never does.
    RequestAuth {
        request_id: u64,
        keyword: Option<String>,
    },
    GrantAuth {
        request_id: u64,
        key_min: KeyGroup,
        cert: Certificate,
    },
    FetchByNumbers {
        request_id: u64,
        owner: u32,
        requested: Vec<NumberPath>,
        cert: Certificate,
    },
    FetchByKeyword {
        request_id: u64,
        owner: u32,
        keyword: Vec<u8>,
        cert: Certificate,
    },
    ReturnFiles {
        request_id: u64,
        status: ServeStatus,
        blobs: Vec<BlobRecord>,
    },
    AccessRightUpdate {
        user: u32,
    },
    DeleteFile {
        path: NumberPath,
    },
}

fn write_blob(w: &mut Writer, b: &BlobRecord) {
    w.path(&b.path).bytes(&b.encrypted_name).bytes(&b.ciphertext);
    match &b.bloom {
        None => {
            w.u8(0);
        }
        Some(bf) => {
            w.u8(1).bytes(&bf.to_bytes());
        }
    }
}

fn read_blob(r: &mut Reader<'_>) -> Result<BlobRecord> {
    let path = r.path()?;
    let encrypted_name = r.bytes("blob name")?.to_vec();
    let ciphertext = r.bytes("blob ciphertext")?.to_vec();
    let bloom = match r.u8("blob filter flag")? {
        0 => None,
        1 => Some(BloomFilter::from_bytes(r.bytes("blob filter")?)?),
        _ => return Err(Error::Malformed("blob filter flag")),
    };
    Ok(BlobRecord { path, encrypted_name, ciphertext, bloom })
}

fn write_blobs(w: &mut Writer, blobs: &[BlobRecord]) {
    w.count(blobs.len());
    for b in blobs {
        write_blob(w, b);
    }
}

fn read_blobs(r: &mut Reader<'_>) -> Result<Vec<BlobRecord>> {
    let n = r.count(17, "blob list")?;
    (0..n).map(|_| read_blob(r)).collect()
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::StoreFiles { .. } => MessageKind::StoreFiles,
            Message::RequestAuth { .. } => MessageKind::RequestAuth,
            Message::GrantAuth { .. } => MessageKind::GrantAuth,
            Message::FetchByNumbers { .. } => MessageKind::FetchByNumbers,
            Message::FetchByKeyword { .. } => MessageKind::FetchByKeyword,
            Message::ReturnFiles { .. } => MessageKind::ReturnFiles,
            Message::AccessRightUpdate { .. } => MessageKind::AccessRightUpdate,
            Message::DeleteFile { .. } => MessageKind::DeleteFile,
        }
    }

    /// Canonical payload encoding (kind tag excluded).
    pub fn encode_payload(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Message::StoreFiles { t_modified, blobs } => {
                w.u64(*t_modified);
                write_blobs(&mut w, blobs);
            }
            Message::RequestAuth { request_id, keyword } => {
                w.u64(*request_id);
                match keyword {
                    None => w.u8(0),
                    Some(k) => w.u8(1).str(k),
                };
            }
            Message::GrantAuth { request_id, key_min, cert } => {
                w.u64(*request_id).paths(&key_min.paths()).count(key_min.len());
                for (_, k) in key_min.pairs() {
                    w.bytes(k.as_bytes());
                }
                w.bytes(cert.as_bytes());
            }
            Message::FetchByNumbers { request_id, owner, requested, cert } => {
                w.u64(*request_id).u32(*owner).paths(requested).bytes(cert.as_bytes());
            }
            Message::FetchByKeyword { request_id, owner, keyword, cert } => {
                w.u64(*request_id).u32(*owner).bytes(keyword).bytes(cert.as_bytes());
            }
            Message::ReturnFiles { request_id, status, blobs } => {
                w.u64(*request_id).u8(status.tag());
                write_blobs(&mut w, blobs);
            }
            Message::AccessRightUpdate { user } => {
                w.u32(*user);
            }
            Message::DeleteFile { path } => {
                w.path(path);
            }
        }
        w.finish()
    }

    pub fn decode_payload(kind: MessageKind, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let msg = match kind {
            MessageKind::StoreFiles => {
                Message::StoreFiles { t_modified: r.u64("t_modified")?, blobs: read_blobs(&mut r)? }
            }
            MessageKind::RequestAuth => {
                let request_id = r.u64("request id")?;
                let keyword = match r.u8("keyword flag")? {
                    0 => None,
                    1 => Some(r.string("keyword")?),
                    _ => return Err(Error::Malformed("keyword flag")),
                };
                Message::RequestAuth { request_id, keyword }
            }
            MessageKind::GrantAuth => {
                let request_id = r.u64("request id")?;
                let paths = r.paths()?;
                let n = r.count(4, "key list")?;
                if n != paths.len() {
                    return Err(Error::Malformed("key group length"));
                }
                let mut pairs = Vec::with_capacity(n);
                for p in paths {
                    let k = SymKey::from_bytes(r.bytes("key")?.to_vec(), KeyRole::Derived)
                        .map_err(|_| Error::Malformed("key length"))?;
                    pairs.push((p, k));
                }
                let key_min = KeyGroup::new(pairs);
                if key_min.paths().windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Malformed("duplicate key group path"));
                }
                Message::GrantAuth {
                    request_id,
                    key_min,
                    cert: Certificate::from_sealed(r.bytes("certificate")?.to_vec()),
                }
            }
            MessageKind::FetchByNumbers => Message::FetchByNumbers {
                request_id: r.u64("request id")?,
                owner: r.u32("owner")?,
                requested: r.paths()?,
                cert: Certificate::from_sealed(r.bytes("certificate")?.to_vec()),
            },
            MessageKind::FetchByKeyword => Message::FetchByKeyword {
                request_id: r.u64("request id")?,
                owner: r.u32("owner")?,
                keyword: r.bytes("keyword")?.to_vec(),
                cert: Certificate::from_sealed(r.bytes("certificate")?.to_vec()),
            },
            MessageKind::ReturnFiles => Message::ReturnFiles {
                request_id: r.u64("request id")?,
                status: ServeStatus::from_tag(r.u8("serve status")?)?,
                blobs: read_blobs(&mut r)?,
            },
            MessageKind::AccessRightUpdate => Message::AccessRightUpdate { user: r.u32("user")? },
            MessageKind::DeleteFile => Message::DeleteFile { path: r.path()? },
        };
        r.finish("payload trailing bytes")?;
        Ok(msg)
    }

    /// Profile discipline for both sealing and opening.
    pub fn check_profile(&self, profile: Profile) -> Result<()> {
        let retrieval = profile.ciphertext_retrieval();
        match self {
            Message::FetchByKeyword { .. } if !retrieval => {
                Err(Error::ProfileViolation("keyword fetch needs the ciphertext-retrieval profile"))
            }
            Message::FetchByNumbers { .. } if retrieval => {
                Err(Error::ProfileViolation("number fetch is not used with ciphertext retrieval"))
            }
            Message::RequestAuth { keyword: Some(_), .. } if retrieval => {
                Err(Error::ProfileViolation("keywords must not reach the owner under ciphertext retrieval"))
            }
            Message::StoreFiles { blobs, .. } => {
                if blobs.iter().any(|b| b.bloom.is_some() != retrieval) {
                    Err(Error::ProfileViolation(if retrieval {
                        "stored files need Bloom filters"
                    } else {
                        "stored files must not carry Bloom filters"
                    }))
                } else {
                    Ok(())
                }
            }
            Message::ReturnFiles { blobs, .. } if blobs.iter().any(|b| b.bloom.is_some()) => {
                Err(Error::ProfileViolation("returned files never carry filters"))
            }
            Message::GrantAuth { key_min, .. }
                if key_min.pairs().iter().any(|(_, k)| k.check_profile(profile).is_err()) =>
            {
                Err(Error::ProfileViolation("key length does not match profile"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub profile: Profile,
    pub kind: MessageKind,
    pub sender: Principal,
    pub receiver: Principal,
    pub clear: Vec<u8>,
    pub body: Vec<u8>,
    pub mac: MacTag,
}

fn write_principal(w: &mut Writer, p: Principal) {
    w.u8(p.role.tag()).u32(p.id);
}

fn read_principal(r: &mut Reader<'_>) -> Result<Principal> {
    Ok(Principal { role: Role::from_tag(r.u8("principal role")?)?, id: r.u32("principal id")? })
}

fn header(profile: Profile, kind: MessageKind, sender: Principal, receiver: Principal) -> Writer {
    let mut w = Writer::new();
    w.u8(WIRE_VERSION).u8(profile.tag()).u8(kind.tag());
    write_principal(&mut w, sender);
    write_principal(&mut w, receiver);
    w
}

impl Envelope {
    fn authenticated_prefix(&self) -> Vec<u8> {
        let mut w = header(self.profile, self.kind, self.sender, self.receiver);
        w.bytes(&self.clear);
        w.finish()
    }

    fn mac_input(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.authenticated_prefix()).bytes(&self.body);
        w.finish()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.mac_input();
        out.extend_from_slice(&self.mac.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let version = r.u8("version")?;
        if version != WIRE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let profile = Profile::from_tag(r.u8("profile")?).ok_or(Error::Malformed("profile"))?;
        let kind = MessageKind::from_tag(r.u8("kind")?)?;
        let sender = read_principal(&mut r)?;
        let receiver = read_principal(&mut r)?;
        let clear = r.bytes("clear portion")?.to_vec();
        let body = r.bytes("sealed body")?.to_vec();
        let mac = MacTag(r.raw(MAC_LEN, "mac")?.try_into().expect("MAC_LEN octets"));
        r.finish("envelope trailing bytes")?;
        Ok(Envelope { profile, kind, sender, receiver, clear, body, mac })
    }

    pub fn wire_len(&self) -> usize {
        // header 13, two length prefixes, MAC
        13 + 4 + self.clear.len() + 4 + self.body.len() + MAC_LEN
    }
}

pub fn seal<R: RngCore + CryptoRng>(
    profile: Profile,
    sender: Principal,
    receiver: Principal,
    pairwise_key: &SymKey,
    message: &Message,
    rng: &mut R,
) -> Result<Envelope> {
    message.check_profile(profile)?;
    pairwise_key.check_profile(profile)?;
    let kind = message.kind();
    let payload = message.encode_payload();
    let (clear, secret) = if kind.payload_in_clear() { (payload, Vec::new()) } else { (Vec::new(), payload) };
    let mut env = Envelope { profile, kind, sender, receiver, clear, body: Vec::new(), mac: MacTag([0; MAC_LEN]) };
    env.body = sym_encrypt(pairwise_key, &secret, &env.authenticated_prefix(), rng);
    env.mac = mac_compute(&mac_subkey(pairwise_key), &env.mac_input());
    Ok(env)
}

/// Verifies the MAC, decrypts the body and decodes the payload.
pub fn open(pairwise_key: &SymKey, envelope: &Envelope) -> Result<Message> {
    if !mac_verify(&mac_subkey(pairwise_key), &envelope.mac_input(), &envelope.mac) {
        return Err(Error::IntegrityFailure);
    }
    let secret = sym_decrypt(pairwise_key, &envelope.body, &envelope.authenticated_prefix())?;
    let payload = if envelope.kind.payload_in_clear() {
        if !secret.is_empty() {
            return Err(Error::Malformed("unexpected sealed payload"));
        }
        envelope.clear.as_slice()
    } else {
        if !envelope.clear.is_empty() {
            return Err(Error::Malformed("unexpected clear payload"));
        }
        secret.as_slice()
    };
    let msg = Message::decode_payload(envelope.kind, payload)?;
    msg.check_profile(envelope.profile)?;
    Ok(msg)
}

/// Checks the MAC over the raw octets, then parses and opens. Any corruption
/// of the wire form therefore surfaces as `IntegrityFailure`.
pub fn open_bytes(pairwise_key: &SymKey, bytes: &[u8]) -> Result<(Envelope, Message)> {
    if bytes.len() < MAC_LEN {
        return Err(Error::IntegrityFailure);
    }
    let (covered, tag) = bytes.split_at(bytes.len() - MAC_LEN);
    let tag = MacTag(tag.try_into().expect("MAC_LEN octets"));
    if !mac_verify(&mac_subkey(pairwise_key), covered, &tag) {
        return Err(Error::IntegrityFailure);
    }
    let env = Envelope::from_bytes(bytes)?;
    let msg = open(pairwise_key, &env)?;
    Ok((env, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::bf_build;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn p(s: &str) -> NumberPath {
        s.parse().unwrap()
    }

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(21)
    }

    fn key(profile: Profile, r: &mut ChaCha20Rng) -> SymKey {
        SymKey::random(profile, KeyRole::Pairwise, r)
    }

    fn cert(r: &mut ChaCha20Rng, k: &SymKey) -> Certificate {
        make_certificate(k, &CertificateFields { user: 3, number_min: vec![p("1_2")], t_cert: 10, ar: 1 }, r)
    }

    pub(crate) fn sample_messages(profile: Profile, r: &mut ChaCha20Rng) -> Vec<Message> {
        let kos = key(profile, r);
        let retrieval = profile.ciphertext_retrieval();
        let bloom = retrieval.then(|| bf_build(&p("1_2_1"), &[b"kw".to_vec()], 40, 3).unwrap());
        let mut out = vec![
            Message::StoreFiles {
                t_modified: 5,
                blobs: vec![BlobRecord {
                    path: p("1_2_1"),
                    encrypted_name: vec![1, 2, 3],
                    ciphertext: vec![9; 40],
                    bloom,
                }],
            },
            Message::RequestAuth { request_id: 1, keyword: (!retrieval).then(|| "diary".to_string()) },
            Message::GrantAuth {
                request_id: 1,
                key_min: KeyGroup::new(vec![(p("1_2"), key(profile, r)), (p("1_2_2"), key(profile, r))]),
                cert: cert(r, &kos),
            },
            Message::ReturnFiles {
                request_id: 1,
                status: ServeStatus::StaleKeyNotice,
                blobs: vec![BlobRecord {
                    path: p("1_2_1"),
                    encrypted_name: vec![4],
                    ciphertext: vec![7; 30],
                    bloom: None,
                }],
            },
            Message::AccessRightUpdate { user: 7 },
            Message::DeleteFile { path: p("1_3_1") },
        ];
        if retrieval {
            out.push(Message::FetchByKeyword { request_id: 2, owner: 1, keyword: vec![0xaa; 53], cert: cert(r, &kos) });
        } else {
            out.push(Message::FetchByNumbers {
                request_id: 2,
                owner: 1,
                requested: vec![p("1_2")],
                cert: cert(r, &kos),
            });
        }
        out
    }

    #[test]
    fn seal_open_every_kind() {
        let mut r = rng();
        for profile in [Profile::FrameworkI, Profile::FrameworkII] {
            let k = key(profile, &mut r);
            for msg in sample_messages(profile, &mut r) {
                let env = seal(profile, Principal::owner(1), Principal::user(3), &k, &msg, &mut r).unwrap();
                assert_eq!(env.wire_len(), env.to_bytes().len());
                let (env2, back) = open_bytes(&k, &env.to_bytes()).unwrap();
                assert_eq!(env2, env);
                assert_eq!(back, msg);
            }
        }
    }

    #[test]
    fn wrong_key_and_tampering_fail() {
        let mut r = rng();
        let k = key(Profile::FrameworkI, &mut r);
        let other = key(Profile::FrameworkI, &mut r);
        let msg = Message::RequestAuth { request_id: 4, keyword: Some("cloud".into()) };
        let env = seal(Profile::FrameworkI, Principal::user(2), Principal::owner(1), &k, &msg, &mut r).unwrap();
        assert_eq!(open(&other, &env), Err(Error::IntegrityFailure));
        let mut bad = env.clone();
        bad.body[3] ^= 1;
        assert_eq!(open(&k, &bad), Err(Error::IntegrityFailure));
        let mut bad = env.clone();
        bad.sender = Principal::user(9);
        assert_eq!(open(&k, &bad), Err(Error::IntegrityFailure));
        let mut bad = env.clone();
        bad.kind = MessageKind::DeleteFile;
        assert_eq!(open(&k, &bad), Err(Error::IntegrityFailure));
    }

    #[test]
    fn unknown_kind_and_version() {
        let mut r = rng();
        let k = key(Profile::FrameworkI, &mut r);
        let env = seal(
            Profile::FrameworkI,
            Principal::owner(1),
            Principal::provider(1),
            &k,
            &Message::AccessRightUpdate { user: 1 },
            &mut r,
        )
        .unwrap();
        let mut bytes = env.to_bytes();
        bytes[2] = 99;
        assert_eq!(Envelope::from_bytes(&bytes), Err(Error::UnknownKind(99)));
        let mut bytes = env.to_bytes();
        bytes[0] = 2;
        assert_eq!(Envelope::from_bytes(&bytes), Err(Error::UnsupportedVersion(2)));
    }

    #[test]
    fn profile_discipline() {
        let mut r = rng();
        let k1 = key(Profile::FrameworkI, &mut r);
        let k2 = key(Profile::FrameworkII, &mut r);
        let c = cert(&mut r, &k1);
        let kw = Message::FetchByKeyword { request_id: 1, owner: 1, keyword: vec![1], cert: c.clone() };
        let nums = Message::FetchByNumbers { request_id: 1, owner: 1, requested: vec![], cert: c };
        let u = Principal::user(1);
        let s = Principal::provider(1);
        assert!(matches!(seal(Profile::FrameworkI, u, s, &k1, &kw, &mut r), Err(Error::ProfileViolation(_))));
        assert!(matches!(seal(Profile::FrameworkII, u, s, &k2, &nums, &mut r), Err(Error::ProfileViolation(_))));
        assert!(seal(Profile::FrameworkII, u, s, &k2, &kw, &mut r).is_ok());
        let ask = Message::RequestAuth { request_id: 1, keyword: Some("x".into()) };
        assert!(seal(Profile::FrameworkII, u, s, &k2, &ask, &mut r).is_err());
        // Key length must follow the profile too.
        assert!(matches!(seal(Profile::FrameworkII, u, s, &k1, &kw, &mut r), Err(Error::KeyLength { .. })));
        let store = Message::StoreFiles {
            t_modified: 1,
            blobs: vec![BlobRecord { path: p("1_1"), encrypted_name: vec![], ciphertext: vec![], bloom: None }],
        };
        assert!(seal(Profile::FrameworkI, u, s, &k1, &store, &mut r).is_ok());
        assert!(seal(Profile::FrameworkII, u, s, &k2, &store, &mut r).is_err());
    }

    #[test]
    fn certificate_roundtrip() {
        let mut r = rng();
        let kos = key(Profile::FrameworkII, &mut r);
        let kuo = key(Profile::FrameworkII, &mut r);
        let fields = CertificateFields { user: 5, number_min: vec![p("1_2")], t_cert: 3, ar: 2 };
        let c = make_certificate(&kos, &fields, &mut r);
        assert_eq!(open_certificate(&kos, &c).unwrap(), fields);
        assert_eq!(open_certificate(&kuo, &c), Err(Error::IntegrityFailure));
        let zero = CertificateFields { user: 0, number_min: vec![], t_cert: 0, ar: 0 };
        let c0 = make_certificate(&kos, &zero, &mut r);
        assert_eq!(open_certificate(&kos, &c0).unwrap(), zero);
        let mut bad = c.as_bytes().to_vec();
        bad[20] ^= 0x10;
        assert_eq!(open_certificate(&kos, &Certificate::from_sealed(bad)), Err(Error::IntegrityFailure));
        assert!(fields.in_scope(&p("1_2_9")));
        assert!(!fields.in_scope(&p("1_3_1")));
    }

    #[test]
    fn clear_portion_carries_fetch_fields_only() {
        let mut r = rng();
        let k = key(Profile::FrameworkII, &mut r);
        let kos = key(Profile::FrameworkII, &mut r);
        let msg = Message::FetchByKeyword { request_id: 9, owner: 1, keyword: vec![0x5a; 8], cert: cert(&mut r, &kos) };
        let env = seal(Profile::FrameworkII, Principal::user(1), Principal::provider(1), &k, &msg, &mut r).unwrap();
        assert!(env.clear.windows(8).any(|w| w == [0x5a; 8]));
        let grant = Message::AccessRightUpdate { user: 0x0badf00d };
        let env = seal(Profile::FrameworkII, Principal::owner(1), Principal::provider(1), &k, &grant, &mut r).unwrap();
        assert!(env.clear.is_empty());
        assert!(!env.to_bytes().windows(4).any(|w| w == [0x0b, 0xad, 0xf0, 0x0d]));
    }
}
