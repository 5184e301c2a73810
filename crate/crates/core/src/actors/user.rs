use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bloom::normalize_keyword;
use crate::crypto::{det_pub_encrypt, sym_decrypt, KeywordPublicKey, Profile, SymKey};
use crate::error::{Error, Result};
use crate::key_tree::{KeyGroup, NumberPath};
use crate::protocol::{open, seal, BlobRecord, Certificate, Envelope, Message, Principal, Role, ServeStatus};

use super::{content_aad, name_aad, Handled, Outcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainFile {
    pub name: String,
    pub content: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievedFile {
    pub path: NumberPath,
    pub result: Result<PlainFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retrieval {
    pub request_id: u64,
    pub owner: u32,
    pub status: ServeStatus,
    pub files: Vec<RetrievedFile>,
}

impl Retrieval {
    pub fn decrypted(&self) -> impl Iterator<Item = (&NumberPath, &PlainFile)> {
        self.files.iter().filter_map(|f| f.result.as_ref().ok().map(|p| (&f.path, p)))
    }

    pub fn failed(&self) -> impl Iterator<Item = &RetrievedFile> {
        self.files.iter().filter(|f| f.result.is_err())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grant {
    pub request_id: u64,
    pub key_min: KeyGroup,
    pub cert: Certificate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UserCounters {
    pub derivation_hashes: u64,
    pub grants_received: u64,
}

struct OwnerLink {
    k_uo: SymKey,
    public: KeywordPublicKey,
    grant: Option<Grant>,
}

/// Derives each blob's key from the deepest covering pair and decrypts its
/// name and content. Failures are reported per blob. Also returns the hash
/// evaluations spent on derivation.
pub fn decrypt_blobs(key_min: &KeyGroup, blobs: &[BlobRecord]) -> (Vec<RetrievedFile>, u64) {
    let mut hashes = 0;
    let files = blobs
        .iter()
        .map(|b| {
            let result = match key_min.derive_for(&b.path) {
                None => Err(Error::NoCoveringKey(b.path.clone())),
                Some((key, steps)) => {
                    hashes += steps;
                    decrypt_one(&key, b)
                }
            };
            RetrievedFile { path: b.path.clone(), result }
        })
        .collect();
    (files, hashes)
}

fn decrypt_one(key: &SymKey, b: &BlobRecord) -> Result<PlainFile> {
    let name = sym_decrypt(key, &b.encrypted_name, &name_aad(&b.path))?;
    let content = sym_decrypt(key, &b.ciphertext, &content_aad(&b.path))?;
    Ok(PlainFile { name: String::from_utf8(name).map_err(|_| Error::Malformed("file name"))?, content })
}

pub struct User {
    id: u32,
    profile: Profile,
    rng: ChaCha20Rng,
    provider: Principal,
    k_uc: SymKey,
    owners: BTreeMap<u32, OwnerLink>,
    next_request: u64,
    pending: BTreeMap<u64, u32>,
    retrievals: Vec<Retrieval>,
    counters: UserCounters,
}

impl User {
    pub fn new(id: u32, profile: Profile, provider: Principal, k_uc: SymKey, seed: u64) -> Self {
        User {
            id,
            profile,
            rng: ChaCha20Rng::seed_from_u64(seed),
            provider,
            k_uc,
            owners: BTreeMap::new(),
            next_request: 1,
            pending: BTreeMap::new(),
            retrievals: Vec::new(),
            counters: UserCounters::default(),
        }
    }

    pub fn link_owner(&mut self, owner: u32, k_uo: SymKey, public: KeywordPublicKey) {
        self.owners.insert(owner, OwnerLink { k_uo, public, grant: None });
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn principal(&self) -> Principal {
        Principal::user(self.id)
    }

    pub fn counters(&self) -> UserCounters {
        self.counters
    }

    pub fn grant(&self, owner: u32) -> Option<&Grant> {
        self.owners.get(&owner).and_then(|l| l.grant.as_ref())
    }

    pub fn retrievals(&self) -> &[Retrieval] {
        &self.retrievals
    }

    pub fn last_retrieval(&self) -> Option<&Retrieval> {
        self.retrievals.last()
    }

    /// Every octet string of key material the user holds.
    pub fn visit_keys(&self, f: &mut dyn FnMut(&[u8])) {
        f(self.k_uc.as_bytes());
        for l in self.owners.values() {
            f(l.k_uo.as_bytes());
            if let Some(g) = &l.grant {
                for (_, k) in g.key_min.pairs() {
                    f(k.as_bytes());
                }
            }
        }
    }

    fn link(&self, owner: u32) -> Result<&OwnerLink> {
        self.owners.get(&owner).ok_or(Error::UnknownOwner(owner))
    }

    fn request_id(&mut self) -> u64 {
        let r = self.next_request;
        self.next_request += 1;
        r
    }

    /// Asks the owner for keys. Only the number-addressed profile may carry
    /// a keyword here.
    pub fn request_auth(&mut self, owner: u32, keyword: Option<&str>) -> Result<Envelope> {
        let k_uo = self.link(owner)?.k_uo.clone();
        let request_id = self.request_id();
        seal(
            self.profile,
            self.principal(),
            Principal::owner(owner),
            &k_uo,
            &Message::RequestAuth { request_id, keyword: keyword.map(str::to_string) },
            &mut self.rng,
        )
    }

    fn seal_for_provider(&mut self, owner: u32, message: Message) -> Result<Envelope> {
        let env = seal(self.profile, self.principal(), self.provider, &self.k_uc, &message, &mut self.rng)?;
        let request_id = match &message {
            Message::FetchByNumbers { request_id, .. } | Message::FetchByKeyword { request_id, .. } => *request_id,
            _ => unreachable!("only fetches go to the provider"),
        };
        self.pending.insert(request_id, owner);
        Ok(env)
    }

    /// Empty `requested` asks for the whole certificate scope.
    pub fn fetch_by_numbers(&mut self, owner: u32, requested: Vec<NumberPath>) -> Result<Envelope> {
        let cert = self.grant(owner).ok_or(Error::NoGrant(owner))?.cert.clone();
        let request_id = self.request_id();
        self.seal_for_provider(owner, Message::FetchByNumbers { request_id, owner, requested, cert })
    }

    pub fn fetch_by_keyword(&mut self, owner: u32, keyword: &str) -> Result<Envelope> {
        let link = self.link(owner)?;
        let cert = link.grant.as_ref().ok_or(Error::NoGrant(owner))?.cert.clone();
        let w = det_pub_encrypt(&link.public, normalize_keyword(keyword).as_bytes());
        let request_id = self.request_id();
        self.seal_for_provider(owner, Message::FetchByKeyword { request_id, owner, keyword: w, cert })
    }

    pub fn handle(&mut self, env: &Envelope) -> Result<Handled> {
        match env.sender.role {
            Role::Owner => {
                let owner = env.sender.id;
                let link = self.owners.get_mut(&owner).ok_or(Error::UnknownOwner(owner))?;
                match open(&link.k_uo, env)? {
                    Message::GrantAuth { request_id, key_min, cert } => {
                        let pairs = key_min.len();
                        link.grant = Some(Grant { request_id, key_min, cert });
                        self.counters.grants_received += 1;
                        Ok(Handled { outcome: Outcome::Granted { pairs }, replies: Vec::new() })
                    }
                    other => Err(Error::UnexpectedMessage(other.kind())),
                }
            }
            Role::Provider if env.sender == self.provider => match open(&self.k_uc, env)? {
                Message::ReturnFiles { request_id, status, blobs } => {
                    let owner = self.pending.remove(&request_id).ok_or(Error::Malformed("reply to unknown request"))?;
                    let key_min = self.grant(owner).ok_or(Error::NoGrant(owner))?.key_min.clone();
                    let (files, hashes) = decrypt_blobs(&key_min, &blobs);
                    self.counters.derivation_hashes += hashes;
                    let failed = files.iter().filter(|f| f.result.is_err()).count();
                    let outcome = match status {
                        ServeStatus::Refused(r) => Outcome::Refused(r),
                        _ => Outcome::Decrypted { ok: files.len() - failed, failed },
                    };
                    self.retrievals.push(Retrieval { request_id, owner, status, files });
                    Ok(Handled { outcome, replies: Vec::new() })
                }
                other => Err(Error::UnexpectedMessage(other.kind())),
            },
            _ => Err(Error::UnknownPrincipal(env.sender)),
        }
    }
}
