//! Owner, provider and user state machines, and an in-process deployment
//! that routes sealed envelopes between them.
//!
//! Every actor consumes one envelope at a time and answers with an
//! [`Outcome`] plus zero or more reply envelopes. [`Deployment`] delivers
//! envelopes in FIFO order through their wire encoding and keeps one
//! [`EventRecord`] per delivery.

mod owner;
mod provider;
mod user;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::{KeyRole, Profile, SymKey};
use crate::error::{Error, Result};
use crate::key_tree::NumberPath;
use crate::protocol::{Envelope, MessageKind, Principal, RefusalReason, Role};

pub use owner::{NewFile, Owner, OwnerConfig, OwnerCounters};
pub use provider::{decide, OwnerStore, Provider, ProviderCounters, StoredBlob, UpdateArEntry, Verdict};
pub use user::{decrypt_blobs, Grant, PlainFile, Retrieval, RetrievedFile, User, UserCounters};

const CONTENT_AAD: &[u8] = b"treevault/file/content";
const NAME_AAD: &[u8] = b"treevault/file/name";

/// Associated data binding a file's content ciphertext to its number.
pub fn content_aad(path: &NumberPath) -> Vec<u8> {
    let mut v = CONTENT_AAD.to_vec();
    path.write_bytes(&mut v);
    v
}

pub fn name_aad(path: &NumberPath) -> Vec<u8> {
    let mut v = NAME_AAD.to_vec();
    path.write_bytes(&mut v);
    v
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Stored { blobs: usize },
    Deleted,
    RightsUpdated { times: u32 },
    Granted { pairs: usize },
    Served { blobs: usize },
    StaleKeyNotice { blobs: usize },
    Refused(RefusalReason),
    Decrypted { ok: usize, failed: usize },
    Rejected(Error),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Stored { blobs } => write!(f, "stored:{blobs}"),
            Outcome::Deleted => f.write_str("deleted"),
            Outcome::RightsUpdated { times } => write!(f, "rights-updated:{times}"),
            Outcome::Granted { pairs } => write!(f, "granted:{pairs}"),
            Outcome::Served { blobs } => write!(f, "served:{blobs}"),
            Outcome::StaleKeyNotice { blobs } => write!(f, "stale-key-notice:{blobs}"),
            Outcome::Refused(r) => write!(f, "refused:{r:?}"),
            Outcome::Decrypted { ok, failed } => write!(f, "decrypted:{ok}/{failed}"),
            Outcome::Rejected(e) => write!(f, "rejected:{e}"),
        }
    }
}

/// What an actor produced while handling one envelope.
#[derive(Debug)]
pub struct Handled {
    pub outcome: Outcome,
    pub replies: Vec<Envelope>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub seq: u64,
    pub kind: MessageKind,
    pub sender: Principal,
    pub receiver: Principal,
    pub outcome: Outcome,
    pub bytes: usize,
}

/// One provider, any number of owners and users, with pre-shared pairwise
/// keys provisioned at registration.
pub struct Deployment {
    profile: Profile,
    provider: Provider,
    owners: BTreeMap<u32, Owner>,
    users: BTreeMap<u32, User>,
    log: Vec<EventRecord>,
    wire: Vec<Vec<u8>>,
    rng: ChaCha20Rng,
}

impl Deployment {
    pub fn new(profile: Profile, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let provider = Provider::new(1, profile, rand::Rng::gen(&mut rng));
        Deployment {
            profile,
            provider,
            owners: BTreeMap::new(),
            users: BTreeMap::new(),
            log: Vec::new(),
            wire: Vec::new(),
            rng,
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    fn pairwise(&mut self) -> SymKey {
        SymKey::random(self.profile, KeyRole::Pairwise, &mut self.rng)
    }

    pub fn add_owner(&mut self, id: u32, config: OwnerConfig) -> &mut Owner {
        let k_ac = self.pairwise();
        let k_os = self.pairwise();
        let seed = rand::Rng::gen(&mut self.rng);
        let mut owner = Owner::new(id, self.profile, config, seed);
        owner.link_provider(self.provider.principal(), k_ac.clone(), k_os.clone());
        self.provider.link_owner(id, k_ac, k_os);
        self.owners.insert(id, owner);
        self.owners.get_mut(&id).expect("just inserted")
    }

    /// Registers a user with the provider and with `owners`.
    pub fn add_user(&mut self, id: u32, owners: &[u32]) -> Result<&mut User> {
        let k_uc = self.pairwise();
        let seed = rand::Rng::gen(&mut self.rng);
        let mut user = User::new(id, self.profile, self.provider.principal(), k_uc.clone(), seed);
        self.provider.link_user(id, k_uc);
        for &o in owners {
            let k_uo = self.pairwise();
            let owner = self.owners.get_mut(&o).ok_or(Error::UnknownOwner(o))?;
            owner.link_user(id, k_uo.clone());
            user.link_owner(o, k_uo, owner.public_key());
        }
        self.users.insert(id, user);
        Ok(self.users.get_mut(&id).expect("just inserted"))
    }

    pub fn owner(&self, id: u32) -> &Owner {
        &self.owners[&id]
    }

    pub fn owner_mut(&mut self, id: u32) -> &mut Owner {
        self.owners.get_mut(&id).expect("registered owner")
    }

    pub fn user(&self, id: u32) -> &User {
        &self.users[&id]
    }

    pub fn user_mut(&mut self, id: u32) -> &mut User {
        self.users.get_mut(&id).expect("registered user")
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn provider_mut(&mut self) -> &mut Provider {
        &mut self.provider
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    /// Every envelope that crossed the wire, in delivery order.
    pub fn wire(&self) -> &[Vec<u8>] {
        &self.wire
    }

    /// Delivers `envelope` and every reply it triggers. Returns the records
    /// appended to the log.
    pub fn send(&mut self, envelope: Envelope) -> &[EventRecord] {
        let start = self.log.len();
        let mut queue = VecDeque::from([envelope]);
        while let Some(env) = queue.pop_front() {
            let bytes = env.to_bytes();
            let handled = Envelope::from_bytes(&bytes).and_then(|e| self.dispatch(&e));
            let outcome = match handled {
                Ok(h) => {
                    queue.extend(h.replies);
                    h.outcome
                }
                Err(e) => Outcome::Rejected(e),
            };
            self.log.push(EventRecord {
                seq: self.log.len() as u64,
                kind: env.kind,
                sender: env.sender,
                receiver: env.receiver,
                outcome,
                bytes: bytes.len(),
            });
            self.wire.push(bytes);
        }
        &self.log[start..]
    }

    /// Runs `make` against an owner and sends the envelope it returns.
    pub fn owner_send(
        &mut self,
        owner: u32,
        make: impl FnOnce(&mut Owner) -> Result<Envelope>,
    ) -> Result<&[EventRecord]> {
        let env = make(self.owners.get_mut(&owner).ok_or(Error::UnknownOwner(owner))?)?;
        Ok(self.send(env))
    }

    pub fn user_send(&mut self, user: u32, make: impl FnOnce(&mut User) -> Result<Envelope>) -> Result<&[EventRecord]> {
        let env = make(self.users.get_mut(&user).ok_or(Error::UnknownUser(user))?)?;
        Ok(self.send(env))
    }

    fn dispatch(&mut self, env: &Envelope) -> Result<Handled> {
        if env.profile != self.profile {
            return Err(Error::ProfileViolation("envelope profile differs from deployment"));
        }
        let r = env.receiver;
        match r.role {
            Role::Provider if r == self.provider.principal() => self.provider.handle(env),
            Role::Owner => match self.owners.get_mut(&r.id) {
                Some(o) => o.handle(env),
                None => Err(Error::UnknownPrincipal(r)),
            },
            Role::User => match self.users.get_mut(&r.id) {
                Some(u) => u.handle(env),
                None => Err(Error::UnknownPrincipal(r)),
            },
            Role::Provider => Err(Error::UnknownPrincipal(r)),
        }
    }
}
