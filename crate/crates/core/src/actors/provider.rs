use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bloom::BloomFilter;
use crate::crypto::{Profile, SymKey};
use crate::error::{Error, Result};
use crate::key_tree::NumberPath;
use crate::protocol::{
    open, open_certificate, seal, BlobRecord, Certificate, CertificateFields, Envelope, Message, Principal,
    RefusalReason, Role, ServeStatus,
};

use super::{Handled, Outcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredBlob {
    pub path: NumberPath,
    pub ciphertext: Vec<u8>,
    pub encrypted_name: Vec<u8>,
    pub bloom: Option<BloomFilter>,
    pub t_modified: u64,
}

impl StoredBlob {
    fn record(&self) -> BlobRecord {
        BlobRecord {
            path: self.path.clone(),
            encrypted_name: self.encrypted_name.clone(),
            ciphertext: self.ciphertext.clone(),
            bloom: None,
        }
    }
}

/// One node of an owner's access-right update list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateArEntry {
    pub user: u32,
    pub times: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Serve,
    ServeWithStaleKeyNotice,
    Refuse(RefusalReason),
}

/// Certificate decision from the user's update-list entry (if any), the
/// certificate's AR and whether some requested file changed after issue.
pub fn decide(entry: Option<u32>, cert_ar: u32, modified_after_cert: bool) -> Verdict {
    match entry {
        None => Verdict::Serve,
        Some(times) if cert_ar < times => Verdict::Refuse(RefusalReason::CertificateExpired),
        Some(times) if cert_ar > times => Verdict::Refuse(RefusalReason::InconsistentState),
        Some(_) if modified_after_cert => Verdict::ServeWithStaleKeyNotice,
        Some(_) => Verdict::Serve,
    }
}

/// Everything the provider keeps for one owner.
pub struct OwnerStore {
    k_ac: SymKey,
    k_os: SymKey,
    blobs: BTreeMap<NumberPath, StoredBlob>,
    update_ar: Vec<UpdateArEntry>,
}

impl OwnerStore {
    pub fn blobs(&self) -> impl Iterator<Item = &StoredBlob> {
        self.blobs.values()
    }

    pub fn blob(&self, path: &NumberPath) -> Option<&StoredBlob> {
        self.blobs.get(path)
    }

    pub fn update_ar(&self) -> &[UpdateArEntry] {
        &self.update_ar
    }

    fn times(&self, user: u32) -> Option<u32> {
        self.update_ar.iter().find(|e| e.user == user).map(|e| e.times)
    }

    fn under<'a>(&'a self, roots: &'a [NumberPath]) -> impl Iterator<Item = &'a StoredBlob> + 'a {
        self.blobs.values().filter(move |b| roots.iter().any(|r| r.covers(&b.path)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProviderCounters {
    /// Hash evaluations spent on filter queries.
    pub retrieval_hashes: u64,
    pub filters_scanned: u64,
    pub blobs_served: u64,
}

pub struct Provider {
    id: u32,
    profile: Profile,
    rng: ChaCha20Rng,
    owners: BTreeMap<u32, OwnerStore>,
    user_keys: BTreeMap<u32, SymKey>,
    counters: ProviderCounters,
}

enum Gate {
    Open(CertificateFields, Option<u32>),
    Closed(RefusalReason),
}

impl Provider {
    pub fn new(id: u32, profile: Profile, seed: u64) -> Self {
        Provider {
            id,
            profile,
            rng: ChaCha20Rng::seed_from_u64(seed),
            owners: BTreeMap::new(),
            user_keys: BTreeMap::new(),
            counters: ProviderCounters::default(),
        }
    }

    pub fn principal(&self) -> Principal {
        Principal::provider(self.id)
    }

    pub fn link_owner(&mut self, owner: u32, k_ac: SymKey, k_os: SymKey) {
        self.owners.insert(owner, OwnerStore { k_ac, k_os, blobs: BTreeMap::new(), update_ar: Vec::new() });
    }

    pub fn link_user(&mut self, user: u32, k_uc: SymKey) {
        self.user_keys.insert(user, k_uc);
    }

    pub fn counters(&self) -> ProviderCounters {
        self.counters
    }

    pub fn store(&self, owner: u32) -> Result<&OwnerStore> {
        self.owners.get(&owner).ok_or(Error::UnknownOwner(owner))
    }

    fn store_mut(&mut self, owner: u32) -> Result<&mut OwnerStore> {
        self.owners.get_mut(&owner).ok_or(Error::UnknownOwner(owner))
    }

    /// Bumps the user's counter, inserting `(user, 1)` on first sight.
    pub fn handle_access_right_update(&mut self, owner: u32, user: u32) -> Result<u32> {
        let list = &mut self.store_mut(owner)?.update_ar;
        match list.iter_mut().find(|e| e.user == user) {
            Some(e) => {
                e.times += 1;
                Ok(e.times)
            }
            None => {
                list.push(UpdateArEntry { user, times: 1 });
                Ok(1)
            }
        }
    }

    fn gate(&self, owner: u32, requester: u32, cert: &Certificate) -> Result<Gate> {
        let store = self.store(owner)?;
        let fields = open_certificate(&store.k_os, cert)?;
        if fields.user != requester {
            return Ok(Gate::Closed(RefusalReason::BadCertificate));
        }
        let entry = store.times(requester);
        // Staleness is judged later, against the files actually served.
        match decide(entry, fields.ar, false) {
            Verdict::Refuse(r) => Ok(Gate::Closed(r)),
            _ => Ok(Gate::Open(fields, entry)),
        }
    }

    /// Full decision for a number-addressed request. An empty `requested`
    /// list means the whole certificate scope.
    pub fn validate_certificate(
        &self,
        owner: u32,
        requester: u32,
        cert: &Certificate,
        requested: &[NumberPath],
    ) -> Result<Verdict> {
        let (fields, entry) = match self.gate(owner, requester, cert)? {
            Gate::Closed(r) => return Ok(Verdict::Refuse(r)),
            Gate::Open(f, e) => (f, e),
        };
        let roots = scoped(&fields, requested)?;
        let store = self.store(owner)?;
        let after = store.under(&roots).any(|b| b.t_modified > fields.t_cert);
        Ok(decide(entry, fields.ar, after))
    }

    fn serve(
        &mut self,
        owner: u32,
        requester: u32,
        cert: &Certificate,
        select: impl FnOnce(&OwnerStore, &CertificateFields, &mut ProviderCounters) -> Result<Vec<StoredBlob>>,
    ) -> (ServeStatus, Vec<BlobRecord>) {
        let refused = |r| (ServeStatus::Refused(r), Vec::new());
        let (fields, entry) = match self.gate(owner, requester, cert) {
            Err(_) => return refused(RefusalReason::BadCertificate),
            Ok(Gate::Closed(r)) => return refused(r),
            Ok(Gate::Open(f, e)) => (f, e),
        };
        let store = &self.owners[&owner];
        let chosen = match select(store, &fields, &mut self.counters) {
            Ok(c) => c,
            Err(Error::ScopeViolation(_)) => return refused(RefusalReason::ScopeViolation),
            Err(_) => return refused(RefusalReason::BadCertificate),
        };
        let after = chosen.iter().any(|b| b.t_modified > fields.t_cert);
        let status = match decide(entry, fields.ar, after) {
            Verdict::Serve => ServeStatus::Served,
            Verdict::ServeWithStaleKeyNotice => ServeStatus::StaleKeyNotice,
            Verdict::Refuse(r) => return refused(r),
        };
        self.counters.blobs_served += chosen.len() as u64;
        (status, chosen.iter().map(StoredBlob::record).collect())
    }

    /// Files under the requested numbers, gated by the certificate.
    pub fn handle_fetch_by_numbers(
        &mut self,
        owner: u32,
        requester: u32,
        cert: &Certificate,
        requested: &[NumberPath],
    ) -> (ServeStatus, Vec<BlobRecord>) {
        self.serve(owner, requester, cert, |store, fields, _| {
            let roots = scoped(fields, requested)?;
            Ok(store.under(&roots).cloned().collect())
        })
    }

    /// Files in the certificate scope whose filter matches `keyword`. Only
    /// filters are read; nothing is decrypted.
    pub fn handle_fetch_by_keyword(
        &mut self,
        owner: u32,
        requester: u32,
        cert: &Certificate,
        keyword: &[u8],
    ) -> (ServeStatus, Vec<BlobRecord>) {
        self.serve(owner, requester, cert, |store, fields, counters| {
            let mut hits = Vec::new();
            for b in store.under(&fields.number_min) {
                let Some(bf) = &b.bloom else { continue };
                counters.filters_scanned += 1;
                let (hit, spent) = bf.query_counted(&b.path, keyword);
                counters.retrieval_hashes += spent;
                if hit {
                    hits.push(b.clone());
                }
            }
            Ok(hits)
        })
    }

    pub fn handle(&mut self, env: &Envelope) -> Result<Handled> {
        match env.sender.role {
            Role::Owner => self.handle_owner(env),
            Role::User => self.handle_user(env),
            Role::Provider => Err(Error::UnknownPrincipal(env.sender)),
        }
    }

    fn handle_owner(&mut self, env: &Envelope) -> Result<Handled> {
        let owner = env.sender.id;
        let msg = open(&self.store(owner)?.k_ac, env)?;
        let store = self.store_mut(owner)?;
        let outcome = match msg {
            Message::StoreFiles { t_modified, blobs } => {
                let n = blobs.len();
                for b in blobs {
                    store.blobs.insert(
                        b.path.clone(),
                        StoredBlob {
                            path: b.path,
                            ciphertext: b.ciphertext,
                            encrypted_name: b.encrypted_name,
                            bloom: b.bloom,
                            t_modified,
                        },
                    );
                }
                Outcome::Stored { blobs: n }
            }
            Message::DeleteFile { path } => {
                store.blobs.remove(&path);
                Outcome::Deleted
            }
            Message::AccessRightUpdate { user } => {
                Outcome::RightsUpdated { times: self.handle_access_right_update(owner, user)? }
            }
            other => return Err(Error::UnexpectedMessage(other.kind())),
        };
        Ok(Handled { outcome, replies: Vec::new() })
    }

    fn handle_user(&mut self, env: &Envelope) -> Result<Handled> {
        let user = env.sender.id;
        let k_uc = self.user_keys.get(&user).cloned().ok_or(Error::UnknownUser(user))?;
        let (request_id, (status, blobs)) = match open(&k_uc, env)? {
            Message::FetchByNumbers { request_id, owner, requested, cert } => {
                (request_id, self.handle_fetch_by_numbers(owner, user, &cert, &requested))
            }
            Message::FetchByKeyword { request_id, owner, keyword, cert } => {
                (request_id, self.handle_fetch_by_keyword(owner, user, &cert, &keyword))
            }
            other => return Err(Error::UnexpectedMessage(other.kind())),
        };
        let outcome = match status {
            ServeStatus::Served => Outcome::Served { blobs: blobs.len() },
            ServeStatus::StaleKeyNotice => Outcome::StaleKeyNotice { blobs: blobs.len() },
            ServeStatus::Refused(r) => Outcome::Refused(r),
        };
        let reply = seal(
            self.profile,
            self.principal(),
            env.sender,
            &k_uc,
            &Message::ReturnFiles { request_id, status, blobs },
            &mut self.rng,
        )?;
        Ok(Handled { outcome, replies: vec![reply] })
    }

    /// Calls `f` on every octet string the provider holds: its pairwise keys,
    /// stored ciphertexts, encrypted names, filters and update lists.
    pub fn visit_bytes(&self, f: &mut dyn FnMut(&[u8])) {
        f(&self.id.to_be_bytes());
        for k in self.user_keys.values() {
            f(k.as_bytes());
        }
        for s in self.owners.values() {
            f(s.k_ac.as_bytes());
            f(s.k_os.as_bytes());
            for b in s.blobs.values() {
                f(&b.path.to_bytes());
                f(&b.ciphertext);
                f(&b.encrypted_name);
                if let Some(bf) = &b.bloom {
                    f(&bf.to_bytes());
                }
                f(&b.t_modified.to_be_bytes());
            }
            for e in &s.update_ar {
                f(&e.user.to_be_bytes());
                f(&e.times.to_be_bytes());
            }
        }
    }
}

/// Requested roots, each checked against the certificate scope.
fn scoped(fields: &CertificateFields, requested: &[NumberPath]) -> Result<Vec<NumberPath>> {
    if requested.is_empty() {
        return Ok(fields.number_min.clone());
    }
    let mut roots = BTreeSet::new();
    for r in requested {
        if !fields.in_scope(r) {
            return Err(Error::ScopeViolation(r.clone()));
        }
        roots.insert(r.clone());
    }
    Ok(roots.into_iter().collect())
}
