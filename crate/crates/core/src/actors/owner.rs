use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bloom::{bf_build, extract_keywords, normalize_keyword, KeywordSet};
use crate::crypto::{gen_keypair, gen_root_key, sym_encrypt, KeyPair, KeywordPublicKey, Profile, SymKey};
use crate::error::{Error, Result};
use crate::key_tree::{
    derivation_steps, ext_keyderivation, key_for_path, mark_updated, IndexTree, KeyGroup, Listing, NodeKind,
    NumberPath, UpdateTree,
};
use crate::protocol::{
    make_certificate, open, seal, BlobRecord, CertificateFields, Envelope, Message, Principal, Role,
};

use super::{content_aad, name_aad, Handled, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OwnerConfig {
    /// Filter bits per extracted keyword (ciphertext-retrieval profile).
    pub bits_per_keyword: u64,
    pub hashes: u32,
    /// Give a new file a fresh key whenever some user was ever handed a key
    /// from which the file's derived key would follow. Turning this off is
    /// only useful for demonstrating the resulting leak.
    pub add_by_update: bool,
}

impl Default for OwnerConfig {
    fn default() -> Self {
        OwnerConfig {
            bits_per_keyword: crate::bloom::DEFAULT_BITS_PER_KEYWORD,
            hashes: crate::bloom::DEFAULT_HASHES as u32,
            add_by_update: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewFile {
    pub parent: NumberPath,
    pub name: String,
    pub content: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OwnerCounters {
    pub derivation_hashes: u64,
    pub files_encrypted: u64,
    pub grants: u64,
    pub rekeys: u64,
}

#[derive(Debug, Clone, Default)]
struct Rights {
    leaves: BTreeSet<NumberPath>,
    ar: u32,
}

struct ProviderLink {
    principal: Principal,
    k_ac: SymKey,
    k_os: SymKey,
}

pub struct Owner {
    id: u32,
    profile: Profile,
    config: OwnerConfig,
    rng: ChaCha20Rng,
    root_key: SymKey,
    keypair: KeyPair,
    tree: IndexTree,
    update_tree: UpdateTree,
    acl: BTreeMap<u32, Rights>,
    pending_rekey: BTreeSet<NumberPath>,
    issued: BTreeMap<u32, BTreeSet<NumberPath>>,
    clock: u64,
    provider: Option<ProviderLink>,
    user_keys: BTreeMap<u32, SymKey>,
    counters: OwnerCounters,
}

impl Owner {
    pub fn new(id: u32, profile: Profile, config: OwnerConfig, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let root_key = gen_root_key(profile, &mut rng);
        let keypair = gen_keypair(&mut rng);
        Owner {
            id,
            profile,
            config,
            rng,
            root_key,
            keypair,
            tree: IndexTree::new(),
            update_tree: UpdateTree::new(),
            acl: BTreeMap::new(),
            pending_rekey: BTreeSet::new(),
            issued: BTreeMap::new(),
            clock: 0,
            provider: None,
            user_keys: BTreeMap::new(),
            counters: OwnerCounters::default(),
        }
    }

    pub fn link_provider(&mut self, provider: Principal, k_ac: SymKey, k_os: SymKey) {
        self.provider = Some(ProviderLink { principal: provider, k_ac, k_os });
    }

    /// Registers a user with an empty access list.
    pub fn link_user(&mut self, user: u32, k_uo: SymKey) {
        self.user_keys.insert(user, k_uo);
        self.acl.entry(user).or_default();
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn principal(&self) -> Principal {
        Principal::owner(self.id)
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn config(&self) -> OwnerConfig {
        self.config
    }

    pub fn public_key(&self) -> KeywordPublicKey {
        self.keypair.public
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn root_key(&self) -> &SymKey {
        &self.root_key
    }

    pub fn tree(&self) -> &IndexTree {
        &self.tree
    }

    pub fn update_tree(&self) -> &UpdateTree {
        &self.update_tree
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    pub fn counters(&self) -> OwnerCounters {
        self.counters
    }

    pub fn pending_rekey(&self) -> &BTreeSet<NumberPath> {
        &self.pending_rekey
    }

    /// Current key of a node, as the owner derives it.
    pub fn key_of(&self, path: &NumberPath) -> Result<SymKey> {
        key_for_path(&self.tree, &self.root_key, &self.update_tree, path)
    }

    pub fn authorized(&self, user: u32) -> Result<&BTreeSet<NumberPath>> {
        self.acl.get(&user).map(|r| &r.leaves).ok_or(Error::UnknownUser(user))
    }

    pub fn access_version(&self, user: u32) -> Result<u32> {
        self.acl.get(&user).map(|r| r.ar).ok_or(Error::UnknownUser(user))
    }

    /// Node numbers whose keys this user has been handed at any time.
    pub fn issued_to(&self, user: u32) -> Option<&BTreeSet<NumberPath>> {
        self.issued.get(&user)
    }

    fn link(&self) -> Result<&ProviderLink> {
        self.provider.as_ref().ok_or(Error::UnknownPrincipal(Principal::provider(0)))
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn seal_for_provider(&mut self, message: Message) -> Result<Envelope> {
        let link = self.provider.as_ref().ok_or(Error::UnknownPrincipal(Principal::provider(0)))?;
        seal(self.profile, self.principal(), link.principal, &link.k_ac, &message, &mut self.rng)
    }

    pub fn create_folder(&mut self, parent: &NumberPath, name: &str) -> Result<NumberPath> {
        let (path, _) = self.tree.add_node(parent, NodeKind::Folder, name)?;
        Ok(path)
    }

    /// Whether a key already handed out would derive the key of `path`.
    fn derivable_by_someone(&self, path: &NumberPath) -> bool {
        self.issued.values().flatten().any(|q| q.is_ancestor_of(path))
    }

    /// Inserts a file node and decides its key. A reused number always gets a
    /// fresh key; so does a new number below a key some user holds, unless
    /// the policy is switched off.
    fn place_file(&mut self, parent: &NumberPath, name: &str) -> Result<NumberPath> {
        let (path, reuse) = self.tree.add_node(parent, NodeKind::File, name)?;
        let fresh = reuse || (self.config.add_by_update && self.derivable_by_someone(&path));
        if fresh {
            mark_updated(&mut self.tree, &mut self.update_tree, &path, self.profile, &mut self.rng)?;
            self.counters.rekeys += 1;
        }
        self.pending_rekey.remove(&path);
        Ok(path)
    }

    fn seal_file(&mut self, path: &NumberPath, content: &[u8]) -> Result<BlobRecord> {
        let key = self.key_of(path)?;
        self.counters.derivation_hashes += derivation_steps(&self.update_tree, path);
        self.counters.files_encrypted += 1;
        let name = self.tree.node(path)?.name.clone().ok_or(Error::Malformed("owner node without a name"))?;
        let ciphertext = sym_encrypt(&key, content, &content_aad(path), &mut self.rng);
        let encrypted_name = sym_encrypt(&key, name.as_bytes(), &name_aad(path), &mut self.rng);
        self.tree.set_encrypted_name(path, encrypted_name.clone())?;
        let bloom = if self.profile.ciphertext_retrieval() {
            let kws = KeywordSet::from_filename(&name, &self.keypair.public);
            let m = self.config.bits_per_keyword * kws.len().max(1) as u64;
            Some(bf_build(path, kws.encrypted(), m, self.config.hashes)?)
        } else {
            None
        };
        Ok(BlobRecord { path: path.clone(), encrypted_name, ciphertext, bloom })
    }

    fn package(&mut self, files: Vec<(NumberPath, Vec<u8>)>) -> Result<Envelope> {
        let t = self.tick();
        let mut blobs = Vec::with_capacity(files.len());
        for (path, content) in files {
            self.tree.set_modified(&path, t)?;
            blobs.push(self.seal_file(&path, &content)?);
        }
        self.seal_for_provider(Message::StoreFiles { t_modified: t, blobs })
    }

    /// Adds and encrypts a batch of files, producing one upload.
    pub fn store_files(&mut self, files: &[NewFile]) -> Result<Envelope> {
        self.link()?;
        let mut placed = Vec::with_capacity(files.len());
        for f in files {
            let path = self.place_file(&f.parent, &f.name)?;
            placed.push((path, f.content.clone()));
        }
        self.package(placed)
    }

    /// Builds `listing` below the root (numbered in listing order) and uploads
    /// every file, with contents supplied by `content`.
    pub fn import(
        &mut self,
        listing: &[Listing],
        mut content: impl FnMut(&NumberPath, &str) -> Vec<u8>,
    ) -> Result<Envelope> {
        self.link()?;
        if listing.is_empty() {
            return Err(Error::EmptyListing);
        }
        let mut placed = Vec::new();
        let mut stack: Vec<(NumberPath, &[Listing])> = vec![(NumberPath::root(), listing)];
        while let Some((parent, entries)) = stack.pop() {
            for e in entries {
                match e {
                    Listing::File(name) => {
                        let path = self.place_file(&parent, name)?;
                        let c = content(&path, name);
                        placed.push((path, c));
                    }
                    Listing::Folder(name, kids) => {
                        let path = self.create_folder(&parent, name)?;
                        stack.push((path, kids));
                    }
                }
            }
        }
        placed.sort_by(|a, b| a.0.cmp(&b.0));
        self.package(placed)
    }

    pub fn add_file(&mut self, parent: &NumberPath, name: &str, content: &[u8]) -> Result<(NumberPath, Envelope)> {
        self.link()?;
        let path = self.place_file(parent, name)?;
        let env = self.package(vec![(path.clone(), content.to_vec())])?;
        Ok((path, env))
    }

    /// Re-encrypts a file with new content. Files a revoked user could read
    /// get a fresh key first.
    pub fn update_file(&mut self, path: &NumberPath, content: &[u8]) -> Result<Envelope> {
        self.link()?;
        self.require_live_file(path)?;
        if self.pending_rekey.remove(path) {
            mark_updated(&mut self.tree, &mut self.update_tree, path, self.profile, &mut self.rng)?;
            self.counters.rekeys += 1;
        }
        self.package(vec![(path.clone(), content.to_vec())])
    }

    pub fn delete_file(&mut self, path: &NumberPath) -> Result<Envelope> {
        self.link()?;
        self.require_live_file(path)?;
        self.tree.mark_deleted(path)?;
        self.tick();
        for r in self.acl.values_mut() {
            r.leaves.remove(path);
        }
        self.pending_rekey.remove(path);
        self.seal_for_provider(Message::DeleteFile { path: path.clone() })
    }

    fn require_live_file(&self, path: &NumberPath) -> Result<()> {
        let n = self.tree.node(path)?;
        if !n.is_file() {
            return Err(Error::NotAFile(path.clone()));
        }
        if !self.tree.is_live_file(path) {
            return Err(Error::NodeDeleted(path.clone()));
        }
        Ok(())
    }

    /// Live files at or below each of `paths`.
    fn expand(&self, paths: &[NumberPath]) -> Result<BTreeSet<NumberPath>> {
        let mut out = BTreeSet::new();
        for p in paths {
            self.tree.node(p)?;
            out.extend(self.tree.live_files_under(p));
        }
        Ok(out)
    }

    /// Extends a user's access list with every live file under `paths`.
    pub fn authorize(&mut self, user: u32, paths: &[NumberPath]) -> Result<()> {
        let files = self.expand(paths)?;
        let r = self.acl.get_mut(&user).ok_or(Error::UnknownUser(user))?;
        r.leaves.extend(files);
        Ok(())
    }

    /// Removes access to every live file under `paths`. The files the user
    /// loses are re-keyed lazily, at their next update.
    pub fn revoke(&mut self, user: u32, paths: &[NumberPath]) -> Result<Envelope> {
        self.link()?;
        let files = self.expand(paths)?;
        let r = self.acl.get_mut(&user).ok_or(Error::UnknownUser(user))?;
        let lost: Vec<NumberPath> = r.leaves.intersection(&files).cloned().collect();
        for p in &lost {
            r.leaves.remove(p);
        }
        r.ar += 1;
        self.pending_rekey.extend(lost);
        self.tick();
        self.seal_for_provider(Message::AccessRightUpdate { user })
    }

    /// Minimum key group and certificate fields for a user's request.
    pub fn authorize_request(&mut self, user: u32, keyword: Option<&str>) -> Result<(KeyGroup, CertificateFields)> {
        let rights = self.acl.get(&user).ok_or(Error::UnknownUser(user))?;
        let mut scope: BTreeSet<NumberPath> =
            rights.leaves.iter().filter(|p| self.tree.is_live_file(p)).cloned().collect();
        if let Some(kw) = keyword {
            if self.profile.ciphertext_retrieval() {
                return Err(Error::ProfileViolation("keywords must not reach the owner under ciphertext retrieval"));
            }
            let kw = normalize_keyword(kw);
            scope.retain(|p| {
                self.tree
                    .get(p)
                    .and_then(|n| n.name.as_deref())
                    .is_some_and(|name| extract_keywords(name).contains(&kw))
            });
        }
        if scope.is_empty() {
            return Err(Error::EmptyGrant);
        }
        let ar = rights.ar;
        let group = ext_keyderivation(&self.tree, &self.update_tree, &self.root_key, &scope)?;
        self.issued.entry(user).or_default().extend(group.paths());
        self.counters.grants += 1;
        let t_cert = self.tick();
        let fields = CertificateFields { user, number_min: group.paths(), t_cert, ar };
        Ok((group, fields))
    }

    pub fn grant(&mut self, user: u32, keyword: Option<&str>, request_id: u64) -> Result<Envelope> {
        self.grant_counted(user, keyword, request_id).map(|(env, _)| env)
    }

    fn grant_counted(&mut self, user: u32, keyword: Option<&str>, request_id: u64) -> Result<(Envelope, usize)> {
        let k_uo = self.user_keys.get(&user).cloned().ok_or(Error::UnknownUser(user))?;
        let (key_min, fields) = self.authorize_request(user, keyword)?;
        let pairs = key_min.len();
        let k_os = self.link()?.k_os.clone();
        let cert = make_certificate(&k_os, &fields, &mut self.rng);
        seal(
            self.profile,
            self.principal(),
            Principal::user(user),
            &k_uo,
            &Message::GrantAuth { request_id, key_min, cert },
            &mut self.rng,
        )
        .map(|env| (env, pairs))
    }

    /// Identity check is possession of the user/owner key: the envelope must
    /// open under it.
    pub fn handle(&mut self, env: &Envelope) -> Result<Handled> {
        if env.sender.role != Role::User {
            return Err(Error::UnknownPrincipal(env.sender));
        }
        let user = env.sender.id;
        let k_uo = self.user_keys.get(&user).ok_or(Error::UnknownUser(user))?;
        match open(k_uo, env)? {
            Message::RequestAuth { request_id, keyword } => {
                let (reply, pairs) = self.grant_counted(user, keyword.as_deref(), request_id)?;
                Ok(Handled { outcome: Outcome::Granted { pairs }, replies: vec![reply] })
            }
            other => Err(Error::UnexpectedMessage(other.kind())),
        }
    }
}
