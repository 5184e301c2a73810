//! Seeded driver that pushes a deployment through a random event mix and
//! accounts for what it cost.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use treevault::actors::{Deployment, EventRecord, Outcome};
use treevault::crypto::Profile;
use treevault::key_tree::{common_number_group, NumberPath};

use crate::config::ScenarioConfig;
use crate::effectiveness::{EffectivenessReport, RatioSample};
use crate::error::Result;
use crate::metrics::{Communication, Computation, ModelContext, OverheadModel, Storage, ID_BITS, UPDATE_AR_ENTRY_BITS};

pub const OWNER: u32 = 1;
/// User ids start here; the provider is principal 1 of its own role.
pub const FIRST_USER: u32 = 2;

pub(crate) const WORDS: &[&str] = &[
    "cloud", "storage", "budget", "report", "diary", "photos", "beach", "travel", "invoice", "contract", "meeting",
    "notes", "research", "draft", "family", "medical", "taxes", "project", "design", "summary", "archive", "letter",
    "recipe", "music",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Request,
    Revoke,
    Update,
    Add,
    Delete,
}

const KINDS: [EventKind; 5] =
    [EventKind::Request, EventKind::Revoke, EventKind::Update, EventKind::Add, EventKind::Delete];

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    /// Deliveries caused by the configured events; setup traffic excluded.
    pub log: Vec<EventRecord>,
    pub overhead: OverheadModel,
    pub effectiveness: EffectivenessReport,
}

/// A random file name of one to three words.
pub fn file_name(rng: &mut impl Rng, k: usize) -> String {
    let n = rng.gen_range(1..=3);
    let mut words: Vec<&str> = WORDS.choose_multiple(rng, n).copied().collect();
    words.push("");
    format!("{}{k}", words.join(" "))
}

pub fn file_content(path: &NumberPath, name: &str) -> Vec<u8> {
    format!("plaintext body of '{name}' stored at {path}").into_bytes()
}

/// Owner 1 with the configured tree stored and users registered. Returns
/// the deployment and the event generator.
pub fn setup(config: &ScenarioConfig) -> Result<(Deployment, ChaCha20Rng)> {
    config.validate()?;
    let profile = config.profile()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut d = Deployment::new(profile, rng.gen());
    d.add_owner(OWNER, config.owner_config()?);
    for u in 0..config.users {
        d.add_user(FIRST_USER + u, &[OWNER])?;
    }
    let listing = config.parsed_shape()?.to_listing(&mut |k| file_name(&mut rng, k));
    d.owner_send(OWNER, |o| o.import(&listing, file_content))?;
    Ok((d, rng))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let (d, rng) = setup(config)?;
    let mut run = Run {
        start_log: d.log().len(),
        base: computation(&d),
        d,
        rng,
        profile: config.profile()?,
        comm: Communication::default(),
        samples: Vec::new(),
        shape: config.shape.clone(),
        files_decrypted: 0,
        added: 0,
    };
    let users: Vec<u32> = (0..config.users).map(|u| FIRST_USER + u).collect();
    if config.events.count > 0 {
        let dist = WeightedIndex::new(config.events.weights()).expect("validated weights");
        for event in 0..config.events.count as u64 {
            let kind = KINDS[dist.sample(&mut run.rng)];
            let user = *users.choose(&mut run.rng).expect("at least one user");
            run.event(event, kind, user)?;
        }
    }
    Ok(run.finish(config))
}

struct Run {
    d: Deployment,
    rng: ChaCha20Rng,
    profile: Profile,
    start_log: usize,
    base: Computation,
    comm: Communication,
    samples: Vec<RatioSample>,
    shape: String,
    files_decrypted: u64,
    added: usize,
}

impl Run {
    fn event(&mut self, event: u64, kind: EventKind, user: u32) -> Result<()> {
        match kind {
            EventKind::Request => self.request(event, user),
            EventKind::Revoke => self.revoke(user),
            EventKind::Update => self.update(),
            EventKind::Add => self.add(),
            EventKind::Delete => self.delete(),
        }
    }

    fn live_nodes(&self) -> Vec<NumberPath> {
        let tree = self.d.owner(OWNER).tree();
        tree.iter()
            .filter(|n| !n.deleted && !tree.live_files_under(&n.number).is_empty())
            .map(|n| n.number.clone())
            .collect()
    }

    fn request(&mut self, event: u64, user: u32) -> Result<()> {
        let nodes = self.live_nodes();
        let Some(scope) = nodes.choose(&mut self.rng).cloned() else {
            return Ok(());
        };
        self.d.owner_mut(OWNER).authorize(user, &[scope])?;
        let recs = self.d.user_send(user, |u| u.request_auth(OWNER, None))?;
        let Some(Outcome::Granted { .. }) = recs.last().map(|r| r.outcome.clone()) else {
            return Ok(());
        };
        let group = self.d.user(user).grant(OWNER).expect("granted").key_min.clone();
        let size1 = group.len();
        self.comm.grants += 1;
        self.comm.key_group_pairs += size1 as u64;
        self.comm.key_group_bits += group.pairs().iter().map(|(_, k)| k.as_bytes().len() as u64 * 8).sum::<u64>();
        self.comm.number_group_bits += group.paths().iter().map(|p| p.encoded_bits()).sum::<u64>();

        let owner = self.d.owner(OWNER);
        let acl = owner.authorized(user)?.clone();
        let size2 = common_number_group(owner.tree(), &acl)?.len();
        self.samples.push(RatioSample { structure: self.shape.clone(), event, size1, size2 });

        let fetch = match self.profile {
            Profile::FrameworkI => self.d.user_send(user, |u| u.fetch_by_numbers(OWNER, vec![]))?,
            Profile::FrameworkII => {
                let w = *WORDS.choose(&mut self.rng).expect("non-empty");
                self.d.user_send(user, |u| u.fetch_by_keyword(OWNER, w))?
            }
        };
        if let Some(Outcome::Decrypted { ok, .. }) = fetch.last().map(|r| &r.outcome) {
            self.files_decrypted += *ok as u64;
        }
        Ok(())
    }

    fn revoke(&mut self, user: u32) -> Result<()> {
        let held: Vec<NumberPath> = self.d.owner(OWNER).authorized(user)?.iter().cloned().collect();
        let Some(leaf) = held.choose(&mut self.rng).cloned() else {
            return Ok(());
        };
        // Half the time take the whole enclosing folder away.
        let target = match leaf.parent() {
            Some(p) if self.rng.gen_bool(0.5) => p,
            _ => leaf,
        };
        self.d.owner_send(OWNER, |o| o.revoke(user, &[target]))?;
        self.comm.access_right_changes += 1;
        self.comm.access_right_bits += ID_BITS + 1;
        Ok(())
    }

    fn blob_bits(&self, path: &NumberPath) -> u64 {
        self.d.provider().store(OWNER).ok().and_then(|s| s.blob(path)).map_or(0, |b| b.ciphertext.len() as u64 * 8)
    }

    fn update(&mut self) -> Result<()> {
        let files = self.d.owner(OWNER).tree().live_files();
        let Some(f) = files.choose(&mut self.rng).cloned() else {
            return Ok(());
        };
        let rekey = self.d.owner(OWNER).pending_rekey().contains(&f);
        let before = self.blob_bits(&f);
        let content = format!("revision {} of {f}", self.rng.gen::<u32>()).into_bytes();
        self.d.owner_send(OWNER, |o| o.update_file(&f, &content))?;
        let after = self.blob_bits(&f);
        self.comm.data_updates += 1;
        self.comm.update_ciphertext_bits += before + after;
        if rekey {
            let owner = self.d.owner(OWNER);
            let readers =
                self.d.users().filter(|u| owner.authorized(u.id()).is_ok_and(|a| a.contains(&f))).count() as u64;
            self.comm.rekey_key_bits += readers * self.profile.key_bits();
        }
        Ok(())
    }

    fn add(&mut self) -> Result<()> {
        let tree = self.d.owner(OWNER).tree();
        let folders: Vec<NumberPath> =
            tree.iter().filter(|n| !n.deleted && !n.is_file()).map(|n| n.number.clone()).collect();
        let parent = folders.choose(&mut self.rng).expect("root is a folder").clone();
        self.added += 1;
        let name = format!("added {}", self.added);
        let (_, env) = self.d.owner_mut(OWNER).add_file(&parent, &name, &file_content(&parent, &name))?;
        self.d.send(env);
        Ok(())
    }

    fn delete(&mut self) -> Result<()> {
        let files = self.d.owner(OWNER).tree().live_files();
        if files.len() <= 1 {
            return Ok(());
        }
        let f = files.choose(&mut self.rng).expect("non-empty").clone();
        self.d.owner_send(OWNER, |o| o.delete_file(&f))?;
        Ok(())
    }

    fn finish(self, config: &ScenarioConfig) -> ScenarioOutput {
        let now = computation(&self.d);
        let mut comp = Computation {
            owner_derivation_hashes: now.owner_derivation_hashes - self.base.owner_derivation_hashes,
            owner_files_keyed: now.owner_files_keyed - self.base.owner_files_keyed,
            user_derivation_hashes: now.user_derivation_hashes - self.base.user_derivation_hashes,
            user_files_decrypted: 0,
            retrieval_hashes: now.retrieval_hashes - self.base.retrieval_hashes,
            filters_scanned: now.filters_scanned - self.base.filters_scanned,
        };
        comp.user_files_decrypted = self.files_decrypted;
        let owner = self.d.owner(OWNER);
        let tree = owner.tree();
        let context = ModelContext {
            key_bits: self.profile.key_bits(),
            users: config.users as u64,
            file_count: tree.live_files().len() as u64,
            height: tree.iter().filter(|n| !n.deleted).map(|n| n.number.depth() as u64).max().unwrap_or(1),
            hashes: owner.config().hashes as u64,
        };
        let model = OverheadModel { context, communication: self.comm, computation: comp, storage: storage(&self.d) };
        ScenarioOutput {
            log: self.d.log()[self.start_log..].to_vec(),
            overhead: model,
            effectiveness: EffectivenessReport::from_samples(self.samples),
        }
    }
}

fn computation(d: &Deployment) -> Computation {
    let o = d.owner(OWNER).counters();
    let p = d.provider().counters();
    Computation {
        owner_derivation_hashes: o.derivation_hashes,
        owner_files_keyed: o.files_encrypted,
        user_derivation_hashes: d.users().map(|u| u.counters().derivation_hashes).sum(),
        user_files_decrypted: 0,
        retrieval_hashes: p.retrieval_hashes,
        filters_scanned: p.filters_scanned,
    }
}

/// State held at the end of a run.
pub fn storage(d: &Deployment) -> Storage {
    let owner = d.owner(OWNER);
    let store = d.provider().store(OWNER).expect("owner registered");
    let entries = store.update_ar().len() as u64;
    Storage {
        owner_key_bits: owner.root_key().as_bytes().len() as u64 * 8,
        update_tree_key_bits: owner.update_tree().iter().map(|(_, k)| k.as_bytes().len() as u64 * 8).sum(),
        owner_index_bits: owner
            .tree()
            .iter()
            .map(|n| n.number.encoded_bits() + n.encrypted_name.len() as u64 * 8)
            .sum(),
        update_ar_entries: entries,
        update_ar_bits: entries * UPDATE_AR_ENTRY_BITS,
        provider_file_bits: store.blobs().map(|b| (b.ciphertext.len() + b.encrypted_name.len()) as u64 * 8).sum(),
        provider_filter_bits: store.blobs().filter_map(|b| b.bloom.as_ref()).map(|f| f.size_bits()).sum(),
    }
}
