//! Scripted attacks against a small deployment.
//!
//! The script: users 2 and 3 are granted parts of the tree and fetch; user 2
//! loses folder `1_2`; the owner then updates a file inside it and adds a
//! new file under it; user 3 fetches again and user 2 tries with its stale
//! certificate. The attacks then look at what each party ends up holding.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use treevault::actors::{decrypt_blobs, Deployment, OwnerConfig};
use treevault::bloom::extract_keywords;
use treevault::crypto::{KeyRole, Profile, SymKey};
use treevault::key_tree::NumberPath;
use treevault::protocol::{open_bytes, BlobRecord};

use crate::error::Result;
use crate::scenario::{file_content, file_name, OWNER};
use crate::shape::Shape;

const SHAPE: &str = "4,(3,3),5";
const REVOKED: u32 = 2;
const HONEST: u32 = 3;
/// Shorter strings could match ciphertext by chance.
const MIN_NEEDLE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub name: &'static str,
    pub leaked: bool,
    pub expected_leak: bool,
    pub plaintext_bytes: usize,
    pub detail: String,
}

impl ProbeResult {
    pub fn passed(&self) -> bool {
        self.leaked == self.expected_leak
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub profile: Profile,
    pub seed: u64,
    pub results: Vec<ProbeResult>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(ProbeResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&ProbeResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(
                f,
                "{} framework={} seed={} {}: {} ({} plaintext bytes; {})",
                if r.passed() { "PASS" } else { "FAIL" },
                self.profile,
                self.seed,
                r.name,
                if r.leaked { "LEAK" } else { "no leak" },
                r.plaintext_bytes,
                r.detail
            )?;
        }
        Ok(())
    }
}

/// One version of one file as the owner wrote it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Written {
    path: NumberPath,
    name: String,
    content: Vec<u8>,
}

struct Script {
    d: Deployment,
    written: Vec<Written>,
    /// What user 2 could legitimately read while authorized.
    revoked_view: BTreeSet<Written>,
}

fn p(s: &str) -> NumberPath {
    s.parse().expect("static path")
}

fn fetch(d: &mut Deployment, user: u32, profile: Profile, keyword: &str) -> Result<()> {
    match profile {
        Profile::FrameworkI => d.user_send(user, |u| u.fetch_by_numbers(OWNER, vec![]))?,
        Profile::FrameworkII => d.user_send(user, |u| u.fetch_by_keyword(OWNER, keyword))?,
    };
    Ok(())
}

fn script(profile: Profile, seed: u64, add_by_update: bool) -> Result<Script> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut d = Deployment::new(profile, rng.gen());
    d.add_owner(OWNER, OwnerConfig { add_by_update, ..OwnerConfig::default() });
    d.add_user(REVOKED, &[OWNER])?;
    d.add_user(HONEST, &[OWNER])?;
    let listing = Shape::parse(SHAPE)?.to_listing(&mut |k| file_name(&mut rng, k));
    d.owner_send(OWNER, |o| o.import(&listing, file_content))?;
    let mut written: Vec<Written> = d
        .owner(OWNER)
        .tree()
        .iter()
        .filter(|n| n.is_file())
        .map(|n| {
            let name = n.name.clone().expect("owner copy is named");
            Written { content: file_content(&n.number, &name), path: n.number.clone(), name }
        })
        .collect();
    let name_of = |d: &Deployment, path: &NumberPath| {
        d.owner(OWNER).tree().get(path).and_then(|n| n.name.clone()).expect("named")
    };
    let keyword =
        |d: &Deployment, path: &str| extract_keywords(&name_of(d, &p(path))).into_iter().next().unwrap_or_default();

    d.owner_mut(OWNER).authorize(REVOKED, &[p("1_2"), p("1_1_1")])?;
    d.owner_mut(OWNER).authorize(HONEST, &[p("1")])?;
    for u in [REVOKED, HONEST] {
        d.user_send(u, |x| x.request_auth(OWNER, None))?;
        let kw = keyword(&d, "1_2_1_1");
        fetch(&mut d, u, profile, &kw)?;
    }
    let revoked_acl = d.owner(OWNER).authorized(REVOKED)?.clone();
    let revoked_view = written.iter().filter(|w| revoked_acl.contains(&w.path)).cloned().collect();

    d.owner_send(OWNER, |o| o.revoke(REVOKED, &[p("1_2")]))?;
    let updated = p("1_2_1_1");
    let name = name_of(&d, &updated);
    let content = format!("second version of '{name}' after revocation").into_bytes();
    d.owner_send(OWNER, |o| o.update_file(&updated, &content))?;
    written.push(Written { path: updated, name, content });

    let folder = p("1_2_1");
    let name = format!("added {}", file_name(&mut rng, 0));
    let content = format!("new file '{name}' added after revocation").into_bytes();
    let (path, env) = d.owner_mut(OWNER).add_file(&folder, &name, &content)?;
    d.send(env);
    written.push(Written { path, name, content });

    d.user_send(HONEST, |x| x.request_auth(OWNER, None))?;
    let kw = keyword(&d, "1_2_1_1");
    fetch(&mut d, HONEST, profile, &kw)?;
    fetch(&mut d, REVOKED, profile, &kw)?;
    Ok(Script { d, written, revoked_view })
}

/// Plaintext strings an attacker must not find: names, contents, keywords.
fn needles(written: &[Written]) -> BTreeSet<Vec<u8>> {
    let mut out = BTreeSet::new();
    for w in written {
        out.insert(w.content.clone());
        out.insert(w.name.clone().into_bytes());
        for k in extract_keywords(&w.name) {
            out.insert(k.into_bytes());
        }
    }
    out.retain(|n| n.len() >= MIN_NEEDLE);
    out
}

fn found_in(haystack: &[u8], needles: &BTreeSet<Vec<u8>>, hits: &mut BTreeSet<Vec<u8>>) {
    for n in needles {
        if !hits.contains(n) && haystack.windows(n.len()).any(|w| w == n.as_slice()) {
            hits.insert(n.clone());
        }
    }
}

fn eavesdropper(s: &Script, profile: Profile, rng: &mut ChaCha20Rng) -> ProbeResult {
    let needles = needles(&s.written);
    let mut hits = BTreeSet::new();
    let mut opened = 0;
    for bytes in s.d.wire() {
        found_in(bytes, &needles, &mut hits);
        // Guessing a pairwise key.
        let guess = SymKey::random(profile, KeyRole::Pairwise, rng);
        opened += open_bytes(&guess, bytes).is_ok() as usize;
    }
    let bytes: usize = hits.iter().map(Vec::len).sum();
    ProbeResult {
        name: "eavesdropper",
        leaked: bytes > 0 || opened > 0,
        expected_leak: false,
        plaintext_bytes: bytes,
        detail: format!(
            "{} envelopes captured, {opened} opened, {} plaintext strings found",
            s.d.wire().len(),
            hits.len()
        ),
    }
}

fn insider(s: &Script) -> ProbeResult {
    let needles = needles(&s.written);
    let owner = s.d.owner(OWNER);
    let mut secrets: BTreeSet<Vec<u8>> = BTreeSet::new();
    secrets.insert(owner.root_key().as_bytes().to_vec());
    secrets.insert(owner.keypair().private.as_bytes().to_vec());
    for n in owner.tree().iter().filter(|n| !n.deleted) {
        if let Ok(k) = owner.key_of(&n.number) {
            secrets.insert(k.as_bytes().to_vec());
        }
    }
    for (_, k) in owner.update_tree().iter() {
        secrets.insert(k.as_bytes().to_vec());
    }
    let mut hits = BTreeSet::new();
    let mut key_hits = BTreeSet::new();
    let mut held = 0usize;
    s.d.provider().visit_bytes(&mut |b| {
        held += b.len();
        found_in(b, &needles, &mut hits);
        found_in(b, &secrets, &mut key_hits);
    });
    let bytes: usize = hits.iter().map(Vec::len).sum();
    ProbeResult {
        name: "insider",
        leaked: bytes > 0 || !key_hits.is_empty(),
        expected_leak: false,
        plaintext_bytes: bytes,
        detail: format!("{held} bytes of provider state searched, {} owner secrets found", key_hits.len()),
    }
}

fn collusion(s: &Script, name: &'static str, expected_leak: bool) -> ProbeResult {
    let Some(grant) = s.d.user(REVOKED).grant(OWNER) else {
        return ProbeResult { name, leaked: false, expected_leak, plaintext_bytes: 0, detail: "no keys held".into() };
    };
    let blobs: Vec<BlobRecord> =
        s.d.provider()
            .store(OWNER)
            .expect("owner registered")
            .blobs()
            .map(|b| BlobRecord {
                path: b.path.clone(),
                encrypted_name: b.encrypted_name.clone(),
                ciphertext: b.ciphertext.clone(),
                bloom: None,
            })
            .collect();
    let (files, _) = decrypt_blobs(&grant.key_min, &blobs);
    let mut old_reads = 0;
    let mut leaked = Vec::new();
    let mut bytes = 0;
    for f in files {
        let Ok(plain) = f.result else { continue };
        let seen = Written { path: f.path.clone(), name: plain.name.clone(), content: plain.content.clone() };
        if s.revoked_view.contains(&seen) {
            old_reads += 1;
        } else {
            bytes += plain.name.len() + plain.content.len();
            leaked.push(f.path.to_string());
        }
    }
    ProbeResult {
        name,
        leaked: !leaked.is_empty(),
        expected_leak,
        plaintext_bytes: bytes,
        detail: format!(
            "{} blobs pooled, {old_reads} pre-revocation reads (not a leak), new plaintext at [{}]",
            blobs.len(),
            leaked.join(" ")
        ),
    }
}

/// Runs the three attacks on the standard owner, plus the collusion attack
/// on an owner that adds files without re-keying.
pub fn security_probes(profile: Profile, seed: u64) -> Result<ProbeReport> {
    let standard = script(profile, seed, true)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed.rotate_left(17));
    let mut results =
        vec![eavesdropper(&standard, profile, &mut rng), insider(&standard), collusion(&standard, "collusion", false)];
    let misconfigured = script(profile, seed, false)?;
    results.push(collusion(&misconfigured, "collusion-add-without-update", true));
    Ok(ProbeReport { profile, seed, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_pass_on_both_frameworks() {
        for profile in [Profile::FrameworkI, Profile::FrameworkII] {
            let r = security_probes(profile, 3).unwrap();
            assert!(r.passed(), "{r}");
            let c = r.get("collusion").unwrap();
            assert_eq!(c.plaintext_bytes, 0);
            // 1_1_1 and the five untouched files of 1_2 stay readable with the old keys.
            assert!(c.detail.contains(" 6 pre-revocation reads"), "{}", c.detail);
            let m = r.get("collusion-add-without-update").unwrap();
            assert!(m.leaked && m.detail.contains("1_2_1_4"), "{}", m.detail);
        }
    }

    #[test]
    fn needles_skip_short_strings() {
        let w = Written { path: p("1_1"), name: "a b".into(), content: b"xy".to_vec() };
        assert!(needles(&[w]).is_empty());
    }
}
