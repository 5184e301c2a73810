//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};
use treevault::actors::{decide, decrypt_blobs, Deployment, Outcome, OwnerConfig, Verdict};
use treevault::bloom::{fp_rate, optimal_k};
use treevault::crypto::{KeyRole, Profile, SymKey};
use treevault::key_tree::{build_index, ext_keyderivation, Listing, NumberPath, UpdateTree};
use treevault::protocol::{open_bytes, open_certificate, BlobRecord, Certificate, MessageKind, RefusalReason};
use treevault::Error;
use treevault_sim::scenario::{file_content, OWNER};
use treevault_sim::{
    effectiveness_experiment, fp_experiment, run_scenario, security_probes, EventMix, RequestMix, ScenarioConfig, Shape,
};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn p(s: &str) -> NumberPath {
    s.parse().unwrap()
}

fn within(limit: Duration, start: Instant) -> Check {
    let t = start.elapsed();
    ensure!(t <= limit, "took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs());
    Ok(format!("{:.1}s", t.as_secs_f64()))
}

// 1 -------------------------------------------------------------------------

fn effectiveness() -> Check {
    let start = Instant::now();
    let folder = Shape::parse("10").unwrap();
    let r = effectiveness_experiment(&[folder], Some(4), RequestMix::UpdatedFolder { requests: 100 }, 7)
        .map_err(|e| e.to_string())?;
    ensure!(r.samples.len() == 100, "{} samples", r.samples.len());
    for s in &r.samples {
        ensure!(s.size1 * 10 == s.size2 * 2, "sample {} is {}/{}", s.event, s.size1, s.size2);
    }

    let shapes = Shape::parse_many("30;10,10,10;(5,5),(5,(3,2)),10").unwrap();
    let r = effectiveness_experiment(&shapes, Some(0), RequestMix::Random { requests: 100 }, 7)
        .map_err(|e| e.to_string())?;
    let all: f64 = r.samples.iter().map(|s| s.ratio()).sum::<f64>() / r.samples.len() as f64;
    ensure!(all < 1.0, "mean ratio {all}");
    let means: Vec<f64> = r.means.iter().map(|(_, m)| *m).collect();
    let distinct = means.iter().filter(|m| (**m - means[0]).abs() > 1e-9).count();
    ensure!(distinct >= 1, "per-structure means all equal: {means:?}");
    let t = within(Duration::from_secs(5), start)?;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    Ok(format!("100/100 samples at 2/10; random-scope means [{}], overall {all:.3}; {t}", shown.join(", ")))
}

// 2 -------------------------------------------------------------------------

#[derive(Clone)]
enum S {
    File,
    Dir(Vec<S>),
}

fn leaves(s: &S) -> usize {
    match s {
        S::File => 1,
        S::Dir(v) => v.iter().map(leaves).sum(),
    }
}

/// Multisets of `kids` with at least `min` members and at most `max_leaves`
/// leaves in total.
fn multisets(kids: &[(S, usize)], min: usize, max_leaves: usize) -> Vec<Vec<S>> {
    fn rec(
        kids: &[(S, usize)],
        start: usize,
        acc: &mut Vec<S>,
        l: usize,
        min: usize,
        max: usize,
        out: &mut Vec<Vec<S>>,
    ) {
        if acc.len() >= min {
            out.push(acc.clone());
        }
        for i in start..kids.len() {
            if l + kids[i].1 <= max {
                acc.push(kids[i].0.clone());
                rec(kids, i, acc, l + kids[i].1, min, max, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(kids, 0, &mut Vec::new(), 0, min, max_leaves, &mut out);
    out
}

/// Unordered subtrees of height at most `h` (a file has height 1). Folders
/// hold at least two entries unless `unary`; empty folders are left out.
fn subtrees(h: usize, max_leaves: usize, unary: bool) -> Vec<(S, usize)> {
    let mut out = vec![(S::File, 1)];
    if h > 1 {
        let kids = subtrees(h - 1, max_leaves, unary);
        for v in multisets(&kids, if unary { 1 } else { 2 }, max_leaves) {
            let s = S::Dir(v);
            let l = leaves(&s);
            out.push((s, l));
        }
    }
    out
}

/// Top-level entry lists for trees of depth at most 4 below root `1`.
fn shapes(max_leaves: usize, unary: bool) -> Vec<Vec<S>> {
    multisets(&subtrees(3, max_leaves, unary), 1, max_leaves)
}

fn to_listing(items: &[S], next: &mut usize) -> Vec<Listing> {
    items
        .iter()
        .map(|s| {
            *next += 1;
            match s {
                S::File => Listing::file(format!("f{next}")),
                S::Dir(v) => {
                    let name = format!("d{next}");
                    Listing::folder(name, to_listing(v, next))
                }
            }
        })
        .collect()
}

fn oracle_derive(root: &[u8], path: &NumberPath) -> Vec<u8> {
    path.segments()[1..].iter().fold(root.to_vec(), |k, seg| {
        let mut h = Sha256::new();
        h.update(&k);
        h.update(seg.to_be_bytes());
        h.update(&k);
        h.finalize()[..k.len()].to_vec()
    })
}

/// Checks every non-empty leaf subset of one tree; returns the subset count.
fn check_shape(items: &[S], rng: &mut ChaCha20Rng) -> std::result::Result<u64, String> {
    let tree = build_index(&to_listing(items, &mut 0)).map_err(|e| e.to_string())?;
    let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, rng);
    let ut = UpdateTree::new();
    let files = tree.live_files();
    let n = files.len();
    let mut mask = HashMap::new();
    let mut key = HashMap::new();
    for node in tree.iter() {
        let m = files.iter().enumerate().filter(|(_, f)| node.number.covers(f)).fold(0u32, |m, (i, _)| m | 1 << i);
        mask.insert(node.number.clone(), m);
        key.insert(node.number.clone(), oracle_derive(root.as_bytes(), &node.number));
    }
    // Candidate covers containing each leaf, deduplicated.
    let mut cand: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &m in mask.values() {
        for (b, c) in cand.iter_mut().enumerate() {
            if m & 1 << b != 0 && !c.contains(&m) {
                c.push(m);
            }
        }
    }
    // Fewest pairwise-disjoint node leaf sets whose union is exactly `a`.
    let full = 1usize << n;
    let mut best = vec![u8::MAX; full];
    best[0] = 0;
    for a in 1..full {
        let low = a.trailing_zeros() as usize;
        for &c in &cand[low] {
            let c = c as usize;
            if c & !a == 0 && best[a ^ c] != u8::MAX {
                best[a] = best[a].min(best[a ^ c] + 1);
            }
        }
    }

    let mut authorized = BTreeSet::new();
    for i in 1..full {
        let flip = i.trailing_zeros() as usize;
        if !authorized.remove(&files[flip]) {
            authorized.insert(files[flip].clone());
        }
        let a = i ^ (i >> 1);
        let group = ext_keyderivation(&tree, &ut, &root, &authorized).map_err(|e| e.to_string())?;
        let shown = || format!("tree {}, subset {a:#b}", tree_text(items));
        if group.len() != best[a] as usize {
            return Err(format!("{}: group of {}, minimum {}", shown(), group.len(), best[a]));
        }
        let mut closure = 0u32;
        for (path, k) in group.pairs() {
            let m = mask[path];
            if closure & m != 0 {
                return Err(format!("{}: overlapping pair {path}", shown()));
            }
            closure |= m;
            if k.as_bytes() != key[path].as_slice() {
                return Err(format!("{}: wrong key for {path}", shown()));
            }
        }
        if closure as usize != a {
            return Err(format!("{}: closure {closure:#b}", shown()));
        }
        let paths = group.paths();
        for x in &paths {
            if paths.iter().any(|y| x != y && x.covers(y)) {
                return Err(format!("{}: {x} covers another group member", shown()));
            }
        }
    }
    Ok(full as u64 - 1)
}

fn tree_text(items: &[S]) -> String {
    items
        .iter()
        .map(|s| match s {
            S::File => "f".to_string(),
            S::Dir(v) => format!("({})", tree_text(v)),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn key_group_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut report = Vec::new();
    for (max_leaves, unary) in [(12, false), (7, true)] {
        let all = shapes(max_leaves, unary);
        let mut subsets = 0;
        for items in &all {
            subsets += check_shape(items, &mut rng)?;
        }
        report.push(format!(
            "{} {} shapes, {subsets} subsets",
            all.len(),
            if unary { "unrestricted <=7-leaf" } else { "branching <=12-leaf" }
        ));
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("{}; {t}", report.join("; ")))
}

// 3 -------------------------------------------------------------------------

fn bloom_fp() -> Check {
    let start = Instant::now();
    let groups = [100, 200, 300, 400, 500, 1000];
    let rows = fp_experiment(&groups, 20, 14, 1_000_000, 3).map_err(|e| e.to_string())?;
    let mut shown = Vec::new();
    for r in &rows {
        ensure!(r.filter_bits == 20 * r.n, "n={} gives {} filter bits", r.n, r.filter_bits);
        ensure!((r.predicted - 6.7e-5).abs() < 0.1e-5, "n={} predicts {:.3e}", r.n, r.predicted);
        ensure!(
            r.measured >= r.predicted / 3.0 && r.measured <= 3.0 * r.predicted,
            "n={} measured {:.3e} against {:.3e}",
            r.n,
            r.measured,
            r.predicted
        );
        shown.push(format!("{}:{:.1e}", r.n, r.measured));
    }
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("predicted {:.2e}, measured [{}] over 10^6 queries each; {t}", rows[0].predicted, shown.join(" ")))
}

// 4 -------------------------------------------------------------------------

fn optimal_hashes() -> Check {
    let mut shown = Vec::new();
    for ratio in [4u64, 8, 10, 16, 20, 32] {
        for n in [50u64, 100, 1000] {
            let m = ratio * n;
            let c = |k: u32| (1.0 - (1.0 - 1.0 / m as f64).powf((k as u64 * n) as f64)).powi(k as i32);
            let best = (1..=40).min_by(|a, b| c(*a).total_cmp(&c(*b))).unwrap();
            let k = optimal_k(m, n);
            ensure!(k.abs_diff(best) <= 1, "m/n={ratio}, n={n}: optimal_k {k}, exhaustive {best}");
            ensure!((fp_rate(k, n, m) - c(k)).abs() <= 1e-12, "fp_rate disagrees at m/n={ratio}");
            if n == 100 {
                shown.push(format!("{ratio}:{k}/{best}"));
            }
        }
    }
    ensure!(optimal_k(2000, 100) == 14, "m/n=20 gives {}", optimal_k(2000, 100));
    Ok(format!("m/n:optimal/exhaustive [{}]", shown.join(" ")))
}

// 5 -------------------------------------------------------------------------

fn deployment(seed: u64) -> Deployment {
    let mut d = Deployment::new(Profile::FrameworkI, seed);
    d.add_owner(OWNER, OwnerConfig::default());
    d.add_user(2, &[OWNER]).unwrap();
    let listing = Shape::parse("3,(2,2)").unwrap().to_listing(&mut |k| format!("record {k}"));
    d.owner_send(OWNER, |o| o.import(&listing, file_content)).unwrap();
    d
}

fn grant(d: &mut Deployment) -> Certificate {
    let recs = d.user_send(2, |u| u.request_auth(OWNER, None)).unwrap();
    assert!(matches!(recs.last().map(|r| &r.outcome), Some(Outcome::Granted { .. })));
    d.user(2).grant(OWNER).unwrap().cert.clone()
}

fn certificate_table() -> Check {
    use RefusalReason::CertificateExpired;
    // Direct decision function over every state pair.
    for after in [false, true] {
        for times in 0..4u32 {
            for ar in 0..=times {
                let want = if ar < times {
                    Verdict::Refuse(CertificateExpired)
                } else if after {
                    Verdict::ServeWithStaleKeyNotice
                } else {
                    Verdict::Serve
                };
                ensure!(decide(Some(times), ar, after) == want, "entry {times}, AR {ar}, modified-after {after}");
            }
            ensure!(decide(None, times, after) == Verdict::Serve, "no entry, AR {times}, modified-after {after}");
        }
    }
    // The same six cells reached through the provider.
    let mut cells = 0;
    for state in ["absent", "equal", "less"] {
        for after in [false, true] {
            let mut d = deployment(5);
            d.owner_mut(OWNER).authorize(2, &[p("1_1"), p("1_2")]).unwrap();
            let cert = match state {
                "absent" => grant(&mut d),
                "equal" => {
                    d.owner_send(OWNER, |o| o.revoke(2, &[p("1_2_1")])).unwrap();
                    grant(&mut d)
                }
                _ => {
                    let c = grant(&mut d);
                    d.owner_send(OWNER, |o| o.revoke(2, &[p("1_2_1")])).unwrap();
                    c
                }
            };
            if after {
                d.owner_send(OWNER, |o| o.update_file(&p("1_1_2"), b"edited")).unwrap();
            }
            let got = d.provider().validate_certificate(OWNER, 2, &cert, &[]).map_err(|e| e.to_string())?;
            let want = match (state, after) {
                ("less", _) => Verdict::Refuse(CertificateExpired),
                ("equal", true) => Verdict::ServeWithStaleKeyNotice,
                _ => Verdict::Serve,
            };
            ensure!(got == want, "{state}/{after}: {got:?}, expected {want:?}");
            cells += 1;
        }
    }
    Ok(format!("decision table exhaustive for entries 0..4; {cells}/6 cells reproduced by the provider"))
}

// 6 -------------------------------------------------------------------------

fn probes() -> Check {
    let mut runs = 0;
    for seed in 0..20 {
        for profile in [Profile::FrameworkI, Profile::FrameworkII] {
            let r = security_probes(profile, seed).map_err(|e| e.to_string())?;
            for name in ["eavesdropper", "insider"] {
                let x = r.get(name).ok_or(format!("{name} missing"))?;
                ensure!(!x.leaked && x.plaintext_bytes == 0, "{r}");
            }
            ensure!(!r.get("collusion").unwrap().leaked, "{r}");
            ensure!(r.get("collusion-add-without-update").unwrap().leaked, "{r}");
            ensure!(r.passed(), "{r}");
            runs += 1;
        }
    }
    Ok(format!("{runs} runs: no eavesdropper/insider plaintext, collusion leaks only without re-keying on add"))
}

// 7 -------------------------------------------------------------------------

fn record(d: &Deployment, path: &NumberPath) -> BlobRecord {
    let b = d.provider().store(OWNER).unwrap().blob(path).unwrap();
    BlobRecord {
        path: b.path.clone(),
        encrypted_name: b.encrypted_name.clone(),
        ciphertext: b.ciphertext.clone(),
        bloom: None,
    }
}

fn revocation() -> Check {
    let mut d = deployment(9);
    let target = p("1_2_1_1");
    d.owner_mut(OWNER).authorize(2, &[p("1_2")]).unwrap();
    grant(&mut d);
    d.user_send(2, |u| u.fetch_by_numbers(OWNER, vec![])).unwrap();
    let cached = d.user(2).grant(OWNER).unwrap().key_min.clone();
    let before = record(&d, &target);

    d.owner_send(OWNER, |o| o.revoke(2, &[p("1_2")])).unwrap();
    d.owner_send(OWNER, |o| o.update_file(&target, b"written after revocation")).unwrap();
    let after = record(&d, &target);
    ensure!(d.owner(OWNER).update_tree().get(&target).is_some(), "updated file was not re-keyed");

    let (old, _) = decrypt_blobs(&cached, &[before]);
    let plain = old[0].result.as_ref().map_err(|e| format!("pre-update blob: {e}"))?;
    ensure!(plain.content == file_content(&target, &plain.name), "pre-update blob decrypted to other content");
    let (new, _) = decrypt_blobs(&cached, &[after]);
    ensure!(
        matches!(new[0].result, Err(Error::IntegrityFailure)),
        "updated blob: {:?}",
        new[0].result.as_ref().map(|f| &f.name)
    );
    // The provider also refuses the stale certificate outright.
    let recs = d.user_send(2, |u| u.fetch_by_numbers(OWNER, vec![target.clone()])).unwrap();
    let refused = recs.iter().any(|r| r.outcome == Outcome::Refused(RefusalReason::CertificateExpired));
    ensure!(refused, "stale certificate served: {:?}", recs.last().map(|r| &r.outcome));
    Ok("cached keys open the pre-update blob, fail on the re-keyed one; stale certificate refused".into())
}

// 8 -------------------------------------------------------------------------

fn overhead() -> Check {
    let mut shown = Vec::new();
    let mut owner_bits = BTreeSet::new();
    for (i, shape) in ["10", "10,(5,5),10", "(20,20),(10,(5,5)),(4,4,4)"].into_iter().enumerate() {
        let mut c = ScenarioConfig::new(Profile::FrameworkI, shape, 40 + i as u64);
        c.users = 3;
        c.events = EventMix { count: 120, request: 4.0, revoke: 1.5, update: 2.0, add: 0.5, delete: 0.5 };
        let out = run_scenario(&c).map_err(|e| e.to_string())?;
        let m = &out.overhead;
        let comm = &m.communication;
        let granted: u64 = out
            .log
            .iter()
            .filter_map(|r| match r.outcome {
                Outcome::Granted { pairs } if r.kind == MessageKind::GrantAuth => Some(pairs as u64),
                _ => None,
            })
            .sum();
        let changes = out.log.iter().filter(|r| matches!(r.outcome, Outcome::RightsUpdated { .. })).count() as u64;
        ensure!(granted > 0 && changes > 0, "{shape}: scenario issued {granted} pairs, {changes} revocations");
        ensure!(
            comm.key_group_pairs == granted,
            "{shape}: {} pairs counted, {granted} on the wire",
            comm.key_group_pairs
        );
        ensure!(comm.key_group_bits == 128 * granted, "{shape}: {} key bits for {granted} pairs", comm.key_group_bits);
        let h = m.context.height;
        ensure!(
            comm.number_group_bits % 32 == 0
                && comm.number_group_bits >= 32 * granted
                && comm.number_group_bits <= 32 * h * granted,
            "{shape}: {} number bits for {granted} numbers of depth <= {h}",
            comm.number_group_bits
        );
        ensure!(
            comm.access_right_changes == changes,
            "{shape}: {} changes counted, {changes} delivered",
            comm.access_right_changes
        );
        ensure!(comm.access_right_bits == 33 * changes, "{shape}: {} access-right bits", comm.access_right_bits);
        let s = &m.storage;
        ensure!(s.owner_key_bits == 128, "{shape}: owner holds {} key bits", s.owner_key_bits);
        ensure!(
            s.update_ar_entries >= 1 && s.update_ar_entries <= c.users as u64,
            "{shape}: {} entries",
            s.update_ar_entries
        );
        ensure!(s.update_ar_bits == 64 * s.update_ar_entries, "{shape}: {} updateAR bits", s.update_ar_bits);
        owner_bits.insert((m.context.file_count, s.owner_key_bits));
        shown.push(format!("{} files/{granted} pairs/{} AR entries", m.context.file_count, s.update_ar_entries));
    }
    ensure!(owner_bits.len() == 3, "file counts coincide: {owner_bits:?}");
    Ok(format!("3 scenarios [{}]", shown.join(", ")))
}

// 9 -------------------------------------------------------------------------

fn golden(name: &str) -> std::result::Result<Vec<u8>, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(format!("{name}.hex"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    hex::decode(text.trim()).map_err(|e| format!("{name}: {e}"))
}

fn flips_fail(bytes: &[u8], open: impl Fn(&[u8]) -> treevault::Result<()>) -> bool {
    let mut b = bytes.to_vec();
    (0..b.len() * 8).all(|i| {
        b[i / 8] ^= 1 << (i % 8);
        let bad = matches!(open(&b), Err(Error::IntegrityFailure));
        b[i / 8] ^= 1 << (i % 8);
        bad
    })
}

fn wire() -> Check {
    let mut seen = BTreeSet::new();
    let mut vectors = 0;
    for profile in [Profile::FrameworkI, Profile::FrameworkII] {
        // Same fixture keys the vectors were sealed under.
        let mut rng = ChaCha20Rng::seed_from_u64(0x7265_6576);
        let k_pair = SymKey::random(profile, KeyRole::Pairwise, &mut rng);
        let k_os = SymKey::random(profile, KeyRole::Pairwise, &mut rng);
        let tag = if profile == Profile::FrameworkI { "I" } else { "II" };
        for kind in MessageKind::ALL {
            let Ok(bytes) = golden(&format!("{}-{tag}", kind.name())) else { continue };
            let first = open_bytes(&k_pair, &bytes).map_err(|e| format!("{}-{tag}: {e}", kind.name()))?;
            let second = open_bytes(&k_pair, &first.0.to_bytes()).map_err(|e| e.to_string())?;
            ensure!(first == second && first.0.kind == kind, "{}-{tag} decodes differently", kind.name());
            ensure!(
                flips_fail(&bytes, |b| open_bytes(&k_pair, b).map(|_| ())),
                "{}-{tag} accepts a flipped bit",
                kind.name()
            );
            seen.insert(kind.name());
            vectors += 1;
        }
        if profile == Profile::FrameworkI {
            let bytes = golden("Certificate-I")?;
            let a = open_certificate(&k_os, &Certificate::from_sealed(bytes.clone())).map_err(|e| e.to_string())?;
            let b = open_certificate(&k_os, &Certificate::from_sealed(bytes.clone())).map_err(|e| e.to_string())?;
            ensure!(a == b, "certificate decodes differently");
            ensure!(
                flips_fail(&bytes, |x| open_certificate(&k_os, &Certificate::from_sealed(x.to_vec())).map(|_| ())),
                "certificate accepts a flipped bit"
            );
            vectors += 1;
        }
    }
    ensure!(seen.len() == MessageKind::ALL.len(), "kinds without vectors: {seen:?}");
    Ok(format!("{vectors} vectors cover all {} kinds and the certificate", seen.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("extirpation effectiveness", effectiveness),
        ("minimum key group oracle", key_group_oracle),
        ("bloom false-positive rate", bloom_fp),
        ("optimal hash count", optimal_hashes),
        ("certificate truth table", certificate_table),
        ("security probes", probes),
        ("revocation safety", revocation),
        ("overhead counters", overhead),
        ("wire-format stability", wire),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
