use std::collections::BTreeSet;

use crate::crypto::SymKey;
use crate::error::{Error, Result};

use super::{key_for_path_unchecked, IndexTree, NumberPath, UpdateTree};

/// Minimum key group: `(number, key)` pairs from which exactly the granted
/// files' keys derive. Its paths form the minimum number group.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyGroup {
    pairs: Vec<(NumberPath, SymKey)>,
}

impl KeyGroup {
    pub fn new(mut pairs: Vec<(NumberPath, SymKey)>) -> Self {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        KeyGroup { pairs }
    }

    pub fn pairs(&self) -> &[(NumberPath, SymKey)] {
        &self.pairs
    }

    pub fn paths(&self) -> Vec<NumberPath> {
        self.pairs.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Key of `target` from the deepest covering pair, plus the number of
    /// derivation steps spent.
    pub fn derive_for(&self, target: &NumberPath) -> Option<(SymKey, u64)> {
        let (start, key) = self.pairs.iter().filter(|(p, _)| p.covers(target)).max_by_key(|(p, _)| p.depth())?;
        let rest = &target.segments()[start.depth()..];
        Some((super::derive_along(key, rest), rest.len() as u64))
    }
}

/// Per-node live-file totals inside each node's derivation region.
struct Regions {
    total: Vec<u32>,
    granted: Vec<u32>,
}

impl Regions {
    fn compute(tree: &IndexTree, granted: &[bool], extirpate: bool) -> Self {
        let n = tree.nodes.len();
        let mut r = Regions { total: vec![0; n], granted: vec![0; n] };
        r.fill(tree, 0, granted, extirpate);
        r
    }

    fn fill(&mut self, tree: &IndexTree, idx: usize, granted: &[bool], extirpate: bool) {
        let node = &tree.nodes[idx];
        if node.deleted {
            return;
        }
        if node.is_file() {
            self.total[idx] = 1;
            self.granted[idx] = granted[idx] as u32;
        }
        for &c in &node.children {
            self.fill(tree, c, granted, extirpate);
            if !(extirpate && tree.nodes[c].updated) {
                self.total[idx] += self.total[c];
                self.granted[idx] += self.granted[c];
            }
        }
    }

    fn pure(&self, idx: usize) -> bool {
        self.total[idx] > 0 && self.total[idx] == self.granted[idx]
    }
}

struct Cover<'a> {
    tree: &'a IndexTree,
    regions: Regions,
    extirpate: bool,
    chosen: Vec<usize>,
}

impl Cover<'_> {
    /// Shallowest node whose whole region is granted wins; otherwise descend.
    fn solve(&mut self, idx: usize) {
        if self.tree.nodes[idx].deleted {
            return;
        }
        if self.regions.pure(idx) {
            self.chosen.push(idx);
            self.frontier(idx);
        } else {
            for &c in &self.tree.nodes[idx].children {
                self.solve(c);
            }
        }
    }

    /// Re-keyed descendants start their own regions.
    fn frontier(&mut self, idx: usize) {
        if !self.extirpate {
            return;
        }
        for &c in &self.tree.nodes[idx].children {
            let child = &self.tree.nodes[c];
            if child.deleted {
                continue;
            }
            if child.updated {
                self.solve(c);
            } else {
                self.frontier(c);
            }
        }
    }
}

fn granted_mask(tree: &IndexTree, authorized: &BTreeSet<NumberPath>) -> Result<Vec<bool>> {
    let mut mask = vec![false; tree.nodes.len()];
    for p in authorized {
        if !tree.is_live_file(p) {
            return Err(Error::UnknownLeaf(p.clone()));
        }
        mask[tree.index_of(p).expect("live file is indexed")] = true;
    }
    Ok(mask)
}

fn cover(tree: &IndexTree, granted: &[bool], extirpate: bool) -> Vec<NumberPath> {
    let mut c = Cover { tree, regions: Regions::compute(tree, granted, extirpate), extirpate, chosen: Vec::new() };
    c.solve(0);
    let mut out: Vec<NumberPath> = c.chosen.into_iter().map(|i| tree.nodes[i].number.clone()).collect();
    out.sort();
    out
}

/// Smallest antichain of numbers whose live descendant files are exactly
/// `authorized`, ignoring re-keyed nodes. Ties go to the shallower node.
pub fn minimum_number_group(tree: &IndexTree, authorized: &BTreeSet<NumberPath>) -> Result<Vec<NumberPath>> {
    let mask = granted_mask(tree, authorized)?;
    Ok(cover(tree, &mask, false))
}

/// Minimum group under common derivation, where a re-keyed node is reachable
/// only through its own fresh key. A node with a re-keyed node strictly below
/// it cannot be handed out, so its granted files are listed further down.
pub fn common_number_group(tree: &IndexTree, authorized: &BTreeSet<NumberPath>) -> Result<Vec<NumberPath>> {
    let mask = granted_mask(tree, authorized)?;
    let regions = Regions::compute(tree, &mask, false);
    let mut tainted = vec![false; tree.nodes.len()];
    mark_tainted(tree, 0, &mut tainted);
    let mut out = Vec::new();
    common_solve(tree, 0, &regions, &tainted, &mut out);
    out.sort();
    Ok(out)
}

/// Sets `tainted[i]` when some live node strictly below `i` is re-keyed.
fn mark_tainted(tree: &IndexTree, idx: usize, tainted: &mut [bool]) -> bool {
    let mut below = false;
    for &c in &tree.nodes[idx].children {
        if tree.nodes[c].deleted {
            continue;
        }
        let sub = mark_tainted(tree, c, tainted);
        below |= sub || tree.nodes[c].updated;
    }
    tainted[idx] = below;
    below
}

fn common_solve(tree: &IndexTree, idx: usize, regions: &Regions, tainted: &[bool], out: &mut Vec<NumberPath>) {
    if tree.nodes[idx].deleted {
        return;
    }
    if regions.pure(idx) && !tainted[idx] {
        out.push(tree.nodes[idx].number.clone());
        return;
    }
    for &c in &tree.nodes[idx].children {
        common_solve(tree, c, regions, tainted, out);
    }
}

/// Extirpation-based minimum key group.
///
/// Every updated node is cut out of its parent's derivation region and roots
/// a region of its own keyed by its fresh key. Within each region the cover is
/// the set of shallowest nodes whose live files are all granted.
pub fn ext_keyderivation(
    tree: &IndexTree,
    update_tree: &UpdateTree,
    root_key: &SymKey,
    authorized: &BTreeSet<NumberPath>,
) -> Result<KeyGroup> {
    let mask = granted_mask(tree, authorized)?;
    if let Some(n) = tree.nodes.iter().find(|n| n.updated && !n.deleted && update_tree.get(&n.number).is_none()) {
        return Err(Error::MissingUpdateKey(n.number.clone()));
    }
    let pairs = cover(tree, &mask, true)
        .into_iter()
        .map(|p| {
            let k = key_for_path_unchecked(root_key, update_tree, &p);
            (p, k)
        })
        .collect();
    Ok(KeyGroup::new(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{KeyRole, Profile};
    use crate::key_tree::index::tests::example_listing;
    use crate::key_tree::{build_index, key_for_path, mark_updated, Listing, NodeKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn p(s: &str) -> NumberPath {
        s.parse().unwrap()
    }

    fn set(paths: &[&str]) -> BTreeSet<NumberPath> {
        paths.iter().map(|s| p(s)).collect()
    }

    #[test]
    fn common_group_lists_siblings_of_a_rekeyed_file() {
        let files = (0..10).map(|i| Listing::file(format!("f{i}"))).collect();
        let mut t = build_index(&[Listing::folder("d", files)]).unwrap();
        let mut ut = UpdateTree::new();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        mark_updated(&mut t, &mut ut, &p("1_1_4"), Profile::FrameworkI, &mut rng).unwrap();
        let all: BTreeSet<NumberPath> = t.live_files().into_iter().collect();
        assert_eq!(common_number_group(&t, &all).unwrap().len(), 10);
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let ext = ext_keyderivation(&t, &ut, &root, &all).unwrap();
        assert_eq!(ext.paths(), vec![p("1"), p("1_1_4")]);
        // Untouched tree: both notions agree.
        let plain = build_index(&example_listing()).unwrap();
        let some = set(&["1_2_1", "1_2_2", "1_2_3", "1_3_1"]);
        assert_eq!(common_number_group(&plain, &some).unwrap(), minimum_number_group(&plain, &some).unwrap());
    }

    #[test]
    fn whole_folder_collapses_to_folder_key() {
        let t = build_index(&example_listing()).unwrap();
        let g = minimum_number_group(&t, &set(&["1_2_1", "1_2_2", "1_2_3"])).unwrap();
        assert_eq!(g, vec![p("1_2")]);
    }

    #[test]
    fn lone_file_among_siblings() {
        let t = build_index(&[
            Listing::folder("a", vec![Listing::file("x")]),
            Listing::folder("b", vec![]),
            Listing::folder("c", vec![Listing::file("y"), Listing::file("z")]),
        ])
        .unwrap();
        assert_eq!(minimum_number_group(&t, &set(&["1_3_1"])).unwrap(), vec![p("1_3_1")]);
        // Only child: the shallower folder wins the tie.
        assert_eq!(minimum_number_group(&t, &set(&["1_1_1"])).unwrap(), vec![p("1_1")]);
        // Everything: the root.
        assert_eq!(minimum_number_group(&t, &set(&["1_1_1", "1_3_1", "1_3_2"])).unwrap(), vec![p("1")]);
        assert!(minimum_number_group(&t, &BTreeSet::new()).unwrap().is_empty());
    }

    #[test]
    fn unknown_or_non_leaf_rejected() {
        let mut t = build_index(&example_listing()).unwrap();
        assert_eq!(minimum_number_group(&t, &set(&["1_2"])), Err(Error::UnknownLeaf(p("1_2"))));
        assert_eq!(minimum_number_group(&t, &set(&["1_9_9"])), Err(Error::UnknownLeaf(p("1_9_9"))));
        t.mark_deleted(&p("1_2_3")).unwrap();
        assert_eq!(minimum_number_group(&t, &set(&["1_2_3"])), Err(Error::UnknownLeaf(p("1_2_3"))));
        // Deleted siblings no longer block the folder key.
        assert_eq!(minimum_number_group(&t, &set(&["1_2_1", "1_2_2"])).unwrap(), vec![p("1_2")]);
    }

    #[test]
    fn updated_child_is_extirpated() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        let fresh = mark_updated(&mut t, &mut ut, &p("1_2_2"), Profile::FrameworkI, &mut rng).unwrap();

        let g = ext_keyderivation(&t, &ut, &root, &set(&["1_2_1", "1_2_2", "1_2_3"])).unwrap();
        assert_eq!(g.paths(), vec![p("1_2"), p("1_2_2")]);
        assert_eq!(g.pairs()[0].1, key_for_path(&t, &root, &ut, &p("1_2")).unwrap());
        assert_eq!(g.pairs()[1].1, fresh);

        // The folder key no longer reaches the re-keyed file.
        let (via_folder, _) = KeyGroup::new(vec![g.pairs()[0].clone()]).derive_for(&p("1_2_2")).unwrap();
        assert_ne!(via_folder, fresh);
        // But the full group does, through the deepest covering pair.
        assert_eq!(g.derive_for(&p("1_2_2")).unwrap().0, fresh);
        assert_eq!(g.derive_for(&p("1_2_3")).unwrap().0, key_for_path(&t, &root, &ut, &p("1_2_3")).unwrap());
    }

    #[test]
    fn updated_sibling_outside_grant_does_not_block_folder() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let mut t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        mark_updated(&mut t, &mut ut, &p("1_2_2"), Profile::FrameworkI, &mut rng).unwrap();
        // Without extirpation 1_2 would expose 1_2_2; with it the folder key is safe.
        let g = ext_keyderivation(&t, &ut, &root, &set(&["1_2_1", "1_2_3"])).unwrap();
        assert_eq!(g.paths(), vec![p("1_2")]);
        assert_eq!(minimum_number_group(&t, &set(&["1_2_1", "1_2_3"])).unwrap(), vec![p("1_2_1"), p("1_2_3")]);
    }

    #[test]
    fn no_updates_matches_plain_cover() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkII, KeyRole::Root, &mut rng);
        let ut = UpdateTree::new();
        let auth = set(&["1_1_1", "1_1_2", "1_2_1", "1_3_1"]);
        let g = ext_keyderivation(&t, &ut, &root, &auth).unwrap();
        let plain = minimum_number_group(&t, &auth).unwrap();
        assert_eq!(g.paths(), plain);
        for (path, key) in g.pairs() {
            assert_eq!(key, &key_for_path(&t, &root, &ut, path).unwrap());
        }
    }

    #[test]
    fn all_files_updated_gives_one_pair_each() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let names: Vec<Listing> = (0..5).map(|i| Listing::file(format!("f{i}"))).collect();
        let mut t = build_index(&[Listing::folder("d", names), Listing::file("other")]).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        let leaves = t.live_files_under(&p("1_1"));
        for l in &leaves {
            mark_updated(&mut t, &mut ut, l, Profile::FrameworkI, &mut rng).unwrap();
        }
        let g = ext_keyderivation(&t, &ut, &root, &leaves.iter().cloned().collect()).unwrap();
        assert_eq!(g.len(), 5);
        for (path, key) in g.pairs() {
            assert_eq!(ut.get(path), Some(key));
        }
    }

    #[test]
    fn mark_then_request_returns_fresh_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let mut t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        let fresh = mark_updated(&mut t, &mut ut, &p("1_3_1"), Profile::FrameworkI, &mut rng).unwrap();
        let g = ext_keyderivation(&t, &ut, &root, &set(&["1_3_1"])).unwrap();
        assert_eq!(g.pairs(), &[(p("1_3_1"), fresh)]);
    }

    #[test]
    fn missing_update_key_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        let mut t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        t.set_updated(&p("1_1_2")).unwrap();
        assert_eq!(
            ext_keyderivation(&t, &UpdateTree::new(), &root, &set(&["1_1_1"])),
            Err(Error::MissingUpdateKey(p("1_1_2")))
        );
    }

    #[test]
    fn reused_number_after_delete() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let mut t = build_index(&example_listing()).unwrap();
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        t.mark_deleted(&p("1_1_2")).unwrap();
        let (path, reuse) = t.add_node(&p("1_1"), NodeKind::File, "new").unwrap();
        assert!(reuse);
        mark_updated(&mut t, &mut ut, &path, Profile::FrameworkI, &mut rng).unwrap();
        let g = ext_keyderivation(&t, &ut, &root, &set(&["1_1_1", "1_1_2"])).unwrap();
        assert_eq!(g.paths(), vec![p("1_1"), p("1_1_2")]);
    }
}
