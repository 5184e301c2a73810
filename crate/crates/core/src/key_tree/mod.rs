//! Multi-tree file index and the key hierarchy laid over it.
//!
//! Every node key is derived from its parent as
//! `hash(k_parent || be32(segment) || k_parent)`, truncated to the profile
//! key length, so a single root key spans the whole tree. Nodes re-keyed after
//! a revocation get a random key stored in the [`UpdateTree`]; derivation below
//! such a node starts from that fresh key.

mod cover;
pub(crate) mod index;
mod path;
mod text;

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};

use crate::crypto::{hash_parts, KeyRole, Profile, SymKey};
use crate::error::{Error, Result};

pub use cover::{common_number_group, ext_keyderivation, minimum_number_group, KeyGroup};
pub use index::{build_index, IndexNode, IndexTree, Listing, NodeKind};
pub use path::NumberPath;
pub use text::{tree_from_text, tree_to_text};

/// Shadow tree of re-keyed nodes: same numbers, fresh random keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateTree {
    entries: BTreeMap<NumberPath, SymKey>,
}

impl UpdateTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, path: &NumberPath) -> Option<&SymKey> {
        self.entries.get(path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NumberPath, &SymKey)> {
        self.entries.iter()
    }

    /// Deepest ancestor-or-self of `path` holding a fresh key.
    pub fn deepest_covering(&self, path: &NumberPath) -> Option<(&NumberPath, &SymKey)> {
        if self.entries.is_empty() {
            return None;
        }
        let segs = path.segments();
        (1..=segs.len()).rev().find_map(|n| {
            let prefix = NumberPath::new(segs[..n].to_vec()).ok()?;
            self.entries.get_key_value(&prefix)
        })
    }
}

pub fn derive_key(parent_key: &SymKey, child_segment: u32) -> SymKey {
    let k = parent_key.as_bytes();
    let d = hash_parts(&[k, &child_segment.to_be_bytes(), k]);
    SymKey::from_bytes(d.0[..k.len()].to_vec(), KeyRole::Derived).expect("profile-length key")
}

/// Folds [`derive_key`] down a sequence of segments.
pub fn derive_along(start: &SymKey, segments: &[u32]) -> SymKey {
    segments.iter().fold(start.clone(), |k, &s| derive_key(&k, s))
}

/// Current key of `path`: derived from the deepest re-keyed ancestor-or-self,
/// or from the root key when there is none.
pub fn key_for_path(
    tree: &IndexTree,
    root_key: &SymKey,
    update_tree: &UpdateTree,
    path: &NumberPath,
) -> Result<SymKey> {
    if !tree.contains(path) {
        return Err(Error::PathUnknown(path.clone()));
    }
    Ok(key_for_path_unchecked(root_key, update_tree, path))
}

pub(crate) fn key_for_path_unchecked(root_key: &SymKey, update_tree: &UpdateTree, path: &NumberPath) -> SymKey {
    match update_tree.deepest_covering(path) {
        Some((start, key)) => derive_along(key, &path.segments()[start.depth()..]),
        None => derive_along(root_key, &path.segments()[1..]),
    }
}

/// Hash evaluations [`key_for_path`] spends on `path`.
pub fn derivation_steps(update_tree: &UpdateTree, path: &NumberPath) -> u64 {
    let start = update_tree.deepest_covering(path).map(|(p, _)| p.depth()).unwrap_or(1);
    (path.depth() - start) as u64
}

/// Flags `path` as updated and stores a fresh random key for it, replacing
/// any earlier fresh key.
pub fn mark_updated<R: RngCore + CryptoRng>(
    tree: &mut IndexTree,
    update_tree: &mut UpdateTree,
    path: &NumberPath,
    profile: Profile,
    rng: &mut R,
) -> Result<SymKey> {
    tree.set_updated(path)?;
    let key = SymKey::random(profile, KeyRole::Fresh, rng);
    update_tree.entries.insert(path.clone(), key.clone());
    Ok(key)
}
