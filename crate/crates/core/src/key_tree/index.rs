use std::collections::HashMap;

use crate::error::{Error, Result};

use super::NumberPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Folder,
    File,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexNode {
    pub number: NumberPath,
    pub kind: NodeKind,
    /// Plaintext name. Only the owner's copy carries it.
    pub name: Option<String>,
    pub encrypted_name: Vec<u8>,
    pub updated: bool,
    pub deleted: bool,
    pub t_modified: u64,
    pub(crate) parent: Option<usize>,
    pub(crate) children: Vec<usize>,
}

impl IndexNode {
    fn new(number: NumberPath, kind: NodeKind, name: Option<String>, parent: Option<usize>) -> Self {
        IndexNode {
            number,
            kind,
            name,
            encrypted_name: Vec::new(),
            updated: false,
            deleted: false,
            t_modified: 0,
            parent,
            children: Vec::new(),
        }
    }

    pub fn is_file(&self) -> bool {
        self.kind == NodeKind::File
    }

    pub fn is_live_file(&self) -> bool {
        self.kind == NodeKind::File && !self.deleted
    }
}

/// Hierarchical name listing handed to [`build_index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Listing {
    File(String),
    Folder(String, Vec<Listing>),
}

impl Listing {
    pub fn file(name: impl Into<String>) -> Self {
        Listing::File(name.into())
    }

    pub fn folder(name: impl Into<String>, children: Vec<Listing>) -> Self {
        Listing::Folder(name.into(), children)
    }
}

/// The owner's multi-tree index. Files are leaves, folders are internal.
///
/// Nodes live in an arena in insertion order; children of a folder are kept
/// sorted by their last segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTree {
    pub(crate) nodes: Vec<IndexNode>,
    by_path: HashMap<NumberPath, usize>,
}

impl IndexTree {
    /// A tree holding only the root folder `[1]`.
    pub fn new() -> Self {
        let root = IndexNode::new(NumberPath::root(), NodeKind::Folder, Some(String::new()), None);
        let mut by_path = HashMap::new();
        by_path.insert(NumberPath::root(), 0);
        IndexTree { nodes: vec![root], by_path }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn root(&self) -> &IndexNode {
        &self.nodes[0]
    }

    pub fn get(&self, path: &NumberPath) -> Option<&IndexNode> {
        self.by_path.get(path).map(|&i| &self.nodes[i])
    }

    pub(crate) fn get_mut(&mut self, path: &NumberPath) -> Option<&mut IndexNode> {
        self.by_path.get(path).map(|&i| &mut self.nodes[i])
    }

    pub(crate) fn index_of(&self, path: &NumberPath) -> Option<usize> {
        self.by_path.get(path).copied()
    }

    pub fn node(&self, path: &NumberPath) -> Result<&IndexNode> {
        self.get(path).ok_or_else(|| Error::PathUnknown(path.clone()))
    }

    pub fn contains(&self, path: &NumberPath) -> bool {
        self.by_path.contains_key(path)
    }

    pub fn children<'a>(&'a self, path: &NumberPath) -> impl Iterator<Item = &'a IndexNode> + 'a {
        let kids: &'a [usize] = self.by_path.get(path).map(|&i| self.nodes[i].children.as_slice()).unwrap_or(&[]);
        kids.iter().map(move |&c| &self.nodes[c])
    }

    /// All nodes in path order.
    pub fn iter(&self) -> impl Iterator<Item = &IndexNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        self.walk(0, &mut out);
        out.into_iter().map(move |i| &self.nodes[i])
    }

    fn walk(&self, idx: usize, out: &mut Vec<usize>) {
        out.push(idx);
        for &c in &self.nodes[idx].children {
            self.walk(c, out);
        }
    }

    /// Live (non-deleted) files in path order.
    pub fn live_files(&self) -> Vec<NumberPath> {
        self.iter().filter(|n| n.is_live_file() && !self.has_deleted_ancestor(n)).map(|n| n.number.clone()).collect()
    }

    /// Live files under `path` (inclusive).
    pub fn live_files_under(&self, path: &NumberPath) -> Vec<NumberPath> {
        self.live_files().into_iter().filter(|f| path.covers(f)).collect()
    }

    pub fn is_live_file(&self, path: &NumberPath) -> bool {
        self.get(path).map(|n| n.is_live_file() && !self.has_deleted_ancestor(n)).unwrap_or(false)
    }

    fn has_deleted_ancestor(&self, n: &IndexNode) -> bool {
        let mut p = n.parent;
        while let Some(i) = p {
            if self.nodes[i].deleted {
                return true;
            }
            p = self.nodes[i].parent;
        }
        false
    }

    /// Height counted in segments (a lone root has height 1).
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.number.depth()).max().unwrap_or(1)
    }

    /// Picks the number for a new child of `parent`: the lowest deleted child
    /// number if any (reuse flag set), otherwise the next sequential number.
    pub fn allocate_number(&self, parent: &NumberPath) -> Result<(NumberPath, bool)> {
        let p = self.node(parent)?;
        if p.kind != NodeKind::Folder || p.deleted {
            return Err(Error::ParentNotFolder(parent.clone()));
        }
        let deleted = p
            .children
            .iter()
            .map(|&c| &self.nodes[c])
            .filter(|c| c.deleted && c.kind == NodeKind::File)
            .map(|c| c.number.last())
            .min();
        if let Some(seg) = deleted {
            return Ok((parent.child(seg), true));
        }
        let next = p.children.iter().map(|&c| self.nodes[c].number.last()).max().unwrap_or(0) + 1;
        Ok((parent.child(next), false))
    }

    /// Allocates a number under `parent` and inserts (or revives) the node.
    pub fn add_node(
        &mut self,
        parent: &NumberPath,
        kind: NodeKind,
        name: impl Into<String>,
    ) -> Result<(NumberPath, bool)> {
        let (path, reuse) = self.allocate_number(parent)?;
        let name = name.into();
        if reuse {
            let n = self.get_mut(&path).expect("allocated from existing child");
            n.deleted = false;
            n.kind = kind;
            n.name = Some(name);
            n.encrypted_name.clear();
        } else {
            self.insert(path.clone(), kind, Some(name))?;
        }
        Ok((path, reuse))
    }

    /// Inserts a node at an explicit number. The parent must exist and be a folder.
    pub(crate) fn insert(&mut self, path: NumberPath, kind: NodeKind, name: Option<String>) -> Result<usize> {
        if self.by_path.contains_key(&path) {
            return Err(Error::Malformed("duplicate number path"));
        }
        let parent = path.parent().ok_or(Error::Malformed("second root"))?;
        let pidx = self.index_of(&parent).ok_or_else(|| Error::PathUnknown(parent.clone()))?;
        if self.nodes[pidx].kind != NodeKind::Folder {
            return Err(Error::ParentNotFolder(parent));
        }
        let idx = self.nodes.len();
        let seg = path.last();
        self.nodes.push(IndexNode::new(path.clone(), kind, name, Some(pidx)));
        self.by_path.insert(path, idx);
        let pos = self.nodes[pidx]
            .children
            .iter()
            .position(|&c| self.nodes[c].number.last() > seg)
            .unwrap_or(self.nodes[pidx].children.len());
        self.nodes[pidx].children.insert(pos, idx);
        Ok(idx)
    }

    pub fn mark_deleted(&mut self, path: &NumberPath) -> Result<()> {
        let n = self.get_mut(path).ok_or_else(|| Error::PathUnknown(path.clone()))?;
        if n.deleted {
            return Err(Error::NodeDeleted(path.clone()));
        }
        n.deleted = true;
        Ok(())
    }

    pub fn set_encrypted_name(&mut self, path: &NumberPath, encrypted: Vec<u8>) -> Result<()> {
        let n = self.get_mut(path).ok_or_else(|| Error::PathUnknown(path.clone()))?;
        n.encrypted_name = encrypted;
        Ok(())
    }

    pub fn set_modified(&mut self, path: &NumberPath, t: u64) -> Result<()> {
        let n = self.get_mut(path).ok_or_else(|| Error::PathUnknown(path.clone()))?;
        n.t_modified = t;
        Ok(())
    }

    pub(crate) fn set_updated(&mut self, path: &NumberPath) -> Result<()> {
        let n = self.get_mut(path).ok_or_else(|| Error::PathUnknown(path.clone()))?;
        if n.deleted {
            return Err(Error::NodeDeleted(path.clone()));
        }
        n.updated = true;
        Ok(())
    }

    /// Finds the child of `parent` carrying plaintext `name`.
    pub fn child_named(&self, parent: &NumberPath, name: &str) -> Option<&IndexNode> {
        self.children(parent).find(|c| !c.deleted && c.name.as_deref() == Some(name))
    }

    /// Finds a node by a `/`-separated plaintext name path relative to the root.
    pub fn find_by_names(&self, names: &str) -> Option<&IndexNode> {
        let mut cur = self.root();
        for part in names.split('/').filter(|p| !p.is_empty()) {
            cur = self.child_named(&cur.number, part)?;
        }
        Some(cur)
    }
}

impl Default for IndexTree {
    fn default() -> Self {
        Self::new()
    }
}

/// Builds the index from a listing. Top-level entries become children of the
/// root folder `[1]`; numbering follows listing order starting at 1.
pub fn build_index(listing: &[Listing]) -> Result<IndexTree> {
    if listing.is_empty() {
        return Err(Error::EmptyListing);
    }
    let mut tree = IndexTree::new();
    fn add(tree: &mut IndexTree, parent: &NumberPath, entries: &[Listing]) -> Result<()> {
        for (i, e) in entries.iter().enumerate() {
            let path = parent.child(i as u32 + 1);
            match e {
                Listing::File(name) => {
                    tree.insert(path, NodeKind::File, Some(name.clone()))?;
                }
                Listing::Folder(name, kids) => {
                    tree.insert(path.clone(), NodeKind::Folder, Some(name.clone()))?;
                    add(tree, &path, kids)?;
                }
            }
        }
        Ok(())
    }
    add(&mut tree, &NumberPath::root(), listing)?;
    Ok(tree)
}
