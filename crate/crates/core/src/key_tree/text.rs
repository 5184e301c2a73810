//! Line-oriented persistence form of an index tree:
//! `path<TAB>kind<TAB>flags<TAB>base64url(encrypted_name)`, one node per line,
//! sorted by path. Flags are `-` or any of `u` (updated) and `d` (deleted).

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use crate::error::{Error, Result};

use super::{IndexTree, NodeKind, NumberPath};

pub fn tree_to_text(tree: &IndexTree) -> String {
    let mut out = String::new();
    for n in tree.iter() {
        let kind = match n.kind {
            NodeKind::Folder => "folder",
            NodeKind::File => "file",
        };
        let mut flags = String::new();
        if n.updated {
            flags.push('u');
        }
        if n.deleted {
            flags.push('d');
        }
        if flags.is_empty() {
            flags.push('-');
        }
        out.push_str(&format!("{}\t{}\t{}\t{}\n", n.number, kind, flags, URL_SAFE_NO_PAD.encode(&n.encrypted_name)));
    }
    out
}

/// Parses the text form. Plaintext names are not part of it, so parsed nodes
/// carry `name = None`.
pub fn tree_from_text(text: &str) -> Result<IndexTree> {
    let mut tree: Option<IndexTree> = None;
    let mut prev: Option<NumberPath> = None;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(path), Some(kind), Some(flags), Some(name), None) =
            (cols.next(), cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(Error::Malformed("tree line"));
        };
        let path: NumberPath = path.parse()?;
        let kind = match kind {
            "folder" => NodeKind::Folder,
            "file" => NodeKind::File,
            _ => return Err(Error::Malformed("node kind")),
        };
        let (updated, deleted) = match flags {
            "-" => (false, false),
            "u" => (true, false),
            "d" => (false, true),
            "ud" => (true, true),
            _ => return Err(Error::Malformed("node flags")),
        };
        let encrypted_name = URL_SAFE_NO_PAD.decode(name).map_err(|_| Error::Malformed("encrypted name"))?;
        if let Some(prev) = &prev {
            if *prev >= path {
                return Err(Error::Malformed("tree lines out of order"));
            }
        }
        let t = match tree.as_mut() {
            None => {
                if !path.is_root() || kind != NodeKind::Folder {
                    return Err(Error::Malformed("first line must be the root folder"));
                }
                tree.insert(IndexTree::new())
            }
            Some(t) => {
                t.insert(path.clone(), kind, None)?;
                t
            }
        };
        let n = t.get_mut(&path).expect("just inserted");
        n.name = None;
        n.updated = updated;
        n.deleted = deleted;
        n.encrypted_name = encrypted_name;
        prev = Some(path);
    }
    tree.ok_or(Error::Malformed("empty tree text"))
}
