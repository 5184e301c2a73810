//! Hierarchical key derivation, keyword search and access control for files
//! outsourced to an untrusted storage provider.
//!
//! Layout: [`crypto`] holds the primitives, [`key_tree`] the numbered index
//! and key derivation, [`bloom`] the per-file keyword filters, [`protocol`]
//! the wire format and [`actors`] the owner, provider and user state machines.

pub mod actors;
pub mod bloom;
pub mod codec;
pub mod crypto;
pub mod error;
pub mod key_tree;
pub mod protocol;

pub use error::{Error, Result};
