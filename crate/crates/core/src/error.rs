use thiserror::Error;

use crate::key_tree::NumberPath;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Authenticated decryption or MAC verification failed. Wrong keys land here too.
    #[error("integrity check failed")]
    IntegrityFailure,
    #[error("key length {actual} does not match profile length {expected}")]
    KeyLength { expected: usize, actual: usize },

    #[error("unknown path {0}")]
    PathUnknown(NumberPath),
    #[error("node {0} is deleted")]
    NodeDeleted(NumberPath),
    #[error("{0} is not a live leaf")]
    UnknownLeaf(NumberPath),
    #[error("node {0} is flagged updated but has no update-tree key")]
    MissingUpdateKey(NumberPath),
    #[error("{0} is not a folder")]
    ParentNotFolder(NumberPath),
    #[error("listing is empty")]
    EmptyListing,
    #[error("invalid number path {0:?}")]
    InvalidPath(String),

    #[error("unknown message kind tag {0}")]
    UnknownKind(u8),
    #[error("unsupported wire format version {0}")]
    UnsupportedVersion(u8),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("message not permitted under the active profile: {0}")]
    ProfileViolation(&'static str),

    #[error("unknown user {0}")]
    UnknownUser(u32),
    #[error("unknown owner {0}")]
    UnknownOwner(u32),
    #[error("unknown principal {0}")]
    UnknownPrincipal(crate::protocol::Principal),
    #[error("{0} is not a file")]
    NotAFile(NumberPath),
    #[error("no grant held from owner {0}")]
    NoGrant(u32),
    #[error("no file qualifies for the request")]
    EmptyGrant,
    #[error("no key in the group covers {0}")]
    NoCoveringKey(NumberPath),
    #[error("requested path {0} is outside the certificate scope")]
    ScopeViolation(NumberPath),
    #[error("unexpected message kind {0}")]
    UnexpectedMessage(crate::protocol::MessageKind),
}
