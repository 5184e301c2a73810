use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Position of a node in an owner's index, rendered `1_2_1`.
///
/// The root is always `[1]`; each child extends its parent by one segment.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NumberPath(Vec<u32>);

impl NumberPath {
    pub fn root() -> Self {
        NumberPath(vec![1])
    }

    pub fn new(segments: Vec<u32>) -> Result<Self> {
        if segments.first() != Some(&1) || segments.contains(&0) {
            return Err(Error::InvalidPath(format!("{segments:?}")));
        }
        Ok(NumberPath(segments))
    }

    pub fn segments(&self) -> &[u32] {
        &self.0
    }

    /// Number of segments; the root has depth 1.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.len() == 1
    }

    pub fn parent(&self) -> Option<NumberPath> {
        if self.is_root() {
            None
        } else {
            Some(NumberPath(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, segment: u32) -> NumberPath {
        debug_assert!(segment >= 1);
        let mut s = self.0.clone();
        s.push(segment);
        NumberPath(s)
    }

    pub fn last(&self) -> u32 {
        *self.0.last().expect("non-empty")
    }

    /// Ancestor-or-self.
    pub fn covers(&self, other: &NumberPath) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Strict ancestor.
    pub fn is_ancestor_of(&self, other: &NumberPath) -> bool {
        other.0.len() > self.0.len() && other.0.starts_with(&self.0)
    }

    /// Segments of `other` below `self`, when `self` covers `other`.
    pub fn suffix_of<'a>(&self, other: &'a NumberPath) -> Option<&'a [u32]> {
        self.covers(other).then(|| &other.0[self.0.len()..])
    }

    /// Canonical octets: segment count then each segment, all 4-octet big-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.0.len());
        self.write_bytes(&mut out);
        out
    }

    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.0.len() as u32).to_be_bytes());
        for s in &self.0 {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }

    /// Bits used on the wire, excluding the count prefix.
    pub fn encoded_bits(&self) -> u64 {
        32 * self.0.len() as u64
    }
}

impl fmt::Display for NumberPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("_")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for NumberPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for NumberPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let segments = s
            .split('_')
            .map(|p| {
                if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::InvalidPath(s.to_string()));
                }
                p.parse::<u32>().map_err(|_| Error::InvalidPath(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        NumberPath::new(segments).map_err(|_| Error::InvalidPath(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let p: NumberPath = "1_2_1".parse().unwrap();
        assert_eq!(p.segments(), &[1, 2, 1]);
        assert_eq!(p.to_string(), "1_2_1");
        assert_eq!(p.parent().unwrap().to_string(), "1_2");
        assert!(NumberPath::root().parent().is_none());
        for bad in ["", "2", "1__2", "1_0", "1_a", "_1", "1_99999999999", "1_+2"] {
            assert!(bad.parse::<NumberPath>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ancestry() {
        let a: NumberPath = "1_2".parse().unwrap();
        let b: NumberPath = "1_2_3".parse().unwrap();
        let c: NumberPath = "1_22".parse().unwrap();
        assert!(a.is_ancestor_of(&b));
        assert!(a.covers(&a) && !a.is_ancestor_of(&a));
        assert!(!a.covers(&c));
        assert_eq!(a.suffix_of(&b), Some(&[3u32][..]));
        assert_eq!(b.suffix_of(&a), None);
    }

    #[test]
    fn canonical_bytes() {
        let p: NumberPath = "1_2".parse().unwrap();
        assert_eq!(p.to_bytes(), vec![0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2]);
    }
}
