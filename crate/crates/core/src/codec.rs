//! Canonical length-prefixed encoding. Integers are fixed-width big-endian,
//! variable fields carry a 4-octet big-endian length, lists a 4-octet count.

use crate::error::{Error, Result};
use crate::key_tree::NumberPath;

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(u32::try_from(v.len()).expect("field shorter than 4 GiB"));
        self.buf.extend_from_slice(v);
        self
    }

    pub fn raw(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn path(&mut self, p: &NumberPath) -> &mut Self {
        p.write_bytes(&mut self.buf);
        self
    }

    pub fn count(&mut self, n: usize) -> &mut Self {
        self.u32(u32::try_from(n).expect("list shorter than 2^32"))
    }

    pub fn paths(&mut self, ps: &[NumberPath]) -> &mut Self {
        self.count(ps.len());
        for p in ps {
            self.path(p);
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::Malformed(what));
        }
        let (head, tail) = self.data.split_at(n);
        self.data = tail;
        Ok(head)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().expect("4 octets")))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8, what)?.try_into().expect("8 octets")))
    }

    pub fn bytes(&mut self, what: &'static str) -> Result<&'a [u8]> {
        let n = self.u32(what)? as usize;
        self.take(n, what)
    }

    pub fn raw(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        self.take(n, what)
    }

    pub fn string(&mut self, what: &'static str) -> Result<String> {
        let b = self.bytes(what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Malformed(what))
    }

    /// List count, bounded by the bytes left so hostile counts cannot force
    /// large allocations.
    pub fn count(&mut self, min_item: usize, what: &'static str) -> Result<usize> {
        let n = self.u32(what)? as usize;
        if n.saturating_mul(min_item.max(1)) > self.data.len() {
            return Err(Error::Malformed(what));
        }
        Ok(n)
    }

    pub fn path(&mut self) -> Result<NumberPath> {
        let n = self.count(4, "number path")?;
        if n == 0 {
            return Err(Error::Malformed("number path"));
        }
        let segs = (0..n).map(|_| self.u32("number path")).collect::<Result<Vec<_>>>()?;
        NumberPath::new(segs).map_err(|_| Error::Malformed("number path"))
    }

    pub fn paths(&mut self) -> Result<Vec<NumberPath>> {
        let n = self.count(8, "path list")?;
        (0..n).map(|_| self.path()).collect()
    }

    pub fn remaining(&self) -> usize {
        self.data.len()
    }

    pub fn finish(self, what: &'static str) -> Result<()> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(Error::Malformed(what))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_primitives() {
        let p: NumberPath = "1_4_2".parse().unwrap();
        let mut w = Writer::new();
        w.u8(7).u32(0x01020304).u64(9).bytes(b"abc").str("zz").path(&p).paths(std::slice::from_ref(&p));
        let buf = w.finish();
        let mut r = Reader::new(&buf);
        assert_eq!(r.u8("a").unwrap(), 7);
        assert_eq!(r.u32("b").unwrap(), 0x01020304);
        assert_eq!(r.u64("c").unwrap(), 9);
        assert_eq!(r.bytes("d").unwrap(), b"abc");
        assert_eq!(r.string("e").unwrap(), "zz");
        assert_eq!(r.path().unwrap(), p);
        assert_eq!(r.paths().unwrap(), vec![p]);
        r.finish("end").unwrap();
    }

    #[test]
    fn hostile_lengths_rejected() {
        assert!(Reader::new(&[0xff, 0xff, 0xff, 0xff]).bytes("x").is_err());
        assert!(Reader::new(&[0xff, 0xff, 0xff, 0xff]).paths().is_err());
        assert!(Reader::new(&[0, 0, 0, 0]).path().is_err());
        assert!(Reader::new(&[0, 0, 0, 1, 0, 0, 0, 2]).path().is_err());
        assert!(Reader::new(&[1]).finish("trailing").is_err());
    }
}
