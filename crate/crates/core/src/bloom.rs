//! Keyword extraction and per-file Bloom filters over encrypted keywords.
//!
//! Bit positions are salted with the file number, so two files sharing a
//! keyword produce unrelated bit patterns.

use std::collections::HashSet;

use crate::crypto::{det_pub_encrypt, indexed_hash, KeywordPublicKey};
use crate::error::{Error, Result};
use crate::key_tree::NumberPath;

pub const MAX_HASHES: u8 = 64;

/// Default filter width: 20 bits per keyword, which with 14 hashes keeps the
/// false-positive rate below 10^-4.
pub const DEFAULT_BITS_PER_KEYWORD: u64 = 20;
pub const DEFAULT_HASHES: u8 = 14;

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "being", "below", "between", "both", "but", "by", "can", "did", "do", "does", "for", "from", "had", "has", "have",
    "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "off", "on",
    "or", "our", "out", "over", "she", "so", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "too", "under", "up", "very", "was", "we", "were", "what", "when", "where", "which", "who",
    "why", "will", "with", "you", "your",
];

pub fn is_stop_word(word: &str) -> bool {
    STOP_WORDS.binary_search(&word).is_ok()
}

/// Splits a file name on non-alphanumeric boundaries, lowercases, drops stop
/// words and removes duplicates (first occurrence wins).
pub fn extract_keywords(filename: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    filename
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !is_stop_word(t))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Normalizes a query keyword the same way names are tokenized.
pub fn normalize_keyword(word: &str) -> String {
    word.trim().to_lowercase()
}

/// A file's keywords in plaintext and deterministically encrypted form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    plain: Vec<String>,
    encrypted: Vec<Vec<u8>>,
}

impl KeywordSet {
    pub fn from_filename(filename: &str, public: &KeywordPublicKey) -> Self {
        let plain = extract_keywords(filename);
        let encrypted = plain.iter().map(|w| det_pub_encrypt(public, w.as_bytes())).collect();
        KeywordSet { plain, encrypted }
    }

    pub fn plain(&self) -> &[String] {
        &self.plain
    }

    pub fn encrypted(&self) -> &[Vec<u8>] {
        &self.encrypted
    }

    pub fn len(&self) -> usize {
        self.plain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plain.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    m: u64,
    k: u8,
    bits: Vec<u8>,
}

fn check_params(m: u64, k: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::Malformed("bloom filter width"));
    }
    if k == 0 || k > MAX_HASHES as u32 {
        return Err(Error::Malformed("bloom filter hash count"));
    }
    Ok(())
}

/// Bit positions for `encrypted_keyword` in file `file_number`'s filter.
///
/// Position `j` is `indexed_hash(j, number || keyword)`, low 64 bits, mod `m`.
pub fn bf_positions(file_number: &NumberPath, encrypted_keyword: &[u8], m: u64, k: u32) -> Vec<u64> {
    let salted = salt(file_number, encrypted_keyword);
    (1..=k).map(|j| indexed_hash(j, &salted).low_u64() % m).collect()
}

fn salt(file_number: &NumberPath, encrypted_keyword: &[u8]) -> Vec<u8> {
    let mut buf = file_number.to_bytes();
    buf.extend_from_slice(encrypted_keyword);
    buf
}

pub fn bf_build(file_number: &NumberPath, encrypted_keywords: &[Vec<u8>], m: u64, k: u32) -> Result<BloomFilter> {
    let mut bf = BloomFilter::empty(m, k)?;
    for kw in encrypted_keywords {
        for pos in bf_positions(file_number, kw, m, k) {
            bf.set(pos);
        }
    }
    Ok(bf)
}

pub fn bf_query(filter: &BloomFilter, file_number: &NumberPath, w: &[u8]) -> bool {
    filter.query_counted(file_number, w).0
}

impl BloomFilter {
    pub fn empty(m: u64, k: u32) -> Result<Self> {
        check_params(m, k)?;
        let len = usize::try_from(m.div_ceil(8)).map_err(|_| Error::Malformed("bloom filter width"))?;
        Ok(BloomFilter { m, k: k as u8, bits: vec![0; len] })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k as u32
    }

    fn set(&mut self, pos: u64) {
        self.bits[(pos / 8) as usize] |= 1 << (pos % 8);
    }

    pub fn get(&self, pos: u64) -> bool {
        pos < self.m && self.bits[(pos / 8) as usize] & (1 << (pos % 8)) != 0
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// Membership test that stops at the first clear bit. Also returns how
    /// many hash evaluations were spent.
    pub fn query_counted(&self, file_number: &NumberPath, w: &[u8]) -> (bool, u64) {
        let salted = salt(file_number, w);
        let mut spent = 0;
        for j in 1..=self.k as u32 {
            spent += 1;
            if !self.get(indexed_hash(j, &salted).low_u64() % self.m) {
                return (false, spent);
            }
        }
        (true, spent)
    }

    /// 8-octet big-endian `m`, 1-octet `k`, then `ceil(m/8)` octets of bits
    /// (bit `i` is bit `i % 8` of octet `i / 8`, least significant first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.bits.len());
        out.extend_from_slice(&self.m.to_be_bytes());
        out.push(self.k);
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(Error::Malformed("bloom filter header"));
        }
        let m = u64::from_be_bytes(bytes[..8].try_into().expect("8 octets"));
        let k = bytes[8];
        check_params(m, k as u32)?;
        let body = &bytes[9..];
        if m.div_ceil(8) != body.len() as u64 {
            return Err(Error::Malformed("bloom filter length"));
        }
        let spare = (body.len() as u64 * 8 - m) as u32;
        if spare > 0 && body[body.len() - 1] >> (8 - spare) != 0 {
            return Err(Error::Malformed("bloom filter padding bits"));
        }
        Ok(BloomFilter { m, k, bits: body.to_vec() })
    }

    /// Storage size in bits (the padding of the last octet is not counted).
    pub fn size_bits(&self) -> u64 {
        self.m
    }
}

/// Filter sizing and its predicted false-positive rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpParameters {
    pub m: u64,
    pub k: u32,
    pub n: u64,
    pub c: f64,
}

/// `(1 - (1 - 1/m)^(k n))^k`, evaluated in log space.
pub fn fp_rate(k: u32, n: u64, m: u64) -> f64 {
    assert!(m >= 1 && k >= 1, "fp_rate needs m >= 1 and k >= 1");
    if n == 0 {
        return 0.0;
    }
    let unset = ((k as f64) * (n as f64) * (-1.0 / m as f64).ln_1p()).exp();
    (1.0 - unset).powi(k as i32)
}

/// `round((m / n) ln 2)`, at least 1.
pub fn optimal_k(m: u64, n: u64) -> u32 {
    assert!(n >= 1, "optimal_k needs n >= 1");
    let k = ((m as f64 / n as f64) * std::f64::consts::LN_2).round();
    (k as u32).clamp(1, MAX_HASHES as u32)
}

/// Smallest whole number of bits per keyword whose optimally-hashed filter
/// predicts a false-positive rate at or below `target_fp`.
pub fn choose_parameters(n: u64, target_fp: f64) -> FpParameters {
    assert!(target_fp > 0.0 && target_fp < 1.0, "target must lie in (0, 1)");
    let n = n.max(1);
    let mut per = 1u64;
    loop {
        let m = per * n;
        let k = optimal_k(m, n);
        let c = fp_rate(k, n, m);
        if c <= target_fp {
            return FpParameters { m, k, n, c };
        }
        per += 1;
    }
}
