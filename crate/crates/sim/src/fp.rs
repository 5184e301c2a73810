//! Monte-Carlo false-positive measurement for keyword filters.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use treevault::bloom::{bf_build, fp_rate};
use treevault::key_tree::NumberPath;

use crate::error::{invalid, Result};

/// Length of a random stand-in for an encrypted keyword.
const KEYWORD_LEN: usize = 32;
pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FpRow {
    pub n: u64,
    pub m: u64,
    pub k: u32,
    pub predicted: f64,
    pub measured: f64,
    pub trials: u64,
    pub hits: u64,
    pub filter_bits: u64,
    /// Mean hash evaluations per negative query.
    pub hashes_per_query: f64,
}

/// One filter per group of `n` random keywords, sized `m = m_per_n * n`,
/// then `trials` random non-member queries against it.
pub fn fp_experiment(groups: &[u64], m_per_n: u64, k: u32, trials: u64, seed: u64) -> Result<Vec<FpRow>> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("at least {MIN_TRIALS} trials per group")));
    }
    if m_per_n == 0 || k == 0 || groups.contains(&0) {
        return Err(invalid("groups, ratio and k must be positive"));
    }
    let path = NumberPath::new(vec![1, 1])?;
    let mut out = Vec::with_capacity(groups.len());
    for (g, &n) in groups.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (g as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let keywords: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let mut w = vec![0u8; KEYWORD_LEN];
                rng.fill_bytes(&mut w);
                w
            })
            .collect();
        let m = m_per_n * n;
        let filter = bf_build(&path, &keywords, m, k)?;
        let mut hits = 0u64;
        let mut hashes = 0u64;
        let mut q = [0u8; KEYWORD_LEN];
        for _ in 0..trials {
            rng.fill_bytes(&mut q);
            let (hit, spent) = filter.query_counted(&path, &q);
            hits += hit as u64;
            hashes += spent;
        }
        out.push(FpRow {
            n,
            m,
            k,
            predicted: fp_rate(k, n, m),
            measured: hits as f64 / trials as f64,
            trials,
            hits,
            filter_bits: filter.size_bits(),
            hashes_per_query: hashes as f64 / trials as f64,
        });
    }
    Ok(out)
}
