//! size1/size2: the extirpation-based group against the common-derivation
//! group for the same authorized set.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use treevault::crypto::{KeyRole, Profile, SymKey};
use treevault::key_tree::{build_index, common_number_group, ext_keyderivation, mark_updated, NumberPath, UpdateTree};

use crate::error::Result;
use crate::shape::Shape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioSample {
    pub structure: String,
    pub event: u64,
    pub size1: usize,
    pub size2: usize,
}

impl RatioSample {
    pub fn ratio(&self) -> f64 {
        self.size1 as f64 / self.size2 as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EffectivenessReport {
    pub samples: Vec<RatioSample>,
    /// Mean ratio per structure, in order of first appearance.
    pub means: Vec<(String, f64)>,
}

impl EffectivenessReport {
    pub fn from_samples(samples: Vec<RatioSample>) -> Self {
        let mut means: Vec<(String, f64, usize)> = Vec::new();
        for s in &samples {
            match means.iter_mut().find(|(n, _, _)| *n == s.structure) {
                Some((_, sum, k)) => {
                    *sum += s.ratio();
                    *k += 1;
                }
                None => means.push((s.structure.clone(), s.ratio(), 1)),
            }
        }
        EffectivenessReport { samples, means: means.into_iter().map(|(n, sum, k)| (n, sum / k as f64)).collect() }
    }

    pub fn mean(&self, structure: &str) -> Option<f64> {
        self.means.iter().find(|(n, _)| n == structure).map(|(_, m)| *m)
    }
}

/// Which files each request asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestMix {
    /// Every request asks for the whole folder holding the updated file.
    UpdatedFolder { requests: usize },
    /// Each request asks for everything under one to three random nodes.
    Random { requests: usize },
}

/// Runs `mix` against each structure with the `updated`-th file (depth-first
/// order, taken modulo the file count) re-keyed, or none.
pub fn effectiveness_experiment(
    structures: &[Shape],
    updated: Option<usize>,
    mix: RequestMix,
    seed: u64,
) -> Result<EffectivenessReport> {
    let mut samples = Vec::new();
    for shape in structures {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut tree = build_index(&shape.to_listing(&mut |k| format!("f{k}")))?;
        let root = SymKey::random(Profile::FrameworkI, KeyRole::Root, &mut rng);
        let mut ut = UpdateTree::new();
        let files = tree.live_files();
        let target = match updated {
            Some(i) if !files.is_empty() => {
                let f = files[i % files.len()].clone();
                mark_updated(&mut tree, &mut ut, &f, Profile::FrameworkI, &mut rng)?;
                Some(f)
            }
            _ => None,
        };
        let nodes: Vec<NumberPath> =
            tree.iter().filter(|n| !tree.live_files_under(&n.number).is_empty()).map(|n| n.number.clone()).collect();
        let requests = match mix {
            RequestMix::UpdatedFolder { requests } | RequestMix::Random { requests } => requests,
        };
        for event in 0..requests as u64 {
            let authorized: BTreeSet<NumberPath> = match (mix, &target) {
                (RequestMix::UpdatedFolder { .. }, Some(f)) => {
                    tree.live_files_under(&f.parent().expect("files have parents")).into_iter().collect()
                }
                (RequestMix::UpdatedFolder { .. }, None) => files.iter().cloned().collect(),
                (RequestMix::Random { .. }, _) => {
                    let k = rng.gen_range(1..=3);
                    nodes.choose_multiple(&mut rng, k).flat_map(|n| tree.live_files_under(n)).collect()
                }
            };
            if authorized.is_empty() {
                continue;
            }
            let size1 = ext_keyderivation(&tree, &ut, &root, &authorized)?.len();
            let size2 = common_number_group(&tree, &authorized)?.len();
            samples.push(RatioSample { structure: shape.to_string(), event, size1, size2 });
        }
    }
    Ok(EffectivenessReport::from_samples(samples))
}
