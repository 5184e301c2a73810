//! Overhead accounting: measured counters next to the closed-form estimates
//! for the same quantity.

use std::fmt::Write as _;
use std::ops::AddAssign;

/// Bits one updateAR entry occupies: a 32-bit user id and a 32-bit count.
pub const UPDATE_AR_ENTRY_BITS: u64 = 64;
/// User ids are 32-bit on the wire.
pub const ID_BITS: u64 = 32;
/// Bits per number-path segment on the wire.
pub const SEGMENT_BITS: u64 = 32;

/// Quantities the estimates are expressed in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelContext {
    pub key_bits: u64,
    /// m_i
    pub users: u64,
    pub file_count: u64,
    /// h: segments on the longest root-to-leaf number.
    pub height: u64,
    /// r: hash functions per filter.
    pub hashes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Communication {
    pub grants: u64,
    /// Σ len over grants.
    pub key_group_pairs: u64,
    pub key_group_bits: u64,
    pub number_group_bits: u64,
    pub access_right_changes: u64,
    pub access_right_bits: u64,
    pub data_updates: u64,
    /// Σ (lit + lit′) over updates.
    pub update_ciphertext_bits: u64,
    /// Fresh-key bits the re-keyed files' remaining readers must be sent.
    pub rekey_key_bits: u64,
}

impl Communication {
    pub fn data_update_bits(&self) -> u64 {
        self.update_ciphertext_bits + self.rekey_key_bits
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Computation {
    pub owner_derivation_hashes: u64,
    /// n_j for the owner: files whose key the owner derived to encrypt.
    pub owner_files_keyed: u64,
    pub user_derivation_hashes: u64,
    /// s_j: files users decrypted.
    pub user_files_decrypted: u64,
    pub retrieval_hashes: u64,
    /// n_j for the provider: filters tested.
    pub filters_scanned: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Storage {
    pub owner_key_bits: u64,
    pub update_tree_key_bits: u64,
    pub owner_index_bits: u64,
    pub update_ar_entries: u64,
    pub update_ar_bits: u64,
    /// Σ f_k
    pub provider_file_bits: u64,
    /// Σ bf_k
    pub provider_filter_bits: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OverheadModel {
    pub context: ModelContext,
    pub communication: Communication,
    pub computation: Computation,
    pub storage: Storage,
}

macro_rules! add_fields {
    ($t:ty { $($f:ident),* }) => {
        impl AddAssign for $t {
            fn add_assign(&mut self, o: Self) {
                $(self.$f += o.$f;)*
            }
        }
    };
}

add_fields!(Communication {
    grants,
    key_group_pairs,
    key_group_bits,
    number_group_bits,
    access_right_changes,
    access_right_bits,
    data_updates,
    update_ciphertext_bits,
    rekey_key_bits
});
add_fields!(Computation {
    owner_derivation_hashes,
    owner_files_keyed,
    user_derivation_hashes,
    user_files_decrypted,
    retrieval_hashes,
    filters_scanned
});
add_fields!(Storage {
    owner_key_bits,
    update_tree_key_bits,
    owner_index_bits,
    update_ar_entries,
    update_ar_bits,
    provider_file_bits,
    provider_filter_bits
});

/// One line of the overhead table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OverheadRow {
    pub category: String,
    pub metric: String,
    pub formula: String,
    pub measured: u64,
    pub predicted: Option<f64>,
}

impl OverheadModel {
    /// Table rows: measured counter, our-system estimate, and the formula
    /// the estimate comes from.
    pub fn rows(&self) -> Vec<OverheadRow> {
        let c = &self.context;
        let m = &self.communication;
        let p = &self.computation;
        let s = &self.storage;
        let half_h = c.height as f64 / 2.0;
        let avg_derive = (1.0 + c.height as f64) / 2.0;
        let row = |category: &str, metric: &str, formula: &str, measured: u64, predicted: Option<f64>| OverheadRow {
            category: category.into(),
            metric: metric.into(),
            formula: formula.into(),
            measured,
            predicted,
        };
        vec![
            row(
                "communication",
                "minimum key group (bits)",
                "len*128",
                m.key_group_bits,
                Some(m.key_group_pairs as f64 * 128.0),
            ),
            row(
                "communication",
                "minimum number group (bits)",
                "len*(h/2)*32",
                m.number_group_bits,
                Some(m.key_group_pairs as f64 * half_h * SEGMENT_BITS as f64),
            ),
            row(
                "communication",
                "changing access right (bits)",
                "changes*(p+1)",
                m.access_right_bits,
                Some((m.access_right_changes * (ID_BITS + 1)) as f64),
            ),
            row(
                "communication",
                "data update (bits)",
                "lit+lit'+(1/2)*m_i*128",
                m.data_update_bits(),
                Some(m.update_ciphertext_bits as f64 + m.data_updates as f64 * 0.5 * c.users as f64 * 128.0),
            ),
            row(
                "computation",
                "key derivation, owner (hashes)",
                "n_j*(1/2)*(1+h)",
                p.owner_derivation_hashes,
                Some(p.owner_files_keyed as f64 * avg_derive),
            ),
            row(
                "computation",
                "key derivation, user (hashes)",
                "s_j*(1/2)*(1+h)",
                p.user_derivation_hashes,
                Some(p.user_files_decrypted as f64 * avg_derive),
            ),
            row(
                "computation",
                "ciphertext retrieval, provider (hashes)",
                "(1/2)*n_j*r",
                p.retrieval_hashes,
                Some(0.5 * p.filters_scanned as f64 * c.hashes as f64),
            ),
            row("storage", "key, owner (bits)", "128", s.owner_key_bits, Some(128.0)),
            row("storage", "update tree keys, owner (bits)", "updated*128", s.update_tree_key_bits, None),
            row("storage", "index tree, owner (bits)", "", s.owner_index_bits, None),
            row(
                "storage",
                "updateAR, provider (bits)",
                "(1/2)*m_i*8",
                s.update_ar_bits,
                Some(0.5 * c.users as f64 * 8.0),
            ),
            row(
                "storage",
                "files and filters, provider (bits)",
                "sum(f_k+bf_k)",
                s.provider_file_bits + s.provider_filter_bits,
                Some((s.provider_file_bits + s.provider_filter_bits) as f64),
            ),
        ]
    }
}

/// Human-readable table. The reference-system column is not modelled.
pub fn format_rows(rows: &[OverheadRow]) -> String {
    let w = rows.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
    let f = rows.iter().map(|r| r.formula.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<w$} {:<f$} {:>14} {:>14} {:>9}",
        "category", "metric", "formula", "measured", "predicted", "reference"
    );
    for r in rows {
        let predicted = r.predicted.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(
            out,
            "{:<14} {:<w$} {:<f$} {:>14} {:>14} {:>9}",
            r.category, r.metric, r.formula, r.measured, predicted, "n/a"
        );
    }
    out
}

pub fn overhead_report(model: &OverheadModel) -> String {
    format_rows(&model.rows())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_add() {
        let mut a = Communication { grants: 1, key_group_pairs: 2, ..Default::default() };
        a += Communication { grants: 3, key_group_pairs: 4, rekey_key_bits: 5, ..Default::default() };
        assert_eq!((a.grants, a.key_group_pairs, a.rekey_key_bits), (4, 6, 5));
    }

    #[test]
    fn report_has_every_row_and_no_reference_values() {
        let m = OverheadModel {
            context: ModelContext { key_bits: 128, users: 4, file_count: 30, height: 3, hashes: 14 },
            communication: Communication { grants: 1, key_group_pairs: 1, key_group_bits: 128, ..Default::default() },
            ..Default::default()
        };
        let text = overhead_report(&m);
        assert_eq!(text.lines().count(), 1 + m.rows().len());
        let key_row = text.lines().find(|l| l.contains("minimum key group")).unwrap();
        assert!(key_row.contains("128") && key_row.ends_with("n/a"));
        let ar_row = m.rows().into_iter().find(|r| r.metric.starts_with("updateAR")).unwrap();
        assert_eq!(ar_row.predicted, Some(16.0));
    }
}
