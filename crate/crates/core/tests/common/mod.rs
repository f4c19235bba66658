//! Shared helpers for integration tests: seeded random grammars and the
//! brute-force enumeration oracle the generator is checked against.
#![allow(dead_code)] // each test target uses a different subset

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwsem_core::corpus::{load_bundle, ResourceBundle};
use pwsem_core::model::{Grammar, SemanticPattern, Sft, SmoothedGrammar};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_bundle() -> ResourceBundle {
    load_bundle(fixtures_dir().join("manifest")).expect("fixture manifest loads")
}

const SFT_POOL: [Sft; 10] = [
    Sft::EnNoun,
    Sft::EnVerb,
    Sft::Py,
    Sft::Number(1),
    Sft::Number(2),
    Sft::Number(3),
    Sft::Spec(1),
    Sft::Spec(2),
    Sft::Year,
    Sft::Name,
];

/// A random grammar with at most `max_derivations` total derivations.
/// Counts are small integers, so equal-probability ties are common and the
/// deterministic tie-break gets exercised. A shared factor string shows up
/// under several SFTs so duplicate guess strings occur too.
pub fn random_grammar(rng: &mut ChaCha8Rng, max_derivations: u64) -> Grammar {
    loop {
        let sft_count = rng.random_range(1..=4usize);
        let mut sfts: Vec<Sft> = Vec::new();
        while sfts.len() < sft_count {
            let pick = SFT_POOL[rng.random_range(0..SFT_POOL.len())];
            if !sfts.contains(&pick) {
                sfts.push(pick);
            }
        }

        let mut terminals: BTreeMap<Sft, BTreeMap<String, u64>> = BTreeMap::new();
        for (i, &sft) in sfts.iter().enumerate() {
            let mut table = BTreeMap::new();
            let entries = rng.random_range(1..=20usize);
            for e in 0..entries {
                table.insert(format!("t{i}x{e}"), rng.random_range(1..=4u64));
            }
            if rng.random_bool(0.3) {
                // Identical string under different SFTs.
                table.insert("dup".to_string(), rng.random_range(1..=4u64));
            }
            terminals.insert(sft, table);
        }

        let mut start: BTreeMap<SemanticPattern, u64> = BTreeMap::new();
        for _ in 0..rng.random_range(1..=6usize) {
            let len = rng.random_range(1..=3usize);
            let seq: Vec<Sft> = (0..len)
                .map(|_| sfts[rng.random_range(0..sfts.len())])
                .collect();
            *start.entry(SemanticPattern::new(seq).unwrap()).or_insert(0) +=
                rng.random_range(1..=4u64);
        }

        let total: u64 = start
            .keys()
            .map(|p| {
                p.sfts()
                    .iter()
                    .map(|sft| terminals[sft].len() as u64)
                    .product::<u64>()
            })
            .sum();
        if total >= 1 && total <= max_derivations {
            return Grammar::from_counts(start, terminals).unwrap();
        }
    }
}

/// Enumerate every derivation of the grammar (observed factors and
/// materialized unobserved universes alike) and sort by descending
/// probability with the documented tie-break: pattern order, then factor
/// strings. This is the oracle the streaming generator must reproduce
/// exactly.
pub fn brute_force_guesses(grammar: &SmoothedGrammar) -> Vec<(String, f64)> {
    let base = grammar.base();
    let mut rows: Vec<(f64, usize, Vec<String>)> = Vec::new();

    for (rank, (pattern, _, _)) in base.patterns().enumerate() {
        let plp = base.start_log_probability(pattern).unwrap();
        let slots: Vec<Vec<(String, f64)>> = pattern
            .sfts()
            .iter()
            .map(|&sft| {
                let mut entries: Vec<(String, f64)> = base
                    .terminal_rules(sft)
                    .map(|(sf, _, _)| {
                        (
                            sf.to_string(),
                            grammar.terminal_log_probability(sft, sf).unwrap(),
                        )
                    })
                    .collect();
                let unit = grammar.usf_unit_probability(sft);
                if unit > 0.0 {
                    let unit_logp = unit.ln();
                    for k in 0..grammar.usf_count(sft) {
                        entries.push((grammar.usf_nth(sft, k).unwrap(), unit_logp));
                    }
                }
                entries
            })
            .collect();
        if slots.iter().any(|s| s.is_empty()) {
            continue;
        }
        let mut parts: Vec<String> = Vec::with_capacity(slots.len());
        product(&slots, 0, plp, &mut parts, &mut |lp, parts| {
            rows.push((lp, rank, parts.to_vec()));
        });
    }

    rows.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    rows.into_iter()
        .map(|(lp, _, parts)| (parts.concat(), lp.exp()))
        .collect()
}

fn product(
    slots: &[Vec<(String, f64)>],
    depth: usize,
    lp: f64,
    parts: &mut Vec<String>,
    emit: &mut impl FnMut(f64, &[String]),
) {
    if depth == slots.len() {
        emit(lp, parts);
        return;
    }
    for (sf, tlp) in &slots[depth] {
        parts.push(sf.clone());
        product(slots, depth + 1, lp + tlp, parts, emit);
        parts.pop();
    }
}

/// Random printable-ASCII password of length 1..=30.
pub fn random_password(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(1..=30usize);
    (0..len)
        .map(|_| (rng.random_range(32..=126u8)) as char)
        .collect()
}
