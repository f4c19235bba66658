//! Grammar training and smoothing: counts a segmented corpus into a
//! [`Grammar`], estimates per-SFT OSF retention weights by splitting the
//! training set, and spreads the residual mass uniformly over unobserved
//! factors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ResourceBundle;
use crate::model::{
    Grammar, GrammarError, PasswordRecord, Segmentation, SemanticPattern, Sft, SmoothedGrammar,
    Universe,
};
use crate::segmenter::{segment_corpus, SegmentError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("splitting {records} records at ratio {ratio} leaves an empty part")]
    DegenerateSplit { records: usize, ratio: f64 },
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// How multiple users sharing a password contribute to rule counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Duplicate-counted: each user contributes their password once.
    #[default]
    User,
    /// Each distinct password contributes exactly once.
    Unique,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(Weighting::User),
            "unique" => Ok(Weighting::Unique),
            other => Err(format!(
                "unknown weighting `{other}` (expected user|unique)"
            )),
        }
    }
}

/// How the two conditional probabilities of a shared factor are averaged
/// when computing OSF weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanMode {
    #[default]
    Arithmetic,
    /// Mean weighted by each part's total factor count for the SFT.
    Weighted,
}

impl std::str::FromStr for MeanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arithmetic" => Ok(MeanMode::Arithmetic),
            "weighted" => Ok(MeanMode::Weighted),
            other => Err(format!(
                "unknown mean mode `{other}` (expected arithmetic|weighted)"
            )),
        }
    }
}

/// Merge records into (password, weight) pairs under the chosen weighting.
fn dedupe(corpus: &[PasswordRecord], weighting: Weighting) -> Vec<PasswordRecord> {
    let mut by_password: BTreeMap<&str, u64> = BTreeMap::new();
    for record in corpus {
        let entry = by_password.entry(record.password()).or_insert(0);
        match weighting {
            Weighting::User => *entry += record.count(),
            Weighting::Unique => *entry = 1,
        }
    }
    by_password
        .into_iter()
        .map(|(pw, count)| PasswordRecord::new(pw, count).expect("validated on input"))
        .collect()
}

/// Count a segmented corpus into a normalized grammar.
pub fn grammar_from_segmented(corpus: &[(Segmentation, u64)]) -> Result<Grammar, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut start: BTreeMap<SemanticPattern, u64> = BTreeMap::new();
    let mut terminals: BTreeMap<Sft, BTreeMap<String, u64>> = BTreeMap::new();
    for (seg, weight) in corpus {
        *start.entry(seg.pattern()).or_insert(0) += weight;
        for (sf, sft) in seg.parts() {
            *terminals
                .entry(*sft)
                .or_default()
                .entry(sf.clone())
                .or_insert(0) += weight;
        }
    }
    Ok(Grammar::from_counts(start, terminals)?)
}

/// Train a grammar from a password corpus: segment, count, normalize.
pub fn train(
    corpus: &[PasswordRecord],
    bundle: &ResourceBundle,
    weighting: Weighting,
) -> Result<Grammar, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let records = dedupe(corpus, weighting);
    let segmented = segment_corpus(&records, bundle)?;
    grammar_from_segmented(&segmented)
}

/// Shared probability mass of common factors between two grammars, per SFT
/// (the OSF weight `w_{A,B,i}`).
///
/// For every SFT present in both grammars the weight is the sum over shared
/// factors of the averaged conditional probabilities; SFTs present in only
/// one side default to 0.5.
pub fn pairwise_osf_weights(a: &Grammar, b: &Grammar, mean: MeanMode) -> BTreeMap<Sft, f64> {
    let mut weights = BTreeMap::new();
    let sfts: std::collections::BTreeSet<Sft> = a.sfts().chain(b.sfts()).collect();
    for sft in sfts {
        let in_a = a.observed_sf_count(sft) > 0;
        let in_b = b.observed_sf_count(sft) > 0;
        let w = if in_a && in_b {
            let (ca, cb) = match mean {
                MeanMode::Arithmetic => (0.5, 0.5),
                MeanMode::Weighted => {
                    let ta: u64 = a.terminal_rules(sft).map(|(_, _, c)| c).sum();
                    let tb: u64 = b.terminal_rules(sft).map(|(_, _, c)| c).sum();
                    let total = (ta + tb) as f64;
                    (ta as f64 / total, tb as f64 / total)
                }
            };
            let mut sum = 0.0;
            for (sf, pa, _) in a.terminal_rules(sft) {
                if let Some(pb) = b.terminal_probability(sft, sf) {
                    sum += ca * pa + cb * pb;
                }
            }
            sum.clamp(0.0, 1.0)
        } else {
            0.5
        };
        weights.insert(sft, w);
    }
    weights
}

/// Estimate OSF weights by a seeded random split of the training corpus
/// into parts A (`ratio`) and B (the rest), training both and applying the
/// shared-mass formula between them.
pub fn estimate_osf_weights(
    training: &[PasswordRecord],
    ratio: f64,
    bundle: &ResourceBundle,
    seed: u64,
) -> Result<BTreeMap<Sft, f64>, TrainError> {
    estimate_osf_weights_with(training, ratio, bundle, seed, MeanMode::Arithmetic)
}

pub fn estimate_osf_weights_with(
    training: &[PasswordRecord],
    ratio: f64,
    bundle: &ResourceBundle,
    seed: u64,
    mean: MeanMode,
) -> Result<BTreeMap<Sft, f64>, TrainError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrainError::InvalidRatio(ratio));
    }
    let n = training.len();
    let a_size = (ratio * n as f64).round() as usize;
    if a_size == 0 || a_size >= n {
        return Err(TrainError::DegenerateSplit { records: n, ratio });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let part_a: Vec<PasswordRecord> = indices[..a_size]
        .iter()
        .map(|&i| training[i].clone())
        .collect();
    let part_b: Vec<PasswordRecord> = indices[a_size..]
        .iter()
        .map(|&i| training[i].clone())
        .collect();
    let ga = train(&part_a, bundle, Weighting::User)?;
    let gb = train(&part_b, bundle, Weighting::User)?;
    Ok(pairwise_osf_weights(&ga, &gb, mean))
}

/// Apply OSF/USF smoothing; thin alias over [`SmoothedGrammar::smooth`].
pub fn smooth(
    grammar: Grammar,
    weights: &BTreeMap<Sft, f64>,
    universes: &BTreeMap<Sft, Universe>,
) -> Result<SmoothedGrammar, GrammarError> {
    SmoothedGrammar::smooth(grammar, weights, universes)
}

/// Default USF universes for a trained grammar:
///
/// * `NUMBER(n)` / `SPEC(n)` with `n <= 4`: the full generated class;
/// * `YEAR`: the configured year range;
/// * lexicon-backed linguistic SFTs: the bundle's words for that SFT;
/// * everything else (open or huge classes): no universe, so the weight is
///   forced to 1 unless the caller supplies an explicit universe.
pub fn default_universes(grammar: &Grammar, bundle: &ResourceBundle) -> BTreeMap<Sft, Universe> {
    let mut universes = BTreeMap::new();
    for sft in grammar.sfts() {
        let universe = match sft {
            Sft::Number(n) if n <= 4 => Some(Universe::Digits(n)),
            Sft::Spec(n) if n <= 4 => Some(Universe::Symbols(n)),
            Sft::Year => {
                let (lo, hi) = bundle.year_range();
                Some(Universe::Explicit(
                    (lo..=hi).map(|y| y.to_string()).collect(),
                ))
            }
            // WKNE and UBE are lexicon-backed too, but their real-world
            // universes are huge, so they stay unsmoothed by default.
            s if s.is_linguistic() && !matches!(s, Sft::Wkne | Sft::Ube) => {
                let words: std::collections::BTreeSet<String> =
                    bundle.words_with_sft(s).map(str::to_string).collect();
                (!words.is_empty()).then_some(Universe::Explicit(words))
            }
            _ => None,
        };
        if let Some(u) = universe {
            universes.insert(sft, u);
        }
    }
    universes
}

/// Smooth with weight fallback: SFTs without a usable universe (missing, or
/// fully observed) keep weight 1 instead of erroring.
pub fn smooth_with_defaults(
    grammar: Grammar,
    weights: &BTreeMap<Sft, f64>,
    universes: &BTreeMap<Sft, Universe>,
) -> Result<SmoothedGrammar, GrammarError> {
    let mut effective = weights.clone();
    for sft in grammar.sfts().collect::<Vec<_>>() {
        let w = effective.get(&sft).copied().unwrap_or(1.0);
        if w < 1.0 {
            let usable = universes.get(&sft).map_or(0, |u| {
                u.unobserved_count(grammar.terminal_rules(sft).map(|(sf, _, _)| sf))
            });
            if usable == 0 {
                effective.insert(sft, 1.0);
            }
        }
    }
    SmoothedGrammar::smooth(grammar, &effective, universes)
}
