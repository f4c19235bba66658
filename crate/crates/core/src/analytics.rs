//! Corpus-level semantic statistics: distributions at the SF/SFT/group/
//! SP/SPL levels, cosine similarity between corpora, and the combined
//! SF-SFT similarity that weighs SFT-level agreement by shared factor mass.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{Grammar, Segmentation, SemanticPattern, Sft, SftGroup};
use crate::trainer::{grammar_from_segmented, pairwise_osf_weights, MeanMode, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("distributions are at different levels ({0:?} vs {1:?})")]
    LevelMismatch(Level, Level),
    #[error("distribution is a zero vector")]
    ZeroVector,
    #[error("need at least two corpora, got {0}")]
    TooFewCorpora(usize),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Granularity of a [`Distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Sf,
    Sft,
    SftGroup,
    Sp,
    Spl,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sf" => Ok(Level::Sf),
            "sft" => Ok(Level::Sft),
            "sft-group" | "group" => Ok(Level::SftGroup),
            "sp" => Ok(Level::Sp),
            "spl" => Ok(Level::Spl),
            other => Err(format!(
                "unknown level `{other}` (expected sf|sft|sft-group|sp|spl)"
            )),
        }
    }
}

/// Key of one probability-mass entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DistKey {
    Sf(Sft, String),
    Sft(Sft),
    Group(SftGroup),
    Sp(SemanticPattern),
    Spl(usize),
}

impl std::fmt::Display for DistKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistKey::Sf(sft, sf) => write!(f, "{sft}:{sf}"),
            DistKey::Sft(sft) => write!(f, "{sft}"),
            DistKey::Group(g) => write!(f, "{g}"),
            DistKey::Sp(p) => write!(f, "{p}"),
            DistKey::Spl(n) => write!(f, "{n}"),
        }
    }
}

/// A discrete probability density over the keys of one level; masses sum
/// to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    level: Level,
    mass: BTreeMap<DistKey, f64>,
}

impl Distribution {
    pub fn level(&self) -> Level {
        self.level
    }

    pub fn mass(&self) -> &BTreeMap<DistKey, f64> {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    /// TSV dump: `key<TAB>probability` in key order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("key\tprobability\n");
        for (key, p) in &self.mass {
            writeln!(out, "{key}\t{p:.16e}").unwrap();
        }
        out
    }
}

/// User-weighted relative frequencies of a segmented corpus at the given
/// level. SF/SFT/group levels count factor occurrences; SP/SPL count
/// passwords.
pub fn distribution(
    corpus: &[(Segmentation, u64)],
    level: Level,
) -> Result<Distribution, AnalyticsError> {
    if corpus.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    let mut counts: BTreeMap<DistKey, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (seg, weight) in corpus {
        match level {
            Level::Sf | Level::Sft | Level::SftGroup => {
                for (sf, sft) in seg.parts() {
                    let key = match level {
                        Level::Sf => DistKey::Sf(*sft, sf.clone()),
                        Level::Sft => DistKey::Sft(*sft),
                        _ => DistKey::Group(sft.group()),
                    };
                    *counts.entry(key).or_insert(0) += weight;
                    total += weight;
                }
            }
            Level::Sp => {
                *counts.entry(DistKey::Sp(seg.pattern())).or_insert(0) += weight;
                total += weight;
            }
            Level::Spl => {
                *counts.entry(DistKey::Spl(seg.len())).or_insert(0) += weight;
                total += weight;
            }
        }
    }
    let mass = counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect();
    Ok(Distribution { level, mass })
}

/// Cosine similarity over the union of keys; missing keys contribute 0.
pub fn cosine_similarity(a: &Distribution, b: &Distribution) -> Result<f64, AnalyticsError> {
    if a.level != b.level {
        return Err(AnalyticsError::LevelMismatch(a.level, b.level));
    }
    let norm_a = norm(&a.mass);
    let norm_b = norm(&b.mass);
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(AnalyticsError::ZeroVector);
    }
    let mut dot = 0.0;
    for (key, pa) in &a.mass {
        if let Some(pb) = b.mass.get(key) {
            dot += pa * pb;
        }
    }
    Ok(dot / (norm_a * norm_b))
}

fn norm(mass: &BTreeMap<DistKey, f64>) -> f64 {
    mass.values().map(|p| p * p).sum::<f64>().sqrt()
}

/// Similarity mode for corpus pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMode {
    /// Plain cosine over the SFT-level densities.
    Sft,
    /// SFT-level cosine with each term weighted by the shared SF mass of
    /// that SFT.
    SfSft,
}

impl std::str::FromStr for SimilarityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sft" => Ok(SimilarityMode::Sft),
            "sf-sft" | "sf_sft" => Ok(SimilarityMode::SfSft),
            other => Err(format!("unknown mode `{other}` (expected sft|sf-sft)")),
        }
    }
}

/// Precomputed per-corpus state shared by pairwise similarity queries.
struct CorpusProfile {
    sft_dist: Distribution,
    grammar: Grammar,
}

fn profile(corpus: &[(Segmentation, u64)]) -> Result<CorpusProfile, AnalyticsError> {
    Ok(CorpusProfile {
        sft_dist: distribution(corpus, Level::Sft)?,
        grammar: grammar_from_segmented(corpus)?,
    })
}

/// Both similarity values for one corpus pair. The SF-SFT numerator reuses
/// each plain term scaled by `w_i`, so it never exceeds the plain value.
fn similarity_pair(a: &CorpusProfile, b: &CorpusProfile) -> Result<(f64, f64), AnalyticsError> {
    let norm_a = norm(&a.sft_dist.mass);
    let norm_b = norm(&b.sft_dist.mass);
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(AnalyticsError::ZeroVector);
    }
    let weights = pairwise_osf_weights(&a.grammar, &b.grammar, MeanMode::Arithmetic);
    let mut dot = 0.0;
    let mut weighted_dot = 0.0;
    for (key, pa) in &a.sft_dist.mass {
        let Some(pb) = b.sft_dist.mass.get(key) else {
            continue;
        };
        let DistKey::Sft(sft) = key else {
            continue;
        };
        let term = pa * pb;
        dot += term;
        weighted_dot += weights.get(sft).copied().unwrap_or(0.0) * term;
    }
    let denom = norm_a * norm_b;
    Ok((dot / denom, weighted_dot / denom))
}

/// Combined SF-SFT similarity of two segmented corpora: cosine of the
/// SFT-level densities with every term weighted by the shared SF mass of
/// its SFT.
pub fn sf_sft_similarity(
    a: &[(Segmentation, u64)],
    b: &[(Segmentation, u64)],
) -> Result<f64, AnalyticsError> {
    let (_, weighted) = similarity_pair(&profile(a)?, &profile(b)?)?;
    Ok(weighted)
}

/// Labelled symmetric similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// TSV suitable for external heatmap plotting: header row of labels,
    /// then one labelled row per corpus.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("corpus");
        for label in &self.labels {
            write!(out, "\t{label}").unwrap();
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.values) {
            write!(out, "{label}").unwrap();
            for v in row {
                write!(out, "\t{v:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise similarity of two or more corpora. The matrix is exactly
/// symmetric: each unordered pair is computed once and mirrored.
pub fn similarity_matrix(
    corpora: &[(String, Vec<(Segmentation, u64)>)],
    mode: SimilarityMode,
) -> Result<SimilarityMatrix, AnalyticsError> {
    if corpora.len() < 2 {
        return Err(AnalyticsError::TooFewCorpora(corpora.len()));
    }
    let profiles: Vec<CorpusProfile> = corpora
        .iter()
        .map(|(_, c)| profile(c))
        .collect::<Result<_, _>>()?;
    let n = profiles.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let (plain, weighted) = similarity_pair(&profiles[i], &profiles[j])?;
            let v = match mode {
                SimilarityMode::Sft => plain,
                SimilarityMode::SfSft => weighted,
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(SimilarityMatrix {
        labels: corpora.iter().map(|(l, _)| l.clone()).collect(),
        values,
    })
}
