//! The probabilistic grammar: start rules over semantic patterns and
//! per-SFT terminal rules over semantic factors, plus the smoothed variant
//! that reserves probability mass for unobserved factors.
//!
//! Probabilities are kept in log space internally so that long factor
//! products stay comparable; the public accessors return linear values.

use std::collections::{BTreeMap, BTreeSet};

use super::{Segmentation, SemanticPattern, Sft};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error("grammar has no start rules")]
    EmptyStart,
    #[error("{context}: probability {value} outside (0, 1]")]
    InvalidProbability { context: String, value: f64 },
    #[error("{context}: rule count must be at least 1")]
    ZeroCount { context: String },
    #[error("{context}: duplicate rule")]
    DuplicateRule { context: String },
    #[error("{context}: probabilities sum to {sum}, expected 1")]
    NotNormalized { context: String, sum: f64 },
    #[error("{context}: probabilities sum to {sum}, which exceeds 1")]
    SumExceedsOne { context: String, sum: f64 },
    #[error("OSF weight {value} for {sft} outside [0, 1]")]
    InvalidWeight { sft: Sft, value: f64 },
    #[error("{sft} has weight {weight} < 1 but no unobserved factors to take the residual mass")]
    NoUsfMass { sft: Sft, weight: f64 },
}

const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Rule {
    prob: f64,
    log_prob: f64,
    count: u64,
}

impl Rule {
    fn new(prob: f64, count: u64) -> Self {
        Rule {
            prob,
            log_prob: prob.ln(),
            count,
        }
    }
}

/// The PCFG: `S -> SP_k` start rules and `SFT_i -> SF_j` terminal rules,
/// with raw counts retained for smoothing.
#[derive(Debug, Clone, Default)]
pub struct Grammar {
    start: BTreeMap<SemanticPattern, Rule>,
    terminals: BTreeMap<Sft, BTreeMap<String, Rule>>,
}

impl Grammar {
    /// Build a grammar from raw counts; each distribution is normalized by
    /// its own total.
    pub fn from_counts(
        start: BTreeMap<SemanticPattern, u64>,
        terminals: BTreeMap<Sft, BTreeMap<String, u64>>,
    ) -> Result<Self, GrammarError> {
        if start.is_empty() {
            return Err(GrammarError::EmptyStart);
        }
        let mut g = Grammar::default();
        let total: u64 = start.values().sum();
        for (pattern, count) in start {
            if count == 0 {
                return Err(GrammarError::ZeroCount {
                    context: format!("start rule {pattern}"),
                });
            }
            let prob = count as f64 / total as f64;
            g.start.insert(pattern, Rule::new(prob, count));
        }
        for (sft, rules) in terminals {
            if rules.is_empty() {
                continue;
            }
            let total: u64 = rules.values().sum();
            let mut table = BTreeMap::new();
            for (sf, count) in rules {
                if count == 0 {
                    return Err(GrammarError::ZeroCount {
                        context: format!("terminal rule {sft} -> {sf}"),
                    });
                }
                let prob = count as f64 / total as f64;
                table.insert(sf, Rule::new(prob, count));
            }
            g.terminals.insert(sft, table);
        }
        Ok(g)
    }

    /// Build a grammar from explicit probabilities. Distributions may be
    /// sub-stochastic (sum below 1) so partial models can be expressed, but
    /// never super-stochastic.
    pub fn from_probabilities(
        start: impl IntoIterator<Item = (SemanticPattern, f64, u64)>,
        terminals: impl IntoIterator<Item = (Sft, Vec<(String, f64, u64)>)>,
    ) -> Result<Self, GrammarError> {
        let mut g = Grammar::default();
        let mut sum = 0.0;
        for (pattern, prob, count) in start {
            if !(prob > 0.0 && prob <= 1.0) {
                return Err(GrammarError::InvalidProbability {
                    context: format!("start rule {pattern}"),
                    value: prob,
                });
            }
            sum += prob;
            let context = pattern.to_string();
            if g.start.insert(pattern, Rule::new(prob, count)).is_some() {
                return Err(GrammarError::DuplicateRule {
                    context: format!("start rule {context}"),
                });
            }
        }
        if g.start.is_empty() {
            return Err(GrammarError::EmptyStart);
        }
        if sum > 1.0 + NORM_TOL {
            return Err(GrammarError::SumExceedsOne {
                context: "start rules".to_string(),
                sum,
            });
        }
        for (sft, rules) in terminals {
            if rules.is_empty() {
                continue;
            }
            let mut table = BTreeMap::new();
            let mut sum = 0.0;
            for (sf, prob, count) in rules {
                if !(prob > 0.0 && prob <= 1.0) {
                    return Err(GrammarError::InvalidProbability {
                        context: format!("terminal rule {sft} -> {sf}"),
                        value: prob,
                    });
                }
                sum += prob;
                let context = format!("terminal rule {sft} -> {sf}");
                if table.insert(sf, Rule::new(prob, count)).is_some() {
                    return Err(GrammarError::DuplicateRule { context });
                }
            }
            if sum > 1.0 + NORM_TOL {
                return Err(GrammarError::SumExceedsOne {
                    context: format!("terminal rules of {sft}"),
                    sum,
                });
            }
            g.terminals.insert(sft, table);
        }
        Ok(g)
    }

    pub fn patterns(&self) -> impl Iterator<Item = (&SemanticPattern, f64, u64)> {
        self.start.iter().map(|(p, r)| (p, r.prob, r.count))
    }

    pub fn pattern_count(&self) -> usize {
        self.start.len()
    }

    pub fn sfts(&self) -> impl Iterator<Item = Sft> + '_ {
        self.terminals.keys().copied()
    }

    pub fn start_probability(&self, pattern: &SemanticPattern) -> Option<f64> {
        self.start.get(pattern).map(|r| r.prob)
    }

    pub fn start_log_probability(&self, pattern: &SemanticPattern) -> Option<f64> {
        self.start.get(pattern).map(|r| r.log_prob)
    }

    pub fn start_count(&self, pattern: &SemanticPattern) -> Option<u64> {
        self.start.get(pattern).map(|r| r.count)
    }

    /// Factors of one SFT with probability and count, in lexicographic order.
    pub fn terminal_rules(&self, sft: Sft) -> impl Iterator<Item = (&str, f64, u64)> {
        self.terminals
            .get(&sft)
            .into_iter()
            .flat_map(|t| t.iter().map(|(sf, r)| (sf.as_str(), r.prob, r.count)))
    }

    pub fn terminal_probability(&self, sft: Sft, sf: &str) -> Option<f64> {
        self.terminals.get(&sft)?.get(sf).map(|r| r.prob)
    }

    pub fn terminal_log_probability(&self, sft: Sft, sf: &str) -> Option<f64> {
        self.terminals.get(&sft)?.get(sf).map(|r| r.log_prob)
    }

    pub fn terminal_count(&self, sft: Sft, sf: &str) -> Option<u64> {
        self.terminals.get(&sft)?.get(sf).map(|r| r.count)
    }

    pub fn observed_sf_count(&self, sft: Sft) -> usize {
        self.terminals.get(&sft).map_or(0, |t| t.len())
    }

    /// Log probability of a segmented password, or `None` when any
    /// required rule is absent.
    ///
    /// The sum is taken left to right over the factors; every other place
    /// that scores a derivation uses the same order, so equal derivations
    /// compare bit-identically.
    pub fn password_log_probability(&self, seg: &Segmentation) -> Option<f64> {
        let mut lp = self.start_log_probability(&seg.pattern())?;
        for (sf, sft) in seg.parts() {
            lp += self.terminal_log_probability(*sft, sf)?;
        }
        Some(lp)
    }

    /// Probability of a segmented password: `P(S -> SP) * prod P(SFT -> SF)`.
    /// Returns 0 when any rule is absent, signalling "unguessable under this
    /// grammar".
    pub fn password_probability(&self, seg: &Segmentation) -> f64 {
        self.password_log_probability(seg).map_or(0.0, f64::exp)
    }

    /// Verify that every distribution sums to 1 within `tol`.
    pub fn check_normalization(&self, tol: f64) -> Result<(), GrammarError> {
        let sum: f64 = self.start.values().map(|r| r.prob).sum();
        if (sum - 1.0).abs() > tol {
            return Err(GrammarError::NotNormalized {
                context: "start rules".to_string(),
                sum,
            });
        }
        for (sft, table) in &self.terminals {
            let sum: f64 = table.values().map(|r| r.prob).sum();
            if (sum - 1.0).abs() > tol {
                return Err(GrammarError::NotNormalized {
                    context: format!("terminal rules of {sft}"),
                    sum,
                });
            }
        }
        Ok(())
    }
}

/// Descriptor of the candidate universe for one SFT's unobserved factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universe {
    /// Explicit factor list. Observed factors are removed automatically.
    Explicit(BTreeSet<String>),
    /// All digit strings of the given length.
    Digits(u32),
    /// All special-character strings of the given length.
    Symbols(u32),
}

impl Universe {
    /// Number of members remaining after excluding the given observed
    /// factors. Saturates for astronomically large generated classes.
    pub fn unobserved_count<'a>(&self, observed: impl IntoIterator<Item = &'a str>) -> u64 {
        match self {
            Universe::Explicit(set) => {
                let excluded = observed.into_iter().filter(|sf| set.contains(*sf)).count();
                set.len() as u64 - excluded as u64
            }
            Universe::Digits(n) => {
                let kind = ResolvedKind::Digits(*n);
                let total = 10u64.checked_pow(*n).unwrap_or(u64::MAX);
                let seen: BTreeSet<u64> = observed
                    .into_iter()
                    .filter_map(|sf| universe_value(&kind, sf))
                    .collect();
                total - seen.len() as u64
            }
            Universe::Symbols(n) => {
                let kind = ResolvedKind::Symbols(*n);
                let total = 33u64.checked_pow(*n).unwrap_or(u64::MAX);
                let seen: BTreeSet<u64> = observed
                    .into_iter()
                    .filter_map(|sf| universe_value(&kind, sf))
                    .collect();
                total - seen.len() as u64
            }
        }
    }
}

/// The 33 printable ASCII characters that are neither letters nor digits,
/// in ascending code order.
pub(crate) const SYMBOL_ALPHABET: &[u8; 33] = b" !\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

fn symbol_rank(b: u8) -> Option<u64> {
    SYMBOL_ALPHABET
        .iter()
        .position(|&s| s == b)
        .map(|i| i as u64)
}

/// String -> numeric value in the fixed-width code used by a generated
/// universe; `None` if the string is not a member.
fn universe_value(kind: &ResolvedKind, s: &str) -> Option<u64> {
    match kind {
        ResolvedKind::Digits(n) => {
            if s.len() != *n as usize || !s.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            s.parse::<u64>().ok()
        }
        ResolvedKind::Symbols(n) => {
            if s.len() != *n as usize {
                return None;
            }
            let mut v: u64 = 0;
            for b in s.bytes() {
                v = v * 33 + symbol_rank(b)?;
            }
            Some(v)
        }
        ResolvedKind::List => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ResolvedKind {
    List,
    Digits(u32),
    Symbols(u32),
}

/// A universe with the observed factors already excluded, supporting
/// membership tests and rank-indexed access in lexicographic order without
/// materializing generated classes.
#[derive(Debug, Clone)]
struct ResolvedUniverse {
    kind: ResolvedKind,
    /// For `List`: the unobserved factors, sorted. For generated kinds:
    /// unused.
    list: Vec<String>,
    /// For generated kinds: numeric values of observed members, sorted.
    excluded: Vec<u64>,
    len: u64,
}

impl ResolvedUniverse {
    fn resolve(universe: &Universe, observed: &BTreeMap<String, Rule>) -> Self {
        match universe {
            Universe::Explicit(set) => {
                let list: Vec<String> = set
                    .iter()
                    .filter(|sf| !observed.contains_key(*sf))
                    .cloned()
                    .collect();
                let len = list.len() as u64;
                ResolvedUniverse {
                    kind: ResolvedKind::List,
                    list,
                    excluded: Vec::new(),
                    len,
                }
            }
            Universe::Digits(n) => {
                let kind = ResolvedKind::Digits(*n);
                let mut excluded: Vec<u64> = observed
                    .keys()
                    .filter_map(|sf| universe_value(&kind, sf))
                    .collect();
                excluded.sort_unstable();
                excluded.dedup();
                let total = 10u64.checked_pow(*n).unwrap_or(u64::MAX);
                let len = total - excluded.len() as u64;
                ResolvedUniverse {
                    kind,
                    list: Vec::new(),
                    excluded,
                    len,
                }
            }
            Universe::Symbols(n) => {
                let kind = ResolvedKind::Symbols(*n);
                let mut excluded: Vec<u64> = observed
                    .keys()
                    .filter_map(|sf| universe_value(&kind, sf))
                    .collect();
                excluded.sort_unstable();
                excluded.dedup();
                let total = 33u64.checked_pow(*n).unwrap_or(u64::MAX);
                let len = total - excluded.len() as u64;
                ResolvedUniverse {
                    kind,
                    list: Vec::new(),
                    excluded,
                    len,
                }
            }
        }
    }

    fn contains(&self, sf: &str) -> bool {
        match self.kind {
            ResolvedKind::List => self.list.binary_search_by(|x| x.as_str().cmp(sf)).is_ok(),
            _ => match universe_value(&self.kind, sf) {
                Some(v) => self.excluded.binary_search(&v).is_err(),
                None => false,
            },
        }
    }

    /// The `k`-th member in lexicographic order, `k < len`.
    fn nth(&self, k: u64) -> String {
        match self.kind {
            ResolvedKind::List => self.list[k as usize].clone(),
            ResolvedKind::Digits(n) => {
                let v = nth_excluding(k, &self.excluded);
                format!("{:0width$}", v, width = n as usize)
            }
            ResolvedKind::Symbols(n) => {
                let v = nth_excluding(k, &self.excluded);
                let mut bytes = vec![0u8; n as usize];
                let mut rest = v;
                for slot in bytes.iter_mut().rev() {
                    *slot = SYMBOL_ALPHABET[(rest % 33) as usize];
                    rest /= 33;
                }
                String::from_utf8(bytes).expect("symbol alphabet is ASCII")
            }
        }
    }
}

/// Smallest `v` such that `v` is the `k`-th value (0-based) not present in
/// the sorted exclusion list.
fn nth_excluding(k: u64, excluded: &[u64]) -> u64 {
    let mut v = k;
    loop {
        let skipped = excluded.partition_point(|&e| e <= v) as u64;
        let next = k + skipped;
        if next == v {
            return v;
        }
        v = next;
    }
}

#[derive(Debug, Clone)]
struct SftSmoothing {
    weight: f64,
    log_weight: f64,
    unit_prob: f64,
    unit_log_prob: f64,
    universe: ResolvedUniverse,
}

/// A grammar with OSF/USF smoothing applied: observed factors keep `w_i`
/// of their SFT's mass and the remainder is spread uniformly over the
/// unobserved universe.
#[derive(Debug, Clone)]
pub struct SmoothedGrammar {
    base: Grammar,
    smoothing: BTreeMap<Sft, SftSmoothing>,
}

impl SmoothedGrammar {
    /// Apply smoothing. SFTs missing from `weights` keep `w = 1`; SFTs
    /// missing from `universes` have no unobserved factors, which is an
    /// error when their weight is below 1.
    pub fn smooth(
        base: Grammar,
        weights: &BTreeMap<Sft, f64>,
        universes: &BTreeMap<Sft, Universe>,
    ) -> Result<Self, GrammarError> {
        let mut smoothing = BTreeMap::new();
        let observed_sfts: Vec<Sft> = base.sfts().collect();
        for sft in observed_sfts {
            let weight = weights.get(&sft).copied().unwrap_or(1.0);
            if !(0.0..=1.0).contains(&weight) || weight.is_nan() {
                return Err(GrammarError::InvalidWeight { sft, value: weight });
            }
            let observed = base.terminals.get(&sft).expect("sft listed");
            let universe = match universes.get(&sft) {
                Some(u) => ResolvedUniverse::resolve(u, observed),
                None => ResolvedUniverse {
                    kind: ResolvedKind::List,
                    list: Vec::new(),
                    excluded: Vec::new(),
                    len: 0,
                },
            };
            if universe.len == 0 {
                if weight < 1.0 {
                    return Err(GrammarError::NoUsfMass { sft, weight });
                }
                continue;
            }
            let unit_prob = (1.0 - weight) / universe.len as f64;
            smoothing.insert(
                sft,
                SftSmoothing {
                    weight,
                    log_weight: weight.ln(),
                    unit_prob,
                    unit_log_prob: unit_prob.ln(),
                    universe,
                },
            );
        }
        Ok(SmoothedGrammar { base, smoothing })
    }

    /// Wrap a grammar without reserving any mass for unobserved factors.
    pub fn unsmoothed(base: Grammar) -> Self {
        SmoothedGrammar {
            base,
            smoothing: BTreeMap::new(),
        }
    }

    pub fn base(&self) -> &Grammar {
        &self.base
    }

    pub fn osf_weight(&self, sft: Sft) -> f64 {
        self.smoothing.get(&sft).map_or(1.0, |s| s.weight)
    }

    /// SFTs carrying a smoothing entry (a non-empty unobserved universe).
    pub fn smoothed_sfts(&self) -> impl Iterator<Item = Sft> + '_ {
        self.smoothing.keys().copied()
    }

    /// Reconstruct the universe descriptor of an SFT, e.g. for
    /// serialization. Explicit universes come back as the unobserved
    /// remainder, which resolves to the same smoothing.
    pub fn universe_descriptor(&self, sft: Sft) -> Option<Universe> {
        self.smoothing.get(&sft).map(|s| match s.universe.kind {
            ResolvedKind::List => Universe::Explicit(s.universe.list.iter().cloned().collect()),
            ResolvedKind::Digits(n) => Universe::Digits(n),
            ResolvedKind::Symbols(n) => Universe::Symbols(n),
        })
    }

    pub fn usf_count(&self, sft: Sft) -> u64 {
        self.smoothing.get(&sft).map_or(0, |s| s.universe.len)
    }

    /// Uniform probability of each unobserved factor: `(1 - w_i) / #USFs`.
    pub fn usf_unit_probability(&self, sft: Sft) -> f64 {
        self.smoothing.get(&sft).map_or(0.0, |s| s.unit_prob)
    }

    pub(crate) fn usf_unit_log_probability(&self, sft: Sft) -> Option<f64> {
        self.smoothing.get(&sft).map(|s| s.unit_log_prob)
    }

    /// The `k`-th unobserved factor of `sft` in lexicographic order.
    pub fn usf_nth(&self, sft: Sft, k: u64) -> Option<String> {
        let s = self.smoothing.get(&sft)?;
        if k >= s.universe.len {
            return None;
        }
        Some(s.universe.nth(k))
    }

    /// Smoothed probability of `SFT -> sf`: `w * P(sf | SFT)` when observed,
    /// the uniform USF share when in the universe, 0 otherwise.
    pub fn terminal_probability(&self, sft: Sft, sf: &str) -> f64 {
        if let Some(p) = self.base.terminal_probability(sft, sf) {
            return match self.smoothing.get(&sft) {
                Some(s) => s.weight * p,
                None => p,
            };
        }
        match self.smoothing.get(&sft) {
            Some(s) if s.universe.contains(sf) => s.unit_prob,
            _ => 0.0,
        }
    }

    /// Canonical per-factor log probability; `None` when the factor has no
    /// mass. All derivation scoring flows through this value.
    pub fn terminal_log_probability(&self, sft: Sft, sf: &str) -> Option<f64> {
        if let Some(lp) = self.base.terminal_log_probability(sft, sf) {
            return Some(match self.smoothing.get(&sft) {
                Some(s) => s.log_weight + lp,
                None => lp,
            });
        }
        match self.smoothing.get(&sft) {
            Some(s) if s.unit_prob > 0.0 && s.universe.contains(sf) => Some(s.unit_log_prob),
            _ => None,
        }
    }

    pub fn password_log_probability(&self, seg: &Segmentation) -> Option<f64> {
        let mut lp = self.base.start_log_probability(&seg.pattern())?;
        for (sf, sft) in seg.parts() {
            lp += self.terminal_log_probability(*sft, sf)?;
        }
        Some(lp)
    }

    pub fn password_probability(&self, seg: &Segmentation) -> f64 {
        self.password_log_probability(seg).map_or(0.0, f64::exp)
    }

    /// Check that for every SFT the observed mass plus the USF mass is 1
    /// within `tol` (and that start rules still normalize).
    pub fn check_normalization(&self, tol: f64) -> Result<(), GrammarError> {
        let sum: f64 = self.base.start.values().map(|r| r.prob).sum();
        if (sum - 1.0).abs() > tol {
            return Err(GrammarError::NotNormalized {
                context: "start rules".to_string(),
                sum,
            });
        }
        for (sft, table) in &self.base.terminals {
            let observed: f64 = table.values().map(|r| r.prob).sum();
            let sum = match self.smoothing.get(sft) {
                Some(s) => s.weight * observed + s.universe.len as f64 * s.unit_prob,
                None => observed,
            };
            if (sum - 1.0).abs() > tol {
                return Err(GrammarError::NotNormalized {
                    context: format!("smoothed terminal rules of {sft}"),
                    sum,
                });
            }
        }
        Ok(())
    }
}

impl From<Grammar> for SmoothedGrammar {
    fn from(base: Grammar) -> Self {
        SmoothedGrammar::unsmoothed(base)
    }
}
