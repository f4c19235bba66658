//! The versioned grammar file format.
//!
//! ```text
//! #pwsem-grammar v1
//! [patterns]
//! KB5+EN_NOUN<TAB>probability<TAB>count
//! [terminals:EN_NOUN]
//! password<TAB>probability<TAB>count
//! [smoothing]
//! EN_NOUN<TAB>weight
//! [universe:NUMBER2]
//! @digits<TAB>2
//! ```
//!
//! Probabilities are printed with 17 significant digits so values round-trip
//! exactly. Unsmoothed grammars simply omit the smoothing and universe
//! sections. Explicit universes list one factor per line; generated classes
//! use the `@digits`/`@symbols` directives.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::model::{Grammar, GrammarError, SemanticPattern, Sft, SmoothedGrammar, Universe};

pub const GRAMMAR_FORMAT_VERSION: &str = "v1";
const HEADER: &str = "#pwsem-grammar v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing or unsupported grammar header (expected `{HEADER}`)")]
    BadHeader,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

/// 17 significant digits; enough for `f64` round trips.
fn fmt_prob(p: f64) -> String {
    format!("{p:.16e}")
}

/// Serialize a grammar (smoothed or not) to the versioned text format.
pub fn grammar_to_string(grammar: &SmoothedGrammar) -> String {
    let base = grammar.base();
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "[patterns]").unwrap();
    for (pattern, prob, count) in base.patterns() {
        writeln!(out, "{pattern}\t{}\t{count}", fmt_prob(prob)).unwrap();
    }
    for sft in base.sfts() {
        writeln!(out, "[terminals:{sft}]").unwrap();
        for (sf, prob, count) in base.terminal_rules(sft) {
            writeln!(out, "{sf}\t{}\t{count}", fmt_prob(prob)).unwrap();
        }
    }
    let smoothed: Vec<Sft> = grammar.smoothed_sfts().collect();
    if !smoothed.is_empty() {
        writeln!(out, "[smoothing]").unwrap();
        for &sft in &smoothed {
            writeln!(out, "{sft}\t{}", fmt_prob(grammar.osf_weight(sft))).unwrap();
        }
        for &sft in &smoothed {
            writeln!(out, "[universe:{sft}]").unwrap();
            match grammar.universe_descriptor(sft).expect("smoothed") {
                Universe::Digits(n) => writeln!(out, "@digits\t{n}").unwrap(),
                Universe::Symbols(n) => writeln!(out, "@symbols\t{n}").unwrap(),
                Universe::Explicit(set) => {
                    for sf in set {
                        writeln!(out, "{sf}").unwrap();
                    }
                }
            }
        }
    }
    out
}

enum Section {
    Preamble,
    Patterns,
    Terminals(Sft),
    Smoothing,
    Universe(Sft),
}

fn parse_section(line: &str, lineno: usize) -> Result<Option<Section>, FormatError> {
    if !(line.starts_with('[') && line.ends_with(']')) {
        return Ok(None);
    }
    let name = &line[1..line.len() - 1];
    if name == "patterns" {
        return Ok(Some(Section::Patterns));
    }
    if name == "smoothing" {
        return Ok(Some(Section::Smoothing));
    }
    if let Some(tag) = name.strip_prefix("terminals:") {
        let sft = tag.parse().map_err(|e| syntax(lineno, format!("{e}")))?;
        return Ok(Some(Section::Terminals(sft)));
    }
    if let Some(tag) = name.strip_prefix("universe:") {
        let sft = tag.parse().map_err(|e| syntax(lineno, format!("{e}")))?;
        return Ok(Some(Section::Universe(sft)));
    }
    Ok(None)
}

/// Parse the text format back into a (possibly smoothed) grammar.
pub fn grammar_from_str(text: &str) -> Result<SmoothedGrammar, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == HEADER => {}
        _ => return Err(FormatError::BadHeader),
    }

    let mut start: Vec<(SemanticPattern, f64, u64)> = Vec::new();
    let mut terminals: BTreeMap<Sft, Vec<(String, f64, u64)>> = BTreeMap::new();
    let mut weights: BTreeMap<Sft, f64> = BTreeMap::new();
    let mut universes: BTreeMap<Sft, Universe> = BTreeMap::new();
    let mut section = Section::Preamble;

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        if let Some(next) = parse_section(line, lineno)? {
            section = next;
            continue;
        }
        match &section {
            Section::Preamble => {
                return Err(syntax(lineno, "content before any section header"));
            }
            Section::Patterns => {
                let (pattern, prob, count) = parse_rule_line(line, lineno)?;
                let pattern: SemanticPattern = pattern
                    .parse()
                    .map_err(|e| syntax(lineno, format!("{e}")))?;
                start.push((pattern, prob, count));
            }
            Section::Terminals(sft) => {
                let (sf, prob, count) = parse_rule_line(line, lineno)?;
                terminals
                    .entry(*sft)
                    .or_default()
                    .push((sf.to_string(), prob, count));
            }
            Section::Smoothing => {
                let (tag, w) = line
                    .split_once('\t')
                    .ok_or_else(|| syntax(lineno, "expected `SFT<TAB>weight`"))?;
                let sft: Sft = tag.parse().map_err(|e| syntax(lineno, format!("{e}")))?;
                let w: f64 = w
                    .parse()
                    .map_err(|_| syntax(lineno, format!("bad weight `{w}`")))?;
                weights.insert(sft, w);
            }
            Section::Universe(sft) => {
                if let Some(rest) = line.strip_prefix("@digits\t") {
                    let n = rest
                        .parse()
                        .map_err(|_| syntax(lineno, "bad @digits length"))?;
                    universes.insert(*sft, Universe::Digits(n));
                } else if let Some(rest) = line.strip_prefix("@symbols\t") {
                    let n = rest
                        .parse()
                        .map_err(|_| syntax(lineno, "bad @symbols length"))?;
                    universes.insert(*sft, Universe::Symbols(n));
                } else {
                    match universes
                        .entry(*sft)
                        .or_insert_with(|| Universe::Explicit(BTreeSet::new()))
                    {
                        Universe::Explicit(set) => {
                            set.insert(line.to_string());
                        }
                        _ => {
                            return Err(syntax(
                                lineno,
                                "explicit factor after a generated-universe directive",
                            ));
                        }
                    }
                }
            }
        }
    }

    let base = Grammar::from_probabilities(start, terminals)?;
    Ok(SmoothedGrammar::smooth(base, &weights, &universes)?)
}

fn parse_rule_line(line: &str, lineno: usize) -> Result<(&str, f64, u64), FormatError> {
    let mut cols = line.split('\t');
    match (cols.next(), cols.next(), cols.next(), cols.next()) {
        (Some(key), Some(prob), Some(count), None) => {
            let prob: f64 = prob
                .parse()
                .map_err(|_| syntax(lineno, format!("bad probability `{prob}`")))?;
            let count: u64 = count
                .parse()
                .map_err(|_| syntax(lineno, format!("bad count `{count}`")))?;
            Ok((key, prob, count))
        }
        _ => Err(syntax(lineno, "expected `key<TAB>probability<TAB>count`")),
    }
}

pub fn save_grammar(grammar: &SmoothedGrammar, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, grammar_to_string(grammar)).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_grammar(path: impl AsRef<Path>) -> Result<SmoothedGrammar, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    grammar_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sample() -> SmoothedGrammar {
        let g = Grammar::from_counts(
            BTreeMap::from([
                (
                    SemanticPattern::new(vec![Sft::EnNoun, Sft::Number(2)]).unwrap(),
                    3,
                ),
                (SemanticPattern::new(vec![Sft::Kb(5)]).unwrap(), 1),
            ]),
            BTreeMap::from([
                (
                    Sft::EnNoun,
                    BTreeMap::from([("king".to_string(), 2), ("lord".to_string(), 1)]),
                ),
                (Sft::Number(2), BTreeMap::from([("12".to_string(), 3)])),
                (Sft::Kb(5), BTreeMap::from([("qwert".to_string(), 1)])),
            ]),
        )
        .unwrap();
        let weights = BTreeMap::from([(Sft::Number(2), 0.9), (Sft::EnNoun, 0.7)]);
        let universes = BTreeMap::from([
            (Sft::Number(2), Universe::Digits(2)),
            (
                Sft::EnNoun,
                Universe::Explicit(BTreeSet::from(["duke".to_string()])),
            ),
        ]);
        SmoothedGrammar::smooth(g, &weights, &universes).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let grammar = sample();
        let text = grammar_to_string(&grammar);
        let reloaded = grammar_from_str(&text).unwrap();
        assert_eq!(grammar_to_string(&reloaded), text);
    }

    #[test]
    fn probabilities_survive_round_trip_exactly() {
        let grammar = sample();
        let reloaded = grammar_from_str(&grammar_to_string(&grammar)).unwrap();
        let p = SemanticPattern::new(vec![Sft::EnNoun, Sft::Number(2)]).unwrap();
        assert_eq!(
            grammar.base().start_probability(&p),
            reloaded.base().start_probability(&p)
        );
        assert_eq!(
            grammar.terminal_probability(Sft::EnNoun, "king"),
            reloaded.terminal_probability(Sft::EnNoun, "king")
        );
        assert_eq!(
            grammar.terminal_probability(Sft::EnNoun, "duke"),
            reloaded.terminal_probability(Sft::EnNoun, "duke")
        );
        assert_eq!(
            grammar.usf_unit_probability(Sft::Number(2)),
            reloaded.usf_unit_probability(Sft::Number(2))
        );
        assert_eq!(reloaded.base().terminal_count(Sft::EnNoun, "king"), Some(2));
        reloaded.check_normalization(1e-9).unwrap();
    }

    #[test]
    fn unsmoothed_grammar_omits_smoothing_sections() {
        let g = Grammar::from_counts(
            BTreeMap::from([(SemanticPattern::new(vec![Sft::EnNoun]).unwrap(), 1)]),
            BTreeMap::from([(Sft::EnNoun, BTreeMap::from([("king".to_string(), 1)]))]),
        )
        .unwrap();
        let text = grammar_to_string(&SmoothedGrammar::unsmoothed(g));
        assert!(!text.contains("[smoothing]"));
        let reloaded = grammar_from_str(&text).unwrap();
        assert_eq!(reloaded.usf_count(Sft::EnNoun), 0);
    }

    #[test]
    fn rejects_bad_header_and_syntax() {
        assert!(matches!(
            grammar_from_str("nonsense\n"),
            Err(FormatError::BadHeader)
        ));
        let text = format!("{HEADER}\n[patterns]\nEN_NOUN\tnot-a-number\t1\n");
        assert!(matches!(
            grammar_from_str(&text),
            Err(FormatError::Syntax { line: 3, .. })
        ));
        let text = format!("{HEADER}\nstray line\n");
        assert!(matches!(
            grammar_from_str(&text),
            Err(FormatError::Syntax { line: 2, .. })
        ));
        let text = format!("{HEADER}\n[terminals:BOGUS]\n");
        assert!(grammar_from_str(&text).is_err());
    }

    #[test]
    fn duplicate_rules_rejected() {
        let text = format!(
            "{HEADER}\n[patterns]\nEN_NOUN\t5.0e-1\t1\nEN_NOUN\t5.0e-1\t1\n\
             [terminals:EN_NOUN]\nking\t1.0e0\t1\n"
        );
        assert!(matches!(
            grammar_from_str(&text),
            Err(FormatError::Grammar(GrammarError::DuplicateRule { .. }))
        ));
        let text = format!(
            "{HEADER}\n[patterns]\nEN_NOUN\t1.0e0\t1\n\
             [terminals:EN_NOUN]\nking\t5.0e-1\t1\nking\t5.0e-1\t1\n"
        );
        assert!(matches!(
            grammar_from_str(&text),
            Err(FormatError::Grammar(GrammarError::DuplicateRule { .. }))
        ));
    }

    #[test]
    fn symbol_factors_do_not_break_section_parsing() {
        // A SPEC factor made of brackets must not be mistaken for a header.
        let g = Grammar::from_counts(
            BTreeMap::from([(SemanticPattern::new(vec![Sft::Spec(2)]).unwrap(), 1)]),
            BTreeMap::from([(Sft::Spec(2), BTreeMap::from([("[]".to_string(), 1)]))]),
        )
        .unwrap();
        let grammar = SmoothedGrammar::unsmoothed(g);
        let text = grammar_to_string(&grammar);
        let reloaded = grammar_from_str(&text).unwrap();
        assert_eq!(reloaded.terminal_probability(Sft::Spec(2), "[]"), 1.0);
    }
}
