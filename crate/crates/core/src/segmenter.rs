//! Password segmentation: the streamlined four-step process.
//!
//! Step 1 (pre-processing) resolves mixed-class factors — keyboard walks,
//! emails, domain names, repeated strings and configured affixes — in the
//! precedence order KB > EMAIL > DN > SR > PRE = SUF, then splits the rest
//! into letter (L), digit (D) and symbol (S) runs. Step 2a segments L-runs
//! against the lexicon with a dynamic program, step 2b types D- and S-runs,
//! and step 3 re-examines poor segmentations under reverse leet
//! substitutions.

use rayon::prelude::*;

use crate::corpus::ResourceBundle;
use crate::model::{ModelError, PasswordRecord, Segmentation, Sft};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SegmentError {
    #[error("cannot segment an empty password")]
    Empty,
    #[error("password contains non-printable byte {0:#04x}; only printable ASCII is supported")]
    NonAscii(u8),
}

/// Tuning knobs for the L-segment scorer and leet candidate search.
#[derive(Debug, Clone)]
pub struct SegmenterParams {
    /// Per-part penalty; higher values prefer fewer, longer words.
    pub lambda: f64,
    /// Per-character penalty for spans not covered by the lexicon.
    pub char_penalty: f64,
    /// Cap on reverse-leet substitution combinations tried per password.
    pub leet_candidate_cap: usize,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        SegmenterParams {
            lambda: 2.0,
            char_penalty: 6.0,
            leet_candidate_cap: 16,
        }
    }
}

/// Character class of an unresolved span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawClass {
    Letter,
    Digit,
    Symbol,
    Resolved(Sft),
}

/// One span produced by pre-processing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSegment {
    pub text: String,
    pub klass: RawClass,
}

fn char_class(b: u8) -> RawClass {
    if b.is_ascii_alphabetic() {
        RawClass::Letter
    } else if b.is_ascii_digit() {
        RawClass::Digit
    } else {
        RawClass::Symbol
    }
}

/// Step 1: resolve mixed-class factors by precedence, split the remainder
/// into maximal L/D/S runs.
pub fn preprocess(pw: &str, bundle: &ResourceBundle) -> Vec<RawSegment> {
    let bytes = pw.as_bytes();
    // (start, end, resolved tag); unresolved spans carry None.
    let mut spans: Vec<(usize, usize, Option<Sft>)> = vec![(0, bytes.len(), None)];

    type Tier<'a> = &'a dyn Fn(&[u8], usize, usize) -> Option<(usize, Sft)>;
    let tiers: [Tier; 5] = [
        &|b, i, end| match_keyboard(b, i, end, bundle),
        &|b, i, end| match_email(b, i, end),
        &|b, i, end| match_domain(b, i, end),
        &|b, i, end| match_repeat(b, i, end),
        &|b, i, end| match_affix(b, i, end, bundle),
    ];

    for tier in tiers {
        let mut next = Vec::with_capacity(spans.len());
        for (start, end, tag) in spans {
            if tag.is_some() {
                next.push((start, end, tag));
                continue;
            }
            let mut i = start;
            let mut pending = start;
            while i < end {
                if let Some((mend, sft)) = tier(bytes, i, end) {
                    if pending < i {
                        next.push((pending, i, None));
                    }
                    next.push((i, mend, Some(sft)));
                    i = mend;
                    pending = mend;
                } else {
                    i += 1;
                }
            }
            if pending < end {
                next.push((pending, end, None));
            }
        }
        spans = next;
    }

    let mut segments = Vec::new();
    for (start, end, tag) in spans {
        match tag {
            Some(sft) => segments.push(RawSegment {
                text: pw[start..end].to_string(),
                klass: RawClass::Resolved(sft),
            }),
            None => {
                // Split into maximal runs of one character class.
                let mut run_start = start;
                let mut run_class = char_class(bytes[start]);
                for i in start + 1..end {
                    let class = char_class(bytes[i]);
                    if class != run_class {
                        segments.push(RawSegment {
                            text: pw[run_start..i].to_string(),
                            klass: run_class,
                        });
                        run_start = i;
                        run_class = class;
                    }
                }
                segments.push(RawSegment {
                    text: pw[run_start..end].to_string(),
                    klass: run_class,
                });
            }
        }
    }
    segments
}

/// Longest keyboard walk of distinct adjacent keys starting at `i`;
/// matches need at least 4 keys.
fn match_keyboard(
    bytes: &[u8],
    i: usize,
    end: usize,
    bundle: &ResourceBundle,
) -> Option<(usize, Sft)> {
    let kb = bundle.keyboard();
    let mut prev = kb.key_of(bytes[i] as char)?;
    let mut j = i + 1;
    while j < end {
        match kb.key_of(bytes[j] as char) {
            Some(key) if kb.adjacent(prev, key) => {
                prev = key;
                j += 1;
            }
            _ => break,
        }
    }
    let len = j - i;
    (len >= 4).then_some((j, Sft::Kb(len as u32)))
}

fn is_local_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'%' | b'+' | b'-')
}

fn is_domain_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b'.'
}

/// `local@domain` with a structurally valid domain after the `@`.
fn match_email(bytes: &[u8], i: usize, end: usize) -> Option<(usize, Sft)> {
    let mut at = i;
    while at < end && is_local_byte(bytes[at]) {
        at += 1;
    }
    if at == i || at >= end || bytes[at] != b'@' {
        return None;
    }
    let (dend, _) = match_domain(bytes, at + 1, end)?;
    Some((dend, Sft::Email))
}

/// Longest structurally valid domain name at `i`: two or more labels of
/// alphanumerics and inner hyphens, the last label alphabetic with length
/// at least 2.
fn match_domain(bytes: &[u8], i: usize, end: usize) -> Option<(usize, Sft)> {
    let mut run_end = i;
    while run_end < end && is_domain_byte(bytes[run_end]) {
        run_end += 1;
    }
    // Need room for "a.bc".
    for stop in (i + 4..=run_end).rev() {
        if valid_domain(&bytes[i..stop]) {
            return Some((stop, Sft::Dn));
        }
    }
    None
}

fn valid_domain(s: &[u8]) -> bool {
    let labels: Vec<&[u8]> = s.split(|&b| b == b'.').collect();
    if labels.len() < 2 {
        return false;
    }
    for label in &labels {
        if label.is_empty()
            || label.first() == Some(&b'-')
            || label.last() == Some(&b'-')
            || !label
                .iter()
                .all(|&b| b.is_ascii_alphanumeric() || b == b'-')
        {
            return false;
        }
    }
    let tld = labels.last().unwrap();
    tld.len() >= 2 && tld.iter().all(|b| b.is_ascii_alphabetic())
}

/// Longest repeat at `i`: a unit of at least 2 characters repeated at least
/// twice consecutively.
fn match_repeat(bytes: &[u8], i: usize, end: usize) -> Option<(usize, Sft)> {
    let max = end - i;
    for total in (4..=max).rev() {
        for unit in (2..=total / 2).rev() {
            if total % unit != 0 {
                continue;
            }
            let base = &bytes[i..i + unit];
            if bytes[i..i + total].chunks(unit).all(|c| c == base) {
                return Some((i + total, Sft::Sr(total as u32)));
            }
        }
    }
    None
}

/// Configured prefixes match only at the start of the password, suffixes
/// only at its end (longest first).
fn match_affix(
    bytes: &[u8],
    i: usize,
    end: usize,
    bundle: &ResourceBundle,
) -> Option<(usize, Sft)> {
    if i == 0 {
        for prefix in bundle.prefixes() {
            let p = prefix.as_bytes();
            if p.len() <= end && bytes[..p.len()] == *p {
                return Some((p.len(), Sft::Pre(p.len() as u32)));
            }
        }
    }
    for suffix in bundle.suffixes() {
        let s = suffix.as_bytes();
        if end == bytes.len()
            && s.len() <= end - i
            && bytes[end - s.len()..end] == *s
            && i == end - s.len()
        {
            // Only when the suffix starts exactly here; the scan visits every
            // position, so the full-span check happens at the right offset.
            return Some((end, Sft::Suf(s.len() as u32)));
        }
    }
    None
}

fn is_vowel(b: u8) -> bool {
    matches!(b.to_ascii_lowercase(), b'a' | b'e' | b'i' | b'o' | b'u')
}

fn fallback_tag(text: &str) -> Sft {
    let b = text.as_bytes();
    if b.len() >= 2 && b.iter().all(|&c| c.is_ascii_alphabetic() && !is_vowel(c)) {
        Sft::Consonants
    } else {
        Sft::Nn
    }
}

/// Step 2a: split one letter run into lexicon words by dynamic programming.
///
/// The split maximizes `sum(ln(freq+1)) - lambda * parts`, with
/// out-of-lexicon spans scored at `-char_penalty` per character. Chosen
/// words take their highest-frequency tag; uncovered spans fall back to
/// CONSONANTS (two or more consonants) or NN.
pub fn segment_letters(
    text: &str,
    bundle: &ResourceBundle,
    params: &SegmenterParams,
) -> Vec<(String, Sft)> {
    let lower = text.to_ascii_lowercase();
    let n = lower.len();
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut parent = vec![0usize; n + 1];
    best[0] = 0.0;
    for j in 1..=n {
        for i in 0..j {
            if best[i] == f64::NEG_INFINITY {
                continue;
            }
            let span = &lower[i..j];
            let score = match bundle.lookup(span).first() {
                Some((_, freq)) => (freq + 1.0).ln(),
                None => -params.char_penalty * (j - i) as f64,
            };
            let total = best[i] + score - params.lambda;
            if total > best[j] {
                best[j] = total;
                parent[j] = i;
            }
        }
    }

    let mut cuts = Vec::new();
    let mut j = n;
    while j > 0 {
        cuts.push(j);
        j = parent[j];
    }
    cuts.push(0);
    cuts.reverse();

    let mut parts = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let (i, j) = (w[0], w[1]);
        let raw = &text[i..j];
        let tag = match bundle.lookup(&lower[i..j]).first() {
            Some((sft, _)) => *sft,
            None => fallback_tag(raw),
        };
        parts.push((raw.to_string(), tag));
    }
    parts
}

fn month_day_valid(month: u32, day: u32, feb_max: u32) -> bool {
    let max = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => feb_max,
        _ => return false,
    };
    day >= 1 && day <= max
}

fn is_leap(year: u32) -> bool {
    (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400)
}

/// Step 2b for digit runs: years, calendar-valid dates, Chinese mobile
/// numbers, otherwise `NUMBER(n)`.
pub fn segment_digits(text: &str, bundle: &ResourceBundle) -> (String, Sft) {
    let field = |r: std::ops::Range<usize>| -> u32 { text[r].parse().unwrap_or(0) };
    let sft = match text.len() {
        4 => {
            let year: u32 = text.parse().unwrap_or(0);
            let (lo, hi) = bundle.year_range();
            if year >= lo && year <= hi {
                Some(Sft::Year)
            } else {
                None
            }
        }
        6 => bundle.date_formats().find_map(|f| {
            use crate::corpus::DateFormat::*;
            // Two-digit years leave the century ambiguous, so February 29 is
            // always accepted.
            let (month, day) = match f {
                Yymmdd => (field(2..4), field(4..6)),
                Mmddyy => (field(0..2), field(2..4)),
                Ddmmyy => (field(2..4), field(0..2)),
                _ => return None,
            };
            month_day_valid(month, day, 29).then(|| f.sft())
        }),
        8 => bundle.date_formats().find_map(|f| {
            use crate::corpus::DateFormat::*;
            let (year, month, day) = match f {
                Yyyymmdd => (field(0..4), field(4..6), field(6..8)),
                Mmddyyyy => (field(4..8), field(0..2), field(2..4)),
                Ddmmyyyy => (field(4..8), field(2..4), field(0..2)),
                _ => return None,
            };
            let feb_max = if is_leap(year) { 29 } else { 28 };
            month_day_valid(month, day, feb_max).then(|| f.sft())
        }),
        11 => bundle.is_mobile_prefix(&text[..2]).then_some(Sft::CnMobile),
        _ => None,
    };
    let sft = sft.unwrap_or(Sft::Number(text.len() as u32));
    (text.to_string(), sft)
}

/// Step 2b for symbol runs: the whole run is one `SPEC(n)` factor.
pub fn segment_symbols(text: &str) -> (String, Sft) {
    (text.to_string(), Sft::Spec(text.len() as u32))
}

/// Step 3: for segmentations containing NN parts or more than 3 parts, try
/// reverse leet substitutions; spans whose un-leeted form is fully covered
/// by the lexicon collapse into a single LEET factor.
pub fn postprocess(
    pw: &str,
    parts: Vec<(String, Sft)>,
    bundle: &ResourceBundle,
    params: &SegmenterParams,
) -> Vec<(String, Sft)> {
    let triggered = parts.len() > 3 || parts.iter().any(|(_, sft)| *sft == Sft::Nn);
    if !triggered {
        return parts;
    }

    let bytes = pw.as_bytes();
    // Positions inside pre-processing factors are never substituted and
    // break letter runs. Digit factors that already carry semantics
    // (years, dates, mobile numbers) keep them: only plain numbers,
    // symbols and letter parts take substitutions.
    let mut eligible = vec![false; bytes.len()];
    let mut substitutable = vec![false; bytes.len()];
    let mut boundaries = vec![false; bytes.len() + 1];
    let mut offset = 0;
    boundaries[0] = true;
    for (sf, sft) in &parts {
        let end = offset + sf.len();
        boundaries[end] = true;
        if !sft.is_preprocessing() {
            eligible[offset..end].fill(true);
            let typed_digits = sft.is_digit_class() && !matches!(sft, Sft::Number(_));
            if !typed_digits {
                substitutable[offset..end].fill(true);
            }
        }
        offset = end;
    }

    let subs: Vec<(usize, &[char])> = bytes
        .iter()
        .enumerate()
        .filter(|(i, _)| substitutable[*i])
        .filter_map(|(i, &b)| {
            let letters = bundle.unleet_letters(b as char);
            (!letters.is_empty()).then_some((i, letters))
        })
        .collect();
    if subs.is_empty() {
        return parts;
    }

    for candidate in leet_candidates(bytes, &subs, params.leet_candidate_cap) {
        let replacements =
            candidate_replacements(&candidate, &eligible, &boundaries, bundle, params);
        if replacements.is_empty() {
            continue;
        }
        return apply_replacements(pw, parts, &replacements);
    }
    parts
}

/// Substituted variants of the password, most-substituted first. Within one
/// substitution count, earlier leet-table letters come first. Falls back to
/// all-occurrence substitution when the combination space exceeds the cap.
fn leet_candidates(bytes: &[u8], subs: &[(usize, &[char])], cap: usize) -> Vec<LeetCandidate> {
    let mut combos: u64 = 1;
    for (_, opts) in subs {
        combos = combos.saturating_mul(opts.len() as u64 + 1);
        if combos > cap as u64 + 1 {
            break;
        }
    }

    let mut candidates = Vec::new();
    if combos - 1 <= cap as u64 {
        // Mixed-radix enumeration over (skip | letter...) per position.
        let radices: Vec<usize> = subs.iter().map(|(_, o)| o.len() + 1).collect();
        let mut digits = vec![0usize; subs.len()];
        'all: loop {
            let mut text = bytes.to_vec();
            let mut substituted = Vec::new();
            for (d, (pos, opts)) in digits.iter().zip(subs) {
                if *d > 0 {
                    text[*pos] = opts[*d - 1] as u8;
                    substituted.push(*pos);
                }
            }
            if !substituted.is_empty() {
                candidates.push(LeetCandidate { text, substituted });
            }
            let mut k = 0;
            loop {
                if k == digits.len() {
                    break 'all;
                }
                digits[k] += 1;
                if digits[k] < radices[k] {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
        candidates.sort_by(|a, b| {
            b.substituted
                .len()
                .cmp(&a.substituted.len())
                .then_with(|| a.text.cmp(&b.text))
        });
    } else {
        // All-occurrence substitution: one letter choice per distinct
        // character, applied everywhere it appears.
        let mut distinct: Vec<(u8, &[char])> = Vec::new();
        for (pos, opts) in subs {
            let b = bytes[*pos];
            if !distinct.iter().any(|(c, _)| *c == b) {
                distinct.push((b, opts));
            }
        }
        let radices: Vec<usize> = distinct.iter().map(|(_, o)| o.len()).collect();
        let mut digits = vec![0usize; distinct.len()];
        'occ: loop {
            let mut text = bytes.to_vec();
            let mut substituted = Vec::new();
            for (pos, _) in subs {
                let b = bytes[*pos];
                let idx = distinct.iter().position(|(c, _)| *c == b).unwrap();
                text[*pos] = distinct[idx].1[digits[idx]] as u8;
                substituted.push(*pos);
            }
            candidates.push(LeetCandidate { text, substituted });
            if candidates.len() >= cap {
                break;
            }
            let mut k = 0;
            loop {
                if k == digits.len() {
                    break 'occ;
                }
                digits[k] += 1;
                if digits[k] < radices[k] {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }
    candidates
}

struct LeetCandidate {
    text: Vec<u8>,
    substituted: Vec<usize>,
}

/// Letter runs of the candidate that contain at least one substitution,
/// align with part boundaries, and segment fully into lexicon words.
fn candidate_replacements(
    candidate: &LeetCandidate,
    eligible: &[bool],
    boundaries: &[bool],
    bundle: &ResourceBundle,
    params: &SegmenterParams,
) -> Vec<(usize, usize)> {
    let text = &candidate.text;
    let mut replacements = Vec::new();
    let mut i = 0;
    while i < text.len() {
        if !(eligible[i] && text[i].is_ascii_alphabetic()) {
            i += 1;
            continue;
        }
        let start = i;
        while i < text.len() && eligible[i] && text[i].is_ascii_alphabetic() {
            i += 1;
        }
        let run = std::str::from_utf8(&text[start..i]).expect("ascii");
        if !candidate.substituted.iter().any(|p| (start..i).contains(p)) {
            continue;
        }
        if !(boundaries[start] && boundaries[i]) {
            continue;
        }
        let split = segment_letters(run, bundle, params);
        if split.iter().all(|(sf, _)| !bundle.lookup(sf).is_empty()) {
            replacements.push((start, i));
        }
    }
    replacements
}

fn apply_replacements(
    pw: &str,
    parts: Vec<(String, Sft)>,
    replacements: &[(usize, usize)],
) -> Vec<(String, Sft)> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut pending: Option<usize> = None;
    for (sf, sft) in parts {
        let end = offset + sf.len();
        if let Some(&(rs, re)) = replacements
            .iter()
            .find(|(rs, re)| offset >= *rs && end <= *re)
        {
            if pending != Some(rs) {
                out.push((pw[rs..re].to_string(), Sft::Leet));
                pending = Some(rs);
            }
        } else {
            out.push((sf, sft));
        }
        offset = end;
    }
    out
}

/// Segment one password end to end.
pub fn segment(pw: &str, bundle: &ResourceBundle) -> Result<Segmentation, SegmentError> {
    segment_with(pw, bundle, &SegmenterParams::default())
}

pub fn segment_with(
    pw: &str,
    bundle: &ResourceBundle,
    params: &SegmenterParams,
) -> Result<Segmentation, SegmentError> {
    if pw.is_empty() {
        return Err(SegmentError::Empty);
    }
    if let Some(b) = pw.bytes().find(|b| !(32..=126).contains(b)) {
        return Err(SegmentError::NonAscii(b));
    }

    let mut parts = Vec::new();
    for seg in preprocess(pw, bundle) {
        match seg.klass {
            RawClass::Resolved(sft) => parts.push((seg.text, sft)),
            RawClass::Letter => parts.extend(segment_letters(&seg.text, bundle, params)),
            RawClass::Digit => parts.push(segment_digits(&seg.text, bundle)),
            RawClass::Symbol => parts.push(segment_symbols(&seg.text)),
        }
    }
    let parts = postprocess(pw, parts, bundle, params);

    let seg = Segmentation::new(parts).expect("segmenter emits non-empty parts");
    debug_assert_eq!(seg.password(), pw, "reconstruction invariant");
    Ok(seg)
}

/// Segment a whole corpus, preserving record order. Workers shard the input
/// but the output is deterministic regardless of thread count.
pub fn segment_corpus(
    records: &[PasswordRecord],
    bundle: &ResourceBundle,
) -> Result<Vec<(Segmentation, u64)>, SegmentError> {
    records
        .par_iter()
        .map(|r| segment(r.password(), bundle).map(|s| (s, r.count())))
        .collect()
}

/// Fraction of segmentations containing no NN factor.
pub fn success_rate<'a>(segmentations: impl IntoIterator<Item = &'a Segmentation>) -> f64 {
    let mut total = 0u64;
    let mut with_nn = 0u64;
    for seg in segmentations {
        total += 1;
        if seg.contains_nn() {
            with_nn += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    1.0 - with_nn as f64 / total as f64
}

/// Convert parsed model errors produced downstream of segmentation.
impl From<ModelError> for SegmentError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonPrintable(b) => SegmentError::NonAscii(b),
            _ => SegmentError::Empty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load_bundle, ResourceBundle};
    use std::io::Write;

    fn fixture_bundle() -> ResourceBundle {
        let dir = tempfile::tempdir().unwrap();
        let lex = dir.path().join("lex.tsv");
        let mut f = std::fs::File::create(&lex).unwrap();
        write!(
            f,
            "password\tEN_NOUN\t5000\n\
             pass\tEN_NOUN\t30\n\
             word\tEN_NOUN\t40\n\
             king\tEN_NOUN\t1500\n\
             lord\tEN_NOUN\t800\n\
             love\tEN_VERB\t2000\n\
             zhang\tPY\t900\n\
             fei\tPY\t700\n\
             ahnung\tGE_NOUN\t350\n\
             passwords\tEN_NOUN\t90\n\
             june\tMONTH\t150\n"
        )
        .unwrap();
        let manifest = dir.path().join("manifest");
        std::fs::write(&manifest, "lexicon=lex.tsv\n").unwrap();
        load_bundle(manifest).unwrap()
    }

    fn parts_of(seg: &Segmentation) -> Vec<(String, String)> {
        seg.parts()
            .iter()
            .map(|(sf, sft)| (sf.clone(), sft.to_string()))
            .collect()
    }

    fn check(bundle: &ResourceBundle, pw: &str, expected: &[(&str, &str)]) {
        let seg = segment(pw, bundle).unwrap();
        let got = parts_of(&seg);
        let want: Vec<(String, String)> = expected
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(got, want, "segmenting {pw:?}");
        assert_eq!(seg.password(), pw);
    }

    #[test]
    fn table3_worked_examples() {
        let bundle = fixture_bundle();
        check(
            &bundle,
            "qwertpassword",
            &[("qwert", "KB5"), ("password", "EN_NOUN")],
        );
        check(&bundle, "qazqazqaz", &[("qazqazqaz", "SR9")]);
        check(
            &bundle,
            "zhangfei1990",
            &[("zhang", "PY"), ("fei", "PY"), ("1990", "YEAR")],
        );
        check(&bundle, "pa$$w0rd", &[("pa$$w0rd", "LEET")]);
        check(&bundle, "ahnung", &[("ahnung", "GE_NOUN")]);
    }

    #[test]
    fn preprocess_step1_shapes() {
        let bundle = fixture_bundle();
        let segs = preprocess("qwertpassword", &bundle);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].text, "qwert");
        assert_eq!(segs[0].klass, RawClass::Resolved(Sft::Kb(5)));
        assert_eq!(segs[1].text, "password");
        assert_eq!(segs[1].klass, RawClass::Letter);

        let segs = preprocess("qazqazqaz", &bundle);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].klass, RawClass::Resolved(Sft::Sr(9)));

        // Table 3 row 4, step 1 column.
        let segs = preprocess("pa$$w0rd", &bundle);
        let shape: Vec<(String, RawClass)> = segs.into_iter().map(|s| (s.text, s.klass)).collect();
        assert_eq!(
            shape,
            vec![
                ("pa".to_string(), RawClass::Letter),
                ("$$".to_string(), RawClass::Symbol),
                ("w".to_string(), RawClass::Letter),
                ("0".to_string(), RawClass::Digit),
                ("rd".to_string(), RawClass::Letter),
            ]
        );
    }

    #[test]
    fn kb_beats_sr_on_overlap() {
        let bundle = fixture_bundle();
        // "qwqw" repeats a 2-char unit but is also a 4-key walk; the KB tier
        // runs first so the walk wins.
        let seg = segment("qwqw", &bundle).unwrap();
        assert_eq!(
            parts_of(&seg),
            vec![("qwqw".to_string(), "KB4".to_string())]
        );
    }

    #[test]
    fn email_and_domain_detection() {
        let bundle = fixture_bundle();
        let seg = segment("bob@mail.com1", &bundle).unwrap();
        assert_eq!(
            parts_of(&seg),
            vec![
                ("bob@mail.com".to_string(), "EMAIL".to_string()),
                ("1".to_string(), "NUMBER1".to_string()),
            ]
        );
        let seg = segment("google.com", &bundle).unwrap();
        assert_eq!(
            parts_of(&seg),
            vec![("google.com".to_string(), "DN".to_string())]
        );
    }

    #[test]
    fn digit_classification() {
        let bundle = fixture_bundle();
        assert_eq!(segment_digits("1990", &bundle).1, Sft::Year);
        assert_eq!(segment_digits("2100", &bundle).1, Sft::Year);
        assert_eq!(segment_digits("1989", &bundle).1, Sft::Number(4));
        assert_eq!(segment_digits("0", &bundle).1, Sft::Number(1));
        // 99/12/31 is a valid YYMMDD but not a valid MMDDYY (month 99).
        assert_eq!(segment_digits("991231", &bundle).1, Sft::Yymmdd);
        // 12/31/99 fails YYMMDD (month 31) but passes MMDDYY.
        assert_eq!(segment_digits("123199", &bundle).1, Sft::Mmddyy);
        // 31/12/99 only fits DDMMYY.
        assert_eq!(segment_digits("311299", &bundle).1, Sft::Ddmmyy);
        assert_eq!(segment_digits("999999", &bundle).1, Sft::Number(6));
        assert_eq!(segment_digits("20001231", &bundle).1, Sft::Yyyymmdd);
        assert_eq!(segment_digits("12312000", &bundle).1, Sft::Mmddyyyy);
        assert_eq!(segment_digits("31122000", &bundle).1, Sft::Ddmmyyyy);
        // February 29 needs a leap year when the century is known. 2023 is
        // not a leap year and 20/23 and 02/29 rule out the other formats.
        assert_eq!(segment_digits("20230229", &bundle).1, Sft::Number(8));
        assert_eq!(segment_digits("20240229", &bundle).1, Sft::Yyyymmdd);
        assert_eq!(segment_digits("13912345678", &bundle).1, Sft::CnMobile);
        assert_eq!(segment_digits("12912345678", &bundle).1, Sft::Number(11));
    }

    #[test]
    fn symbols_become_spec() {
        assert_eq!(segment_symbols("$$"), ("$$".to_string(), Sft::Spec(2)));
        assert_eq!(segment_symbols("!"), ("!".to_string(), Sft::Spec(1)));
        assert_eq!(segment_symbols("!@#"), ("!@#".to_string(), Sft::Spec(3)));
    }

    #[test]
    fn letters_dp_prefers_frequent_words() {
        let bundle = fixture_bundle();
        let params = SegmenterParams::default();
        assert_eq!(
            segment_letters("password", &bundle, &params),
            vec![("password".to_string(), Sft::EnNoun)]
        );
        assert_eq!(
            segment_letters("zhangfei", &bundle, &params),
            vec![("zhang".to_string(), Sft::Py), ("fei".to_string(), Sft::Py)]
        );
        assert_eq!(
            segment_letters("ahnung", &bundle, &params),
            vec![("ahnung".to_string(), Sft::GeNoun)]
        );
    }

    #[test]
    fn consonant_runs_and_nn() {
        let bundle = fixture_bundle();
        let params = SegmenterParams::default();
        assert_eq!(
            segment_letters("bcdfg", &bundle, &params),
            vec![("bcdfg".to_string(), Sft::Consonants)]
        );
        assert_eq!(
            segment_letters("aeiou", &bundle, &params),
            vec![("aeiou".to_string(), Sft::Nn)]
        );
        // Adjacent unknown spans merge into one part.
        let parts = segment_letters("kingxyzaeking", &bundle, &params);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1].1, Sft::Nn);
    }

    #[test]
    fn postprocess_guard_not_triggered() {
        let bundle = fixture_bundle();
        check(
            &bundle,
            "king123",
            &[("king", "EN_NOUN"), ("123", "NUMBER3")],
        );
    }

    #[test]
    fn postprocess_single_leet_char() {
        let bundle = fixture_bundle();
        // "p4ss" -> NN trigger -> candidate "pass" covered by the lexicon.
        check(&bundle, "p4ss", &[("p4ss", "LEET")]);
    }

    #[test]
    fn postprocess_keeps_unaffected_parts() {
        let bundle = fixture_bundle();
        check(
            &bundle,
            "pa$$w0rd1990",
            &[("pa$$w0rd", "LEET"), ("1990", "YEAR")],
        );
    }

    #[test]
    fn mixed_case_words_still_match() {
        let bundle = fixture_bundle();
        check(
            &bundle,
            "KING123",
            &[("KING", "EN_NOUN"), ("123", "NUMBER3")],
        );
        // Case is preserved in the emitted factors.
        check(&bundle, "PA$$W0RD", &[("PA$$W0RD", "LEET")]);
    }

    #[test]
    fn all_occurrence_fallback_beyond_subset_cap() {
        let bundle = fixture_bundle();
        // Five substitutable positions blow the 16-combination cap, so only
        // the all-occurrence candidate is tried; it reaches "passwords".
        check(&bundle, "p4$$w0rd$", &[("p4$$w0rd$", "LEET")]);
    }

    #[test]
    fn postprocess_gives_up_without_coverage() {
        let bundle = fixture_bundle();
        // "x9z7q" triggers (NN present) but no substitution reaches letters.
        let seg = segment("x9z7q", &bundle).unwrap();
        assert!(seg.password() == "x9z7q");
        assert!(seg.parts().iter().all(|(_, sft)| *sft != Sft::Leet));
    }

    #[test]
    fn affix_recognition() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("lex.tsv"), "king\tEN_NOUN\t1500\n").unwrap();
        std::fs::write(dir.path().join("pre.txt"), "1qaz\n").unwrap();
        std::fs::write(dir.path().join("suf.txt"), "007\n").unwrap();
        let manifest = dir.path().join("manifest");
        std::fs::write(
            &manifest,
            "lexicon=lex.tsv\nprefixes=pre.txt\nsuffixes=suf.txt\n",
        )
        .unwrap();
        let bundle = load_bundle(manifest).unwrap();
        // 1qaz is also a KB4 walk, and KB outranks PRE.
        let seg = segment("1qazking", &bundle).unwrap();
        assert_eq!(seg.parts()[0], ("1qaz".to_string(), Sft::Kb(4)));
        let seg = segment("king007", &bundle).unwrap();
        assert_eq!(
            seg.parts().to_vec(),
            vec![
                ("king".to_string(), Sft::EnNoun),
                ("007".to_string(), Sft::Suf(3)),
            ]
        );
    }

    #[test]
    fn rejects_empty_and_non_ascii() {
        let bundle = fixture_bundle();
        assert_eq!(segment("", &bundle), Err(SegmentError::Empty));
        assert_eq!(
            segment("caf\u{e9}", &bundle),
            Err(SegmentError::NonAscii(0xc3))
        );
        assert_eq!(segment("a\tb", &bundle), Err(SegmentError::NonAscii(9)));
    }

    #[test]
    fn success_rate_counts_nn_free_segmentations() {
        let bundle = fixture_bundle();
        let segs: Vec<Segmentation> = ["king123", "xqzkw1", "password"]
            .iter()
            .map(|pw| segment(pw, &bundle).unwrap())
            .collect();
        let with_nn = segs.iter().filter(|s| s.contains_nn()).count();
        let expected = 1.0 - with_nn as f64 / 3.0;
        assert_eq!(success_rate(segs.iter()), expected);
    }
}
