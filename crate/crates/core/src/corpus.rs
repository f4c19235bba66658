//! Loading and validation of the external linguistic resources: the word/tag
//! lexicon, keyboard layouts, the leet table, date rules, mobile prefixes
//! and affix lists. Everything is folded into an immutable [`ResourceBundle`]
//! that the rest of the toolkit reads concurrently.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::model::{PasswordRecord, Sft};

/// The ten leet transformations applied by default, in their canonical order.
pub const DEFAULT_LEET_TABLE: [(char, char); 10] = [
    ('0', 'o'),
    ('1', 'i'),
    ('3', 'e'),
    ('4', 'a'),
    ('1', '!'),
    ('1', 'l'),
    ('5', 's'),
    ('@', 'a'),
    ('9', '6'),
    ('$', 's'),
];

pub const DEFAULT_YEAR_RANGE: (u32, u32) = (1990, 2100);

/// Second digits 3..=9 after the leading 1 of an 11-digit Chinese mobile
/// number.
pub const DEFAULT_MOBILE_PREFIXES: [&str; 7] = ["13", "14", "15", "16", "17", "18", "19"];

const DEFAULT_QWERTY: &str = include_str!("../data/keyboard_qwerty.txt");

/// The 6- and 8-digit date formats a digit segment may be matched against.
/// The order of `ALL` is the tie-break order used by the segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DateFormat {
    Yymmdd,
    Mmddyy,
    Ddmmyy,
    Yyyymmdd,
    Mmddyyyy,
    Ddmmyyyy,
}

impl DateFormat {
    pub const ALL: [DateFormat; 6] = [
        DateFormat::Yymmdd,
        DateFormat::Mmddyy,
        DateFormat::Ddmmyy,
        DateFormat::Yyyymmdd,
        DateFormat::Mmddyyyy,
        DateFormat::Ddmmyyyy,
    ];

    pub fn sft(&self) -> Sft {
        match self {
            DateFormat::Yymmdd => Sft::Yymmdd,
            DateFormat::Mmddyy => Sft::Mmddyy,
            DateFormat::Ddmmyy => Sft::Ddmmyy,
            DateFormat::Yyyymmdd => Sft::Yyyymmdd,
            DateFormat::Mmddyyyy => Sft::Mmddyyyy,
            DateFormat::Ddmmyyyy => Sft::Ddmmyyyy,
        }
    }

    fn parse(tag: &str) -> Option<DateFormat> {
        match tag {
            "YYMMDD" => Some(DateFormat::Yymmdd),
            "MMDDYY" => Some(DateFormat::Mmddyy),
            "DDMMYY" => Some(DateFormat::Ddmmyy),
            "YYYYMMDD" => Some(DateFormat::Yyyymmdd),
            "MMDDYYYY" => Some(DateFormat::Mmddyyyy),
            "DDMMYYYY" => Some(DateFormat::Ddmmyyyy),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: PathBuf,
        line: usize,
        message: String,
    },
}

impl CorpusError {
    fn malformed(file: &Path, line: usize, message: impl Into<String>) -> Self {
        CorpusError::Malformed {
            file: file.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// One parsed lexicon row.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub sft: Sft,
    pub frequency: f64,
}

/// A keyboard layout indexed for walk detection. Rows carry a physical
/// x-offset so the stagger of real keyboards is respected: keys on the same
/// row are adjacent at column distance 1, keys on neighboring rows when
/// their centers are less than one key width apart.
#[derive(Debug, Clone)]
pub struct KeyboardIndex {
    key_of: HashMap<char, u16>,
    /// (row, column, physical x = offset + column) per key.
    position: Vec<(i32, i32, f64)>,
}

impl KeyboardIndex {
    fn parse(text: &str, file: &Path) -> Result<Self, CorpusError> {
        let mut key_of = HashMap::new();
        let mut position = Vec::new();
        let mut row = 0i32;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut offset = 0.0f64;
            let mut col = 0i32;
            for token in line.split_whitespace() {
                if let Some(v) = token.strip_prefix("offset=") {
                    offset = v.parse().map_err(|_| {
                        CorpusError::malformed(file, lineno + 1, format!("bad offset `{v}`"))
                    })?;
                    continue;
                }
                let chars: Vec<char> = token.chars().collect();
                if chars.len() > 2 || chars.iter().any(|c| !c.is_ascii_graphic()) {
                    return Err(CorpusError::malformed(
                        file,
                        lineno + 1,
                        format!("bad key token `{token}`"),
                    ));
                }
                let key = position.len() as u16;
                position.push((row, col, offset + col as f64));
                let mut mapped = chars.clone();
                // Letters pair with their shifted (upper-case) form.
                if chars.len() == 1 && chars[0].is_ascii_lowercase() {
                    mapped.push(chars[0].to_ascii_uppercase());
                }
                for &c in &mapped {
                    if key_of.insert(c, key).is_some() {
                        return Err(CorpusError::malformed(
                            file,
                            lineno + 1,
                            format!("character `{c}` appears on two keys"),
                        ));
                    }
                }
                col += 1;
            }
            row += 1;
        }
        Ok(KeyboardIndex { key_of, position })
    }

    pub fn key_of(&self, c: char) -> Option<u16> {
        self.key_of.get(&c).copied()
    }

    /// Distinct keys that physically touch.
    pub fn adjacent(&self, a: u16, b: u16) -> bool {
        if a == b {
            return false;
        }
        let (ar, ac, ax) = self.position[a as usize];
        let (br, bc, bx) = self.position[b as usize];
        match (ar - br).abs() {
            0 => (ac - bc).abs() == 1,
            1 => (ax - bx).abs() < 1.0,
            _ => false,
        }
    }
}

/// Immutable bundle of all loaded resources.
#[derive(Debug, Clone)]
pub struct ResourceBundle {
    /// word -> (SFT, frequency), sorted by descending frequency then by
    /// taxonomy order.
    lexicon: HashMap<String, Vec<(Sft, f64)>>,
    keyboard: KeyboardIndex,
    leet_table: Vec<(char, char)>,
    /// Derived reverse-leet closure: substitutable character -> letters it
    /// can stand for, in table order.
    unleet: HashMap<char, Vec<char>>,
    year_range: (u32, u32),
    date_formats: BTreeSet<DateFormat>,
    mobile_prefixes: BTreeSet<String>,
    prefixes: Vec<String>,
    suffixes: Vec<String>,
}

impl ResourceBundle {
    /// Case-insensitive lexicon lookup. Entries come back sorted by
    /// descending frequency, ties broken by taxonomy order; absent words
    /// yield an empty slice.
    pub fn lookup(&self, word: &str) -> &[(Sft, f64)] {
        if word.bytes().any(|b| b.is_ascii_uppercase()) {
            let lower = word.to_ascii_lowercase();
            self.lexicon.get(&lower).map_or(&[], |v| v.as_slice())
        } else {
            self.lexicon.get(word).map_or(&[], |v| v.as_slice())
        }
    }

    /// All lexicon words carrying the given SFT.
    pub fn words_with_sft(&self, sft: Sft) -> impl Iterator<Item = &str> {
        self.lexicon.iter().filter_map(move |(word, tags)| {
            tags.iter().any(|(t, _)| *t == sft).then_some(word.as_str())
        })
    }

    pub fn lexicon_size(&self) -> usize {
        self.lexicon.len()
    }

    pub fn keyboard(&self) -> &KeyboardIndex {
        &self.keyboard
    }

    pub fn leet_table(&self) -> &[(char, char)] {
        &self.leet_table
    }

    /// Letters a substitutable character can stand for (reverse leet,
    /// including chains such as `!` -> `1` -> `i`/`l`).
    pub fn unleet_letters(&self, c: char) -> &[char] {
        self.unleet.get(&c).map_or(&[], |v| v.as_slice())
    }

    pub fn year_range(&self) -> (u32, u32) {
        self.year_range
    }

    pub fn date_formats(&self) -> impl Iterator<Item = DateFormat> + '_ {
        DateFormat::ALL
            .iter()
            .copied()
            .filter(|f| self.date_formats.contains(f))
    }

    pub fn is_mobile_prefix(&self, prefix: &str) -> bool {
        self.mobile_prefixes.contains(prefix)
    }

    /// Configured prefixes, longest first.
    pub fn prefixes(&self) -> &[String] {
        &self.prefixes
    }

    /// Configured suffixes, longest first.
    pub fn suffixes(&self) -> &[String] {
        &self.suffixes
    }

    /// Deterministic dump of the whole bundle; two bundles loaded from
    /// identical files fingerprint identically.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        let mut words: Vec<&String> = self.lexicon.keys().collect();
        words.sort();
        for word in words {
            for (sft, freq) in &self.lexicon[word] {
                writeln!(out, "lex\t{word}\t{sft}\t{freq:.17e}").unwrap();
            }
        }
        let mut keys: Vec<(&char, &u16)> = self.keyboard.key_of.iter().collect();
        keys.sort();
        for (c, k) in keys {
            let (r, col, x) = self.keyboard.position[*k as usize];
            writeln!(out, "key\t{}\t{r}\t{col}\t{x}", *c as u32).unwrap();
        }
        for (from, to) in &self.leet_table {
            writeln!(out, "leet\t{from}\t{to}").unwrap();
        }
        writeln!(out, "years\t{}\t{}", self.year_range.0, self.year_range.1).unwrap();
        for f in &self.date_formats {
            writeln!(out, "date\t{}", f.sft()).unwrap();
        }
        for p in &self.mobile_prefixes {
            writeln!(out, "mobile\t{p}").unwrap();
        }
        for p in &self.prefixes {
            writeln!(out, "prefix\t{p}").unwrap();
        }
        for s in &self.suffixes {
            writeln!(out, "suffix\t{s}").unwrap();
        }
        out
    }
}

/// Builder holding the raw pieces before derived structures are computed.
#[derive(Debug, Default)]
pub struct BundleBuilder {
    entries: Vec<LexiconEntry>,
    keyboard: Option<KeyboardIndex>,
    leet_table: Option<Vec<(char, char)>>,
    year_range: Option<(u32, u32)>,
    date_formats: Option<BTreeSet<DateFormat>>,
    mobile_prefixes: Option<BTreeSet<String>>,
    prefixes: Vec<String>,
    suffixes: Vec<String>,
}

impl BundleBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_entry(&mut self, entry: LexiconEntry) {
        self.entries.push(entry);
    }

    pub fn build(self) -> ResourceBundle {
        // Merge duplicate (word, SFT) rows by summing frequencies, then sort
        // each word's tags by descending frequency with taxonomy-order ties.
        let mut lexicon: HashMap<String, Vec<(Sft, f64)>> = HashMap::new();
        for entry in self.entries {
            let tags = lexicon.entry(entry.word).or_default();
            match tags.iter_mut().find(|(sft, _)| *sft == entry.sft) {
                Some((_, freq)) => *freq += entry.frequency,
                None => tags.push((entry.sft, entry.frequency)),
            }
        }
        for tags in lexicon.values_mut() {
            tags.sort_by(|(asft, af), (bsft, bf)| bf.partial_cmp(af).unwrap().then(asft.cmp(bsft)));
        }

        let leet_table = self
            .leet_table
            .unwrap_or_else(|| DEFAULT_LEET_TABLE.to_vec());
        let unleet = derive_unleet(&leet_table);

        ResourceBundle {
            lexicon,
            keyboard: self.keyboard.unwrap_or_else(|| {
                KeyboardIndex::parse(DEFAULT_QWERTY, Path::new("<builtin qwerty>"))
                    .expect("builtin layout parses")
            }),
            leet_table,
            unleet,
            year_range: self.year_range.unwrap_or(DEFAULT_YEAR_RANGE),
            date_formats: self
                .date_formats
                .unwrap_or_else(|| DateFormat::ALL.into_iter().collect()),
            mobile_prefixes: self.mobile_prefixes.unwrap_or_else(|| {
                DEFAULT_MOBILE_PREFIXES
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            }),
            prefixes: sort_affixes(self.prefixes),
            suffixes: sort_affixes(self.suffixes),
        }
    }
}

fn sort_affixes(mut affixes: Vec<String>) -> Vec<String> {
    affixes.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    affixes.dedup();
    affixes
}

/// Reverse-leet letter closure over the (undirected) pair table: for each
/// non-letter character, the letters reachable through any chain of pairs.
fn derive_unleet(table: &[(char, char)]) -> HashMap<char, Vec<char>> {
    let mut chars: Vec<char> = Vec::new();
    for (a, b) in table {
        for c in [a, b] {
            if !chars.contains(c) {
                chars.push(*c);
            }
        }
    }
    let mut map = HashMap::new();
    for &start in chars.iter().filter(|c| !c.is_ascii_alphabetic()) {
        let mut letters = Vec::new();
        let mut frontier = vec![start];
        let mut seen = vec![start];
        while let Some(c) = frontier.pop() {
            for (a, b) in table {
                let next = if *a == c {
                    Some(*b)
                } else if *b == c {
                    Some(*a)
                } else {
                    None
                };
                if let Some(n) = next {
                    if !seen.contains(&n) {
                        seen.push(n);
                        if n.is_ascii_alphabetic() {
                            if !letters.contains(&n) {
                                letters.push(n);
                            }
                        } else {
                            frontier.push(n);
                        }
                    }
                }
            }
        }
        letters.sort_by_key(|&l| {
            table
                .iter()
                .position(|&(a, b)| a == l || b == l)
                .unwrap_or(usize::MAX)
        });
        if !letters.is_empty() {
            map.insert(start, letters);
        }
    }
    map
}

/// Load a bundle from a manifest of `key=path` lines. Recognized keys:
/// `lexicon`, `keyboard`, `leet`, `dates`, `mobile`, `prefixes`, `suffixes`.
/// Every key is optional; paths are resolved relative to the manifest.
pub fn load_bundle(manifest: impl AsRef<Path>) -> Result<ResourceBundle, CorpusError> {
    let manifest = manifest.as_ref();
    let text = read(manifest)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut builder = BundleBuilder::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CorpusError::malformed(manifest, lineno + 1, "expected key=path"))?;
        let path = dir.join(value.trim());
        match key.trim() {
            "lexicon" => load_lexicon(&path, &mut builder)?,
            "keyboard" => {
                builder.keyboard = Some(KeyboardIndex::parse(&read(&path)?, &path)?);
            }
            "leet" => builder.leet_table = Some(load_leet(&path)?),
            "dates" => load_dates(&path, &mut builder)?,
            "mobile" => builder.mobile_prefixes = Some(load_mobile(&path)?),
            "prefixes" => builder.prefixes = load_affixes(&path)?,
            "suffixes" => builder.suffixes = load_affixes(&path)?,
            other => {
                return Err(CorpusError::malformed(
                    manifest,
                    lineno + 1,
                    format!("unknown manifest key `{other}`"),
                ));
            }
        }
    }
    Ok(builder.build())
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Lexicon TSV: `word<TAB>SFT<TAB>frequency`, `#` comments. Words are
/// lower-cased; linguistic SFTs require letter-only words.
pub fn load_lexicon(path: &Path, builder: &mut BundleBuilder) -> Result<(), CorpusError> {
    let text = read(path)?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (word, tag, freq) = match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(w), Some(t), Some(f), None) => (w, t, f),
            _ => {
                return Err(CorpusError::malformed(
                    path,
                    lineno + 1,
                    "expected 3 tab-separated columns",
                ));
            }
        };
        if word.is_empty() {
            return Err(CorpusError::malformed(path, lineno + 1, "empty word"));
        }
        let sft: Sft = tag.parse().map_err(|e: crate::model::UnknownSft| {
            CorpusError::malformed(path, lineno + 1, e.to_string())
        })?;
        if sft.is_linguistic() && !word.bytes().all(|b| b.is_ascii_alphabetic()) {
            return Err(CorpusError::malformed(
                path,
                lineno + 1,
                format!("word `{word}` for linguistic SFT {sft} must be letters only"),
            ));
        }
        let frequency: f64 = freq.parse().map_err(|_| {
            CorpusError::malformed(path, lineno + 1, format!("bad frequency `{freq}`"))
        })?;
        if !frequency.is_finite() || frequency < 0.0 {
            return Err(CorpusError::malformed(
                path,
                lineno + 1,
                format!("negative or non-finite frequency `{freq}`"),
            ));
        }
        builder.push_entry(LexiconEntry {
            word: word.to_ascii_lowercase(),
            sft,
            frequency,
        });
    }
    Ok(())
}

fn load_leet(path: &Path) -> Result<Vec<(char, char)>, CorpusError> {
    let text = read(path)?;
    let mut table = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| {
            CorpusError::malformed(path, lineno + 1, "expected `<char><TAB><char>`")
        })?;
        let (a, b) = (a.trim(), b.trim());
        if a.chars().count() != 1 || b.chars().count() != 1 {
            return Err(CorpusError::malformed(
                path,
                lineno + 1,
                "keys must be single characters",
            ));
        }
        table.push((a.chars().next().unwrap(), b.chars().next().unwrap()));
    }
    Ok(table)
}

/// Dates file: `years<TAB>lo<TAB>hi` and `format<TAB>TAG` lines.
fn load_dates(path: &Path, builder: &mut BundleBuilder) -> Result<(), CorpusError> {
    let text = read(path)?;
    let mut formats = BTreeSet::new();
    let mut saw_format = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["years", lo, hi] => {
                let lo: u32 = lo
                    .parse()
                    .map_err(|_| CorpusError::malformed(path, lineno + 1, "bad year range"))?;
                let hi: u32 = hi
                    .parse()
                    .map_err(|_| CorpusError::malformed(path, lineno + 1, "bad year range"))?;
                if lo > hi {
                    return Err(CorpusError::malformed(
                        path,
                        lineno + 1,
                        "year range reversed",
                    ));
                }
                builder.year_range = Some((lo, hi));
            }
            ["format", tag] => {
                saw_format = true;
                let f = DateFormat::parse(tag).ok_or_else(|| {
                    CorpusError::malformed(path, lineno + 1, format!("unknown date format `{tag}`"))
                })?;
                formats.insert(f);
            }
            _ => {
                return Err(CorpusError::malformed(
                    path,
                    lineno + 1,
                    "expected `years<TAB>lo<TAB>hi` or `format<TAB>TAG`",
                ));
            }
        }
    }
    if saw_format {
        builder.date_formats = Some(formats);
    }
    Ok(())
}

fn load_mobile(path: &Path) -> Result<BTreeSet<String>, CorpusError> {
    let text = read(path)?;
    let mut prefixes = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.len() != 2 || !line.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CorpusError::malformed(
                path,
                lineno + 1,
                format!("mobile prefix `{line}` must be exactly 2 digits"),
            ));
        }
        prefixes.insert(line.to_string());
    }
    Ok(prefixes)
}

fn load_affixes(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = read(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Load a password corpus. The format is detected per file: when every
/// non-empty line ends in `<TAB><count>` the file is treated as
/// `password<TAB>count`, otherwise each line is one password with count 1.
pub fn load_password_file(path: impl AsRef<Path>) -> Result<Vec<PasswordRecord>, CorpusError> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_password_corpus(&text, path)
}

pub(crate) fn parse_password_corpus(
    text: &str,
    path: &Path,
) -> Result<Vec<PasswordRecord>, CorpusError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let counted = !lines.is_empty()
        && lines.iter().all(|(_, l)| {
            l.rsplit_once('\t')
                .is_some_and(|(pw, c)| !pw.is_empty() && c.parse::<u64>().is_ok_and(|c| c >= 1))
        });
    let mut records = Vec::with_capacity(lines.len());
    for (idx, line) in lines {
        let (pw, count) = if counted {
            let (pw, c) = line.rsplit_once('\t').expect("validated above");
            (pw, c.parse::<u64>().expect("validated above"))
        } else {
            (line, 1)
        };
        let record = PasswordRecord::new(pw, count)
            .map_err(|e| CorpusError::malformed(path, idx + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}
