//! The semantic factor type (SFT) taxonomy and its 21 analysis groups.
//!
//! The taxonomy is a closed set of 43 named semantic types plus the `NN`
//! catch-all for segments with unrecognized semantics. Length-parameterized
//! families (`NUMBER(n)`, `SPEC(n)`, `KB(n)`, `SR(n)`, `PRE(n)`, `SUF(n)`)
//! are distinct types per `n`, so each carries its own normalized terminal
//! distribution in a grammar.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// Semantic factor type: the category label of one password segment.
///
/// The derived `Ord` is the canonical taxonomy order used for deterministic
/// tie-breaking throughout the toolkit (parameterized variants order by `n`
/// within their family).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sft {
    Email,
    Dn,
    /// Pinyin romanizations of Chinese characters.
    Py,
    /// Two or more consecutive consonants with no dictionary hit.
    Consonants,
    /// A short unit (>= 2 chars) repeated consecutively; `n` is the total length.
    Sr(u32),
    /// A 4-digit year inside the configured range.
    Year,
    Pre(u32),
    Suf(u32),
    Yymmdd,
    Mmddyy,
    Ddmmyy,
    Yyyymmdd,
    Mmddyyyy,
    Ddmmyyyy,
    /// Keyboard walk of `n >= 4` keys.
    Kb(u32),
    /// 11-digit Chinese mobile number.
    CnMobile,
    EnNoun,
    EnVerb,
    EnPron,
    EnAdj,
    EnAdv,
    EnAdp,
    EnConj,
    EnDet,
    EnPrt,
    EnX,
    EnNum,
    GeNoun,
    GeAdj,
    GeAdv,
    GePron,
    GeVerb,
    FrNoun,
    FrAdj,
    FrAdv,
    FrPron,
    FrVerb,
    /// Digit run of `n` digits that is not a year, date or mobile number.
    Number(u32),
    /// Run of `n` special characters.
    Spec(u32),
    Location,
    /// Wiki name entity.
    Wkne,
    Month,
    /// Urban Dictionary entity.
    Ube,
    Name,
    Leet,
    CnNameAbbr,
    /// Catch-all for unrecognized semantics.
    Nn,
}

impl Sft {
    /// Length parameter for parameterized families, `None` otherwise.
    pub fn param(&self) -> Option<u32> {
        match self {
            Sft::Sr(n) | Sft::Pre(n) | Sft::Suf(n) | Sft::Kb(n) | Sft::Number(n) | Sft::Spec(n) => {
                Some(*n)
            }
            _ => None,
        }
    }

    /// True for the tags resolved during pre-processing (step 1).
    pub fn is_preprocessing(&self) -> bool {
        matches!(
            self,
            Sft::Kb(_) | Sft::Email | Sft::Dn | Sft::Sr(_) | Sft::Pre(_) | Sft::Suf(_)
        )
    }

    /// True for tags whose factors are all digits.
    pub fn is_digit_class(&self) -> bool {
        matches!(
            self,
            Sft::Year
                | Sft::Yymmdd
                | Sft::Mmddyy
                | Sft::Ddmmyy
                | Sft::Yyyymmdd
                | Sft::Mmddyyyy
                | Sft::Ddmmyyyy
                | Sft::CnMobile
                | Sft::Number(_)
        )
    }

    /// True for tags whose factors come from a word lexicon (letters only).
    pub fn is_linguistic(&self) -> bool {
        matches!(
            self,
            Sft::Py
                | Sft::EnNoun
                | Sft::EnVerb
                | Sft::EnPron
                | Sft::EnAdj
                | Sft::EnAdv
                | Sft::EnAdp
                | Sft::EnConj
                | Sft::EnDet
                | Sft::EnPrt
                | Sft::EnX
                | Sft::EnNum
                | Sft::GeNoun
                | Sft::GeAdj
                | Sft::GeAdv
                | Sft::GePron
                | Sft::GeVerb
                | Sft::FrNoun
                | Sft::FrAdj
                | Sft::FrAdv
                | Sft::FrPron
                | Sft::FrVerb
                | Sft::Location
                | Sft::Wkne
                | Sft::Month
                | Sft::Ube
                | Sft::Name
                | Sft::CnNameAbbr
        )
    }

    /// The analysis group this SFT belongs to. Groups partition the taxonomy.
    pub fn group(&self) -> SftGroup {
        let rules = group_rules();
        let name = self.to_string();
        for (selector, group) in rules {
            if selector.matches(self, &name) {
                return *group;
            }
        }
        // The bundled table is total; a miss means the table and taxonomy
        // drifted apart, which the partition test catches.
        unreachable!("no group rule for SFT {name}")
    }
}

impl fmt::Display for Sft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sft::Email => write!(f, "EMAIL"),
            Sft::Dn => write!(f, "DN"),
            Sft::Py => write!(f, "PY"),
            Sft::Consonants => write!(f, "CONSONANTS"),
            Sft::Sr(n) => write!(f, "SR{n}"),
            Sft::Year => write!(f, "YEAR"),
            Sft::Pre(n) => write!(f, "PRE{n}"),
            Sft::Suf(n) => write!(f, "SUF{n}"),
            Sft::Yymmdd => write!(f, "YYMMDD"),
            Sft::Mmddyy => write!(f, "MMDDYY"),
            Sft::Ddmmyy => write!(f, "DDMMYY"),
            Sft::Yyyymmdd => write!(f, "YYYYMMDD"),
            Sft::Mmddyyyy => write!(f, "MMDDYYYY"),
            Sft::Ddmmyyyy => write!(f, "DDMMYYYY"),
            Sft::Kb(n) => write!(f, "KB{n}"),
            Sft::CnMobile => write!(f, "CN_MOBILE"),
            Sft::EnNoun => write!(f, "EN_NOUN"),
            Sft::EnVerb => write!(f, "EN_VERB"),
            Sft::EnPron => write!(f, "EN_PRON"),
            Sft::EnAdj => write!(f, "EN_ADJ"),
            Sft::EnAdv => write!(f, "EN_ADV"),
            Sft::EnAdp => write!(f, "EN_ADP"),
            Sft::EnConj => write!(f, "EN_CONJ"),
            Sft::EnDet => write!(f, "EN_DET"),
            Sft::EnPrt => write!(f, "EN_PRT"),
            Sft::EnX => write!(f, "EN_X"),
            Sft::EnNum => write!(f, "EN_NUM"),
            Sft::GeNoun => write!(f, "GE_NOUN"),
            Sft::GeAdj => write!(f, "GE_ADJ"),
            Sft::GeAdv => write!(f, "GE_ADV"),
            Sft::GePron => write!(f, "GE_PRON"),
            Sft::GeVerb => write!(f, "GE_VERB"),
            Sft::FrNoun => write!(f, "FR_NOUN"),
            Sft::FrAdj => write!(f, "FR_ADJ"),
            Sft::FrAdv => write!(f, "FR_ADV"),
            Sft::FrPron => write!(f, "FR_PRON"),
            Sft::FrVerb => write!(f, "FR_VERB"),
            Sft::Number(n) => write!(f, "NUMBER{n}"),
            Sft::Spec(n) => write!(f, "SPEC{n}"),
            Sft::Location => write!(f, "LOCATION"),
            Sft::Wkne => write!(f, "WKNE"),
            Sft::Month => write!(f, "MONTH"),
            Sft::Ube => write!(f, "UBE"),
            Sft::Name => write!(f, "NAME"),
            Sft::Leet => write!(f, "LEET"),
            Sft::CnNameAbbr => write!(f, "CN_NAME_ABBR"),
            Sft::Nn => write!(f, "NN"),
        }
    }
}

/// Error produced when a textual SFT tag cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown SFT tag `{0}`")]
pub struct UnknownSft(pub String);

impl FromStr for Sft {
    type Err = UnknownSft;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fixed = match s {
            "EMAIL" => Some(Sft::Email),
            "DN" => Some(Sft::Dn),
            "PY" => Some(Sft::Py),
            "CONSONANTS" => Some(Sft::Consonants),
            "YEAR" => Some(Sft::Year),
            "YYMMDD" => Some(Sft::Yymmdd),
            "MMDDYY" => Some(Sft::Mmddyy),
            "DDMMYY" => Some(Sft::Ddmmyy),
            "YYYYMMDD" => Some(Sft::Yyyymmdd),
            "MMDDYYYY" => Some(Sft::Mmddyyyy),
            "DDMMYYYY" => Some(Sft::Ddmmyyyy),
            "CN_MOBILE" => Some(Sft::CnMobile),
            "EN_NOUN" => Some(Sft::EnNoun),
            "EN_VERB" => Some(Sft::EnVerb),
            "EN_PRON" => Some(Sft::EnPron),
            "EN_ADJ" => Some(Sft::EnAdj),
            "EN_ADV" => Some(Sft::EnAdv),
            "EN_ADP" => Some(Sft::EnAdp),
            "EN_CONJ" => Some(Sft::EnConj),
            "EN_DET" => Some(Sft::EnDet),
            "EN_PRT" => Some(Sft::EnPrt),
            "EN_X" => Some(Sft::EnX),
            "EN_NUM" => Some(Sft::EnNum),
            "GE_NOUN" => Some(Sft::GeNoun),
            "GE_ADJ" => Some(Sft::GeAdj),
            "GE_ADV" => Some(Sft::GeAdv),
            "GE_PRON" => Some(Sft::GePron),
            "GE_VERB" => Some(Sft::GeVerb),
            "FR_NOUN" => Some(Sft::FrNoun),
            "FR_ADJ" => Some(Sft::FrAdj),
            "FR_ADV" => Some(Sft::FrAdv),
            "FR_PRON" => Some(Sft::FrPron),
            "FR_VERB" => Some(Sft::FrVerb),
            "LOCATION" => Some(Sft::Location),
            "WKNE" => Some(Sft::Wkne),
            "MONTH" => Some(Sft::Month),
            "UBE" => Some(Sft::Ube),
            "NAME" => Some(Sft::Name),
            "LEET" => Some(Sft::Leet),
            "CN_NAME_ABBR" => Some(Sft::CnNameAbbr),
            "NN" => Some(Sft::Nn),
            _ => None,
        };
        if let Some(sft) = fixed {
            return Ok(sft);
        }
        for (prefix, min, make) in [
            ("NUMBER", 1, Sft::Number as fn(u32) -> Sft),
            ("SPEC", 1, Sft::Spec as fn(u32) -> Sft),
            ("KB", 4, Sft::Kb as fn(u32) -> Sft),
            ("SR", 1, Sft::Sr as fn(u32) -> Sft),
            ("PRE", 1, Sft::Pre as fn(u32) -> Sft),
            ("SUF", 1, Sft::Suf as fn(u32) -> Sft),
        ] {
            if let Some(digits) = s.strip_prefix(prefix) {
                let canonical = !digits.is_empty()
                    && digits.bytes().all(|b| b.is_ascii_digit())
                    && !(digits.len() > 1 && digits.starts_with('0'));
                if canonical {
                    if let Ok(n) = digits.parse::<u32>() {
                        if n >= min {
                            return Ok(make(n));
                        }
                    }
                }
            }
        }
        Err(UnknownSft(s.to_string()))
    }
}

/// One of the 21 analysis groups the taxonomy is partitioned into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SftGroup {
    Special,
    Name,
    Date,
    Number9Plus,
    EnSfts,
    GeSfts,
    FrSfts,
    PreProcessing,
    PostProcessing,
    Py,
    Consonants,
    CnMobile,
    Location,
    Wkne,
    Ube,
    Nn,
    Number1,
    Number2,
    Number3,
    Number4To5,
    Number6To8,
}

impl SftGroup {
    pub const COUNT: usize = 21;

    pub const ALL: [SftGroup; Self::COUNT] = [
        SftGroup::Special,
        SftGroup::Name,
        SftGroup::Date,
        SftGroup::Number9Plus,
        SftGroup::EnSfts,
        SftGroup::GeSfts,
        SftGroup::FrSfts,
        SftGroup::PreProcessing,
        SftGroup::PostProcessing,
        SftGroup::Py,
        SftGroup::Consonants,
        SftGroup::CnMobile,
        SftGroup::Location,
        SftGroup::Wkne,
        SftGroup::Ube,
        SftGroup::Nn,
        SftGroup::Number1,
        SftGroup::Number2,
        SftGroup::Number3,
        SftGroup::Number4To5,
        SftGroup::Number6To8,
    ];
}

impl fmt::Display for SftGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SftGroup::Special => "SPECIAL",
            SftGroup::Name => "NAME",
            SftGroup::Date => "DATE",
            SftGroup::Number9Plus => "NUMBER9PLUS",
            SftGroup::EnSfts => "EN_SFTS",
            SftGroup::GeSfts => "GE_SFTS",
            SftGroup::FrSfts => "FR_SFTS",
            SftGroup::PreProcessing => "PRE_PROCESSING",
            SftGroup::PostProcessing => "POST_PROCESSING",
            SftGroup::Py => "PY",
            SftGroup::Consonants => "CONSONANTS",
            SftGroup::CnMobile => "CN_MOBILE",
            SftGroup::Location => "LOCATION",
            SftGroup::Wkne => "WKNE",
            SftGroup::Ube => "UBE",
            SftGroup::Nn => "NN",
            SftGroup::Number1 => "NUMBER1",
            SftGroup::Number2 => "NUMBER2",
            SftGroup::Number3 => "NUMBER3",
            SftGroup::Number4To5 => "NUMBER4_5",
            SftGroup::Number6To8 => "NUMBER6_8",
        };
        f.write_str(name)
    }
}

impl FromStr for SftGroup {
    type Err = UnknownSft;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SftGroup::ALL
            .iter()
            .copied()
            .find(|g| g.to_string() == s)
            .ok_or_else(|| UnknownSft(s.to_string()))
    }
}

/// Selector syntax used by the bundled group table.
enum Selector {
    /// Matches the exact tag name, e.g. `EN_NOUN` or `NUMBER1`.
    Exact(String),
    /// Matches a whole family by name prefix, e.g. `KB*` or `EN_*`.
    Family(String),
    /// Matches `NUMBER(n)` for `lo <= n <= hi`, e.g. `NUMBER4-5` or `NUMBER9+`.
    NumberRange(u32, Option<u32>),
}

impl Selector {
    fn matches(&self, sft: &Sft, name: &str) -> bool {
        match self {
            Selector::Exact(tag) => tag == name,
            Selector::Family(prefix) => name.starts_with(prefix.as_str()),
            Selector::NumberRange(lo, hi) => match sft {
                Sft::Number(n) => *n >= *lo && hi.is_none_or(|hi| *n <= hi),
                _ => false,
            },
        }
    }
}

fn parse_selector(s: &str) -> Option<Selector> {
    if let Some(prefix) = s.strip_suffix('*') {
        return Some(Selector::Family(prefix.to_string()));
    }
    if let Some(rest) = s.strip_prefix("NUMBER") {
        if let Some(lo) = rest.strip_suffix('+') {
            return Some(Selector::NumberRange(lo.parse().ok()?, None));
        }
        if let Some((lo, hi)) = rest.split_once('-') {
            return Some(Selector::NumberRange(
                lo.parse().ok()?,
                Some(hi.parse().ok()?),
            ));
        }
    }
    Some(Selector::Exact(s.to_string()))
}

fn group_rules() -> &'static [(Selector, SftGroup)] {
    static RULES: OnceLock<Vec<(Selector, SftGroup)>> = OnceLock::new();
    RULES.get_or_init(|| {
        let table = include_str!("../../data/sft_groups.tsv");
        let mut rules = Vec::new();
        for (lineno, line) in table.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (sel, group) = line
                .split_once('\t')
                .unwrap_or_else(|| panic!("sft_groups.tsv:{}: missing tab", lineno + 1));
            let selector = parse_selector(sel.trim())
                .unwrap_or_else(|| panic!("sft_groups.tsv:{}: bad selector", lineno + 1));
            let group: SftGroup = group
                .trim()
                .parse()
                .unwrap_or_else(|_| panic!("sft_groups.tsv:{}: bad group", lineno + 1));
            rules.push((selector, group));
        }
        rules
    })
}
