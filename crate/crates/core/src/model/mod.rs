//! Core domain types shared by all modules: the SFT taxonomy, segmentations,
//! semantic patterns, password records and the grammar itself.

mod grammar;
mod sft;

pub use grammar::{Grammar, GrammarError, SmoothedGrammar, Universe};
pub use sft::{Sft, SftGroup, UnknownSft};

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("password is empty")]
    EmptyPassword,
    #[error("password contains non-printable byte {0:#04x}; only printable ASCII (32..=126) is supported")]
    NonPrintable(u8),
    #[error("user count must be at least 1")]
    ZeroCount,
    #[error("segmentation has no parts")]
    EmptySegmentation,
    #[error("segmentation contains an empty factor")]
    EmptyFactor,
    #[error("semantic pattern has no SFTs")]
    EmptyPattern,
}

/// One password from a corpus together with the number of users who chose it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PasswordRecord {
    password: String,
    count: u64,
}

impl PasswordRecord {
    pub fn new(password: impl Into<String>, count: u64) -> Result<Self, ModelError> {
        let password = password.into();
        if password.is_empty() {
            return Err(ModelError::EmptyPassword);
        }
        if let Some(b) = password.bytes().find(|b| !(32..=126).contains(b)) {
            return Err(ModelError::NonPrintable(b));
        }
        if count == 0 {
            return Err(ModelError::ZeroCount);
        }
        Ok(PasswordRecord { password, count })
    }

    pub fn password(&self) -> &str {
        &self.password
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// An ordered split of a password into (semantic factor, SFT) parts.
///
/// Concatenating the factors always reproduces the original password
/// byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segmentation {
    parts: Vec<(String, Sft)>,
}

impl Segmentation {
    pub fn new(parts: Vec<(String, Sft)>) -> Result<Self, ModelError> {
        if parts.is_empty() {
            return Err(ModelError::EmptySegmentation);
        }
        if parts.iter().any(|(sf, _)| sf.is_empty()) {
            return Err(ModelError::EmptyFactor);
        }
        Ok(Segmentation { parts })
    }

    pub fn parts(&self) -> &[(String, Sft)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The password this segmentation covers.
    pub fn password(&self) -> String {
        self.parts.iter().map(|(sf, _)| sf.as_str()).collect()
    }

    /// The SFT projection of the segmentation, order preserved.
    pub fn pattern(&self) -> SemanticPattern {
        SemanticPattern {
            sfts: self.parts.iter().map(|(_, sft)| *sft).collect(),
        }
    }

    /// True if any part carries the `NN` catch-all tag.
    pub fn contains_nn(&self) -> bool {
        self.parts.iter().any(|(_, sft)| *sft == Sft::Nn)
    }
}

impl fmt::Display for Segmentation {
    /// `sf:SFT|sf:SFT|...`, the line format of the `segment` subcommand.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (sf, sft)) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{sf}:{sft}")?;
        }
        Ok(())
    }
}

/// The ordered list of SFTs describing a whole password's composition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SemanticPattern {
    sfts: Vec<Sft>,
}

impl SemanticPattern {
    pub fn new(sfts: Vec<Sft>) -> Result<Self, ModelError> {
        if sfts.is_empty() {
            return Err(ModelError::EmptyPattern);
        }
        Ok(SemanticPattern { sfts })
    }

    pub fn sfts(&self) -> &[Sft] {
        &self.sfts
    }

    /// Pattern length (SPL): the number of semantic factors.
    pub fn spl(&self) -> usize {
        self.sfts.len()
    }
}

impl fmt::Display for SemanticPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sft) in self.sfts.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{sft}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SemanticPattern {
    type Err = UnknownSft;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(UnknownSft(String::new()));
        }
        let sfts = s
            .split('+')
            .map(|tag| tag.parse::<Sft>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SemanticPattern { sfts })
    }
}
