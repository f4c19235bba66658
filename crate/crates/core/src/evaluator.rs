//! Coverage-rate evaluation: simulated real-attacking against a plaintext
//! target corpus, and the Monte Carlo approximation of the same report.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::ResourceBundle;
use crate::generator::{GuessStream, MonteCarloEstimator};
use crate::model::{PasswordRecord, SmoothedGrammar};
use crate::segmenter::{segment, SegmentError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("target corpus is empty")]
    EmptyTarget,
    #[error("no checkpoints requested")]
    NoCheckpoints,
    #[error("checkpoint {checkpoint} exceeds the guess budget {budget}")]
    CheckpointBeyondBudget { checkpoint: u64, budget: u64 },
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

/// Coverage at one guess count. `r_po` counts users (duplicate-weighted),
/// `r_pa` counts unique passwords.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRow {
    pub guesses: u64,
    pub r_po: f64,
    pub r_pa: f64,
    pub cracked_users: u64,
    pub cracked_unique: u64,
}

/// Cracking coverage as a function of guess count.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub checkpoints: Vec<CheckpointRow>,
    /// N(D): total users in the target.
    pub target_users: u64,
    pub target_unique: u64,
}

impl CoverageReport {
    /// TSV with columns `n  r_po  r_pa  cracked_users  cracked_unique`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("n\tr_po\tr_pa\tcracked_users\tcracked_unique\n");
        for row in &self.checkpoints {
            writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}\t{}",
                row.guesses, row.r_po, row.r_pa, row.cracked_users, row.cracked_unique
            )
            .unwrap();
        }
        out
    }
}

fn prepare_checkpoints(checkpoints: &[u64], budget: u64) -> Result<Vec<u64>, EvalError> {
    let mut points: Vec<u64> = checkpoints.to_vec();
    points.sort_unstable();
    points.dedup();
    if points.is_empty() {
        return Err(EvalError::NoCheckpoints);
    }
    if let Some(&too_far) = points.iter().find(|&&c| c > budget) {
        return Err(EvalError::CheckpointBeyondBudget {
            checkpoint: too_far,
            budget,
        });
    }
    Ok(points)
}

/// Deduplicated target: password -> user count.
fn target_lookup(target: &[PasswordRecord]) -> (HashMap<String, u64>, u64, u64) {
    let mut lookup: HashMap<String, u64> = HashMap::new();
    for record in target {
        *lookup.entry(record.password().to_string()).or_insert(0) += record.count();
    }
    let users = lookup.values().sum();
    let unique = lookup.len() as u64;
    (lookup, users, unique)
}

/// Simulated real attack: stream guesses in probability order and mark off
/// target passwords as they are hit. Each cracked password is credited
/// once, at the guess that first produced it.
pub fn attack(
    grammar: &SmoothedGrammar,
    target: &[PasswordRecord],
    max_guesses: u64,
    checkpoints: &[u64],
) -> Result<CoverageReport, EvalError> {
    if target.is_empty() {
        return Err(EvalError::EmptyTarget);
    }
    let points = prepare_checkpoints(checkpoints, max_guesses)?;
    let (mut lookup, users, unique) = target_lookup(target);

    let mut report = CoverageReport {
        checkpoints: Vec::with_capacity(points.len()),
        target_users: users,
        target_unique: unique,
    };
    let mut cracked_users = 0u64;
    let mut cracked_unique = 0u64;
    let mut stream = GuessStream::new(grammar);
    let mut next_point = 0usize;
    let mut issued = 0u64;
    let mut exhausted = false;

    while next_point < points.len() {
        // Counts are current for `issued` guesses; emit every checkpoint
        // that has been reached (or can no longer change).
        if points[next_point] <= issued || exhausted || issued >= max_guesses || lookup.is_empty() {
            report.checkpoints.push(CheckpointRow {
                guesses: points[next_point],
                r_po: cracked_users as f64 / users as f64,
                r_pa: cracked_unique as f64 / unique as f64,
                cracked_users,
                cracked_unique,
            });
            next_point += 1;
            continue;
        }
        match stream.next_guess_ref() {
            Some((pw, _)) => {
                issued += 1;
                if let Some(count) = lookup.remove(pw) {
                    cracked_users += count;
                    cracked_unique += 1;
                }
            }
            None => exhausted = true,
        }
    }
    Ok(report)
}

/// Decision margin for "rank fits the budget": the rank estimator carries
/// sampling noise with a relative standard deviation of roughly
/// `1/sqrt(samples * mass)`, so an estimate for a password whose true rank
/// equals the checkpoint lands a hair's breadth on either side. Two percent
/// covers several standard deviations at the default sample count without
/// absorbing genuinely out-of-budget ranks.
const MC_RANK_MARGIN: f64 = 0.02;

/// Monte Carlo counterpart of [`attack`]: each target password is judged
/// crackable at checkpoint `n` when its estimated rank is at most `n`
/// (plus the boundary margin above).
pub fn estimate_coverage_mc(
    grammar: &SmoothedGrammar,
    target: &[PasswordRecord],
    bundle: &ResourceBundle,
    guess_budgets: &[u64],
    samples: u64,
    seed: u64,
) -> Result<CoverageReport, EvalError> {
    if target.is_empty() {
        return Err(EvalError::EmptyTarget);
    }
    let points = prepare_checkpoints(guess_budgets, u64::MAX)?;
    let (lookup, users, unique) = target_lookup(target);
    let estimator = MonteCarloEstimator::new(grammar, samples, seed);

    let mut cracked_users = vec![0u64; points.len()];
    let mut cracked_unique = vec![0u64; points.len()];
    for (pw, count) in &lookup {
        let seg = segment(pw, bundle)?;
        let Some(lp) = grammar.password_log_probability(&seg) else {
            continue;
        };
        let rank = estimator.rank_of_log_probability(lp);
        for (i, &n) in points.iter().enumerate() {
            if rank <= n as f64 * (1.0 + MC_RANK_MARGIN) {
                cracked_users[i] += count;
                cracked_unique[i] += 1;
            }
        }
    }

    let checkpoints = points
        .iter()
        .enumerate()
        .map(|(i, &n)| CheckpointRow {
            guesses: n,
            r_po: cracked_users[i] as f64 / users as f64,
            r_pa: cracked_unique[i] as f64 / unique as f64,
            cracked_users: cracked_users[i],
            cracked_unique: cracked_unique[i],
        })
        .collect();
    Ok(CoverageReport {
        checkpoints,
        target_users: users,
        target_unique: unique,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Grammar, SemanticPattern, Sft};

    fn records(rows: &[(&str, u64)]) -> Vec<PasswordRecord> {
        rows.iter()
            .map(|(pw, c)| PasswordRecord::new(*pw, *c).unwrap())
            .collect()
    }

    fn letter_grammar(rules: &[(&str, f64)]) -> SmoothedGrammar {
        let g = Grammar::from_probabilities(
            [(SemanticPattern::new(vec![Sft::EnNoun]).unwrap(), 1.0, 1)],
            [(
                Sft::EnNoun,
                rules
                    .iter()
                    .map(|(sf, p)| (sf.to_string(), *p, 1))
                    .collect(),
            )],
        )
        .unwrap();
        SmoothedGrammar::unsmoothed(g)
    }

    #[test]
    fn full_coverage_when_target_is_support() {
        let g = letter_grammar(&[("a", 0.5), ("b", 0.3), ("c", 0.2)]);
        let target = records(&[("a", 1), ("b", 1), ("c", 1)]);
        let report = attack(&g, &target, 3, &[3]).unwrap();
        let row = &report.checkpoints[0];
        assert_eq!(row.r_po, 1.0);
        assert_eq!(row.r_pa, 1.0);
        assert_eq!(row.cracked_unique, 3);
    }

    #[test]
    fn disjoint_target_never_cracks() {
        let g = letter_grammar(&[("a", 0.5), ("b", 0.5)]);
        let target = records(&[("x", 2), ("y", 1)]);
        let report = attack(&g, &target, 2, &[1, 2]).unwrap();
        for row in &report.checkpoints {
            assert_eq!(row.r_po, 0.0);
            assert_eq!(row.r_pa, 0.0);
        }
    }

    #[test]
    fn hand_simulated_example() {
        // Grammar emits a, c, b; target {a: 3, b: 1}.
        let g = letter_grammar(&[("a", 0.5), ("c", 0.3), ("b", 0.2)]);
        let target = records(&[("a", 3), ("b", 1)]);
        let report = attack(&g, &target, 3, &[1, 3]).unwrap();
        assert_eq!(report.target_users, 4);
        assert_eq!(report.target_unique, 2);
        let at1 = &report.checkpoints[0];
        assert_eq!(at1.r_po, 0.75);
        assert_eq!(at1.r_pa, 0.5);
        let at3 = &report.checkpoints[1];
        assert_eq!(at3.r_po, 1.0);
        assert_eq!(at3.r_pa, 1.0);
    }

    #[test]
    fn checkpoints_past_exhaustion_plateau() {
        let g = letter_grammar(&[("a", 1.0)]);
        let target = records(&[("a", 1), ("b", 1)]);
        let report = attack(&g, &target, 10, &[1, 5, 10]).unwrap();
        assert_eq!(report.checkpoints.len(), 3);
        for row in &report.checkpoints {
            assert_eq!(row.cracked_unique, 1);
            assert_eq!(row.r_pa, 0.5);
        }
    }

    #[test]
    fn checkpoint_beyond_budget_rejected() {
        let g = letter_grammar(&[("a", 1.0)]);
        let target = records(&[("a", 1)]);
        assert!(matches!(
            attack(&g, &target, 5, &[10]),
            Err(EvalError::CheckpointBeyondBudget { .. })
        ));
        assert!(matches!(
            attack(&g, &target, 5, &[]),
            Err(EvalError::NoCheckpoints)
        ));
        assert!(matches!(
            attack(&g, &[], 5, &[1]),
            Err(EvalError::EmptyTarget)
        ));
    }

    #[test]
    fn duplicate_guess_strings_credit_once() {
        use std::collections::BTreeMap;
        // Two patterns both deriving "same"; the target must be credited at
        // the first emission only.
        let g = Grammar::from_counts(
            BTreeMap::from([
                (SemanticPattern::new(vec![Sft::EnNoun]).unwrap(), 1),
                (SemanticPattern::new(vec![Sft::Wkne]).unwrap(), 1),
            ]),
            BTreeMap::from([
                (Sft::EnNoun, BTreeMap::from([("same".to_string(), 1)])),
                (Sft::Wkne, BTreeMap::from([("same".to_string(), 1)])),
            ]),
        )
        .unwrap();
        let g = SmoothedGrammar::unsmoothed(g);
        let target = records(&[("same", 5)]);
        let report = attack(&g, &target, 2, &[1, 2]).unwrap();
        assert_eq!(report.checkpoints[0].cracked_users, 5);
        assert_eq!(report.checkpoints[1].cracked_users, 5);
        assert_eq!(report.checkpoints[1].cracked_unique, 1);
    }

    #[test]
    fn r_pa_equals_r_po_on_flattened_counts() {
        let g = letter_grammar(&[("a", 0.5), ("c", 0.3), ("b", 0.2)]);
        let weighted = records(&[("a", 3), ("b", 1), ("q", 7)]);
        let flattened = records(&[("a", 1), ("b", 1), ("q", 1)]);
        let wr = attack(&g, &weighted, 3, &[1, 2, 3]).unwrap();
        let fr = attack(&g, &flattened, 3, &[1, 2, 3]).unwrap();
        for (w, f) in wr.checkpoints.iter().zip(&fr.checkpoints) {
            assert_eq!(w.r_pa, f.r_po);
        }
    }

    #[test]
    fn mc_matches_attack_on_degenerate_grammar() {
        use crate::corpus::load_bundle;
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("lex.tsv"), "a\tEN_NOUN\t10\n").unwrap();
        let manifest = dir.path().join("manifest");
        std::fs::write(&manifest, "lexicon=lex.tsv\n").unwrap();
        let bundle = load_bundle(manifest).unwrap();

        let g = letter_grammar(&[("a", 1.0)]);
        let target = records(&[("a", 2)]);
        let report = estimate_coverage_mc(&g, &target, &bundle, &[1], 1000, 9).unwrap();
        assert_eq!(report.checkpoints[0].r_po, 1.0);
        assert_eq!(report.checkpoints[0].r_pa, 1.0);
    }

    fn abc_bundle() -> crate::corpus::ResourceBundle {
        use crate::corpus::load_bundle;
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("lex.tsv"),
            "a\tEN_NOUN\t10\nb\tEN_NOUN\t8\nc\tEN_NOUN\t6\nq\tEN_NOUN\t2\n",
        )
        .unwrap();
        let manifest = dir.path().join("manifest");
        std::fs::write(&manifest, "lexicon=lex.tsv\n").unwrap();
        load_bundle(manifest).unwrap()
    }

    #[test]
    fn mc_reruns_the_attack_example_within_tolerance() {
        // The hand-simulated example re-run with Monte Carlo estimation.
        let g = letter_grammar(&[("a", 0.5), ("c", 0.3), ("b", 0.2)]);
        let target = records(&[("a", 3), ("b", 1)]);
        let bundle = abc_bundle();
        let real = attack(&g, &target, 3, &[1, 3]).unwrap();
        let mc = estimate_coverage_mc(&g, &target, &bundle, &[1, 3], 100_000, 21).unwrap();
        for (r, m) in real.checkpoints.iter().zip(&mc.checkpoints) {
            assert!(
                (r.r_po - m.r_po).abs() <= 0.02,
                "n={}: {} vs {}",
                r.guesses,
                r.r_po,
                m.r_po
            );
            assert!((r.r_pa - m.r_pa).abs() <= 0.02);
        }
    }

    #[test]
    fn zero_guess_checkpoint_reports_zero_rates() {
        let g = letter_grammar(&[("a", 0.6), ("b", 0.4)]);
        let target = records(&[("a", 3), ("b", 1)]);
        let report = attack(&g, &target, 2, &[0, 2]).unwrap();
        assert_eq!(report.checkpoints[0].guesses, 0);
        assert_eq!(report.checkpoints[0].r_po, 0.0);
        assert_eq!(report.checkpoints[0].r_pa, 0.0);
        assert_eq!(report.checkpoints[1].r_po, 1.0);

        let bundle = abc_bundle();
        let mc = estimate_coverage_mc(&g, &target, &bundle, &[0], 1000, 5).unwrap();
        assert_eq!(mc.checkpoints[0].r_po, 0.0);
        assert_eq!(mc.checkpoints[0].r_pa, 0.0);
    }
}
