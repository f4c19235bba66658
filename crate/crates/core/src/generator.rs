//! Guess enumeration in non-increasing probability order, and Monte Carlo
//! guess-rank estimation.
//!
//! Enumeration keeps one priority queue over partial derivations: each node
//! fixes a pattern and one terminal index per slot. Popping a node emits its
//! password and pushes the successors obtained by bumping one slot index at
//! or after the node's pivot, so every derivation is generated exactly once
//! and memory stays proportional to the frontier, not to the number of
//! guesses.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::corpus::ResourceBundle;
use crate::model::{Sft, SmoothedGrammar};
use crate::segmenter::{segment, SegmentError};

type Assignment = SmallVec<[u32; 6]>;

/// Terminal entries of one SFT in emission order: observed entries with
/// probability above the USF share, then the unobserved tail (uniform,
/// lexicographic), then observed entries below the share. Ties between an
/// observed probability and the USF share force materialization so the
/// global lexicographic tie-break stays exact.
struct TerminalTable {
    sft: Sft,
    above: Vec<(String, f64)>,
    tail_len: u64,
    tail_logp: f64,
    below: Vec<(String, f64)>,
}

impl TerminalTable {
    fn build(grammar: &SmoothedGrammar, sft: Sft) -> TerminalTable {
        let base = grammar.base();
        let mut observed: Vec<(String, f64)> = base
            .terminal_rules(sft)
            .map(|(sf, _, _)| {
                let lp = grammar
                    .terminal_log_probability(sft, sf)
                    .expect("observed factor has mass");
                (sf.to_string(), lp)
            })
            .collect();
        observed.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let tail_len = grammar.usf_count(sft);
        let unit = grammar.usf_unit_probability(sft);
        if tail_len == 0 || unit <= 0.0 {
            return TerminalTable {
                sft,
                above: observed,
                tail_len: 0,
                tail_logp: f64::NEG_INFINITY,
                below: Vec::new(),
            };
        }
        let tail_logp = grammar
            .usf_unit_log_probability(sft)
            .expect("smoothing entry exists");
        if observed.iter().any(|(_, lp)| *lp == tail_logp) {
            // Exact probability tie between observed and unobserved factors:
            // fold the tail in and sort everything together.
            let mut all = observed;
            for k in 0..tail_len {
                all.push((grammar.usf_nth(sft, k).expect("k < tail"), tail_logp));
            }
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            return TerminalTable {
                sft,
                above: all,
                tail_len: 0,
                tail_logp: f64::NEG_INFINITY,
                below: Vec::new(),
            };
        }
        let split = observed.partition_point(|(_, lp)| *lp > tail_logp);
        let below = observed.split_off(split);
        TerminalTable {
            sft,
            above: observed,
            tail_len,
            tail_logp,
            below,
        }
    }

    fn len(&self) -> u64 {
        self.above.len() as u64 + self.tail_len + self.below.len() as u64
    }

    fn log_prob(&self, idx: u32) -> f64 {
        let idx = idx as u64;
        let a = self.above.len() as u64;
        if idx < a {
            self.above[idx as usize].1
        } else if idx < a + self.tail_len {
            self.tail_logp
        } else {
            self.below[(idx - a - self.tail_len) as usize].1
        }
    }

    fn factor<'a>(&'a self, idx: u32, grammar: &SmoothedGrammar) -> Cow<'a, str> {
        let idx = idx as u64;
        let a = self.above.len() as u64;
        if idx < a {
            Cow::Borrowed(self.above[idx as usize].0.as_str())
        } else if idx < a + self.tail_len {
            Cow::Owned(
                grammar
                    .usf_nth(self.sft, idx - a)
                    .expect("index within tail"),
            )
        } else {
            Cow::Borrowed(self.below[(idx - a - self.tail_len) as usize].0.as_str())
        }
    }
}

struct PatternInfo {
    log_prob: f64,
    slots: SmallVec<[u16; 6]>,
}

struct Node {
    log_prob: f64,
    pattern: u32,
    pivot: u32,
    assignment: Assignment,
}

/// Streaming enumerator over a smoothed grammar's derivations in
/// non-increasing probability order, ties broken lexicographically by
/// pattern and then by factor strings.
pub struct GuessStream<'g> {
    grammar: &'g SmoothedGrammar,
    tables: Vec<TerminalTable>,
    patterns: Vec<PatternInfo>,
    heap: Vec<Node>,
    emitted: u64,
    peak_frontier: usize,
    out_buf: String,
}

impl<'g> GuessStream<'g> {
    pub fn new(grammar: &'g SmoothedGrammar) -> Self {
        let mut table_ids: BTreeMap<Sft, u16> = BTreeMap::new();
        let mut tables: Vec<TerminalTable> = Vec::new();
        let mut patterns = Vec::new();

        // BTreeMap iteration gives patterns in lexicographic taxonomy
        // order, which doubles as the tie-break rank.
        for (pattern, _, _) in grammar.base().patterns() {
            let plp = grammar
                .base()
                .start_log_probability(pattern)
                .expect("listed pattern");
            let mut slots = SmallVec::new();
            let mut viable = true;
            for &sft in pattern.sfts() {
                let id = *table_ids.entry(sft).or_insert_with(|| {
                    tables.push(TerminalTable::build(grammar, sft));
                    (tables.len() - 1) as u16
                });
                if tables[id as usize].len() == 0 {
                    viable = false;
                }
                slots.push(id);
            }
            if viable {
                patterns.push(PatternInfo {
                    log_prob: plp,
                    slots,
                });
            }
        }

        let mut stream = GuessStream {
            grammar,
            tables,
            patterns,
            heap: Vec::new(),
            emitted: 0,
            peak_frontier: 0,
            out_buf: String::new(),
        };
        for pid in 0..stream.patterns.len() {
            let assignment: Assignment = stream.patterns[pid].slots.iter().map(|_| 0u32).collect();
            let node = stream.make_node(pid as u32, 0, assignment);
            stream.push(node);
        }
        stream.peak_frontier = stream.heap.len();
        stream
    }

    /// Canonical node score: pattern log probability plus the slot log
    /// probabilities summed left to right.
    fn make_node(&self, pattern: u32, pivot: u32, assignment: Assignment) -> Node {
        let info = &self.patterns[pattern as usize];
        let mut lp = info.log_prob;
        for (k, &idx) in assignment.iter().enumerate() {
            lp += self.tables[info.slots[k] as usize].log_prob(idx);
        }
        Node {
            log_prob: lp,
            pattern,
            pivot,
            assignment,
        }
    }

    fn node_before(
        tables: &[TerminalTable],
        patterns: &[PatternInfo],
        grammar: &SmoothedGrammar,
        a: &Node,
        b: &Node,
    ) -> bool {
        match a.log_prob.total_cmp(&b.log_prob) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                if a.pattern != b.pattern {
                    return a.pattern < b.pattern;
                }
                let info = &patterns[a.pattern as usize];
                for (k, (&ia, &ib)) in a.assignment.iter().zip(&b.assignment).enumerate() {
                    if ia == ib {
                        continue;
                    }
                    let table = &tables[info.slots[k] as usize];
                    let fa = table.factor(ia, grammar);
                    let fb = table.factor(ib, grammar);
                    match fa.cmp(&fb) {
                        std::cmp::Ordering::Less => return true,
                        std::cmp::Ordering::Greater => return false,
                        std::cmp::Ordering::Equal => {}
                    }
                }
                false
            }
        }
    }

    fn push(&mut self, node: Node) {
        let Self {
            heap,
            tables,
            patterns,
            grammar,
            ..
        } = self;
        heap.push(node);
        let mut i = heap.len() - 1;
        while i > 0 {
            let parent = (i - 1) / 2;
            if Self::node_before(tables, patterns, grammar, &heap[i], &heap[parent]) {
                heap.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn pop(&mut self) -> Option<Node> {
        let Self {
            heap,
            tables,
            patterns,
            grammar,
            ..
        } = self;
        if heap.is_empty() {
            return None;
        }
        let last = heap.len() - 1;
        heap.swap(0, last);
        let top = heap.pop();
        let mut i = 0;
        let len = heap.len();
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut best = i;
            if l < len && Self::node_before(tables, patterns, grammar, &heap[l], &heap[best]) {
                best = l;
            }
            if r < len && Self::node_before(tables, patterns, grammar, &heap[r], &heap[best]) {
                best = r;
            }
            if best == i {
                break;
            }
            heap.swap(i, best);
            i = best;
        }
        top
    }

    /// Emit the next guess, borrowing the internal buffer. Returns the
    /// password and its linear probability, or `None` when exhausted.
    pub fn next_guess_ref(&mut self) -> Option<(&str, f64)> {
        let node = self.pop()?;
        let slots = self.patterns[node.pattern as usize].slots.clone();

        self.out_buf.clear();
        for (k, &idx) in node.assignment.iter().enumerate() {
            let table = &self.tables[slots[k] as usize];
            self.out_buf.push_str(&table.factor(idx, self.grammar));
        }

        let slot_count = node.assignment.len() as u32;
        for k in node.pivot..slot_count {
            let idx = node.assignment[k as usize];
            let table_len = self.tables[slots[k as usize] as usize].len();
            if (idx as u64) + 1 < table_len {
                let mut next = node.assignment.clone();
                next[k as usize] = idx + 1;
                let child = self.make_node(node.pattern, k, next);
                self.push(child);
            }
        }
        if self.heap.len() > self.peak_frontier {
            self.peak_frontier = self.heap.len();
        }

        self.emitted += 1;
        Some((self.out_buf.as_str(), node.log_prob.exp()))
    }

    /// Emit the next guess as an owned string.
    pub fn next_guess(&mut self) -> Option<(String, f64)> {
        self.next_guess_ref().map(|(pw, p)| (pw.to_string(), p))
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Largest number of pending derivations held at once.
    pub fn peak_frontier(&self) -> usize {
        self.peak_frontier
    }
}

/// Stream up to `max_guesses` guesses into `sink` in probability order.
/// Returns the number of guesses emitted; a sink error aborts and
/// propagates.
pub fn generate<E>(
    grammar: &SmoothedGrammar,
    max_guesses: u64,
    mut sink: impl FnMut(&str, f64) -> Result<(), E>,
) -> Result<u64, E> {
    let mut stream = GuessStream::new(grammar);
    let mut emitted = 0;
    while emitted < max_guesses {
        match stream.next_guess_ref() {
            Some((pw, prob)) => {
                sink(pw, prob)?;
                emitted += 1;
            }
            None => break,
        }
    }
    Ok(emitted)
}

/// Monte Carlo rank estimate for one password.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEstimate {
    /// Model probability of the password (0 when outside the support).
    pub probability: f64,
    /// Expected number of guesses with probability at least as high;
    /// infinite when the password has no mass.
    pub estimated_rank: f64,
    pub sample_count: u64,
}

struct SampleSlot {
    /// Cumulative scaled linear probabilities of observed factors, paired
    /// with their canonical log probabilities.
    observed_cum: Vec<(f64, f64)>,
    observed_total: f64,
    tail_len: u64,
    unit_prob: f64,
    tail_logp: f64,
}

/// Samples passwords from the grammar by ancestral sampling and answers
/// rank queries with the inverse-probability estimator: the rank of
/// probability `p` is the sample mean of `1/q` over sampled passwords with
/// probability `q >= p`.
pub struct MonteCarloEstimator {
    /// Sampled derivation log probabilities, ascending.
    sorted: Vec<f64>,
    /// `suffix_inv[i]` = sum of `1/q` over samples `i..`.
    suffix_inv: Vec<f64>,
    samples: u64,
}

impl MonteCarloEstimator {
    /// Draw `samples` passwords from the grammar. Panics when `samples`
    /// is zero.
    pub fn new(grammar: &SmoothedGrammar, samples: u64, seed: u64) -> Self {
        assert!(samples >= 1, "need at least one sample");
        let base = grammar.base();

        let mut pattern_cum = Vec::new();
        let mut patterns = Vec::new();
        let mut acc = 0.0;
        for (pattern, prob, _) in base.patterns() {
            acc += prob;
            pattern_cum.push(acc);
            patterns.push((
                base.start_log_probability(pattern).expect("listed"),
                pattern.sfts().to_vec(),
            ));
        }

        let mut slots: BTreeMap<Sft, SampleSlot> = BTreeMap::new();
        for sft in base.sfts() {
            let mut observed_cum = Vec::new();
            let mut total = 0.0;
            for (sf, _, _) in base.terminal_rules(sft) {
                let p = grammar.terminal_probability(sft, sf);
                let lp = grammar
                    .terminal_log_probability(sft, sf)
                    .expect("observed factor");
                total += p;
                observed_cum.push((total, lp));
            }
            let unit_prob = grammar.usf_unit_probability(sft);
            slots.insert(
                sft,
                SampleSlot {
                    observed_cum,
                    observed_total: total,
                    tail_len: grammar.usf_count(sft),
                    unit_prob,
                    tail_logp: grammar
                        .usf_unit_log_probability(sft)
                        .unwrap_or(f64::NEG_INFINITY),
                },
            );
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pattern_total = *pattern_cum.last().expect("non-empty grammar");
        let mut sorted = Vec::with_capacity(samples as usize);
        'sampling: for _ in 0..samples {
            let u: f64 = rng.random::<f64>() * pattern_total;
            let pid = pattern_cum
                .partition_point(|c| *c <= u)
                .min(patterns.len() - 1);
            let (plp, sfts) = &patterns[pid];
            let mut lp = *plp;
            for &sft in sfts {
                let slot = &slots[&sft];
                let mass = slot.observed_total + slot.unit_prob * slot.tail_len as f64;
                if mass <= 0.0 {
                    // Pattern references an SFT with no mass; the pattern
                    // itself generates nothing, skip the sample.
                    continue 'sampling;
                }
                let u: f64 = rng.random::<f64>() * mass;
                if u < slot.observed_total || slot.tail_len == 0 {
                    let i = slot
                        .observed_cum
                        .partition_point(|(c, _)| *c <= u)
                        .min(slot.observed_cum.len() - 1);
                    lp += slot.observed_cum[i].1;
                } else {
                    lp += slot.tail_logp;
                }
            }
            sorted.push(lp);
        }
        sorted.sort_by(f64::total_cmp);

        let mut suffix_inv = vec![0.0; sorted.len() + 1];
        for i in (0..sorted.len()).rev() {
            suffix_inv[i] = suffix_inv[i + 1] + (-sorted[i]).exp();
        }

        MonteCarloEstimator {
            sorted,
            suffix_inv,
            samples,
        }
    }

    /// Estimated rank of a password with the given log probability.
    pub fn rank_of_log_probability(&self, log_prob: f64) -> f64 {
        let i = self.sorted.partition_point(|lp| *lp < log_prob);
        let rank = self.suffix_inv[i] / self.samples as f64;
        rank.max(1.0)
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }
}

/// Segment a password, score it under the grammar and estimate its guess
/// rank from `samples` ancestral samples.
pub fn estimate_rank(
    grammar: &SmoothedGrammar,
    password: &str,
    bundle: &ResourceBundle,
    samples: u64,
    seed: u64,
) -> Result<RankEstimate, SegmentError> {
    let seg = segment(password, bundle)?;
    let log_prob = grammar.password_log_probability(&seg);
    let estimate = match log_prob {
        Some(lp) => {
            let estimator = MonteCarloEstimator::new(grammar, samples, seed);
            RankEstimate {
                probability: lp.exp(),
                estimated_rank: estimator.rank_of_log_probability(lp),
                sample_count: samples,
            }
        }
        None => RankEstimate {
            probability: 0.0,
            estimated_rank: f64::INFINITY,
            sample_count: samples,
        },
    };
    Ok(estimate)
}
