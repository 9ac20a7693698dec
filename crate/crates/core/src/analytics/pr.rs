//! Pseudo-label precision and recall, overall and per class-frequency group.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gating::PseudoLabelDecision;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Head,
    Body,
    Tail,
}

/// Partition of the classes into head (most frequent), body, and tail
/// (least frequent).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassGroups {
    head: Vec<usize>,
    body: Vec<usize>,
    tail: Vec<usize>,
    group_of: Vec<Group>,
}

impl ClassGroups {
    /// Ranks classes by count, descending, with ties broken by lower index.
    pub fn from_counts(class_counts: &[usize], n_head: usize, n_tail: usize) -> Result<Self> {
        let k = class_counts.len();
        if n_head + n_tail > k {
            return Err(Error::InvalidArgument(format!(
                "{n_head} head + {n_tail} tail classes exceed {k} classes"
            )));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| class_counts[b].cmp(&class_counts[a]).then(a.cmp(&b)));
        let mut group_of = vec![Group::Body; k];
        let head: Vec<usize> = order[..n_head].to_vec();
        let tail: Vec<usize> = order[k - n_tail..].to_vec();
        let body: Vec<usize> = order[n_head..k - n_tail].to_vec();
        head.iter().for_each(|&c| group_of[c] = Group::Head);
        tail.iter().for_each(|&c| group_of[c] = Group::Tail);
        Ok(ClassGroups {
            head,
            body,
            tail,
            group_of,
        })
    }

    pub fn head(&self) -> &[usize] {
        &self.head
    }

    pub fn body(&self) -> &[usize] {
        &self.body
    }

    pub fn tail(&self) -> &[usize] {
        &self.tail
    }

    pub fn num_classes(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, class: usize) -> Option<Group> {
        self.group_of.get(class).copied()
    }
}

/// A precision/recall pair; `None` when the denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PrCell {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PrTable {
    pub overall: PrCell,
    pub head: PrCell,
    pub body: PrCell,
    pub tail: PrCell,
}

/// Renders an optional metric: 17 significant digits or `undef`.
pub fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undef".to_string(), |x| format!("{x:.16e}"))
}

impl fmt::Display for PrTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let short = |v: Option<f64>| v.map_or_else(|| "undef".to_string(), |x| format!("{x:.4}"));
        writeln!(f, "group      precision  recall")?;
        for (name, c) in [("overall", self.overall), ("head", self.head), ("body", self.body), ("tail", self.tail)] {
            writeln!(f, "{name:<10} {:<10} {}", short(c.precision), short(c.recall))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    /// gated with predicted class in the group
    gated: u64,
    /// ... and predicted == true
    gated_correct: u64,
    /// true class in the group
    truth: u64,
    /// ... and gated with predicted == true
    truth_hit: u64,
}

impl Tally {
    fn cell(&self) -> PrCell {
        let ratio = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
        PrCell {
            precision: ratio(self.gated_correct, self.gated),
            recall: ratio(self.truth_hit, self.truth),
        }
    }
}

/// Incremental counts behind [`pseudo_pr`], for windowed accumulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrCounts {
    overall: Tally,
    groups: [Tally; 3],
    decisions: u64,
    ood_gated: u64,
}

fn slot(g: Group) -> usize {
    match g {
        Group::Head => 0,
        Group::Body => 1,
        Group::Tail => 2,
    }
}

impl PrCounts {
    pub fn new() -> Self {
        PrCounts {
            overall: Tally::default(),
            groups: [Tally::default(); 3],
            decisions: 0,
            ood_gated: 0,
        }
    }

    pub fn add(&mut self, d: &PseudoLabelDecision, groups: &ClassGroups) {
        self.decisions += 1;
        let correct = d.gated && d.true_class == Some(d.predicted_class);
        if d.gated {
            self.overall.gated += 1;
            self.overall.gated_correct += u64::from(correct);
            if d.true_class.is_none() {
                self.ood_gated += 1;
            }
            if let Some(g) = groups.group_of(d.predicted_class) {
                let t = &mut self.groups[slot(g)];
                t.gated += 1;
                t.gated_correct += u64::from(correct);
            }
        }
        if let Some(truth) = d.true_class {
            self.overall.truth += 1;
            self.overall.truth_hit += u64::from(correct);
            if let Some(g) = groups.group_of(truth) {
                let t = &mut self.groups[slot(g)];
                t.truth += 1;
                t.truth_hit += u64::from(correct);
            }
        }
    }

    pub fn extend<'a>(&mut self, ds: impl IntoIterator<Item = &'a PseudoLabelDecision>, groups: &ClassGroups) {
        ds.into_iter().for_each(|d| self.add(d, groups));
    }

    pub fn table(&self) -> PrTable {
        PrTable {
            overall: self.overall.cell(),
            head: self.groups[0].cell(),
            body: self.groups[1].cell(),
            tail: self.groups[2].cell(),
        }
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn gated(&self) -> u64 {
        self.overall.gated
    }

    pub fn ood_gated(&self) -> u64 {
        self.ood_gated
    }
}

impl Default for PrCounts {
    fn default() -> Self {
        Self::new()
    }
}

/// Precision and recall of gated pseudo-labels.
///
/// For a group `G`: precision counts gated decisions whose predicted class
/// is in `G`, recall counts decisions whose true class is in `G`. OOD
/// decisions count as wrong in precision and are left out of recall.
pub fn pseudo_pr(decisions: &[PseudoLabelDecision], groups: &ClassGroups) -> PrTable {
    let mut c = PrCounts::new();
    c.extend(decisions, groups);
    c.table()
}

/// Gated decisions on out-of-distribution samples.
pub fn ood_inclusion(decisions: &[PseudoLabelDecision]) -> usize {
    decisions.iter().filter(|d| d.gated && d.true_class.is_none()).count()
}
