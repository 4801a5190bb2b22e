//! Partition of the pair grid `(x_t, x_{t+1})` into domains, and the A/B/C
//! split of the square box around the central Yellow domain.
//!
//! Each `*0` domain is the point reflection of its `*1` twin through
//! `(1/2, 1/2)`. The classifier evaluates a `*0` definition by evaluating the
//! `*1` definition at the reflected point; for points built from integer
//! counts the reflection is exact (`k ↦ n - k`), so the labelling is exactly
//! reflection-symmetric on the grid.
//!
//! Boundaries follow the written inequalities (strict or not) with no
//! smoothing. Overlaps are resolved by the fixed precedence
//! Green → Purple → Red → Cyan → Yellow, with the `*1` variant before the `*0`
//! variant; [`audit_partition`] reports where the precedence was needed and
//! which points no definition covers.
//!
//! The Yellow band on `x_t` is read as `1/2 - 3δ <= x_t <= 1/2 + 3δ`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::AnalysisConstants;

/// A point `(x_t, x_{t+1})` of the grid `{0, 1/n, …, 1}²`, or an off-grid
/// analysis point when built from reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x_t: f64,
    pub x_t1: f64,
    counts: Option<(u64, u64, u64)>,
}

impl GridPoint {
    /// Off-grid point from two fractions.
    pub fn new(x_t: f64, x_t1: f64) -> Self {
        GridPoint {
            x_t,
            x_t1,
            counts: None,
        }
    }

    /// Grid point `(k_t / n, k_t1 / n)`.
    pub fn from_counts(k_t: u64, k_t1: u64, n: u64) -> Self {
        assert!(n > 0 && k_t <= n && k_t1 <= n, "counts ({k_t}, {k_t1}) outside grid of size {n}");
        let nf = n as f64;
        GridPoint {
            x_t: k_t as f64 / nf,
            x_t1: k_t1 as f64 / nf,
            counts: Some((k_t, k_t1, n)),
        }
    }

    /// Snap two fractions to the grid when both are multiples of `1/n` within
    /// `1e-9`; otherwise keep them as an off-grid point.
    pub fn snapped(x_t: f64, x_t1: f64, n: u64) -> Self {
        let nf = n as f64;
        let snap = |x: f64| {
            let k = (x * nf).round();
            ((x * nf - k).abs() < 1e-9 && (0.0..=nf).contains(&k)).then_some(k as u64)
        };
        match (snap(x_t), snap(x_t1)) {
            (Some(a), Some(b)) => Self::from_counts(a, b, n),
            _ => Self::new(x_t, x_t1),
        }
    }

    pub fn counts(&self) -> Option<(u64, u64, u64)> {
        self.counts
    }

    pub fn is_on_grid(&self) -> bool {
        self.counts.is_some()
    }

    /// Reflection through `(1/2, 1/2)`.
    pub fn reflect(&self) -> GridPoint {
        match self.counts {
            Some((a, b, n)) => GridPoint::from_counts(n - a, n - b, n),
            None => GridPoint::new(1.0 - self.x_t, 1.0 - self.x_t1),
        }
    }

    /// Coordinates relative to the centre, `(x_t - 1/2, x_{t+1} - 1/2)`; exact
    /// negation under [`reflect`](Self::reflect) for grid points.
    pub fn centered(&self) -> (f64, f64) {
        match self.counts {
            Some((a, b, n)) => {
                let d = 2.0 * n as f64;
                ((2.0 * a as f64 - n as f64) / d, (2.0 * b as f64 - n as f64) / d)
            }
            None => (self.x_t - 0.5, self.x_t1 - 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainLabel {
    Green1,
    Green0,
    Purple1,
    Purple0,
    Red1,
    Red0,
    Cyan1,
    Cyan0,
    Yellow,
    Unclassified,
}

impl DomainLabel {
    /// Labels in precedence order (`Unclassified` excluded).
    pub const ORDERED: [DomainLabel; 9] = [
        DomainLabel::Green1,
        DomainLabel::Green0,
        DomainLabel::Purple1,
        DomainLabel::Purple0,
        DomainLabel::Red1,
        DomainLabel::Red0,
        DomainLabel::Cyan1,
        DomainLabel::Cyan0,
        DomainLabel::Yellow,
    ];

    /// The label of the reflected point.
    pub fn mirror(self) -> DomainLabel {
        use DomainLabel::*;
        match self {
            Green1 => Green0,
            Green0 => Green1,
            Purple1 => Purple0,
            Purple0 => Purple1,
            Red1 => Red0,
            Red0 => Red1,
            Cyan1 => Cyan0,
            Cyan0 => Cyan1,
            Yellow => Yellow,
            Unclassified => Unclassified,
        }
    }

    pub fn as_str(self) -> &'static str {
        use DomainLabel::*;
        match self {
            Green1 => "Green1",
            Green0 => "Green0",
            Purple1 => "Purple1",
            Purple0 => "Purple0",
            Red1 => "Red1",
            Red0 => "Red0",
            Cyan1 => "Cyan1",
            Cyan0 => "Cyan0",
            Yellow => "Yellow",
            Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum YellowLabel {
    A1,
    A0,
    B1,
    B0,
    C1,
    C0,
    OutsideYellowPrime,
}

impl YellowLabel {
    pub fn mirror(self) -> YellowLabel {
        use YellowLabel::*;
        match self {
            A1 => A0,
            A0 => A1,
            B1 => B0,
            B0 => B1,
            C1 => C0,
            C0 => C1,
            OutsideYellowPrime => OutsideYellowPrime,
        }
    }

    pub fn as_str(self) -> &'static str {
        use YellowLabel::*;
        match self {
            A1 => "A1",
            A0 => "A0",
            B1 => "B1",
            B0 => "B0",
            C1 => "C1",
            C0 => "C0",
            OutsideYellowPrime => "OutsideYellowPrime",
        }
    }
}

impl fmt::Display for YellowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn green1(p: &GridPoint, k: &AnalysisConstants) -> bool {
    p.x_t1 >= p.x_t + k.delta
}

fn purple1(p: &GridPoint, k: &AnalysisConstants) -> bool {
    let (x, y) = (p.x_t, p.x_t1);
    k.inv_log_n() <= x && x < 0.5 - 3.0 * k.delta && (1.0 - k.lambda_n) * x <= y && y < x + k.delta
}

fn red1(p: &GridPoint, k: &AnalysisConstants) -> bool {
    let (x, y) = (p.x_t, p.x_t1);
    k.inv_log_n() <= y && x < 0.5 - 3.0 * k.delta && x - k.delta <= y && y < (1.0 - k.lambda_n) * x
}

fn cyan1(p: &GridPoint, k: &AnalysisConstants) -> bool {
    let (x, y) = (p.x_t, p.x_t1);
    let m = x.min(y);
    0.0 <= m && m < k.inv_log_n() && x - k.delta < y && y < x + k.delta
}

fn yellow(p: &GridPoint, k: &AnalysisConstants) -> bool {
    let (u, v) = p.centered();
    let d = k.delta;
    u.abs() <= 3.0 * d && v.abs() <= 4.0 * d && (v - u).abs() < d
}

/// Membership of `point` in every domain definition, in precedence order.
pub fn memberships(point: &GridPoint, constants: &AnalysisConstants) -> [bool; 9] {
    let r = point.reflect();
    [
        green1(point, constants),
        green1(&r, constants),
        purple1(point, constants),
        purple1(&r, constants),
        red1(point, constants),
        red1(&r, constants),
        cyan1(point, constants),
        cyan1(&r, constants),
        yellow(point, constants),
    ]
}

/// Domain of `point`: the first matching definition under the fixed precedence,
/// or `Unclassified`.
pub fn classify(point: &GridPoint, constants: &AnalysisConstants) -> DomainLabel {
    memberships(point, constants)
        .iter()
        .position(|&m| m)
        .map_or(DomainLabel::Unclassified, |i| DomainLabel::ORDERED[i])
}

/// Whether the point lies in the square `[1/2 - 4δ, 1/2 + 4δ]²`.
pub fn in_yellow_prime(point: &GridPoint, delta: f64) -> bool {
    let (u, v) = point.centered();
    u.abs() <= 4.0 * delta && v.abs() <= 4.0 * delta
}

fn abc1(u: f64, v: f64) -> Option<YellowLabel> {
    if v >= 0.0 && v - u >= u {
        Some(YellowLabel::A1)
    } else if v >= u && v - u < u {
        Some(YellowLabel::B1)
    } else if v < 0.0 && v >= u {
        Some(YellowLabel::C1)
    } else {
        None
    }
}

/// A/B/C label inside the Yellow box, `OutsideYellowPrime` elsewhere.
///
/// The `*1` conditions are tried first (A → B → C), then the mirrored `*0`
/// ones. Every point of the box matches one of them.
pub fn classify_yellow(point: &GridPoint, delta: f64) -> YellowLabel {
    if !in_yellow_prime(point, delta) {
        return YellowLabel::OutsideYellowPrime;
    }
    let (u, v) = point.centered();
    abc1(u, v)
        .or_else(|| abc1(-u, -v).map(YellowLabel::mirror))
        .unwrap_or(YellowLabel::OutsideYellowPrime)
}

/// Grid coordinates of a point listed by the audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub k_t: u64,
    pub k_t1: u64,
    /// Every definition the point satisfies, in precedence order.
    pub matches: Vec<DomainLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: u64,
    pub delta: f64,
    pub lambda_n: f64,
    pub inv_log_n: f64,
    pub note: String,
    pub total_points: u64,
    pub covered_points: u64,
    pub uncovered_count: u64,
    pub multiply_covered_count: u64,
    /// Label counts after precedence.
    pub label_counts: BTreeMap<DomainLabel, u64>,
    /// Number of points matching each definition before precedence.
    pub definition_counts: BTreeMap<DomainLabel, u64>,
    pub uncovered: Vec<AuditPoint>,
    pub multiply_covered: Vec<AuditPoint>,
    /// `P` uncovered ⇔ its reflection uncovered, checked over the whole grid.
    pub mirror_consistent: bool,
    pub absorbing_corner: DomainLabel,
    pub cyan_corner: DomainLabel,
}

pub const YELLOW_READING_NOTE: &str =
    "Yellow band read as 1/2 - 3*delta <= x_t <= 1/2 + 3*delta; precedence Green > Purple > Red > Cyan > Yellow, variant 1 before 0";

/// Enumerate all `(n + 1)²` grid points and report coverage of the partition.
pub fn audit_partition(constants: &AnalysisConstants) -> AuditReport {
    let n = constants.n;
    let rows: Vec<(Vec<[bool; 9]>, u64)> = (0..=n)
        .into_par_iter()
        .map(|a| {
            let row: Vec<[bool; 9]> = (0..=n)
                .map(|b| memberships(&GridPoint::from_counts(a, b, n), constants))
                .collect();
            (row, a)
        })
        .collect();

    let mut label_counts = BTreeMap::new();
    let mut definition_counts = BTreeMap::new();
    let mut uncovered = Vec::new();
    let mut multiply_covered = Vec::new();
    for (row, a) in &rows {
        for (b, m) in row.iter().enumerate() {
            let matches: Vec<DomainLabel> = DomainLabel::ORDERED
                .iter()
                .zip(m)
                .filter(|(_, &hit)| hit)
                .map(|(l, _)| *l)
                .collect();
            for l in &matches {
                *definition_counts.entry(*l).or_insert(0) += 1;
            }
            let label = matches.first().copied().unwrap_or(DomainLabel::Unclassified);
            *label_counts.entry(label).or_insert(0) += 1;
            let point = AuditPoint {
                k_t: *a,
                k_t1: b as u64,
                matches,
            };
            match point.matches.len() {
                0 => uncovered.push(point),
                1 => {}
                _ => multiply_covered.push(point),
            }
        }
    }

    let is_uncovered = |a: u64, b: u64| !rows[a as usize].0[b as usize].iter().any(|&m| m);
    let mirror_consistent = (0..=n)
        .all(|a| (0..=n).all(|b| is_uncovered(a, b) == is_uncovered(n - a, n - b)));

    let total = (n + 1) * (n + 1);
    AuditReport {
        n,
        delta: constants.delta,
        lambda_n: constants.lambda_n,
        inv_log_n: constants.inv_log_n(),
        note: YELLOW_READING_NOTE.to_string(),
        total_points: total,
        covered_points: total - uncovered.len() as u64,
        uncovered_count: uncovered.len() as u64,
        multiply_covered_count: multiply_covered.len() as u64,
        label_counts,
        definition_counts,
        uncovered,
        multiply_covered,
        mirror_consistent,
        absorbing_corner: classify(&GridPoint::from_counts(n, n, n), constants),
        cyan_corner: classify(&GridPoint::from_counts(1, 1, n), constants),
    }
}
