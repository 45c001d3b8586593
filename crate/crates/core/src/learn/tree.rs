use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::LearnerConfig;
use super::decode::ActivationMatrix;
use crate::dsl::{Association, EvalExpr, PrimitiveRegistry, Resource};

/// A range of the distance feature; either end may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "IntervalRepr", from = "IntervalRepr")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl From<Interval> for IntervalRepr {
    fn from(i: Interval) -> Self {
        Self {
            lower: i.lower.is_finite().then_some(i.lower),
            upper: i.upper.is_finite().then_some(i.upper),
        }
    }
}

impl From<IntervalRepr> for Interval {
    fn from(r: IntervalRepr) -> Self {
        Self {
            lower: r.lower.unwrap_or(f64::NEG_INFINITY),
            upper: r.upper.unwrap_or(f64::INFINITY),
        }
    }
}

impl Interval {
    pub const ALL: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, d: f64) -> bool {
        self.lower < d && d < self.upper
    }

    /// Both endpoints within `delta`; an unbounded end only matches an
    /// unbounded end.
    pub fn matches(&self, other: &Interval, delta: f64) -> bool {
        let close = |a: f64, b: f64| {
            if a.is_finite() && b.is_finite() {
                (a - b).abs() <= delta
            } else {
                a == b
            }
        };
        close(self.lower, other.lower) && close(self.upper, other.upper)
    }

    /// The guard expressing this interval, with finite thresholds rounded
    /// outward to multiples of `step`. `None` when unbounded on both sides.
    pub fn to_eval(&self, step: f64) -> Option<EvalExpr> {
        // tolerate representation error before rounding outward
        let lo = (self.lower / step + 1e-9).floor() * step;
        let hi = (self.upper / step - 1e-9).ceil() * step;
        let lo = (lo / step).round() * step;
        let hi = (hi / step).round() * step;
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (false, false) => None,
            (true, false) => Some(EvalExpr::above(tidy(lo))),
            (false, true) => Some(EvalExpr::below(tidy(hi))),
            (true, true) => Some(EvalExpr::Interval {
                lower: tidy(lo),
                upper: tidy(hi),
            }),
        }
    }
}

// 5.050000000000001 -> 5.05
fn tidy(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float")
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("association active for {found} ticks, needs {needed}")]
    InsufficientSupport { found: usize, needed: usize },
    #[error("activation and feature lengths differ ({0} vs {1})")]
    Length(usize, usize),
}

/// Half-open `[start, end)` runs of `true`.
pub fn runs(w: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (t, &on) in w.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, w.len()));
    }
    out
}

/// Clears runs shorter than `min_len`.
pub fn drop_short_runs(w: &[bool], min_len: usize) -> Vec<bool> {
    let mut out = vec![false; w.len()];
    for (s, e) in runs(w) {
        if e - s >= min_len {
            out[s..e].fill(true);
        }
    }
    out
}

/// Interval covering the feature on every active tick, widened by
/// `config.margin`. Ends near the feature's overall extremes are left open.
pub fn fit_evaluation(
    phi: &[f64],
    w: &[bool],
    config: &LearnerConfig,
) -> Result<Interval, FitError> {
    if phi.len() != w.len() {
        return Err(FitError::Length(w.len(), phi.len()));
    }
    let found = w.iter().filter(|&&x| x).count();
    if found == 0 || found < config.min_support {
        return Err(FitError::InsufficientSupport {
            found,
            needed: config.min_support.max(1),
        });
    }
    let (gmin, gmax) = phi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| {
            (a.min(d), b.max(d))
        });
    let (lo, hi) = phi
        .iter()
        .zip(w)
        .filter(|(_, &on)| on)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (&d, _)| {
            (a.min(d), b.max(d))
        });
    Ok(Interval {
        lower: if lo - gmin <= config.snap {
            f64::NEG_INFINITY
        } else {
            lo - config.margin
        },
        upper: if gmax - hi <= config.snap {
            f64::INFINITY
        } else {
            hi + config.margin
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatLeaf {
    pub association: Association,
    pub resource: Resource,
    pub interval: Interval,
    /// Ticks the association was active.
    pub support: usize,
    /// Position in the registry's association order.
    pub rank: usize,
}

/// Unordered sensor-motor associations, each with its own guard.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlatTree {
    pub leaves: Vec<FlatLeaf>,
}

/// Splits partial overlaps between same-resource intervals at the middle
/// of the overlap.
fn separate(leaves: &mut [FlatLeaf]) {
    let n = leaves.len();
    for i in 0..n {
        for j in 0..n {
            if i == j || leaves[i].resource != leaves[j].resource {
                continue;
            }
            let (a, b) = (leaves[i].interval, leaves[j].interval);
            if a.lower < b.lower && b.lower < a.upper && a.upper < b.upper {
                let mid = 0.5 * (b.lower + a.upper);
                leaves[i].interval.upper = mid;
                leaves[j].interval.lower = mid;
            }
        }
    }
}

pub fn build_flat_tree(
    matrix: &ActivationMatrix,
    phi: &[f64],
    registry: &PrimitiveRegistry,
    config: &LearnerConfig,
) -> FlatTree {
    let universe = registry.associations();
    let mut leaves = Vec::new();
    for (resource, a) in matrix.associations() {
        let w = drop_short_runs(&matrix.active(&a), config.min_support);
        let Ok(interval) = fit_evaluation(phi, &w, config) else {
            continue;
        };
        leaves.push(FlatLeaf {
            rank: universe.iter().position(|u| *u == a).unwrap_or(usize::MAX),
            support: w.iter().filter(|&&x| x).count(),
            association: a,
            resource,
            interval,
        });
    }
    leaves.sort_by_key(|l| l.rank);
    separate(&mut leaves);
    FlatTree { leaves }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub interval: Interval,
    pub members: Vec<FlatLeaf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalTree {
    pub groups: Vec<Group>,
    pub ungrouped: Vec<FlatLeaf>,
}

impl HierarchicalTree {
    /// Back to a flat tree, each member carrying its group's interval.
    pub fn flatten(&self) -> FlatTree {
        let mut leaves: Vec<FlatLeaf> = self
            .groups
            .iter()
            .flat_map(|g| {
                g.members.iter().map(|m| FlatLeaf {
                    interval: g.interval,
                    ..m.clone()
                })
            })
            .chain(self.ungrouped.iter().cloned())
            .collect();
        leaves.sort_by_key(|l| l.rank);
        FlatTree { leaves }
    }
}

fn mean_interval(members: &[&FlatLeaf]) -> Interval {
    let mean = |f: fn(&Interval) -> f64| {
        let vals: Vec<f64> = members.iter().map(|m| f(&m.interval)).collect();
        if vals.iter().all(|&v| v == vals[0]) {
            vals[0]
        } else if vals.iter().all(|v| v.is_finite()) {
            vals.iter().sum::<f64>() / vals.len() as f64
        } else {
            vals[0]
        }
    };
    Interval {
        lower: mean(|i| i.lower),
        upper: mean(|i| i.upper),
    }
}

/// Group name for an index: A..Z, then AA, AB, ...
pub fn group_name(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Groups leaves whose intervals agree within `delta` at both ends,
/// transitively. Groups are merged again whenever their mean intervals
/// agree, so factorizing the flattened result changes nothing.
pub fn factorize(flat: &FlatTree, delta: f64) -> HierarchicalTree {
    let mut leaves: Vec<&FlatLeaf> = flat.leaves.iter().collect();
    leaves.sort_by(|a, b| (a.rank, &a.association).cmp(&(b.rank, &b.association)));

    let mut units: Vec<Vec<usize>> = (0..leaves.len()).map(|i| vec![i]).collect();
    loop {
        let intervals: Vec<Interval> = units
            .iter()
            .map(|u| mean_interval(&u.iter().map(|&i| leaves[i]).collect::<Vec<_>>()))
            .collect();
        let mut parent: Vec<usize> = (0..units.len()).collect();
        let mut merged = false;
        for i in 0..units.len() {
            for j in i + 1..units.len() {
                if intervals[i].matches(&intervals[j], delta) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj.max(ri)] = ri.min(rj);
                        merged = true;
                    }
                }
            }
        }
        if !merged {
            break;
        }
        let mut next: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; units.len()];
        for (i, unit) in units.iter().enumerate() {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = next.len();
                next.push(Vec::new());
            }
            next[slot[r]].extend(unit.iter().copied());
        }
        for u in &mut next {
            u.sort_unstable();
        }
        units = next;
    }

    let mut groups = Vec::new();
    let mut ungrouped = Vec::new();
    for u in units {
        let members: Vec<&FlatLeaf> = u.iter().map(|&i| leaves[i]).collect();
        if members.len() == 1 {
            ungrouped.push(members[0].clone());
        } else {
            groups.push(Group {
                name: String::new(),
                interval: mean_interval(&members),
                members: members.into_iter().cloned().collect(),
            });
        }
    }
    // far-field first
    groups.sort_by(|a, b| {
        b.interval
            .lower
            .total_cmp(&a.interval.lower)
            .then(b.interval.upper.total_cmp(&a.interval.upper))
            .then(a.members[0].rank.cmp(&b.members[0].rank))
    });
    for (i, g) in groups.iter_mut().enumerate() {
        g.name = group_name(i);
    }
    HierarchicalTree { groups, ungrouped }
}
