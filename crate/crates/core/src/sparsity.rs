//! Minimal linear complexity of a sampled target, region inefficiency of a
//! network and the region-adaptive sparsity predicate.
//!
//! `L_min` is computed on the sample grid: it is the fewest pieces of a
//! continuous piecewise-linear `g`, with breakpoints at grid points, such that
//! `|g(x_i) - y_i| <= eps0` at every sample. Pieces are grown left to right;
//! for every grid point the search keeps the union of value intervals `g` can
//! take there with `k` pieces, and each admissible piece is found by clipping
//! the polygon of `(entry value, slope)` pairs against the tolerance bands.
//! Extending each piece only as far as possible is not optimal in general,
//! so all reachable breakpoints are kept.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::pwl::{sup_norm_diff, PwlFunction};

/// A continuous target known through samples on a strictly increasing grid
/// covering the compact domain `[x_0, x_{M-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    samples: Vec<(f64, f64)>,
}

/// Built-in target families for quick experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFamily {
    Abs,
    Quadratic,
    Sine,
}

impl TargetFamily {
    pub const ALL: [TargetFamily; 3] = [
        TargetFamily::Abs,
        TargetFamily::Quadratic,
        TargetFamily::Sine,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            TargetFamily::Abs => x.abs(),
            TargetFamily::Quadratic => x * x,
            TargetFamily::Sine => x.sin(),
        }
    }
}

impl FromStr for TargetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(TargetFamily::Abs),
            "quadratic" => Ok(TargetFamily::Quadratic),
            "sine" => Ok(TargetFamily::Sine),
            other => Err(Error::InvalidValue(format!(
                "unknown target family `{other}` (expected abs, quadratic or sine)"
            ))),
        }
    }
}

impl fmt::Display for TargetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetFamily::Abs => "abs",
            TargetFamily::Quadratic => "quadratic",
            TargetFamily::Sine => "sine",
        })
    }
}

impl TargetFunction {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSamples(samples.len()));
        }
        if samples
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(Error::InvalidValue("samples must be finite".into()));
        }
        if samples.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidValue(
                "sample grid must be strictly increasing".into(),
            ));
        }
        Ok(TargetFunction { samples })
    }

    /// `family` sampled on `points` uniformly spaced points of `[a, b]`.
    pub fn builtin(family: TargetFamily, a: f64, b: f64, points: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval(a, b));
        }
        if points < 2 {
            return Err(Error::InsufficientSamples(points));
        }
        let step = (b - a) / (points - 1) as f64;
        let samples = (0..points)
            .map(|i| {
                let x = if i == points - 1 {
                    b
                } else {
                    a + step * i as f64
                };
                (x, family.eval(x))
            })
            .collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// The compact domain `[x_0, x_{M-1}]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Piecewise-linear interpolant of the samples.
    pub fn interpolant(&self) -> PwlFunction {
        PwlFunction::interpolate(&self.samples).expect("validated samples")
    }
}

/// Convex polygon in the `(entry value, slope)` plane of lines leaving the
/// current breakpoint.
struct LinePolygon {
    origin: f64,
    verts: Vec<(f64, f64)>,
}

impl LinePolygon {
    /// Lines through `(x_s, u)` with `u` in `[lo, hi]` that also meet the
    /// tolerance band at `(x, y)`.
    fn new(origin: f64, lo: f64, hi: f64, x: f64, y: f64, eps: f64) -> Self {
        let d = x - origin;
        let verts = vec![
            (lo, (y - eps - lo) / d),
            (hi, (y - eps - hi) / d),
            (hi, (y + eps - hi) / d),
            (lo, (y + eps - lo) / d),
        ];
        LinePolygon { origin, verts }
    }

    /// Intersects with the half-plane `sign * (u + a d) <= bound`.
    fn clip(&mut self, d: f64, sign: f64, bound: f64, slack: f64) {
        let f = |p: (f64, f64)| sign * (p.0 + p.1 * d) - bound;
        let n = self.verts.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let p = self.verts[i];
            let q = self.verts[(i + 1) % n];
            let (fp, fq) = (f(p), f(q));
            if fp <= slack {
                out.push(p);
            }
            if (fp <= slack) != (fq <= slack) {
                let t = fp / (fp - fq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
        self.verts = out;
    }

    /// Keeps lines within `eps` of `y` at `x`; false once nothing is left.
    fn constrain(&mut self, x: f64, y: f64, eps: f64) -> bool {
        let d = x - self.origin;
        let slack = 1e-12 * (1.0 + y.abs() + eps);
        self.clip(d, 1.0, y + eps, slack);
        if !self.verts.is_empty() {
            self.clip(d, -1.0, -(y - eps), slack);
        }
        !self.verts.is_empty()
    }

    /// Range of values the admissible lines take at `x`.
    fn value_range(&self, x: f64) -> (f64, f64) {
        let d = x - self.origin;
        self.verts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.0 + p.1 * d;
                (lo.min(v), hi.max(v))
            })
    }
}

fn check_eps(eps0: f64) -> Result<()> {
    if eps0.is_finite() && eps0 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(eps0))
    }
}

/// Every sample reachable by one piece leaving `start` with a value in
/// `[lo, hi]`, with the admissible value interval at each.
fn reach(
    samples: &[(f64, f64)],
    start: usize,
    lo: f64,
    hi: f64,
    eps: f64,
    mut visit: impl FnMut(usize, f64, f64),
) {
    let origin = samples[start].0;
    let (x1, y1) = samples[start + 1];
    let mut poly = LinePolygon::new(origin, lo, hi, x1, y1, eps);
    let mut emit = |j: usize, poly: &LinePolygon| {
        let (x, y) = samples[j];
        let (a, b) = poly.value_range(x);
        let (a, b) = (a.max(y - eps), b.min(y + eps));
        visit(j, a, b.max(a));
    };
    emit(start + 1, &poly);
    for (j, &(x, y)) in samples.iter().enumerate().skip(start + 2) {
        if !poly.constrain(x, y, eps) {
            break;
        }
        emit(j, &poly);
    }
}

/// Disjoint, sorted union of closed intervals.
#[derive(Default, Clone)]
struct IntervalSet(Vec<(f64, f64)>);

impl IntervalSet {
    /// Parts of `[lo, hi]` not already within `tol` of the set.
    fn uncovered(&self, lo: f64, hi: f64, tol: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cur = lo;
        for &(a, b) in &self.0 {
            let (a, b) = (a - tol, b + tol);
            if b < cur {
                continue;
            }
            if a > hi {
                break;
            }
            if a > cur {
                out.push((cur, a.min(hi)));
            }
            cur = cur.max(b);
            if cur > hi {
                return out;
            }
        }
        if cur <= hi {
            out.push((cur, hi));
        }
        out
    }

    fn union_of(mut intervals: Vec<(f64, f64)>) -> Self {
        intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        IntervalSet(out)
    }

    fn insert(&mut self, lo: f64, hi: f64) {
        let mut merged = (lo, hi);
        let mut rest = Vec::with_capacity(self.0.len() + 1);
        for &(a, b) in &self.0 {
            if b < merged.0 || a > merged.1 {
                rest.push((a, b));
            } else {
                merged = (merged.0.min(a), merged.1.max(b));
            }
        }
        rest.push(merged);
        rest.sort_by(|p, q| p.0.total_cmp(&q.0));
        self.0 = rest;
    }
}

/// Fewest pieces of a continuous piecewise-linear function, with breakpoints
/// on the grid, that stays within `eps0` of every sample.
///
/// Exact on the grid. For samples of a Lipschitz target the continuum answer
/// can only be smaller by what the grid spacing hides.
pub fn min_linear_complexity(target: &TargetFunction, eps0: f64) -> Result<usize> {
    check_eps(eps0)?;
    let s = target.samples();
    let m = s.len();
    let tol = 1e-12 * (1.0 + eps0 + s.iter().map(|p| p.1.abs()).fold(0.0, f64::max));
    // seen[i]: values at sample i reachable with the pieces used so far
    let mut seen = vec![IntervalSet::default(); m];
    seen[0].insert(s[0].1 - eps0, s[0].1 + eps0);
    let mut frontier: Vec<(usize, f64, f64)> = vec![(0, s[0].1 - eps0, s[0].1 + eps0)];
    let mut pieces = 0;
    loop {
        pieces += 1;
        let mut fresh = vec![Vec::new(); m];
        // farthest starts first: they are the likeliest to finish
        frontier.sort_by_key(|s| std::cmp::Reverse(s.0));
        for &(i, lo, hi) in &frontier {
            reach(s, i, lo, hi, eps0, |j, a, b| fresh[j].push((a, b)));
            if !fresh[m - 1].is_empty() {
                return Ok(pieces);
            }
        }
        // values already reachable with fewer pieces dominate
        let mut next = Vec::new();
        for (j, intervals) in fresh.into_iter().enumerate() {
            for (a, b) in IntervalSet::union_of(intervals).0 {
                for (u, v) in seen[j].uncovered(a, b, tol) {
                    next.push((j, u, v));
                }
                seen[j].insert(a, b);
            }
        }
        if next.is_empty() {
            return Err(Error::Invariant(
                "no continuous fit found on the grid".into(),
            ));
        }
        frontier = next;
    }
}

/// Fewest pieces when continuity between pieces is dropped. Never exceeds
/// [`min_linear_complexity`]; reported only as a diagnostic lower bound.
pub fn min_pieces_discontinuous(target: &TargetFunction, eps0: f64) -> Result<usize> {
    check_eps(eps0)?;
    let s = target.samples();
    let mut start = 0;
    let mut pieces = 1;
    while start < s.len() - 1 {
        let y0 = s[start].1;
        let mut reached = start + 1;
        reach(s, start, y0 - eps0, y0 + eps0, eps0, |j, _, _| reached = j);
        if reached == s.len() - 1 {
            return Ok(pieces);
        }
        start = reached + 1;
        pieces += 1;
    }
    Ok(pieces)
}

/// `E[L(Phi)] / L_min(f, eps0)`.
pub fn region_inefficiency(expected_regions: f64, l_min: usize) -> Result<f64> {
    if l_min == 0 {
        return Err(Error::InvalidComplexity);
    }
    if !(expected_regions.is_finite() && expected_regions > 0.0) {
        return Err(Error::InvalidValue(format!(
            "expected regions must be positive, got {expected_regions}"
        )));
    }
    Ok(expected_regions / l_min as f64)
}

/// Large-width estimate of the expected number of linear regions:
/// `n_1 + ... + n_L + 1`.
pub fn theoretical_expected_regions(topology: &Topology) -> f64 {
    (topology.total_hidden() + 1) as f64
}

/// Where the expected region count in a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSource {
    /// `sum n_l + 1` from the topology.
    Theory,
    /// A Monte Carlo regions experiment.
    MonteCarlo,
    /// Supplied by the caller.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub eps0: f64,
    pub alpha: f64,
    pub c: f64,
    pub l_min: usize,
    /// Piece count without the continuity constraint; a lower bound on `l_min`.
    pub l_min_discontinuous: usize,
    pub expected_regions: f64,
    pub regions_source: RegionSource,
    pub eta_region: f64,
    pub sup_error: f64,
    pub approximating: bool,
    pub region_efficient: bool,
}

impl SparsityReport {
    /// Both sparsity conditions hold.
    pub fn is_sparse(&self) -> bool {
        self.approximating && self.region_efficient
    }
}

/// Evaluates both region-adaptive sparsity conditions for `phi` against
/// `target`. The sup error is taken against the interpolant of the samples
/// over the target domain.
pub fn check_region_adaptive_sparsity(
    phi: &PwlFunction,
    target: &TargetFunction,
    eps0: f64,
    alpha: f64,
    c: f64,
    expected_regions: f64,
    regions_source: RegionSource,
) -> Result<SparsityReport> {
    check_eps(eps0)?;
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::InvalidSlack(alpha));
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidBound(c));
    }
    let (a, b) = target.domain();
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(format!(
            "target domain [{a}, {b}] is not a compact interval"
        )));
    }
    let l_min = min_linear_complexity(target, eps0)?;
    let l_min_discontinuous = min_pieces_discontinuous(target, eps0)?;
    let eta_region = region_inefficiency(expected_regions, l_min)?;
    let sup_error = sup_norm_diff(phi, &target.interpolant(), a, b)?;
    Ok(SparsityReport {
        eps0,
        alpha,
        c,
        l_min,
        l_min_discontinuous,
        expected_regions,
        regions_source,
        eta_region,
        sup_error,
        approximating: sup_error <= alpha * eps0,
        region_efficient: eta_region <= c,
    })
}
