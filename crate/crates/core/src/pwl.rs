//! Exact continuous piecewise-linear functions on the real line.
//!
//! A [`PwlFunction`] is stored as a strictly increasing list of knots, one
//! slope per open segment and a single anchor value. Values at knots are
//! always derived from the anchor by walking the slopes, so continuity holds
//! by construction and can never be broken by an update.
//!
//! Sign decisions at knots (ReLU, sign-change counting) snap a derived value
//! to zero when it lies within the accumulated floating-point error bound of
//! the walk that produced it. Values from random parameters are never that
//! close to zero in practice; the snap keeps `relu` idempotent bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier on machine epsilon used when bounding the round-off of a
/// derived knot value.
const ROUNDOFF_FACTOR: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwlRepr", into = "PwlRepr")]
pub struct PwlFunction {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    anchor: (f64, f64),
}

/// Wire form: `{"knots":[...], "slopes":[...], "anchor":[x0,y0]}`.
#[derive(Serialize, Deserialize)]
struct PwlRepr {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    anchor: [f64; 2],
}

impl TryFrom<PwlRepr> for PwlFunction {
    type Error = Error;

    fn try_from(r: PwlRepr) -> Result<Self> {
        PwlFunction::new(r.knots, r.slopes, (r.anchor[0], r.anchor[1]))
    }
}

impl From<PwlFunction> for PwlRepr {
    fn from(f: PwlFunction) -> Self {
        PwlRepr {
            knots: f.knots,
            slopes: f.slopes,
            anchor: [f.anchor.0, f.anchor.1],
        }
    }
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidValue(format!(
            "{what} must be finite, got {v}"
        )))
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::InvalidInterval(a, b))
    }
}

fn slopes_equal(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

impl PwlFunction {
    /// Builds a function from raw parts. The result may be non-canonical.
    pub fn new(knots: Vec<f64>, slopes: Vec<f64>, anchor: (f64, f64)) -> Result<Self> {
        if slopes.len() != knots.len() + 1 {
            return Err(Error::Shape(format!(
                "{} knots need {} slopes, got {}",
                knots.len(),
                knots.len() + 1,
                slopes.len()
            )));
        }
        for &k in &knots {
            check_finite("knot", k)?;
        }
        for &s in &slopes {
            check_finite("slope", s)?;
        }
        check_finite("anchor x", anchor.0)?;
        check_finite("anchor y", anchor.1)?;
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidValue(
                "knots must be strictly increasing".into(),
            ));
        }
        let expected_x = knots.first().copied().unwrap_or(0.0);
        if anchor.0 != expected_x {
            return Err(Error::InvalidValue(format!(
                "anchor must sit at x = {expected_x}, got {}",
                anchor.0
            )));
        }
        Ok(PwlFunction {
            knots,
            slopes,
            anchor,
        })
    }

    /// `x -> slope * x + intercept`.
    pub fn affine(slope: f64, intercept: f64) -> Result<Self> {
        check_finite("slope", slope)?;
        check_finite("intercept", intercept)?;
        Ok(PwlFunction {
            knots: Vec::new(),
            slopes: vec![slope],
            anchor: (0.0, intercept),
        })
    }

    pub fn identity() -> Self {
        PwlFunction {
            knots: Vec::new(),
            slopes: vec![1.0],
            anchor: (0.0, 0.0),
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::affine(0.0, c)
    }

    /// Linear interpolant through `points` (strictly increasing x), extended
    /// beyond the outer points with the first and last segment slopes.
    pub fn interpolate(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientSamples(points.len()));
        }
        for &(x, y) in points {
            check_finite("sample x", x)?;
            check_finite("sample y", y)?;
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidValue(
                "sample abscissae must be strictly increasing".into(),
            ));
        }
        let slopes: Vec<f64> = points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let knots: Vec<f64> = points[1..points.len() - 1].iter().map(|p| p.0).collect();
        let anchor = match knots.first() {
            Some(&k) => (k, points[1].1),
            None => (0.0, points[0].1 + slopes[0] * (0.0 - points[0].0)),
        };
        Ok(PwlFunction {
            knots,
            slopes,
            anchor,
        }
        .canonicalize())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn anchor(&self) -> (f64, f64) {
        self.anchor
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn is_affine(&self) -> bool {
        self.knots.is_empty()
    }

    /// Values at every knot, walked from the anchor.
    pub fn knot_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.knots.len());
        let mut y = self.anchor.1;
        for (j, &k) in self.knots.iter().enumerate() {
            if j > 0 {
                y += self.slopes[j] * (k - self.knots[j - 1]);
            }
            out.push(y);
        }
        out
    }

    /// Knot values with a running bound on their accumulated round-off.
    fn knot_values_with_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.knots.len();
        let mut ys = Vec::with_capacity(n);
        let mut es = Vec::with_capacity(n);
        let mut y = self.anchor.1;
        let mut e = 0.0;
        for (j, &k) in self.knots.iter().enumerate() {
            if j > 0 {
                let prev = self.knots[j - 1];
                let s = self.slopes[j];
                let next = y + s * (k - prev);
                e += ROUNDOFF_FACTOR * (y.abs() + next.abs() + s.abs() * (k.abs() + prev.abs()));
                y = next;
            }
            ys.push(y);
            es.push(e);
        }
        (ys, es)
    }

    /// Value and round-off bound at an arbitrary `x`, given the output of
    /// [`Self::knot_values_with_bounds`].
    fn value_and_bound(&self, ys: &[f64], es: &[f64], x: f64) -> (f64, f64) {
        if self.knots.is_empty() {
            let (x0, y0) = self.anchor;
            let s = self.slopes[0];
            let v = y0 + s * (x - x0);
            return (
                v,
                ROUNDOFF_FACTOR * (y0.abs() + v.abs() + s.abs() * (x.abs() + x0.abs())),
            );
        }
        let (base, y, e, s) = if x < self.knots[0] {
            (self.knots[0], ys[0], es[0], self.slopes[0])
        } else {
            let j = self.knots.partition_point(|&k| k <= x) - 1;
            (self.knots[j], ys[j], es[j], self.slopes[j + 1])
        };
        let v = y + s * (x - base);
        let bound = e + ROUNDOFF_FACTOR * (y.abs() + v.abs() + s.abs() * (x.abs() + base.abs()));
        (v, bound)
    }

    pub(crate) fn value_at(&self, x: f64) -> f64 {
        if self.knots.is_empty() {
            return self.anchor.1 + self.slopes[0] * (x - self.anchor.0);
        }
        if x < self.knots[0] {
            return self.anchor.1 + self.slopes[0] * (x - self.knots[0]);
        }
        let j = self.knots.partition_point(|&k| k <= x) - 1;
        let mut y = self.anchor.1;
        for i in 1..=j {
            y += self.slopes[i] * (self.knots[i] - self.knots[i - 1]);
        }
        y + self.slopes[j + 1] * (x - self.knots[j])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_finite("x", x)?;
        Ok(self.value_at(x))
    }

    /// True when no knot separates two equal slopes.
    pub fn is_canonical(&self) -> bool {
        self.slopes.windows(2).all(|w| w[0] != w[1])
    }

    pub fn canonicalize(self) -> Self {
        self.canonicalize_with(0.0)
    }

    /// Removes knots whose adjacent slopes agree within the relative
    /// tolerance `tol`. With `tol == 0` only exactly equal slopes merge and
    /// the function is unchanged; with `tol > 0` merged interior runs take
    /// the chord slope between the surviving knots.
    pub fn canonicalize_with(self, tol: f64) -> Self {
        let n = self.knots.len();
        let keep: Vec<bool> = (0..n)
            .map(|j| !slopes_equal(self.slopes[j], self.slopes[j + 1], tol))
            .collect();
        if keep.iter().all(|&k| k) {
            return self;
        }
        let ys = self.knot_values();
        let kept: Vec<usize> = (0..n).filter(|&j| keep[j]).collect();
        let Some(&first) = kept.first() else {
            let s = self.slopes[0];
            let y = ys[0] + s * (0.0 - self.knots[0]);
            return PwlFunction {
                knots: Vec::new(),
                slopes: vec![s],
                anchor: (0.0, y),
            };
        };
        let mut knots = Vec::with_capacity(kept.len());
        let mut slopes = Vec::with_capacity(kept.len() + 1);
        slopes.push(self.slopes[0]);
        for (i, &j) in kept.iter().enumerate() {
            knots.push(self.knots[j]);
            let s = match kept.get(i + 1) {
                Some(&next) if tol > 0.0 => (ys[next] - ys[j]) / (self.knots[next] - self.knots[j]),
                _ => self.slopes[j + 1],
            };
            slopes.push(s);
        }
        if tol > 0.0 {
            *slopes.last_mut().unwrap() = self.slopes[n];
        }
        PwlFunction {
            knots,
            slopes,
            anchor: (self.knots[first], ys[first]),
        }
    }

    /// Number of breakpoints; linear regions are this plus one.
    pub fn count_breakpoints(&self) -> Result<usize> {
        if !self.is_canonical() {
            return Err(Error::Invariant(
                "count_breakpoints needs a canonical function".into(),
            ));
        }
        Ok(self.knots.len())
    }

    /// `max(self, 0)`.
    pub fn relu(&self) -> PwlFunction {
        self.relu_with_roots().0
    }

    /// `max(self, 0)` together with the sign-crossing locations that became
    /// new knots.
    pub fn relu_with_roots(&self) -> (PwlFunction, Vec<f64>) {
        if self.knots.is_empty() {
            return self.relu_affine();
        }
        let (ys, es) = self.knot_values_with_bounds();
        let sign = |j: usize| -> i8 {
            if ys[j].abs() <= es[j] {
                0
            } else if ys[j] > 0.0 {
                1
            } else {
                -1
            }
        };
        let n = self.knots.len();
        // (x, value, sign) in increasing x
        let mut pts: Vec<(f64, f64, i8)> = Vec::with_capacity(2 * n + 2);
        let mut roots = Vec::new();

        let (k0, y0, s0) = (self.knots[0], ys[0], self.slopes[0]);
        let sg0 = sign(0);
        if sg0 != 0 && s0 != 0.0 && (y0 > 0.0) == (s0 > 0.0) {
            let mut r = k0 - y0 / s0;
            if r >= k0 {
                r = k0.next_down();
            }
            pts.push((r, 0.0, 0));
            roots.push(r);
        }
        for j in 0..n {
            pts.push((self.knots[j], ys[j], sign(j)));
            if j + 1 < n {
                let (sa, sb) = (sign(j), sign(j + 1));
                if (sa as i16) * (sb as i16) < 0 {
                    let (ka, kb) = (self.knots[j], self.knots[j + 1]);
                    let t = ys[j] / (ys[j] - ys[j + 1]);
                    let mut r = ka + (kb - ka) * t;
                    if r <= ka {
                        r = ka.next_up();
                    }
                    if r >= kb {
                        r = kb.next_down();
                    }
                    if ka < r && r < kb {
                        pts.push((r, 0.0, 0));
                        roots.push(r);
                    }
                }
            }
        }
        let (kn, yn, sn) = (self.knots[n - 1], ys[n - 1], self.slopes[n]);
        let sgn = sign(n - 1);
        if sgn != 0 && sn != 0.0 && (yn > 0.0) != (sn > 0.0) {
            let mut r = kn - yn / sn;
            if r <= kn {
                r = kn.next_up();
            }
            pts.push((r, 0.0, 0));
            roots.push(r);
        }

        // slope of the original function on each output segment
        let mut slopes = Vec::with_capacity(pts.len() + 1);
        let left_positive = pts[0].2 > 0 || (pts[0].2 == 0 && s0 < 0.0);
        slopes.push(if left_positive { s0 } else { 0.0 });
        let mut seg = 0usize; // original segment index for the current output gap
        for w in pts.windows(2) {
            while seg < n && self.knots[seg] <= w[0].0 {
                seg += 1;
            }
            let s = self.slopes[seg];
            let positive = w[0].2 > 0 || w[1].2 > 0;
            slopes.push(if positive { s } else { 0.0 });
        }
        let last = pts[pts.len() - 1];
        let right_positive = last.2 > 0 || (last.2 == 0 && sn > 0.0);
        slopes.push(if right_positive { sn } else { 0.0 });

        let anchor_y = if pts[0].2 > 0 { pts[0].1 } else { 0.0 };
        let out = PwlFunction {
            knots: pts.iter().map(|p| p.0).collect(),
            slopes,
            anchor: (pts[0].0, anchor_y),
        }
        .canonicalize();
        (out, roots)
    }

    fn relu_affine(&self) -> (PwlFunction, Vec<f64>) {
        let (x0, y0) = self.anchor;
        let s = self.slopes[0];
        if s == 0.0 {
            let c = if y0 > 0.0 { y0 } else { 0.0 };
            return (
                PwlFunction {
                    knots: Vec::new(),
                    slopes: vec![0.0],
                    anchor: (0.0, c),
                },
                Vec::new(),
            );
        }
        let r = x0 - y0 / s;
        let slopes = if s > 0.0 { vec![0.0, s] } else { vec![s, 0.0] };
        (
            PwlFunction {
                knots: vec![r],
                slopes,
                anchor: (r, 0.0),
            },
            vec![r],
        )
    }

    /// Number of strict sign changes of the function inside `(a, b)`.
    ///
    /// Touching zero without changing sign does not count. A run where the
    /// function is zero counts once when the signs on either side differ.
    pub fn count_sign_changes(&self, a: f64, b: f64) -> Result<usize> {
        check_interval(a, b)?;
        let (ys, es) = self.knot_values_with_bounds();
        let lo = self.knots.partition_point(|&k| k <= a);
        let hi = self.knots.partition_point(|&k| k < b);
        let mut signs = Vec::with_capacity(hi.saturating_sub(lo) + 2);
        let classify = |v: f64, e: f64| -> i8 {
            if v.abs() <= e {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        };
        let (va, ea) = self.value_and_bound(&ys, &es, a);
        signs.push(classify(va, ea));
        for j in lo..hi {
            signs.push(classify(ys[j], es[j]));
        }
        let (vb, eb) = self.value_and_bound(&ys, &es, b);
        signs.push(classify(vb, eb));

        let mut count = 0;
        let mut last = 0i8;
        for s in signs.into_iter().filter(|&s| s != 0) {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
        Ok(count)
    }
}

/// Exact `sum_i coeffs[i] * fs[i] + constant`, canonicalized.
pub fn linear_combine(coeffs: &[f64], fs: &[PwlFunction], constant: f64) -> Result<PwlFunction> {
    if coeffs.len() != fs.len() {
        return Err(Error::Shape(format!(
            "{} coefficients for {} functions",
            coeffs.len(),
            fs.len()
        )));
    }
    if coeffs.is_empty() {
        return Err(Error::Shape(
            "linear_combine needs at least one function".into(),
        ));
    }
    for &c in coeffs {
        check_finite("coefficient", c)?;
    }
    check_finite("constant", constant)?;

    let total_knots: usize = fs.iter().map(|f| f.knots.len()).sum();
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(total_knots);
    let mut left_slope = 0.0;
    for (&c, f) in coeffs.iter().zip(fs) {
        if c == 0.0 {
            continue;
        }
        left_slope += c * f.slopes[0];
        for (j, &k) in f.knots.iter().enumerate() {
            events.push((k, c * (f.slopes[j + 1] - f.slopes[j])));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut knots: Vec<f64> = Vec::with_capacity(events.len());
    let mut deltas: Vec<f64> = Vec::with_capacity(events.len());
    for (x, d) in events {
        match knots.last() {
            Some(&last) if last == x => *deltas.last_mut().unwrap() += d,
            _ => {
                knots.push(x);
                deltas.push(d);
            }
        }
    }

    let anchor_x = knots.first().copied().unwrap_or(0.0);
    let mut anchor_y = constant;
    for (&c, f) in coeffs.iter().zip(fs) {
        if c == 0.0 {
            continue;
        }
        // anchor_x never lies right of a contributing function's first knot
        let (fx, fy) = f.anchor;
        anchor_y += c * (fy + f.slopes[0] * (anchor_x - fx));
    }

    let mut slopes = Vec::with_capacity(knots.len() + 1);
    let mut s = left_slope;
    slopes.push(s);
    for d in deltas {
        s += d;
        slopes.push(s);
    }
    Ok(PwlFunction {
        knots,
        slopes,
        anchor: (anchor_x, anchor_y),
    }
    .canonicalize())
}

/// `max(f, 0)`.
pub fn relu_pwl(f: &PwlFunction) -> PwlFunction {
    f.relu()
}

/// Exact `sup |f - g|` over `[a, b]`, attained at an endpoint or a knot of
/// `f - g`.
pub fn sup_norm_diff(f: &PwlFunction, g: &PwlFunction, a: f64, b: f64) -> Result<f64> {
    check_interval(a, b)?;
    let d = linear_combine(&[1.0, -1.0], &[f.clone(), g.clone()], 0.0)?;
    let ys = d.knot_values();
    let mut best = d.value_at(a).abs().max(d.value_at(b).abs());
    for (k, y) in d.knots.iter().zip(&ys) {
        if *k > a && *k < b {
            best = best.max(y.abs());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Peak 1 at 0, zero outside [-1, 1].
    fn hat() -> PwlFunction {
        PwlFunction::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, -1.0, 0.0], (-1.0, 0.0)).unwrap()
    }

    fn abs() -> PwlFunction {
        let f = PwlFunction::identity();
        let g = PwlFunction::affine(-1.0, 0.0).unwrap();
        linear_combine(&[1.0, 1.0], &[f.relu(), g.relu()], 0.0).unwrap()
    }

    #[test]
    fn affine_constructor() {
        let id = PwlFunction::affine(1.0, 0.0).unwrap();
        assert_eq!(id.num_knots(), 0);
        assert_eq!(id.eval(2.5).unwrap(), 2.5);
        let c = PwlFunction::affine(0.0, 3.0).unwrap();
        assert_eq!(c.eval(-7.0).unwrap(), 3.0);
        let f = PwlFunction::affine(2.0, -1.0).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.0);
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert!(matches!(
            PwlFunction::affine(f64::NAN, 0.0),
            Err(Error::InvalidValue(_))
        ));
        assert!(matches!(
            PwlFunction::affine(0.0, f64::INFINITY),
            Err(Error::InvalidValue(_))
        ));
    }

    #[test]
    fn eval_examples() {
        let r = PwlFunction::identity().relu();
        assert_eq!(r.eval(-2.0).unwrap(), 0.0);
        assert_eq!(r.eval(3.0).unwrap(), 3.0);
        assert_eq!(hat().eval(0.5).unwrap(), 0.5);
        assert_eq!(hat().eval(-0.25).unwrap(), 0.75);
        assert_eq!(hat().eval(7.0).unwrap(), 0.0);
        assert!(matches!(r.eval(f64::NAN), Err(Error::InvalidValue(_))));
    }

    #[test]
    fn constructor_rejects_bad_parts() {
        assert!(matches!(
            PwlFunction::new(vec![0.0], vec![1.0], (0.0, 0.0)),
            Err(Error::Shape(_))
        ));
        assert!(PwlFunction::new(vec![1.0, 1.0], vec![0.0, 1.0, 2.0], (1.0, 0.0)).is_err());
        assert!(PwlFunction::new(vec![1.0], vec![0.0, 1.0], (0.0, 0.0)).is_err());
        assert!(PwlFunction::new(vec![], vec![1.0], (1.0, 0.0)).is_err());
    }

    #[test]
    fn linear_combine_examples() {
        let g = hat();
        let z = linear_combine(&[1.0, -1.0], &[g.clone(), g], 0.0).unwrap();
        assert_eq!(z.num_knots(), 0);
        assert_eq!(z.eval(0.3).unwrap(), 0.0);

        let shifted = linear_combine(&[1.0], &[PwlFunction::identity().relu()], 1.0).unwrap();
        assert_eq!(shifted.knots(), &[0.0]);
        assert_eq!(shifted.eval(-4.0).unwrap(), 1.0);
        assert_eq!(shifted.eval(2.0).unwrap(), 3.0);

        let a = abs();
        assert_eq!(a.knots(), &[0.0]);
        assert_eq!(a.slopes(), &[-1.0, 1.0]);
        assert_eq!(a.anchor(), (0.0, 0.0));

        assert!(matches!(
            linear_combine(&[1.0, 2.0], &[PwlFunction::identity()], 0.0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            linear_combine(&[], &[], 0.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn relu_examples() {
        let r = PwlFunction::identity().relu();
        assert_eq!(r.knots(), &[0.0]);
        assert_eq!(r.slopes(), &[0.0, 1.0]);

        let r = PwlFunction::affine(2.0, -1.0).unwrap().relu();
        assert_eq!(r.knots(), &[0.5]);

        // max(|x| - 1, 0): the interior knot at 0 is absorbed in the flat part
        let f = linear_combine(&[1.0], &[abs()], -1.0).unwrap();
        let r = f.relu();
        assert_eq!(r.knots(), &[-1.0, 1.0]);
        assert_eq!(r.slopes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(r.count_breakpoints().unwrap(), 2);
        assert_eq!(r.eval(-3.0).unwrap(), 2.0);
        assert_eq!(r.eval(0.2).unwrap(), 0.0);
    }

    #[test]
    fn relu_of_constants() {
        let pos = PwlFunction::constant(2.0).unwrap().relu();
        assert_eq!(pos, PwlFunction::constant(2.0).unwrap());
        let neg = PwlFunction::constant(-2.0).unwrap().relu();
        assert_eq!(neg, PwlFunction::constant(0.0).unwrap());
    }

    #[test]
    fn relu_reports_created_roots() {
        let f = linear_combine(&[1.0], &[abs()], -1.0).unwrap();
        let (_, roots) = f.relu_with_roots();
        assert_eq!(roots, vec![-1.0, 1.0]);
        let (_, roots) = hat().relu_with_roots();
        assert!(roots.is_empty());
    }

    #[test]
    fn count_breakpoints_examples() {
        assert_eq!(
            PwlFunction::affine(3.0, 1.0)
                .unwrap()
                .count_breakpoints()
                .unwrap(),
            0
        );
        assert_eq!(
            PwlFunction::identity().relu().count_breakpoints().unwrap(),
            1
        );
        let raw = PwlFunction::new(vec![0.0], vec![1.0, 1.0], (0.0, 0.0)).unwrap();
        assert!(matches!(raw.count_breakpoints(), Err(Error::Invariant(_))));
        assert_eq!(raw.canonicalize().count_breakpoints().unwrap(), 0);
    }

    #[test]
    fn canonicalize_moves_anchor() {
        let raw = PwlFunction::new(vec![-2.0, 1.0], vec![1.0, 1.0, 3.0], (-2.0, 5.0)).unwrap();
        let c = raw.clone().canonicalize();
        assert_eq!(c.knots(), &[1.0]);
        assert_eq!(c.anchor(), (1.0, 8.0));
        for x in [-5.0, -2.0, 0.0, 1.0, 4.0] {
            assert_eq!(c.eval(x).unwrap(), raw.eval(x).unwrap());
        }
        let all = PwlFunction::new(vec![-2.0], vec![2.0, 2.0], (-2.0, 1.0))
            .unwrap()
            .canonicalize();
        assert_eq!(all, PwlFunction::affine(2.0, 5.0).unwrap());
    }

    #[test]
    fn canonicalize_with_tolerance_merges_near_equal_slopes() {
        let raw = PwlFunction::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 1.0 + 1e-9, 0.0],
            (0.0, 0.0),
        )
        .unwrap();
        assert_eq!(raw.clone().canonicalize().num_knots(), 3);
        let merged = raw.canonicalize_with(1e-6);
        assert_eq!(merged.knots(), &[0.0, 2.0]);
        assert!((merged.eval(2.0).unwrap() - (2.0 + 1e-9)).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_examples() {
        let a = abs();
        assert_eq!(sup_norm_diff(&a, &a, -1.0, 1.0).unwrap(), 0.0);
        let half = PwlFunction::constant(0.5).unwrap();
        assert_eq!(sup_norm_diff(&a, &half, -1.0, 1.0).unwrap(), 0.5);
        let id = PwlFunction::identity();
        let zero = PwlFunction::constant(0.0).unwrap();
        assert_eq!(sup_norm_diff(&id, &zero, 0.0, 2.0).unwrap(), 2.0);
        assert!(matches!(
            sup_norm_diff(&id, &zero, 1.0, 1.0),
            Err(Error::InvalidInterval(..))
        ));
    }

    #[test]
    fn sign_change_examples() {
        assert_eq!(
            PwlFunction::identity()
                .count_sign_changes(-1.0, 1.0)
                .unwrap(),
            1
        );
        assert_eq!(abs().count_sign_changes(-1.0, 1.0).unwrap(), 0);
        let h = linear_combine(&[1.0], &[hat()], -0.5).unwrap();
        assert_eq!(h.count_sign_changes(-2.0, 2.0).unwrap(), 2);
        assert!(matches!(
            h.count_sign_changes(2.0, -2.0),
            Err(Error::InvalidInterval(..))
        ));
    }

    #[test]
    fn sign_change_plateau_rule() {
        // -1 on the left, zero on [0, 1], then +1 or back to -1
        let up = PwlFunction::new(
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![0.0, 1.0, 0.0, 1.0, 0.0],
            (-1.0, -1.0),
        )
        .unwrap();
        assert_eq!(up.count_sign_changes(-3.0, 3.0).unwrap(), 1);
        let back = PwlFunction::new(
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![0.0, 1.0, 0.0, -1.0, 0.0],
            (-1.0, -1.0),
        )
        .unwrap();
        assert_eq!(back.count_sign_changes(-3.0, 3.0).unwrap(), 0);
        // a crossing sitting exactly on an endpoint is outside the open interval
        assert_eq!(
            PwlFunction::identity()
                .count_sign_changes(0.0, 1.0)
                .unwrap(),
            0
        );
    }

    #[test]
    fn json_shape() {
        let r = PwlFunction::identity().relu();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"knots":[0.0],"slopes":[0.0,1.0],"anchor":[0.0,0.0]}"#
        );
        let back: PwlFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<PwlFunction>(
            r#"{"knots":[1.0,0.0],"slopes":[0,1,2],"anchor":[1,0]}"#
        )
        .is_err());
    }

    /// Random CPWL built from a handful of ReLU kinks with random weights.
    fn arb_pwl() -> impl Strategy<Value = PwlFunction> {
        (
            prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0), 0..8),
            -2.0f64..2.0,
            -2.0f64..2.0,
        )
            .prop_map(|(terms, slope, intercept)| {
                let mut fs = vec![PwlFunction::affine(slope, intercept).unwrap()];
                let mut cs = vec![1.0];
                for (w, b, c) in terms {
                    fs.push(PwlFunction::affine(w, b).unwrap().relu());
                    cs.push(c);
                }
                linear_combine(&cs, &fs, 0.0).unwrap()
            })
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn combine_is_pointwise(f in arb_pwl(), g in arb_pwl(), a in -3.0f64..3.0, b in -3.0f64..3.0,
                                c in -3.0f64..3.0, x in -10.0f64..10.0) {
            let h = linear_combine(&[a, b], &[f.clone(), g.clone()], c).unwrap();
            let want = a * f.eval(x).unwrap() + b * g.eval(x).unwrap() + c;
            prop_assert!(close(h.eval(x).unwrap(), want), "{} vs {}", h.eval(x).unwrap(), want);
            prop_assert!(h.is_canonical());
            prop_assert!(h.count_breakpoints().unwrap()
                <= f.count_breakpoints().unwrap() + g.count_breakpoints().unwrap());
        }

        #[test]
        fn relu_is_pointwise_max(f in arb_pwl(), xs in prop::collection::vec(-10.0f64..10.0, 20)) {
            let r = f.relu();
            prop_assert!(r.is_canonical());
            for x in xs {
                let want = f.eval(x).unwrap().max(0.0);
                prop_assert!(close(r.eval(x).unwrap(), want));
            }
        }

        #[test]
        fn relu_is_idempotent(f in arb_pwl()) {
            let r = f.relu();
            prop_assert_eq!(r.relu(), r);
        }

        #[test]
        fn canonicalize_preserves_values(knots in prop::collection::btree_set(-50i32..50, 0..10),
                                         pick in prop::collection::vec(0usize..3, 11),
                                         y0 in -5.0f64..5.0, x in -60.0f64..60.0) {
            // slopes drawn from a tiny palette so that equal neighbours are common
            let palette = [-1.0, 0.5, 2.0];
            let knots: Vec<f64> = knots.into_iter().map(f64::from).collect();
            let slopes: Vec<f64> = (0..=knots.len()).map(|i| palette[pick[i]]).collect();
            let anchor = (knots.first().copied().unwrap_or(0.0), y0);
            let raw = PwlFunction::new(knots, slopes, anchor).unwrap();
            let c = raw.clone().canonicalize();
            prop_assert!(c.is_canonical());
            prop_assert!(close(c.eval(x).unwrap(), raw.eval(x).unwrap()));
        }

        #[test]
        fn sup_norm_matches_dense_grid(f in arb_pwl(), g in arb_pwl(), a in -4.0f64..0.0, w in 0.5f64..4.0) {
            let b = a + w;
            let exact = sup_norm_diff(&f, &g, a, b).unwrap();
            let d = linear_combine(&[1.0, -1.0], &[f, g], 0.0).unwrap();
            let lip = d.slopes().iter().fold(0.0f64, |m, s| m.max(s.abs()));
            let n = 10_000;
            let step = w / n as f64;
            let grid = (0..=n).map(|i| d.eval(a + step * i as f64).unwrap().abs()).fold(0.0f64, f64::max);
            prop_assert!(grid <= exact + 1e-12 * (1.0 + exact));
            prop_assert!(exact - grid <= step * lip + 1e-12 * (1.0 + exact));
        }
    }
}
