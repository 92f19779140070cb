//! Exhaustive `L_min` oracle shared by the integration tests.

use relu_regions::sparsity::{TargetFamily, TargetFunction};

/// Range of `v_q` over pairs `(v_p, v_q)` with `v_p` in `[lo, hi]` whose chord
/// stays within `eps` of samples `p..=q`, found by enumerating the vertices of
/// the feasible polygon.
fn propagate(
    s: &[(f64, f64)],
    p: usize,
    q: usize,
    lo: f64,
    hi: f64,
    eps: f64,
) -> Option<(f64, f64)> {
    // constraints a * v_p + b * v_q <= c
    let mut cons: Vec<(f64, f64, f64)> = vec![(1.0, 0.0, hi), (-1.0, 0.0, -lo)];
    let (xp, xq) = (s[p].0, s[q].0);
    for &(x, y) in &s[p..=q] {
        let t = (x - xp) / (xq - xp);
        cons.push((1.0 - t, t, y + eps));
        cons.push((t - 1.0, -t, -(y - eps)));
    }
    let tol = 1e-9 * (1.0 + eps + s.iter().map(|v| v.1.abs()).fold(0.0, f64::max));
    let mut range: Option<(f64, f64)> = None;
    for i in 0..cons.len() {
        for j in i + 1..cons.len() {
            let (a1, b1, c1) = cons[i];
            let (a2, b2, c2) = cons[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-14 {
                continue;
            }
            let u = (c1 * b2 - c2 * b1) / det;
            let v = (a1 * c2 - a2 * c1) / det;
            if cons.iter().all(|&(a, b, c)| a * u + b * v <= c + tol) {
                range = Some(match range {
                    None => (v, v),
                    Some((l, h)) => (l.min(v), h.max(v)),
                });
            }
        }
    }
    range
}

/// Fewest pieces over every subset of interior grid points used as
/// breakpoints.
pub fn exhaustive(target: &TargetFunction, eps: f64) -> usize {
    let s = target.samples();
    let m = s.len();
    let interior = m - 2;
    let mut best = usize::MAX;
    for mask in 0u32..(1 << interior) {
        let pieces = mask.count_ones() as usize + 1;
        if pieces >= best {
            continue;
        }
        let mut nodes = vec![0];
        nodes.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
        nodes.push(m - 1);
        let mut interval = Some((s[0].1 - eps, s[0].1 + eps));
        for w in nodes.windows(2) {
            interval = interval.and_then(|(lo, hi)| propagate(s, w[0], w[1], lo, hi, eps));
        }
        if interval.is_some() {
            best = pieces;
        }
    }
    best
}

/// Every builtin family on grids of 2 to 12 points over a few domains.
pub fn builtin_grids() -> Vec<TargetFunction> {
    let mut out = Vec::new();
    for fam in TargetFamily::ALL {
        for m in 2..=12 {
            for (a, b) in [(-1.0, 1.0), (-3.0, 3.0), (0.0, 7.0), (-6.0, 2.5)] {
                out.push(TargetFunction::builtin(fam, a, b, m).unwrap());
            }
        }
    }
    out
}

/// Tolerances checked on every builtin grid.
pub const TOLERANCES: [f64; 9] = [0.005, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.5];
