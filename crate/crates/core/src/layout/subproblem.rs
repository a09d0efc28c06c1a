//! Per-tile convex subproblem: maximize `min_l Q̄_l(Δ)` over a polygon made of
//! the translation box and linearized spacing halfspaces.
//!
//! The feasible set is two-dimensional, so the concave max-min is solved by
//! nested golden-section search: `F(y) = max_z f(y, z)` is concave in `y`
//! whenever `f` is jointly concave and the feasible set is convex.

use nalgebra::Vector2;

use super::surrogate::SurrogateModel;
use crate::error::{Error, Result};
use crate::geometry::TranslationBox;

/// Slack allowed on halfspace and box constraints, meters.
pub const FEASIBILITY_SLACK: f64 = 1e-14;

/// `normal · Δ ≥ offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn margin(&self, x: &Vector2<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn contains(&self, x: &Vector2<f64>) -> bool {
        self.margin(x) >= -FEASIBILITY_SLACK
    }
}

/// First-order inner approximation of `‖Δ − Δ_other‖ ≥ D_min` around
/// `reference`: `nᵀ(Δ − Δ_other) ≥ D_min` with `n` the unit vector from
/// `Δ_other` to `reference`.
pub fn linearized_spacing(
    reference: &Vector2<f64>,
    other: &Vector2<f64>,
    d_min: f64,
) -> Result<Halfspace> {
    let diff = reference - other;
    let norm = diff.norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateLinearization);
    }
    let normal = diff / norm;
    Ok(Halfspace {
        normal,
        offset: d_min + normal.dot(other),
    })
}

/// Result of one subproblem solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemSolution {
    pub delta: Vector2<f64>,
    /// `min_l Q̄_l(Δ*)`.
    pub value: f64,
    /// `sqrt(max(value, 0))`.
    pub eta: f64,
}

/// Convex polygon as a list of counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Vector2<f64>>,
}

impl Polygon {
    pub fn from_box(b: &TranslationBox) -> Self {
        Self {
            vertices: vec![
                Vector2::new(b.lo.x, b.lo.y),
                Vector2::new(b.hi.x, b.lo.y),
                Vector2::new(b.hi.x, b.hi.y),
                Vector2::new(b.lo.x, b.hi.y),
            ],
        }
    }

    /// Sutherland–Hodgman clip against one halfspace.
    pub fn clip(&self, h: &Halfspace) -> Polygon {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let ma = h.margin(&a);
            let mb = h.margin(&b);
            if ma >= 0.0 {
                out.push(a);
            }
            if (ma >= 0.0) != (mb >= 0.0) {
                let t = ma / (ma - mb);
                out.push(a + (b - a) * t);
            }
        }
        Polygon { vertices: out }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn y_range(&self) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.x), hi.max(v.x)))
    }
}

/// Feasible region of the subproblem.
#[derive(Debug, Clone)]
pub struct Region<'a> {
    pub bounds: TranslationBox,
    pub halfspaces: &'a [Halfspace],
}

impl Region<'_> {
    pub fn contains(&self, x: &Vector2<f64>) -> bool {
        (0..2).all(|k| x[k] >= self.bounds.lo[k] - FEASIBILITY_SLACK && x[k] <= self.bounds.hi[k] + FEASIBILITY_SLACK)
            && self.halfspaces.iter().all(|h| h.contains(x))
    }

    pub fn polygon(&self) -> Polygon {
        self.halfspaces
            .iter()
            .fold(Polygon::from_box(&self.bounds), |poly, h| poly.clip(h))
    }

    /// Feasible `z` interval on the vertical line at `y`, if any.
    fn z_interval(&self, y: f64) -> Option<(f64, f64)> {
        let mut lo = self.bounds.lo.y;
        let mut hi = self.bounds.hi.y;
        for h in self.halfspaces {
            let rhs = h.offset - h.normal.x * y;
            if h.normal.y > 1e-15 {
                lo = lo.max(rhs / h.normal.y);
            } else if h.normal.y < -1e-15 {
                hi = hi.min(rhs / h.normal.y);
            } else if rhs > FEASIBILITY_SLACK {
                return None;
            }
        }
        if lo <= hi {
            Some((lo, hi))
        } else if lo - hi <= FEASIBILITY_SLACK {
            let mid = 0.5 * (lo + hi);
            Some((mid, mid))
        } else {
            None
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximize a concave function on `[lo, hi]`; returns `(argmax, max)`.
fn golden_max(lo: f64, hi: f64, xtol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    if !(hi - lo > xtol) {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > xtol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    // Endpoints can win when the maximum sits on the boundary.
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximize `min_l Q̄_l(Δ)` over `bounds ∩ halfspaces`.
///
/// `tol` is the relative value tolerance. When the expansion point is
/// optimal within tolerance it is returned unchanged; otherwise the
/// returned point is the one closest to the expansion point along the
/// segment towards the maximizer that still attains the optimum within
/// tolerance.
pub fn solve_tile_subproblem(
    surrogate: &SurrogateModel,
    bounds: &TranslationBox,
    halfspaces: &[Halfspace],
    tol: f64,
) -> Result<SubproblemSolution> {
    let region = Region { bounds: *bounds, halfspaces };
    let x0 = surrogate.expansion;
    let f = |x: &Vector2<f64>| surrogate.min_value(x);
    let finish = |x: Vector2<f64>, value: f64| SubproblemSolution {
        delta: x,
        value,
        eta: value.max(0.0).sqrt(),
    };

    let polygon = region.polygon();
    if polygon.is_empty() {
        if region.contains(&x0) {
            return Ok(finish(x0, f(&x0)));
        }
        return Err(Error::InfeasibleSubproblem(format!(
            "empty region: box {:?}..{:?}, {} halfspaces, expansion point {:?}",
            bounds.lo, bounds.hi, halfspaces.len(), x0
        )));
    }

    let (ylo, yhi) = polygon.y_range();
    let scale = (bounds.hi - bounds.lo).amax().max(1e-12);
    let xtol = (scale * 1e-10).max(1e-16);
    let inner = |y: f64| -> (f64, f64) {
        match region.z_interval(y) {
            Some((zlo, zhi)) => golden_max(zlo, zhi, xtol, |z| f(&Vector2::new(y, z))),
            None => (f64::NAN, f64::NEG_INFINITY),
        }
    };
    let (ybest, _) = golden_max(ylo, yhi, xtol, |y| inner(y).1);
    let (zbest, mut best_value) = inner(ybest);
    let mut best = Vector2::new(ybest, zbest);
    if !best_value.is_finite() {
        // Degenerate sliver; fall back to the polygon's vertices.
        best = polygon.vertices[0];
        best_value = f(&best);
    }
    for v in &polygon.vertices {
        let fv = f(v);
        if fv > best_value {
            best = *v;
            best_value = fv;
        }
    }

    let slack = 0.01 * tol * (1.0 + best_value.abs());
    if region.contains(&x0) {
        let f0 = f(&x0);
        if f0 >= best_value - slack {
            return Ok(finish(x0, f0));
        }
        // Concave along the segment, so the acceptable set is [s0, 1].
        let target = best_value - slack;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(&(x0 + (best - x0) * mid)) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let x = x0 + (best - x0) * hi;
        return Ok(finish(x, f(&x)));
    }
    Ok(finish(best, best_value))
}
