//! Two one-dimensional SCMs with identical `E[Y | A = a]` on the observed
//! action support `(0, 1)` but different `E[Y | do(A = a)]` on `(−3, −2)`.
//!
//! Both have `A ~ Unif(0, 1)`, `Z = −A + V`, `U ≡ 0`; `S₁` sets
//! `Y = 1(|Z| ≤ 1)` and `S₂` sets `Y = 1(|Z + 1| ≤ 1)`, with `V` drawn from
//! the piecewise densities below. Hence `E^{S₁}[Y | do(a)] = P₁(a−1 < V < a+1)`
//! and `E^{S₂}[Y | do(a)] = P₂(a−2 < V < a)`.

use crate::error::{Error, Result};
use crate::numcore::RngStream;
use serde::{Deserialize, Serialize};

/// The two noise densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    One,
    Two,
}

impl Which {
    pub const BOTH: [Which; 2] = [Which::One, Which::Two];

    pub fn label(self) -> &'static str {
        match self {
            Which::One => "S1",
            Which::Two => "S2",
        }
    }

    pub fn density(self) -> PiecewiseDensity {
        match self {
            Which::One => PiecewiseDensity::new(vec![
                Piece::exp(f64::NEG_INFINITY, -4.0, 0.25, 1.0, -4.0),
                Piece::flat(-4.0, 2.0, 1.0 / 12.0),
                Piece::exp(2.0, f64::INFINITY, 0.25, -1.0, 2.0),
            ]),
            Which::Two => PiecewiseDensity::new(vec![
                Piece::exp(f64::NEG_INFINITY, -5.0, 5.0 / 16.0, 1.0, -5.0),
                Piece::flat(-5.0, -2.0, 1.0 / 24.0),
                Piece::flat(-2.0, 1.0, 1.0 / 12.0),
                Piece::exp(1.0, f64::INFINITY, 5.0 / 16.0, -1.0, 1.0),
            ]),
        }
    }

    /// `Y = 1(|V − a + c| ≤ 1)` with `c = 0` for `S₁` and `c = 1` for `S₂`.
    fn shift(self) -> f64 {
        match self {
            Which::One => 0.0,
            Which::Two => 1.0,
        }
    }
}

/// `coef · exp(rate · (v − anchor))` on `[lo, hi)`; `rate = 0` is flat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    coef: f64,
    rate: f64,
    anchor: f64,
}

impl Piece {
    fn flat(lo: f64, hi: f64, value: f64) -> Self {
        Self { lo, hi, coef: value, rate: 0.0, anchor: 0.0 }
    }

    fn exp(lo: f64, hi: f64, coef: f64, rate: f64, anchor: f64) -> Self {
        Self { lo, hi, coef, rate, anchor }
    }

    fn value(&self, v: f64) -> f64 {
        if self.rate == 0.0 {
            self.coef
        } else {
            self.coef * (self.rate * (v - self.anchor)).exp()
        }
    }

    /// Antiderivative up to an additive constant; finite on the piece.
    fn primitive(&self, v: f64) -> f64 {
        if self.rate == 0.0 {
            self.coef * v
        } else {
            self.coef / self.rate * (self.rate * (v - self.anchor)).exp()
        }
    }

    fn mass(&self, lo: f64, hi: f64) -> f64 {
        let (a, b) = (lo.max(self.lo), hi.min(self.hi));
        if !(a < b) {
            return 0.0;
        }
        self.primitive(b) - self.primitive(a)
    }

    /// Point `v` in the piece with `mass(self.lo, v) = t`.
    fn invert(&self, t: f64) -> f64 {
        if self.rate == 0.0 {
            self.lo + t / self.coef
        } else {
            let base = (self.rate * (self.lo - self.anchor)).exp();
            self.anchor + (base + t * self.rate / self.coef).ln() / self.rate
        }
    }
}

/// Density made of contiguous closed-form pieces covering the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseDensity {
    pieces: Vec<Piece>,
}

impl PiecewiseDensity {
    fn new(pieces: Vec<Piece>) -> Self {
        debug_assert!(pieces.windows(2).all(|w| w[0].hi == w[1].lo));
        Self { pieces }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Interior breakpoints in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces[1..].iter().map(|p| p.lo).collect()
    }

    /// Value at `v`; at a breakpoint the piece to the right applies.
    pub fn value(&self, v: f64) -> f64 {
        self.pieces.iter().find(|p| v >= p.lo && v < p.hi).map_or(0.0, |p| p.value(v))
    }

    /// `∫_lo^hi p(v) dv` by exact piecewise antiderivatives.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if !(lo < hi) {
            return 0.0;
        }
        self.pieces.iter().map(|p| p.mass(lo, hi)).sum()
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut left = u;
        for p in &self.pieces {
            let m = p.mass(p.lo, p.hi);
            if left < m {
                return p.invert(left);
            }
            left -= m;
        }
        self.pieces.last().unwrap().hi
    }

    pub fn sample(&self, stream: &mut RngStream) -> f64 {
        self.quantile(stream.uniform(0.0, 1.0))
    }
}

pub fn density_value(which: Which, v: f64) -> f64 {
    which.density().value(v)
}

/// Exact `∫_lo^hi p(v) dv`.
pub fn interval_mass(which: Which, lo: f64, hi: f64) -> f64 {
    which.density().mass(lo, hi)
}

/// `E[Y | do(A = a)]`, defined for every real `a`.
pub fn interventional_mean(which: Which, a: f64) -> f64 {
    let c = which.shift();
    interval_mass(which, a - 1.0 - c, a + 1.0 - c)
}

/// `E[Y | A = a]`; only defined on the action support `(0, 1)`.
pub fn observational_mean(which: Which, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::OutsideObservationalSupport(a));
    }
    // A is exogenous, so conditioning equals intervening on the support.
    Ok(interventional_mean(which, a))
}

/// Adaptive Simpson quadrature of `f` on a bounded interval.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    rec(f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, hi - lo), tol, 60)
}

/// Quadrature oracle for [`interval_mass`]; infinite limits are truncated at
/// ±60, where the exponential tails hold less than 1e-24 mass.
pub fn quadrature_mass(which: Which, lo: f64, hi: f64, tol: f64) -> f64 {
    let d = which.density();
    let (lo, hi) = (lo.max(-60.0), hi.min(60.0));
    if !(lo < hi) {
        return 0.0;
    }
    // Split at breakpoints so every panel is smooth.
    let mut cuts = vec![lo];
    cuts.extend(d.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let f = |v: f64| d.value(v);
    cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol)).sum()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

fn bernoulli_estimate(hits: usize, n: usize) -> McEstimate {
    let p = hits as f64 / n as f64;
    McEstimate { mean: p, std_error: (p * (1.0 - p) / n as f64).sqrt() }
}

/// Simulates `Y` under `do(A = a)` with `V` drawn by inverse CDF.
pub fn simulate_interventional(which: Which, a: f64, n: usize, stream: &mut RngStream) -> McEstimate {
    let d = which.density();
    let c = which.shift();
    let hits = (0..n).filter(|_| (d.sample(stream) - a + c).abs() <= 1.0).count();
    bernoulli_estimate(hits, n)
}

/// Simulates the observational SCM and returns the overall mean of `Y`,
/// which equals `∫₀¹ E[Y | A = a] da`.
pub fn simulate_observational(which: Which, n: usize, stream: &mut RngStream) -> McEstimate {
    let d = which.density();
    let c = which.shift();
    let hits = (0..n)
        .filter(|_| {
            let a = stream.uniform(0.0, 1.0);
            let z = -a + d.sample(stream);
            (z + c).abs() <= 1.0
        })
        .count();
    bernoulli_estimate(hits, n)
}

/// `n` midpoints of equal cells in `(lo, hi)`.
pub fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub a: f64,
    pub s1: f64,
    pub s2: f64,
}

impl GridRow {
    pub fn difference(&self) -> f64 {
        self.s1 - self.s2
    }
}

/// Closed-form observational means on a grid inside `(0, 1)`.
pub fn observational_table(grid: &[f64]) -> Result<Vec<GridRow>> {
    grid.iter()
        .map(|&a| Ok(GridRow { a, s1: observational_mean(Which::One, a)?, s2: observational_mean(Which::Two, a)? }))
        .collect()
}

pub fn interventional_table(grid: &[f64]) -> Vec<GridRow> {
    grid.iter()
        .map(|&a| GridRow { a, s1: interventional_mean(Which::One, a), s2: interventional_mean(Which::Two, a) })
        .collect()
}

/// Shown beside the tables: the flat piece, not the exponential tail,
/// carries the `S₁` mass on `(−3, −2)`.
pub const TAIL_BOUND_NOTE: &str = "note: for a in (-3,-2) the S1 window (a-1, a+1) lies inside (-4, 2), where p1 = 1/12, \
so E[Y|do(a)] = 1/6 exactly; a bound routed through the exponential branch (1/4)exp(v+4) does not apply there. \
The conclusion is unaffected: S1 and S2 differ by 1/12 on the whole interval.";

/// One Monte-Carlo check against its closed-form value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub which: Which,
    /// `None` for the observational mean of `Y` over `A ~ Unif(0, 1)`.
    pub a: Option<f64>,
    pub estimate: McEstimate,
    pub exact: f64,
}

impl McCheck {
    /// Deviation in units of the Monte-Carlo standard error.
    pub fn z_score(&self) -> f64 {
        (self.estimate.mean - self.exact) / self.estimate.std_error
    }
}

/// Interventional checks at `a = 0.5` and `a = −2.5` plus the observational
/// mean, for both SCMs, each on its own stream.
pub fn mc_checks(n: usize, seed: u64) -> Vec<McCheck> {
    let mut out = Vec::new();
    for (wi, w) in Which::BOTH.into_iter().enumerate() {
        let mut s = RngStream::derived(seed, &[wi as u64, 0]);
        // Observational E[Y | A = a] is 1/6 on all of (0, 1).
        out.push(McCheck { which: w, a: None, estimate: simulate_observational(w, n, &mut s), exact: 1.0 / 6.0 });
        for (ai, a) in [0.5, -2.5].into_iter().enumerate() {
            let mut s = RngStream::derived(seed, &[wi as u64, 1 + ai as u64]);
            out.push(McCheck {
                which: w,
                a: Some(a),
                estimate: simulate_interventional(w, a, n, &mut s),
                exact: interventional_mean(w, a),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_values() {
        assert_eq!(density_value(Which::One, 0.0), 1.0 / 12.0);
        assert!((density_value(Which::One, 3.0) - 0.25 * (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(density_value(Which::Two, -3.0), 1.0 / 24.0);
        assert!((density_value(Which::Two, -6.0) - 5.0 / 16.0 * (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn total_mass_is_one() {
        for w in Which::BOTH {
            assert!((interval_mass(w, f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matching_conditions_inside_support() {
        assert!((interval_mass(Which::One, -0.5, 1.5) - 1.0 / 6.0).abs() < 1e-15);
        assert!((interval_mass(Which::Two, -1.5, 0.5) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn interventional_gap_at_minus_two_and_a_half() {
        let s1 = interventional_mean(Which::One, -2.5);
        let s2 = interventional_mean(Which::Two, -2.5);
        assert!((s1 - 1.0 / 6.0).abs() < 1e-15);
        assert!((s2 - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn observational_mean_outside_support_rejected() {
        assert!(matches!(observational_mean(Which::One, 1.5), Err(Error::OutsideObservationalSupport(a)) if a == 1.5));
        assert!(observational_mean(Which::Two, 0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for w in Which::BOTH {
            let d = w.density();
            for &v in &[-9.0, -4.5, -3.0, 0.0, 1.5, 4.0] {
                let u = d.mass(f64::NEG_INFINITY, v);
                assert!((d.quantile(u) - v).abs() < 1e-9, "{w:?} {v}");
            }
        }
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        for w in Which::BOTH {
            for &(lo, hi) in &[(-7.0, 3.5), (-2.2, -1.9), (0.5, 9.0)] {
                let exact = interval_mass(w, lo, hi);
                let quad = quadrature_mass(w, lo, hi, 1e-13);
                assert!((exact - quad).abs() < 1e-10, "{w:?} ({lo},{hi}): {exact} vs {quad}");
            }
        }
    }
}
