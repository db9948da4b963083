//! Helpers for time series: sums of complex exponentials with exact moving
//! averages, and extremum location by coarse scan plus golden-section search.

use crate::quantum::C64;

/// f(τ) = Re Σ aₖ e^{λₖτ}.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSum {
    terms: Vec<(C64, C64)>,
}

impl ExponentialSum {
    /// Terms are (amplitude, exponent) pairs.
    pub fn new(terms: Vec<(C64, C64)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(C64, C64)] {
        &self.terms
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { terms: self.terms.iter().map(|(a, l)| (a * k, *l)).collect() }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.terms.iter().map(|(a, l)| a * (l * tau).exp()).sum::<C64>().re
    }

    /// Centered moving average over [τ − w/2, τ + w/2], evaluated exactly:
    /// each mode picks up the factor sinh(λw/2)/(λw/2).
    pub fn window_mean(&self, tau: f64, width: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, l)| {
                let z = l * (0.5 * width);
                let factor = if z.norm() < 1e-8 { C64::new(1.0, 0.0) + z * z / 6.0 } else { z.sinh() / z };
                a * (l * tau).exp() * factor
            })
            .sum::<C64>()
            .re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub tau: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal `f` on [a, b] to bracket width `tol`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_section_min(|t| -f(t), a, b, tol);
    (x, -v)
}

/// All interior local extrema of `f` on [a, b]: a scan with spacing `step`
/// brackets each one and golden-section search refines it to `tol`.
pub fn local_extrema<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, step: f64, tol: f64) -> Vec<Extremum> {
    let n = ((b - a) / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| (a + k as f64 * step).min(b)).collect();
    let vals: Vec<f64> = grid.iter().map(|t| f(*t)).collect();
    let mut out = Vec::new();
    for k in 1..n {
        let (l, m, r) = (vals[k - 1], vals[k], vals[k + 1]);
        if m < l && m <= r {
            let (tau, value) = golden_section_min(&f, grid[k - 1], grid[k + 1], tol);
            out.push(Extremum { tau, value, kind: ExtremumKind::Minimum });
        } else if m > l && m >= r {
            let (tau, value) = golden_section_max(&f, grid[k - 1], grid[k + 1], tol);
            out.push(Extremum { tau, value, kind: ExtremumKind::Maximum });
        }
    }
    out
}

/// Deepest interior local minimum of `f` on [a, b].
pub fn global_minimum<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, step: f64, tol: f64) -> Option<Extremum> {
    local_extrema(f, a, b, step, tol)
        .into_iter()
        .filter(|e| e.kind == ExtremumKind::Minimum)
        .min_by(|x, y| x.value.total_cmp(&y.value))
}

/// Highest interior local maximum of `f` on [a, b].
pub fn global_maximum<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, step: f64, tol: f64) -> Option<Extremum> {
    local_extrema(f, a, b, step, tol)
        .into_iter()
        .filter(|e| e.kind == ExtremumKind::Maximum)
        .max_by(|x, y| x.value.total_cmp(&y.value))
}

/// First local maximum after `tau`.
pub fn next_maximum<F: Fn(f64) -> f64>(f: F, tau: f64, b: f64, step: f64, tol: f64) -> Option<Extremum> {
    local_extrema(f, tau, b, step, tol).into_iter().find(|e| e.kind == ExtremumKind::Maximum && e.tau > tau)
}
