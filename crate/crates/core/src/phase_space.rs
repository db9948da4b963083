//! Wigner function of the cavity field.
//!
//! Convention: W(α) = (2/π) tr[ρ_c D(α) Π D(α)†] with Π the photon parity,
//! so the vacuum peaks at 2/π and W integrates to one over dx dy, α = x + iy.

use std::collections::HashMap;
use std::f64::consts::{FRAC_2_PI, SQRT_2};
use std::io::{self, Read, Write};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::four_level::{cavity_coefficients, FourLevelState};
use crate::quantum::{CavityDensityMatrix, C64, ZERO};

const COEFF_TOL: f64 = 1e-12;
/// Minimum number of Fock levels beyond the truncation used to represent
/// the displacement; large |α| raises it further.
pub const DISPLACEMENT_MARGIN: usize = 20;
const LEAKAGE_LIMIT: f64 = 1e-8;
/// Fock populations below this are treated as outside the state's support.
const SUPPORT_FLOOR: f64 = 1e-24;
const MAX_CONTOUR_STEP: f64 = 0.02;
const BINARY_MAGIC: &[u8; 4] = b"WIGR";

/// Fock populations d₀, d₁, d₂ and the ⟨0|ρ_c|2⟩ coherence d₃ of a cavity
/// state confined to n ≤ 2 with a purely imaginary two-photon coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockCoefficients {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl FockCoefficients {
    pub fn validate(&self) -> Result<()> {
        let sum = self.d0 + self.d1 + self.d2;
        if (sum - 1.0).abs() > COEFF_TOL {
            return Err(Error::TraceNotUnit(sum));
        }
        for d in [self.d0, self.d1, self.d2] {
            if !(-COEFF_TOL..=1.0 + COEFF_TOL).contains(&d) {
                return Err(Error::NotPositive(d));
            }
        }
        Ok(())
    }

    /// The cavity density matrix these coefficients describe.
    pub fn to_cavity(&self, n_trunc: usize) -> Result<CavityDensityMatrix> {
        let mut m = Array2::<C64>::zeros((n_trunc + 1, n_trunc + 1));
        m[[0, 0]] = C64::new(self.d0, 0.0);
        m[[1, 1]] = C64::new(self.d1, 0.0);
        m[[2, 2]] = C64::new(self.d2, 0.0);
        m[[0, 2]] = C64::new(0.0, self.d3);
        m[[2, 0]] = C64::new(0.0, -self.d3);
        CavityDensityMatrix::new(m)
    }
}

/// Closed form for states on n ≤ 2:
/// (2/π)e^{−2|α|²}[d₀ − d₁L₁(4|α|²) + d₂L₂(4|α|²) − 8√2 d₃xy].
pub fn wigner_point(c: &FockCoefficients, alpha: C64) -> f64 {
    let r2 = alpha.norm_sqr();
    let u = 4.0 * r2;
    let l1 = 1.0 - u;
    let l2 = 1.0 - 2.0 * u + 0.5 * u * u;
    FRAC_2_PI * (-2.0 * r2).exp() * (c.d0 - c.d1 * l1 + c.d2 * l2 - 8.0 * SQRT_2 * c.d3 * alpha.re * alpha.im)
}

/// Stationary Wigner function of the effective model in terms of p₃ and
/// the ratio of the coherence decay rate to Ω.
pub fn wigner_ss_point(p3: f64, gamma_over_omega: f64, alpha: C64) -> f64 {
    let (x, y) = (alpha.re, alpha.im);
    let r2 = x * x + y * y;
    let bracket = 1.0 - 2.0 * p3 - 1.5 * p3 * (1.0 - 4.0 * r2) + 0.5 * p3 * (1.0 - 8.0 * r2 + 8.0 * r2 * r2)
        - 8.0 * gamma_over_omega * p3 * x * y;
    FRAC_2_PI * (-2.0 * r2).exp() * bracket
}

/// W(0) = (2/π)(d₀ − d₁ + d₂), the scaled photon parity.
pub fn wigner_origin(state: &FourLevelState) -> f64 {
    let c = cavity_coefficients(state);
    FRAC_2_PI * (c.d0 - c.d1 + c.d2)
}

pub fn wigner_origin_series(states: &[FourLevelState]) -> Vec<f64> {
    states.iter().map(wigner_origin).collect()
}

/// Rectangular sampling grid in the α plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(2.5, 0.01)
    }
}

impl GridSpec {
    pub fn square(half_width: f64, step: f64) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width, step }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max, self.step].iter().all(|v| v.is_finite());
        if !ok || self.step <= 0.0 || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidParameter { name: "grid", reason: format!("{self:?}") });
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step).round() as usize;
        (0..=n).map(|k| min + k as f64 * step).collect()
    }

    pub fn x_axis(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.step)
    }

    pub fn y_axis(&self) -> Vec<f64> {
        Self::axis(self.y_min, self.y_max, self.step)
    }
}

/// Sampled Wigner function; `values[[j, i]]` is W(x_i + i y_j).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Array2<f64>,
    pub tau: Option<f64>,
    pub fingerprint: String,
}

impl WignerGrid {
    pub fn from_fn<F: Fn(C64) -> f64 + Sync>(grid: &GridSpec, f: F) -> Result<Self> {
        grid.validate()?;
        let x = grid.x_axis();
        let y = grid.y_axis();
        let rows: Vec<Vec<f64>> =
            y.par_iter().map(|yj| x.iter().map(|xi| f(C64::new(*xi, *yj))).collect()).collect();
        let values = Array2::from_shape_vec((y.len(), x.len()), rows.concat()).expect("grid shape");
        Ok(Self { x, y, values, tau: None, fingerprint: String::new() })
    }

    pub fn closed_form(c: &FockCoefficients, grid: &GridSpec) -> Result<Self> {
        c.validate()?;
        Self::from_fn(grid, |a| wigner_point(c, a))
    }

    fn steps(&self) -> (f64, f64) {
        let dx = if self.x.len() > 1 { self.x[1] - self.x[0] } else { 0.0 };
        let dy = if self.y.len() > 1 { self.y[1] - self.y[0] } else { 0.0 };
        (dx, dy)
    }

    /// Σ W dx dy over the grid.
    pub fn riemann_sum(&self) -> f64 {
        let (dx, dy) = self.steps();
        self.values.sum() * dx * dy
    }

    /// Smallest sample and its (x, y).
    pub fn minimum(&self) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ((j, i), v) in self.values.indexed_iter() {
            if *v < best.0 {
                best = (*v, self.x[i], self.y[j]);
            }
        }
        best
    }

    /// CSV with header `x,y,w`, rows ordered by y then x.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,w")?;
        for (j, y) in self.y.iter().enumerate() {
            for (i, x) in self.x.iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", x, y, self.values[[j, i]])?;
            }
        }
        Ok(())
    }

    /// Binary layout, little endian: "WIGR", nx: u32, ny: u32,
    /// x_min, x_max, y_min, y_max as f32, u32 reserved (0); then nx·ny
    /// f64 values row by row (y outer, x inner).
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.x.len() as u32).to_le_bytes())?;
        out.write_all(&(self.y.len() as u32).to_le_bytes())?;
        for v in [self.x[0], *self.x.last().unwrap(), self.y[0], *self.y.last().unwrap()] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        out.write_all(&0u32.to_le_bytes())?;
        for v in self.values.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> io::Result<Self> {
        let mut header = [0u8; 32];
        input.read_exact(&mut header)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
        }
        let u32_at = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as usize;
        let f32_at = |k: usize| f32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as f64;
        let (nx, ny) = (u32_at(4), u32_at(8));
        let (x0, x1, y0, y1) = (f32_at(12), f32_at(16), f32_at(20), f32_at(24));
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..n).map(|k| if n > 1 { a + (b - a) * k as f64 / (n - 1) as f64 } else { a }).collect()
        };
        let mut buf = vec![0u8; nx * ny * 8];
        input.read_exact(&mut buf)?;
        let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let values = Array2::from_shape_vec((ny, nx), vals).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        Ok(Self { x: lin(x0, x1, nx), y: lin(y0, y1, ny), values, tau: None, fingerprint: String::new() })
    }
}

/// Matrix elements ⟨j|D(α)|n⟩ for j < rows, n < cols, from
/// D|n⟩ = (a† − α*)D|n−1⟩/√n starting at the coherent state D|0⟩ = |α⟩.
fn displacement_block(alpha: C64, rows: usize, cols: usize) -> Array2<C64> {
    let mut d = Array2::<C64>::zeros((rows, cols));
    let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for j in 0..rows {
        d[[j, 0]] = amp;
        amp = amp * alpha / ((j + 1) as f64).sqrt();
    }
    let ac = alpha.conj();
    for n in 1..cols {
        let s = 1.0 / (n as f64).sqrt();
        for j in 0..rows {
            let up = if j > 0 { d[[j - 1, n - 1]] * (j as f64).sqrt() } else { ZERO };
            d[[j, n]] = (up - ac * d[[j, n - 1]]) * s;
        }
    }
    d
}

/// Value at one point by displaced parity with displacement cutoff
/// n_trunc + margin. Also returns the trace lost to the cutoff.
fn displaced_parity(rho: &Array2<C64>, support: usize, cutoff: usize, alpha: C64) -> (f64, f64) {
    // ⟨n|D(α)†ρD(α)|n⟩ = Σ_jk conj(D_jn) ρ_jk D_kn.
    let d = displacement_block(alpha, support, cutoff + 1);
    let mut w = 0.0;
    let mut total = 0.0;
    let mut v = vec![ZERO; support];
    for n in 0..=cutoff {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = (0..support).map(|k| rho[[j, k]] * d[[k, n]]).sum();
        }
        let p: f64 = (0..support).map(|j| (d[[j, n]].conj() * v[j]).re).sum();
        total += p;
        w += if n % 2 == 0 { p } else { -p };
    }
    (FRAC_2_PI * w, 1.0 - total)
}

/// Displacement cutoff for a state supported on n < `support` at |α|:
/// covers the displaced photon distribution with a generous margin.
fn displacement_cutoff(n_trunc: usize, support: usize, alpha_abs: f64) -> usize {
    let reach = (support as f64).sqrt() + alpha_abs;
    (n_trunc + DISPLACEMENT_MARGIN).max((reach * reach + 8.0 * reach + 10.0).ceil() as usize)
}

fn support_of(rho: &CavityDensityMatrix) -> usize {
    let n = rho.n_trunc();
    let mut tail = 0.0;
    for k in (0..=n).rev() {
        tail += rho.population(k);
        if tail > SUPPORT_FLOOR {
            return k + 1;
        }
    }
    1
}

/// W(α) of an arbitrary truncated cavity state at one point.
pub fn wigner_general_point(rho: &CavityDensityMatrix, alpha: C64) -> Result<f64> {
    let support = support_of(rho);
    let cutoff = displacement_cutoff(rho.n_trunc(), support, alpha.norm());
    let (w, leak) = displaced_parity(rho.as_array(), support, cutoff, alpha);
    if leak.abs() > LEAKAGE_LIMIT {
        return Err(Error::InsufficientCutoff(leak));
    }
    Ok(w)
}

/// W(α) over a grid for an arbitrary truncated cavity state.
pub fn wigner_general(rho: &CavityDensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    let support = support_of(rho);
    let x = grid.x_axis();
    let y = grid.y_axis();
    let rows: Vec<(Vec<f64>, f64)> = y
        .par_iter()
        .map(|yj| {
            let mut worst = 0.0f64;
            let row = x
                .iter()
                .map(|xi| {
                    let alpha = C64::new(*xi, *yj);
                    let cutoff = displacement_cutoff(rho.n_trunc(), support, alpha.norm());
                    let (w, leak) = displaced_parity(rho.as_array(), support, cutoff, alpha);
                    worst = worst.max(leak.abs());
                    w
                })
                .collect();
            (row, worst)
        })
        .collect();
    let leak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if leak > LEAKAGE_LIMIT {
        return Err(Error::InsufficientCutoff(leak));
    }
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.0).collect();
    let values = Array2::from_shape_vec((y.len(), x.len()), flat).expect("grid shape");
    Ok(WignerGrid { x, y, values, tau: None, fingerprint: String::new() })
}

/// Shape of the set where W < 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeTopology {
    Empty,
    SimplyConnected,
    Ring,
    Other { components: usize, holes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativityReport {
    /// Zero-level contours; closed loops repeat their first point at the end.
    pub contours: Vec<Vec<(f64, f64)>>,
    pub topology: NegativeTopology,
    pub min_value: f64,
    pub min_location: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between (i, j) and (i+1, j).
    H(usize, usize),
    /// Between (i, j) and (i, j+1).
    V(usize, usize),
}

/// Zero-level contours by marching squares and the topology of the negative
/// set by connected-component labelling.
pub fn negativity_region(grid: &WignerGrid) -> Result<NegativityReport> {
    let (dx, dy) = grid.steps();
    if dx > MAX_CONTOUR_STEP + 1e-12 || dy > MAX_CONTOUR_STEP + 1e-12 {
        return Err(Error::InvalidParameter { name: "grid", reason: format!("step ({dx}, {dy}) is coarser than 0.02") });
    }
    let (min_value, mx, my) = grid.minimum();
    Ok(NegativityReport {
        contours: zero_contours(grid),
        topology: topology(&grid.values),
        min_value,
        min_location: (mx, my),
    })
}

fn zero_contours(grid: &WignerGrid) -> Vec<Vec<(f64, f64)>> {
    let w = &grid.values;
    let (ny, nx) = w.dim();
    let inside = |i: usize, j: usize| w[[j, i]] < 0.0;
    let point = |e: Edge| -> (f64, f64) {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (v0, v1) = (w[[j0, i0]], w[[j1, i1]]);
        let t = v0 / (v0 - v1);
        (grid.x[i0] + t * (grid.x[i1] - grid.x[i0]), grid.y[j0] + t * (grid.y[j1] - grid.y[j0]))
    };
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let n_in = c.iter().filter(|b| **b).count();
            if n_in == 0 || n_in == 4 {
                continue;
            }
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            // Edges around each corner, in corner order 00, 10, 11, 01.
            let around = [(left, bottom), (bottom, right), (right, top), (top, left)];
            if n_in == 2 && c[0] == c[2] {
                let centre = 0.25 * (w[[j, i]] + w[[j, i + 1]] + w[[j + 1, i + 1]] + w[[j + 1, i]]) < 0.0;
                for (k, pair) in around.iter().enumerate() {
                    if c[k] != centre {
                        segments.push(*pair);
                    }
                }
            } else {
                let crossed: Vec<Edge> = [(bottom, 0, 1), (right, 1, 2), (top, 2, 3), (left, 3, 0)]
                    .iter()
                    .filter(|(_, a, b)| c[*a] != c[*b])
                    .map(|(e, _, _)| *e)
                    .collect();
                segments.push((crossed[0], crossed[1]));
            }
        }
    }
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let walk = |start: usize, from: Edge, used: &mut Vec<bool>| -> Vec<Edge> {
        let mut path = vec![from];
        let mut seg = start;
        let mut at = from;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            path.push(next);
            at = next;
            match by_edge[&at].iter().find(|s| !used[**s]) {
                Some(s) => seg = *s,
                None => break,
            }
        }
        path
    };
    // Open lines start on edges touched by a single segment (grid boundary).
    let mut starts: Vec<(Edge, usize)> =
        by_edge.iter().filter(|(_, v)| v.len() == 1).map(|(e, v)| (*e, v[0])).collect();
    starts.sort_by_key(|(_, s)| *s);
    for (edge, seg) in starts {
        if !used[seg] {
            lines.push(walk(seg, edge, &mut used));
        }
    }
    for seg in 0..segments.len() {
        if !used[seg] {
            lines.push(walk(seg, segments[seg].0, &mut used));
        }
    }
    lines.into_iter().map(|p| p.into_iter().map(point).collect()).collect()
}

/// Labels 4-connected components of the negative set and 8-connected
/// components of its complement that do not reach the boundary (holes).
fn topology(w: &Array2<f64>) -> NegativeTopology {
    let (ny, nx) = w.dim();
    let neg = |i: usize, j: usize| w[[j, i]] < 0.0;
    let count = |want_neg: bool, diag: bool, skip_border: bool| -> usize {
        let mut seen = Array2::<bool>::from_elem((ny, nx), false);
        let mut n = 0;
        for j0 in 0..ny {
            for i0 in 0..nx {
                if seen[[j0, i0]] || neg(i0, j0) != want_neg {
                    continue;
                }
                let mut stack = vec![(i0, j0)];
                seen[[j0, i0]] = true;
                let mut touches = false;
                while let Some((i, j)) = stack.pop() {
                    touches |= i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
                    for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                        if !diag && di != 0 && dj != 0 {
                            continue;
                        }
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                            continue;
                        }
                        let (ii, jj) = (ii as usize, jj as usize);
                        if !seen[[jj, ii]] && neg(ii, jj) == want_neg {
                            seen[[jj, ii]] = true;
                            stack.push((ii, jj));
                        }
                    }
                }
                if !(skip_border && touches) {
                    n += 1;
                }
            }
        }
        n
    };
    let components = count(true, false, false);
    if components == 0 {
        return NegativeTopology::Empty;
    }
    let holes = count(false, true, true);
    match (components, holes) {
        (1, 0) => NegativeTopology::SimplyConnected,
        (1, 1) => NegativeTopology::Ring,
        _ => NegativeTopology::Other { components, holes },
    }
}
