//! The discrete roto-translation space R²×S¹ and finite differences along
//! the moving frame
//!
//! ```text
//! X1 = cos θ ∂x + sin θ ∂y,   X2 = ∂θ,   X3 = -sin θ ∂x + cos θ ∂y.
//! ```
//!
//! The θ-axis has period π and wraps. The spatial axes use replicate-edge
//! ghost cells: every stencil reads `U` through clamped indices, so compound
//! stencils behave as if the field were extended by its edge values.
//!
//! Because the fields stored on the grid are π-periodic in θ, first frame
//! derivatives `X1 U`, `X3 U` are π-*anti*-periodic. Compound stencils that
//! differentiate them in θ therefore evaluate the trigonometric coefficients
//! at the unwrapped angle `(k + dk)·dθ`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Theta,
}

/// Finite-difference direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Forward,
    Backward,
    Central,
}

/// One of the three frame vector fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    X1,
    X2,
    X3,
}

/// Sampling of R²×S¹ with `ntheta` orientations in `[0, π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    ntheta: usize,
    dx: f64,
    dy: f64,
    dtheta: f64,
    x0: f64,
    y0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl GridSpec {
    /// Grid with origin at `(0, 0)` and the given spatial spacings.
    pub fn new(nx: usize, ny: usize, ntheta: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || ntheta < 3 {
            return Err(Error::config(format!(
                "grid needs at least 3 samples per axis, got {nx}x{ny}x{ntheta}"
            )));
        }
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::config(format!(
                "grid spacings must be positive, got dx={dx}, dy={dy}"
            )));
        }
        let dtheta = PI / ntheta as f64;
        let (sin, cos) = (0..ntheta).map(|k| (k as f64 * dtheta).sin_cos()).unzip();
        Ok(GridSpec {
            nx,
            ny,
            ntheta,
            dx,
            dy,
            dtheta,
            x0: 0.0,
            y0: 0.0,
            cos,
            sin,
        })
    }

    /// Pixel-registered grid: node `(i, j)` is pixel `(i, j)`, unit spacing.
    pub fn for_image(width: usize, height: usize, ntheta: usize) -> Result<Self> {
        Self::new(width, height, ntheta, 1.0, 1.0)
    }

    /// Grid whose first and last nodes sit on the given interval end points.
    pub fn spanning(
        nx: usize,
        ny: usize,
        ntheta: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Result<Self> {
        let dx = (x_range.1 - x_range.0) / (nx.max(2) - 1) as f64;
        let dy = (y_range.1 - y_range.0) / (ny.max(2) - 1) as f64;
        Ok(Self::new(nx, ny, ntheta, dx, dy)?.with_origin(x_range.0, y_range.0))
    }

    pub fn with_origin(mut self, x0: f64, y0: f64) -> Self {
        self.x0 = x0;
        self.y0 = y0;
        self
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn ntheta(&self) -> usize {
        self.ntheta
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn x_extent(&self) -> f64 {
        (self.nx - 1) as f64 * self.dx
    }

    pub fn y_extent(&self) -> f64 {
        (self.ny - 1) as f64 * self.dy
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.dtheta
    }

    /// Smallest spacing over all three axes.
    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy).min(self.dtheta)
    }

    /// Largest explicit time step for which the scheme is stable, `h²/10`.
    pub fn stable_dt(&self) -> f64 {
        let h = self.min_spacing();
        h * h / 10.0
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let rest = idx / self.nx;
        (i, rest % self.ny, rest / self.ny)
    }

    /// `(cos θ, sin θ)` at the unwrapped orientation index `k`; indices one
    /// period away carry the opposite sign.
    #[inline]
    pub fn trig(&self, k: isize) -> (f64, f64) {
        let n = self.ntheta as isize;
        let r = k.rem_euclid(n) as usize;
        if k.div_euclid(n) % 2 == 0 {
            (self.cos[r], self.sin[r])
        } else {
            (-self.cos[r], -self.sin[r])
        }
    }

    /// `(cos θ_k, sin θ_k)` for an in-range index.
    #[inline]
    pub(crate) fn cos_sin(&self, k: usize) -> (f64, f64) {
        (self.cos[k], self.sin[k])
    }

    pub(crate) fn same_shape(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.ntheta == other.ntheta
            && self.dx == other.dx
            && self.dy == other.dy
    }

    fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Theta => self.ntheta,
        }
    }
}

/// A real function sampled on every node of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField3 {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField3 {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        ScalarField3 {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("field values must be finite".into()));
        }
        Ok(ScalarField3 {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x, y, θ)` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        Self::from_index_fn(grid, |i, j, k| f(grid.x(i), grid.y(j), grid.theta(k)))
    }

    pub fn from_index_fn(grid: &GridSpec, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (i, j, k) = grid.coords(idx);
                f(i, j, k)
            })
            .collect();
        ScalarField3 {
            grid: grid.clone(),
            values,
        }
    }

    /// Evaluates a stencil at every node. Each node is computed independently
    /// so the serial and parallel paths produce identical bits.
    pub(crate) fn from_stencil<F>(source: &ScalarField3, parallel: bool, f: F) -> Self
    where
        F: Fn(&Probe<'_>) -> f64 + Sync,
    {
        let grid = &source.grid;
        let eval = |idx: usize| {
            let (i, j, k) = grid.coords(idx);
            f(&source.probe(i, j, k))
        };
        let values = if parallel {
            (0..grid.len()).into_par_iter().map(eval).collect()
        } else {
            (0..grid.len()).map(eval).collect()
        };
        ScalarField3 {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.grid.index(i, j, k);
        self.values[idx] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField3 {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup norm.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm of the difference of two fields on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField3) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    #[inline]
    pub(crate) fn probe(&self, i: usize, j: usize, k: usize) -> Probe<'_> {
        let g = &self.grid;
        let (nx, ny, nt) = (g.nx as isize, g.ny as isize, g.ntheta as isize);
        let plane = g.nx * g.ny;
        let mut xs = [0; PROBE_SPAN];
        let mut ys = [0; PROBE_SPAN];
        let mut ks = [0; PROBE_SPAN];
        for t in 0..PROBE_SPAN {
            let d = t as isize - PROBE_REACH;
            xs[t] = (i as isize + d).clamp(0, nx - 1) as usize;
            ys[t] = (j as isize + d).clamp(0, ny - 1) as usize * g.nx;
            let kk = k as isize + d;
            let kk = if kk < 0 {
                kk + nt
            } else if kk >= nt {
                kk - nt
            } else {
                kk
            };
            ks[t] = kk as usize * plane;
        }
        Probe {
            f: self,
            k,
            xs,
            ys,
            ks,
        }
    }

    fn check_axis(&self, axis: Axis) -> Result<()> {
        let n = self.grid.axis_len(axis);
        if n < 3 {
            return Err(Error::config(format!(
                "axis {axis:?} has {n} samples, need at least 3"
            )));
        }
        Ok(())
    }
}

/// Offset of a stencil point relative to the probed node.
pub(crate) type Offset = [isize; 3];

#[inline]
fn shift(o: Offset, axis: Axis, by: isize) -> Offset {
    match axis {
        Axis::X => [o[0] + by, o[1], o[2]],
        Axis::Y => [o[0], o[1] + by, o[2]],
        Axis::Theta => [o[0], o[1], o[2] + by],
    }
}

/// Read access to a field around one node, with ghost-cell and periodic
/// index handling.
#[derive(Clone, Copy)]
pub(crate) struct Probe<'a> {
    f: &'a ScalarField3,
    k: usize,
    // clamped / wrapped linear offsets for relative positions -2..=2
    xs: [usize; PROBE_SPAN],
    ys: [usize; PROBE_SPAN],
    ks: [usize; PROBE_SPAN],
}

/// Largest stencil offset along any axis.
const PROBE_REACH: isize = 2;
const PROBE_SPAN: usize = 2 * PROBE_REACH as usize + 1;

impl<'a> Probe<'a> {
    /// Field value at `o`, spatially clamped and θ-wrapped.
    #[inline]
    pub fn u(&self, o: Offset) -> f64 {
        let r = PROBE_REACH;
        self.f.values[self.xs[(o[0] + r) as usize]
            + self.ys[(o[1] + r) as usize]
            + self.ks[(o[2] + r) as usize]]
    }

    #[inline]
    pub fn trig(&self, dk: isize) -> (f64, f64) {
        let g = &self.f.grid;
        let n = g.ntheta as isize;
        let kk = self.k as isize + dk;
        if kk < 0 {
            let r = (kk + n) as usize;
            (-g.cos[r], -g.sin[r])
        } else if kk >= n {
            let r = (kk - n) as usize;
            (-g.cos[r], -g.sin[r])
        } else {
            (g.cos[kk as usize], g.sin[kk as usize])
        }
    }

    #[inline]
    fn spacing(&self, axis: Axis) -> f64 {
        let g = &self.f.grid;
        match axis {
            Axis::X => g.dx,
            Axis::Y => g.dy,
            Axis::Theta => g.dtheta,
        }
    }

    /// Coordinate difference of an arbitrary node function `g` at offset `o`.
    #[inline]
    pub fn diff_of<G: Fn(Offset) -> f64>(
        &self,
        axis: Axis,
        scheme: Scheme,
        o: Offset,
        g: &G,
    ) -> f64 {
        let h = self.spacing(axis);
        match scheme {
            Scheme::Forward => (g(shift(o, axis, 1)) - g(o)) / h,
            Scheme::Backward => (g(o) - g(shift(o, axis, -1))) / h,
            Scheme::Central => (g(shift(o, axis, 1)) - g(shift(o, axis, -1))) / (2.0 * h),
        }
    }

    /// Frame difference of `g` at offset `o`, with coefficients at `o`'s
    /// unwrapped orientation.
    #[inline]
    pub fn frame_of<G: Fn(Offset) -> f64>(
        &self,
        frame: Frame,
        scheme: Scheme,
        o: Offset,
        g: &G,
    ) -> f64 {
        match frame {
            Frame::X2 => self.diff_of(Axis::Theta, scheme, o, g),
            Frame::X1 => {
                let (c, s) = self.trig(o[2]);
                c * self.diff_of(Axis::X, scheme, o, g) + s * self.diff_of(Axis::Y, scheme, o, g)
            }
            Frame::X3 => {
                let (c, s) = self.trig(o[2]);
                -s * self.diff_of(Axis::X, scheme, o, g) + c * self.diff_of(Axis::Y, scheme, o, g)
            }
        }
    }

    #[inline]
    pub fn diff_at(&self, axis: Axis, scheme: Scheme, o: Offset) -> f64 {
        self.diff_of(axis, scheme, o, &|p| self.u(p))
    }

    #[inline]
    pub fn frame_at(&self, frame: Frame, scheme: Scheme, o: Offset) -> f64 {
        self.frame_of(frame, scheme, o, &|p| self.u(p))
    }

    /// `D^{scheme X}` at the node itself.
    #[inline]
    pub fn frame(&self, frame: Frame, scheme: Scheme) -> f64 {
        self.frame_at(frame, scheme, [0, 0, 0])
    }

    /// `D^{-X} D^{+X} U`, the compact second difference along a frame field.
    #[cfg(test)]
    pub fn frame_second(&self, frame: Frame) -> f64 {
        let inner = |o: Offset| self.frame_at(frame, Scheme::Forward, o);
        self.frame_of(frame, Scheme::Backward, [0, 0, 0], &inner)
    }

    /// `D^{0 outer} D^{0 inner} U`.
    #[cfg(test)]
    pub fn frame_mixed(&self, outer: Frame, inner: Frame) -> f64 {
        let inner = |o: Offset| self.frame_at(inner, Scheme::Central, o);
        self.frame_of(outer, Scheme::Central, [0, 0, 0], &inner)
    }
}

/// Forward, backward or central difference along one coordinate axis.
pub fn coordinate_diff(f: &ScalarField3, axis: Axis, scheme: Scheme) -> Result<ScalarField3> {
    f.check_axis(axis)?;
    Ok(ScalarField3::from_stencil(f, true, |p| {
        p.diff_at(axis, scheme, [0, 0, 0])
    }))
}

/// Difference along a frame vector field, `cos θ_k D^x + sin θ_k D^y` for `X1`
/// and so on.
pub fn frame_diff(f: &ScalarField3, frame: Frame, scheme: Scheme) -> Result<ScalarField3> {
    for axis in [Axis::X, Axis::Y, Axis::Theta] {
        f.check_axis(axis)?;
    }
    Ok(ScalarField3::from_stencil(f, true, |p| {
        p.frame(frame, scheme)
    }))
}

#[inline]
pub(crate) fn horizontal_grad_norm_sq_at(p: &Probe<'_>, eps: f64, tau: f64) -> f64 {
    let d1 = p.frame(Frame::X1, Scheme::Central);
    let d2 = p.frame(Frame::X2, Scheme::Central);
    let d3 = if eps == 0.0 {
        0.0
    } else {
        p.frame(Frame::X3, Scheme::Central)
    };
    d1 * d1 + d2 * d2 + eps * eps * d3 * d3 + tau
}

/// `(D⁰X1 f)² + (D⁰X2 f)² + ε² (D⁰X3 f)² + τ` at every node.
pub fn horizontal_grad_norm_sq(f: &ScalarField3, eps: f64, tau: f64) -> Result<ScalarField3> {
    if !(eps >= 0.0 && tau >= 0.0) {
        return Err(Error::config(format!(
            "eps and tau must be non-negative, got eps={eps}, tau={tau}"
        )));
    }
    Ok(ScalarField3::from_stencil(f, true, |p| {
        horizontal_grad_norm_sq_at(p, eps, tau)
    }))
}

#[inline]
pub(crate) fn dint_norm_sq_at(p: &Probe<'_>, tau: f64) -> f64 {
    let sq = |frame: Frame, o: Offset| {
        let d = p.frame_at(frame, Scheme::Central, o);
        d * d
    };
    let along_theta =
        sq(Frame::X1, [0, 0, -1]) + sq(Frame::X1, [0, 0, 0]) + sq(Frame::X1, [0, 0, 1]);
    let in_plane = sq(Frame::X2, [-1, 0, 0])
        + sq(Frame::X2, [0, 0, 0])
        + sq(Frame::X2, [1, 0, 0])
        + sq(Frame::X2, [0, -1, 0])
        + sq(Frame::X2, [0, 1, 0]);
    along_theta / 3.0 + in_plane / 5.0 + tau
}

/// Averaged squared horizontal gradient used as the curvature-term
/// denominator: the `X1` part is averaged over the three neighbouring
/// orientations, the `X2` part over the five-point spatial cross.
pub fn dint_norm_sq(f: &ScalarField3, tau: f64) -> Result<ScalarField3> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config(format!("tau must be positive, got {tau}")));
    }
    Ok(ScalarField3::from_stencil(f, true, |p| {
        dint_norm_sq_at(p, tau)
    }))
}
