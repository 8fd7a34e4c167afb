//! Level-set curvature flow on R²×S¹.
//!
//! Two right-hand sides are provided:
//!
//! * the sub-Riemannian scheme (`eps = 0`, `sigma = 0`): an upwinded first
//!   order connection term [`w1_term`] plus a curvature term [`w2_term`] whose
//!   denominator is the neighbourhood-averaged gradient of [`dint_norm_sq`];
//! * the regularized Riemannian flow (`eps > 0` or `sigma > 0`): the full
//!   contraction `Σ A_ij(∇_ε U) X^ε_i X^ε_j U` over the frame
//!   `X1, X2, εX3`, with `A = (1 + σ) δ − p pᵀ / (|p|² + τ)`.
//!
//! Time stepping is explicit Euler. Nodes outside the evolving [`Region3`]
//! are held fixed (Dirichlet data) unless the flow runs on the full domain.

use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Frame, GridSpec, ScalarField3, Scheme};
use crate::kernel::{contraction, contraction_needs, FirstDiffs, Window, SR_NEEDS};

pub const DEFAULT_TAU: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    /// `h²/10` with `h` the smallest grid spacing.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Only nodes flagged in the region evolve; the rest are pinned.
    DirichletRegion,
    /// Every node evolves; the region is ignored.
    FullDomain,
}

/// How the `X1` derivative multiplying the mixed second difference in
/// [`w2_term`] is discretized.
///
/// Only `Central` keeps the discrete maximum principle on smooth data: a
/// one-sided difference does not vanish with the central gradient, so the
/// mixed coefficient loses its `|p1 p2| / |p|² ≤ 1/2` bound near extrema.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixedUpwind {
    /// Backward when `-D⁰X1U · D⁰X2U > 0`, forward when negative, central
    /// when zero (the switching rule of the connection term).
    ProductSign,
    /// One-sided by the sign of the transport coefficient
    /// `-2 D⁰X2U · D⁰X1D⁰X2U` that multiplies `X1 U`.
    TransportSign,
    Central,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub tau: f64,
    pub eps: f64,
    pub sigma: f64,
    pub dt: TimeStep,
    pub steps: usize,
    pub boundary: Boundary,
    pub mixed_upwind: MixedUpwind,
    /// Evaluate node updates on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            tau: DEFAULT_TAU,
            eps: 0.0,
            sigma: 0.0,
            dt: TimeStep::Auto,
            steps: 0,
            boundary: Boundary::FullDomain,
            mixed_upwind: MixedUpwind::Central,
            parallel: true,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!(
                "epsilon must be >= 0, got {}",
                self.eps
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn resolve_dt(&self, grid: &GridSpec) -> f64 {
        match self.dt {
            TimeStep::Auto => grid.stable_dt(),
            TimeStep::Fixed(dt) => dt,
        }
    }

    /// Ratio of the time step to the stability bound; above 1 is unstable.
    pub fn cfl_ratio(&self, grid: &GridSpec) -> f64 {
        self.resolve_dt(grid) / grid.stable_dt()
    }

    pub fn is_sub_riemannian(&self) -> bool {
        self.eps == 0.0 && self.sigma == 0.0
    }
}

/// Nodes allowed to evolve under [`Boundary::DirichletRegion`].
#[derive(Clone, Debug, PartialEq)]
pub struct Region3 {
    flags: Vec<bool>,
    active: Vec<usize>,
    /// Pixel bounding box `(i0, i1, j0, j1)` of the active nodes.
    bbox: Option<(usize, usize, usize, usize)>,
}

impl Region3 {
    pub fn from_flags(grid: &GridSpec, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != grid.len() {
            return Err(Error::config(format!(
                "region has {} nodes, grid has {}",
                flags.len(),
                grid.len()
            )));
        }
        let active: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter_map(|(idx, &f)| f.then_some(idx))
            .collect();
        let bbox = active.iter().fold(None, |acc, &idx| {
            let (i, j, _) = grid.coords(idx);
            Some(match acc {
                None => (i, i, j, j),
                Some((i0, i1, j0, j1)) => (i.min(i0), i.max(i1), j.min(j0), j.max(j1)),
            })
        });
        Ok(Region3 {
            flags,
            active,
            bbox,
        })
    }

    pub fn all(grid: &GridSpec) -> Self {
        Self::from_flags(grid, vec![true; grid.len()]).expect("sized to the grid")
    }

    pub fn none(grid: &GridSpec) -> Self {
        Self::from_flags(grid, vec![false; grid.len()]).expect("sized to the grid")
    }

    /// Extends a per-pixel flag image (row-major, `true` = evolves) along θ.
    pub fn from_pixels(grid: &GridSpec, pixels: &[bool]) -> Result<Self> {
        if pixels.len() != grid.pixels() {
            return Err(Error::config(format!(
                "pixel region has {} entries, grid plane has {}",
                pixels.len(),
                grid.pixels()
            )));
        }
        let flags = (0..grid.len())
            .map(|idx| pixels[idx % grid.pixels()])
            .collect();
        Self::from_flags(grid, flags)
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.flags[idx]
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn pinned_count(&self) -> usize {
        self.flags.len() - self.active.len()
    }
}

/// `A_ij = (1 + σ) δ_ij − p_i p_j / (|p|² + τ)` for a frame gradient `p`
/// whose third entry already carries the `ε` factor.
///
/// With `τ = 0` and `p = 0` the result is undefined (NaN).
pub fn coefficients(p: [f64; 3], tau: f64, sigma: f64) -> [[f64; 3]; 3] {
    let den = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + tau;
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 + sigma } else { 0.0 };
            a[i][j] = delta - p[i] * p[j] / den;
        }
    }
    a
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("tau must be positive, got {tau}")))
    }
}

fn node_map(
    u: &ScalarField3,
    parallel: bool,
    f: impl Fn(usize, usize, usize) -> f64 + Sync,
) -> ScalarField3 {
    let grid = u.grid();
    let eval = |idx: usize| {
        let (i, j, k) = grid.coords(idx);
        f(i, j, k)
    };
    let values = if parallel {
        (0..grid.len()).into_par_iter().map(eval).collect()
    } else {
        (0..grid.len()).map(eval).collect()
    };
    ScalarField3::from_values(grid, values).expect("one value per node")
}

/// Upwinded connection term of the sub-Riemannian scheme.
pub fn w1_term(u: &ScalarField3, tau: f64) -> Result<ScalarField3> {
    check_tau(tau)?;
    let d = FirstDiffs::new(u, SR_NEEDS, true);
    Ok(node_map(u, true, |i, j, k| d.w1(i, j, k, tau)))
}

/// Curvature term of the sub-Riemannian scheme.
pub fn w2_term(u: &ScalarField3, tau: f64, mixed: MixedUpwind) -> Result<ScalarField3> {
    check_tau(tau)?;
    let d = FirstDiffs::new(u, SR_NEEDS, true);
    Ok(node_map(u, true, |i, j, k| d.w2(i, j, k, tau, mixed)))
}

/// Full second-order contraction `Σ A^{ε,τ,σ}_ij X^ε_i X^ε_j U`, whatever the
/// parameters (including `ε = σ = 0`, where it is the horizontal 2×2 form).
pub fn contraction_rhs(u: &ScalarField3, eps: f64, tau: f64, sigma: f64) -> Result<ScalarField3> {
    check_tau(tau)?;
    let d = FirstDiffs::new(u, contraction_needs(eps), true);
    Ok(node_map(u, true, |i, j, k| {
        contraction(&d, &d, i, j, k, eps, tau, sigma)
    }))
}

fn rhs_diffs<'a>(u: &'a ScalarField3, params: &FlowParams, window: Window) -> FirstDiffs<'a> {
    let needs = if params.is_sub_riemannian() {
        SR_NEEDS
    } else {
        contraction_needs(params.eps)
    };
    FirstDiffs::within(u, needs, params.parallel, window)
}

/// Part of the plane whose difference tables a step reads.
pub(crate) fn step_window(grid: &GridSpec, params: &FlowParams, region: &Region3) -> Window {
    match (params.boundary, region.bbox) {
        (Boundary::DirichletRegion, Some((i0, i1, j0, j1))) => Window::around(grid, i0, i1, j0, j1),
        _ => Window::full(grid),
    }
}

#[inline]
fn rhs_at(d: &FirstDiffs<'_>, params: &FlowParams, i: usize, j: usize, k: usize) -> f64 {
    if params.is_sub_riemannian() {
        d.w2(i, j, k, params.tau, params.mixed_upwind) + d.w1(i, j, k, params.tau)
    } else {
        contraction(d, d, i, j, k, params.eps, params.tau, params.sigma)
    }
}

/// Right-hand side of the flow selected by `params`.
pub fn mcf_rhs(u: &ScalarField3, params: &FlowParams) -> Result<ScalarField3> {
    params.validate()?;
    let d = rhs_diffs(u, params, Window::full(u.grid()));
    Ok(node_map(u, params.parallel, |i, j, k| {
        rhs_at(&d, params, i, j, k)
    }))
}

/// Explicit Euler update `U + dt·rhs(U)` on the evolving nodes.
pub(crate) fn euler_update<F>(
    u: &ScalarField3,
    dt: f64,
    params: &FlowParams,
    region: &Region3,
    step_index: usize,
    rhs: F,
) -> Result<ScalarField3>
where
    F: Fn(usize) -> f64 + Sync,
{
    let grid = u.grid();
    let all;
    let nodes: &[usize] = match params.boundary {
        Boundary::FullDomain => {
            all = (0..grid.len()).collect::<Vec<_>>();
            &all
        }
        Boundary::DirichletRegion => {
            if region.flags.len() != grid.len() {
                return Err(Error::config("region does not match the field's grid"));
            }
            if region.pinned_count() == 0 {
                return Err(Error::config(
                    "dirichlet boundary needs at least one pinned node",
                ));
            }
            region.active()
        }
    };
    let update = |&idx: &usize| u.values()[idx] + dt * rhs(idx);
    let updated: Vec<f64> = if params.parallel {
        nodes.par_iter().map(update).collect()
    } else {
        nodes.iter().map(update).collect()
    };
    let mut out = u.clone();
    let values = out.values_mut();
    for (&idx, &val) in nodes.iter().zip(&updated) {
        if !val.is_finite() {
            let (i, j, k) = grid.coords(idx);
            return Err(Error::NonFinite {
                step: step_index,
                i,
                j,
                k,
            });
        }
        values[idx] = val;
    }
    Ok(out)
}

pub(crate) fn stability_warning(params: &FlowParams, grid: &GridSpec) -> Option<String> {
    let ratio = params.cfl_ratio(grid);
    (ratio > 1.0).then(|| {
        format!(
            "dt = {} exceeds the stability bound h²/10 = {} (ratio {ratio:.3})",
            params.resolve_dt(grid),
            grid.stable_dt()
        )
    })
}

pub(crate) fn mcf_step_indexed(
    u: &ScalarField3,
    params: &FlowParams,
    region: &Region3,
    step_index: usize,
) -> Result<ScalarField3> {
    let grid = u.grid();
    let dt = params.resolve_dt(grid);
    let d = rhs_diffs(u, params, step_window(grid, params, region));
    euler_update(u, dt, params, region, step_index, |idx| {
        let (i, j, k) = grid.coords(idx);
        rhs_at(&d, params, i, j, k)
    })
}

/// One explicit Euler step of the flow.
///
/// A time step above the stability bound is allowed but logged; a
/// non-finite result is an error naming the first offending node.
pub fn step(u: &ScalarField3, params: &FlowParams, region: &Region3) -> Result<ScalarField3> {
    params.validate()?;
    if let Some(w) = stability_warning(params, u.grid()) {
        warn!("{w}");
    }
    mcf_step_indexed(u, params, region, 0)
}

/// Per-run record of an evolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Sup norm of the field: entry 0 is the initial field, entry `s` the
    /// field after step `s`.
    pub sup_norms: Vec<f64>,
    /// Sup of the Euclidean central-difference gradient, same indexing.
    pub grad_sups: Vec<f64>,
    pub elapsed: Duration,
    pub dt: f64,
    pub cfl_ratio: f64,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn start(u: &ScalarField3, params: &FlowParams) -> Self {
        let mut warnings = Vec::new();
        if let Some(w) = stability_warning(params, u.grid()) {
            warnings.push(w);
        }
        Diagnostics {
            sup_norms: vec![u.max_abs()],
            grad_sups: vec![euclidean_grad_sup(u)],
            elapsed: Duration::ZERO,
            dt: params.resolve_dt(u.grid()),
            cfl_ratio: params.cfl_ratio(u.grid()),
            warnings,
        }
    }

    pub(crate) fn record(&mut self, u: &ScalarField3) {
        self.sup_norms.push(u.max_abs());
        self.grad_sups.push(euclidean_grad_sup(u));
    }

    /// Appends a continuation run, skipping its duplicated initial entry.
    pub fn extend(&mut self, next: Diagnostics) {
        if self.sup_norms.is_empty() {
            *self = next;
            return;
        }
        self.sup_norms.extend(next.sup_norms.into_iter().skip(1));
        self.grad_sups.extend(next.grad_sups.into_iter().skip(1));
        self.elapsed += next.elapsed;
        for w in next.warnings {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }

    pub fn steps(&self) -> usize {
        self.sup_norms.len().saturating_sub(1)
    }
}

fn euclidean_grad_sup(u: &ScalarField3) -> f64 {
    let grid = u.grid();
    let (nx, ny, nt) = (grid.nx(), grid.ny(), grid.ntheta());
    let (sx, sy, st) = (0.5 / grid.dx(), 0.5 / grid.dy(), 0.5 / grid.dtheta());
    let vals = u.values();
    let plane = nx * ny;
    let mut sup: f64 = 0.0;
    for k in 0..nt {
        let (kp, km) = ((k + 1) % nt, (k + nt - 1) % nt);
        for j in 0..ny {
            let (jp, jm) = ((j + 1).min(ny - 1), j.saturating_sub(1));
            for i in 0..nx {
                let (ip, im) = ((i + 1).min(nx - 1), i.saturating_sub(1));
                let row = |jj: usize, kk: usize, ii: usize| vals[kk * plane + jj * nx + ii];
                let gx = (row(j, k, ip) - row(j, k, im)) * sx;
                let gy = (row(jp, k, i) - row(jm, k, i)) * sy;
                let gt = (row(j, kp, i) - row(j, km, i)) * st;
                sup = sup.max((gx * gx + gy * gy + gt * gt).sqrt());
            }
        }
    }
    sup
}

/// Runs `params.steps` steps of [`step`].
pub fn evolve(
    u0: &ScalarField3,
    params: &FlowParams,
    region: &Region3,
) -> Result<(ScalarField3, Diagnostics)> {
    params.validate()?;
    let started = Instant::now();
    let mut diag = Diagnostics::start(u0, params);
    for w in &diag.warnings {
        warn!("{w}");
    }
    let mut u = u0.clone();
    for s in 0..params.steps {
        u = mcf_step_indexed(&u, params, region, s + 1)?;
        diag.record(&u);
    }
    diag.elapsed = started.elapsed();
    Ok((u, diag))
}

/// Horizontal mean curvature `div₀(∇₀u / |∇₀u|)` with the gradient norm
/// regularized by `τ`.
pub fn horizontal_mean_curvature(u: &ScalarField3, tau: f64) -> Result<ScalarField3> {
    check_tau(tau)?;
    let normal = |frame: Frame| {
        ScalarField3::from_stencil(u, true, |p| {
            let d1 = p.frame(Frame::X1, Scheme::Central);
            let d2 = p.frame(Frame::X2, Scheme::Central);
            let g = (d1 * d1 + d2 * d2 + tau).sqrt();
            match frame {
                Frame::X1 => d1 / g,
                _ => d2 / g,
            }
        })
    };
    let n1 = normal(Frame::X1);
    let n2 = normal(Frame::X2);
    let grid = u.grid();
    Ok(ScalarField3::from_index_fn(grid, |i, j, k| {
        n1.probe(i, j, k).frame(Frame::X1, Scheme::Central)
            + n2.probe(i, j, k).frame(Frame::X2, Scheme::Central)
    }))
}
