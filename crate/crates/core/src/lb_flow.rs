//! Laplace–Beltrami evolution of the lifted intensity and the concentration
//! operator.

use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{
    euler_update, mcf_step_indexed, stability_warning, step_window, Diagnostics, FlowParams,
    Region3,
};
use crate::grid::ScalarField3;
use crate::kernel::{contraction, contraction_needs, FirstDiffs, Needs};

/// Coefficients only need the central gradient of `u`.
const COEFF_NEEDS: Needs = Needs {
    c3: false,
    f1: false,
    f3: false,
};

fn check_pair(v: &ScalarField3, u: &ScalarField3) -> Result<()> {
    if v.grid().same_shape(u.grid()) {
        Ok(())
    } else {
        Err(Error::config(
            "intensity and level-set fields live on different grids",
        ))
    }
}

/// `Σ_{i,j ∈ {1,2}} A⁰_ij(∇₀u) X_i X_j v` with `A⁰ = δ − p pᵀ / (|p|² + τ)`.
pub fn lb_rhs(v: &ScalarField3, u: &ScalarField3, params: &FlowParams) -> Result<ScalarField3> {
    check_pair(v, u)?;
    params.validate()?;
    let tau = params.tau;
    let du = FirstDiffs::new(u, COEFF_NEEDS, params.parallel);
    let dv = FirstDiffs::new(v, contraction_needs(0.0), params.parallel);
    let grid = v.grid();
    let eval = |idx: usize| {
        let (i, j, k) = grid.coords(idx);
        contraction(&du, &dv, i, j, k, 0.0, tau, 0.0)
    };
    let values = if params.parallel {
        (0..grid.len()).into_par_iter().map(eval).collect()
    } else {
        (0..grid.len()).map(eval).collect()
    };
    ScalarField3::from_values(grid, values)
}

fn lb_step_indexed(
    v: &ScalarField3,
    u: &ScalarField3,
    params: &FlowParams,
    region: &Region3,
    step_index: usize,
) -> Result<ScalarField3> {
    let grid = v.grid();
    let dt = params.resolve_dt(grid);
    let tau = params.tau;
    let window = step_window(grid, params, region);
    let du = FirstDiffs::within(u, COEFF_NEEDS, params.parallel, window);
    let dv = FirstDiffs::within(v, contraction_needs(0.0), params.parallel, window);
    euler_update(v, dt, params, region, step_index, |idx| {
        let (i, j, k) = grid.coords(idx);
        contraction(&du, &dv, i, j, k, 0.0, tau, 0.0)
    })
}

/// One explicit Euler step of the Laplace–Beltrami flow of `v` driven by `u`.
pub fn lb_step(
    v: &ScalarField3,
    u: &ScalarField3,
    params: &FlowParams,
    region: &Region3,
) -> Result<ScalarField3> {
    check_pair(v, u)?;
    params.validate()?;
    if let Some(w) = stability_warning(params, v.grid()) {
        warn!("{w}");
    }
    lb_step_indexed(v, u, params, region, 0)
}

/// Evolves `u` by curvature flow and `v` by the Laplace–Beltrami flow in
/// lockstep: each `v` step uses the coefficients of `u` before that step.
/// Diagnostics track `u`.
pub fn coupled_evolve(
    u0: &ScalarField3,
    v0: &ScalarField3,
    params: &FlowParams,
    region: &Region3,
) -> Result<(ScalarField3, ScalarField3, Diagnostics)> {
    check_pair(v0, u0)?;
    params.validate()?;
    let started = Instant::now();
    let mut diag = Diagnostics::start(u0, params);
    for w in &diag.warnings {
        warn!("{w}");
    }
    let mut u = u0.clone();
    let mut v = v0.clone();
    let single = FlowParams {
        steps: 1,
        ..params.clone()
    };
    for s in 0..params.steps {
        let next_v = lb_step_indexed(&v, &u, &single, region, s + 1)?;
        let next_u = mcf_step_indexed(&u, &single, region, s + 1)?;
        u = next_u;
        v = next_v;
        diag.record(&u);
    }
    diag.elapsed = started.elapsed();
    Ok((u, v, diag))
}

/// Sharpens every θ-profile toward its maximum:
/// `u ↦ m (u / m)^power` with `m` the per-pixel maximum.
pub fn concentrate(u: &ScalarField3, power: f64) -> Result<ScalarField3> {
    if !(power >= 1.0 && power.is_finite()) {
        return Err(Error::config(format!(
            "concentration power must be >= 1, got {power}"
        )));
    }
    if let Some(bad) = u.values().iter().find(|&&x| x < 0.0) {
        return Err(Error::Contract(format!(
            "concentration needs a non-negative field, found {bad}"
        )));
    }
    let grid = u.grid();
    let mut out = u.clone();
    if power == 1.0 {
        return Ok(out);
    }
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let m = (0..grid.ntheta())
                .map(|k| u.get(i, j, k))
                .fold(0.0, f64::max);
            if m > 0.0 {
                for k in 0..grid.ntheta() {
                    let x = u.get(i, j, k);
                    // the maxima are kept bit-exact
                    let y = if x == m { m } else { m * (x / m).powf(power) };
                    out.set(i, j, k, y);
                }
            }
        }
    }
    Ok(out)
}
