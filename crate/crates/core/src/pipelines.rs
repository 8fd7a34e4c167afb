//! End-to-end inpainting and enhancement, the heat-equation baseline, and
//! the PSNR quality measure.

use std::time::{Duration, Instant};

use log::{info, warn};

use crate::error::{Error, Result};
use crate::flow::{horizontal_mean_curvature, Boundary, Diagnostics, FlowParams, Region3};
use crate::grid::{GridSpec, ScalarField3};
use crate::lb_flow::{concentrate, coupled_evolve};
use crate::lifting::{
    estimate_orientation, fill_corrupted, lift_intensity, lift_masked, lift_surface, project,
    Image, Mask, Projection,
};

pub const DEFAULT_INPAINT_STEPS: usize = 500;
pub const DEFAULT_ENHANCE_STEPS: usize = 100;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 200.0;

/// Periodic sharpening of the lifted surface during a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Concentration {
    pub every_n: usize,
    pub power: f64,
}

impl Default for Concentration {
    fn default() -> Self {
        Concentration {
            every_n: 25,
            power: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub ntheta: usize,
    /// Gaussian scale of the orientation estimate, in pixels.
    pub sigma_s: f64,
    /// Angular width of the lifted surface; `None` means `1.5·dθ`.
    pub sigma_theta: Option<f64>,
    /// Flow parameters. `steps` and `boundary` are set by each pipeline.
    pub flow: FlowParams,
    /// Step count; `None` uses the pipeline's default.
    pub steps: Option<usize>,
    pub concentration: Option<Concentration>,
    pub projection: Projection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ntheta: 32,
            sigma_s: 1.5,
            sigma_theta: None,
            flow: FlowParams::default(),
            steps: None,
            concentration: Some(Concentration::default()),
            projection: Projection::WeightedMean,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ntheta < 3 {
            return Err(Error::config(format!(
                "ntheta must be >= 3, got {}",
                self.ntheta
            )));
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return Err(Error::config(format!(
                "sigma_smooth must be positive, got {}",
                self.sigma_s
            )));
        }
        if let Some(s) = self.sigma_theta {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!(
                    "sigma_theta must be positive, got {s}"
                )));
            }
        }
        if let Some(c) = self.concentration {
            if c.every_n == 0 {
                return Err(Error::config("concentration_every must be >= 1"));
            }
            if !(c.power >= 1.0 && c.power.is_finite()) {
                return Err(Error::config(format!(
                    "concentration_power must be >= 1, got {}",
                    c.power
                )));
            }
        }
        self.flow.validate()
    }

    pub fn grid_for(&self, img: &Image) -> Result<GridSpec> {
        GridSpec::for_image(img.width(), img.height(), self.ntheta)
    }

    pub fn sigma_theta_for(&self, grid: &GridSpec) -> f64 {
        self.sigma_theta.unwrap_or(1.5 * grid.dtheta())
    }

    fn flow_params(&self, boundary: Boundary, default_steps: usize) -> FlowParams {
        FlowParams {
            steps: self.steps.unwrap_or(default_steps),
            boundary,
            ..self.flow.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    /// PSNR against a ground truth, set by [`RunReport::score`].
    pub psnr_region: Option<f64>,
    pub steps: usize,
    pub wall_time: Duration,
    /// Sup norm of the level-set function, initial state first.
    pub sup_norms: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn from_diagnostics(diag: Diagnostics, wall_time: Duration) -> Self {
        RunReport {
            psnr_region: None,
            steps: diag.steps(),
            wall_time,
            sup_norms: diag.sup_norms,
            warnings: diag.warnings,
        }
    }

    fn unchanged(warning: impl Into<String>) -> Self {
        RunReport {
            warnings: vec![warning.into()],
            ..Default::default()
        }
    }

    /// Records the PSNR of `output` against `truth` over `region` (all
    /// pixels when `None`).
    pub fn score(&mut self, output: &Image, truth: &Image, region: Option<&Mask>) -> Result<f64> {
        let p = psnr(output, truth, region)?;
        self.psnr_region = Some(p);
        Ok(p)
    }

    fn merge(&mut self, next: RunReport) {
        self.steps += next.steps;
        self.wall_time += next.wall_time;
        self.sup_norms.extend(next.sup_norms);
        for w in next.warnings {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }
}

/// Couples the two flows for `params.steps` steps, sharpening `u` after every
/// `every_n` steps when concentration is on.
fn run_flows(
    u0: ScalarField3,
    v0: ScalarField3,
    params: &FlowParams,
    region: &Region3,
    concentration: Option<Concentration>,
) -> Result<(ScalarField3, ScalarField3, Diagnostics)> {
    let total = params.steps;
    let chunk = concentration.map_or(total.max(1), |c| c.every_n);
    let (mut u, mut v) = (u0, v0);
    let mut diag = Diagnostics::default();
    let mut done = 0;
    loop {
        let n = chunk.min(total - done);
        let part = FlowParams {
            steps: n,
            ..params.clone()
        };
        let (nu, nv, d) = coupled_evolve(&u, &v, &part, region)?;
        diag.extend(d);
        u = nu;
        v = nv;
        done += n;
        if done >= total {
            break;
        }
        if let Some(c) = concentration {
            // the flows keep u within its initial range up to rounding
            u = concentrate(&u.map(|x| x.max(0.0)), c.power)?;
        }
    }
    Ok((u, v, diag))
}

fn check_mask(img: &Image, mask: &Mask) -> Result<()> {
    if !mask.matches(img) {
        return Err(Error::config(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    if mask.corrupted_count() == mask.flags().len() {
        return Err(Error::config(
            "every pixel is masked; nothing to inpaint from",
        ));
    }
    Ok(())
}

const NOTHING_MASKED: &str = "mask marks no corrupted pixels; input returned unchanged";

/// Completes the masked region: the intact pixels are Dirichlet data for the
/// coupled flows on the lifted image.
pub fn inpaint(img: &Image, mask: &Mask, cfg: &PipelineConfig) -> Result<(Image, RunReport)> {
    cfg.validate()?;
    check_mask(img, mask)?;
    if mask.corrupted_count() == 0 {
        warn!("{NOTHING_MASKED}");
        return Ok((img.clone(), RunReport::unchanged(NOTHING_MASKED)));
    }
    let started = Instant::now();
    let grid = cfg.grid_for(img)?;
    let (u0, v0) = lift_masked(img, mask, &grid, cfg.sigma_s, cfg.sigma_theta_for(&grid))?;
    let region = Region3::from_pixels(&grid, mask.flags())?;
    let params = cfg.flow_params(Boundary::DirichletRegion, DEFAULT_INPAINT_STEPS);
    info!(
        "inpainting {} pixels with {} steps of dt {}",
        mask.corrupted_count(),
        params.steps,
        params.resolve_dt(&grid)
    );
    let (u, v, diag) = run_flows(u0, v0, &params, &region, cfg.concentration)?;
    let projected = project(&v, &u, cfg.projection)?;
    let pixels = img
        .pixels()
        .iter()
        .zip(projected.pixels())
        .zip(mask.flags())
        .map(|((&orig, &new), &bad)| if bad { new } else { orig })
        .collect();
    let out = Image::new(img.width(), img.height(), pixels)?;
    Ok((out, RunReport::from_diagnostics(diag, started.elapsed())))
}

/// Smooths along level lines by running the coupled flows on the whole
/// lifted image.
pub fn enhance(img: &Image, cfg: &PipelineConfig) -> Result<(Image, RunReport)> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = cfg.grid_for(img)?;
    let orient = estimate_orientation(img, cfg.sigma_s)?;
    let u0 = lift_surface(&orient, &grid, cfg.sigma_theta_for(&grid))?;
    let v0 = lift_intensity(img, &grid)?;
    let params = cfg.flow_params(Boundary::FullDomain, DEFAULT_ENHANCE_STEPS);
    info!(
        "enhancing with {} steps of dt {}",
        params.steps,
        params.resolve_dt(&grid)
    );
    let (u, v, diag) = run_flows(u0, v0, &params, &Region3::all(&grid), cfg.concentration)?;
    let out = project(&v, &u, cfg.projection)?;
    Ok((out, RunReport::from_diagnostics(diag, started.elapsed())))
}

/// [`inpaint`] followed by [`enhance`] of its output.
pub fn inpaint_then_enhance(
    img: &Image,
    mask: &Mask,
    cfg: &PipelineConfig,
) -> Result<(Image, RunReport)> {
    let (filled, mut report) = inpaint(img, mask, cfg)?;
    let (out, second) = enhance(&filled, cfg)?;
    report.merge(second);
    Ok((out, report))
}

/// Explicit 2D heat equation on the masked pixels with the intact ones held
/// fixed, started from the inward fill; `dt = dx²/8`.
pub fn heat_baseline(img: &Image, mask: &Mask, steps: usize) -> Result<Image> {
    check_mask(img, mask)?;
    if mask.corrupted_count() == 0 {
        warn!("{NOTHING_MASKED}");
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let dt = 1.0 / 8.0;
    let active: Vec<usize> = (0..w * h).filter(|&p| mask.flags()[p]).collect();
    let mut cur = fill_corrupted(img, mask)?.pixels().to_vec();
    let mut next = cur.clone();
    for _ in 0..steps {
        for &p in &active {
            let (i, j) = (p % w, p / w);
            let c = cur[p];
            // replicated edges contribute a zero difference
            let left = cur[j * w + i.saturating_sub(1)];
            let right = cur[j * w + (i + 1).min(w - 1)];
            let up = cur[j.saturating_sub(1) * w + i];
            let down = cur[(j + 1).min(h - 1) * w + i];
            let lap = (left - c) + (right - c) + (up - c) + (down - c);
            next[p] = c + dt * lap;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Image::new(w, h, cur.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Horizontal mean curvature of the lifted surface, read at each pixel's
/// strongest orientation and mapped to `[0, 1]` with `0.5` for zero
/// curvature, scaled by the largest magnitude.
pub fn curvature_map(img: &Image, cfg: &PipelineConfig) -> Result<Image> {
    cfg.validate()?;
    let grid = cfg.grid_for(img)?;
    let orient = estimate_orientation(img, cfg.sigma_s)?;
    let u = lift_surface(&orient, &grid, cfg.sigma_theta_for(&grid))?;
    let kappa = horizontal_mean_curvature(&u, cfg.flow.tau)?;
    let values: Vec<f64> = (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .map(|(i, j)| {
            let mut best = 0;
            for k in 1..grid.ntheta() {
                if u.get(i, j, k) > u.get(i, j, best) {
                    best = k;
                }
            }
            kappa.get(i, j, best)
        })
        .collect();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pixels = values
        .into_iter()
        .map(|v| {
            if scale > 0.0 {
                0.5 + 0.5 * v / scale
            } else {
                0.5
            }
        })
        .collect();
    Image::new(img.width(), img.height(), pixels)
}

/// `10·log10(1 / MSE)` over the pixels flagged in `region` (all pixels when
/// `None`), capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image, region: Option<&Mask>) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::config(format!(
            "cannot compare {}x{} with {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if let Some(m) = region {
        if !m.matches(a) {
            return Err(Error::config("PSNR region does not match the image size"));
        }
    }
    let inside = |p: usize| region.is_none_or(|m| m.flags()[p]);
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, (x, y)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if inside(p) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::config("PSNR region is empty"));
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}
