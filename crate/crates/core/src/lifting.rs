//! Lifting of a grayscale image to R²×S¹ and projection back to the plane.
//!
//! The level-line orientation `θ̄(x, y) ∈ [0, π)` of the smoothed image is
//! turned into a level-set function `u₀` whose ridge along θ sits at `θ̄`,
//! weighted by the local gradient magnitude. The gray values are extended
//! constantly along θ into `v₀`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField3};

/// Grayscale image with values in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::config(format!(
                "image must be at least 3x3, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::config(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Contract(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from `f(i, j)`, clamping to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|j| (0..width).map(move |i| (i, j)))
            .map(|(i, j)| clamp_unit(f(i, j)))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, c: f64) -> Result<Self> {
        Self::new(width, height, vec![c; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    #[inline]
    fn get_clamped(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.width as isize - 1) as usize;
        let j = j.clamp(0, self.height as isize - 1) as usize;
        self.get(i, j)
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<f64>) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: pixels.into_iter().map(clamp_unit).collect(),
        }
    }
}

/// Corrupted-pixel flags; `true` marks a pixel whose value is unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != width * height {
            return Err(Error::config(format!(
                "{width}x{height} mask needs {} flags, got {}",
                width * height,
                flags.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            flags,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let flags = (0..height)
            .flat_map(|j| (0..width).map(move |i| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Mask {
            width,
            height,
            flags,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    #[inline]
    pub fn is_corrupted(&self, i: usize, j: usize) -> bool {
        self.flags[j * self.width + i]
    }

    pub fn corrupted_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn matches(&self, img: &Image) -> bool {
        self.width == img.width && self.height == img.height
    }
}

/// Per-pixel level-line orientation and its reliability.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField {
    pub width: usize,
    pub height: usize,
    /// Orientation in `[0, π)`, row-major.
    pub theta_bar: Vec<f64>,
    /// Gradient magnitude of the smoothed image; zero where undefined.
    pub confidence: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Argmax,
    WeightedMean,
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Normalized 1D Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Separable Gaussian blur with replicate-edge boundary.
///
/// Each pass is accumulated as `p + Σ w (q − p)`, so constant regions come
/// out bit-identical.
pub fn gaussian_smooth(img: &Image, sigma_s: f64) -> Result<Image> {
    if !(sigma_s > 0.0 && sigma_s.is_finite()) {
        return Err(Error::config(format!(
            "smoothing scale must be positive, got {sigma_s}"
        )));
    }
    let taps = gaussian_taps(sigma_s);
    let r = (taps.len() / 2) as isize;
    let (w, h) = (img.width, img.height);
    let pass = |src: &Image, horizontal: bool| -> Vec<f64> {
        let mut out = Vec::with_capacity(w * h);
        for j in 0..h {
            for i in 0..w {
                let center = src.get(i, j);
                let mut acc = 0.0;
                for (t, &wt) in taps.iter().enumerate() {
                    let d = t as isize - r;
                    let q = if horizontal {
                        src.get_clamped(i as isize + d, j as isize)
                    } else {
                        src.get_clamped(i as isize, j as isize + d)
                    };
                    acc += wt * (q - center);
                }
                out.push(center + acc);
            }
        }
        out
    };
    let rows = img.with_pixels(pass(img, true));
    Ok(img.with_pixels(pass(&rows, false)))
}

/// Level-line orientation of the smoothed image: perpendicular to the
/// central-difference gradient, reduced modulo π.
pub fn estimate_orientation(img: &Image, sigma_s: f64) -> Result<OrientationField> {
    let smooth = gaussian_smooth(img, sigma_s)?;
    let (w, h) = (img.width, img.height);
    let mut theta_bar = Vec::with_capacity(w * h);
    let mut confidence = Vec::with_capacity(w * h);
    for j in 0..h as isize {
        for i in 0..w as isize {
            let gx = (smooth.get_clamped(i + 1, j) - smooth.get_clamped(i - 1, j)) / 2.0;
            let gy = (smooth.get_clamped(i, j + 1) - smooth.get_clamped(i, j - 1)) / 2.0;
            let c = gx.hypot(gy);
            let t = if c == 0.0 {
                0.0
            } else {
                let t = (gy.atan2(gx) + PI / 2.0).rem_euclid(PI);
                if t >= PI {
                    0.0
                } else {
                    t
                }
            };
            theta_bar.push(t);
            confidence.push(c);
        }
    }
    Ok(OrientationField {
        width: w,
        height: h,
        theta_bar,
        confidence,
    })
}

/// Distance between two orientations on the period-π circle.
#[inline]
pub fn orientation_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn check_plane(grid: &GridSpec, width: usize, height: usize) -> Result<()> {
    if grid.nx() != width || grid.ny() != height {
        return Err(Error::config(format!(
            "grid plane {}x{} does not match image {width}x{height}",
            grid.nx(),
            grid.ny()
        )));
    }
    Ok(())
}

/// `u₀(i, j, k) = confidence · exp(−d(θ_k, θ̄)² / 2σ_θ²)`.
pub fn lift_surface(
    orient: &OrientationField,
    grid: &GridSpec,
    sigma_theta: f64,
) -> Result<ScalarField3> {
    check_plane(grid, orient.width, orient.height)?;
    if !(sigma_theta > 0.0 && sigma_theta.is_finite()) {
        return Err(Error::config(format!(
            "angular width must be positive, got {sigma_theta}"
        )));
    }
    let denom = 2.0 * sigma_theta * sigma_theta;
    Ok(ScalarField3::from_index_fn(grid, |i, j, k| {
        let p = j * orient.width + i;
        let c = orient.confidence[p];
        if c == 0.0 {
            return 0.0;
        }
        let d = orientation_distance(grid.theta(k), orient.theta_bar[p]);
        c * (-d * d / denom).exp()
    }))
}

/// Constant extension of the gray values along θ.
pub fn lift_intensity(img: &Image, grid: &GridSpec) -> Result<ScalarField3> {
    check_plane(grid, img.width, img.height)?;
    Ok(ScalarField3::from_index_fn(grid, |i, j, _| img.get(i, j)))
}

/// Collapses `v` back to the image plane using `u` to select orientations.
pub fn project(v: &ScalarField3, u: &ScalarField3, method: Projection) -> Result<Image> {
    let grid = v.grid();
    if !grid.same_shape(u.grid()) {
        return Err(Error::config("projection fields live on different grids"));
    }
    let n = grid.ntheta();
    let pixels = (0..grid.ny())
        .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
        .map(|(i, j)| match method {
            Projection::Argmax => {
                let mut best = 0;
                for k in 1..n {
                    if u.get(i, j, k) > u.get(i, j, best) {
                        best = k;
                    }
                }
                v.get(i, j, best)
            }
            Projection::WeightedMean => {
                // mean taken relative to the k = 0 sample so that θ-constant
                // columns project exactly
                let base = v.get(i, j, 0);
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..n {
                    let w = u.get(i, j, k).max(0.0);
                    num += w * (v.get(i, j, k) - base);
                    den += w;
                }
                if den > 0.0 {
                    base + num / den
                } else {
                    let dev: f64 = (0..n).map(|k| v.get(i, j, k) - base).sum();
                    base + dev / n as f64
                }
            }
        })
        .map(clamp_unit)
        .collect();
    Image::new(grid.nx(), grid.ny(), pixels)
}

/// Fills unknown pixels by peeling inward from the known ones: each layer
/// takes the mean of its already-known 8-neighbours.
///
/// `values` and `known` are row-major planes of size `width × height`.
pub(crate) fn inward_fill(
    values: &mut [f64],
    known: &[bool],
    width: usize,
    height: usize,
) -> Result<()> {
    let mut known = known.to_vec();
    let mut pending: Vec<usize> = (0..width * height).filter(|&p| !known[p]).collect();
    while !pending.is_empty() {
        let layer: Vec<(usize, f64)> = pending
            .iter()
            .filter_map(|&p| {
                let (i, j) = ((p % width) as isize, (p / width) as isize);
                // deviations from the first known neighbour keep constant
                // neighbourhoods exact
                let mut base = None;
                let mut sum = 0.0;
                let mut count = 0usize;
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (ni, nj) = (i + di, j + dj);
                        if (di, dj) == (0, 0)
                            || ni < 0
                            || nj < 0
                            || ni >= width as isize
                            || nj >= height as isize
                        {
                            continue;
                        }
                        let q = nj as usize * width + ni as usize;
                        if known[q] {
                            let b = *base.get_or_insert(values[q]);
                            sum += values[q] - b;
                            count += 1;
                        }
                    }
                }
                base.map(|b| (p, b + sum / count as f64))
            })
            .collect();
        if layer.is_empty() {
            return Err(Error::config(
                "no known pixels to fill the corrupted region from",
            ));
        }
        for &(p, val) in &layer {
            values[p] = val;
            known[p] = true;
        }
        pending.retain(|&p| !known[p]);
    }
    Ok(())
}

/// Replaces corrupted pixels by the inward extension of the intact ones.
pub fn fill_corrupted(img: &Image, mask: &Mask) -> Result<Image> {
    if !mask.matches(img) {
        return Err(Error::config("mask and image dimensions differ"));
    }
    let mut values = img.pixels.clone();
    let known: Vec<bool> = mask.flags.iter().map(|&c| !c).collect();
    inward_fill(&mut values, &known, img.width, img.height)?;
    Ok(img.with_pixels(values))
}

/// Lifts an image with a corrupted region: orientation is estimated on the
/// inward-filled image, confidence is zeroed on corrupted pixels, and the
/// corrupted columns of `u₀` are refilled slice by slice from the intact
/// neighbourhood. Returns `(u₀, v₀)`.
pub fn lift_masked(
    img: &Image,
    mask: &Mask,
    grid: &GridSpec,
    sigma_s: f64,
    sigma_theta: f64,
) -> Result<(ScalarField3, ScalarField3)> {
    let filled = fill_corrupted(img, mask)?;
    let mut orient = estimate_orientation(&filled, sigma_s)?;
    for (c, &bad) in orient.confidence.iter_mut().zip(&mask.flags) {
        if bad {
            *c = 0.0;
        }
    }
    let mut u0 = lift_surface(&orient, grid, sigma_theta)?;
    let plane = grid.pixels();
    let known: Vec<bool> = mask.flags.iter().map(|&c| !c).collect();
    for slice in u0.values_mut().chunks_mut(plane) {
        inward_fill(slice, &known, grid.nx(), grid.ny())?;
    }
    let v0 = lift_intensity(&filled, grid)?;
    Ok((u0, v0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn image_validates_range_and_size() {
        assert!(Image::new(2, 3, vec![0.0; 6]).is_err());
        assert!(Image::new(3, 3, vec![0.0; 8]).is_err());
        assert!(Image::new(3, 3, vec![1.5; 9]).is_err());
        assert!(Image::new(3, 3, vec![0.5; 9]).is_ok());
    }

    #[test]
    fn smoothing_preserves_constants_exactly() {
        for c in [0.0, 0.1, 0.3, 0.7, 1.0] {
            let img = Image::constant(11, 7, c).unwrap();
            assert_eq!(gaussian_smooth(&img, 1.7).unwrap(), img);
        }
    }

    #[test]
    fn smoothing_a_dot_gives_kernel_centre() {
        let n = 21;
        let img = Image::from_fn(n, n, |i, j| if (i, j) == (10, 10) { 1.0 } else { 0.0 }).unwrap();
        let out = gaussian_smooth(&img, 1.0).unwrap();
        // direct 2D kernel sum over the same support (radius 3)
        let r = 3i32;
        let mut sum = 0.0;
        for a in -r..=r {
            for b in -r..=r {
                sum += (-((a * a + b * b) as f64) / 2.0).exp();
            }
        }
        assert_abs_diff_eq!(out.get(10, 10), 1.0 / sum, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_stays_within_input_range() {
        let img = Image::from_fn(15, 12, |i, j| {
            0.2 + 0.6 * (((i * 7 + j * 3) % 5) as f64) / 4.0
        })
        .unwrap();
        let out = gaussian_smooth(&img, 2.0).unwrap();
        let (lo, hi) = (0.2, 0.8);
        assert!(out
            .pixels()
            .iter()
            .all(|&p| p >= lo - 1e-15 && p <= hi + 1e-15));
    }

    #[test]
    fn orientation_of_ramps() {
        let (w, h) = (16, 16);
        let horiz = Image::from_fn(w, h, |_, j| j as f64 / h as f64).unwrap();
        let o = estimate_orientation(&horiz, 1.0).unwrap();
        for j in 2..h - 2 {
            for i in 2..w - 2 {
                let p = j * w + i;
                assert!(orientation_distance(o.theta_bar[p], 0.0) < 1e-9);
                assert!(o.confidence[p] > 0.0);
            }
        }
        let vert = Image::from_fn(w, h, |i, _| i as f64 / w as f64).unwrap();
        let o = estimate_orientation(&vert, 1.0).unwrap();
        for j in 2..h - 2 {
            for i in 2..w - 2 {
                assert_abs_diff_eq!(o.theta_bar[j * w + i], PI / 2.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn orientation_of_circles_is_tangent() {
        let n = 41;
        let c = 20.0;
        let img = Image::from_fn(n, n, |i, j| {
            let (x, y) = (i as f64 - c, j as f64 - c);
            (x * x + y * y) / 900.0
        })
        .unwrap();
        let o = estimate_orientation(&img, 1.0).unwrap();
        let east = 20 * n + 30;
        assert!((o.theta_bar[east] - PI / 2.0).abs() < 0.05);
    }

    #[test]
    fn flat_image_has_zero_confidence() {
        let img = Image::constant(8, 8, 0.4).unwrap();
        let o = estimate_orientation(&img, 1.5).unwrap();
        assert!(o.confidence.iter().all(|&c| c == 0.0));
        assert!(o.theta_bar.iter().all(|&t| t == 0.0));
    }

    fn single_pixel_orientation(theta_bar: f64) -> OrientationField {
        OrientationField {
            width: 3,
            height: 3,
            theta_bar: vec![theta_bar; 9],
            confidence: vec![1.0; 9],
        }
    }

    #[test]
    fn lifted_surface_peaks_at_orientation() {
        let grid = GridSpec::for_image(3, 3, 16).unwrap();
        let k0 = 5;
        let o = single_pixel_orientation(grid.theta(k0));
        let u = lift_surface(&o, &grid, 1.5 * grid.dtheta()).unwrap();
        let best = (0..16)
            .max_by(|&a, &b| u.get(1, 1, a).total_cmp(&u.get(1, 1, b)))
            .unwrap();
        assert_eq!(best, k0);
        assert!(u.min() >= 0.0 && u.max() <= 1.0);

        let mid = single_pixel_orientation(grid.theta(k0) + 0.5 * grid.dtheta());
        let u = lift_surface(&mid, &grid, 1.5 * grid.dtheta()).unwrap();
        assert_abs_diff_eq!(u.get(1, 1, k0), u.get(1, 1, k0 + 1), epsilon = 1e-12);

        // a peak near 0 wraps to the last orientations
        let wrap = single_pixel_orientation(0.0);
        let u = lift_surface(&wrap, &grid, 1.5 * grid.dtheta()).unwrap();
        assert_abs_diff_eq!(u.get(1, 1, 1), u.get(1, 1, 15), epsilon = 1e-12);
    }

    #[test]
    fn zero_confidence_lifts_to_zero() {
        let grid = GridSpec::for_image(3, 3, 8).unwrap();
        let mut o = single_pixel_orientation(1.0);
        o.confidence = vec![0.0; 9];
        let u = lift_surface(&o, &grid, 0.3).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn lift_checks_dimensions() {
        let grid = GridSpec::for_image(4, 3, 8).unwrap();
        let img = Image::constant(3, 3, 0.5).unwrap();
        assert!(lift_intensity(&img, &grid).is_err());
        assert!(lift_surface(&single_pixel_orientation(0.0), &grid, 0.3).is_err());
    }

    #[test]
    fn projection_round_trip_is_exact() {
        let img = Image::from_fn(6, 5, |i, j| ((i + 2 * j) % 3) as f64 * 0.37).unwrap();
        let grid = GridSpec::for_image(6, 5, 8).unwrap();
        let v = lift_intensity(&img, &grid).unwrap();
        let u = ScalarField3::from_fn(&grid, |x, y, t| (x + y * t).sin());
        for m in [Projection::Argmax, Projection::WeightedMean] {
            assert_eq!(project(&v, &u, m).unwrap(), img);
        }
    }

    #[test]
    fn argmax_and_fallback_projection() {
        let grid = GridSpec::for_image(3, 3, 4).unwrap();
        let v = ScalarField3::from_index_fn(&grid, |_, _, k| 0.1 * k as f64);
        let u = ScalarField3::from_index_fn(&grid, |_, _, k| if k == 2 { 1.0 } else { 0.0 });
        let a = project(&v, &u, Projection::Argmax).unwrap();
        assert_abs_diff_eq!(a.get(1, 1), 0.2, epsilon = 1e-15);
        let zero = ScalarField3::constant(&grid, -1.0);
        let m = project(&v, &zero, Projection::WeightedMean).unwrap();
        assert_abs_diff_eq!(m.get(1, 1), 0.15, epsilon = 1e-15);
        // ties go to the lowest k
        let flat = ScalarField3::constant(&grid, 1.0);
        assert_eq!(
            project(&v, &flat, Projection::Argmax).unwrap().get(0, 0),
            0.0
        );
    }

    #[test]
    fn inward_fill_of_hole_in_constant() {
        let img = Image::from_fn(9, 9, |i, j| {
            if (3..6).contains(&i) && (3..6).contains(&j) {
                0.0
            } else {
                0.6
            }
        })
        .unwrap();
        let mask = Mask::from_fn(9, 9, |i, j| (3..6).contains(&i) && (3..6).contains(&j));
        let f = fill_corrupted(&img, &mask).unwrap();
        assert!(f.pixels().iter().all(|&p| p == 0.6));
        let all = Mask::from_fn(9, 9, |_, _| true);
        assert!(fill_corrupted(&img, &all).is_err());
    }
}
