//! Whole-field evaluation of the flow stencils.
//!
//! First frame differences are computed once per sweep on the grid padded by
//! one ghost cell in x and y, then composed into second differences. Each
//! expression follows the same operation order as the node-by-node
//! [`Probe`](crate::grid::Probe) stencils, so both paths agree bit for bit.

use rayon::prelude::*;

use crate::flow::MixedUpwind;
use crate::grid::{Frame, GridSpec, ScalarField3};

/// Which difference tables a sweep needs.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Needs {
    pub c3: bool,
    pub f1: bool,
    pub f3: bool,
}

/// Inclusive pixel rectangle on which the tables are filled; entries
/// outside it are left at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub i0: isize,
    pub i1: isize,
    pub j0: isize,
    pub j1: isize,
}

impl Window {
    /// The padded plane, ghost ring included.
    pub fn full(grid: &GridSpec) -> Self {
        Window {
            i0: -1,
            i1: grid.nx() as isize,
            j0: -1,
            j1: grid.ny() as isize,
        }
    }

    /// Every stencil read made from nodes of the pixel box `[i0, i1] × [j0, j1]`.
    pub fn around(grid: &GridSpec, i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        let full = Self::full(grid);
        Window {
            i0: (i0 as isize - 1).max(full.i0),
            i1: (i1 as isize + 1).min(full.i1),
            j0: (j0 as isize - 1).max(full.j0),
            j1: (j1 as isize + 1).min(full.j1),
        }
    }
}

/// Central (`c*`) and forward (`f*`) frame differences of one field on the
/// padded grid. Tables that were not requested are empty.
pub(crate) struct FirstDiffs<'a> {
    u: &'a ScalarField3,
    window: Window,
    nx: usize,
    ny: usize,
    nt: usize,
    px: usize,
    plane: usize,
    c1: Vec<f64>,
    c2: Vec<f64>,
    c3: Vec<f64>,
    f1: Vec<f64>,
    f3: Vec<f64>,
}

impl<'a> FirstDiffs<'a> {
    pub fn new(u: &'a ScalarField3, needs: Needs, parallel: bool) -> Self {
        Self::within(u, needs, parallel, Window::full(u.grid()))
    }

    pub fn within(u: &'a ScalarField3, needs: Needs, parallel: bool, window: Window) -> Self {
        let g = u.grid();
        let (nx, ny, nt) = (g.nx(), g.ny(), g.ntheta());
        let px = nx + 2;
        let plane = px * (ny + 2);
        let mut d = FirstDiffs {
            u,
            window,
            nx,
            ny,
            nt,
            px,
            plane,
            c1: Vec::new(),
            c2: Vec::new(),
            c3: Vec::new(),
            f1: Vec::new(),
            f3: Vec::new(),
        };
        d.c1 = d.table(parallel, |s, i, j, k| {
            let (c, sn) = s.trig(k);
            c * s.dx_c(i, j, k) + sn * s.dy_c(i, j, k)
        });
        d.c2 = d.table(parallel, |s, i, j, k| s.dt_c(i, j, k));
        if needs.c3 {
            d.c3 = d.table(parallel, |s, i, j, k| {
                let (c, sn) = s.trig(k);
                -sn * s.dx_c(i, j, k) + c * s.dy_c(i, j, k)
            });
        }
        if needs.f1 {
            d.f1 = d.table(parallel, |s, i, j, k| {
                let (c, sn) = s.trig(k);
                c * s.dx_f(i, j, k) + sn * s.dy_f(i, j, k)
            });
        }
        if needs.f3 {
            d.f3 = d.table(parallel, |s, i, j, k| {
                let (c, sn) = s.trig(k);
                -sn * s.dx_f(i, j, k) + c * s.dy_f(i, j, k)
            });
        }
        d
    }

    fn table<F>(&self, parallel: bool, f: F) -> Vec<f64>
    where
        F: Fn(&Self, isize, isize, usize) -> f64 + Sync,
    {
        let mut out = vec![0.0; self.plane * self.nt];
        let w = self.window;
        let fill = |(k, slice): (usize, &mut [f64])| {
            for j in w.j0..=w.j1 {
                let row = &mut slice[(j + 1) as usize * self.px..][..self.px];
                for i in w.i0..=w.i1 {
                    row[(i + 1) as usize] = f(self, i, j, k);
                }
            }
        };
        if parallel {
            out.par_chunks_mut(self.plane).enumerate().for_each(fill);
        } else {
            out.chunks_mut(self.plane).enumerate().for_each(fill);
        }
        out
    }

    #[inline]
    fn trig(&self, k: usize) -> (f64, f64) {
        self.u.grid().cos_sin(k)
    }

    #[inline]
    fn wrap(&self, k: usize, dk: isize) -> (usize, bool) {
        let kk = k as isize + dk;
        let n = self.nt as isize;
        if kk < 0 {
            ((kk + n) as usize, true)
        } else if kk >= n {
            ((kk - n) as usize, true)
        } else {
            (kk as usize, false)
        }
    }

    /// Field value with replicated spatial ghost cells.
    #[inline]
    pub fn u(&self, i: isize, j: isize, k: usize) -> f64 {
        let i = i.clamp(0, self.nx as isize - 1) as usize;
        let j = j.clamp(0, self.ny as isize - 1) as usize;
        self.u.values()[(k * self.ny + j) * self.nx + i]
    }

    #[inline]
    fn u_theta(&self, i: isize, j: isize, k: usize, dk: isize) -> f64 {
        self.u(i, j, self.wrap(k, dk).0)
    }

    #[inline]
    fn dx_c(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i + 1, j, k) - self.u(i - 1, j, k)) / (2.0 * self.u.grid().dx())
    }

    #[inline]
    fn dy_c(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i, j + 1, k) - self.u(i, j - 1, k)) / (2.0 * self.u.grid().dy())
    }

    #[inline]
    fn dt_c(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u_theta(i, j, k, 1) - self.u_theta(i, j, k, -1)) / (2.0 * self.u.grid().dtheta())
    }

    #[inline]
    fn dx_f(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i + 1, j, k) - self.u(i, j, k)) / self.u.grid().dx()
    }

    #[inline]
    fn dy_f(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i, j + 1, k) - self.u(i, j, k)) / self.u.grid().dy()
    }

    #[inline]
    fn dx_b(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i, j, k) - self.u(i - 1, j, k)) / self.u.grid().dx()
    }

    #[inline]
    fn dy_b(&self, i: isize, j: isize, k: usize) -> f64 {
        (self.u(i, j, k) - self.u(i, j - 1, k)) / self.u.grid().dy()
    }

    #[inline]
    fn at(&self, a: &[f64], i: isize, j: isize, k: usize) -> f64 {
        a[k * self.plane + (j + 1) as usize * self.px + (i + 1) as usize]
    }

    /// Table entry at orientation `k + dk`; frame fields `X1`, `X3` change
    /// sign across the θ seam.
    #[inline]
    fn at_theta(&self, a: &[f64], frame: Frame, i: isize, j: isize, k: usize, dk: isize) -> f64 {
        let (kk, wrapped) = self.wrap(k, dk);
        let v = self.at(a, i, j, kk);
        if wrapped && frame != Frame::X2 {
            -v
        } else {
            v
        }
    }

    fn central(&self, frame: Frame) -> &[f64] {
        match frame {
            Frame::X1 => &self.c1,
            Frame::X2 => &self.c2,
            Frame::X3 => &self.c3,
        }
    }

    #[inline]
    pub fn c1(&self, i: usize, j: usize, k: usize) -> f64 {
        self.at(&self.c1, i as isize, j as isize, k)
    }

    #[inline]
    pub fn c2(&self, i: usize, j: usize, k: usize) -> f64 {
        self.at(&self.c2, i as isize, j as isize, k)
    }

    #[inline]
    pub fn c3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.at(&self.c3, i as isize, j as isize, k)
    }

    /// `D⁻X D⁺X U` for a frame field.
    #[inline]
    pub fn second(&self, frame: Frame, i: usize, j: usize, k: usize) -> f64 {
        let (i, j) = (i as isize, j as isize);
        let g = self.u.grid();
        let sx = |a: &[f64]| (self.at(a, i, j, k) - self.at(a, i - 1, j, k)) / g.dx();
        let sy = |a: &[f64]| (self.at(a, i, j, k) - self.at(a, i, j - 1, k)) / g.dy();
        let (c, s) = self.trig(k);
        match frame {
            Frame::X1 => c * sx(&self.f1) + s * sy(&self.f1),
            Frame::X3 => -s * sx(&self.f3) + c * sy(&self.f3),
            Frame::X2 => {
                let h = g.dtheta();
                let fw = (self.u_theta(i, j, k, 1) - self.u(i, j, k)) / h;
                let bw = (self.u(i, j, k) - self.u_theta(i, j, k, -1)) / h;
                (fw - bw) / h
            }
        }
    }

    /// `D⁰outer D⁰inner U`.
    #[inline]
    pub fn mixed(&self, outer: Frame, inner: Frame, i: usize, j: usize, k: usize) -> f64 {
        let (i, j) = (i as isize, j as isize);
        let g = self.u.grid();
        let a = self.central(inner);
        match outer {
            Frame::X2 => {
                (self.at_theta(a, inner, i, j, k, 1) - self.at_theta(a, inner, i, j, k, -1))
                    / (2.0 * g.dtheta())
            }
            _ => {
                let gx = (self.at(a, i + 1, j, k) - self.at(a, i - 1, j, k)) / (2.0 * g.dx());
                let gy = (self.at(a, i, j + 1, k) - self.at(a, i, j - 1, k)) / (2.0 * g.dy());
                let (c, s) = self.trig(k);
                if outer == Frame::X1 {
                    c * gx + s * gy
                } else {
                    -s * gx + c * gy
                }
            }
        }
    }

    /// Neighbourhood-averaged squared horizontal gradient plus `tau`.
    #[inline]
    pub fn dint(&self, i: usize, j: usize, k: usize, tau: f64) -> f64 {
        let (i, j) = (i as isize, j as isize);
        let sq1 = |dk: isize| {
            let d = self.at_theta(&self.c1, Frame::X1, i, j, k, dk);
            d * d
        };
        let sq2 = |di: isize, dj: isize| {
            let d = self.at(&self.c2, i + di, j + dj, k);
            d * d
        };
        let along_theta = sq1(-1) + sq1(0) + sq1(1);
        let in_plane = sq2(-1, 0) + sq2(0, 0) + sq2(1, 0) + sq2(0, -1) + sq2(0, 1);
        along_theta / 3.0 + in_plane / 5.0 + tau
    }

    /// Upwinded connection term.
    #[inline]
    pub fn w1(&self, i: usize, j: usize, k: usize, tau: f64) -> f64 {
        let d1 = self.c1(i, j, k);
        let d2 = self.c2(i, j, k);
        let prod = d1 * d2;
        if prod == 0.0 {
            return 0.0;
        }
        let (ii, jj) = (i as isize, j as isize);
        let (c, s) = self.trig(k);
        let den = d1 * d1 + d2 * d2 + tau;
        let upwind = |a: f64, back: f64, fwd: f64| {
            if a > 0.0 {
                a * back
            } else if a < 0.0 {
                a * fwd
            } else {
                0.0
            }
        };
        let ax = upwind(-s * prod, self.dx_b(ii, jj, k), self.dx_f(ii, jj, k));
        let ay = upwind(c * prod, self.dy_b(ii, jj, k), self.dy_f(ii, jj, k));
        -(ax + ay) / den
    }

    /// Curvature term of the sub-Riemannian scheme.
    #[inline]
    pub fn w2(&self, i: usize, j: usize, k: usize, tau: f64, mixed: MixedUpwind) -> f64 {
        let d1 = self.c1(i, j, k);
        let d2 = self.c2(i, j, k);
        let mut num = 0.0;
        if d2 != 0.0 {
            num += d2 * d2 * self.second(Frame::X1, i, j, k);
        }
        if d1 != 0.0 {
            num += d1 * d1 * self.second(Frame::X2, i, j, k);
        }
        if d2 != 0.0 {
            let m = self.mixed(Frame::X1, Frame::X2, i, j, k);
            let (ii, jj) = (i as isize, j as isize);
            let (c, s) = self.trig(k);
            let fwd = || c * self.dx_f(ii, jj, k) + s * self.dy_f(ii, jj, k);
            let bwd = || c * self.dx_b(ii, jj, k) + s * self.dy_b(ii, jj, k);
            let q = match mixed {
                MixedUpwind::Central => d1,
                MixedUpwind::ProductSign => {
                    let sg = -d1 * d2;
                    if sg > 0.0 {
                        bwd()
                    } else if sg < 0.0 {
                        fwd()
                    } else {
                        d1
                    }
                }
                MixedUpwind::TransportSign => {
                    let b = -2.0 * d2 * m;
                    if b > 0.0 {
                        fwd()
                    } else if b < 0.0 {
                        bwd()
                    } else {
                        0.0
                    }
                }
            };
            num -= 2.0 * q * d2 * m;
        }
        if num == 0.0 {
            return 0.0;
        }
        num / self.dint(i, j, k, tau)
    }
}

/// Tables needed by [`contraction`] for the second-derivative field.
pub(crate) fn contraction_needs(eps: f64) -> Needs {
    let riemannian = eps != 0.0;
    Needs {
        c3: riemannian,
        f1: true,
        f3: riemannian,
    }
}

/// Tables needed by [`FirstDiffs::w1`] and [`FirstDiffs::w2`].
pub(crate) const SR_NEEDS: Needs = Needs {
    c3: false,
    f1: true,
    f3: false,
};

/// `Σ A_ij X^ε_i X^ε_j v` with coefficients from the central frame gradient
/// carried by `du`; `dv` supplies the differences of `v`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn contraction(
    du: &FirstDiffs<'_>,
    dv: &FirstDiffs<'_>,
    i: usize,
    j: usize,
    k: usize,
    eps: f64,
    tau: f64,
    sigma: f64,
) -> f64 {
    let riemannian = eps != 0.0;
    let p1 = du.c1(i, j, k);
    let p2 = du.c2(i, j, k);
    let p3 = if riemannian {
        eps * du.c3(i, j, k)
    } else {
        0.0
    };
    let a = crate::flow::coefficients([p1, p2, p3], tau, sigma);

    let h11 = dv.second(Frame::X1, i, j, k);
    let h22 = dv.second(Frame::X2, i, j, k);
    let sym = |a: Frame, b: Frame| 0.5 * (dv.mixed(a, b, i, j, k) + dv.mixed(b, a, i, j, k));
    let mut rhs = a[0][0] * h11 + a[1][1] * h22;
    if a[0][1] != 0.0 {
        rhs += 2.0 * a[0][1] * sym(Frame::X1, Frame::X2);
    }
    if riemannian {
        let h33 = eps * eps * dv.second(Frame::X3, i, j, k);
        let h13 = eps * sym(Frame::X1, Frame::X3);
        let h23 = eps * sym(Frame::X2, Frame::X3);
        rhs += a[2][2] * h33 + 2.0 * (a[0][2] * h13 + a[1][2] * h23);
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowParams, MixedUpwind};
    use crate::grid::GridSpec;

    /// Node-by-node evaluation through `Probe`, kept as the reference the
    /// sweep kernel is checked against.
    mod reference {
        use crate::flow::{coefficients, FlowParams, MixedUpwind};
        use crate::grid::{dint_norm_sq_at, Axis, Frame, Probe, Scheme};

        pub(crate) fn central_12(p: &Probe<'_>) -> (f64, f64) {
            (
                p.frame(Frame::X1, Scheme::Central),
                p.frame(Frame::X2, Scheme::Central),
            )
        }

        pub(crate) fn w1_at(p: &Probe<'_>, d1: f64, d2: f64, tau: f64) -> f64 {
            let prod = d1 * d2;
            if prod == 0.0 {
                return 0.0;
            }
            let (c, s) = p.trig(0);
            let den = d1 * d1 + d2 * d2 + tau;
            let upwind = |a: f64, axis: Axis| {
                if a > 0.0 {
                    a * p.diff_at(axis, Scheme::Backward, [0, 0, 0])
                } else if a < 0.0 {
                    a * p.diff_at(axis, Scheme::Forward, [0, 0, 0])
                } else {
                    0.0
                }
            };
            -(upwind(-s * prod, Axis::X) + upwind(c * prod, Axis::Y)) / den
        }

        pub(crate) fn w2_at(p: &Probe<'_>, d1: f64, d2: f64, tau: f64, mixed: MixedUpwind) -> f64 {
            let mut num = 0.0;
            if d2 != 0.0 {
                num += d2 * d2 * p.frame_second(Frame::X1);
            }
            if d1 != 0.0 {
                num += d1 * d1 * p.frame_second(Frame::X2);
            }
            if d2 != 0.0 {
                let m = p.frame_mixed(Frame::X1, Frame::X2);
                let q = match mixed {
                    MixedUpwind::Central => d1,
                    MixedUpwind::ProductSign => {
                        let s = -d1 * d2;
                        if s > 0.0 {
                            p.frame(Frame::X1, Scheme::Backward)
                        } else if s < 0.0 {
                            p.frame(Frame::X1, Scheme::Forward)
                        } else {
                            d1
                        }
                    }
                    MixedUpwind::TransportSign => {
                        let b = -2.0 * d2 * m;
                        if b > 0.0 {
                            p.frame(Frame::X1, Scheme::Forward)
                        } else if b < 0.0 {
                            p.frame(Frame::X1, Scheme::Backward)
                        } else {
                            0.0
                        }
                    }
                };
                num -= 2.0 * q * d2 * m;
            }
            if num == 0.0 {
                return 0.0;
            }
            num / dint_norm_sq_at(p, tau)
        }

        /// `Σ A_ij X^ε_i X^ε_j v` with coefficients taken from the central frame
        /// gradient of `u`. Diagonal second differences are compact
        /// (`D⁻X D⁺X`), mixed ones symmetrized central compositions.
        pub(crate) fn contraction_at(
            u: &Probe<'_>,
            v: &Probe<'_>,
            eps: f64,
            tau: f64,
            sigma: f64,
        ) -> f64 {
            let riemannian = eps != 0.0;
            let p1 = u.frame(Frame::X1, Scheme::Central);
            let p2 = u.frame(Frame::X2, Scheme::Central);
            let p3 = if riemannian {
                eps * u.frame(Frame::X3, Scheme::Central)
            } else {
                0.0
            };
            let a = coefficients([p1, p2, p3], tau, sigma);

            let h11 = v.frame_second(Frame::X1);
            let h22 = v.frame_second(Frame::X2);
            let sym = |a: Frame, b: Frame| 0.5 * (v.frame_mixed(a, b) + v.frame_mixed(b, a));
            let mut rhs = a[0][0] * h11 + a[1][1] * h22;
            if a[0][1] != 0.0 {
                rhs += 2.0 * a[0][1] * sym(Frame::X1, Frame::X2);
            }
            if riemannian {
                let h33 = eps * eps * v.frame_second(Frame::X3);
                let h13 = eps * sym(Frame::X1, Frame::X3);
                let h23 = eps * sym(Frame::X2, Frame::X3);
                rhs += a[2][2] * h33 + 2.0 * (a[0][2] * h13 + a[1][2] * h23);
            }
            rhs
        }

        pub(crate) fn mcf_rhs_at(p: &Probe<'_>, params: &FlowParams) -> f64 {
            if params.is_sub_riemannian() {
                let (d1, d2) = central_12(p);
                w2_at(p, d1, d2, params.tau, params.mixed_upwind) + w1_at(p, d1, d2, params.tau)
            } else {
                contraction_at(p, p, params.eps, params.tau, params.sigma)
            }
        }
    }

    fn field(grid: &GridSpec, phase: f64) -> ScalarField3 {
        ScalarField3::from_fn(grid, |x, y, t| {
            (0.7 * x + phase).sin() * (0.4 * y).cos()
                + (2.0 * t + 0.3 * x).cos() * (0.5 * y - phase).sin()
                + 0.2 * (4.0 * t).sin()
        })
    }

    fn grids() -> Vec<GridSpec> {
        vec![
            GridSpec::new(9, 7, 6, 1.0, 0.8).unwrap(),
            GridSpec::new(5, 6, 3, 0.5, 1.3).unwrap(),
        ]
    }

    fn each_node(grid: &GridSpec, mut f: impl FnMut(usize, usize, usize)) {
        for k in 0..grid.ntheta() {
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    f(i, j, k);
                }
            }
        }
    }

    #[test]
    fn sub_riemannian_terms_match_reference_bitwise() {
        for grid in grids() {
            let u = field(&grid, 0.3);
            let d = FirstDiffs::new(&u, SR_NEEDS, false);
            for mixed in [
                MixedUpwind::Central,
                MixedUpwind::ProductSign,
                MixedUpwind::TransportSign,
            ] {
                each_node(&grid, |i, j, k| {
                    let p = u.probe(i, j, k);
                    let (d1, d2) = reference::central_12(&p);
                    assert_eq!(d.w1(i, j, k, 1e-4), reference::w1_at(&p, d1, d2, 1e-4));
                    assert_eq!(
                        d.w2(i, j, k, 1e-4, mixed),
                        reference::w2_at(&p, d1, d2, 1e-4, mixed)
                    );
                });
            }
        }
    }

    #[test]
    fn contraction_matches_reference_bitwise() {
        for grid in grids() {
            let u = field(&grid, 0.3);
            let v = field(&grid, 1.1);
            for (eps, sigma) in [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (1.0, 0.25)] {
                let du = FirstDiffs::new(&u, contraction_needs(eps), false);
                let dv = FirstDiffs::new(&v, contraction_needs(eps), true);
                each_node(&grid, |i, j, k| {
                    let want = reference::contraction_at(
                        &u.probe(i, j, k),
                        &v.probe(i, j, k),
                        eps,
                        1e-3,
                        sigma,
                    );
                    assert_eq!(contraction(&du, &dv, i, j, k, eps, 1e-3, sigma), want);
                });
            }
        }
    }

    #[test]
    fn window_covers_the_stencils_of_its_box() {
        let grid = GridSpec::new(10, 9, 6, 1.0, 1.0).unwrap();
        let u = field(&grid, 0.4);
        let full = FirstDiffs::new(&u, contraction_needs(1.0), false);
        for (i0, i1, j0, j1) in [(3, 5, 2, 6), (0, 2, 0, 0), (7, 9, 6, 8)] {
            let w = Window::around(&grid, i0, i1, j0, j1);
            let part = FirstDiffs::within(&u, contraction_needs(1.0), false, w);
            for k in 0..grid.ntheta() {
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        assert_eq!(
                            part.w2(i, j, k, 1e-3, MixedUpwind::Central),
                            full.w2(i, j, k, 1e-3, MixedUpwind::Central)
                        );
                        assert_eq!(part.w1(i, j, k, 1e-3), full.w1(i, j, k, 1e-3));
                        assert_eq!(
                            contraction(&part, &part, i, j, k, 1.0, 1e-3, 0.1),
                            contraction(&full, &full, i, j, k, 1.0, 1e-3, 0.1)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mcf_rhs_matches_reference() {
        let grid = GridSpec::new(8, 8, 8, 1.0, 1.0).unwrap();
        let u = field(&grid, 0.9);
        for params in [
            FlowParams::default(),
            FlowParams {
                eps: 0.5,
                ..Default::default()
            },
        ] {
            let rhs = crate::flow::mcf_rhs(&u, &params).unwrap();
            each_node(&grid, |i, j, k| {
                assert_eq!(
                    rhs.get(i, j, k),
                    reference::mcf_rhs_at(&u.probe(i, j, k), &params)
                );
            });
        }
    }
}
