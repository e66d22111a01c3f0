//! Spray coefficients and geodesic integration up to the first boundary exit.

use crate::error::{Error, Result};
use crate::field::Point;
use crate::finsler::{Curve, RandersSpec};
use crate::ode::{illinois, Dopri5, OdeOptions, OdeState};
use nalgebra::SVector;
use std::io::Write;
use std::ops::{Add, Mul};

/// Spray `G^i(x, y)` from analytic derivatives of the Randers data.
///
/// With `alpha = sqrt(a y y)`, `l = a y / alpha` and `F = alpha + b y`:
/// `g = F (a - l l^T) / alpha + F_y F_y^T`, `dF^2/dx = 2 F F_x` and
/// `d^2F^2/dx^k dy^l = 2 (F_x,k F_y,l + F F_xy,kl)`.
pub fn spray<const D: usize>(
    spec: &RandersSpec<D>,
    x: &Point<D>,
    y: &SVector<f64, D>,
) -> Result<SVector<f64, D>> {
    spec.domain().check(x)?;
    if y.norm() == 0.0 {
        return Err(Error::Degenerate("spray at y = 0".into()));
    }
    spray_parts(spec, x, y)
        .map(|(g, _)| g)
        .ok_or_else(|| Error::Convexity {
            point: x.iter().copied().collect(),
        })
}

/// `(G(x, y), F(x, y))`, or `None` if the fundamental tensor is singular.
pub(crate) fn spray_parts<const D: usize>(
    spec: &RandersSpec<D>,
    x: &Point<D>,
    y: &SVector<f64, D>,
) -> Option<(SVector<f64, D>, f64)> {
    let (a, da) = spec.alpha().jet(x);
    let (b, db) = spec.beta().jet(x);
    let (f, alpha, ell, fy, g) = spec.fundamental_tensor_exact(&a, &b, y);
    // d alpha / dx^k and d^2 alpha / dx^k dy^l
    let mut fx = SVector::<f64, D>::zeros();
    let mut m = nalgebra::SMatrix::<f64, D, D>::zeros();
    let dby = db.transpose() * y;
    for k in 0..D {
        let day = da[k] * y;
        let ak = y.dot(&day) / (2.0 * alpha);
        fx[k] = ak + dby[k];
        for l in 0..D {
            let axy = day[l] / alpha - ell[l] * ak / alpha;
            m[(k, l)] = axy + db[(l, k)];
        }
    }
    // M_kl = d^2 F^2 / dx^k dy^l
    let mm = (fx * fy.transpose() + m * f) * 2.0;
    let rhs = mm.transpose() * y - fx * (2.0 * f);
    let sol = g.cholesky()?.solve(&rhs);
    Some((sol * 0.25, f))
}

/// Position, velocity and accumulated `F`-length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoState<const D: usize> {
    pub x: SVector<f64, D>,
    pub v: SVector<f64, D>,
    pub len: f64,
}

impl<const D: usize> Add for GeoState<D> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            x: self.x + o.x,
            v: self.v + o.v,
            len: self.len + o.len,
        }
    }
}

impl<const D: usize> Mul<f64> for GeoState<D> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self {
            x: self.x * k,
            v: self.v * k,
            len: self.len * k,
        }
    }
}

impl<const D: usize> OdeState for GeoState<D> {
    fn error_norm(err: &Self, a: &Self, b: &Self, opts: &OdeOptions) -> f64 {
        let sc = |e: f64, p: f64, q: f64| (e / (opts.atol + opts.rtol * p.abs().max(q.abs()))).powi(2);
        let mut acc = sc(err.len, a.len, b.len);
        for i in 0..D {
            acc += sc(err.x[i], a.x[i], b.x[i]) + sc(err.v[i], a.v[i], b.v[i]);
        }
        (acc / (2 * D + 1) as f64).sqrt()
    }
    fn is_finite(&self) -> bool {
        self.len.is_finite() && self.x.iter().chain(self.v.iter()).all(|v| v.is_finite())
    }
}

/// One stored point of a geodesic, with acceleration for Hermite interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const D: usize> {
    pub t: f64,
    pub x: Point<D>,
    pub v: SVector<f64, D>,
    pub a: SVector<f64, D>,
}

/// A unit-speed geodesic from its start to the first boundary exit.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath<const D: usize = 2> {
    pub samples: Vec<Sample<D>>,
    /// Exit parameter `T`.
    pub exit_time: f64,
    /// `int F(gamma, gamma')` accumulated alongside the state.
    pub f_length: f64,
    pub tag: String,
}

impl<const D: usize> GeodesicPath<D> {
    pub fn start(&self) -> Point<D> {
        self.samples[0].x
    }

    pub fn exit_point(&self) -> Point<D> {
        self.samples.last().expect("non-empty path").x
    }

    pub fn exit_velocity(&self) -> SVector<f64, D> {
        self.samples.last().expect("non-empty path").v
    }

    pub fn points(&self) -> Vec<Point<D>> {
        self.samples.iter().map(|s| s.x).collect()
    }

    /// Refuses a path produced under another norm.
    pub fn check_tag(&self, spec: &RandersSpec<D>) -> Result<()> {
        if self.tag == spec.tag() {
            Ok(())
        } else {
            Err(Error::TagMismatch {
                path_tag: self.tag.clone(),
                spec_tag: spec.tag().to_string(),
            })
        }
    }

    /// Point at parameter `t` by quintic Hermite interpolation.
    pub fn position(&self, t: f64) -> Point<D> {
        let t = t.clamp(0.0, self.exit_time);
        let k = self
            .samples
            .partition_point(|s| s.t <= t)
            .clamp(1, self.samples.len() - 1)
            - 1;
        let h = self.samples[k + 1].t - self.samples[k].t;
        self.segment_eval(k, (t - self.samples[k].t) / h).0
    }

    /// `max |F(gamma, gamma') - 1|` over the stored samples.
    pub fn speed_deviation(&self, spec: &RandersSpec<D>) -> f64 {
        self.samples
            .iter()
            .map(|s| (spec.eval_unchecked(&s.x, &s.v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `x'' + 2G(x, x')`, with `x''` estimated by
    /// differentiating the Lagrange polynomial through five neighbouring
    /// stored velocities, relative to `1 + max |x''|`. Each sample takes the
    /// best of the windows containing it, so a kink in the medium is seen
    /// from one side.
    pub fn equation_residual(&self, spec: &RandersSpec<D>) -> f64 {
        const W: usize = 5;
        let s = &self.samples;
        if s.len() < W {
            return 0.0;
        }
        let scale = 1.0 + s.iter().map(|p| p.a.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..s.len() {
            let acc = match spray_parts(spec, &s[i].x, &s[i].v) {
                Some((g, _)) => -g * 2.0,
                None => return f64::INFINITY,
            };
            let first = i.saturating_sub(W - 1);
            let last = i.min(s.len() - W);
            let mut best = f64::INFINITY;
            for w0 in first..=last {
                let ts: Vec<f64> = (w0..w0 + W).map(|j| s[j].t).collect();
                let mut dd = SVector::<f64, D>::zeros();
                for (jj, j) in (w0..w0 + W).enumerate() {
                    dd += s[j].v * lagrange_derivative_weight(&ts, i - w0, jj);
                }
                best = best.min((dd - acc).norm() / scale);
            }
            worst = worst.max(best);
        }
        worst
    }

    /// Writes `t,x1,x2,...,y1,y2,...` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let xs: Vec<String> = (1..=D).map(|i| format!("x{i}")).collect();
        let ys: Vec<String> = (1..=D).map(|i| format!("y{i}")).collect();
        writeln!(w, "t,{},{}", xs.join(","), ys.join(","))?;
        for s in &self.samples {
            let mut row = format!("{:.16e}", s.t);
            for v in s.x.iter().chain(s.v.iter()) {
                row.push_str(&format!(",{v:.16e}"));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// `L_j'(t_i)` for the Lagrange basis on nodes `ts`.
fn lagrange_derivative_weight(ts: &[f64], i: usize, j: usize) -> f64 {
    if i == j {
        return (0..ts.len()).filter(|&m| m != i).map(|m| 1.0 / (ts[i] - ts[m])).sum();
    }
    let mut num = 1.0;
    let mut den = 1.0;
    for m in 0..ts.len() {
        if m != j {
            den *= ts[j] - ts[m];
            if m != i {
                num *= ts[i] - ts[m];
            }
        }
    }
    num / den
}

fn hermite(s: f64) -> ([f64; 6], [f64; 6]) {
    let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 0.5 * (s3 - 2.0 * s4 + s5);
    let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let d2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
    let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let d5 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
    ([h0, h1, h2, 1.0 - h0, h4, h5], [d0, d1, d2, -d0, d4, d5])
}

impl<const D: usize> Curve<D> for GeodesicPath<D> {
    fn segment_count(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    fn segment_eval(&self, k: usize, s: f64) -> (Point<D>, SVector<f64, D>) {
        let (p, q) = (&self.samples[k], &self.samples[k + 1]);
        let h = q.t - p.t;
        let (b, d) = hermite(s);
        let x = p.x * b[0] + p.v * (h * b[1]) + p.a * (h * h * b[2]) + q.x * b[3]
            + q.v * (h * b[4])
            + q.a * (h * h * b[5]);
        let dx = p.x * d[0] + p.v * (h * d[1]) + p.a * (h * h * d[2]) + q.x * d[3]
            + q.v * (h * d[4])
            + q.a * (h * h * d[5]);
        (x, dx)
    }

    fn segment_parameter(&self, k: usize) -> f64 {
        self.samples[k].t
    }
}

/// Integration controls for geodesics in a domain of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    pub ode: OdeOptions,
    /// Exit located when `| |x|^2 - R^2 | <= exit_tol * R^2`.
    pub exit_tol: f64,
}

impl GeodesicOptions {
    pub fn for_radius(radius: f64) -> Self {
        Self {
            ode: OdeOptions {
                h_max: 0.1 * radius,
                h_init: 1e-3 * radius,
                ..OdeOptions::default()
            },
            exit_tol: 1e-12,
        }
    }
}

/// Integrates `x'' + 2G(x, x') = 0` from `x0` with initial direction `y0`
/// (rescaled so that `F(x0, y0) = 1`) until the path first leaves the domain.
pub fn integrate_geodesic<const D: usize>(
    spec: &RandersSpec<D>,
    x0: &Point<D>,
    y0: &SVector<f64, D>,
    opts: &GeodesicOptions,
) -> Result<GeodesicPath<D>> {
    if !spec.is_valid() {
        return Err(Error::InvalidNorm {
            margin: spec.validity_margin(),
        });
    }
    spec.domain().check(x0)?;
    let f0 = spec.eval_unchecked(x0, y0);
    if !(f0 > 0.0) || y0.norm() == 0.0 {
        return Err(Error::Degenerate("initial direction has no positive length".into()));
    }
    let radius = spec.domain().radius;
    let r2 = radius * radius;
    let level = |x: &Point<D>| x.norm_squared() - r2;
    if level(x0) > -1e-9 * r2 && x0.dot(y0) >= 0.0 {
        return Err(Error::InvalidArgument(
            "initial direction at a boundary point must point inward".into(),
        ));
    }
    let rhs = |_t: f64, s: &GeoState<D>| match spray_parts(spec, &s.x, &s.v) {
        Some((g, f)) => GeoState {
            x: s.v,
            v: g * -2.0,
            len: f,
        },
        None => GeoState {
            x: s.v,
            v: SVector::repeat(f64::NAN),
            len: f64::NAN,
        },
    };
    let start = GeoState {
        x: *x0,
        v: y0 / f0,
        len: 0.0,
    };
    let mut ode = Dopri5::new(rhs, 0.0, start, opts.ode);
    let sample = |t: f64, s: &GeoState<D>, ds: &GeoState<D>| Sample {
        t,
        x: s.x,
        v: s.v,
        a: ds.v,
    };
    let mut samples = vec![sample(0.0, &ode.y, &ode.dy)];
    let tol = opts.exit_tol * r2;
    loop {
        let (t_prev, y_prev, dy_prev) = (ode.t, ode.y, ode.dy);
        if !ode.advance() {
            return Err(Error::TrappedGeodesic { steps: ode.steps });
        }
        let h_full = ode.t - t_prev;
        if level(&ode.y.x) <= 0.0 {
            // Radial profiles are only Lipschitz at r = 0. Near the closest
            // approach to the origin, end the step just short of it and
            // restart from the departing side, so no stage straddles the kink.
            let gap = 1e-12 * radius;
            let radial = |s: &GeoState<D>| s.x.dot(&s.v) / s.v.norm() + gap;
            let (r0, r1) = (radial(&y_prev), radial(&ode.y));
            if r0 < 0.0 && r1 > 0.0 {
                let (y1, dy1) = (ode.y, ode.dy);
                ode.t = t_prev;
                ode.y = y_prev;
                ode.dy = dy_prev;
                let h = illinois(|h| radial(&ode.trial(h).0), 0.0, h_full, r0, r1, 0.0, 1e-15 * radius);
                if h > 1e-12 * h_full && h < h_full * (1.0 - 1e-12) {
                    let (ym, _) = ode.trial(h);
                    ode.t = t_prev + h;
                    ode.y = ym;
                    let ahead = GeoState {
                        x: ym.x + ym.v * (2.0 * gap / ym.v.norm()),
                        ..ym
                    };
                    ode.dy = (ode.rhs())(ode.t, &ahead);
                } else {
                    ode.t = t_prev + h_full;
                    ode.y = y1;
                    ode.dy = dy1;
                }
            }
            samples.push(sample(ode.t, &ode.y, &ode.dy));
            continue;
        }
        // The exit lies inside the step just taken: redo it from the previous
        // state with a shorter step size.
        ode.t = t_prev;
        ode.y = y_prev;
        ode.dy = dy_prev;
        let g = |h: f64| level(&ode.trial(h).0.x);
        let (mut lo, mut hi) = (0.0, h_full);
        let (mut glo, mut ghi) = (level(&y_prev.x), g(h_full));
        // starting on the boundary puts a spurious root at h = 0
        while glo >= -tol && hi - lo > 1e-15 * radius {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm > 0.0 {
                hi = mid;
                ghi = gm;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        let h = illinois(g, lo, hi, glo, ghi, tol, 1e-15 * radius);
        let (y_exit, dy_exit) = ode.trial(h);
        let t_exit = t_prev + h;
        samples.push(sample(t_exit, &y_exit, &dy_exit));
        return Ok(GeodesicPath {
            samples,
            exit_time: t_exit,
            f_length: y_exit.len,
            tag: spec.tag().to_string(),
        });
    }
}

/// Distance from `p` to the curve, refined by Newton projection on the
/// nearest segment.
fn distance_to_path<const D: usize>(p: &Point<D>, path: &GeodesicPath<D>) -> f64 {
    const PROBES: usize = 8;
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for k in 0..path.segment_count() {
        for j in 0..=PROBES {
            let s = j as f64 / PROBES as f64;
            let d = (path.segment_eval(k, s).0 - p).norm();
            if d < best.0 {
                best = (d, k, s);
            }
        }
    }
    let mut out = best.0;
    let k0 = best.1;
    for k in k0.saturating_sub(1)..(k0 + 2).min(path.segment_count()) {
        let mut s = if k == k0 { best.2 } else { 0.5 };
        for _ in 0..30 {
            let (x, dx) = path.segment_eval(k, s);
            let eps = 1e-6;
            let (_, dx2) = path.segment_eval(k, s + eps);
            let ddx = (dx2 - dx) / eps;
            let r = x - p;
            let num = r.dot(&dx);
            let den = dx.norm_squared() + r.dot(&ddx);
            if den <= 0.0 {
                break;
            }
            let step = num / den;
            s = (s - step).clamp(0.0, 1.0);
            if step.abs() < 1e-14 {
                break;
            }
        }
        out = out.min((path.segment_eval(k, s).0 - p).norm());
    }
    out
}

fn one_sided<const D: usize>(a: &GeodesicPath<D>, b: &GeodesicPath<D>) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..a.segment_count() {
        for s in [0.0, 0.5] {
            worst = worst.max(distance_to_path(&a.segment_eval(k, s).0, b));
        }
    }
    worst.max(distance_to_path(&a.exit_point(), b))
}

/// Symmetric Hausdorff distance between the point sets of two paths.
pub fn hausdorff_distance<const D: usize>(a: &GeodesicPath<D>, b: &GeodesicPath<D>) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}
