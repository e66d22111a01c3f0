//! Boundary-to-boundary geodesics in the disk by shooting.
//!
//! Every solve starts from a fan of inward directions at the source. The fan
//! is shared by all targets of that source, so single solves and full
//! distance matrices go through the same arithmetic.

use crate::error::{Error, Result};
use crate::field::Point;
use crate::finsler::RandersSpec;
use crate::geodesic::{hausdorff_distance, integrate_geodesic, GeodesicOptions, GeodesicPath};
use crate::ode::illinois;
use crate::parallel::{map_indexed, Execution};
use nalgebra::Vector2;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Number of inward directions in the fan.
    pub fan_size: usize,
    /// Largest accepted endpoint miss, relative to `R`.
    pub miss_tol: f64,
    /// Refinement target for the endpoint miss, relative to `R`.
    pub refine_tol: f64,
    pub geodesic: GeodesicOptions,
    pub execution: Execution,
}

impl ShootingOptions {
    pub fn for_radius(radius: f64) -> Self {
        Self {
            fan_size: 720,
            miss_tol: 1e-8,
            refine_tol: 1e-12,
            geodesic: GeodesicOptions::for_radius(radius),
            execution: Execution::default(),
        }
    }
}

pub fn boundary_point(radius: f64, angle: f64) -> Point<2> {
    Vector2::new(radius * angle.cos(), radius * angle.sin())
}

/// Angle of a point in `[0, 2 pi)`.
pub fn point_angle(x: &Point<2>) -> f64 {
    x[1].atan2(x[0]).rem_euclid(TAU)
}

/// Wraps an angle difference into `(-pi, pi]`.
fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Initial direction at angle `theta` from the inward normal, positive
/// towards the counter-clockwise tangent.
fn direction(source_angle: f64, theta: f64) -> Vector2<f64> {
    let n = -Vector2::new(source_angle.cos(), source_angle.sin());
    let t = Vector2::new(-n[1], n[0]);
    n * theta.cos() + t * theta.sin()
}

fn launch(
    spec: &RandersSpec<2>,
    source_angle: f64,
    theta: f64,
    opts: &ShootingOptions,
) -> Result<GeodesicPath<2>> {
    let x0 = boundary_point(spec.domain().radius, source_angle);
    integrate_geodesic(spec, &x0, &direction(source_angle, theta), &opts.geodesic)
}

/// Exit angles of a fan of geodesics leaving one boundary point.
#[derive(Debug, Clone)]
pub struct Fan {
    pub source_angle: f64,
    /// `(theta, relative exit angle in [0, 2 pi))`, `None` when the ray failed.
    pub rays: Vec<(f64, Option<f64>)>,
    /// First integration failure in the fan, if any.
    pub failure: Option<Error>,
}

pub fn shoot_fan(spec: &RandersSpec<2>, source_angle: f64, opts: &ShootingOptions) -> Result<Fan> {
    if !spec.is_valid() {
        return Err(Error::InvalidNorm {
            margin: spec.validity_margin(),
        });
    }
    if opts.fan_size < 2 {
        return Err(Error::InvalidArgument("fan needs at least two directions".into()));
    }
    let k = opts.fan_size;
    let out = map_indexed(k, opts.execution, |i| {
        let theta = -FRAC_PI_2 + (i as f64 + 0.5) * PI / k as f64;
        let r = launch(spec, source_angle, theta, opts)
            .map(|p| (point_angle(&p.exit_point()) - source_angle).rem_euclid(TAU));
        (theta, r)
    });
    let mut failure = None;
    let rays = out
        .into_iter()
        .map(|(theta, r)| match r {
            Ok(psi) => (theta, Some(psi)),
            Err(e) => {
                failure.get_or_insert(e);
                (theta, None)
            }
        })
        .collect();
    Ok(Fan {
        source_angle,
        rays,
        failure,
    })
}

/// A converged boundary-to-boundary geodesic.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub path: GeodesicPath<2>,
    /// Initial direction, measured from the inward normal.
    pub angle: f64,
    /// Distance between the exit point and the target.
    pub miss: f64,
    /// Number of distinct geodesics found by the angle sweep.
    pub branches: usize,
    /// `F`-length, corrected to first order for the residual miss.
    pub distance: f64,
}

/// Solves towards `target_angle` using an already computed fan.
pub fn solve_from_fan(
    spec: &RandersSpec<2>,
    fan: &Fan,
    target_angle: f64,
    opts: &ShootingOptions,
) -> Result<ShootingResult> {
    let radius = spec.domain().radius;
    let psi_target = (target_angle - fan.source_angle).rem_euclid(TAU);
    if psi_target == 0.0 {
        return Err(Error::Degenerate("source and target coincide".into()));
    }
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(fan.rays.len() + 2);
    // grazing limits: theta -> -pi/2 sweeps the whole boundary, theta -> pi/2 none of it
    samples.push((-FRAC_PI_2, wrap(TAU - psi_target)));
    let mut gap = false;
    for &(theta, psi) in &fan.rays {
        match psi {
            Some(p) => samples.push((theta, wrap(p - psi_target))),
            None => {
                gap = true;
                samples.push((theta, f64::NAN));
            }
        }
    }
    samples.push((FRAC_PI_2, wrap(-psi_target)));

    let mut brackets = Vec::new();
    for w in samples.windows(2) {
        let ((ta, ma), (tb, mb)) = (w[0], w[1]);
        if ma.is_nan() || mb.is_nan() || (ma - mb).abs() >= PI {
            continue;
        }
        if (ma <= 0.0) != (mb <= 0.0) {
            brackets.push((ta, tb, ma, mb));
        }
    }
    if brackets.is_empty() {
        if gap {
            if let Some(e) = &fan.failure {
                return Err(e.clone());
            }
        }
        return Err(Error::Connectivity {
            from: fan.source_angle,
            to: target_angle,
        });
    }

    let miss_angle = |theta: f64| -> f64 {
        match launch(spec, fan.source_angle, theta, opts) {
            Ok(p) => wrap(point_angle(&p.exit_point()) - target_angle),
            Err(_) => f64::NAN,
        }
    };
    let refined = map_indexed(brackets.len(), opts.execution, |b| {
        let (lo, hi, mlo, mhi) = brackets[b];
        illinois(&miss_angle, lo, hi, mlo, mhi, opts.refine_tol, 1e-15)
    });
    let mut roots: Vec<f64> = Vec::new();
    for r in refined {
        if !roots.iter().any(|q| (q - r).abs() < 1e-9) {
            roots.push(r);
        }
    }
    if roots.len() > 1 {
        return Err(Error::NonAdmissible {
            from: fan.source_angle,
            to: target_angle,
            branches: roots.len(),
        });
    }
    let theta = roots[0];
    let path = launch(spec, fan.source_angle, theta, opts)?;
    let target = boundary_point(radius, target_angle);
    let exit = path.exit_point();
    let miss = (target - exit).norm();
    if !(miss <= opts.miss_tol * radius) {
        return Err(Error::NotConverged {
            miss,
            tolerance: opts.miss_tol * radius,
        });
    }
    // d(exit -> target) to first order is F_y(exit, v) . (target - exit)
    let v = path.exit_velocity();
    let a = spec.alpha().matrix(&exit);
    let av = a * v;
    let fy = av / v.dot(&av).sqrt() + spec.beta().value(&exit);
    let distance = path.f_length + fy.dot(&(target - exit));
    Ok(ShootingResult {
        path,
        angle: theta,
        miss,
        branches: 1,
        distance,
    })
}

/// Two-point boundary problem between boundary points `x` and `x_prime`.
pub fn solve_bvp(
    spec: &RandersSpec<2>,
    x: &Point<2>,
    x_prime: &Point<2>,
    opts: &ShootingOptions,
) -> Result<ShootingResult> {
    let radius = spec.domain().radius;
    for p in [x, x_prime] {
        if (p.norm() - radius).abs() > 1e-9 * radius {
            return Err(Error::InvalidArgument(format!(
                "point {:?} is not on the boundary circle",
                p.as_slice()
            )));
        }
    }
    if (x - x_prime).norm() <= 1e-12 * radius {
        return Err(Error::Degenerate("source and target coincide".into()));
    }
    let fan = shoot_fan(spec, point_angle(x), opts)?;
    solve_from_fan(spec, &fan, point_angle(x_prime), opts)
}

/// Compares a geodesic with the geodesic joining its endpoints backwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReversalReport {
    /// Hausdorff distance between the two point sets.
    pub hausdorff: f64,
    pub forward_length: f64,
    pub reverse_length: f64,
}

pub fn reversed_geodesic_check(
    spec: &RandersSpec<2>,
    path: &GeodesicPath<2>,
    opts: &ShootingOptions,
) -> Result<ReversalReport> {
    path.check_tag(spec)?;
    let radius = spec.domain().radius;
    let start = path.start();
    let end = path.exit_point();
    let back = solve_bvp(
        spec,
        &(end * (radius / end.norm())),
        &(start * (radius / start.norm())),
        opts,
    )?;
    Ok(ReversalReport {
        hausdorff: hausdorff_distance(path, &back.path),
        forward_length: path.f_length,
        reverse_length: back.distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::{MetricField, OneForm, ScalarField};
    use crate::finsler::{curve_length, Domain, Polyline};
    use rand::{Rng, SeedableRng};

    fn disk() -> Domain {
        Domain::unit_disk()
    }

    fn opts() -> ShootingOptions {
        ShootingOptions::for_radius(1.0)
    }

    fn wind() -> RandersSpec {
        let lam: f64 = 0.75;
        RandersSpec::new(
            disk(),
            MetricField::Matrix {
                upper: vec![
                    ScalarField::Constant(1.0 / lam + 0.25 / (lam * lam)),
                    ScalarField::Constant(0.0),
                    ScalarField::Constant(1.0 / lam),
                ],
            },
            OneForm::Constant(vec![-0.5 / lam, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn euclidean_diameter() {
        let f = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let r = solve_bvp(&f, &Vector2::new(-1.0, 0.0), &Vector2::new(1.0, 0.0), &opts()).unwrap();
        assert_eq!(r.branches, 1);
        assert!((r.distance - 2.0).abs() < 1e-10);
        assert!(r.angle.abs() < 1e-9);
        assert!(r.miss <= 1e-8);
    }

    #[test]
    fn constant_wind_chords() {
        let f = wind();
        let a = solve_bvp(&f, &Vector2::new(-1.0, 0.0), &Vector2::new(1.0, 0.0), &opts()).unwrap();
        let b = solve_bvp(&f, &Vector2::new(1.0, 0.0), &Vector2::new(-1.0, 0.0), &opts()).unwrap();
        assert!((a.distance - 4.0 / 3.0).abs() < 1e-9, "{}", a.distance);
        assert!((b.distance - 4.0).abs() < 1e-9, "{}", b.distance);
        // an oblique chord: net speed along unit chord direction u is
        // s with |s u - W| = 1, i.e. s = W.u + sqrt(1 - |W|^2 + (W.u)^2)
        let (p, q) = (boundary_point(1.0, 0.4), boundary_point(1.0, 2.9));
        let u = (q - p).normalize();
        let w = Vector2::new(0.5, 0.0);
        let s = w.dot(&u) + (1.0 - w.norm_squared() + w.dot(&u).powi(2)).sqrt();
        let r = solve_bvp(&f, &p, &q, &opts()).unwrap();
        assert!((r.distance - (q - p).norm() / s).abs() < 1e-9);
    }

    #[test]
    fn distance_beats_competitor_polylines() {
        let f = RandersSpec::new(
            disk(),
            MetricField::Conformal {
                speed: ScalarField::Expr(Expr::parse("1 + 0.2*(x1^2 + x2^2)").unwrap()),
            },
            OneForm::Gradient(ScalarField::Expr(Expr::parse("0.1*x1").unwrap())),
        )
        .unwrap();
        let (p, q) = (boundary_point(1.0, 0.3), boundary_point(1.0, 3.5));
        let r = solve_bvp(&f, &p, &q, &opts()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let mut pts = vec![p];
            for k in 1..8 {
                let t = k as f64 / 8.0;
                let base = p * (1.0 - t) + q * t;
                let jitter = Vector2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                let c = base + jitter;
                pts.push(if c.norm() < 0.99 { c } else { base });
            }
            pts.push(q);
            let l = curve_length(&f, &Polyline(pts)).unwrap();
            assert!(r.distance <= l.total + 1e-12);
        }
    }

    #[test]
    fn exact_forms_keep_the_point_set() {
        let base = RandersSpec::new(
            disk(),
            MetricField::Conformal {
                speed: ScalarField::Expr(Expr::parse("1 + 0.2*(x1^2 + x2^2)").unwrap()),
            },
            OneForm::Gradient(ScalarField::Expr(Expr::parse("0.1*x1").unwrap())),
        )
        .unwrap();
        let bumped = base
            .with_beta(base.beta().plus(OneForm::Gradient(ScalarField::Bump {
                amplitude: 0.3,
                radius: 1.0,
            })))
            .unwrap();
        let (p, q) = (boundary_point(1.0, 0.2), boundary_point(1.0, 2.6));
        let a = solve_bvp(&base, &p, &q, &opts()).unwrap();
        let b = solve_bvp(&bumped, &p, &q, &opts()).unwrap();
        assert!(hausdorff_distance(&a.path, &b.path) < 1e-6);
        assert!((a.distance - b.distance).abs() < 2e-8, "{}", a.distance - b.distance);
        let rev = reversed_geodesic_check(&bumped, &b.path, &opts()).unwrap();
        assert!(rev.hausdorff < 1e-6);
    }

    #[test]
    fn rotational_form_breaks_reversibility() {
        // at full strength geodesics are unit circles and the unit disk is
        // not admissible: two branches below the antipode, none beyond
        let f = RandersSpec::new(disk(), MetricField::Euclidean, OneForm::Rotational { strength: 1.0 }).unwrap();
        let (p, q) = (boundary_point(1.0, 0.0), boundary_point(1.0, 2.0));
        assert!(matches!(solve_bvp(&f, &p, &q, &opts()), Err(Error::NonAdmissible { branches: 2, .. })));
        assert!(matches!(
            solve_bvp(&f, &p, &boundary_point(1.0, 4.0), &opts()),
            Err(Error::Connectivity { .. })
        ));
        let f = RandersSpec::new(disk(), MetricField::Euclidean, OneForm::Rotational { strength: 0.5 }).unwrap();
        let r = solve_bvp(&f, &p, &q, &opts()).unwrap();
        let rev = reversed_geodesic_check(&f, &r.path, &opts()).unwrap();
        assert!(rev.hausdorff > 1e-3, "{}", rev.hausdorff);
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let f = wind();
        let mut o = opts();
        o.execution = Execution::Serial;
        let (p, q) = (boundary_point(1.0, 1.0), boundary_point(1.0, 4.0));
        let s = solve_bvp(&f, &p, &q, &o).unwrap();
        o.execution = Execution::Parallel;
        let t = solve_bvp(&f, &p, &q, &o).unwrap();
        assert_eq!(s.distance.to_bits(), t.distance.to_bits());
        assert_eq!(s.angle.to_bits(), t.angle.to_bits());
    }

    #[test]
    fn short_chords_and_bad_input() {
        let f = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let (p, q) = (boundary_point(1.0, 0.0), boundary_point(1.0, 2e-3));
        let r = solve_bvp(&f, &p, &q, &opts()).unwrap();
        assert!((r.distance - (q - p).norm()).abs() < 1e-10);
        assert!(solve_bvp(&f, &p, &p, &opts()).is_err());
        assert!(solve_bvp(&f, &Vector2::new(0.5, 0.0), &q, &opts()).is_err());
    }
}
