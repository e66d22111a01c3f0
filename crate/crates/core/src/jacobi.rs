//! Conjugate-point probe for conformal metrics `c^-2 e` in the disk.
//!
//! Along a unit-speed geodesic the normal Jacobi field solves
//! `J'' + K J = 0` with Gaussian curvature `K = c (lap c) - |grad c|^2`.
//! A fan of geodesics from boundary points is scanned for zeros of `J`.
//! Finding none is evidence, not proof.

use crate::error::{Error, Result};
use crate::field::{MetricField, Point, ScalarField};
use crate::finsler::{Domain, RandersSpec};
use crate::geodesic::{integrate_geodesic, GeodesicOptions, GeodesicPath};
use crate::ode::{Dopri5, OdeOptions};
use crate::parallel::{map_indexed, Execution};
use nalgebra::{Vector2, SVector};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Gaussian curvature of `c^-2 e`.
pub fn gaussian_curvature(speed: &ScalarField, x: &Point<2>) -> f64 {
    let j = speed.jet2(x);
    j.value * j.hess.trace() - j.grad.norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePoint {
    pub source_angle: f64,
    /// Launch angle from the inward normal.
    pub theta: f64,
    /// Parameter of the first zero of `J`.
    pub t: f64,
    pub point: Point<2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateScan {
    pub rays: usize,
    /// First conjugate point on each ray that has one.
    pub conjugate_points: Vec<ConjugatePoint>,
    /// Smallest `J(t) / t` seen on rays without a conjugate point.
    pub min_ratio: f64,
}

impl ConjugateScan {
    pub fn none_found(&self) -> bool {
        self.conjugate_points.is_empty()
    }
}

fn jacobi_along(speed: &ScalarField, path: &GeodesicPath<2>, h_max: f64) -> (Option<f64>, f64) {
    let rhs = |t: f64, s: &SVector<f64, 2>| {
        let k = gaussian_curvature(speed, &path.position(t));
        SVector::<f64, 2>::new(s[1], -k * s[0])
    };
    let opts = OdeOptions {
        h_max,
        h_init: 1e-4 * h_max,
        ..OdeOptions::default()
    };
    let mut ode = Dopri5::new(rhs, 0.0, SVector::<f64, 2>::new(0.0, 1.0), opts);
    let end = path.exit_time;
    let mut min_ratio = f64::INFINITY;
    while ode.t < end {
        let (t0, y0) = (ode.t, ode.y);
        if !ode.advance() {
            break;
        }
        if ode.t > end {
            ode.t = t0;
            ode.y = y0;
            let (y, _) = ode.trial(end - t0);
            ode.y = y;
            ode.t = end;
        }
        if ode.y[0] <= 0.0 {
            // linear estimate of the crossing inside the last step
            let t = t0 + (ode.t - t0) * y0[0] / (y0[0] - ode.y[0]);
            return (Some(t), min_ratio);
        }
        min_ratio = min_ratio.min(ode.y[0] / ode.t);
    }
    (None, min_ratio)
}

/// Scans `fan_size` geodesics from each of `sources` equally spaced boundary
/// points (one suffices for a radial profile).
pub fn conjugate_point_scan(
    domain: &Domain,
    speed: &ScalarField,
    sources: usize,
    fan_size: usize,
    exec: Execution,
) -> Result<ConjugateScan> {
    if sources == 0 || fan_size == 0 {
        return Err(Error::InvalidArgument("empty conjugate-point fan".into()));
    }
    let spec = RandersSpec::riemannian(*domain, MetricField::Conformal { speed: speed.clone() })?;
    let radius = domain.radius;
    let opts = GeodesicOptions::for_radius(radius);
    let jobs = sources * fan_size;
    let out = map_indexed(jobs, exec, |k| -> Result<(Option<ConjugatePoint>, f64)> {
        let source_angle = TAU * (k / fan_size) as f64 / sources as f64;
        let theta = -FRAC_PI_2 + ((k % fan_size) as f64 + 0.5) * PI / fan_size as f64;
        let n = -Vector2::new(source_angle.cos(), source_angle.sin());
        let t = Vector2::new(-n[1], n[0]);
        let x0 = -n * radius;
        let path = integrate_geodesic(&spec, &x0, &(n * theta.cos() + t * theta.sin()), &opts)?;
        let (zero, ratio) = jacobi_along(speed, &path, opts.ode.h_max);
        Ok((
            zero.map(|tz| ConjugatePoint {
                source_angle,
                theta,
                t: tz,
                point: path.position(tz),
            }),
            ratio,
        ))
    });
    let mut scan = ConjugateScan {
        rays: jobs,
        conjugate_points: Vec::new(),
        min_ratio: f64::INFINITY,
    };
    for r in out {
        let (cp, ratio) = r?;
        match cp {
            Some(p) => scan.conjugate_points.push(p),
            None => scan.min_ratio = scan.min_ratio.min(ratio),
        }
    }
    Ok(scan)
}
