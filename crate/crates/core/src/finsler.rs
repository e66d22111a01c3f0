//! Riemannian norms, 1-forms and Randers norms `F = alpha + beta`.
//!
//! Pointwise evaluation, dual norms, the fundamental tensor, the norm axioms
//! and length functionals. Everything here is dimension-generic.

use crate::error::{Error, Result};
use crate::field::{MetricField, OneForm, Point};
use nalgebra::{SMatrix, SVector};
use sha2::{Digest, Sha256};

/// Relative slack allowed when deciding whether a point is in the closed domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Number of interior points used to certify `||beta|| < 1`.
pub const VALIDITY_GRID_POINTS: usize = 1000;

/// Closed ball `B(0, R)` in `R^n`, optionally with a hole (an annulus in the
/// plane), which the rigidity pipeline refuses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub dimension: usize,
    pub radius: f64,
    pub inner_radius: f64,
}

impl Domain {
    pub fn ball(dimension: usize, radius: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            dimension,
            radius,
            inner_radius: 0.0,
        })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::ball(2, radius)
    }

    pub fn unit_disk() -> Self {
        Self::disk(1.0).expect("unit disk")
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self> {
        let mut d = Self::disk(outer)?;
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::InvalidArgument(format!(
                "annulus needs 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        d.inner_radius = inner;
        Ok(d)
    }

    pub fn is_simply_connected(&self) -> bool {
        self.inner_radius == 0.0
    }

    pub fn contains<const D: usize>(&self, x: &Point<D>) -> bool {
        let r = x.norm();
        r <= self.radius * (1.0 + DOMAIN_SLACK) && r >= self.inner_radius * (1.0 - DOMAIN_SLACK)
    }

    pub fn check<const D: usize>(&self, x: &Point<D>) -> Result<()> {
        if D != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                got: D,
            });
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: x.iter().copied().collect(),
                radius: self.radius,
            })
        }
    }

    /// Deterministic quasi-uniform interior points: a sunflower spiral in the
    /// plane, a Halton sequence restricted to the ball otherwise.
    pub fn probe_grid<const D: usize>(&self, count: usize) -> Vec<Point<D>> {
        let r_in = self.inner_radius;
        let r_out = self.radius * (1.0 - 1e-6);
        if D == 2 {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let f = (k as f64 + 0.5) / count as f64;
                    let r = (r_in * r_in + f * (r_out * r_out - r_in * r_in)).sqrt();
                    let t = k as f64 * golden;
                    let mut p = Point::<D>::zeros();
                    p[0] = r * t.cos();
                    p[1] = r * t.sin();
                    p
                })
                .collect()
        } else {
            const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];
            let mut out = Vec::with_capacity(count);
            let mut k = 1u64;
            while out.len() < count {
                let p = Point::<D>::from_fn(|i, _| {
                    (2.0 * radical_inverse(k, PRIMES[i % PRIMES.len()]) - 1.0) * r_out
                });
                let n = p.norm();
                if n <= r_out && n >= r_in {
                    out.push(p);
                }
                k += 1;
            }
            out
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// `sqrt(g_ij(x) y^i y^j)`.
pub fn eval_riemannian_norm<const D: usize>(
    g: &MetricField,
    domain: &Domain,
    x: &Point<D>,
    y: &SVector<f64, D>,
) -> Result<f64> {
    domain.check(x)?;
    Ok(quadratic_norm(&g.matrix(x), y))
}

/// `sqrt(g^ij(x) w_i w_j)`, the dual of a Riemannian norm.
pub fn dual_norm_riemannian<const D: usize>(
    g: &MetricField,
    domain: &Domain,
    x: &Point<D>,
    omega: &SVector<f64, D>,
) -> Result<f64> {
    domain.check(x)?;
    let inv = g
        .matrix(x)
        .try_inverse()
        .ok_or_else(|| Error::Convexity {
            point: x.iter().copied().collect(),
        })?;
    Ok(quadratic_norm(&inv, omega))
}

fn quadratic_norm<const D: usize>(m: &SMatrix<f64, D, D>, y: &SVector<f64, D>) -> f64 {
    y.dot(&(m * y)).max(0.0).sqrt()
}

/// A Randers norm `F(x, y) = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandersSpec<const D: usize = 2> {
    domain: Domain,
    alpha: MetricField,
    beta: OneForm,
    margin: f64,
    tag: String,
}

impl<const D: usize> RandersSpec<D> {
    /// Builds a spec, refusing it unless `||beta||_alpha < 1` on the probe grid.
    pub fn new(domain: Domain, alpha: MetricField, beta: OneForm) -> Result<Self> {
        let spec = Self::new_unchecked(domain, alpha, beta)?;
        if spec.margin > 0.0 {
            Ok(spec)
        } else {
            Err(Error::InvalidNorm {
                margin: spec.margin,
            })
        }
    }

    /// Builds a spec without refusing a non-positive margin. Such a spec can be
    /// inspected by [`validate_norm`] but not evaluated through the checked API.
    pub fn new_unchecked(domain: Domain, alpha: MetricField, beta: OneForm) -> Result<Self> {
        if domain.dimension != D {
            return Err(Error::Dimension {
                expected: domain.dimension,
                got: D,
            });
        }
        let margin = validity_margin::<D>(&domain, &alpha, &beta);
        let tag = spec_hash(&format!("{domain:?}|{alpha:?}|{beta:?}"));
        Ok(Self {
            domain,
            alpha,
            beta,
            margin,
            tag,
        })
    }

    pub fn riemannian(domain: Domain, alpha: MetricField) -> Result<Self> {
        Self::new(domain, alpha, OneForm::Zero)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn alpha(&self) -> &MetricField {
        &self.alpha
    }

    pub fn beta(&self) -> &OneForm {
        &self.beta
    }

    /// `1 - sup ||beta||_{alpha*}` over the fixed interior grid.
    pub fn validity_margin(&self) -> f64 {
        self.margin
    }

    pub fn is_valid(&self) -> bool {
        self.margin > 0.0
    }

    pub fn is_reversible(&self) -> bool {
        self.beta.is_zero()
    }

    /// Short content hash identifying the norm.
    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Same Riemannian part with `beta` replaced.
    pub fn with_beta(&self, beta: OneForm) -> Result<Self> {
        Self::new(self.domain, self.alpha.clone(), beta)
    }

    pub fn eval(&self, x: &Point<D>, y: &SVector<f64, D>) -> Result<f64> {
        if !self.is_valid() {
            return Err(Error::InvalidNorm {
                margin: self.margin,
            });
        }
        self.domain.check(x)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub fn eval_unchecked(&self, x: &Point<D>, y: &SVector<f64, D>) -> f64 {
        let (a, b) = self.parts(x, y);
        a + b
    }

    /// `(alpha(x, y), beta(x)(y))`.
    pub fn parts(&self, x: &Point<D>, y: &SVector<f64, D>) -> (f64, f64) {
        let a = quadratic_norm(&self.alpha.matrix(x), y);
        let b = self.beta.value(x).dot(y);
        (a, b)
    }

    /// `F*(x, omega) = sup { omega(y) : F(x, y) = 1 }` by direct maximization
    /// over directions.
    pub fn dual_norm(&self, x: &Point<D>, omega: &SVector<f64, D>) -> Result<f64> {
        self.domain.check(x)?;
        if omega.norm() == 0.0 {
            return Ok(0.0);
        }
        let ratio = |u: &SVector<f64, D>| omega.dot(u) / self.eval_unchecked(x, u);
        if D == 2 {
            let f = |t: f64| {
                let mut u = SVector::<f64, D>::zeros();
                u[0] = t.cos();
                u[1] = t.sin();
                ratio(&u)
            };
            let n = 720;
            let step = std::f64::consts::TAU / n as f64;
            let best = (0..n)
                .map(|k| k as f64 * step)
                .max_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap();
            let t = golden_max(f, best - step, best + step, 1e-12);
            Ok(f(t))
        } else {
            let a_inv = self
                .alpha
                .matrix(x)
                .try_inverse()
                .unwrap_or_else(SMatrix::identity);
            let mut seeds: Vec<SVector<f64, D>> = vec![a_inv * omega];
            for i in 0..D {
                let mut e = SVector::zeros();
                e[i] = 1.0;
                seeds.push(e);
                seeds.push(-e);
            }
            let mut u = seeds
                .into_iter()
                .map(|s| s.normalize())
                .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
                .unwrap();
            let mut step = 0.1;
            for _ in 0..10_000 {
                let h = 1e-7;
                let grad = SVector::<f64, D>::from_fn(|i, _| {
                    let mut p = u;
                    let mut m = u;
                    p[i] += h;
                    m[i] -= h;
                    (ratio(&p) - ratio(&m)) / (2.0 * h)
                });
                let tangent = grad - u * u.dot(&grad);
                if tangent.norm() < 1e-12 {
                    break;
                }
                let cand = (u + tangent * step).normalize();
                if ratio(&cand) > ratio(&u) {
                    u = cand;
                    step *= 1.2;
                } else {
                    step *= 0.5;
                    if step < 1e-16 {
                        break;
                    }
                }
            }
            Ok(ratio(&u))
        }
    }

    /// The reversed norm `F(x, -y)`: same Riemannian part, negated 1-form.
    pub fn reverse_norm(&self) -> Self {
        let beta = self.beta.negated();
        let tag = spec_hash(&format!("{:?}|{:?}|{:?}", self.domain, self.alpha, beta));
        Self {
            domain: self.domain,
            alpha: self.alpha.clone(),
            beta,
            margin: self.margin,
            tag,
        }
    }

    /// `g_ij(x, y) = 1/2 d^2 F^2 / dy^i dy^j` by second-order central differences.
    pub fn fundamental_tensor(
        &self,
        x: &Point<D>,
        y: &SVector<f64, D>,
    ) -> Result<SMatrix<f64, D, D>> {
        let ny = y.norm();
        if ny == 0.0 {
            return Err(Error::Degenerate(
                "fundamental tensor at y = 0 (F is not smooth on the zero section)".into(),
            ));
        }
        let h = 1e-4 * ny.max(1.0);
        let f2 = |v: &SVector<f64, D>| {
            let f = self.eval_unchecked(x, v);
            f * f
        };
        let e = |i: usize| {
            let mut v = SVector::<f64, D>::zeros();
            v[i] = h;
            v
        };
        let f0 = f2(y);
        let mut g = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            let ei = e(i);
            g[(i, i)] = 0.5 * (f2(&(y + ei)) - 2.0 * f0 + f2(&(y - ei))) / (h * h);
            for j in (i + 1)..D {
                let ej = e(j);
                let v = (f2(&(y + ei + ej)) - f2(&(y + ei - ej)) - f2(&(y - ei + ej))
                    + f2(&(y - ei - ej)))
                    / (4.0 * h * h);
                g[(i, j)] = 0.5 * v;
                g[(j, i)] = 0.5 * v;
            }
        }
        Ok(g)
    }

    /// Analytic fundamental tensor together with `F`, `F_y`, and the
    /// Riemannian data needed by the spray.
    pub(crate) fn fundamental_tensor_exact(
        &self,
        a: &SMatrix<f64, D, D>,
        b: &SVector<f64, D>,
        y: &SVector<f64, D>,
    ) -> (f64, f64, SVector<f64, D>, SVector<f64, D>, SMatrix<f64, D, D>) {
        let ay = a * y;
        let alpha = y.dot(&ay).sqrt();
        let ell = ay / alpha;
        let f = alpha + b.dot(y);
        let fy = ell + b;
        let fyy = (a - ell * ell.transpose()) / alpha;
        let g = fyy * f + fy * fy.transpose();
        (f, alpha, ell, fy, g)
    }
}

fn validity_margin<const D: usize>(domain: &Domain, alpha: &MetricField, beta: &OneForm) -> f64 {
    let mut sup: f64 = 0.0;
    for x in domain.probe_grid::<D>(VALIDITY_GRID_POINTS) {
        let a = alpha.matrix(&x);
        let min_eig = min_eigenvalue(&a);
        if !(min_eig > 0.0) {
            return f64::NEG_INFINITY;
        }
        if beta.is_zero() {
            continue;
        }
        let inv = a.try_inverse().expect("positive definite");
        sup = sup.max(quadratic_norm(&inv, &beta.value(&x)));
    }
    1.0 - sup
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<const D: usize>(m: &SMatrix<f64, D, D>) -> f64 {
    nalgebra::DMatrix::from_column_slice(D, D, m.as_slice())
        .symmetric_eigenvalues()
        .min()
}

pub(crate) fn spec_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - (b - a) * invphi;
    let mut d = a + (b - a) * invphi;
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * invphi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * invphi;
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Points and tangent directions at which the norm axioms are probed.
#[derive(Debug, Clone)]
pub struct ProbeSet<const D: usize> {
    pub points: Vec<Point<D>>,
    pub directions: Vec<SVector<f64, D>>,
}

impl<const D: usize> ProbeSet<D> {
    /// `n_points` grid points, each with `n_directions` unit directions (on
    /// the circle in the plane, signed axes and diagonals otherwise).
    pub fn standard(domain: &Domain, n_points: usize, n_directions: usize) -> Self {
        let points = domain.probe_grid::<D>(n_points);
        let directions = if D == 2 {
            (0..n_directions)
                .map(|k| {
                    let t = std::f64::consts::TAU * (k as f64 + 0.25) / n_directions as f64;
                    let mut v = SVector::zeros();
                    v[0] = t.cos();
                    v[1] = t.sin();
                    v
                })
                .collect()
        } else {
            let mut dirs = Vec::new();
            for i in 0..D {
                for s in [1.0, -1.0] {
                    let mut v = SVector::zeros();
                    v[i] = s;
                    dirs.push(v);
                }
            }
            dirs.push(SVector::<f64, D>::repeat(1.0).normalize());
            dirs.push(SVector::<f64, D>::repeat(-1.0).normalize());
            dirs.truncate(n_directions.max(1));
            dirs
        };
        Self { points, directions }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Positivity,
    Homogeneity,
    Convexity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFailure<const D: usize> {
    pub point: Point<D>,
    pub direction: SVector<f64, D>,
    pub axiom: Axiom,
    pub value: f64,
}

/// Outcome of probing the Finsler norm axioms.
#[derive(Debug, Clone)]
pub struct ValidityReport<const D: usize> {
    pub probes: usize,
    /// Smallest `F(x, u)` over unit probe directions.
    pub min_value: f64,
    /// Largest `|F(x, k y) - k F(x, y)| / (k |F(x, y)|)`.
    pub worst_homogeneity: f64,
    /// Smallest eigenvalue of the fundamental tensor.
    pub min_convexity: f64,
    /// Grid margin `1 - sup ||beta||`.
    pub margin: f64,
    pub failures: Vec<ProbeFailure<D>>,
}

impl<const D: usize> ValidityReport<D> {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.margin > 0.0
    }

    pub fn failed_axioms(&self) -> Vec<Axiom> {
        let mut v: Vec<Axiom> = Vec::new();
        for f in &self.failures {
            if !v.contains(&f.axiom) {
                v.push(f.axiom);
            }
        }
        v
    }
}

pub const HOMOGENEITY_TOL: f64 = 1e-10;

/// Probes positivity, positive homogeneity (two scalings) and convexity.
pub fn validate_norm<const D: usize>(
    spec: &RandersSpec<D>,
    probes: &ProbeSet<D>,
) -> Result<ValidityReport<D>> {
    if probes.points.is_empty() || probes.directions.is_empty() {
        return Err(Error::InvalidArgument("probe set is empty".into()));
    }
    let mut report = ValidityReport {
        probes: probes.points.len() * probes.directions.len(),
        min_value: f64::INFINITY,
        worst_homogeneity: 0.0,
        min_convexity: f64::INFINITY,
        margin: spec.validity_margin(),
        failures: Vec::new(),
    };
    for x in &probes.points {
        spec.domain().check(x)?;
        for y in &probes.directions {
            let fail = |axiom, value| ProbeFailure {
                point: *x,
                direction: *y,
                axiom,
                value,
            };
            let f = spec.eval_unchecked(x, y);
            report.min_value = report.min_value.min(f);
            if !(f > 0.0) {
                report.failures.push(fail(Axiom::Positivity, f));
            }
            for k in [0.5, 2.0] {
                let dev = (spec.eval_unchecked(x, &(y * k)) - k * f).abs() / (k * f.abs()).max(f64::MIN_POSITIVE);
                report.worst_homogeneity = report.worst_homogeneity.max(dev);
                if dev > HOMOGENEITY_TOL {
                    report.failures.push(fail(Axiom::Homogeneity, dev));
                }
            }
            let g = spec.fundamental_tensor(x, y)?;
            let min_eig = min_eigenvalue(&g);
            report.min_convexity = report.min_convexity.min(min_eig);
            if !(min_eig > 0.0) {
                report.failures.push(fail(Axiom::Convexity, min_eig));
            }
        }
    }
    Ok(report)
}

/// `max_{i<j} |d_i beta_j - d_j beta_i|` over the probes.
pub fn closedness_residual<const D: usize>(beta: &OneForm, probes: &[Point<D>]) -> f64 {
    probes
        .iter()
        .map(|x| {
            let (_, j) = beta.jet(x);
            let mut worst: f64 = 0.0;
            for i in 0..D {
                for k in (i + 1)..D {
                    worst = worst.max((j[(k, i)] - j[(i, k)]).abs());
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// A curve evaluated segment by segment on local parameters `s in [0, 1]`.
pub trait Curve<const D: usize> {
    fn segment_count(&self) -> usize;
    /// Position and derivative with respect to `s`.
    fn segment_eval(&self, segment: usize, s: f64) -> (Point<D>, SVector<f64, D>);
    /// Parameter value of segment start, used in diagnostics.
    fn segment_parameter(&self, segment: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<const D: usize>(pub Vec<Point<D>>);

impl<const D: usize> Polyline<D> {
    pub fn reversed(&self) -> Self {
        Polyline(self.0.iter().rev().copied().collect())
    }
}

impl<const D: usize> Curve<D> for Polyline<D> {
    fn segment_count(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
    fn segment_eval(&self, k: usize, s: f64) -> (Point<D>, SVector<f64, D>) {
        let a = self.0[k];
        let b = self.0[k + 1];
        (a + (b - a) * s, b - a)
    }
    fn segment_parameter(&self, k: usize) -> f64 {
        k as f64
    }
}

/// `L_F = L_alpha + int beta`, each reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthParts {
    pub total: f64,
    pub riemannian: f64,
    pub oneform: f64,
}

/// Gauss-Legendre nodes and weights of order 4 on `[0, 1]`.
pub(crate) fn gauss_legendre_4() -> [(f64, f64); 4] {
    let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
    let wa = (18.0 + 30f64.sqrt()) / 36.0;
    let wb = (18.0 - 30f64.sqrt()) / 36.0;
    [
        (0.5 * (1.0 - b), 0.5 * wb),
        (0.5 * (1.0 - a), 0.5 * wa),
        (0.5 * (1.0 + a), 0.5 * wa),
        (0.5 * (1.0 + b), 0.5 * wb),
    ]
}

/// Length of a curve by composite fourth-order Gauss-Legendre quadrature.
pub fn curve_length<const D: usize, C: Curve<D> + ?Sized>(
    spec: &RandersSpec<D>,
    curve: &C,
) -> Result<LengthParts> {
    let nodes = gauss_legendre_4();
    let mut riemannian = 0.0;
    let mut oneform = 0.0;
    for k in 0..curve.segment_count() {
        for s in [0.0, 1.0] {
            let (p, _) = curve.segment_eval(k, s);
            if !spec.domain().contains(&p) {
                return Err(Error::CurveOutsideDomain {
                    parameter: curve.segment_parameter(k) + s,
                });
            }
        }
        for &(s, w) in &nodes {
            let (p, v) = curve.segment_eval(k, s);
            let (a, b) = spec.parts(&p, &v);
            riemannian += w * a;
            oneform += w * b;
        }
    }
    Ok(LengthParts {
        total: riemannian + oneform,
        riemannian,
        oneform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::{ScalarField, VectorField};
    use nalgebra::{Matrix2, Vector2};

    fn disk() -> Domain {
        Domain::unit_disk()
    }

    fn const_beta(b: [f64; 2]) -> RandersSpec {
        RandersSpec::new(disk(), MetricField::Euclidean, OneForm::Constant(b.to_vec())).unwrap()
    }

    #[test]
    fn riemannian_norm_examples() {
        let x = Vector2::new(0.1, 0.2);
        let y = Vector2::new(3.0, 4.0);
        assert_eq!(
            eval_riemannian_norm(&MetricField::Euclidean, &disk(), &x, &y).unwrap(),
            5.0
        );
        let conf = MetricField::Conformal {
            speed: ScalarField::Constant(2.0),
        };
        assert_eq!(eval_riemannian_norm(&conf, &disk(), &x, &y).unwrap(), 2.5);
        assert_eq!(
            eval_riemannian_norm(&MetricField::Euclidean, &disk(), &x, &Vector2::zeros()).unwrap(),
            0.0
        );
        assert!(matches!(
            eval_riemannian_norm(&MetricField::Euclidean, &disk(), &Vector2::new(2.0, 0.0), &y),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn randers_direct_formula() {
        let f = const_beta([0.5, 0.0]);
        let x = Vector2::zeros();
        assert_eq!(f.eval(&x, &Vector2::new(1.0, 0.0)).unwrap(), 1.5);
        assert_eq!(f.eval(&x, &Vector2::new(-1.0, 0.0)).unwrap(), 0.5);
        assert!((f.validity_margin() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_spec_is_refused() {
        let r = RandersSpec::<2>::new(disk(), MetricField::Euclidean, OneForm::Constant(vec![1.1, 0.0]));
        assert!(matches!(r, Err(Error::InvalidNorm { .. })));
        let raw = RandersSpec::<2>::new_unchecked(
            disk(),
            MetricField::Euclidean,
            OneForm::Constant(vec![1.1, 0.0]),
        )
        .unwrap();
        assert!(matches!(
            raw.eval(&Vector2::zeros(), &Vector2::new(1.0, 0.0)),
            Err(Error::InvalidNorm { .. })
        ));
    }

    #[test]
    fn reversible_case_matches_riemannian_norm() {
        let g = MetricField::Conformal {
            speed: ScalarField::Expr(Expr::parse("2 - r").unwrap()),
        };
        let f = RandersSpec::riemannian(disk(), g.clone()).unwrap();
        assert!(f.is_reversible());
        for x in disk().probe_grid::<2>(20) {
            let y = Vector2::new(0.3, -1.2);
            assert_eq!(
                f.eval(&x, &y).unwrap(),
                eval_riemannian_norm(&g, &disk(), &x, &y).unwrap()
            );
        }
    }

    #[test]
    fn dual_norm_examples() {
        let x = Vector2::new(0.2, 0.1);
        let w = Vector2::new(3.0, 4.0);
        assert!((dual_norm_riemannian(&MetricField::Euclidean, &disk(), &x, &w).unwrap() - 5.0).abs() < 1e-15);
        let conf = MetricField::Conformal {
            speed: ScalarField::Constant(2.0),
        };
        assert!(
            (dual_norm_riemannian(&conf, &disk(), &x, &Vector2::new(1.0, 0.0)).unwrap() - 2.0).abs()
                < 1e-15
        );
        // brute force over 10^4 directions
        let f = const_beta([0.5, 0.0]);
        let omega = Vector2::new(1.0, 0.0);
        let brute = (0..10_000)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 1e4;
                let u = Vector2::new(t.cos(), t.sin());
                omega.dot(&u) / f.eval_unchecked(&x, &u)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let d = f.dual_norm(&x, &omega).unwrap();
        assert!(d >= brute - 1e-12);
        assert!((d - brute).abs() < 1e-6, "{d} vs {brute}");
        // u1 / (1 + u1/2) increases with u1, so the sup sits at u = (1, 0)
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fundamental_tensor_cases() {
        let e = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let g = e
            .fundamental_tensor(&Vector2::new(0.1, 0.1), &Vector2::new(0.3, 2.0))
            .unwrap();
        assert!((g - Matrix2::identity()).norm() < 1e-6);
        assert!(matches!(
            e.fundamental_tensor(&Vector2::zeros(), &Vector2::zeros()),
            Err(Error::Degenerate(_))
        ));
        let general = RandersSpec::riemannian(
            disk(),
            MetricField::Matrix {
                upper: vec![
                    ScalarField::Constant(2.0),
                    ScalarField::Expr(Expr::parse("0.3*x1").unwrap()),
                    ScalarField::Constant(1.5),
                ],
            },
        )
        .unwrap();
        let x = Vector2::new(0.5, -0.2);
        let expect = general.alpha().matrix(&x);
        for k in 0..12 {
            let t = k as f64 * 0.5;
            let y = Vector2::new(t.cos(), t.sin()) * (0.5 + k as f64);
            let g = general.fundamental_tensor(&x, &y).unwrap();
            assert!((g - expect).amax() <= 1e-6, "{}", (g - expect).amax());
        }
        let r = const_beta([0.3, -0.4]);
        let y = Vector2::new(0.7, 0.2);
        let g1 = r.fundamental_tensor(&x, &y).unwrap();
        let g2 = r.fundamental_tensor(&x, &(y * 2.0)).unwrap();
        assert!((g1 - g2).amax() < 1e-6);
        let (a, b) = (r.alpha().matrix(&x), r.beta().value(&x));
        let (_, _, _, _, exact) = r.fundamental_tensor_exact(&a, &b, &y);
        assert!((g1 - exact).amax() < 1e-6);
    }

    #[test]
    fn validate_norm_cases() {
        let probes = ProbeSet::standard(&disk(), 40, 16);
        let e = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let rep = validate_norm(&e, &probes).unwrap();
        assert!(rep.passed());
        assert!((rep.min_convexity - 1.0).abs() < 1e-6);

        let strong = const_beta([0.9, 0.0]);
        let rep = validate_norm(&strong, &probes).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures.first());
        assert!(rep.min_convexity > 0.0);

        let bad = RandersSpec::<2>::new_unchecked(
            disk(),
            MetricField::Euclidean,
            OneForm::Constant(vec![1.1, 0.0]),
        )
        .unwrap();
        let rep = validate_norm(&bad, &probes).unwrap();
        assert!(!rep.passed());
        assert!(rep.failed_axioms().contains(&Axiom::Positivity));

        let empty = ProbeSet::<2> {
            points: vec![],
            directions: vec![],
        };
        assert!(validate_norm(&e, &empty).is_err());
    }

    #[test]
    fn closedness_examples() {
        let probes = disk().probe_grid::<2>(50);
        let exact = OneForm::Gradient(ScalarField::Expr(Expr::parse("1 - (x1^2 + x2^2)").unwrap()));
        assert!(closedness_residual(&exact, &probes) < 1e-14);
        let rot = OneForm::Rotational { strength: 1.0 };
        assert!((closedness_residual(&rot, &probes) - 1.0).abs() < 1e-15);
        assert_eq!(closedness_residual(&OneForm::Constant(vec![0.2, 0.3]), &probes), 0.0);
    }

    #[test]
    fn curve_length_examples() {
        let e = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let seg = Polyline(vec![Vector2::new(-1.0, 0.0), Vector2::new(1.0, 0.0)]);
        let l = curve_length(&e, &seg).unwrap();
        assert_eq!((l.total, l.riemannian, l.oneform), (2.0, 2.0, 0.0));

        let r = const_beta([-2.0 / 3.0, 0.0]);
        let fwd = curve_length(&r, &seg).unwrap();
        let back = curve_length(&r, &seg.reversed()).unwrap();
        assert_eq!(fwd.oneform, -back.oneform);
        assert!((fwd.riemannian - back.riemannian).abs() < 1e-15);

        let outside = Polyline(vec![Vector2::new(0.0, 0.0), Vector2::new(1.5, 0.0)]);
        assert!(matches!(
            curve_length(&e, &outside),
            Err(Error::CurveOutsideDomain { parameter }) if parameter == 1.0
        ));
    }

    #[test]
    fn reverse_norm_is_an_involution() {
        let f = RandersSpec::new(
            disk(),
            MetricField::Conformal {
                speed: ScalarField::Constant(1.2),
            },
            OneForm::Components(VectorField::Vortex { strength: 0.3 }),
        )
        .unwrap();
        let rf = f.reverse_norm();
        let rrf = rf.reverse_norm();
        for x in disk().probe_grid::<2>(30) {
            for k in 0..8 {
                let t = k as f64 * 0.8;
                let y = Vector2::new(t.cos(), t.sin());
                assert_eq!(rf.eval(&x, &y).unwrap(), f.eval(&x, &(-y)).unwrap());
                assert_eq!(rrf.eval(&x, &y).unwrap(), f.eval(&x, &y).unwrap());
            }
        }
        assert_eq!(rrf.tag(), f.tag());
        let e = RandersSpec::riemannian(disk(), MetricField::Euclidean).unwrap();
        let er = e.reverse_norm();
        let x = Vector2::new(0.1, 0.3);
        let y = Vector2::new(0.4, -0.9);
        assert_eq!(er.eval(&x, &y).unwrap(), e.eval(&x, &y).unwrap());
    }

    #[test]
    fn higher_dimensional_evaluation() {
        let d3 = Domain::ball(3, 1.0).unwrap();
        let f = RandersSpec::<3>::new(d3, MetricField::Euclidean, OneForm::Constant(vec![0.0, 0.0, 0.5])).unwrap();
        let x = nalgebra::Vector3::new(0.1, 0.2, 0.3);
        assert_eq!(f.eval(&x, &nalgebra::Vector3::new(0.0, 0.0, 2.0)).unwrap(), 3.0);
        let d = f.dual_norm(&x, &nalgebra::Vector3::new(0.0, 0.0, 1.0)).unwrap();
        // u3 / (1 + u3/2) is maximal at u = e3
        assert!((d - 2.0 / 3.0).abs() < 1e-9, "{d}");
        assert_eq!(d3.probe_grid::<3>(50).len(), 50);
        assert!(matches!(
            RandersSpec::<2>::new(d3, MetricField::Euclidean, OneForm::Zero),
            Err(Error::Dimension { .. })
        ));
    }
}
