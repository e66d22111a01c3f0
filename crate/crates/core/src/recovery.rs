//! Inverse side: line integrals of beta, the boundary potential, the
//! symmetrized distances, Herglotz-Wiechert inversion of a radial sound
//! speed, gauge checks and the combined rigidity report.

use crate::boundary::{
    decompose, distance_matrix, max_abs_difference, sample_boundary, write_matrix_csv,
    BoundaryDistanceData, BoundaryPoints, MatrixOptions,
};
use crate::error::{Error, Result};
use crate::field::{OneForm, Point, ScalarField};
use crate::finsler::{closedness_residual, Domain, RandersSpec, VALIDITY_GRID_POINTS};
use crate::shooting::boundary_point;
use nalgebra::{DMatrix, DVector, Vector2};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

/// `(D - D^T) / 2`, the integral of beta along each boundary geodesic.
pub fn recover_beta_integrals(data: &BoundaryDistanceData) -> DMatrix<f64> {
    decompose(data).antisymmetric
}

/// `(D + D^T) / 2`, the distance matrix of the reversible part.
pub fn recover_symmetric_data(data: &BoundaryDistanceData) -> DMatrix<f64> {
    decompose(data).symmetric
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPotential {
    /// `phi_2 - phi_1` at the boundary points, mean zero.
    pub values: Vec<f64>,
    /// Mean of the solution anchored at `values[0] = 0`, subtracted above.
    pub constant: f64,
    /// Largest residual `|phi_j - phi_i - m_ij|` of the least-squares system.
    pub deviation: f64,
}

impl BoundaryPotential {
    /// `max |phi_k|`: how far the boundary values are from one constant.
    pub fn spread(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Least-squares fit of `phi_j - phi_i = anti_2[i, j] - anti_1[i, j]` over
/// all computed pairs.
pub fn recover_boundary_potential(
    data1: &BoundaryDistanceData,
    data2: &BoundaryDistanceData,
) -> Result<BoundaryPotential> {
    if data1.points != data2.points {
        return Err(Error::Structural("boundary point lists differ".into()));
    }
    let n = data1.n();
    let m = recover_beta_integrals(data2) - recover_beta_integrals(data1);
    // normal equations L phi = b of the pair graph, plus 1 1^T to fix the mean
    let mut lap = DMatrix::from_element(n, n, 1.0);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                continue;
            }
            lap[(i, i)] += 1.0;
            lap[(j, j)] += 1.0;
            lap[(i, j)] -= 1.0;
            lap[(j, i)] -= 1.0;
            b[j] += v;
            b[i] -= v;
        }
    }
    let psi = lap
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Structural("pair graph is disconnected".into()))?;
    let mut deviation = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].is_finite() {
                deviation = deviation.max((psi[j] - psi[i] - m[(i, j)]).abs());
            }
        }
    }
    Ok(BoundaryPotential {
        values: psi.iter().copied().collect(),
        constant: -psi[0],
        deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerglotzOptions {
    /// Number of ray parameters sampled in `(0, pi)`.
    pub rays: usize,
    /// Accepted increase of `p` between neighbouring nodes, relative to `p(0)`.
    pub monotonicity_tol: f64,
    /// Same-separation spread (relative) still counted as radial.
    pub spread_tol: f64,
}

impl Default for HerglotzOptions {
    fn default() -> Self {
        Self {
            rays: 1000,
            monotonicity_tol: 1e-6,
            spread_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzInversion {
    pub radius: f64,
    /// Epicentral angles `Delta_k = 2 pi k / n` on `[0, pi]`.
    pub separations: Vec<f64>,
    /// Mean travel time per separation.
    pub travel_times: Vec<f64>,
    /// Ray parameter `p = dT/dDelta` at the nodes, before limiting.
    pub ray_parameters: Vec<f64>,
    /// Turning radii, ascending, with the recovered speed at each.
    pub radii: Vec<f64>,
    pub speeds: Vec<f64>,
    /// Largest `(max - min) / mean` over pairs with equal separation.
    pub spread: f64,
    pub radially_consistent: bool,
    /// Largest increase of `p` between neighbouring nodes.
    pub monotonicity_error: f64,
}

impl HerglotzInversion {
    /// Linear interpolation of the recovered profile, `None` outside the
    /// covered radii.
    pub fn speed_at(&self, r: f64) -> Option<f64> {
        let k = self.radii.partition_point(|&x| x < r);
        if k == self.radii.len() {
            return (r <= self.radius * (1.0 + 1e-12)).then(|| *self.speeds.last().unwrap());
        }
        if k == 0 {
            return (r == self.radii[0]).then(|| self.speeds[0]);
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let t = (r - r0) / (r1 - r0);
        Some(self.speeds[k - 1] * (1.0 - t) + self.speeds[k] * t)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# R={} units=length,length/time", self.radius)?;
        writeln!(w, "r,c")?;
        for (r, c) in self.radii.iter().zip(&self.speeds) {
            writeln!(w, "{r:.16e},{c:.16e}")?;
        }
        Ok(())
    }
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Cubic Hermite interpolant of `T` on uniform nodes, differentiated.
struct SlopeInterpolant {
    h: f64,
    t: Vec<f64>,
    m: Vec<f64>,
}

impl SlopeInterpolant {
    fn p(&self, delta: f64) -> f64 {
        let last = self.t.len() - 2;
        let k = ((delta / self.h).floor().max(0.0) as usize).min(last);
        let s = delta / self.h - k as f64;
        let (t0, t1, m0, m1) = (self.t[k], self.t[k + 1], self.m[k], self.m[k + 1]);
        ((6.0 * s * s - 6.0 * s) * (t0 - t1)) / self.h
            + (3.0 * s * s - 4.0 * s + 1.0) * m0
            + (3.0 * s * s - 2.0 * s) * m1
    }

    /// `int_0^d1 arccosh(p / p1)` with `Delta = d1 - u^2` on each node
    /// interval, which removes the square-root endpoint behaviour.
    fn abel_integral(&self, d1: f64, p1: f64) -> f64 {
        let mut total = 0.0;
        let mut a = 0.0;
        while a < d1 {
            let b = (a + self.h).min(d1);
            let (ua, ub) = ((d1 - b).sqrt(), (d1 - a).sqrt());
            let (mid, half) = (0.5 * (ua + ub), 0.5 * (ub - ua));
            for (x, w) in GL8 {
                let u = mid + half * x;
                let ratio = (self.p(d1 - u * u) / p1).max(1.0);
                total += w * half * 2.0 * u * ratio.acosh();
            }
            // next node interval; the first may be shorter only at d1
            a = b;
            if b < d1 {
                a = ((b / self.h).round()) * self.h;
            }
        }
        total
    }
}

/// Recovers `c(r)` from the symmetric travel times of a radial medium
/// sampled at uniform boundary angles.
pub fn herglotz_invert(
    sym: &DMatrix<f64>,
    points: &BoundaryPoints,
    opts: &HerglotzOptions,
) -> Result<HerglotzInversion> {
    let n = points.len();
    if n < 8 || sym.nrows() != n || sym.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "inversion needs an n x n matrix with n >= 8 (n = {n})"
        )));
    }
    if !points.is_uniform() {
        return Err(Error::Inversion("boundary angles are not uniformly spaced".into()));
    }
    let radius = points.radius;
    let h = TAU / n as f64;
    // T_k for k = 0..n-1, and the worst relative spread among equal separations
    let mut tk = vec![0.0; n];
    let mut spread = 0.0f64;
    for (k, t) in tk.iter_mut().enumerate().skip(1) {
        let v: Vec<f64> = (0..n)
            .flat_map(|i| [sym[(i, (i + k) % n)], sym[((i + k) % n, i)]])
            .filter(|x| x.is_finite())
            .collect();
        if v.is_empty() {
            return Err(Error::Inversion(format!("no travel times at separation index {k}")));
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        spread = spread.max((hi - lo) / mean);
        *t = mean;
    }
    let half = n / 2;
    let at = |k: usize| tk[k % n];
    let mut raw = vec![0.0; half + 1];
    for (k, m) in raw.iter_mut().enumerate() {
        *m = match k {
            // one-sided stencils next to the kink of T at Delta = 0
            0 => (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h),
            1 => (-3.0 * at(0) - 10.0 * at(1) + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h),
            _ => (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h),
        };
    }
    let p0 = raw[0];
    if !(p0 > 0.0) {
        return Err(Error::Inversion(format!("travel time does not grow with separation (p(0) = {p0})")));
    }
    let monotonicity_error = raw.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if monotonicity_error > opts.monotonicity_tol * p0 {
        return Err(Error::Inversion(format!(
            "ray parameter p(Delta) increases by {monotonicity_error:.3e}: triplication or conjugate points"
        )));
    }
    let values: Vec<f64> = (0..=half).map(at).collect();
    for w in values.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Inversion("travel time is not increasing with separation".into()));
        }
    }
    // Fritsch-Carlson limiting keeps the interpolant of T monotone
    let mut m = raw.clone();
    for k in 0..half {
        let d = (values[k + 1] - values[k]) / h;
        let (a, b) = (m[k] / d, m[k + 1] / d);
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[k] = tau * a * d;
            m[k + 1] = tau * b * d;
        }
    }
    let interp = SlopeInterpolant {
        h,
        t: values.clone(),
        m,
    };
    let top = h * half as f64;
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(opts.rays + 1);
    samples.push((radius, radius / interp.p(0.0)));
    for j in 1..opts.rays {
        let d1 = top * j as f64 / opts.rays as f64;
        let p1 = interp.p(d1);
        if !(p1 > 0.0) {
            continue;
        }
        let r = radius * (-interp.abel_integral(d1, p1) / PI).exp();
        samples.push((r, r / p1));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);
    Ok(HerglotzInversion {
        radius,
        separations: (0..=half).map(|k| h * k as f64).collect(),
        travel_times: values,
        ray_parameters: raw,
        radii: samples.iter().map(|s| s.0).collect(),
        speeds: samples.iter().map(|s| s.1).collect(),
        spread,
        radially_consistent: spread <= opts.spread_tol,
        monotonicity_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeReport {
    /// `max |beta_2 - beta_1 - d phi|` over interior probes.
    pub interior: f64,
    /// `max |phi|` over boundary probes.
    pub boundary: f64,
    /// Set only for two conformal-radial metrics with equal profiles, where the
    /// diffeomorphism of the almost-isometry is the identity.
    pub psi_identity: Option<bool>,
    /// `max |c_2 - c_1|` on a radial grid, for conformal-radial metrics.
    pub profile_deviation: Option<f64>,
}

pub const GAUGE_BOUNDARY_PROBES: usize = 360;
const PROFILE_GRID: usize = 1000;
const PROFILE_MATCH_TOL: f64 = 1e-12;

fn gauge_with(
    domain: &Domain,
    beta1: &OneForm,
    beta2: &OneForm,
    phi: impl Fn(&Point<2>) -> (f64, Vector2<f64>),
    profiles: Option<(&ScalarField, &ScalarField)>,
) -> GaugeReport {
    let interior = domain
        .probe_grid::<2>(VALIDITY_GRID_POINTS)
        .iter()
        .map(|x| (beta2.value(x) - beta1.value(x) - phi(x).1).amax())
        .fold(0.0, f64::max);
    let boundary = (0..GAUGE_BOUNDARY_PROBES)
        .map(|k| phi(&boundary_point(domain.radius, TAU * k as f64 / GAUGE_BOUNDARY_PROBES as f64)).0.abs())
        .fold(0.0, f64::max);
    let profile_deviation = profiles.and_then(|(c1, c2)| {
        (c1.is_radial() && c2.is_radial()).then(|| {
            (0..PROFILE_GRID)
                .map(|k| {
                    let x = Vector2::new(domain.radius * k as f64 / (PROFILE_GRID - 1) as f64, 0.0);
                    (c2.value(&x) - c1.value(&x)).abs()
                })
                .fold(0.0, f64::max)
        })
    });
    GaugeReport {
        interior,
        boundary,
        psi_identity: profile_deviation.map(|d| d <= PROFILE_MATCH_TOL),
        profile_deviation,
    }
}

/// Residuals of `beta_2 = beta_1 + d phi` with `phi = 0` on the boundary.
/// `profiles` are the sound speeds of two conformal metrics, if any.
pub fn verify_gauge(
    domain: &Domain,
    beta1: &OneForm,
    beta2: &OneForm,
    phi: &ScalarField,
    profiles: Option<(&ScalarField, &ScalarField)>,
) -> GaugeReport {
    gauge_with(
        domain,
        beta1,
        beta2,
        |x| {
            let j = phi.jet(x);
            (j.value, j.grad)
        },
        profiles,
    )
}

/// One side of a comparison: a Randers norm, the potential that was added
/// to its 1-form (if known) and optionally precomputed boundary data.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: RandersSpec<2>,
    pub n: usize,
    pub potential: Option<ScalarField>,
    pub data: Option<BoundaryDistanceData>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, spec: RandersSpec<2>, n: usize) -> Self {
        Self {
            name: name.into(),
            spec,
            n,
            potential: None,
            data: None,
        }
    }

    pub fn conformal_radial_speed(&self) -> Option<ScalarField> {
        self.spec.alpha().conformal_speed().filter(|c| c.is_radial())
    }

    /// Stored data, or a fresh simulation.
    pub fn boundary_data(&self, opts: &MatrixOptions) -> Result<BoundaryDistanceData> {
        match &self.data {
            Some(d) => {
                if d.spec_tag != self.spec.tag() {
                    return Err(Error::TagMismatch {
                        path_tag: d.spec_tag.clone(),
                        spec_tag: self.spec.tag().to_string(),
                    });
                }
                Ok(d.clone())
            }
            None => {
                let pts = sample_boundary(self.spec.domain(), self.n)?;
                distance_matrix(&self.spec, &pts, opts)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub matrix: MatrixOptions,
    pub matrix_tol: f64,
    pub potential_tol: f64,
    pub gauge_tol: f64,
    pub closedness_tol: f64,
    pub profile_tol: f64,
    /// Invert radial profiles when both metrics are conformal-radial and
    /// `n >= 64`.
    pub invert_profiles: bool,
    pub herglotz: HerglotzOptions,
}

impl ReportOptions {
    pub fn for_radius(radius: f64) -> Self {
        Self {
            matrix: MatrixOptions::for_radius(radius),
            matrix_tol: 2e-8,
            potential_tol: 1e-6,
            gauge_tol: 1e-8,
            closedness_tol: 1e-8,
            profile_tol: 1e-2,
            invert_profiles: true,
            herglotz: HerglotzOptions::default(),
        }
    }
}

/// A verdict per clause; `None` when the clause does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdicts {
    pub equal_data: bool,
    pub gauge_from_data: bool,
    pub gauge_ground_truth: bool,
    pub radial_equal_data: Option<bool>,
    pub radial_almost_isometry: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub names: (String, String),
    pub radius: f64,
    pub points: BoundaryPoints,
    pub tags: (String, String),
    pub beta_integrals: (DMatrix<f64>, DMatrix<f64>),
    pub symmetric: (DMatrix<f64>, DMatrix<f64>),
    pub matrix_difference: f64,
    pub symmetric_difference: f64,
    pub potential: BoundaryPotential,
    pub closedness: (f64, f64),
    pub gauge: GaugeReport,
    pub profiles: Option<(HerglotzInversion, HerglotzInversion)>,
    /// Largest recovered-versus-true profile error (relative) on `[0.05 R, R]`.
    pub profile_error: Option<f64>,
    pub options: ReportOptions,
    pub verdicts: Verdicts,
}

fn profile_error(inv: &HerglotzInversion, c: &ScalarField) -> f64 {
    (0..=95)
        .map(|k| {
            let r = inv.radius * (0.05 + 0.01 * k as f64);
            let truth = c.value(&Vector2::new(r, 0.0));
            inv.speed_at(r).map_or(f64::INFINITY, |v| ((v - truth) / truth).abs())
        })
        .fold(0.0, f64::max)
}

/// Runs the forward and inverse pipelines on two scenarios and renders a
/// verdict per clause.
pub fn rigidity_report(s1: &Scenario, s2: &Scenario, opts: &ReportOptions) -> Result<RecoveryReport> {
    let domain = *s1.spec.domain();
    if !domain.is_simply_connected() || !s2.spec.domain().is_simply_connected() {
        return Err(Error::NotSimplyConnected);
    }
    if domain != *s2.spec.domain() || s1.n != s2.n {
        return Err(Error::Structural("scenarios use different domains or sample counts".into()));
    }
    let probes = domain.probe_grid::<2>(VALIDITY_GRID_POINTS);
    let closedness = (
        closedness_residual(s1.spec.beta(), &probes),
        closedness_residual(s2.spec.beta(), &probes),
    );
    for (s, r) in [(s1, closedness.0), (s2, closedness.1)] {
        if r > opts.closedness_tol {
            return Err(Error::Inversion(format!(
                "1-form of '{}' is not closed (residual {r:.3e})",
                s.name
            )));
        }
    }
    let d1 = s1.boundary_data(&opts.matrix)?;
    let d2 = s2.boundary_data(&opts.matrix)?;
    let potential = recover_boundary_potential(&d1, &d2)?;
    let parts1 = decompose(&d1);
    let parts2 = decompose(&d2);
    let matrix_difference = max_abs_difference(&d1.distances, &d2.distances);
    let symmetric_difference = max_abs_difference(&parts1.symmetric, &parts2.symmetric);

    let zero = ScalarField::Constant(0.0);
    let (p1, p2) = (
        s1.potential.as_ref().unwrap_or(&zero),
        s2.potential.as_ref().unwrap_or(&zero),
    );
    let speeds = (s1.conformal_radial_speed(), s2.conformal_radial_speed());
    let radial = match &speeds {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let gauge = gauge_with(
        &domain,
        s1.spec.beta(),
        s2.spec.beta(),
        |x| {
            let (j1, j2) = (p1.jet(x), p2.jet(x));
            (j2.value - j1.value, j2.grad - j1.grad)
        },
        radial,
    );

    let mut profiles = None;
    let mut profile_err = None;
    if let Some((c1, c2)) = radial {
        if opts.invert_profiles && d1.n() >= 64 {
            let a = herglotz_invert(&parts1.symmetric, &d1.points, &opts.herglotz)?;
            let b = herglotz_invert(&parts2.symmetric, &d2.points, &opts.herglotz)?;
            profile_err = Some(profile_error(&a, c1).max(profile_error(&b, c2)));
            profiles = Some((a, b));
        }
    }

    let equal_data = matrix_difference <= opts.matrix_tol;
    let potential_ok = potential.deviation <= opts.potential_tol && potential.spread() <= opts.potential_tol;
    let gauge_from_data = potential_ok && symmetric_difference <= opts.matrix_tol;
    let gauge_ground_truth = gauge.interior <= opts.gauge_tol && gauge.boundary <= opts.gauge_tol;
    let radial_almost_isometry = radial.map(|_| {
        let profiles_agree = match &profiles {
            Some((a, b)) => (0..=95).all(|k| {
                let r = domain.radius * (0.05 + 0.01 * k as f64);
                match (a.speed_at(r), b.speed_at(r)) {
                    (Some(x), Some(y)) => ((x - y) / x).abs() <= opts.profile_tol,
                    _ => false,
                }
            }),
            None => true,
        };
        gauge.psi_identity == Some(true) && gauge_ground_truth && profiles_agree && potential_ok
    });
    let verdicts = Verdicts {
        equal_data,
        gauge_from_data,
        gauge_ground_truth,
        radial_equal_data: radial.map(|_| equal_data),
        radial_almost_isometry,
    };
    Ok(RecoveryReport {
        names: (s1.name.clone(), s2.name.clone()),
        radius: domain.radius,
        points: d1.points.clone(),
        tags: (d1.spec_tag.clone(), d2.spec_tag.clone()),
        beta_integrals: (parts1.antisymmetric, parts2.antisymmetric),
        symmetric: (parts1.symmetric, parts2.symmetric),
        matrix_difference,
        symmetric_difference,
        potential,
        closedness,
        gauge,
        profiles,
        profile_error: profile_err,
        options: *opts,
        verdicts,
    })
}

fn opt_bool(v: Option<bool>) -> String {
    v.map_or("n/a".into(), |b| b.to_string())
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.6e}"))
}

impl RecoveryReport {
    /// Key-value text with `[section]` headers.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let o = &self.options;
        let v = &self.verdicts;
        let _ = writeln!(s, "[scenarios]");
        let _ = writeln!(s, "first = {}", self.names.0);
        let _ = writeln!(s, "second = {}", self.names.1);
        let _ = writeln!(s, "spec_first = {}", self.tags.0);
        let _ = writeln!(s, "spec_second = {}", self.tags.1);
        let _ = writeln!(s, "n = {}", self.points.len());
        let _ = writeln!(s, "R = {}", self.radius);
        let _ = writeln!(s);
        let _ = writeln!(s, "[verdicts]");
        let _ = writeln!(s, "equal_data = {}", v.equal_data);
        let _ = writeln!(s, "gauge.from_data = {}", v.gauge_from_data);
        let _ = writeln!(s, "gauge.ground_truth = {}", v.gauge_ground_truth);
        let _ = writeln!(s, "radial.equal_data = {}", opt_bool(v.radial_equal_data));
        let _ = writeln!(s, "radial.almost_isometry = {}", opt_bool(v.radial_almost_isometry));
        let _ = writeln!(s, "radial.scope = conformal-radial only, psi is the identity");
        let _ = writeln!(s);
        let _ = writeln!(s, "[residuals]");
        let _ = writeln!(s, "matrix_difference = {:.6e}", self.matrix_difference);
        let _ = writeln!(s, "symmetric_difference = {:.6e}", self.symmetric_difference);
        let _ = writeln!(s, "potential_constant = {:.6e}", self.potential.constant);
        let _ = writeln!(s, "potential_deviation = {:.6e}", self.potential.deviation);
        let _ = writeln!(s, "potential_spread = {:.6e}", self.potential.spread());
        let _ = writeln!(s, "closedness_first = {:.6e}", self.closedness.0);
        let _ = writeln!(s, "closedness_second = {:.6e}", self.closedness.1);
        let _ = writeln!(s, "gauge_interior = {:.6e}", self.gauge.interior);
        let _ = writeln!(s, "gauge_boundary = {:.6e}", self.gauge.boundary);
        let _ = writeln!(s, "psi_identity = {}", opt_bool(self.gauge.psi_identity));
        let _ = writeln!(s, "profile_deviation = {}", opt_num(self.gauge.profile_deviation));
        let _ = writeln!(s, "profile_recovery_error = {}", opt_num(self.profile_error));
        if let Some((a, b)) = &self.profiles {
            let _ = writeln!(s, "profile_spread = {:.6e}", a.spread.max(b.spread));
            let _ = writeln!(s, "profile_monotonicity_error = {:.6e}", a.monotonicity_error.max(b.monotonicity_error));
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[tolerances]");
        let _ = writeln!(s, "matrix = {:e}", o.matrix_tol);
        let _ = writeln!(s, "potential = {:e}", o.potential_tol);
        let _ = writeln!(s, "gauge = {:e}", o.gauge_tol);
        let _ = writeln!(s, "closedness = {:e}", o.closedness_tol);
        let _ = writeln!(s, "profile = {:e}", o.profile_tol);
        s
    }

    /// `report.txt` plus CSV attachments in `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        let matrix = |name: &str, m: &DMatrix<f64>| -> Result<()> {
            let mut buf = Vec::new();
            let header = format!(
                "n={} R={} part={} units=time",
                m.nrows(),
                self.radius,
                name.trim_end_matches(".csv")
            );
            write_matrix_csv(&mut buf, &header, m)?;
            std::fs::write(dir.join(name), buf)?;
            Ok(())
        };
        matrix("beta_integrals_first.csv", &self.beta_integrals.0)?;
        matrix("beta_integrals_second.csv", &self.beta_integrals.1)?;
        matrix("symmetric_first.csv", &self.symmetric.0)?;
        matrix("symmetric_second.csv", &self.symmetric.1)?;
        let mut pot = format!("# n={} R={} units=rad,time\ni,angle,phi\n", self.points.len(), self.radius);
        for (i, (a, p)) in self.points.angles.iter().zip(&self.potential.values).enumerate() {
            let _ = writeln!(pot, "{i},{a:.16e},{p:.16e}");
        }
        std::fs::write(dir.join("boundary_potential.csv"), pot)?;
        if let Some((a, b)) = &self.profiles {
            for (name, p) in [("profile_first.csv", a), ("profile_second.csv", b)] {
                let mut buf = Vec::new();
                p.write_csv(&mut buf)?;
                std::fs::write(dir.join(name), buf)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::MetricField;

    fn data_from(points: BoundaryPoints, d: DMatrix<f64>) -> BoundaryDistanceData {
        BoundaryDistanceData {
            points,
            distances: d,
            spec_tag: "t".into(),
            noise: None,
            max_miss: 0.0,
        }
    }

    fn chord_times(n: usize, speed: f64) -> (BoundaryPoints, DMatrix<f64>) {
        let pts = sample_boundary(&Domain::unit_disk(), n).unwrap();
        let d = DMatrix::from_fn(n, n, |i, j| (pts.point(i) - pts.point(j)).norm() / speed);
        (pts, d)
    }

    #[test]
    fn parts_reconstruct_data() {
        let (pts, mut d) = chord_times(6, 1.0);
        d[(0, 3)] += 0.25;
        let data = data_from(pts, d.clone());
        let a = recover_beta_integrals(&data);
        let s = recover_symmetric_data(&data);
        assert_eq!(&s + &a, d);
        assert_eq!(a[(0, 3)], 0.125);
        assert_eq!(a[(3, 0)], -0.125);
    }

    #[test]
    fn potential_from_exact_differences() {
        let (pts, d) = chord_times(7, 1.0);
        let base = data_from(pts.clone(), d.clone());
        let same = recover_boundary_potential(&base, &base).unwrap();
        assert!(same.spread() == 0.0 && same.deviation == 0.0);
        // D_ij + phi(x_j) - phi(x_i) shifts the antisymmetric part by the same
        let phi: Vec<f64> = (0..7).map(|i| 0.1 * pts.point(i)[0]).collect();
        let shifted = DMatrix::from_fn(7, 7, |i, j| d[(i, j)] + phi[j] - phi[i]);
        let other = data_from(pts.clone(), shifted);
        let rec = recover_boundary_potential(&base, &other).unwrap();
        assert!(rec.deviation < 1e-15);
        for i in 0..7 {
            for j in 0..7 {
                let got = rec.values[j] - rec.values[i];
                assert!((got - (phi[j] - phi[i])).abs() < 1e-15, "{got}");
            }
        }
        let mean: f64 = rec.values.iter().sum::<f64>() / 7.0;
        assert!(mean.abs() < 1e-15);
        assert!((rec.values[0] + rec.constant).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_differences_show_as_deviation() {
        let (pts, d) = chord_times(5, 1.0);
        let mut e = d.clone();
        e[(0, 1)] += 0.01;
        let rec = recover_boundary_potential(&data_from(pts.clone(), d), &data_from(pts, e)).unwrap();
        assert!(rec.deviation > 1e-3);
    }

    #[test]
    fn mismatched_points_are_rejected() {
        let (p5, d5) = chord_times(5, 1.0);
        let (p6, d6) = chord_times(6, 1.0);
        assert!(recover_boundary_potential(&data_from(p5, d5), &data_from(p6, d6)).is_err());
    }

    #[test]
    fn constant_speed_inversion_from_chords() {
        for c0 in [1.0, 2.0] {
            let (pts, d) = chord_times(64, c0);
            let inv = herglotz_invert(&d, &pts, &HerglotzOptions::default()).unwrap();
            assert!(inv.radially_consistent && inv.spread < 1e-12);
            for k in 0..=100 {
                let r = 0.01 + 0.0099 * k as f64;
                let c = inv.speed_at(r).unwrap();
                assert!(((c - c0) / c0).abs() < 1e-3, "r={r} c={c}");
            }
        }
    }

    #[test]
    fn non_radial_data_is_flagged() {
        let (pts, mut d) = chord_times(64, 1.0);
        for i in 0..64 {
            for j in 0..64 {
                d[(i, j)] *= 1.0 + 0.01 * pts.point(i)[0] * pts.point(j)[0];
            }
        }
        let inv = herglotz_invert(&d, &pts, &HerglotzOptions::default()).unwrap();
        assert!(!inv.radially_consistent && inv.spread > 1e-3);
    }

    #[test]
    fn triplication_is_an_inversion_error() {
        // a travel-time curve whose slope rises again past Delta = 1
        let pts = sample_boundary(&Domain::unit_disk(), 64).unwrap();
        let t = |delta: f64| {
            let a = delta.min(TAU - delta);
            a + 0.2 * (a - 1.0).max(0.0).powi(2)
        };
        let d = DMatrix::from_fn(64, 64, |i, j| t((pts.angles[j] - pts.angles[i]).rem_euclid(TAU)));
        let e = herglotz_invert(&d, &pts, &HerglotzOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Inversion(_)) && e.is_hypothesis_violation(), "{e}");
    }

    #[test]
    fn gauge_residuals() {
        let d = Domain::unit_disk();
        let phi = ScalarField::Bump { amplitude: 0.3, radius: 1.0 };
        let b1 = OneForm::Constant(vec![0.1, 0.0]);
        let b2 = b1.clone().plus(OneForm::Gradient(phi.clone()));
        let g = verify_gauge(&d, &b1, &b2, &phi, None);
        assert!(g.interior < 1e-15 && g.boundary < 1e-15);
        assert_eq!(g.psi_identity, None);
        let eps = 1e-3;
        let b3 = b2.clone().plus(OneForm::Rotational { strength: eps });
        let g = verify_gauge(&d, &b1, &b3, &phi, None);
        // |eps/2 (-x2, x1)|_inf peaks near the boundary at eps/2
        assert!((g.interior - eps / 2.0).abs() < 1e-5, "{}", g.interior);
        let shifted = ScalarField::Expr(crate::expr::Expr::parse("0.3*(1 - x1^2 - x2^2) + 0.05").unwrap());
        let g = verify_gauge(&d, &b1, &b2, &shifted, None);
        assert!((g.boundary - 0.05).abs() < 1e-15 && g.interior < 1e-15);
        let c = ScalarField::Constant(1.0);
        let c2 = ScalarField::Constant(1.1);
        let g = verify_gauge(&d, &b1, &b2, &phi, Some((&c, &c)));
        assert_eq!(g.psi_identity, Some(true));
        let g = verify_gauge(&d, &b1, &b2, &phi, Some((&c, &c2)));
        assert_eq!(g.psi_identity, Some(false));
        assert!((g.profile_deviation.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn report_refuses_annulus_and_open_forms() {
        let ann = Domain::annulus(0.3, 1.0).unwrap();
        let s = Scenario::new("a", RandersSpec::riemannian(ann, MetricField::Euclidean).unwrap(), 8);
        let o = ReportOptions::for_radius(1.0);
        assert!(matches!(rigidity_report(&s, &s, &o), Err(Error::NotSimplyConnected)));
        let rot = RandersSpec::new(Domain::unit_disk(), MetricField::Euclidean, OneForm::Rotational { strength: 0.5 }).unwrap();
        let s = Scenario::new("rot", rot, 8);
        let e = rigidity_report(&s, &s, &o).unwrap_err();
        assert!(e.is_hypothesis_violation(), "{e}");
    }

    #[test]
    fn report_on_gauge_pair() {
        let d = Domain::unit_disk();
        let phi = ScalarField::Bump { amplitude: 0.3, radius: 1.0 };
        let base = RandersSpec::new(d, MetricField::Euclidean, OneForm::Constant(vec![0.2, 0.0])).unwrap();
        let gauged = base.with_beta(base.beta().clone().plus(OneForm::Gradient(phi.clone()))).unwrap();
        let s1 = Scenario::new("base", base, 8);
        let mut s2 = Scenario::new("gauged", gauged, 8);
        s2.potential = Some(phi);
        let r = rigidity_report(&s1, &s2, &ReportOptions::for_radius(1.0)).unwrap();
        assert!(r.verdicts.equal_data, "{}", r.to_text());
        assert!(r.verdicts.gauge_from_data && r.verdicts.gauge_ground_truth);
        // Euclidean alpha is conformal with c = 1
        assert_eq!((r.verdicts.radial_equal_data, r.verdicts.radial_almost_isometry), (Some(true), Some(true)));
        let text = r.to_text();
        assert!(text.contains("[verdicts]\nequal_data = true"));
        let dir = tempfile::tempdir().unwrap();
        r.write(dir.path()).unwrap();
        for f in ["report.txt", "boundary_potential.csv", "symmetric_first.csv", "beta_integrals_second.csv"] {
            assert!(dir.path().join(f).exists());
        }
    }
}
