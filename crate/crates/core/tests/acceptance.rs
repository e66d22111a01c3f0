//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always show up in `cargo test` output.

use nalgebra::{DMatrix, Vector2};
use randers_core::boundary::{
    add_noise, decompose, distance_matrix, max_abs_difference, sample_boundary, BoundaryPoints,
    MatrixOptions,
};
use randers_core::expr::Expr;
use randers_core::finsler::{curve_length, validate_norm, Axiom, ProbeSet};
use randers_core::geodesic::{hausdorff_distance, GeodesicPath};
use randers_core::parallel::Execution;
use randers_core::recovery::{
    herglotz_invert, recover_boundary_potential, recover_symmetric_data, HerglotzOptions,
};
use randers_core::shooting::{
    reversed_geodesic_check, shoot_fan, solve_bvp, solve_from_fan, Fan, ShootingOptions,
};
use randers_core::zermelo::{
    conformal_specialize, herglotz_check, linearize, travel_time_consistency, zermelo_construct,
    MediumModel,
};
use randers_core::{Domain, MetricField, OneForm, RandersSpec, Result, ScalarField, VectorField};
use std::time::Instant;

fn expr(s: &str) -> ScalarField {
    ScalarField::Expr(Expr::parse(s).unwrap())
}

fn conformal(s: &str) -> MetricField {
    MetricField::Conformal { speed: expr(s) }
}

fn bump(amplitude: f64) -> OneForm {
    OneForm::Gradient(ScalarField::Bump {
        amplitude,
        radius: 1.0,
    })
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// Paths accepted by the shooting solver in criteria 2-4, reused by 8.
#[derive(Default)]
struct Accepted(Vec<(RandersSpec<2>, GeodesicPath<2>)>);

fn fans(spec: &RandersSpec<2>, pts: &BoundaryPoints, opts: &ShootingOptions) -> Result<Vec<Fan>> {
    pts.angles.iter().map(|&a| shoot_fan(spec, a, opts)).collect()
}

/// Geodesics `i -> j` for every ordered pair of distinct points.
fn all_paths(
    spec: &RandersSpec<2>,
    pts: &BoundaryPoints,
    opts: &ShootingOptions,
    accepted: &mut Accepted,
) -> Result<DMatrix<Option<GeodesicPath<2>>>> {
    let fans = fans(spec, pts, opts)?;
    let n = pts.len();
    let mut out = DMatrix::from_element(n, n, None);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let r = solve_from_fan(spec, &fans[i], pts.angles[j], opts)?;
                accepted.0.push((spec.clone(), r.path.clone()));
                out[(i, j)] = Some(r.path);
            }
        }
    }
    Ok(out)
}

fn path(m: &DMatrix<Option<GeodesicPath<2>>>, i: usize, j: usize) -> &GeodesicPath<2> {
    m[(i, j)].as_ref().unwrap()
}

/// Largest Hausdorff distance between `i -> j` and the reverse of `j -> i`.
fn max_reversal(m: &DMatrix<Option<GeodesicPath<2>>>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max(hausdorff_distance(path(m, i, j), path(m, j, i)));
        }
    }
    worst
}

fn catalog() -> Vec<RandersSpec<2>> {
    let d = Domain::unit_disk();
    let alphas = [
        MetricField::Euclidean,
        conformal("2 - r"),
        conformal("1 + 0.2*x1"),
        MetricField::Matrix {
            upper: vec![expr("1.5"), expr("0.2*x1"), expr("1 + 0.1*x2^2")],
        },
    ];
    let betas = [
        OneForm::Zero,
        OneForm::Constant(vec![0.3, -0.1]),
        bump(0.2),
        OneForm::Rotational { strength: 0.4 },
        OneForm::Gradient(ScalarField::Linear(vec![0.1, 0.25])),
    ];
    let mut out = Vec::new();
    for a in &alphas {
        for b in &betas {
            out.push(RandersSpec::new(d, a.clone(), b.clone()).unwrap());
        }
    }
    out
}

fn criterion1() -> Result<Outcome> {
    let d = Domain::unit_disk();
    let probes = ProbeSet::standard(&d, 200, 36);
    let start = Instant::now();
    let specs = catalog();
    let mut passed = 0;
    let mut min_margin = f64::INFINITY;
    for s in &specs {
        let r = validate_norm(s, &probes)?;
        min_margin = min_margin.min(r.margin);
        if r.passed() && r.margin > 0.0 {
            passed += 1;
        }
    }
    let bad = RandersSpec::new_unchecked(d, MetricField::Euclidean, OneForm::Constant(vec![1.1, 0.0]))?;
    let r = validate_norm(&bad, &probes)?;
    let rejected = !r.passed() && r.failed_axioms().contains(&Axiom::Positivity);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        passed == specs.len() && rejected && secs < 1.0,
        format!(
            "{passed}/{} catalog specs valid (min margin {min_margin:.3}), |beta|=1.1 positivity failure {rejected}, {secs:.2} s",
            specs.len()
        ),
    )
}

fn wind() -> MediumModel {
    MediumModel::conformal(
        Domain::unit_disk(),
        ScalarField::Constant(1.0),
        VectorField::Constant(vec![0.5, 0.0]),
    )
}

fn criterion2(accepted: &mut Accepted) -> Result<Outcome> {
    let d = Domain::unit_disk();
    let spec = zermelo_construct(&wind())?;
    let opts = ShootingOptions::for_radius(1.0);
    let (west, east) = (Vector2::new(-1.0, 0.0), Vector2::new(1.0, 0.0));
    let down = solve_bvp(&spec, &west, &east, &opts)?;
    let up = solve_bvp(&spec, &east, &west, &opts)?;
    // crossing a diameter of length 2 at net speeds 1.5 and 0.5
    let (t_down, t_up) = (2.0 / 1.5, 2.0 / 0.5);
    accepted.0.push((spec.clone(), down.path.clone()));
    accepted.0.push((spec.clone(), up.path.clone()));

    // sample_boundary puts angle 0 first: d[0][1] is upwind
    let pts = sample_boundary(&d, 2)?;
    let data = distance_matrix(&spec, &pts, &MatrixOptions::for_radius(1.0))?;
    let dec = decompose(&data);
    let errs = [
        (down.distance - t_down).abs(),
        (up.distance - t_up).abs(),
        (dec.symmetric[(0, 1)] - (t_down + t_up) / 2.0).abs(),
        (dec.antisymmetric[(1, 0)] - (t_down - t_up) / 2.0).abs(),
        (dec.antisymmetric[(0, 1)] + (t_down - t_up) / 2.0).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-7,
        format!(
            "T_down={:.12} T_up={:.12} sym={:.12} anti={:.12}, max error {worst:.2e}",
            down.distance,
            up.distance,
            dec.symmetric[(0, 1)],
            dec.antisymmetric[(1, 0)]
        ),
    )
}

/// `(alpha, beta)` pairs with closed `beta` and the bump added to each.
fn gauge_scenarios() -> Vec<(&'static str, RandersSpec<2>, RandersSpec<2>)> {
    let d = Domain::unit_disk();
    let cases: Vec<(&str, MetricField, OneForm, f64)> = vec![
        ("euclidean", MetricField::Euclidean, OneForm::Zero, 0.3),
        ("c=2-r", conformal("2 - r"), OneForm::Zero, 0.15),
        ("euclidean+const", MetricField::Euclidean, OneForm::Constant(vec![0.3, 0.0]), 0.2),
        (
            "c=1+0.2x1+grad",
            conformal("1 + 0.2*x1"),
            OneForm::Gradient(ScalarField::Linear(vec![0.1, 0.2])),
            -0.2,
        ),
        (
            "matrix",
            MetricField::Matrix {
                upper: vec![expr("1.5"), expr("0.2*x1"), expr("1 + 0.1*x2^2")],
            },
            OneForm::Gradient(expr("0.1*x1*x2")),
            0.1,
        ),
    ];
    cases
        .into_iter()
        .map(|(name, a, b, amp)| {
            let s1 = RandersSpec::new(d, a.clone(), b.clone()).unwrap();
            let s2 = RandersSpec::new(d, a, b.plus(bump(amp))).unwrap();
            (name, s1, s2)
        })
        .collect()
}

fn rotational() -> (RandersSpec<2>, RandersSpec<2>) {
    let d = Domain::unit_disk();
    (
        RandersSpec::riemannian(d, MetricField::Euclidean).unwrap(),
        RandersSpec::new(d, MetricField::Euclidean, OneForm::Rotational { strength: 0.5 }).unwrap(),
    )
}

struct PathChecks {
    /// Worst Hausdorff gap under the gauge, per scenario.
    projective: Vec<f64>,
    /// Worst reversal gap for each closed-form spec.
    reversal_closed: Vec<f64>,
    projective_rot: f64,
    reversal_rot: f64,
    /// `reversed_geodesic_check` against the fan-based reversal on one pair.
    api_reversal_gap: f64,
}

fn path_checks(accepted: &mut Accepted) -> Result<PathChecks> {
    let d = Domain::unit_disk();
    let pts = sample_boundary(&d, 8)?;
    let opts = ShootingOptions::for_radius(1.0);
    let mut data = PathChecks {
        projective: Vec::new(),
        reversal_closed: Vec::new(),
        projective_rot: 0.0,
        reversal_rot: 0.0,
        api_reversal_gap: 0.0,
    };
    let pair_max = |a: &DMatrix<Option<GeodesicPath<2>>>, b: &DMatrix<Option<GeodesicPath<2>>>| {
        let mut worst = 0.0f64;
        for i in 0..8 {
            for j in (i + 1)..8 {
                worst = worst.max(hausdorff_distance(path(a, i, j), path(b, i, j)));
            }
        }
        worst
    };
    for (k, (_, s1, s2)) in gauge_scenarios().iter().enumerate() {
        let p1 = all_paths(s1, &pts, &opts, accepted)?;
        let p2 = all_paths(s2, &pts, &opts, accepted)?;
        data.projective.push(pair_max(&p1, &p2));
        data.reversal_closed.push(max_reversal(&p1));
        data.reversal_closed.push(max_reversal(&p2));
        if k == 3 {
            let r = reversed_geodesic_check(s2, path(&p2, 1, 4), &opts)?;
            data.api_reversal_gap = (r.hausdorff - hausdorff_distance(path(&p2, 1, 4), path(&p2, 4, 1))).abs();
        }
    }
    let (plain, rot) = rotational();
    let p1 = all_paths(&plain, &pts, &opts, accepted)?;
    let p2 = all_paths(&rot, &pts, &opts, accepted)?;
    data.projective_rot = pair_max(&p1, &p2);
    data.reversal_rot = max_reversal(&p2);
    Ok(data)
}

fn criterion3(l: &PathChecks) -> Result<Outcome> {
    let worst = l.projective.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-6 && l.projective_rot > 1e-3,
        format!(
            "{} bump scenarios x 28 pairs: max Hausdorff {worst:.2e}; rotational perturbation {:.2e}",
            l.projective.len(),
            l.projective_rot
        ),
    )
}

fn criterion4(l: &PathChecks) -> Result<Outcome> {
    let worst = l.reversal_closed.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-6 && l.reversal_rot > 1e-3 && l.api_reversal_gap <= 1e-9,
        format!(
            "{} closed-form specs: max reversal {worst:.2e}; rotational {:.2e}",
            l.reversal_closed.len(),
            l.reversal_rot
        ),
    )
}

struct GaugeData {
    forward: f64,
    secs: f64,
    potential_spread: f64,
    symmetric: f64,
    linear_potential: f64,
}

fn gauge_data() -> Result<GaugeData> {
    let d = Domain::unit_disk();
    let pts = sample_boundary(&d, 16)?;
    let opts = MatrixOptions::for_radius(1.0);
    let c = expr("2 - r");
    let beta = OneForm::Gradient(ScalarField::Linear(vec![0.05, -0.1]));
    let s1 = RandersSpec::new(d, MetricField::Conformal { speed: c.clone() }, beta.clone())?;
    let s2 = s1.with_beta(beta.plus(bump(0.15)))?;
    let start = Instant::now();
    let d1 = distance_matrix(&s1, &pts, &opts)?;
    let d2 = distance_matrix(&s2, &pts, &opts)?;
    let secs = start.elapsed().as_secs_f64();
    let forward = max_abs_difference(&d1.distances, &d2.distances);

    let phi = recover_boundary_potential(&d1, &d2)?;
    let symmetric = max_abs_difference(&recover_symmetric_data(&d1), &recover_symmetric_data(&d2));

    // a potential that does not vanish on the boundary
    let s3 = s1.with_beta(beta.plus(OneForm::Gradient(ScalarField::Linear(vec![0.1, 0.0]))))?;
    let d3 = distance_matrix(&s3, &pts, &opts)?;
    let phi3 = recover_boundary_potential(&d1, &d3)?;
    let mut linear_potential = 0.0f64;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            let want = 0.1 * (pts.point(j)[0] - pts.point(i)[0]);
            linear_potential = linear_potential.max((phi3.values[j] - phi3.values[i] - want).abs());
        }
    }
    Ok(GaugeData {
        forward,
        secs,
        potential_spread: phi.spread(),
        symmetric,
        linear_potential,
    })
}

fn criterion5(g: &GaugeData) -> Result<Outcome> {
    outcome(
        g.forward <= 2e-8 && g.secs < 30.0,
        format!("n=16 max |D1 - D2| {:.2e}, both matrices in {:.1} s", g.forward, g.secs),
    )
}

fn criterion6(g: &GaugeData) -> Result<Outcome> {
    outcome(
        g.potential_spread <= 1e-6 && g.symmetric <= 2e-8 && g.linear_potential <= 1e-6,
        format!(
            "potential spread {:.2e}, symmetric gap {:.2e}, phi=0.1x1 difference error {:.2e}",
            g.potential_spread, g.symmetric, g.linear_potential
        ),
    )
}

fn criterion7() -> Result<Outcome> {
    let d = Domain::unit_disk();
    let c = expr("2 - r");
    let h = herglotz_check(&c, 1.0)?;
    let start = Instant::now();
    let pts = sample_boundary(&d, 64)?;
    let mut errs = Vec::new();
    for speed in [c, ScalarField::Constant(1.5)] {
        let spec = RandersSpec::riemannian(d, MetricField::Conformal { speed: speed.clone() })?;
        let data = distance_matrix(&spec, &pts, &MatrixOptions::for_radius(1.0))?;
        let inv = herglotz_invert(&recover_symmetric_data(&data), &pts, &HerglotzOptions::default())?;
        let mut worst = 0.0f64;
        for k in 0..=950 {
            let r = 0.05 + 0.001 * k as f64;
            let truth = speed.value(&Vector2::new(r, 0.0));
            let got = inv.speed_at(r).unwrap_or(f64::NAN);
            worst = worst.max(((got - truth) / truth).abs());
        }
        errs.push(worst);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        h.holds && h.margin >= 0.5 && errs[0] <= 1e-2 && errs[1] <= 1e-3 && secs < 120.0,
        format!(
            "margin {:.4}, 2-r relative error {:.2e}, constant relative error {:.2e}, n=64 in {secs:.1} s",
            h.margin, errs[0], errs[1]
        ),
    )
}

fn criterion8(accepted: &Accepted) -> Result<Outcome> {
    let (mut speed, mut gap) = (0.0f64, 0.0f64);
    for (spec, p) in &accepted.0 {
        speed = speed.max(p.speed_deviation(spec));
        let l = curve_length(spec, p)?.total;
        gap = gap.max((p.exit_time - l).abs() / p.exit_time);
    }
    // the two diameter crossings of criterion 2 against their medium
    let mut medium_gap = 0.0f64;
    for (_, p) in accepted.0.iter().take(2) {
        medium_gap = medium_gap.max(travel_time_consistency(&wind(), p)? / p.exit_time);
    }
    outcome(
        speed <= 1e-6 && gap <= 1e-8 && medium_gap <= 1e-8,
        format!(
            "{} geodesics: max |F - 1| {speed:.2e}, max |T - L|/T {gap:.2e} (medium {medium_gap:.2e})",
            accepted.0.len()
        ),
    )
}

fn criterion9() -> Result<Outcome> {
    let d = Domain::unit_disk();
    let pts = sample_boundary(&d, 8)?;
    let opts = MatrixOptions::for_radius(1.0);
    let c = expr("1 + 0.1*x1");
    let rhos = [0.2, 0.1, 0.05];
    let mut gaps = Vec::new();
    for rho in rhos {
        let w = VectorField::Components(vec![
            ScalarField::Constant(rho),
            expr(&format!("{} * x2", 0.5 * rho)),
        ]);
        let exact = conformal_specialize(d, &c, &w)?;
        let lin = linearize(d, &c, &w)?;
        let a = distance_matrix(&exact, &pts, &opts)?;
        let b = distance_matrix(&lin.spec, &pts, &opts)?;
        gaps.push(max_abs_difference(&a.distances, &b.distances));
    }
    // least-squares slope of log gap against log rho
    let xs: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = num / den;
    outcome(
        (1.7..=2.3).contains(&slope),
        format!("gaps {:.3e} {:.3e} {:.3e}, fitted exponent {slope:.3}", gaps[0], gaps[1], gaps[2]),
    )
}

fn criterion10() -> Result<Outcome> {
    let d = Domain::unit_disk();
    let pts = sample_boundary(&d, 12)?;
    let spec = RandersSpec::new(d, conformal("1 + 0.2*x1"), OneForm::Rotational { strength: 0.3 })?;
    let csv = |exec: Execution, seed: u64| -> Result<Vec<u8>> {
        let data = distance_matrix(&spec, &pts, &MatrixOptions::for_radius(1.0).with_execution(exec))?;
        let noisy = add_noise(&data, 1e-4, seed)?;
        let mut buf = Vec::new();
        noisy.write_csv(&mut buf)?;
        Ok(buf)
    };
    let serial = csv(Execution::Serial, 11)?;
    let again = csv(Execution::Serial, 11)?;
    let parallel = csv(Execution::Parallel, 11)?;
    let other = csv(Execution::Serial, 12)?;
    let ok = serial == again && serial == parallel && serial != other;
    outcome(
        ok,
        format!(
            "repeat identical {}, serial/parallel identical {}, other seed differs {}",
            serial == again,
            serial == parallel,
            serial != other
        ),
    )
}

fn main() {
    let mut accepted = Accepted::default();
    let mut results: Vec<(usize, &str, Result<Outcome>)> = Vec::new();
    results.push((1, "norm axioms", criterion1()));
    results.push((2, "Zermelo oracle", criterion2(&mut accepted)));
    match path_checks(&mut accepted) {
        Ok(l) => {
            results.push((3, "projective equivalence", criterion3(&l)));
            results.push((4, "reversible geodesics", criterion4(&l)));
        }
        Err(e) => {
            results.push((3, "projective equivalence", Err(e.clone())));
            results.push((4, "reversible geodesics", Err(e)));
        }
    }
    match gauge_data() {
        Ok(g) => {
            results.push((5, "gauge-invariant distances", criterion5(&g)));
            results.push((6, "boundary potential recovery", criterion6(&g)));
        }
        Err(e) => {
            results.push((5, "gauge-invariant distances", Err(e.clone())));
            results.push((6, "boundary potential recovery", Err(e)));
        }
    }
    results.push((7, "Herglotz pipeline", criterion7()));
    results.push((8, "conservation", criterion8(&accepted)));
    results.push((9, "linearization order", criterion9()));
    results.push((10, "determinism", criterion10()));

    let mut failed = 0;
    for (k, name, r) in &results {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {k:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
