//! The five subcommands. Each reads one scenario file and writes its
//! artifacts into the output directory.

use crate::config::{parse_config, ScenarioConfig};
use randers_core::boundary::{
    add_noise, decompose, distance_matrix, max_abs_difference, sample_boundary, write_matrix_csv,
    BoundaryDistanceData, MatrixOptions,
};
use randers_core::finsler::{closedness_residual, curve_length, validate_norm, ProbeSet, VALIDITY_GRID_POINTS};
use randers_core::geodesic::{hausdorff_distance, integrate_geodesic};
use randers_core::jacobi::conjugate_point_scan;
use randers_core::parallel::{with_threads, Execution};
use randers_core::recovery::rigidity_report;
use randers_core::shooting::{boundary_point, reversed_geodesic_check, solve_bvp};
use randers_core::zermelo::herglotz_check;
use randers_core::{Error, OneForm, RandersSpec, Result, ScalarField};
use nalgebra::Vector2;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Decompose,
    Recover,
    Verify,
    Plotdata,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    /// 0 = rayon default, 1 = serial.
    pub threads: usize,
}

/// How a successful run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// A hypothesis of the theory fails for this scenario (exit 3).
    HypothesisViolated(String),
    /// A property that should hold did not (exit 1).
    CheckFailed(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::HypothesisViolated(_)) => EXIT_HYPOTHESIS,
        Ok(Outcome::CheckFailed(_)) => EXIT_FAILURE,
        Err(e) if e.is_hypothesis_violation() => EXIT_HYPOTHESIS,
        Err(e) => match e.kind() {
            "parse" | "unit" | "structural" | "argument" | "io" | "tag_mismatch" => EXIT_USAGE,
            _ => EXIT_FAILURE,
        },
    }
}

/// Machine-readable description of a failed run.
pub fn error_block(e: &Error) -> String {
    let mut s = String::from("[error]\n");
    let _ = writeln!(s, "kind = {}", e.kind());
    let _ = writeln!(s, "hypothesis_violation = {}", e.is_hypothesis_violation());
    let _ = writeln!(s, "exit_code = {}", exit_code(&Err(e.clone())));
    match e {
        Error::Parse { line, column, .. } | Error::Unit { line, column, .. } => {
            let _ = writeln!(s, "line = {line}\ncolumn = {column}");
        }
        Error::Pair { i, j, .. } => {
            let _ = writeln!(s, "pair = {i},{j}");
        }
        _ => {}
    }
    let _ = writeln!(s, "message = {:?}", e.to_string());
    s
}

fn read_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn relative_to(config: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn write(path: PathBuf, text: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn matrix_options(cfg: &ScenarioConfig, exec: Execution) -> MatrixOptions {
    cfg.matrix_options().with_execution(exec)
}

/// Loaded or simulated distances, with the configured noise applied.
fn scenario_data(cfg: &ScenarioConfig, config_path: &Path, exec: Execution) -> Result<BoundaryDistanceData> {
    let spec = cfg.spec()?;
    let data = match &cfg.pipeline.data {
        Some(file) => {
            let d = BoundaryDistanceData::load(&relative_to(config_path, file))?;
            if d.spec_tag != spec.tag() {
                return Err(Error::TagMismatch {
                    path_tag: d.spec_tag,
                    spec_tag: spec.tag().to_string(),
                });
            }
            if d.n() != cfg.domain.n {
                return Err(Error::Structural(format!(
                    "data file has n={}, config says n={}",
                    d.n(),
                    cfg.domain.n
                )));
            }
            d
        }
        None => {
            let pts = sample_boundary(spec.domain(), cfg.domain.n)?;
            distance_matrix(&spec, &pts, &matrix_options(cfg, exec))?
        }
    };
    if cfg.pipeline.noise > 0.0 && data.noise.is_none() {
        add_noise(&data, cfg.pipeline.noise, cfg.seed)
    } else {
        Ok(data)
    }
}

pub fn run(command: Command, opts: &RunOptions) -> Result<Outcome> {
    let cfg = read_config(&opts.config, opts.seed)?;
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::Io(format!("{}: {e}", opts.out.display())))?;
    let exec = if opts.threads == 1 {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    with_threads(opts.threads, || match command {
        Command::Simulate => simulate(&cfg, opts, exec),
        Command::Decompose => decompose_cmd(&cfg, opts, exec),
        Command::Recover => recover(&cfg, opts, exec),
        Command::Verify => verify(&cfg, opts, exec),
        Command::Plotdata => plotdata(&cfg, opts),
    })
}

fn simulate(cfg: &ScenarioConfig, opts: &RunOptions, exec: Execution) -> Result<Outcome> {
    let data = scenario_data(cfg, &opts.config, exec)?;
    data.save(&opts.out.join("distances.csv"))?;
    println!(
        "distances.csv: n={} spec={} excluded={} max_miss={:.3e}",
        data.n(),
        data.spec_tag,
        data.excluded_pairs(),
        data.max_miss
    );
    Ok(Outcome::Ok)
}

fn decompose_cmd(cfg: &ScenarioConfig, opts: &RunOptions, exec: Execution) -> Result<Outcome> {
    let data = scenario_data(cfg, &opts.config, exec)?;
    let parts = decompose(&data);
    for (name, m) in [("symmetric", &parts.symmetric), ("antisymmetric", &parts.antisymmetric)] {
        let mut buf = Vec::new();
        let header = format!(
            "n={} R={} spec={} part={name} units=time",
            data.n(),
            data.radius(),
            data.spec_tag
        );
        write_matrix_csv(&mut buf, &header, m)?;
        write(opts.out.join(format!("{name}.csv")), buf)?;
    }
    println!("symmetric.csv, antisymmetric.csv: n={}", data.n());
    Ok(Outcome::Ok)
}

fn recover(cfg: &ScenarioConfig, opts: &RunOptions, exec: Execution) -> Result<Outcome> {
    let other_path = match &cfg.pipeline.compare {
        Some(p) => relative_to(&opts.config, p),
        None => {
            return Err(Error::InvalidArgument(
                "recover needs 'compare' in [pipeline] naming the second scenario".into(),
            ))
        }
    };
    let mut other = read_config(&other_path, None)?;
    // independent noise for the second scenario
    other.seed = cfg.seed.wrapping_add(1);
    let mut s1 = cfg.scenario()?;
    let mut s2 = other.scenario()?;
    if !s1.spec.domain().is_simply_connected() || !s2.spec.domain().is_simply_connected() {
        return Err(Error::NotSimplyConnected);
    }
    s1.data = Some(scenario_data(cfg, &opts.config, exec)?);
    s2.data = Some(scenario_data(&other, &other_path, exec)?);
    let mut ropts = cfg.report_options();
    ropts.matrix = matrix_options(cfg, exec);
    let report = rigidity_report(&s1, &s2, &ropts)?;
    report.write(&opts.out)?;
    let v = &report.verdicts;
    println!(
        "report.txt: equal_data={} gauge_from_data={} matrix_difference={:.3e} potential_deviation={:.3e}",
        v.equal_data, v.gauge_from_data, report.matrix_difference, report.potential.deviation
    );
    Ok(Outcome::Ok)
}

/// Largest pair count used by `verify`: 8 points, 28 unordered pairs.
const VERIFY_POINTS: usize = 8;

/// `spec` with `d phi` added, `phi = a (1 - |x|^2 / R^2)`, halving `a` until
/// the norm stays valid.
fn gauged(spec: &RandersSpec<2>) -> Result<(RandersSpec<2>, f64)> {
    let radius = spec.domain().radius;
    let mut amplitude = 0.3 * radius;
    for _ in 0..20 {
        let phi = ScalarField::Bump { amplitude, radius };
        if let Ok(s) = spec.with_beta(spec.beta().clone().plus(OneForm::Gradient(phi))) {
            return Ok((s, amplitude));
        }
        amplitude *= 0.5;
    }
    Err(Error::InvalidNorm {
        margin: spec.validity_margin(),
    })
}

fn verify(cfg: &ScenarioConfig, opts: &RunOptions, exec: Execution) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let domain = *spec.domain();
    let radius = domain.radius;
    let mut report = String::new();
    let mut failures: Vec<String> = Vec::new();

    let norm = validate_norm(&spec, &ProbeSet::standard(&domain, 200, 36))?;
    let _ = writeln!(report, "[norm]\nprobes = {}\nmargin = {:.6e}\npassed = {}\n", norm.probes, norm.margin, norm.passed());
    if !norm.passed() {
        failures.push("norm axioms".into());
    }

    let k = cfg.domain.n.min(VERIFY_POINTS);
    let pts = sample_boundary(&domain, k)?;
    let mopts = matrix_options(cfg, exec);
    let sopts = mopts.shooting;
    let (spec2, amplitude) = gauged(&spec)?;

    let closedness = closedness_residual(spec.beta(), &domain.probe_grid::<2>(VALIDITY_GRID_POINTS));
    let closed = closedness <= 1e-8;
    let (mut reversal, mut projective, mut speed_dev, mut time_gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..k {
        for j in (i + 1)..k {
            let a = solve_bvp(&spec, &pts.point(i), &pts.point(j), &sopts)?;
            let b = solve_bvp(&spec2, &pts.point(i), &pts.point(j), &sopts)?;
            reversal = reversal.max(reversed_geodesic_check(&spec, &a.path, &sopts)?.hausdorff);
            projective = projective.max(hausdorff_distance(&a.path, &b.path));
            speed_dev = speed_dev.max(a.path.speed_deviation(&spec));
            let l = curve_length(&spec, &a.path)?.total;
            time_gap = time_gap.max((a.path.exit_time - l).abs() / a.path.exit_time);
        }
    }
    let counterexample = !closed && reversal > 1e-3 * radius;
    let reversal_ok = !closed || reversal <= 1e-6 * radius;
    let _ = writeln!(
        report,
        "[reversal]\nclosedness_residual = {closedness:.6e}\nclosed = {closed}\nmax_reversal_hausdorff = {reversal:.6e}\ncounterexample = {counterexample}\npassed = {reversal_ok}\n"
    );
    if !reversal_ok {
        failures.push("reversed geodesics of a closed 1-form".into());
    }
    let projective_ok = projective <= 1e-6 * radius;
    let _ = writeln!(
        report,
        "[projective]\npotential = bump({amplitude}, {radius})\nmax_hausdorff = {projective:.6e}\npassed = {projective_ok}\n"
    );
    if !projective_ok {
        failures.push("projective equivalence under d phi".into());
    }

    let d1 = distance_matrix(&spec, &pts, &mopts)?;
    let d2 = distance_matrix(&spec2, &pts, &mopts)?;
    let diff = max_abs_difference(&d1.distances, &d2.distances);
    let gauge_ok = diff <= 2e-8;
    let _ = writeln!(report, "[gauge_invariance]\nn = {k}\nmax_matrix_difference = {diff:.6e}\npassed = {gauge_ok}\n");
    if !gauge_ok {
        failures.push("distance matrices under a boundary-vanishing gauge".into());
    }

    let conservation_ok = speed_dev <= 1e-6 && time_gap <= 1e-8;
    let _ = writeln!(
        report,
        "[conservation]\nmax_speed_deviation = {speed_dev:.6e}\nmax_relative_travel_time_gap = {time_gap:.6e}\npassed = {conservation_ok}\n"
    );
    if !conservation_ok {
        failures.push("unit speed / travel time identity".into());
    }

    let outcome = if !failures.is_empty() {
        Outcome::CheckFailed(failures.join("; "))
    } else if counterexample {
        Outcome::HypothesisViolated(format!(
            "1-form is not closed (residual {closedness:.3e}); reversed geodesic differs by {reversal:.3e}"
        ))
    } else {
        Outcome::Ok
    };
    let status = match &outcome {
        Outcome::Ok => "ok",
        Outcome::HypothesisViolated(_) => "hypothesis_violated",
        Outcome::CheckFailed(_) => "failed",
    };
    let _ = writeln!(report, "[summary]\nstatus = {status}");
    write(opts.out.join("verify.txt"), &report)?;
    print!("{report}");
    Ok(outcome)
}

fn plotdata(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome> {
    let spec = cfg.spec()?;
    let domain = *spec.domain();
    let radius = domain.radius;
    let gopts = cfg.shooting_options().geodesic;

    let pts = sample_boundary(&domain, cfg.domain.n)?;
    let mut b = String::from("# boundary sample points, units=length\ni,angle,x1,x2\n");
    for i in 0..pts.len() {
        let x = pts.point(i);
        let _ = writeln!(b, "{i},{:.16e},{:.16e},{:.16e}", pts.angles[i], x[0], x[1]);
    }
    write(opts.out.join("boundary.csv"), b)?;

    let mut p = format!("# fan from angle 0, R={radius} spec={} units=length,time\npath,theta,t,x1,x2,y1,y2\n", spec.tag());
    let x0 = boundary_point(radius, 0.0);
    for k in 0..cfg.pipeline.paths {
        let theta = -FRAC_PI_2 + (k as f64 + 0.5) * PI / cfg.pipeline.paths as f64;
        let dir = Vector2::new(-theta.cos(), theta.sin());
        let path = integrate_geodesic(&spec, &x0, &dir, &gopts)?;
        for s in &path.samples {
            let _ = writeln!(
                p,
                "{k},{theta:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.x[0], s.x[1], s.v[0], s.v[1]
            );
        }
    }
    write(opts.out.join("paths.csv"), p)?;

    let speed = cfg.medium.speed.clone().unwrap_or(ScalarField::Constant(1.0));
    let plain = cfg.medium.alpha.is_none() && cfg.medium.beta.is_none();
    if plain && speed.is_radial() {
        let h = herglotz_check(&speed, radius)?;
        let mut s = format!("# herglotz margin={:.16e} holds={} units=length,length/time\nr,c,d_r_over_c\n", h.margin, h.holds);
        for k in 0..randers_core::zermelo::HERGLOTZ_GRID_POINTS {
            let r = radius * k as f64 / (randers_core::zermelo::HERGLOTZ_GRID_POINTS - 1) as f64;
            let (c, dc, _) = speed.radial_derivatives(r).expect("radial");
            let _ = writeln!(s, "{r:.16e},{c:.16e},{:.16e}", (c - r * dc) / (c * c));
        }
        write(opts.out.join("profile.csv"), s)?;
    }
    if cfg.pipeline.conjugate_scan && plain {
        let sources = if speed.is_radial() { 1 } else { 8 };
        let scan = conjugate_point_scan(&domain, &speed, sources, cfg.pipeline.paths.max(1), Execution::default())?;
        let mut s = format!(
            "# conjugate points rays={} min_ratio={:.16e} units=rad,time,length\nsource_angle,theta,t,x1,x2\n",
            scan.rays, scan.min_ratio
        );
        for c in &scan.conjugate_points {
            let _ = writeln!(
                s,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                c.source_angle, c.theta, c.t, c.point[0], c.point[1]
            );
        }
        write(opts.out.join("conjugate.csv"), s)?;
    }
    println!("plot data written to {}", opts.out.display());
    Ok(Outcome::Ok)
}
