use randers_core::boundary::BoundaryDistanceData;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_randers");

struct Run {
    code: i32,
    out: PathBuf,
}

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join(format!("{config}.cfg"));
    let out = dir.join(format!("out-{sub}-{config}-{}", extra.join("")));
    let status = Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: status.status.code().unwrap(),
        out,
    }
}

fn scenario(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(format!("{name}.cfg")), text).unwrap();
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const EUCLIDEAN: &str = "name = \"flat\"\n[domain]\nR = 1 [length]\nn = 8\n[medium]\nc = 1\n";

#[test]
fn simulate_flat_disk_gives_chords() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "flat", EUCLIDEAN);
    let r = run(dir.path(), "simulate", "flat", &[]);
    assert_eq!(r.code, 0);
    let d = BoundaryDistanceData::load(&r.out.join("distances.csv")).unwrap();
    assert_eq!(d.n(), 8);
    for i in 0..8 {
        for j in 0..8 {
            let chord = (d.points.point(i) - d.points.point(j)).norm();
            assert!((d.distances[(i, j)] - chord).abs() < 1e-9);
        }
    }
}

#[test]
fn decompose_parts_sum_to_distances() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        "wind",
        "[domain]\nn = 6\n[medium]\nc = 1\nW = const(0.5, 0)\n",
    );
    let r = run(dir.path(), "decompose", "wind", &[]);
    assert_eq!(r.code, 0);
    let rows = |name: &str| -> Vec<Vec<f64>> {
        read(r.out.join(name))
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let (s, a) = (rows("symmetric.csv"), rows("antisymmetric.csv"));
    assert_eq!(s.len(), 6);
    let sim = run(dir.path(), "simulate", "wind", &[]);
    let d = BoundaryDistanceData::load(&sim.out.join("distances.csv")).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            assert!((s[i][j] + a[i][j] - d.distances[(i, j)]).abs() < 1e-14);
            assert_eq!(s[i][j], s[j][i]);
        }
    }
}

#[test]
fn recover_gauge_pair() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        "a",
        "[domain]\nn = 8\n[medium]\nc = \"2 - r\"\n[pipeline]\ncompare = \"b.cfg\"\n",
    );
    scenario(dir.path(), "b", "[domain]\nn = 8\n[medium]\nc = \"2 - r\"\nphi = bump(0.1, 1) [time]\n");
    let r = run(dir.path(), "recover", "a", &[]);
    assert_eq!(r.code, 0);
    let report = read(r.out.join("report.txt"));
    assert!(report.contains("equal_data = true"), "{report}");
    assert!(report.contains("gauge.from_data = true"), "{report}");
    assert!(r.out.join("boundary_potential.csv").exists());

    scenario(dir.path(), "lonely", "[domain]\nn = 8\n[medium]\nc = 1\n");
    assert_eq!(run(dir.path(), "recover", "lonely", &[]).code, 2);
}

#[test]
fn verify_reports_counterexample_for_rotational_form() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        "rot",
        "[domain]\nn = 4\n[medium]\nalpha = euclidean\nbeta = rotational(0.5)\n",
    );
    let r = run(dir.path(), "verify", "rot", &[]);
    assert_eq!(r.code, 3);
    let text = read(r.out.join("verify.txt"));
    assert!(text.contains("counterexample = true"), "{text}");
    assert!(text.contains("status = hypothesis_violated"));

    scenario(dir.path(), "flat", EUCLIDEAN.replace("n = 8", "n = 4").as_str());
    let r = run(dir.path(), "verify", "flat", &[]);
    assert_eq!(r.code, 0);
    assert!(read(r.out.join("verify.txt")).contains("status = ok"));
}

#[test]
fn parse_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "bad", "[domain]\nn = 8\n[medium]\nc = \"2 - \"\n");
    let r = run(dir.path(), "simulate", "bad", &[]);
    assert_eq!(r.code, 2);
    let e = read(r.out.join("error.txt"));
    assert!(e.contains("kind = parse"), "{e}");
    assert!(e.contains("line = 4"), "{e}");

    scenario(dir.path(), "typo", "[domian]\n");
    assert_eq!(run(dir.path(), "simulate", "typo", &[]).code, 2);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        "noisy",
        "seed = 9\n[domain]\nn = 6\n[medium]\nalpha = conformal(\"1 + 0.2*x1\")\nbeta = rotational(0.3)\n[pipeline]\nnoise = 1e-3 [time]\n",
    );
    let csv = |extra: &[&str]| read(run(dir.path(), "simulate", "noisy", extra).out.join("distances.csv"));
    let first = csv(&[]);
    assert_eq!(first, csv(&["--threads", "4"]));
    assert_eq!(first, csv(&["--threads", "1"]));
    assert!(first.contains("# noise sigma=0.001 seed=9"));

    let other = csv(&["--seed", "10"]);
    assert!(other.contains("seed=10"));
    assert_ne!(first, other);
    assert_eq!(other, csv(&["--seed", "10", "--threads", "1"]));
}

#[test]
fn plotdata_writes_profile_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        "h",
        "[domain]\nn = 4\n[medium]\nc = \"2 - r\"\n[pipeline]\npaths = 5\nconjugate_scan = true\n",
    );
    let r = run(dir.path(), "plotdata", "h", &[]);
    assert_eq!(r.code, 0);
    let paths = read(r.out.join("paths.csv"));
    let ids: std::collections::BTreeSet<&str> = paths
        .lines()
        .skip(2)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ids.len(), 5);
    assert_eq!(read(r.out.join("profile.csv")).lines().count(), 1002);
    // the profile has negative curvature: nothing focuses
    assert_eq!(read(r.out.join("conjugate.csv")).lines().count(), 2);
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let cfg = randers_cli::parse_config(&read(p.clone())).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.spec().unwrap();
        count += 1;
    }
    assert!(count >= 5);
}
