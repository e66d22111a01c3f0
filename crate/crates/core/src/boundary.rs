//! Boundary distance data: sampling, the distance matrix, its symmetric and
//! antisymmetric parts, seeded noise and the CSV exchange format.

use crate::error::{Error, Result};
use crate::field::Point;
use crate::finsler::{Domain, RandersSpec};
use crate::parallel::{map_indexed, Execution};
use crate::shooting::{boundary_point, shoot_fan, solve_from_fan, ShootingOptions};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

/// Pairs closer than this (relative to `R`) are not computed.
pub const MIN_SEPARATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoints {
    pub radius: f64,
    pub angles: Vec<f64>,
}

impl BoundaryPoints {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn point(&self, i: usize) -> Point<2> {
        boundary_point(self.radius, self.angles[i])
    }

    pub fn points(&self) -> Vec<Point<2>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Whether the angles are `2 pi k / n` up to roundoff.
    pub fn is_uniform(&self) -> bool {
        let n = self.len() as f64;
        self.angles
            .iter()
            .enumerate()
            .all(|(k, a)| (a - TAU * k as f64 / n).abs() <= 1e-12)
    }
}

/// `n` points at uniform angles `2 pi k / n` on the boundary circle.
pub fn sample_boundary(domain: &Domain, n: usize) -> Result<BoundaryPoints> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 boundary points, got {n}")));
    }
    if domain.dimension != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: domain.dimension,
        });
    }
    Ok(BoundaryPoints {
        radius: domain.radius,
        angles: (0..n).map(|k| TAU * k as f64 / n as f64).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRecord {
    pub sigma: f64,
    pub seed: u64,
}

/// `D[i, j] = d_F(x_i, x_j)` in time units. Excluded pairs are NaN, the
/// diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistanceData {
    pub points: BoundaryPoints,
    pub distances: DMatrix<f64>,
    pub spec_tag: String,
    pub noise: Option<NoiseRecord>,
    /// Largest endpoint miss over the computed pairs.
    pub max_miss: f64,
}

impl BoundaryDistanceData {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn radius(&self) -> f64 {
        self.points.radius
    }

    pub fn excluded_pairs(&self) -> usize {
        self.distances.iter().filter(|d| d.is_nan()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        writeln!(
            w,
            "# n={n} R={} spec={} units=time",
            self.radius(),
            self.spec_tag
        )?;
        if let Some(nr) = self.noise {
            writeln!(w, "# noise sigma={} seed={}", nr.sigma, nr.seed)?;
        }
        writeln!(w, "i,j,angle_i,angle_j,d")?;
        for i in 0..n {
            for j in 0..n {
                writeln!(
                    w,
                    "{i},{j},{:.16e},{:.16e},{:.16e}",
                    self.points.angles[i], self.points.angles[j], self.distances[(i, j)]
                )?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, 1, "empty file"))?;
        let (n, radius, spec_tag) = parse_header(header)?;
        let mut noise = None;
        let mut distances = DMatrix::from_element(n, n, f64::NAN);
        let mut angles = vec![f64::NAN; n];
        let mut seen = vec![false; n * n];
        let mut rows = 0usize;
        for (line, text) in lines {
            let t = text.trim();
            if t.is_empty() || t == "i,j,angle_i,angle_j,d" {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                noise = Some(parse_noise(rest, line)?);
                continue;
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::parse(line, 1, format!("expected 5 fields, found {}", fields.len())));
            }
            let col = |k: usize| 1 + fields[..k].iter().map(|f| f.len() + 1).sum::<usize>();
            let index = |k: usize| -> Result<usize> {
                fields[k]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(line, col(k), format!("bad index '{}': {e}", fields[k])))
            };
            let real = |k: usize| -> Result<f64> {
                fields[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(line, col(k), format!("bad number '{}': {e}", fields[k])))
            };
            let (i, j) = (index(0)?, index(1)?);
            let (ai, aj, d) = (real(2)?, real(3)?, real(4)?);
            if i >= n || j >= n {
                return Err(Error::Structural(format!(
                    "line {line}: index ({i}, {j}) out of range for n={n}"
                )));
            }
            for (k, a) in [(i, ai), (j, aj)] {
                if angles[k].is_nan() {
                    angles[k] = a;
                } else if angles[k].to_bits() != a.to_bits() {
                    return Err(Error::Structural(format!(
                        "line {line}: point {k} has angle {a}, earlier {}",
                        angles[k]
                    )));
                }
            }
            if std::mem::replace(&mut seen[i * n + j], true) {
                return Err(Error::Structural(format!("line {line}: duplicate pair ({i}, {j})")));
            }
            distances[(i, j)] = d;
            rows += 1;
        }
        if rows != n * n {
            return Err(Error::Structural(format!(
                "header says n={n} ({} pairs), file has {rows}",
                n * n
            )));
        }
        Ok(Self {
            points: BoundaryPoints { radius, angles },
            distances,
            spec_tag,
            noise,
            max_miss: 0.0,
        })
    }
}

fn parse_header(line: &str) -> Result<(usize, f64, String)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(1, 1, "expected '# n=<n> R=<R> spec=<hash> units=time'"))?;
    let (mut n, mut radius, mut tag, mut units) = (None, None, None, None);
    for tok in body.split_whitespace() {
        let column = line.find(tok).unwrap_or(0) + 1;
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(1, column, format!("expected key=value, found '{tok}'")))?;
        let bad = |e: &dyn std::fmt::Display| Error::parse(1, column, format!("bad {key}: {e}"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "R" => radius = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
            "spec" => tag = Some(value.to_string()),
            "units" => units = Some(value.to_string()),
            _ => return Err(Error::parse(1, column, format!("unknown header key '{key}'"))),
        }
    }
    if units.as_deref() != Some("time") {
        return Err(Error::parse(1, 1, "header must declare units=time"));
    }
    match (n, radius, tag) {
        (Some(n), Some(r), Some(t)) => Ok((n, r, t)),
        _ => Err(Error::parse(1, 1, "header needs n, R and spec")),
    }
}

fn parse_noise(rest: &str, line: usize) -> Result<NoiseRecord> {
    let mut toks = rest.split_whitespace();
    if toks.next() != Some("noise") {
        return Err(Error::parse(line, 1, "unexpected comment line"));
    }
    let (mut sigma, mut seed) = (None, None);
    for tok in toks {
        match tok.split_once('=') {
            Some(("sigma", v)) => sigma = v.parse::<f64>().ok(),
            Some(("seed", v)) => seed = v.parse::<u64>().ok(),
            _ => return Err(Error::parse(line, 1, format!("bad noise field '{tok}'"))),
        }
    }
    match (sigma, seed) {
        (Some(sigma), Some(seed)) => Ok(NoiseRecord { sigma, seed }),
        _ => Err(Error::parse(line, 1, "noise line needs sigma and seed")),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatrixOptions {
    pub shooting: ShootingOptions,
    /// Chord length below which a pair is excluded, relative to `R`.
    pub min_separation: f64,
}

impl MatrixOptions {
    pub fn for_radius(radius: f64) -> Self {
        Self {
            shooting: ShootingOptions::for_radius(radius),
            min_separation: MIN_SEPARATION,
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.shooting.execution = exec;
        self
    }
}

/// All pairwise distances. One fan per source point; sources run through
/// `opts.shooting.execution`, pair failures carry their indices.
pub fn distance_matrix(
    spec: &RandersSpec<2>,
    points: &BoundaryPoints,
    opts: &MatrixOptions,
) -> Result<BoundaryDistanceData> {
    let n = points.len();
    let radius = spec.domain().radius;
    if (points.radius - radius).abs() > 1e-12 * radius {
        return Err(Error::InvalidArgument(format!(
            "points lie on radius {}, domain radius is {radius}",
            points.radius
        )));
    }
    let exec = opts.shooting.execution;
    let mut inner = opts.shooting;
    inner.execution = Execution::Serial;
    let rows = map_indexed(n, exec, |i| -> Result<Vec<(f64, f64)>> {
        let xi = points.point(i);
        let mut fan = None;
        let mut row = vec![(f64::NAN, 0.0); n];
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                *cell = (0.0, 0.0);
                continue;
            }
            if (xi - points.point(j)).norm() < opts.min_separation * radius {
                continue;
            }
            let pair = |e| Error::Pair {
                i,
                j,
                source: Box::new(e),
            };
            if fan.is_none() {
                fan = Some(shoot_fan(spec, points.angles[i], &inner).map_err(pair)?);
            }
            let r = solve_from_fan(spec, fan.as_ref().unwrap(), points.angles[j], &inner).map_err(pair)?;
            *cell = (r.distance, r.miss);
        }
        Ok(row)
    });
    let mut distances = DMatrix::from_element(n, n, f64::NAN);
    let mut max_miss = 0.0f64;
    for (i, row) in rows.into_iter().enumerate() {
        for (j, (d, miss)) in row?.into_iter().enumerate() {
            distances[(i, j)] = d;
            max_miss = max_miss.max(miss);
        }
    }
    Ok(BoundaryDistanceData {
        points: points.clone(),
        distances,
        spec_tag: spec.tag().to_string(),
        noise: None,
        max_miss,
    })
}

/// `S = (D + D^T) / 2` and `A = (D - D^T) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub symmetric: DMatrix<f64>,
    pub antisymmetric: DMatrix<f64>,
}

pub fn decompose(data: &BoundaryDistanceData) -> Decomposition {
    let d = &data.distances;
    let t = d.transpose();
    Decomposition {
        symmetric: (d + &t) * 0.5,
        antisymmetric: (d - &t) * 0.5,
    }
}

/// Adds independent `N(0, sigma^2)` noise to every off-diagonal entry, in
/// row-major order from a ChaCha8 stream seeded with `seed`.
pub fn add_noise(data: &BoundaryDistanceData, sigma: f64, seed: u64) -> Result<BoundaryDistanceData> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be finite and >= 0, got {sigma}")));
    }
    if data.noise.is_some() {
        return Err(Error::InvalidArgument("data already carries noise".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    let n = data.n();
    for i in 0..n {
        for j in 0..n {
            if i != j && out.distances[(i, j)].is_finite() {
                out.distances[(i, j)] += normal.sample(&mut rng);
            }
        }
    }
    out.noise = Some(NoiseRecord { sigma, seed });
    Ok(out)
}

/// Matrix CSV: a `# header` line, then one row per line at 17 significant
/// digits.
pub fn write_matrix_csv<W: Write>(mut w: W, header: &str, m: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "# {header}")?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Largest `|a - b|` over entries finite in both.
pub fn max_abs_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
