//! Randers norms of moving media (Zermelo navigation), their conformal and
//! first-order forms, and the Herglotz condition for radial sound speeds.

use crate::error::{Error, Result};
use crate::field::{MetricField, MetricFlavor, OneForm, ScalarField, VectorField};
use crate::finsler::{curve_length, Domain, RandersSpec, VALIDITY_GRID_POINTS};
use crate::geodesic::GeodesicPath;

/// A background metric `g` with a flow `W` that must stay slower than the
/// unit wave speed, `|W|_g < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumModel {
    pub domain: Domain,
    pub background: MetricField,
    pub flow: VectorField,
}

impl MediumModel {
    pub fn new(domain: Domain, background: MetricField, flow: VectorField) -> Self {
        Self {
            domain,
            background,
            flow,
        }
    }

    /// Sound speed `c` with `g = c^-2 e`.
    pub fn conformal(domain: Domain, speed: ScalarField, flow: VectorField) -> Self {
        Self::new(domain, MetricField::Conformal { speed }, flow)
    }

    pub fn flavor(&self) -> MetricFlavor {
        self.background.flavor()
    }

    /// `sup |W|_g` over the validity grid.
    pub fn max_flow_speed(&self) -> f64 {
        self.domain
            .probe_grid::<2>(VALIDITY_GRID_POINTS)
            .iter()
            .map(|x| {
                let w = self.flow.value(x);
                w.dot(&(self.background.matrix(x) * w)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn check_speed(&self) -> Result<()> {
        let speed = self.max_flow_speed();
        if speed < 1.0 {
            Ok(())
        } else {
            Err(Error::FlowTooFast { speed })
        }
    }
}

/// `alpha_ij = g_ij / lambda + W_i W_j / lambda^2`, `beta_i = -W_i / lambda`
/// with `W_i = g_ij W^j` and `lambda = 1 - |W|_g^2`.
pub fn zermelo_construct(m: &MediumModel) -> Result<RandersSpec<2>> {
    m.check_speed()?;
    RandersSpec::new(
        m.domain,
        MetricField::Zermelo {
            background: Box::new(m.background.clone()),
            flow: m.flow.clone(),
        },
        OneForm::Zermelo {
            background: m.background.clone(),
            flow: m.flow.clone(),
        },
    )
}

/// The same construction written out for `g = c^-2 e`.
pub fn conformal_specialize(domain: Domain, speed: &ScalarField, flow: &VectorField) -> Result<RandersSpec<2>> {
    MediumModel::conformal(domain, speed.clone(), flow.clone()).check_speed()?;
    RandersSpec::new(
        domain,
        MetricField::ConformalZermelo {
            speed: speed.clone(),
            flow: flow.clone(),
        },
        OneForm::ConformalZermelo {
            speed: speed.clone(),
            flow: flow.clone(),
        },
    )
}

/// First-order norm `c^-1 |y| - W.y / c^2` with its smallness ratio.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub spec: RandersSpec<2>,
    /// `sup |W|_e / c` over the validity grid.
    pub rho: f64,
}

pub fn linearize(domain: Domain, speed: &ScalarField, flow: &VectorField) -> Result<Linearization> {
    let rho = domain
        .probe_grid::<2>(VALIDITY_GRID_POINTS)
        .iter()
        .map(|x| flow.value(x).norm() / speed.value(x))
        .fold(0.0, f64::max);
    let spec = RandersSpec::new(
        domain,
        MetricField::Conformal {
            speed: speed.clone(),
        },
        OneForm::Linearized {
            speed: speed.clone(),
            flow: flow.clone(),
        },
    )?;
    Ok(Linearization { spec, rho })
}

pub const HERGLOTZ_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerglotzReport {
    pub holds: bool,
    /// Minimum of `d/dr (r / c(r))` on the grid.
    pub margin: f64,
    /// Radius where the minimum occurs.
    pub argmin: f64,
}

/// Evaluates `d/dr (r / c) = (c - r c') / c^2` on 1000 points of `[0, R]`.
pub fn herglotz_check(speed: &ScalarField, radius: f64) -> Result<HerglotzReport> {
    if !speed.is_radial() {
        return Err(Error::InvalidArgument(
            "Herglotz condition needs a radial sound speed".into(),
        ));
    }
    let mut report = HerglotzReport {
        holds: true,
        margin: f64::INFINITY,
        argmin: 0.0,
    };
    for k in 0..HERGLOTZ_GRID_POINTS {
        let r = radius * k as f64 / (HERGLOTZ_GRID_POINTS - 1) as f64;
        let (c, dc, _) = speed.radial_derivatives(r).expect("radial profile");
        let v = (c - r * dc) / (c * c);
        if v < report.margin {
            report.margin = v;
            report.argmin = r;
        }
    }
    report.holds = report.margin > 0.0;
    Ok(report)
}

/// `|T - L_F(gamma)|` with `L_F` by quadrature along the stored path.
pub fn travel_time_consistency(m: &MediumModel, path: &GeodesicPath<2>) -> Result<f64> {
    let spec = zermelo_construct(m)?;
    path.check_tag(&spec)?;
    let l = curve_length(&spec, path)?;
    Ok((path.exit_time - l.total).abs())
}
