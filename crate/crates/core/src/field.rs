//! Field catalog: scalar fields, vector fields, Riemannian metrics and
//! 1-forms on a domain in `R^D`.
//!
//! Every field is a small tree that evaluates generically over
//! [`Scalar`], which gives exact derivative rules by dual numbers.

use crate::expr::Expr;
use crate::jet::{Jet, Jet2, Scalar};
use nalgebra::{SMatrix, SVector};

pub type Point<const D: usize> = SVector<f64, D>;

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    /// `amplitude * (1 - |x|^2 / radius^2)`, vanishing on the sphere of the
    /// given radius.
    Bump { amplitude: f64, radius: f64 },
    /// `sum_i coeffs[i] * x^i`.
    Linear(Vec<f64>),
    Expr(Expr),
}

impl ScalarField {
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            ScalarField::Constant(v) => S::constant(*v),
            ScalarField::Bump { amplitude, radius } => {
                let mut r2 = S::constant(0.0);
                for &xi in x {
                    r2 = r2 + xi * xi;
                }
                (-(r2 / (radius * radius)) + 1.0) * *amplitude
            }
            ScalarField::Linear(a) => {
                let mut s = S::constant(0.0);
                for (xi, ai) in x.iter().zip(a) {
                    s = s + *xi * *ai;
                }
                s
            }
            ScalarField::Expr(e) => e.eval(x),
        }
    }

    pub fn value<const D: usize>(&self, x: &Point<D>) -> f64 {
        self.eval::<f64>(x.as_slice())
    }

    pub fn jet<const D: usize>(&self, x: &Point<D>) -> Jet<D> {
        self.eval(&Jet::variables(x))
    }

    pub fn jet2<const D: usize>(&self, x: &Point<D>) -> Jet2<D> {
        self.eval(&Jet2::variables(x))
    }

    pub fn gradient<const D: usize>(&self, x: &Point<D>) -> SVector<f64, D> {
        self.jet(x).grad
    }

    /// Largest coordinate index the field refers to, plus one.
    pub fn coordinate_count(&self) -> usize {
        match self {
            ScalarField::Constant(_) | ScalarField::Bump { .. } => 0,
            ScalarField::Linear(a) => a.len(),
            ScalarField::Expr(e) => e.coordinate_count(),
        }
    }

    /// True when the field depends only on `|x|`.
    pub fn is_radial(&self) -> bool {
        match self {
            ScalarField::Constant(_) | ScalarField::Bump { .. } => true,
            ScalarField::Linear(a) => a.iter().all(|&c| c == 0.0),
            ScalarField::Expr(e) => e.is_radial(),
        }
    }

    /// Value and first two radial derivatives for a radial field.
    pub fn radial_derivatives(&self, r: f64) -> Option<(f64, f64, f64)> {
        if !self.is_radial() {
            return None;
        }
        match self {
            ScalarField::Constant(v) => Some((*v, 0.0, 0.0)),
            ScalarField::Bump { amplitude, radius } => {
                let k = amplitude / (radius * radius);
                Some((amplitude - k * r * r, -2.0 * k * r, -2.0 * k))
            }
            ScalarField::Linear(_) => Some((0.0, 0.0, 0.0)),
            ScalarField::Expr(e) => Some(e.radial_derivatives(r)),
        }
    }
}

/// Contravariant vector field, e.g. the flow of a moving medium.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Zero,
    Constant(Vec<f64>),
    Components(Vec<ScalarField>),
    /// `strength * (-x2, x1)` in the first coordinate plane.
    Vortex { strength: f64 },
}

impl VectorField {
    pub fn eval<S: Scalar, const D: usize>(&self, x: &[S; D]) -> [S; D] {
        match self {
            VectorField::Zero => [S::constant(0.0); D],
            VectorField::Constant(v) => {
                std::array::from_fn(|i| S::constant(v.get(i).copied().unwrap_or(0.0)))
            }
            VectorField::Components(c) => std::array::from_fn(|i| {
                c.get(i)
                    .map(|f| f.eval(x.as_slice()))
                    .unwrap_or(S::constant(0.0))
            }),
            VectorField::Vortex { strength } => {
                let mut out = [S::constant(0.0); D];
                out[0] = -x[1] * *strength;
                out[1] = x[0] * *strength;
                out
            }
        }
    }

    pub fn value<const D: usize>(&self, x: &Point<D>) -> Point<D> {
        let xs: [f64; D] = std::array::from_fn(|i| x[i]);
        Point::from(self.eval(&xs))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorField::Zero => true,
            VectorField::Constant(v) => v.iter().all(|&c| c == 0.0),
            VectorField::Components(c) => c.iter().all(|f| *f == ScalarField::Constant(0.0)),
            VectorField::Vortex { strength } => *strength == 0.0,
        }
    }

    pub fn coordinate_count(&self) -> usize {
        match self {
            VectorField::Zero => 0,
            VectorField::Constant(v) => v.len(),
            VectorField::Components(c) => c
                .iter()
                .map(|f| f.coordinate_count())
                .max()
                .unwrap_or(0)
                .max(c.len()),
            VectorField::Vortex { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricFlavor {
    Euclidean,
    ConformalRadial,
    Conformal,
    General,
}

/// Symmetric positive-definite metric field `g_ij(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricField {
    Euclidean,
    /// `c(x)^-2 * delta_ij` for a sound speed `c`.
    Conformal { speed: ScalarField },
    /// Upper triangle, row-major, of a symmetric matrix of fields.
    Matrix { upper: Vec<ScalarField> },
    /// Riemannian part of the Zermelo navigation metric over a background.
    Zermelo {
        background: Box<MetricField>,
        flow: VectorField,
    },
    /// The same metric written out for a conformal background `c^-2 e`.
    ConformalZermelo { speed: ScalarField, flow: VectorField },
}

impl MetricField {
    pub fn eval<S: Scalar, const D: usize>(&self, x: &[S; D]) -> [[S; D]; D] {
        match self {
            MetricField::Euclidean => std::array::from_fn(|i| {
                std::array::from_fn(|j| S::constant(if i == j { 1.0 } else { 0.0 }))
            }),
            MetricField::Conformal { speed } => {
                let c = speed.eval(x.as_slice());
                let inv = (c * c).recip();
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| if i == j { inv } else { S::constant(0.0) })
                })
            }
            MetricField::Matrix { upper } => {
                let mut m = [[S::constant(0.0); D]; D];
                let mut k = 0;
                for i in 0..D {
                    for j in i..D {
                        let v = upper[k].eval(x.as_slice());
                        m[i][j] = v;
                        m[j][i] = v;
                        k += 1;
                    }
                }
                m
            }
            MetricField::Zermelo { background, flow } => {
                let (g, lower, lambda) = zermelo_parts(background, flow, x);
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| g[i][j] / lambda + (lower[i] / lambda) * (lower[j] / lambda))
                })
            }
            MetricField::ConformalZermelo { speed, flow } => {
                let c = speed.eval(x.as_slice());
                let w = flow.eval(x);
                let c2inv = (c * c).recip();
                let mut w2 = S::constant(0.0);
                for wi in &w {
                    w2 = w2 + *wi * *wi;
                }
                let denom = -(c2inv * w2) + 1.0;
                let c4inv = c2inv * c2inv;
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        let iso = if i == j { c2inv / denom } else { S::constant(0.0) };
                        iso + c4inv * w[i] * w[j] / (denom * denom)
                    })
                })
            }
        }
    }

    pub fn matrix<const D: usize>(&self, x: &Point<D>) -> SMatrix<f64, D, D> {
        let xs: [f64; D] = std::array::from_fn(|i| x[i]);
        let m = self.eval(&xs);
        SMatrix::from_fn(|i, j| m[i][j])
    }

    /// Metric values and their partial derivatives: `(g, [d_1 g, ..., d_D g])`.
    pub fn jet<const D: usize>(
        &self,
        x: &Point<D>,
    ) -> (SMatrix<f64, D, D>, [SMatrix<f64, D, D>; D]) {
        let m = self.eval(&Jet::variables(x));
        let g = SMatrix::from_fn(|i, j| m[i][j].value);
        let dg = std::array::from_fn(|k| SMatrix::from_fn(|i, j| m[i][j].grad[k]));
        (g, dg)
    }

    pub fn flavor(&self) -> MetricFlavor {
        match self {
            MetricField::Euclidean => MetricFlavor::Euclidean,
            MetricField::Conformal { speed } if speed.is_radial() => MetricFlavor::ConformalRadial,
            MetricField::Conformal { .. } => MetricFlavor::Conformal,
            _ => MetricFlavor::General,
        }
    }

    /// Sound speed of a conformal metric `c^-2 e` (Euclidean counts as `c = 1`).
    pub fn conformal_speed(&self) -> Option<ScalarField> {
        match self {
            MetricField::Euclidean => Some(ScalarField::Constant(1.0)),
            MetricField::Conformal { speed } => Some(speed.clone()),
            _ => None,
        }
    }
}

fn zermelo_parts<S: Scalar, const D: usize>(
    background: &MetricField,
    flow: &VectorField,
    x: &[S; D],
) -> ([[S; D]; D], [S; D], S) {
    let g = background.eval(x);
    let w = flow.eval(x);
    let lower: [S; D] = std::array::from_fn(|i| {
        let mut s = S::constant(0.0);
        for j in 0..D {
            s = s + g[i][j] * w[j];
        }
        s
    });
    let mut w2 = S::constant(0.0);
    for i in 0..D {
        w2 = w2 + lower[i] * w[i];
    }
    (g, lower, -w2 + 1.0)
}

/// A 1-form `beta_i(x) dx^i`.
#[derive(Debug, Clone, PartialEq)]
pub enum OneForm {
    Zero,
    Constant(Vec<f64>),
    /// Exact form `d phi`.
    Gradient(ScalarField),
    /// `strength * (-x2, x1) / 2`; its exterior derivative is
    /// `strength * dx1 ^ dx2`.
    Rotational { strength: f64 },
    /// Components identified with a vector field, `beta_i = V^i`.
    Components(VectorField),
    /// 1-form part of the Zermelo navigation metric.
    Zermelo {
        background: MetricField,
        flow: VectorField,
    },
    ConformalZermelo { speed: ScalarField, flow: VectorField },
    /// First-order Zermelo 1-form `-W^i / c^2`.
    Linearized { speed: ScalarField, flow: VectorField },
    Sum(Vec<OneForm>),
    Scaled(f64, Box<OneForm>),
}

impl OneForm {
    fn eval_generic<S: Scalar, const D: usize>(&self, x: &[S; D]) -> Option<[S; D]> {
        Some(match self {
            OneForm::Zero => [S::constant(0.0); D],
            OneForm::Constant(v) => {
                std::array::from_fn(|i| S::constant(v.get(i).copied().unwrap_or(0.0)))
            }
            OneForm::Rotational { strength } => {
                let mut out = [S::constant(0.0); D];
                out[0] = -x[1] * (0.5 * strength);
                out[1] = x[0] * (0.5 * strength);
                out
            }
            OneForm::Components(v) => v.eval(x),
            OneForm::Zermelo { background, flow } => {
                let (_, lower, lambda) = zermelo_parts(background, flow, x);
                std::array::from_fn(|i| -(lower[i] / lambda))
            }
            OneForm::ConformalZermelo { speed, flow } => {
                let c = speed.eval(x.as_slice());
                let w = flow.eval(x);
                let c2inv = (c * c).recip();
                let mut w2 = S::constant(0.0);
                for wi in &w {
                    w2 = w2 + *wi * *wi;
                }
                let denom = -(c2inv * w2) + 1.0;
                std::array::from_fn(|i| -(c2inv * w[i] / denom))
            }
            OneForm::Linearized { speed, flow } => {
                let c = speed.eval(x.as_slice());
                let w = flow.eval(x);
                let c2inv = (c * c).recip();
                std::array::from_fn(|i| -(w[i] * c2inv))
            }
            OneForm::Gradient(_) | OneForm::Sum(_) | OneForm::Scaled(..) => return None,
        })
    }

    pub fn value<const D: usize>(&self, x: &Point<D>) -> SVector<f64, D> {
        match self {
            OneForm::Gradient(phi) => phi.gradient(x),
            OneForm::Sum(parts) => parts.iter().map(|p| p.value(x)).sum(),
            OneForm::Scaled(k, inner) => inner.value(x) * *k,
            _ => {
                let xs: [f64; D] = std::array::from_fn(|i| x[i]);
                SVector::from(self.eval_generic(&xs).expect("generic form"))
            }
        }
    }

    /// Value and Jacobian `J[(i, k)] = d beta_i / d x^k`.
    pub fn jet<const D: usize>(&self, x: &Point<D>) -> (SVector<f64, D>, SMatrix<f64, D, D>) {
        match self {
            OneForm::Gradient(phi) => {
                let j = phi.jet2(x);
                (j.grad, j.hess)
            }
            OneForm::Sum(parts) => parts.iter().fold(
                (SVector::zeros(), SMatrix::zeros()),
                |(v, m), p| {
                    let (pv, pm) = p.jet(x);
                    (v + pv, m + pm)
                },
            ),
            OneForm::Scaled(k, inner) => {
                let (v, m) = inner.jet(x);
                (v * *k, m * *k)
            }
            _ => {
                let j = self.eval_generic(&Jet::variables(x)).expect("generic form");
                (
                    SVector::from_fn(|i, _| j[i].value),
                    SMatrix::from_fn(|i, k| j[i].grad[k]),
                )
            }
        }
    }

    /// True when the form is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            OneForm::Zero => true,
            OneForm::Constant(v) => v.iter().all(|&c| c == 0.0),
            OneForm::Gradient(phi) => matches!(phi, ScalarField::Constant(_)),
            OneForm::Rotational { strength } => *strength == 0.0,
            OneForm::Components(v) => v.is_zero(),
            OneForm::Zermelo { flow, .. }
            | OneForm::ConformalZermelo { flow, .. }
            | OneForm::Linearized { flow, .. } => flow.is_zero(),
            OneForm::Sum(parts) => parts.iter().all(|p| p.is_zero()),
            OneForm::Scaled(k, inner) => *k == 0.0 || inner.is_zero(),
        }
    }

    pub fn negated(&self) -> OneForm {
        match self {
            OneForm::Scaled(k, inner) if *k == -1.0 => (**inner).clone(),
            _ => OneForm::Scaled(-1.0, Box::new(self.clone())),
        }
    }

    pub fn plus(&self, other: OneForm) -> OneForm {
        match self {
            OneForm::Zero => other,
            OneForm::Sum(parts) => {
                let mut parts = parts.clone();
                parts.push(other);
                OneForm::Sum(parts)
            }
            _ => OneForm::Sum(vec![self.clone(), other]),
        }
    }
}
