//! The benchmark registry: operators, manufactured solutions and the
//! composite architecture recipe of each problem.
//!
//! Every benchmark is linear, so its operator is stored as a list of
//! [`Term`]s `coeff(x) * d u_c` per equation. The source term `f` is never
//! written down by hand: it is the operator applied to jets of the closed
//! form solution, obtained with forward-mode [`Dual2`] numbers.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{eval_jet, Deriv, Dual2, Jet2, JetSource, Scalar};
use crate::error::{Error, Result};
use crate::network::{BlendDescriptor, BoundaryDistance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    /// `-eps u'' + u' + u = f`, layer at x = 1.
    Cd1d,
    /// `-eps^2 u'' + 8u = f`, layers at both ends.
    Rd1d,
    /// Coupled convection-diffusion, layers at x = 0.
    CdCoupled,
    /// Coupled reaction-diffusion, layers at both ends.
    RdCoupled,
    /// `-eps Lap u - (2 - x) u_x - u_y + 3/2 u = f` on the unit square.
    Cd2dEx2,
    /// `-eps Lap u - u_x - u_y + u = f` on the unit square.
    Cd2dEx3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 6] = [
        ProblemId::Cd1d,
        ProblemId::Rd1d,
        ProblemId::CdCoupled,
        ProblemId::RdCoupled,
        ProblemId::Cd2dEx2,
        ProblemId::Cd2dEx3,
    ];

    /// Name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Cd1d => "cd1d",
            ProblemId::Rd1d => "rd1d",
            ProblemId::CdCoupled => "cd-coupled",
            ProblemId::RdCoupled => "rd-coupled",
            ProblemId::Cd2dEx2 => "cd2d-ex2",
            ProblemId::Cd2dEx3 => "cd2d-ex3",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemId::Cd2dEx2 | ProblemId::Cd2dEx3 => 2,
            _ => 1,
        }
    }

    pub fn n_components(self) -> usize {
        match self {
            ProblemId::CdCoupled | ProblemId::RdCoupled => 2,
            _ => 1,
        }
    }

    pub fn is_coupled(self) -> bool {
        self.n_components() == 2
    }

    pub fn default_epsilon(self) -> f64 {
        match self {
            ProblemId::CdCoupled => 1e-7,
            ProblemId::RdCoupled => 1e-10,
            _ => 1e-5,
        }
    }

    pub fn default_mu(self) -> Option<f64> {
        match self {
            ProblemId::CdCoupled => Some(1e-5),
            ProblemId::RdCoupled => Some(1e-8),
            _ => None,
        }
    }

    /// Default epoch budget of the benchmark run.
    pub fn default_epochs(self) -> usize {
        if self.dim() == 1 && !self.is_coupled() {
            10_000
        } else {
            7_000
        }
    }

    /// Default hidden widths `(outer, inner)`.
    pub fn default_widths(self) -> (usize, usize) {
        if self.dim() == 1 && !self.is_coupled() {
            (50, 100)
        } else {
            (100, 150)
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown problem id `{s}`")))
    }
}

/// A coefficient that is constant or affine in one coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coeff {
    Const(f64),
    Affine { constant: f64, slope: f64, axis: usize },
}

impl Coeff {
    pub fn at(&self, x: &[f64]) -> f64 {
        match *self {
            Coeff::Const(c) => c,
            Coeff::Affine { constant, slope, axis } => constant + slope * x[axis],
        }
    }
}

/// `coeff(x) * deriv(u_component)` contributing to equation `equation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub equation: usize,
    pub component: usize,
    pub deriv: Deriv,
    pub coeff: Coeff,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    pub n_equations: usize,
    pub terms: Vec<Term>,
}

impl LinearOperator {
    /// `L[u]_eq(x)`, summing the terms in declaration order. `get(c, d)`
    /// supplies the jet entry `d` of component `c` at `x`.
    pub fn apply<T, G>(&self, equation: usize, x: &[f64], get: G) -> T
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
        G: Fn(usize, Deriv) -> T,
    {
        self.terms
            .iter()
            .filter(|t| t.equation == equation)
            .map(|t| get(t.component, t.deriv) * t.coeff.at(x))
            .reduce(|a, b| a + b)
            .expect("every equation has at least one term")
    }
}

/// One inner subnetwork of the composite architecture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerRecipe {
    pub component: usize,
    pub blend: BlendDescriptor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub dim: usize,
    pub n_components: usize,
    pub epsilon: f64,
    pub mu: Option<f64>,
    pub operator: LinearOperator,
    pub recipe: Vec<LayerRecipe>,
}

impl ProblemSpec {
    /// The benchmark with its default perturbation parameters.
    pub fn with_defaults(id: ProblemId) -> Self {
        Self::new(id, id.default_epsilon(), id.default_mu()).expect("defaults are valid")
    }

    /// `mu` is required by the coupled systems and ignored otherwise.
    pub fn new(id: ProblemId, epsilon: f64, mu: Option<f64>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::config(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        let mu = if id.is_coupled() {
            let mu = mu.ok_or_else(|| Error::config(format!("{id} needs a second parameter mu")))?;
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(Error::config(format!("mu must lie in (0, 1], got {mu}")));
            }
            Some(mu)
        } else {
            None
        };
        let (eps, m) = (epsilon, mu.unwrap_or(0.0));
        let c = Coeff::Const;
        let t = |equation, component, deriv, coeff| Term { equation, component, deriv, coeff };
        use Deriv::{First, Second, Value};
        let (n_equations, terms) = match id {
            ProblemId::Cd1d => {
                (1, vec![t(0, 0, Second(0), c(-eps)), t(0, 0, First(0), c(1.0)), t(0, 0, Value, c(1.0))])
            }
            ProblemId::Rd1d => (1, vec![t(0, 0, Second(0), c(-eps * eps)), t(0, 0, Value, c(8.0))]),
            ProblemId::CdCoupled => (
                2,
                vec![
                    t(0, 0, Second(0), c(-eps)),
                    t(0, 0, First(0), c(-1.0)),
                    t(0, 0, Value, c(2.0)),
                    t(0, 1, Value, c(-1.0)),
                    t(1, 1, Second(0), c(-m)),
                    t(1, 1, First(0), c(-2.0)),
                    t(1, 1, Value, c(4.0)),
                    t(1, 0, Value, c(-1.0)),
                ],
            ),
            ProblemId::RdCoupled => (
                2,
                vec![
                    t(0, 0, Second(0), c(-eps * eps)),
                    t(0, 0, Value, c(2.0)),
                    t(0, 1, Value, c(-1.0)),
                    t(1, 1, Second(0), c(-m * m)),
                    t(1, 0, Value, c(-1.0)),
                    t(1, 1, Value, c(4.0)),
                ],
            ),
            ProblemId::Cd2dEx2 => (
                1,
                vec![
                    t(0, 0, Second(0), c(-eps)),
                    t(0, 0, Second(1), c(-eps)),
                    t(0, 0, First(0), Coeff::Affine { constant: -2.0, slope: 1.0, axis: 0 }),
                    t(0, 0, First(1), c(-1.0)),
                    t(0, 0, Value, c(1.5)),
                ],
            ),
            ProblemId::Cd2dEx3 => (
                1,
                vec![
                    t(0, 0, Second(0), c(-eps)),
                    t(0, 0, Second(1), c(-eps)),
                    t(0, 0, First(0), c(-1.0)),
                    t(0, 0, First(1), c(-1.0)),
                    t(0, 0, Value, c(1.0)),
                ],
            ),
        };

        let layer = |component, distance, delta| -> Result<LayerRecipe> {
            Ok(LayerRecipe { component, blend: BlendDescriptor::new(distance, delta)? })
        };
        let (lo, hi) = (BoundaryDistance::lower, BoundaryDistance::upper);
        let recipe = match id {
            ProblemId::Cd1d => vec![layer(0, hi(0), eps)?],
            ProblemId::Rd1d => vec![layer(0, lo(0), eps)?, layer(0, hi(0), eps)?],
            ProblemId::CdCoupled => vec![layer(0, lo(0), eps)?, layer(1, lo(0), m)?],
            ProblemId::RdCoupled => {
                vec![layer(0, lo(0), eps)?, layer(0, hi(0), eps)?, layer(1, lo(0), m)?, layer(1, hi(0), m)?]
            }
            // The inner net at y = 1 is auxiliary: the exact solution has no
            // layer there, but it does not vanish on that face either.
            ProblemId::Cd2dEx2 => vec![layer(0, lo(0), eps)?, layer(0, lo(1), eps)?, layer(0, hi(1), eps)?],
            ProblemId::Cd2dEx3 => vec![layer(0, lo(0), eps)?, layer(0, lo(1), eps)?],
        };

        Ok(ProblemSpec {
            id,
            dim: id.dim(),
            n_components: id.n_components(),
            epsilon,
            mu,
            operator: LinearOperator { n_equations, terms },
            recipe,
        })
    }

    /// Dirichlet data `g`; homogeneous for every benchmark.
    pub fn boundary_value(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.n_components]
    }

    /// Closed-form solution evaluated in any [`Scalar`] type.
    pub fn closed_form<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let eps = self.epsilon;
        let mu = self.mu.unwrap_or(1.0);
        let one = S::cst(1.0);
        // exp(-a / delta); arguments are <= 0 on the domain, so underflow to
        // zero is the correct limit.
        let decay = |a: S, delta: f64| (-a / delta).exp();
        let denom = |delta: f64| 1.0 - (-1.0 / delta).exp();
        match self.id {
            ProblemId::Cd1d => {
                let x = x[0];
                vec![(one - ((x - 1.0) / eps).exp()) * x.sin()]
            }
            ProblemId::Rd1d => {
                let x = x[0];
                vec![decay(x, eps) + decay(one - x, eps) - 1.0 - (-1.0 / eps).exp()]
            }
            ProblemId::CdCoupled => {
                let x = x[0];
                let ramp_mu = (one - decay(x, mu)) / denom(mu);
                let u1 = (one - decay(x, eps)) / denom(eps) + ramp_mu - (x * FRAC_PI_2).sin() * 2.0;
                let u2 = ramp_mu - x * (x - 1.0).exp();
                vec![u1, u2]
            }
            ProblemId::RdCoupled => {
                let x = x[0];
                let both = |delta: f64| (decay(x, delta) + decay(one - x, delta)) / denom(delta);
                let layer_mu = both(mu);
                vec![both(eps) + layer_mu - 2.0, layer_mu - 1.0]
            }
            ProblemId::Cd2dEx2 => {
                let (x, y) = (x[0], x[1]);
                let d = denom(eps);
                let xf = (x * FRAC_PI_2).cos() - (decay(x, eps) - (-1.0 / eps).exp()) / d;
                let yf = (one - decay(y, eps)) / d;
                vec![xf * yf]
            }
            ProblemId::Cd2dEx3 => {
                let (x, y) = (x[0], x[1]);
                vec![(x * PI).sin() * (y * PI).sin() * (one - decay(x, eps)) * (one - decay(y, eps))]
            }
        }
    }

    pub fn analytic(&self) -> Analytic<'_> {
        Analytic { spec: self }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::config(format!(
                "{} is {}-dimensional, got a point of dimension {}",
                self.id,
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// `L[u](x)` for the given component jets, without the source.
    pub fn apply_operator(&self, jets: &[Jet2], x: &[f64]) -> Vec<f64> {
        (0..self.operator.n_equations).map(|eq| self.operator.apply(eq, x, |c, d| jets[c].get(d))).collect()
    }
}

/// Exact solution values per component.
pub fn analytic_solution(spec: &ProblemSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_point(x)?;
    Ok(spec.closed_form(x))
}

/// `f = L[u_exact]`, with the derivatives of the closed form taken by
/// forward-mode differentiation.
pub fn manufactured_source(spec: &ProblemSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_point(x)?;
    let jets = (0..spec.n_components).map(|c| eval_jet(&spec.analytic(), x, c)).collect::<Result<Vec<_>>>()?;
    Ok(spec.apply_operator(&jets, x))
}

/// `L[u](x) - f(x)` per equation, for jets of a candidate solution at `x`.
pub fn residual(spec: &ProblemSpec, jets: &[Jet2], x: &[f64]) -> Result<Vec<f64>> {
    spec.check_point(x)?;
    if jets.len() != spec.n_components || jets.iter().any(|j| j.grad.len() != spec.dim) {
        return Err(Error::config(format!("{} needs {} jets of dimension {}", spec.id, spec.n_components, spec.dim)));
    }
    let f = manufactured_source(spec, x)?;
    Ok(spec.apply_operator(jets, x).into_iter().zip(f).map(|(l, f)| l - f).collect())
}

/// The closed-form solution viewed as a differentiable field.
#[derive(Clone, Copy, Debug)]
pub struct Analytic<'a> {
    spec: &'a ProblemSpec,
}

impl JetSource for Analytic<'_> {
    fn input_dim(&self) -> usize {
        self.spec.dim
    }

    fn n_outputs(&self) -> usize {
        self.spec.n_components
    }

    fn jet_unchecked(&self, x: &[f64], which: usize) -> Jet2 {
        let dim = self.spec.dim;
        let mut jet = Jet2::constant(0.0, dim);
        for axis in 0..dim {
            let seeded: Vec<Dual2> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == axis { Dual2::var(v) } else { Dual2::constant(v) })
                .collect();
            let u = self.spec.closed_form(&seeded)[which];
            jet.value = u.v;
            jet.grad[axis] = u.d;
            jet.hess_diag[axis] = u.dd;
        }
        jet
    }
}
