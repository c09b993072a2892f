//! Weighted training loss `lambda_D L_D + lambda_B L_B + lambda_I L_I`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{
    eval_jets, loss_param_gradient, Deriv, GroupJets, JetBatch, ParamGradient, PointGroup, Tape, Var,
};
use crate::error::{Error, Result};
use crate::network::CompositeModel;
use crate::problems::{manufactured_source, ProblemId, ProblemSpec};
use crate::sampling::PointSet;

/// Which model family and loss a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One plain MLP per component, mean-squared residual and boundary loss.
    Pinn,
    /// Plain MLP with soft residual weighting and a boosted right boundary
    /// penalty; defined for `cd1d` only.
    Pipinn,
    /// Composite model built from the problem's layer recipe.
    Cpinn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Pinn => "pinn",
            Variant::Pipinn => "pipinn",
            Variant::Cpinn => "cpinn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "pinn" => Ok(Variant::Pinn),
            "pipinn" => Ok(Variant::Pipinn),
            "cpinn" => Ok(Variant::Cpinn),
            _ => Err(Error::config(format!("unknown model variant `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_d: f64,
    pub lambda_b: f64,
    pub lambda_i: f64,
    /// Extra factor on the `x = 1` boundary term of the PI-PINN loss.
    pub lambda_bc_right: f64,
    /// Scale of the PI-PINN residual weight `exp(-lambda |R|)`.
    pub lambda_soft: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_d: 1.0, lambda_b: 1.0, lambda_i: 0.0, lambda_bc_right: 3.0, lambda_soft: 0.8 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_d, self.lambda_b, self.lambda_i, self.lambda_bc_right, self.lambda_soft];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::config(format!("loss weights must be finite and non-negative: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub residual_term: f64,
    pub boundary_term: f64,
    pub initial_term: f64,
}

/// `(1/N) sum_i sum_c R_c(x_i)^2`.
pub fn residual_mse(residuals: &[Vec<f64>]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::config("residual MSE over an empty point set"));
    }
    let sum: f64 = residuals.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum();
    Ok(sum / residuals.len() as f64)
}

/// `sum_i exp(-lambda |R_i|) R_i^2`; a sum over points, not a mean.
pub fn soft_weighted_residual_loss(residuals: &[Vec<f64>], lambda_soft: f64) -> f64 {
    residuals.iter().flatten().map(|r| (-lambda_soft * r.abs()).exp() * r * r).sum()
}

/// `(1/N_B) sum_i sum_c (u_c(x_i) - g_c(x_i))^2`.
pub fn boundary_mse<G>(model: &CompositeModel, boundary: &PointSet, g: G) -> Result<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if boundary.is_empty() {
        return Err(Error::config("boundary MSE over an empty point set"));
    }
    let jets = eval_jets(model, &boundary.coords, false)?;
    let mut sum = 0.0;
    for (p, x) in boundary.iter().enumerate() {
        for (c, gc) in g(x).into_iter().enumerate() {
            sum += (jets[c].value(p) - gc).powi(2);
        }
    }
    Ok(sum / boundary.len() as f64)
}

/// Prescribed values at initial-time points. No shipped benchmark is time
/// dependent, so training never sets one; the term exists for custom
/// objectives.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub points: PointSet,
    /// `n x components` row-major targets.
    pub values: Vec<f64>,
}

/// Training objective for one problem, point set and variant. The source
/// term is evaluated once at construction.
#[derive(Clone, Debug)]
pub struct Objective<'a> {
    pub spec: &'a ProblemSpec,
    pub variant: Variant,
    pub weights: LossWeights,
    collocation: &'a PointSet,
    /// `n x equations`.
    source: Vec<f64>,
    boundary: &'a PointSet,
    /// `n_b x components`.
    boundary_data: Vec<f64>,
    initial: Option<&'a InitialCondition>,
}

impl<'a> Objective<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        variant: Variant,
        weights: LossWeights,
        collocation: &'a PointSet,
        boundary: &'a PointSet,
    ) -> Result<Self> {
        weights.validate()?;
        if collocation.is_empty() || boundary.is_empty() {
            return Err(Error::config("collocation and boundary point sets must be non-empty"));
        }
        if collocation.dim != spec.dim || boundary.dim != spec.dim {
            return Err(Error::config("point sets do not match the problem dimension"));
        }
        if variant == Variant::Pipinn && spec.id != ProblemId::Cd1d {
            return Err(Error::config(format!("the pipinn loss is defined for cd1d only, not {}", spec.id)));
        }
        let mut source = Vec::with_capacity(collocation.len() * spec.operator.n_equations);
        for x in collocation.iter() {
            source.extend(manufactured_source(spec, x)?);
        }
        let boundary_data = boundary.iter().flat_map(|x| spec.boundary_value(x)).collect();
        Ok(Objective { spec, variant, weights, collocation, source, boundary, boundary_data, initial: None })
    }

    pub fn with_initial(mut self, initial: &'a InitialCondition) -> Result<Self> {
        if initial.points.dim != self.spec.dim
            || initial.values.len() != initial.points.len() * self.spec.n_components
            || initial.points.is_empty()
        {
            return Err(Error::config("initial condition does not match the problem layout"));
        }
        self.initial = Some(initial);
        Ok(self)
    }

    /// The model must be a composite built from the problem recipe for
    /// `cpinn`, and a bare MLP per component otherwise.
    pub fn check_model(&self, model: &CompositeModel) -> Result<()> {
        if model.input_dim() != self.spec.dim || model.n_components() != self.spec.n_components {
            return Err(Error::config(format!(
                "model maps R^{} to R^{} but {} needs R^{} to R^{}",
                model.input_dim(),
                model.n_components(),
                self.spec.id,
                self.spec.dim,
                self.spec.n_components
            )));
        }
        let matches_recipe = model.inner().len() == self.spec.recipe.len()
            && model
                .inner()
                .iter()
                .zip(&self.spec.recipe)
                .all(|(i, r)| i.component == r.component && i.blend == r.blend);
        let ok = match self.variant {
            Variant::Cpinn => matches_recipe,
            Variant::Pinn | Variant::Pipinn => model.inner().is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "model architecture does not match variant {} for {}",
                self.variant, self.spec.id
            )))
        }
    }

    fn groups(&self) -> Vec<PointGroup<'_>> {
        let mut groups = vec![
            PointGroup { points: &self.collocation.coords, derivs: true },
            PointGroup { points: &self.boundary.coords, derivs: false },
        ];
        if let Some(init) = self.initial {
            groups.push(PointGroup { points: &init.points.coords, derivs: false });
        }
        groups
    }

    /// Loss terms via the forward pass only.
    pub fn evaluate(&self, model: &CompositeModel) -> Result<LossBreakdown> {
        self.check_model(model)?;
        let jets: Vec<Vec<JetBatch>> =
            self.groups().iter().map(|g| eval_jets(model, g.points, g.derivs)).collect::<Result<_>>()?;
        let get = |g: usize, c: usize, p: usize, d: Deriv| jets[g][c].get(p, d);
        Ok(self.assemble(get, |v: f64| v, 0.0))
    }

    /// Loss terms and the exact gradient of the total.
    pub fn value_and_gradient(&self, model: &CompositeModel) -> Result<(LossBreakdown, ParamGradient)> {
        self.check_model(model)?;
        let mut breakdown = LossBreakdown::default();
        let (_, grad) = loss_param_gradient(model, &self.groups(), |tape: &Tape, jets: &[GroupJets<'_>]| {
            let get = |g: usize, c: usize, p: usize, d: Deriv| jets[g].var(c, p, d);
            let zero = tape.constant(0.0);
            let (b, total) = self.assemble_vars(get, zero);
            breakdown = b;
            total
        })?;
        Ok((breakdown, grad))
    }

    fn assemble_vars<'t, G>(&self, get: G, zero: Var<'t>) -> (LossBreakdown, Var<'t>)
    where
        G: Fn(usize, usize, usize, Deriv) -> Var<'t>,
    {
        let mut total = zero;
        let b = self.assemble_with(get, |v: Var<'t>| v.value(), zero, &mut total);
        (b, total)
    }

    fn assemble<G, V>(&self, get: G, value: V, zero: f64) -> LossBreakdown
    where
        G: Fn(usize, usize, usize, Deriv) -> f64,
        V: Fn(f64) -> f64,
    {
        let mut total = zero;
        self.assemble_with(get, value, zero, &mut total)
    }

    /// Shared loss assembly for plain floats and tape variables. `get(g, c,
    /// p, d)` reads jet entry `d` of component `c` at point `p` of group `g`
    /// (0 collocation, 1 boundary, 2 initial).
    fn assemble_with<T, G, V>(&self, get: G, value: V, zero: T, total: &mut T) -> LossBreakdown
    where
        T: Copy
            + std::ops::Add<Output = T>
            + std::ops::Sub<f64, Output = T>
            + std::ops::Mul<Output = T>
            + std::ops::Mul<f64, Output = T>,
        G: Fn(usize, usize, usize, Deriv) -> T,
        V: Fn(T) -> f64,
    {
        let spec = self.spec;
        let n_eq = spec.operator.n_equations;
        let n_c = spec.n_components;
        let soft = self.variant == Variant::Pipinn;

        let mut residual = zero;
        for (p, x) in self.collocation.iter().enumerate() {
            for eq in 0..n_eq {
                let r = spec.operator.apply(eq, x, |c, d| get(0, c, p, d)) - self.source[p * n_eq + eq];
                let sq = r * r;
                residual = residual
                    + if soft {
                        // The weight is a constant for differentiation.
                        sq * (-self.weights.lambda_soft * value(r).abs()).exp()
                    } else {
                        sq
                    };
            }
        }
        if !soft {
            residual = residual * (1.0 / self.collocation.len() as f64);
        }

        let mut boundary = zero;
        for (p, x) in self.boundary.iter().enumerate() {
            let w = if soft && x[0] == 1.0 { self.weights.lambda_bc_right } else { 1.0 };
            for c in 0..n_c {
                let e = get(1, c, p, Deriv::Value) - self.boundary_data[p * n_c + c];
                boundary = boundary + e * e * w;
            }
        }
        if !soft {
            boundary = boundary * (1.0 / self.boundary.len() as f64);
        }

        let mut initial = zero;
        if let Some(init) = self.initial {
            for p in 0..init.points.len() {
                for c in 0..n_c {
                    let e = get(2, c, p, Deriv::Value) - init.values[p * n_c + c];
                    initial = initial + e * e;
                }
            }
            initial = initial * (1.0 / init.points.len() as f64);
        }

        let w = &self.weights;
        *total = residual * w.lambda_d + boundary * w.lambda_b + initial * w.lambda_i;
        LossBreakdown {
            total: value(*total),
            residual_term: value(residual),
            boundary_term: value(boundary),
            initial_term: value(initial),
        }
    }
}

/// Loss breakdown of `model` on the given points.
pub fn total_loss(
    model: &CompositeModel,
    spec: &ProblemSpec,
    collocation: &PointSet,
    boundary: &PointSet,
    weights: LossWeights,
    variant: Variant,
) -> Result<LossBreakdown> {
    Objective::new(spec, variant, weights, collocation, boundary)?.evaluate(model)
}
