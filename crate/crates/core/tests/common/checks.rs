//! Finite-difference checks shared by the autodiff tests and the
//! acceptance run.

use rand::Rng;
use splayer::autodiff::{eval_jets, Jet2, ParamGradient};
use splayer::loss::{LossWeights, Objective, Variant};
use splayer::network::{seeded_rng, CompositeModel};
use splayer::problems::{manufactured_source, ProblemId, ProblemSpec};
use splayer::sampling::{boundary_points, lhs, uniform_collocation_1d, PointSet};

use super::dd::Dd;
use super::exact;
use super::{clear_of_clamp, close, extrapolated_differences, model_dd, random_model};

pub const H_INPUT: f64 = 1e-4;
pub const H_PARAM: f64 = 1e-5;

/// Recipes with layers thick enough for the blend to vary across the domain.
pub fn moderate(id: ProblemId) -> ProblemSpec {
    let mu = id.is_coupled().then_some(0.2);
    ProblemSpec::new(id, 0.05, mu).unwrap()
}

pub fn jets_at(model: &CompositeModel, x: &[f64]) -> Vec<Jet2> {
    eval_jets(model, x, true).unwrap().iter().map(|b| b.jet(0)).collect()
}

pub fn check_input_jets(spec: &ProblemSpec, seed: u64, cases: usize) {
    let mut rng = seeded_rng(seed);
    let mut checked = 0;
    while checked < cases {
        let model = random_model(spec, 4, 2, &mut rng);
        let x: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(0.01..0.99)).collect();
        if !clear_of_clamp(&model, &x, 4.0 * H_INPUT) {
            continue;
        }
        let jets = jets_at(&model, &x);
        for (c, jet) in jets.iter().enumerate() {
            let (v, g, h) = extrapolated_differences(|p: &[Dd]| model_dd(&model, p, c), &x, H_INPUT);
            assert!(close(jet.value, v, 1e-12, 1e-14), "{} value at {x:?}: {} vs {v}", spec.id, jet.value);
            for i in 0..spec.dim {
                assert!(
                    close(jet.grad[i], g[i], 1e-5, 1e-8),
                    "{} d/dx{i} at {x:?}: {} vs {}",
                    spec.id,
                    jet.grad[i],
                    g[i]
                );
                assert!(
                    close(jet.hess_diag[i], h[i], 1e-5, 1e-8),
                    "{} d2/dx{i}2 at {x:?}: {} vs {}",
                    spec.id,
                    jet.hess_diag[i],
                    h[i]
                );
            }
        }
        checked += 1;
    }
}

pub fn points(spec: &ProblemSpec, seed: u64) -> (PointSet, PointSet) {
    if spec.dim == 1 {
        (uniform_collocation_1d(20).unwrap(), boundary_points(1, 1).unwrap())
    } else {
        (lhs(16, 2, &mut seeded_rng(seed)).unwrap(), boundary_points(2, 1).unwrap())
    }
}

pub fn flat(grad: &ParamGradient) -> Vec<f64> {
    grad.iter().copied().collect()
}

/// The soft-weighted loss with its residual weights frozen at `weights`,
/// built from hand-written operators and exact sources.
pub fn soft_loss_frozen(
    spec: &ProblemSpec,
    model: &CompositeModel,
    col: &PointSet,
    bnd: &PointSet,
    frozen: Option<&[f64]>,
) -> (f64, Vec<f64>) {
    let lw = LossWeights::default();
    let mut residual = 0.0;
    let mut used = Vec::new();
    for (i, x) in col.iter().enumerate() {
        let to_jet = |j: &Jet2| exact::Jet { u: j.value, d1: j.grad.clone(), d2: j.hess_diag.clone() };
        let got: Vec<exact::Jet> = jets_at(model, x).iter().map(to_jet).collect();
        let mu = spec.mu.unwrap_or(1.0);
        let lhs = exact::operator(spec.id, spec.epsilon, mu, x, &got);
        let f = exact::operator(spec.id, spec.epsilon, mu, x, &exact::jets(spec.id, spec.epsilon, mu, x));
        let r = lhs[0] - f[0];
        let w = frozen.map_or((-lw.lambda_soft * r.abs()).exp(), |w| w[i]);
        used.push(w);
        residual += w * r * r;
    }
    let mut boundary = 0.0;
    for x in bnd.iter() {
        let w = if x[0] == 1.0 { lw.lambda_bc_right } else { 1.0 };
        boundary += w * model.forward(x).unwrap()[0].powi(2);
    }
    (lw.lambda_d * residual + lw.lambda_b * boundary, used)
}

pub fn check_param_gradient(spec: &ProblemSpec, variant: Variant, seed: u64) {
    let (col, bnd) = points(spec, seed);
    let objective = Objective::new(spec, variant, LossWeights::default(), &col, &bnd).unwrap();
    let mut rng = seeded_rng(seed);
    let mut model = random_model(spec, 4, 2, &mut rng);
    if variant != Variant::Cpinn {
        model = CompositeModel::new(model.outer().to_vec(), Vec::new()).unwrap();
    }
    let (breakdown, grad) = objective.value_and_gradient(&model).unwrap();
    let plain = objective.evaluate(&model).unwrap();
    assert!(close(breakdown.total, plain.total, 1e-12, 0.0));
    let analytic = flat(&grad);
    let soft = variant == Variant::Pipinn;
    let frozen = soft.then(|| {
        let (value, w) = soft_loss_frozen(spec, &model, &col, &bnd, None);
        assert!(close(value, plain.total, 1e-9, 1e-12), "{value} vs {}", plain.total);
        w
    });
    let mut k = 0;
    for net in 0..model.n_nets() {
        for p in 0..model.nets().nth(net).unwrap().n_params() {
            let shifted = |delta: f64| {
                let mut m = model.clone();
                m.nets_mut().nth(net).unwrap().params_mut()[p] += delta;
                match &frozen {
                    Some(w) => soft_loss_frozen(spec, &m, &col, &bnd, Some(w)).0,
                    None => objective.evaluate(&m).unwrap().total,
                }
            };
            let fd = (shifted(H_PARAM) - shifted(-H_PARAM)) / (2.0 * H_PARAM);
            assert!(
                close(analytic[k], fd, 1e-4, 1e-8),
                "{} {variant} net {net} param {p}: {} vs {fd}",
                spec.id,
                analytic[k]
            );
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
}

pub fn params(spec: &ProblemSpec) -> (f64, f64) {
    (spec.epsilon, spec.mu.unwrap_or(1.0))
}

/// Points within `5 delta` of a layer face, log-distributed in distance.
pub fn near_layer<R: Rng>(spec: &ProblemSpec, rng: &mut R) -> Vec<f64> {
    let layer = spec.recipe[rng.random_range(0..spec.recipe.len())].blend;
    let dist = layer.delta * 10f64.powf(rng.random_range(-3.0..(5f64).log10()));
    let mut x: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(0.01..0.99)).collect();
    x[layer.distance.axis()] = layer.distance.face() + layer.distance.slope() * dist;
    x
}

pub fn check_source(spec: &ProblemSpec, x: &[f64], rel: f64) {
    let (eps, mu) = params(spec);
    let f_lib = manufactured_source(spec, x).unwrap();
    let f_hand = exact::operator(spec.id, eps, mu, x, &exact::jets(spec.id, eps, mu, x));
    for (a, b) in f_lib.iter().zip(&f_hand) {
        assert!((a - b).abs() <= rel * b.abs().max(1.0), "{} at {x:?}: {a} vs {b}", spec.id);
    }
}
