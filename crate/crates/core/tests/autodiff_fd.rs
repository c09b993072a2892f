//! Input jets and parameter gradients checked against finite differences.

mod common;

use common::checks::{check_input_jets, check_param_gradient, flat, jets_at, moderate, points, H_INPUT};
use common::dd::Dd;
use common::{close, extrapolated_differences, model_dd, random_model};
use rand::Rng;
use splayer::autodiff::eval_jets;
use splayer::loss::{LossWeights, Objective, Variant};
use splayer::network::seeded_rng;
use splayer::problems::{ProblemId, ProblemSpec};

#[test]
fn double_double_exp_is_accurate() {
    let e = Dd::new(1.0).exp();
    assert_eq!(e.hi, std::f64::consts::E);
    assert!((e.lo - 1.445_646_891_729_250_1e-16).abs() < 1e-28);
    let mut rng = seeded_rng(3);
    for _ in 0..200 {
        let a = Dd::new(rng.random_range(-30.0..30.0));
        let r = a.exp() * (-a).exp() - Dd::ONE;
        assert!(r.to_f64().abs() < 1e-28, "{a:?}: {r:?}");
    }
}

#[test]
fn input_jets_match_finite_differences_moderate_layers() {
    for (k, id) in ProblemId::ALL.into_iter().enumerate() {
        check_input_jets(&moderate(id), 100 + k as u64, 100);
    }
}

#[test]
fn input_jets_match_finite_differences_default_layers() {
    for (k, id) in ProblemId::ALL.into_iter().enumerate() {
        check_input_jets(&ProblemSpec::with_defaults(id), 200 + k as u64, 100);
    }
}

#[test]
fn jets_near_a_thin_layer_face() {
    let spec = ProblemSpec::new(ProblemId::Rd1d, 1e-3, None).unwrap();
    let mut rng = seeded_rng(11);
    for _ in 0..50 {
        let model = random_model(&spec, 4, 2, &mut rng);
        let x = [rng.random_range(1e-3..5e-3)];
        let jet = &jets_at(&model, &x)[0];
        let (v, g, h) = extrapolated_differences(|p: &[Dd]| model_dd(&model, p, 0), &x, 1e-6);
        assert!(close(jet.value, v, 1e-12, 1e-14));
        assert!(close(jet.grad[0], g[0], 1e-5, 1e-8), "{} vs {}", jet.grad[0], g[0]);
        assert!(close(jet.hess_diag[0], h[0], 1e-5, 1e-8), "{} vs {}", jet.hess_diag[0], h[0]);
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    for (k, id) in ProblemId::ALL.into_iter().enumerate() {
        for spec in [moderate(id), ProblemSpec::with_defaults(id)] {
            check_param_gradient(&spec, Variant::Cpinn, 300 + k as u64);
            check_param_gradient(&spec, Variant::Pinn, 400 + k as u64);
        }
    }
    check_param_gradient(&ProblemSpec::with_defaults(ProblemId::Cd1d), Variant::Pipinn, 500);
    check_param_gradient(&moderate(ProblemId::Cd1d), Variant::Pipinn, 501);
}

#[test]
fn gradient_is_linear_in_the_loss_weights() {
    for (k, id) in ProblemId::ALL.into_iter().enumerate() {
        let spec = moderate(id);
        let (col, bnd) = points(&spec, 600 + k as u64);
        let model = random_model(&spec, 4, 2, &mut seeded_rng(600 + k as u64));
        let grad_with = |lambda_d: f64, lambda_b: f64| {
            let weights = LossWeights { lambda_d, lambda_b, ..LossWeights::default() };
            let objective = Objective::new(&spec, Variant::Cpinn, weights, &col, &bnd).unwrap();
            flat(&objective.value_and_gradient(&model).unwrap().1)
        };
        let (a, b) = (2.5, 0.75);
        let both = grad_with(a, b);
        let (g1, g2) = (grad_with(1.0, 0.0), grad_with(0.0, 1.0));
        for i in 0..both.len() {
            let want = a * g1[i] + b * g2[i];
            let scale = (a * g1[i]).abs() + (b * g2[i]).abs();
            assert!((both[i] - want).abs() <= 1e-12 * scale, "{id} entry {i}: {} vs {want}", both[i]);
        }
    }
}

#[test]
fn jets_and_gradients_are_deterministic() {
    for (k, id) in ProblemId::ALL.into_iter().enumerate() {
        let spec = moderate(id);
        let (col, bnd) = points(&spec, 700 + k as u64);
        let model = random_model(&spec, 4, 2, &mut seeded_rng(700 + k as u64));
        let a = eval_jets(&model, &col.coords, true).unwrap();
        let b = eval_jets(&model, &col.coords, true).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        let objective = Objective::new(&spec, Variant::Cpinn, LossWeights::default(), &col, &bnd).unwrap();
        let g1 = flat(&objective.value_and_gradient(&model).unwrap().1);
        let g2 = flat(&objective.value_and_gradient(&model).unwrap().1);
        assert!(g1.iter().zip(&g2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn xavier_mlp_jet_at_fixed_point() {
    use splayer::autodiff::eval_jet;
    use splayer::network::{hidden_layout, xavier_init, Mlp};
    let mlp: Mlp = xavier_init(&hidden_layout(1, 50, 3), 7).unwrap();
    let jet = eval_jet(&mlp, &[0.3], 0).unwrap();
    let (v, g, h) = common::central_differences(|p: &[Dd]| common::mlp_dd(&mlp, p), &[0.3], H_INPUT);
    assert!(close(jet.value, v, 1e-12, 1e-14));
    assert!(close(jet.grad[0], g[0], 1e-5, 1e-8), "{} vs {}", jet.grad[0], g[0]);
    assert!(close(jet.hess_diag[0], h[0], 1e-5, 1e-8), "{} vs {}", jet.hess_diag[0], h[0]);
}
