//! Oracles shared by the integration tests. Nothing here calls into the
//! library's differentiation code.
#![allow(dead_code)]

pub mod checks;
pub mod dd;
pub mod exact;

use dd::Dd;
use rand::Rng;
use splayer::network::{hidden_layout, BoundaryDistance, CompositeModel, InnerNet, Mlp, EXP_CLAMP};
use splayer::problems::ProblemSpec;

/// `|got - want| <= max(rel * |want|, abs)`.
pub fn close(got: f64, want: f64, rel: f64, abs: f64) -> bool {
    (got - want).abs() <= (rel * want.abs()).max(abs)
}

/// An MLP with uniform random weights and biases in `[-scale, scale]`.
pub fn random_mlp<R: Rng>(sizes: &[usize], scale: f64, rng: &mut R) -> Mlp {
    let n = Mlp::zeros(sizes).unwrap().n_params();
    let params = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Mlp::from_params(sizes, params).unwrap()
}

/// A composite model following the recipe of `spec`, with random parameters.
pub fn random_model<R: Rng>(spec: &ProblemSpec, width: usize, depth: usize, rng: &mut R) -> CompositeModel {
    let sizes = hidden_layout(spec.dim, width, depth);
    let outer = (0..spec.n_components).map(|_| random_mlp(&sizes, 1.0, rng)).collect();
    let inner = spec
        .recipe
        .iter()
        .map(|r| InnerNet { net: random_mlp(&sizes, 1.0, rng), blend: r.blend, component: r.component })
        .collect();
    CompositeModel::new(outer, inner).unwrap()
}

/// The same recipe with every layer thickness replaced by `delta`.
pub fn with_thickness(model: &CompositeModel, delta: f64) -> CompositeModel {
    let inner = model
        .inner()
        .iter()
        .map(|i| {
            let mut i = i.clone();
            i.blend.delta = delta;
            i
        })
        .collect();
    CompositeModel::new(model.outer().to_vec(), inner).unwrap()
}

pub fn mlp_dd(net: &Mlp, x: &[Dd]) -> Dd {
    let sizes = net.layer_sizes();
    let mut a = x.to_vec();
    for k in 0..net.n_layers() {
        let (w, b) = (net.weights(k), net.biases(k));
        let n_in = sizes[k];
        let last = k + 1 == net.n_layers();
        a = (0..sizes[k + 1])
            .map(|o| {
                let mut z = Dd::new(b[o]);
                for i in 0..n_in {
                    z = z + Dd::new(w[o * n_in + i]) * a[i];
                }
                if last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect();
    }
    a[0]
}

fn blend_dd(distance: BoundaryDistance, delta: f64, x: &[Dd]) -> Dd {
    let p = match distance {
        BoundaryDistance::Offset { axis, origin } => x[axis] - Dd::new(origin),
        BoundaryDistance::Complement { axis } => Dd::ONE - x[axis],
    };
    let z = -p / Dd::new(delta);
    if z.hi > EXP_CLAMP {
        Dd::new(EXP_CLAMP).exp()
    } else if z.hi < -EXP_CLAMP {
        Dd::new(-EXP_CLAMP).exp()
    } else {
        z.exp()
    }
}

/// Component `c` of the composite model in double-double precision.
pub fn model_dd(model: &CompositeModel, x: &[Dd], c: usize) -> Dd {
    let mut u = mlp_dd(&model.outer()[c], x);
    for inner in model.inner().iter().filter(|i| i.component == c) {
        u = u + mlp_dd(&inner.net, x) * blend_dd(inner.blend.distance, inner.blend.delta, x);
    }
    u
}

/// Central differences of `f` at `x` along each axis, computed in
/// double-double. Returns `(value, gradient, second derivatives)`.
pub fn central_differences(f: impl Fn(&[Dd]) -> Dd, x: &[f64], h: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let base: Vec<Dd> = x.iter().map(|&v| Dd::new(v)).collect();
    let f0 = f(&base);
    let h = Dd::new(h);
    let mut grad = Vec::new();
    let mut hess = Vec::new();
    for i in 0..x.len() {
        let mut plus = base.clone();
        plus[i] = plus[i] + h;
        let mut minus = base.clone();
        minus[i] = minus[i] - h;
        let (fp, fm) = (f(&plus), f(&minus));
        grad.push(((fp - fm) / (Dd::new(2.0) * h)).to_f64());
        hess.push(((fp - Dd::new(2.0) * f0 + fm) / (h * h)).to_f64());
    }
    (f0.to_f64(), grad, hess)
}

/// True when every layer face is farther than `margin` from `x` in units of
/// the clamp window, so finite differences never straddle a clamp kink.
pub fn clear_of_clamp(model: &CompositeModel, x: &[f64], margin: f64) -> bool {
    model.inner().iter().all(|i| {
        let z = i.blend.distance.eval(x) / i.blend.delta;
        (z - EXP_CLAMP).abs() > margin / i.blend.delta && (z + EXP_CLAMP).abs() > margin / i.blend.delta
    })
}

/// Central differences at steps `h` and `h / 2` combined by one Richardson
/// step, which cancels the `h^2` truncation term.
pub fn extrapolated_differences(f: impl Fn(&[Dd]) -> Dd, x: &[f64], h: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let (v, g1, h1) = central_differences(&f, x, h);
    let (_, g2, h2) = central_differences(&f, x, h / 2.0);
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    (v, mix(&g1, &g2), mix(&h1, &h2))
}

/// Textbook Adam on a scalar objective with gradient `grad`, returning the
/// iterate after every step.
pub fn reference_adam(grad: impl Fn(f64) -> f64, theta0: f64, lr: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut theta) = (0.0, 0.0, theta0);
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = grad(theta);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powf(t as f64));
        let v_hat = v / (1.0 - b2.powf(t as f64));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(theta);
    }
    out
}

/// Runs the library optimizer on the same objective.
pub fn library_adam(grad: impl Fn(f64) -> f64, theta0: f64, lr: f64, steps: usize) -> Vec<f64> {
    let mut state = splayer::optim::AdamState::new(1, lr);
    let mut theta = [theta0];
    (0..steps)
        .map(|e| {
            let g = [grad(theta[0])];
            state.step(&mut theta, &g, e).unwrap();
            theta[0]
        })
        .collect()
}

/// Gradient, start point and learning rate of a scalar Adam test problem.
pub type AdamCase = (fn(f64) -> f64, f64, f64);

pub const ADAM_CASES: [AdamCase; 3] =
    [(|t| 2.0 * (t - 3.0), 0.0, 0.1), (|t| 4.0 * t.powi(3) - 3.0 * t, 1.5, 0.01), (|t| t.cos() + 0.1 * t, -2.0, 0.05)];
