//! Dense tanh networks and composite boundary-layer models.
//!
//! An [`Mlp`] stores all of its parameters in one flat vector laid out layer
//! by layer: the weight matrix of layer `k` (shape `sizes[k+1] x sizes[k]`,
//! row-major) followed by its bias vector. Gradients and optimizer state use
//! the same layout, so a parameter and its gradient share an index.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub mod checkpoint;

/// Lower and upper clamp applied to the exponent in [`safe_exp`].
pub const EXP_CLAMP: f64 = 20.0;

/// `exp(clamp(z, -20, 20))`.
pub fn safe_exp(z: f64) -> f64 {
    z.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// Hidden-layer activation: `tanh` through a single `exp` call, with an
/// absolute error below `4e-16`.
#[inline]
pub fn activation(z: f64) -> f64 {
    let e = (-2.0 * z.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(z)
}

/// The RNG used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// An MLP with every parameter set to zero.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let offsets = layer_offsets(layer_sizes);
        let len = *offsets.last().expect("offsets are never empty");
        Ok(Mlp { sizes: layer_sizes.to_vec(), offsets, params: vec![0.0; len] })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes)?;
        if params.len() != mlp.params.len() {
            return Err(Error::config(format!(
                "layer sizes {:?} need {} parameters, got {}",
                layer_sizes,
                mlp.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("network parameters must be finite"));
        }
        mlp.params = params;
        Ok(mlp)
    }

    /// Xavier/Glorot uniform weights, zero biases.
    pub fn xavier(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::xavier_with_rng(layer_sizes, &mut seeded_rng(seed))
    }

    pub fn xavier_with_rng<R: rand::Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes)?;
        for k in 0..mlp.n_layers() {
            let (fan_in, fan_out) = (mlp.sizes[k], mlp.sizes[k + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
            let start = mlp.offsets[k];
            for w in &mut mlp.params[start..start + fan_in * fan_out] {
                *w = dist.sample(rng);
            }
        }
        Ok(mlp)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    /// Number of weight matrices.
    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of layer `k`'s weight block and bias block in the flat vector.
    pub fn layer_range(&self, k: usize) -> (usize, usize) {
        let w = self.offsets[k];
        (w, w + self.sizes[k] * self.sizes[k + 1])
    }

    pub fn weights(&self, k: usize) -> &[f64] {
        let (w, b) = self.layer_range(k);
        &self.params[w..b]
    }

    pub fn biases(&self, k: usize) -> &[f64] {
        let (_, b) = self.layer_range(k);
        &self.params[b..b + self.sizes[k + 1]]
    }

    /// Plain scalar forward pass: tanh on hidden layers, identity output.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input dimension mismatch");
        let mut a = x.to_vec();
        for k in 0..self.n_layers() {
            let (w, b) = (self.weights(k), self.biases(k));
            let n_in = self.sizes[k];
            let last = k + 1 == self.n_layers();
            a = b
                .iter()
                .enumerate()
                .map(|(o, bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = row.iter().zip(&a).fold(*bias, |acc, (wi, ai)| acc + wi * ai);
                    if last {
                        z
                    } else {
                        activation(z)
                    }
                })
                .collect();
        }
        a
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::config(format!("an MLP needs at least an input and an output size, got {sizes:?}")));
    }
    if sizes.contains(&0) {
        return Err(Error::config(format!("layer sizes must be positive, got {sizes:?}")));
    }
    Ok(())
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    offsets.push(0);
    for pair in sizes.windows(2) {
        acc += pair[0] * pair[1] + pair[1];
        offsets.push(acc);
    }
    offsets
}

/// Distance `p(x)` from a boundary face, measured along one coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryDistance {
    /// `p(x) = x[axis] - origin`; the face is `x[axis] = origin`.
    Offset { axis: usize, origin: f64 },
    /// `p(x) = 1 - x[axis]`; the face is `x[axis] = 1`.
    Complement { axis: usize },
}

impl BoundaryDistance {
    pub fn lower(axis: usize) -> Self {
        BoundaryDistance::Offset { axis, origin: 0.0 }
    }

    pub fn upper(axis: usize) -> Self {
        BoundaryDistance::Complement { axis }
    }

    pub fn axis(&self) -> usize {
        match *self {
            BoundaryDistance::Offset { axis, .. } | BoundaryDistance::Complement { axis } => axis,
        }
    }

    /// Coordinate of the boundary face along [`axis`](Self::axis).
    pub fn face(&self) -> f64 {
        match *self {
            BoundaryDistance::Offset { origin, .. } => origin,
            BoundaryDistance::Complement { .. } => 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BoundaryDistance::Offset { axis, origin } => x[axis] - origin,
            BoundaryDistance::Complement { axis } => 1.0 - x[axis],
        }
    }

    /// `dp/dx[axis]`; the distance is affine so higher derivatives vanish.
    pub fn slope(&self) -> f64 {
        match self {
            BoundaryDistance::Offset { .. } => 1.0,
            BoundaryDistance::Complement { .. } => -1.0,
        }
    }
}

/// Location and thickness of one boundary layer: the factor
/// `safe_exp(-p(x) / delta)` that localizes an inner network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendDescriptor {
    pub distance: BoundaryDistance,
    pub delta: f64,
}

/// Value, gradient and Laplacian-diagonal of a blend factor at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendJet {
    pub value: f64,
    pub axis: usize,
    /// Derivative along `axis`; all other first derivatives are zero.
    pub d1: f64,
    /// Second derivative along `axis`.
    pub d2: f64,
}

impl BlendDescriptor {
    pub fn new(distance: BoundaryDistance, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config(format!("blend thickness must be positive, got {delta}")));
        }
        Ok(BlendDescriptor { distance, delta })
    }

    pub fn factor(&self, x: &[f64]) -> f64 {
        safe_exp(-self.distance.eval(x) / self.delta)
    }

    /// Jet of the factor. Outside the clamp window the factor is a constant,
    /// so both derivatives are zero there.
    pub fn jet(&self, x: &[f64]) -> BlendJet {
        let z = -self.distance.eval(x) / self.delta;
        let axis = self.distance.axis();
        if (-EXP_CLAMP..=EXP_CLAMP).contains(&z) {
            let value = z.exp();
            let dz = -self.distance.slope() / self.delta;
            BlendJet { value, axis, d1: value * dz, d2: value * dz * dz }
        } else {
            BlendJet { value: safe_exp(z), axis, d1: 0.0, d2: 0.0 }
        }
    }
}

/// An inner (boundary-layer) subnetwork attached to one solution component.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerNet {
    pub net: Mlp,
    pub blend: BlendDescriptor,
    pub component: usize,
}

/// `u_c(x) = outer_c(x) + sum_j inner_j(x) * safe_exp(-p_j(x) / delta_j)`,
/// summed over the inner nets attached to component `c`.
///
/// A model without inner nets is a plain PINN with one MLP per component.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeModel {
    input_dim: usize,
    outer: Vec<Mlp>,
    inner: Vec<InnerNet>,
}

impl CompositeModel {
    pub fn new(outer: Vec<Mlp>, inner: Vec<InnerNet>) -> Result<Self> {
        let first = outer.first().ok_or_else(|| Error::config("a composite model needs at least one outer network"))?;
        let input_dim = first.input_dim();
        for net in outer.iter().chain(inner.iter().map(|i| &i.net)) {
            if net.input_dim() != input_dim || net.output_dim() != 1 {
                return Err(Error::config(format!(
                    "subnetwork {:?} does not map R^{input_dim} to R",
                    net.layer_sizes()
                )));
            }
        }
        for i in &inner {
            if i.component >= outer.len() {
                return Err(Error::config(format!(
                    "inner net attached to component {} but the model has {}",
                    i.component,
                    outer.len()
                )));
            }
            if i.blend.distance.axis() >= input_dim {
                return Err(Error::config("blend axis outside the input dimension"));
            }
        }
        Ok(CompositeModel { input_dim, outer, inner })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_components(&self) -> usize {
        self.outer.len()
    }

    pub fn outer(&self) -> &[Mlp] {
        &self.outer
    }

    pub fn inner(&self) -> &[InnerNet] {
        &self.inner
    }

    /// All subnetworks, outer nets first, then inner nets in order.
    pub fn nets(&self) -> impl Iterator<Item = &Mlp> {
        self.outer.iter().chain(self.inner.iter().map(|i| &i.net))
    }

    pub fn nets_mut(&mut self) -> impl Iterator<Item = &mut Mlp> {
        self.outer.iter_mut().chain(self.inner.iter_mut().map(|i| &mut i.net))
    }

    pub fn n_nets(&self) -> usize {
        self.outer.len() + self.inner.len()
    }

    pub fn n_params(&self) -> usize {
        self.nets().map(Mlp::n_params).sum()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::config(format!(
                "point has dimension {} but the model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Plain evaluation of every component at `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out: Vec<f64> = self.outer.iter().map(|n| n.forward(x)[0]).collect();
        for i in &self.inner {
            out[i.component] += i.net.forward(x)[0] * i.blend.factor(x);
        }
        Ok(out)
    }
}

/// Free-function form of [`CompositeModel::forward`].
pub fn composite_forward(model: &CompositeModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

/// Free-function form of [`Mlp::xavier`].
pub fn xavier_init(layer_sizes: &[usize], seed: u64) -> Result<Mlp> {
    Mlp::xavier(layer_sizes, seed)
}

/// Layer sizes for a subnetwork with `depth` hidden layers of equal `width`.
pub fn hidden_layout(input_dim: usize, width: usize, depth: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(depth + 2);
    sizes.push(input_dim);
    sizes.extend(std::iter::repeat_n(width, depth));
    sizes.push(1);
    sizes
}
