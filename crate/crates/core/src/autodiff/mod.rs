//! Exact input jets (value, gradient, Laplacian diagonal) of network outputs
//! and exact parameter gradients of losses built from those jets.
//!
//! Jets are pushed forward analytically through each dense tanh layer for a
//! whole batch of points at once (see [`dense`]). A loss is assembled on a
//! scalar [`Tape`] whose leaves are the jet entries; one reverse sweep of the
//! tape gives the loss adjoint of every jet entry, and the layer-wise reverse
//! pass carries those adjoints back to the weights. Mixed second derivatives
//! are not propagated.

mod dense;
pub mod dual;
pub mod tape;

pub use dual::{Dual2, Scalar};
pub use tape::{Tape, Var};

use dense::{channels, MlpTrace};

use crate::error::{Error, Result};
use crate::network::{BlendJet, CompositeModel, Mlp};

/// Value, gradient and diagonal of the Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, dim: usize) -> Self {
        Jet2 { value, grad: vec![0.0; dim], hess_diag: vec![0.0; dim] }
    }

    pub fn get(&self, d: Deriv) -> f64 {
        match d {
            Deriv::Value => self.value,
            Deriv::First(i) => self.grad[i],
            Deriv::Second(i) => self.hess_diag[i],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess_diag.iter().all(|h| h.is_finite())
    }
}

/// Selects one entry of a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deriv {
    Value,
    /// `du/dx_i`
    First(usize),
    /// `d2u/dx_i^2`
    Second(usize),
}

/// Jets of one scalar field at `n` points, stored channel-major:
/// `data[channel * n + point]` with channel 0 the value, `1..=d` the first
/// derivatives and `d+1..=2d` the second derivatives. Value-only batches
/// carry just channel 0.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    dim: usize,
    n: usize,
    derivs: bool,
    data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(dim: usize, n: usize, derivs: bool) -> Self {
        JetBatch { dim, n, derivs, data: vec![0.0; channels(dim, derivs) * n] }
    }

    pub(crate) fn from_raw(dim: usize, n: usize, derivs: bool, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), channels(dim, derivs) * n);
        JetBatch { dim, n, derivs, data }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_derivs(&self) -> bool {
        self.derivs
    }

    pub fn offset(&self, p: usize, d: Deriv) -> usize {
        let ch = match d {
            Deriv::Value => 0,
            Deriv::First(i) | Deriv::Second(i) if !self.derivs || i >= self.dim => {
                panic!("jet batch does not carry {d:?}")
            }
            Deriv::First(i) => 1 + i,
            Deriv::Second(i) => 1 + self.dim + i,
        };
        ch * self.n + p
    }

    pub fn get(&self, p: usize, d: Deriv) -> f64 {
        self.data[self.offset(p, d)]
    }

    pub fn value(&self, p: usize) -> f64 {
        self.data[p]
    }

    pub fn values(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn jet(&self, p: usize) -> Jet2 {
        let mut jet = Jet2::constant(self.value(p), self.dim);
        if self.derivs {
            for i in 0..self.dim {
                jet.grad[i] = self.get(p, Deriv::First(i));
                jet.hess_diag[i] = self.get(p, Deriv::Second(i));
            }
        }
        jet
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `d loss / d theta` for every subnetwork of a [`CompositeModel`], outer
/// nets first, each in its MLP's flat parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub nets: Vec<Vec<f64>>,
}

impl ParamGradient {
    pub fn zeros(model: &CompositeModel) -> Self {
        ParamGradient { nets: model.nets().map(|n| vec![0.0; n.n_params()]).collect() }
    }

    pub fn len(&self) -> usize {
        self.nets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.nets.iter().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Anything whose outputs can be differentiated twice with respect to its
/// inputs.
pub trait JetSource {
    fn input_dim(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// Called only with a point of the right dimension and a valid output.
    fn jet_unchecked(&self, x: &[f64], which: usize) -> Jet2;
}

/// Value, gradient and Hessian diagonal of output `which` at `x`.
pub fn eval_jet<M: JetSource + ?Sized>(model: &M, x: &[f64], which: usize) -> Result<Jet2> {
    if x.len() != model.input_dim() {
        return Err(Error::config(format!(
            "point has dimension {} but the model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    if which >= model.n_outputs() {
        return Err(Error::config(format!("output {which} requested from a model with {} outputs", model.n_outputs())));
    }
    Ok(model.jet_unchecked(x, which))
}

impl JetSource for Mlp {
    fn input_dim(&self) -> usize {
        Mlp::input_dim(self)
    }
    fn n_outputs(&self) -> usize {
        self.output_dim()
    }
    fn jet_unchecked(&self, x: &[f64], which: usize) -> Jet2 {
        MlpTrace::forward(self, x, true).output_jets(which).jet(0)
    }
}

impl JetSource for CompositeModel {
    fn input_dim(&self) -> usize {
        CompositeModel::input_dim(self)
    }
    fn n_outputs(&self) -> usize {
        self.n_components()
    }
    fn jet_unchecked(&self, x: &[f64], which: usize) -> Jet2 {
        CompositeTrace::forward(self, x, true).expect("dimension checked by eval_jet").components()[which].jet(0)
    }
}

/// Forward jets of every component of a composite model over a batch,
/// retained for the reverse pass.
#[derive(Clone, Debug)]
pub struct CompositeTrace {
    traces: Vec<MlpTrace>,
    /// `blends[j][p]`: blend jet of inner net `j` at point `p`.
    blends: Vec<Vec<BlendJet>>,
    components: Vec<JetBatch>,
}

impl CompositeTrace {
    /// `points` is `n x d` row-major.
    pub fn forward(model: &CompositeModel, points: &[f64], derivs: bool) -> Result<Self> {
        let dim = model.input_dim();
        if points.len() % dim != 0 {
            return Err(Error::config(format!("{} coordinates do not form {dim}-dimensional points", points.len())));
        }

        let traces: Vec<MlpTrace> = model.nets().map(|net| MlpTrace::forward(net, points, derivs)).collect();
        let mut components: Vec<JetBatch> = traces[..model.n_components()].iter().map(|t| t.output_jets(0)).collect();
        let mut blends = Vec::with_capacity(model.inner().len());
        for (j, inner) in model.inner().iter().enumerate() {
            let jets: Vec<BlendJet> = points.chunks_exact(dim).map(|x| inner.blend.jet(x)).collect();
            let net = traces[model.n_components() + j].output_jets(0);
            let u = &mut components[inner.component];
            for (p, b) in jets.iter().enumerate() {
                u.data[p] += net.value(p) * b.value;
                if derivs {
                    for i in 0..dim {
                        let (gi, hi) = (u.offset(p, Deriv::First(i)), u.offset(p, Deriv::Second(i)));
                        let mut g = net.data[gi] * b.value;
                        let mut h = net.data[hi] * b.value;
                        if i == b.axis {
                            g += net.value(p) * b.d1;
                            h += 2.0 * net.data[gi] * b.d1 + net.value(p) * b.d2;
                        }
                        u.data[gi] += g;
                        u.data[hi] += h;
                    }
                }
            }
            blends.push(jets);
        }
        Ok(CompositeTrace { traces, blends, components })
    }

    pub fn components(&self) -> &[JetBatch] {
        &self.components
    }

    pub fn into_components(self) -> Vec<JetBatch> {
        self.components
    }

    /// Accumulates into `grad` the parameter gradient implied by `adjoints`,
    /// the loss adjoint of each component batch in [`JetBatch`] layout.
    pub fn backward(&self, model: &CompositeModel, adjoints: &[Vec<f64>], grad: &mut ParamGradient) {
        assert_eq!(adjoints.len(), model.n_components());
        let n_outer = model.n_components();
        for (c, net) in model.outer().iter().enumerate() {
            self.traces[c].backward(net, adjoints[c].clone(), &mut grad.nets[c]);
        }
        for (j, inner) in model.inner().iter().enumerate() {
            let ubar = &adjoints[inner.component];
            let u = &self.components[inner.component];
            let mut nbar = vec![0.0; ubar.len()];
            for (p, b) in self.blends[j].iter().enumerate() {
                nbar[p] = ubar[p] * b.value;
                if u.derivs {
                    let dim = u.dim;
                    let ga = u.offset(p, Deriv::First(b.axis));
                    let ha = u.offset(p, Deriv::Second(b.axis));
                    nbar[p] += ubar[ga] * b.d1 + ubar[ha] * b.d2;
                    for i in 0..dim {
                        let (gi, hi) = (u.offset(p, Deriv::First(i)), u.offset(p, Deriv::Second(i)));
                        nbar[gi] = ubar[gi] * b.value;
                        if i == b.axis {
                            nbar[gi] += 2.0 * ubar[hi] * b.d1;
                        }
                        nbar[hi] = ubar[hi] * b.value;
                    }
                }
            }
            self.traces[n_outer + j].backward(&inner.net, nbar, &mut grad.nets[n_outer + j]);
        }
    }
}

/// Forward-only jets of every component at a batch of points.
pub fn eval_jets(model: &CompositeModel, points: &[f64], derivs: bool) -> Result<Vec<JetBatch>> {
    Ok(CompositeTrace::forward(model, points, derivs)?.into_components())
}

/// A batch of points fed to [`loss_param_gradient`].
#[derive(Clone, Copy, Debug)]
pub struct PointGroup<'a> {
    /// `n x d` row-major coordinates.
    pub points: &'a [f64],
    /// Whether the loss needs first and second input derivatives here.
    pub derivs: bool,
}

/// Jet entries of one [`PointGroup`], exposed as tape variables.
pub struct GroupJets<'t> {
    tape: &'t Tape,
    jets: Vec<JetBatch>,
    base: Vec<u32>,
}

impl<'t> GroupJets<'t> {
    pub fn n_points(&self) -> usize {
        self.jets.first().map_or(0, JetBatch::n_points)
    }

    pub fn n_components(&self) -> usize {
        self.jets.len()
    }

    pub fn batch(&self, component: usize) -> &JetBatch {
        &self.jets[component]
    }

    pub fn var(&self, component: usize, p: usize, d: Deriv) -> Var<'t> {
        let jets = &self.jets[component];
        let off = jets.offset(p, d);
        self.tape.at(self.base[component] + off as u32, jets.data[off])
    }

    pub fn value(&self, component: usize, p: usize) -> Var<'t> {
        self.var(component, p, Deriv::Value)
    }
}

/// Evaluates a scalar loss assembled by `loss` from the jets at each point
/// group and returns it with its exact gradient over every parameter of
/// `model`, including contributions through input derivatives.
///
/// A non-finite loss or gradient is reported as [`Error::Divergence`] with
/// epoch 0; training code substitutes the real epoch.
pub fn loss_param_gradient<F>(
    model: &CompositeModel,
    groups: &[PointGroup<'_>],
    loss: F,
) -> Result<(f64, ParamGradient)>
where
    F: for<'t> FnOnce(&'t Tape, &[GroupJets<'t>]) -> Var<'t>,
{
    let traces =
        groups.iter().map(|g| CompositeTrace::forward(model, g.points, g.derivs)).collect::<Result<Vec<_>>>()?;
    let tape = Tape::new();
    let views: Vec<GroupJets<'_>> = traces
        .iter()
        .map(|trace| {
            let base = trace.components().iter().map(|b| tape.leaves(b.data.len())).collect();
            GroupJets { tape: &tape, jets: trace.components().to_vec(), base }
        })
        .collect();
    let out = loss(&tape, &views);
    let value = out.value();
    if !value.is_finite() {
        return Err(Error::Divergence { epoch: 0, value, last_finite_loss: None });
    }
    let adj = tape.gradient(out);
    let mut grad = ParamGradient::zeros(model);
    for (trace, view) in traces.iter().zip(&views) {
        let adjoints: Vec<Vec<f64>> = view
            .base
            .iter()
            .zip(&view.jets)
            .map(|(&b, jets)| adj[b as usize..b as usize + jets.data.len()].to_vec())
            .collect();
        trace.backward(model, &adjoints, &mut grad);
    }
    if !grad.is_finite() {
        return Err(Error::Divergence { epoch: 0, value: f64::NAN, last_finite_loss: Some(value) });
    }
    Ok((value, grad))
}
