//! Training loop, evaluation against the analytic solution and run metrics.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::eval_jets;
use crate::error::{Error, Result};
use crate::loss::{LossBreakdown, LossWeights, Objective, Variant};
use crate::network::{hidden_layout, seeded_rng, CompositeModel, InnerNet, Mlp};
use crate::optim::{AdamState, LrSchedule};
use crate::problems::{analytic_solution, ProblemId, ProblemSpec};
use crate::sampling::{boundary_points, evaluation_grid, lhs, uniform_collocation_1d, PointRole, PointSet};

/// Default interval between logged epochs.
pub const DEFAULT_LOG_EVERY: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub problem: ProblemId,
    pub variant: Variant,
    pub epsilon: f64,
    /// Second perturbation parameter of the coupled systems.
    pub mu: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub n_collocation: usize,
    /// Boundary points per face in 2D; 1D problems always use both endpoints.
    pub n_boundary_per_face: usize,
    pub seed: u64,
    pub log_every: usize,
    pub weights: LossWeights,
    /// Hidden width of the outer nets, or of the single net of a plain PINN.
    pub outer_width: usize,
    pub inner_width: usize,
    /// Number of hidden layers in every subnetwork.
    pub depth: usize,
    pub resample_every_epoch: bool,
    /// Collocation points per step; `None` uses all of them.
    pub batch_size: Option<usize>,
}

impl TrainingConfig {
    /// Benchmark defaults for `problem` trained as `variant`.
    pub fn new(problem: ProblemId, variant: Variant) -> Self {
        let (outer, inner) = problem.default_widths();
        let (lr, schedule, outer_width) = match variant {
            Variant::Cpinn => (5e-4, LrSchedule::Constant, outer),
            Variant::Pinn => (5e-4, LrSchedule::Constant, outer),
            Variant::Pipinn => (1e-3, LrSchedule::StepDecay { factor: 0.9, every: 1000 }, 150),
        };
        let epochs = problem.default_epochs();
        TrainingConfig {
            problem,
            variant,
            epsilon: problem.default_epsilon(),
            mu: problem.default_mu(),
            epochs,
            lr,
            schedule,
            n_collocation: 600,
            n_boundary_per_face: 50,
            seed: 0,
            log_every: DEFAULT_LOG_EVERY.min(epochs),
            weights: LossWeights::default(),
            outer_width,
            inner_width: inner,
            depth: 3,
            resample_every_epoch: false,
            batch_size: None,
        }
    }

    /// Sets the epoch budget and pulls `log_every` down to it if needed.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.log_every = self.log_every.min(epochs.max(1));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.log_every == 0 || self.log_every > self.epochs {
            return Err(Error::config(format!(
                "log_every must lie in 1..={} (the epoch count), got {}",
                self.epochs, self.log_every
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        let min_points = if self.problem.dim() == 1 && !self.resample_every_epoch { 2 } else { 1 };
        if self.n_collocation < min_points {
            return Err(Error::config(format!("need at least {min_points} collocation points")));
        }
        if self.problem.dim() == 2 && self.n_boundary_per_face == 0 {
            return Err(Error::config("need at least one boundary point per face"));
        }
        if self.outer_width == 0 || self.inner_width == 0 || self.depth == 0 {
            return Err(Error::config("network widths and depth must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch size must be positive"));
        }
        self.schedule.validate()?;
        self.weights.validate()?;
        self.spec().map(|_| ())
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.problem, self.epsilon, self.mu)?;
        if self.variant == Variant::Pipinn && self.problem != ProblemId::Cd1d {
            return Err(Error::config(format!("the pipinn variant is defined for cd1d only, not {}", self.problem)));
        }
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub total: f64,
    pub residual_term: f64,
    pub boundary_term: f64,
    pub lr_used: f64,
}

impl LossRecord {
    fn new(epoch: usize, b: &LossBreakdown, lr_used: f64) -> Self {
        LossRecord { epoch, total: b.total, residual_term: b.residual_term, boundary_term: b.boundary_term, lr_used }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub final_loss: f64,
    /// Per component.
    pub l2_rel_error: Vec<f64>,
    /// Per component.
    pub max_abs_error: Vec<f64>,
    pub wall_time_seconds: f64,
}

/// One line of the solution table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub coords: Vec<f64>,
    pub component: usize,
    pub predicted: f64,
    pub exact: f64,
    pub abs_error: f64,
}

/// Error norms of a model on a grid plus the pointwise table behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// `||u_pred - u||_2 / ||u||_2` per component; the absolute norm when
    /// the exact component vanishes on the whole grid.
    pub l2_rel_error: Vec<f64>,
    pub max_abs_error: Vec<f64>,
    /// Point-major, then component.
    pub table: Vec<SolutionRow>,
}

#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub model: CompositeModel,
    pub records: Vec<LossRecord>,
    pub metrics: RunMetrics,
    pub evaluation: Evaluation,
}

/// Compares `model` with the analytic solution at every grid point.
pub fn evaluate(model: &CompositeModel, spec: &ProblemSpec, grid: &PointSet) -> Result<Evaluation> {
    if grid.dim != spec.dim || model.input_dim() != spec.dim || model.n_components() != spec.n_components {
        return Err(Error::config("model, problem and grid dimensions disagree"));
    }
    let n_c = spec.n_components;
    let mut diff2 = vec![0.0; n_c];
    let mut exact2 = vec![0.0; n_c];
    let mut max_abs = vec![0.0f64; n_c];
    let mut table = Vec::with_capacity(grid.len() * n_c);
    let jets = eval_jets(model, &grid.coords, false)?;
    for (p, x) in grid.iter().enumerate() {
        let exact = analytic_solution(spec, x)?;
        for c in 0..n_c {
            let pred = jets[c].value(p);
            let err = (pred - exact[c]).abs();
            diff2[c] += err * err;
            exact2[c] += exact[c] * exact[c];
            max_abs[c] = max_abs[c].max(err);
            table.push(SolutionRow {
                coords: x.to_vec(),
                component: c,
                predicted: pred,
                exact: exact[c],
                abs_error: err,
            });
        }
    }
    let l2_rel_error =
        diff2.iter().zip(&exact2).map(|(d, e)| if *e > 0.0 { (d / e).sqrt() } else { d.sqrt() }).collect();
    Ok(Evaluation { l2_rel_error, max_abs_error: max_abs, table })
}

/// The evaluation grid of a problem, refined inside its boundary layers.
pub fn problem_grid(spec: &ProblemSpec) -> Result<PointSet> {
    let layers: Vec<_> = spec.recipe.iter().map(|r| r.blend).collect();
    evaluation_grid(spec.dim, &layers)
}

/// Xavier-initialised model for `config`, drawing every subnetwork from one
/// seeded stream: outer nets by component, then inner nets in recipe order.
pub fn build_model(spec: &ProblemSpec, config: &TrainingConfig) -> Result<CompositeModel> {
    let mut rng = seeded_rng(config.seed);
    let outer_sizes = hidden_layout(spec.dim, config.outer_width, config.depth);
    let outer =
        (0..spec.n_components).map(|_| Mlp::xavier_with_rng(&outer_sizes, &mut rng)).collect::<Result<Vec<_>>>()?;
    let inner = match config.variant {
        Variant::Cpinn => {
            let inner_sizes = hidden_layout(spec.dim, config.inner_width, config.depth);
            spec.recipe
                .iter()
                .map(|r| {
                    Ok(InnerNet {
                        net: Mlp::xavier_with_rng(&inner_sizes, &mut rng)?,
                        blend: r.blend,
                        component: r.component,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        Variant::Pinn | Variant::Pipinn => Vec::new(),
    };
    CompositeModel::new(outer, inner)
}

/// Stream for collocation sampling, independent of the initialisation
/// stream so that variants trained with one seed see the same points.
fn sampling_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(1);
    rng
}

/// Uniform grid in 1D, Latin hypercube in 2D. When resampling, 1D draws a
/// one-dimensional Latin hypercube instead of repeating the fixed grid.
fn collocation(config: &TrainingConfig, dim: usize, rng: &mut ChaCha8Rng, fresh: bool) -> Result<PointSet> {
    if dim == 1 && !fresh {
        uniform_collocation_1d(config.n_collocation)
    } else {
        lhs(config.n_collocation, dim, rng)
    }
}

/// The collocation and boundary sets training starts from.
pub fn training_points(config: &TrainingConfig) -> Result<(PointSet, PointSet)> {
    let mut rng = sampling_rng(config.seed);
    let col = collocation(config, config.problem.dim(), &mut rng, config.resample_every_epoch)?;
    Ok((col, boundary_points(config.problem.dim(), config.n_boundary_per_face)?))
}

fn cyclic_batch(points: &PointSet, batch: usize, epoch: usize) -> PointSet {
    let n = points.len();
    let start = (epoch * batch) % n;
    let coords = (0..batch.min(n)).flat_map(|k| points.point((start + k) % n).iter().copied()).collect();
    PointSet { dim: points.dim, role: PointRole::InteriorCollocation, coords }
}

fn at_epoch(err: Error, epoch: usize, last: Option<f64>) -> Error {
    match err {
        Error::Divergence { value, last_finite_loss, .. } => {
            Error::Divergence { epoch, value, last_finite_loss: last_finite_loss.or(last) }
        }
        other => other,
    }
}

pub fn train(config: &TrainingConfig) -> Result<TrainedRun> {
    train_with(config, |_| {})
}

/// [`train`], calling `on_record` with each loss record as it is logged.
pub fn train_with<F: FnMut(&LossRecord)>(config: &TrainingConfig, mut on_record: F) -> Result<TrainedRun> {
    let start = Instant::now();
    config.validate()?;
    let spec = config.spec()?;
    let mut model = build_model(&spec, config)?;
    let mut rng = sampling_rng(config.seed);
    let initial = collocation(config, spec.dim, &mut rng, config.resample_every_epoch)?;
    let boundary = boundary_points(spec.dim, config.n_boundary_per_face)?;
    let full = Objective::new(&spec, config.variant, config.weights, &initial, &boundary)?;
    full.check_model(&model)?;
    let fixed = !config.resample_every_epoch && config.batch_size.is_none_or(|b| b >= initial.len());
    let mut fixed_objective = if fixed { Some(full) } else { None };
    let mut col = initial.clone();

    let mut adam = AdamState::for_model(&model, config.lr);
    let mut records = Vec::with_capacity(config.epochs / config.log_every + 1);
    let mut last_finite = None;
    let mut log = |rec: LossRecord, records: &mut Vec<LossRecord>| {
        on_record(&rec);
        records.push(rec);
    };

    for epoch in 0..config.epochs {
        if config.resample_every_epoch && epoch > 0 {
            col = collocation(config, spec.dim, &mut rng, true)?;
        }
        let step = match &fixed_objective {
            Some(obj) => obj.value_and_gradient(&model),
            None => {
                let batch = match config.batch_size {
                    Some(b) if b < col.len() => cyclic_batch(&col, b, epoch),
                    _ => col.clone(),
                };
                Objective::new(&spec, config.variant, config.weights, &batch, &boundary)?.value_and_gradient(&model)
            }
        };
        let (breakdown, grad) = step.map_err(|e| at_epoch(e, epoch, last_finite))?;
        let lr = config.schedule.effective_lr(config.lr, epoch);
        if epoch % config.log_every == 0 {
            log(LossRecord::new(epoch, &breakdown, lr), &mut records);
        }
        adam.lr = lr;
        adam.step_model(&mut model, &grad, epoch).map_err(|e| at_epoch(e, epoch, Some(breakdown.total)))?;
        last_finite = Some(breakdown.total);
    }

    let epochs = config.epochs;
    if epochs % config.log_every == 0 {
        let obj = match fixed_objective.take() {
            Some(obj) => obj,
            None => Objective::new(&spec, config.variant, config.weights, &col, &boundary)?,
        };
        let b = obj.evaluate(&model)?;
        if !b.total.is_finite() {
            return Err(Error::Divergence { epoch: epochs, value: b.total, last_finite_loss: last_finite });
        }
        log(LossRecord::new(epochs, &b, config.schedule.effective_lr(config.lr, epochs)), &mut records);
    }

    let evaluation = evaluate(&model, &spec, &problem_grid(&spec)?)?;
    let metrics = RunMetrics {
        final_loss: records.last().map_or(f64::NAN, |r| r.total),
        l2_rel_error: evaluation.l2_rel_error.clone(),
        max_abs_error: evaluation.max_abs_error.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainedRun { model, records, metrics, evaluation })
}
