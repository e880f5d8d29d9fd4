use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{Metrics, Record, SplitStats};
use super::{check_same_scenario, record_sample, AlmState, Model, Phase, Prepared, SampleStats};
use crate::autodiff::{adam_step, check_finite, AdamConfig, AdamState, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::gnn::{build_graph, init_params, GainNormalizer, GnnConfig, GraphTopology};
use crate::par::Execution;
use crate::scenario::{Dataset, Scenario};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Cap on iterations of one inner ascent loop.
    pub max_inner_iters: usize,
    /// Cap on multiplier updates per constrained phase.
    pub max_outer_iters: usize,
    /// An inner loop has converged once the mean objective over the last
    /// `convergence_window` iterations improves on the window before it by
    /// less than `convergence_tol` (relative).
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub delta_nu: f64,
    /// Phase-three exit: mean per-sample total entropy on the held-in batch.
    pub entropy_tol: f64,
    /// Phase-two exit: mean per-sample connection deficit on the held-in
    /// batch.
    pub violation_tol: f64,
    /// Size of the fixed held-in batch (the first training samples) used to
    /// decide multiplier updates and phase exits.
    pub eval_batch: usize,
    /// Evaluate the test set every this many iterations.
    pub test_interval: usize,
    pub seed: u64,
    pub model: GnnConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            batch_size: 64,
            max_inner_iters: 1000,
            max_outer_iters: 20,
            convergence_window: 200,
            convergence_tol: 1e-4,
            delta_nu: 0.1,
            entropy_tol: 1e-3,
            violation_tol: 1e-6,
            eval_batch: 512,
            test_interval: 1,
            seed: 0,
            model: GnnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.convergence_tol, self.delta_nu, self.entropy_tol, self.violation_tol];
        let counts = [
            self.batch_size,
            self.max_inner_iters,
            self.max_outer_iters,
            self.convergence_window,
            self.eval_batch,
            self.test_interval,
        ];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) || counts.contains(&0) {
            return Err(Error::InvalidScenario("training hyperparameters must be positive".into()));
        }
        Ok(())
    }
}

/// Resumable training state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: Model,
    pub adam: AdamState,
    pub alm: AlmState,
    /// Iterations completed so far.
    pub iteration: u64,
    /// Multiplier updates done in the current phase.
    pub outer: usize,
}

/// Progress notifications.
pub enum Event<'a> {
    Record(&'a Record),
    /// A new phase begins; the state is a clean resume point.
    PhaseStart(&'a TrainState),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub metrics: Metrics,
    /// Constrained phases left because `max_outer_iters` ran out.
    pub outer_limit_hit: Vec<Phase>,
    /// The deadline passed before training finished.
    pub stopped: bool,
}

pub struct Trainer<'a> {
    pub config: TrainConfig,
    pub execution: Execution,
    train: &'a Dataset,
    test: &'a Dataset,
    topo: GraphTopology,
}

struct Inputs {
    train: Vec<Prepared>,
    test: Vec<Prepared>,
}

impl<'a> Trainer<'a> {
    pub fn new(train: &'a Dataset, test: &'a Dataset, config: TrainConfig, execution: Execution) -> Result<Self> {
        config.validate()?;
        check_same_scenario(&train.scenario, &test.scenario)?;
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidScenario("empty dataset".into()));
        }
        let topo = build_graph(&train.scenario, config.model.topology)?;
        Ok(Trainer { config, execution, train, test, topo })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.train.scenario
    }

    /// Fresh parameters from the seed, normalization fitted on the training
    /// set, all multipliers zero.
    pub fn initial_state(&self) -> TrainState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let params = init_params(&self.config.model, &mut rng);
        let adam = AdamState::new(&params, AdamConfig { lr: self.config.learning_rate, ..AdamConfig::default() });
        TrainState {
            model: Model { config: self.config.model, normalizer: GainNormalizer::fit(self.train), params },
            adam,
            alm: AlmState::new(self.config.delta_nu),
            iteration: 0,
            outer: 0,
        }
    }

    fn prepare(&self, model: &Model) -> Inputs {
        let sc = self.scenario();
        let prep = |ds: &Dataset| ds.samples.iter().map(|s| Prepared::new(s, &model.normalizer, sc)).collect();
        Inputs { train: prep(self.train), test: prep(self.test) }
    }

    /// Runs the remaining phases from `state`.
    pub fn run(&self, state: TrainState, on_event: impl FnMut(Event) -> Result<()>) -> Result<TrainOutcome> {
        self.run_until(state, None, on_event)
    }

    /// Like [`Trainer::run`], but returns the current state once `deadline`
    /// passes. The check happens between iterations.
    pub fn run_until(
        &self,
        mut state: TrainState,
        deadline: Option<Instant>,
        mut on_event: impl FnMut(Event) -> Result<()>,
    ) -> Result<TrainOutcome> {
        if state.model.config != self.config.model {
            return Err(Error::InvalidScenario("state and training config disagree on the model".into()));
        }
        let inputs = self.prepare(&state.model);
        let mut metrics = Metrics::new();
        let mut limits = Vec::new();
        let expired = || deadline.is_some_and(|d| Instant::now() >= d);
        let mut stopped = false;
        loop {
            if expired() {
                stopped = true;
                break;
            }
            let phase = state.alm.phase;
            match phase {
                Phase::Unconstrained => {
                    if !self.inner(&mut state, &inputs, &mut metrics, &mut on_event, &expired)? {
                        stopped = true;
                        break;
                    }
                    advance(&mut state, &mut on_event)?;
                }
                Phase::Connection | Phase::Discreteness => {
                    let held = self.held_in(&state, &inputs)?;
                    let done = if phase == Phase::Connection {
                        held.conn <= self.config.violation_tol
                    } else {
                        held.p_total <= self.config.entropy_tol
                    };
                    if done || state.outer >= self.config.max_outer_iters {
                        if !done {
                            limits.push(phase);
                        }
                        advance(&mut state, &mut on_event)?;
                        continue;
                    }
                    state.alm = state.alm.multiplier_update(held.conn, held.p_total, phase)?;
                    state.outer += 1;
                    if !self.inner(&mut state, &inputs, &mut metrics, &mut on_event, &expired)? {
                        stopped = true;
                        break;
                    }
                }
                Phase::Done => break,
            }
        }
        Ok(TrainOutcome { state, metrics, outer_limit_hit: limits, stopped })
    }

    fn inner(
        &self,
        state: &mut TrainState,
        inputs: &Inputs,
        metrics: &mut Metrics,
        on_event: &mut impl FnMut(Event) -> Result<()>,
        expired: &impl Fn() -> bool,
    ) -> Result<bool> {
        let w = self.config.convergence_window;
        let mut history = Vec::new();
        for _ in 0..self.config.max_inner_iters {
            if expired() {
                return Ok(false);
            }
            let batch = self.batch(state.iteration);
            let (grads, stats) = self.batch_gradient(state, &inputs.train, &batch)?;
            if !stats.g.is_finite() {
                return Err(Error::NonFinite { context: format!("objective at iteration {}", state.iteration) });
            }
            adam_step(&mut state.model.params, &grads, &mut state.adam, true)?;
            check_finite(&state.model.params, "parameter")?;
            let test = if state.iteration.is_multiple_of(self.config.test_interval as u64) {
                let s = self.mean_stats(state, &inputs.test, 0..inputs.test.len())?;
                Some(SplitStats { f: s.f, conn: s.conn, disc: s.p_total })
            } else {
                None
            };
            let record = Record {
                iteration: state.iteration,
                phase: state.alm.phase,
                lambda1: state.alm.lambda1,
                lambda2: state.alm.lambda2,
                nu1: state.alm.nu1,
                nu2: state.alm.nu2,
                train: SplitStats { f: stats.f, conn: stats.conn, disc: stats.p_total },
                test,
            };
            on_event(Event::Record(&record))?;
            metrics.push(record);
            state.iteration += 1;
            history.push(stats.g);
            if converged(&history, w, self.config.convergence_tol) {
                break;
            }
        }
        Ok(true)
    }

    /// Training-set indices for `iteration`, drawn without replacement from
    /// a stream that depends only on the seed and the iteration.
    fn batch(&self, iteration: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x6261_7463_6865_7321);
        rng.set_stream(iteration);
        let n = self.train.len();
        let b = self.config.batch_size.min(n);
        rand::seq::index::sample(&mut rng, n, b).into_vec()
    }

    fn batch_gradient(
        &self,
        state: &TrainState,
        inputs: &[Prepared],
        batch: &[usize],
    ) -> Result<(ParamStore, SampleStats)> {
        let sc = self.scenario();
        let model = &state.model;
        let per_sample = self.execution.map(batch.len(), |i| -> Result<(ParamStore, SampleStats)> {
            let mut t = Tape::new();
            let bound = model.params.bind(&mut t);
            let (_, obj) = record_sample(&mut t, model, &bound, &inputs[batch[i]], sc, &self.topo, &state.alm)?;
            let grads = t.backward(obj.g)?;
            Ok((model.params.gradients(&bound, &grads), SampleStats::read(&t, &obj)))
        });
        let scale = 1.0 / batch.len() as f64;
        let mut total = model.params.zeros_like();
        let mut stats = Vec::with_capacity(batch.len());
        for item in per_sample {
            let (g, s) = item?;
            total.add_scaled(&g, scale);
            stats.push(s);
        }
        Ok((total, SampleStats::mean(&stats)))
    }

    fn mean_stats(
        &self,
        state: &TrainState,
        inputs: &[Prepared],
        range: std::ops::Range<usize>,
    ) -> Result<SampleStats> {
        let sc = self.scenario();
        let start = range.start;
        let stats = self.execution.map(range.len(), |i| -> Result<SampleStats> {
            let mut t = Tape::new();
            let bound = state.model.params.bind(&mut t);
            let (_, obj) =
                record_sample(&mut t, &state.model, &bound, &inputs[start + i], sc, &self.topo, &state.alm)?;
            Ok(SampleStats::read(&t, &obj))
        });
        Ok(SampleStats::mean(&stats.into_iter().collect::<Result<Vec<_>>>()?))
    }

    fn held_in(&self, state: &TrainState, inputs: &Inputs) -> Result<SampleStats> {
        let n = self.config.eval_batch.min(inputs.train.len());
        self.mean_stats(state, &inputs.train, 0..n)
    }
}

fn advance(state: &mut TrainState, on_event: &mut impl FnMut(Event) -> Result<()>) -> Result<()> {
    state.alm.phase = state.alm.phase.next();
    state.outer = 0;
    on_event(Event::PhaseStart(state))
}

/// Moving-average test on the objective history of one inner loop.
fn converged(history: &[f64], window: usize, tol: f64) -> bool {
    let n = history.len();
    if n < 2 * window {
        return false;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let recent = mean(&history[n - window..]);
    let before = mean(&history[n - 2 * window..n - window]);
    recent - before < tol * before.abs().max(f64::MIN_POSITIVE)
}

/// Trains from scratch with the default execution mode.
pub fn train(train: &Dataset, test: &Dataset, config: TrainConfig) -> Result<(Model, Metrics)> {
    let trainer = Trainer::new(train, test, config, Execution::default())?;
    let out = trainer.run(trainer.initial_state(), |_| Ok(()))?;
    Ok((out.state.model, out.metrics))
}
