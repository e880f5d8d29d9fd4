//! Unsupervised training of the GNN with a staged augmented Lagrangian.
//!
//! The network's relaxed assignment is scored by the sum-rate; the
//! connection constraint and the discreteness of every run's softmax are
//! enforced afterwards, one after another, through linear and quadratic
//! penalties whose multipliers grow between inner ascent loops.

mod alm;
mod checkpoint;
mod eval;
mod metrics;
mod objective;
mod train;

use crate::autodiff::{BoundParams, Matrix, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::gnn::{self, ap_major, GainNormalizer, GnnConfig, GraphTopology, RunVars};
use crate::scenario::{ChannelRealization, Scenario};

pub use alm::{AlmState, Phase};
pub use checkpoint::{load_checkpoint, load_model, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use eval::{binarize, duplicate_picks, evaluate, evaluate_samples, infer, SampleEval, Summary};
pub use metrics::{Metrics, Record, SplitStats};
pub use objective::{
    alm_objective, connection_violation, discreteness_penalty, record_objective, sum_rate, ObjectiveVars,
};
pub use train::{train, Event, TrainConfig, TrainOutcome, TrainState, Trainer};

/// Everything needed to run inference: architecture, input normalization
/// and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: GnnConfig,
    pub normalizer: GainNormalizer,
    pub params: ParamStore,
}

/// A sample in the form the network and the objective consume.
#[derive(Clone, Debug)]
pub(crate) struct Prepared {
    pub g_hat: Matrix,
    /// `g / sigma2`, AP-major `1 x (N*K)`.
    pub snr: Matrix,
}

impl Prepared {
    pub fn new(sample: &ChannelRealization, normalizer: &GainNormalizer, scenario: &Scenario) -> Self {
        Prepared {
            g_hat: normalizer.apply(&sample.gains, scenario.noise_power),
            snr: ap_major(&sample.gains.map(|g| g / scenario.noise_power)),
        }
    }
}

/// Records inference plus objective for one sample.
pub(crate) fn record_sample(
    tape: &mut Tape,
    model: &Model,
    bound: &BoundParams,
    input: &Prepared,
    scenario: &Scenario,
    topo: &GraphTopology,
    alm: &AlmState,
) -> Result<(RunVars, ObjectiveVars)> {
    let vars = gnn::record_assign(
        tape,
        &model.config,
        &model.params,
        bound,
        &input.g_hat,
        topo,
        scenario.max_served_users,
        scenario.min_serving_aps,
    )?;
    let obj = record_objective(tape, &vars, &input.snr, scenario.n_users, scenario.min_serving_aps, alm)?;
    Ok((vars, obj))
}

/// Per-sample values of the objective's scalar pieces.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct SampleStats {
    pub g: f64,
    pub f: f64,
    pub conn: f64,
    pub p_total: f64,
}

impl SampleStats {
    pub fn read(tape: &Tape, obj: &ObjectiveVars) -> Self {
        let v = |x| tape.value(x).get(0, 0);
        SampleStats { g: v(obj.g), f: v(obj.f), conn: v(obj.conn), p_total: v(obj.p_total) }
    }

    pub fn mean(items: &[SampleStats]) -> SampleStats {
        let n = items.len().max(1) as f64;
        let mut acc = SampleStats::default();
        for s in items {
            acc.g += s.g;
            acc.f += s.f;
            acc.conn += s.conn;
            acc.p_total += s.p_total;
        }
        SampleStats { g: acc.g / n, f: acc.f / n, conn: acc.conn / n, p_total: acc.p_total / n }
    }
}

fn check_same_scenario(a: &Scenario, b: &Scenario) -> Result<()> {
    if a != b {
        return Err(Error::InvalidScenario("training and test datasets use different scenarios".into()));
    }
    Ok(())
}
