use super::{discreteness_penalty, sum_rate, Model};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::gnn::{build_graph, recurrent_assign, Assignment, GraphTopology};
use crate::par::Execution;
use crate::scenario::{ChannelRealization, Dataset, Scenario};

/// Binary `K x N` assignment: each run's argmax user at every AP (ties to
/// the lowest index), merged over runs.
pub fn binarize(runs: &[Matrix]) -> Matrix {
    let (k, n) = runs.first().map_or((0, 0), Matrix::shape);
    let mut out = Matrix::zeros(k, n);
    for s in runs {
        for ap in 0..n {
            out.set(argmax_user(s, ap), ap, 1.0);
        }
    }
    out
}

fn argmax_user(s: &Matrix, ap: usize) -> usize {
    let mut best = 0;
    for k in 1..s.rows() {
        if s.get(k, ap) > s.get(best, ap) {
            best = k;
        }
    }
    best
}

/// Picks lost to merging: runs whose argmax user at an AP was already
/// picked by an earlier run at the same AP.
pub fn duplicate_picks(runs: &[Matrix]) -> usize {
    let n = runs.first().map_or(0, Matrix::cols);
    (0..n)
        .map(|ap| {
            let mut picks: Vec<usize> = runs.iter().map(|s| argmax_user(s, ap)).collect();
            let all = picks.len();
            picks.sort_unstable();
            picks.dedup();
            all - picks.len()
        })
        .sum()
}

/// Runs `model` on one sample.
pub fn infer(model: &Model, scenario: &Scenario, topo: &GraphTopology, sample: &ChannelRealization) -> Result<Assignment> {
    let g_hat = model.normalizer.apply(&sample.gains, scenario.noise_power);
    recurrent_assign(&model.config, &model.params, &g_hat, topo, scenario.max_served_users, scenario.min_serving_aps)
}

/// Metrics of one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleEval {
    pub relaxed_rate: f64,
    pub binary_rate: f64,
    /// Binary assignment gives every user at least `L` APs.
    pub connection_ok: bool,
    /// Binary assignment gives every AP at most `U` users.
    pub capacity_ok: bool,
    /// Mean entropy of one run's column.
    pub mean_entropy: f64,
    /// Sum of per-AP entropies over runs.
    pub p_total: f64,
    pub duplicates: usize,
}

/// Means (and violation counts) over a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub samples: usize,
    pub relaxed_rate: f64,
    pub binary_rate: f64,
    pub connection_violations: usize,
    pub capacity_violations: usize,
    pub mean_entropy: f64,
    pub mean_p_total: f64,
    /// Duplicate picks per AP and sample.
    pub duplicate_rate: f64,
}

fn eval_one(model: &Model, scenario: &Scenario, topo: &GraphTopology, sample: &ChannelRealization) -> Result<SampleEval> {
    let a = infer(model, scenario, topo, sample)?;
    let sigma2 = scenario.noise_power;
    let bin = binarize(&a.runs);
    let (_, p_total) = discreteness_penalty(&a.runs)?;
    let columns = (a.runs.len() * scenario.n_aps) as f64;
    Ok(SampleEval {
        relaxed_rate: sum_rate(&sample.gains, &a.combined, sigma2)?,
        binary_rate: sum_rate(&sample.gains, &bin, sigma2)?,
        connection_ok: (0..bin.rows()).all(|k| bin.row(k).iter().sum::<f64>() >= scenario.min_serving_aps as f64),
        capacity_ok: (0..bin.cols())
            .all(|n| (0..bin.rows()).map(|k| bin.get(k, n)).sum::<f64>() <= scenario.max_served_users as f64),
        mean_entropy: p_total / columns,
        p_total,
        duplicates: duplicate_picks(&a.runs),
    })
}

/// Per-sample metrics, in dataset order.
pub fn evaluate_samples(model: &Model, dataset: &Dataset, execution: Execution) -> Result<Vec<SampleEval>> {
    let topo = build_graph(&dataset.scenario, model.config.topology)?;
    execution
        .map(dataset.len(), |i| eval_one(model, &dataset.scenario, &topo, &dataset.samples[i]))
        .into_iter()
        .collect()
}

pub fn evaluate(model: &Model, dataset: &Dataset, execution: Execution) -> Result<Summary> {
    if dataset.is_empty() {
        return Err(Error::InvalidScenario("cannot evaluate an empty dataset".into()));
    }
    let per = evaluate_samples(model, dataset, execution)?;
    let n = per.len() as f64;
    let mean = |f: fn(&SampleEval) -> f64| per.iter().map(f).sum::<f64>() / n;
    Ok(Summary {
        samples: per.len(),
        relaxed_rate: mean(|s| s.relaxed_rate),
        binary_rate: mean(|s| s.binary_rate),
        connection_violations: per.iter().filter(|s| !s.connection_ok).count(),
        capacity_violations: per.iter().filter(|s| !s.capacity_ok).count(),
        mean_entropy: mean(|s| s.mean_entropy),
        mean_p_total: mean(|s| s.p_total),
        duplicate_rate: per.iter().map(|s| s.duplicates).sum::<usize>() as f64
            / (n * dataset.scenario.n_aps as f64),
    })
}
