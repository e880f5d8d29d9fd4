//! The hierarchically permutation-equivariant GNN.
//!
//! One graph node per AP. Each layer sends a message along every edge
//! m -> n computed from AP m's features and the edge feature only, averages
//! the incoming messages at n, and updates n's features from its own
//! features and that average. Every unit is permutation-equivariant over
//! users, and averaging over neighbours makes the layer equivariant over
//! APs. The output head runs the whole network `U` times; each run ends in
//! a softmax over users at every AP.

mod model;
mod topology;

use crate::autodiff::{Matrix, ParamStore, Tape};
use crate::error::Result;
use crate::scenario::Dataset;

pub use model::{
    ap_major, check_params, gnn_layer, init_params, parameter_count, pe_unit_forward, record_assign,
    user_major, PeUnitParams, RunVars, INPUT_FEATURES,
};
pub use topology::{build_graph, GraphTopology, TopologyRule};

/// How the per-run slices merge into the assignment the objective sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// `sum_u s^(u)`.
    Sum,
    /// `1 - prod_u (1 - s^(u))`: the probability that at least one run picks
    /// the pair. A user picked twice by the same AP counts once.
    SoftUnion,
}

impl std::fmt::Display for Combine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Combine::Sum => "sum",
            Combine::SoftUnion => "soft_union",
        })
    }
}

impl std::str::FromStr for Combine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(Combine::Sum),
            "soft_union" => Ok(Combine::SoftUnion),
            _ => Err(format!("unknown combine mode {s:?} (expected `sum` or `soft_union`)")),
        }
    }
}

/// What the connection-gap input of run `u` measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gap {
    /// `ReLU(L - sum_{mu<u} s_kn^(mu))` for each (user, AP) pair.
    Pair,
    /// `ReLU(L - sum_n sum_{mu<u} s_kn^(mu))`: how far user `k` is from `L`
    /// serving APs, shown to every AP.
    User,
}

impl std::fmt::Display for Gap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Gap::Pair => "pair",
            Gap::User => "user",
        })
    }
}

impl std::str::FromStr for Gap {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pair" => Ok(Gap::Pair),
            "user" => Ok(Gap::User),
            _ => Err(format!("unknown gap input {s:?} (expected `pair` or `user`)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GnnConfig {
    pub layers: usize,
    pub hidden: usize,
    pub message: usize,
    pub topology: TopologyRule,
    pub combine: Combine,
    pub gap: Gap,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            layers: 2,
            hidden: 16,
            message: 8,
            topology: TopologyRule::Full,
            combine: Combine::SoftUnion,
            gap: Gap::User,
        }
    }
}

/// Standardizes `log10(g / noise_power)` with statistics of a training set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainNormalizer {
    pub mean: f64,
    pub std: f64,
}

impl GainNormalizer {
    pub fn fit(dataset: &Dataset) -> Self {
        let sigma2 = dataset.scenario.noise_power;
        let logs: Vec<f64> = dataset
            .samples
            .iter()
            .flat_map(|s| s.gains.data().iter().map(|g| (g / sigma2).max(f64::MIN_POSITIVE).log10()))
            .collect();
        let n = logs.len().max(1) as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        GainNormalizer { mean, std }
    }

    pub fn apply(&self, gains: &Matrix, noise_power: f64) -> Matrix {
        gains.map(|g| ((g / noise_power).max(f64::MIN_POSITIVE).log10() - self.mean) / self.std)
    }
}

/// Output of one recurrent inference, as `K x N` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub runs: Vec<Matrix>,
    /// `sum_u s^(u)`.
    pub total: Matrix,
    /// Merged per the model's [`Combine`] mode.
    pub combined: Matrix,
}

/// Runs the network `runs` times on normalized gains `g_hat` (`K x N`).
pub fn recurrent_assign(
    config: &GnnConfig,
    params: &ParamStore,
    g_hat: &Matrix,
    topo: &GraphTopology,
    runs: usize,
    min_serving: usize,
) -> Result<Assignment> {
    let mut t = Tape::new();
    let bound = params.bind(&mut t);
    let vars = record_assign(&mut t, config, params, &bound, g_hat, topo, runs, min_serving)?;
    let k = g_hat.rows();
    Ok(Assignment {
        runs: vars.runs.iter().map(|&v| user_major(t.value(v), k)).collect(),
        total: user_major(t.value(vars.total), k),
        combined: user_major(t.value(vars.combined), k),
    })
}

/// Bytes shipped over inter-AP links during one full inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FronthaulBytes {
    /// Messages only: the sender needs nothing from the receiver.
    pub local: u64,
    /// A message unit that also reads the receiver's features needs them
    /// shipped the other way first.
    pub generic: u64,
}

/// Traffic of `runs` recurrent passes with `n_users` users, counting 8-byte
/// floats.
pub fn fronthaul_bytes(topo: &GraphTopology, config: &GnnConfig, runs: usize, n_users: usize) -> FronthaulBytes {
    let per_edge_user_run = 8 * (topo.n_edges() * n_users * runs) as u64;
    let message = (config.layers * config.message) as u64;
    let features: usize = (0..config.layers)
        .map(|i| if i == 0 { INPUT_FEATURES } else { config.hidden })
        .sum();
    FronthaulBytes {
        local: per_edge_user_run * message,
        generic: per_edge_user_run * (message + features as u64),
    }
}
