//! Forward pass of the GNN on a [`Tape`].
//!
//! Per sample, the features of all APs sit side by side in one matrix of
//! shape `features x (N*K)`: column `n*K + k` holds AP `n`'s view of user
//! `k`. Edge-indexed tensors use the same layout with `E*K` columns.

use rand::Rng;

use super::topology::GraphTopology;
use super::{Combine, Gap, GnnConfig};
use crate::autodiff::{glorot_uniform, BoundParams, Matrix, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Width of the per-(user, AP) input: normalized gain and connection gap.
pub const INPUT_FEATURES: usize = 2;

/// Weights of one permutation-equivariant unit.
///
/// Per user column `f_k`: `top = ReLU(W1c f_k + b1c)`, `bottom =
/// mean_k' ReLU(W1a f_k' + b1a)`, output `ReLU(W2 [top; bottom] + b2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeUnitParams {
    pub w1c: Matrix,
    pub b1c: Matrix,
    pub w1a: Matrix,
    pub b1a: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl PeUnitParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        PeUnitParams {
            w1c: Matrix::zeros(hidden, input),
            b1c: Matrix::zeros(hidden, 1),
            w1a: Matrix::zeros(hidden, input),
            b1a: Matrix::zeros(hidden, 1),
            w2: Matrix::zeros(output, 2 * hidden),
            b2: Matrix::zeros(output, 1),
        }
    }

    /// Reads the unit stored under `prefix` in a parameter store.
    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |field: &str| {
            let name = format!("{prefix}.{field}");
            store.get(&name).cloned().ok_or(Error::Parameter { name })
        };
        Ok(PeUnitParams {
            w1c: get("w1c")?,
            b1c: get("b1c")?,
            w1a: get("w1a")?,
            b1a: get("b1a")?,
            w2: get("w2")?,
            b2: get("b2")?,
        })
    }
}

/// One PE unit applied to `input` (`features x (G*n_users)`), users grouped
/// per entity. `linear_out` drops the final ReLU.
pub fn pe_unit_forward(params: &PeUnitParams, input: &Matrix, n_users: usize, linear_out: bool) -> Result<Matrix> {
    let mut t = Tape::new();
    let vars = PeVars {
        w1c: t.constant(params.w1c.clone()),
        b1c: t.constant(params.b1c.clone()),
        w1a: t.constant(params.w1a.clone()),
        b1a: t.constant(params.b1a.clone()),
        w2: t.constant(params.w2.clone()),
        b2: t.constant(params.b2.clone()),
        w1c_edge: None,
        w1a_edge: None,
    };
    let x = t.constant(input.clone());
    let out = pe_unit(&mut t, &vars, x, n_users, linear_out)?;
    Ok(t.value(out).clone())
}

struct PeVars {
    w1c: Var,
    b1c: Var,
    w1a: Var,
    b1a: Var,
    w2: Var,
    b2: Var,
    // Edge-feature columns of the first-stage weights (message units only).
    w1c_edge: Option<Var>,
    w1a_edge: Option<Var>,
}

fn pe_tail(t: &mut Tape, p: &PeVars, top: Var, all: Var, n_users: usize, linear_out: bool) -> Result<Var> {
    let top = t.relu(top);
    let all = t.relu(all);
    let mean = t.group_mean(all, n_users)?;
    let bottom = t.repeat_groups(mean, n_users)?;
    let cat = t.concat_rows(top, bottom)?;
    let z = t.matmul(p.w2, cat)?;
    let z = t.add_col_broadcast(z, p.b2)?;
    Ok(if linear_out { z } else { t.relu(z) })
}

fn pe_unit(t: &mut Tape, p: &PeVars, x: Var, n_users: usize, linear_out: bool) -> Result<Var> {
    let c = t.matmul(p.w1c, x)?;
    let c = t.add_col_broadcast(c, p.b1c)?;
    let a = t.matmul(p.w1a, x)?;
    let a = t.add_col_broadcast(a, p.b1a)?;
    pe_tail(t, p, c, a, n_users, linear_out)
}

/// Messages along every edge. The message unit reads `[F_m; e_mn]` for edge
/// m -> n; its first stage splits into a per-node product with `F_m` and a
/// per-edge constant, so the node product is computed once per AP and then
/// gathered onto the edges. `F_n` is never read.
fn messages(t: &mut Tape, p: &PeVars, f: Var, edge_row: Var, topo: &GraphTopology, n_users: usize) -> Result<Var> {
    let (Some(wce), Some(wae)) = (p.w1c_edge, p.w1a_edge) else {
        return Err(Error::Parameter { name: "message edge weights".into() });
    };
    let mut branch = |w: Var, we: Var, b: Var| -> Result<Var> {
        let node = t.matmul(w, f)?;
        let edge = t.matmul(we, edge_row)?;
        let edge = t.add_col_broadcast(edge, b)?;
        t.gather_add(node, edge, n_users, topo.edge_sources())
    };
    let c = branch(p.w1c, wce, p.b1c)?;
    let a = branch(p.w1a, wae, p.b1a)?;
    pe_tail(t, p, c, a, n_users, false)
}

fn layer(
    t: &mut Tape,
    phi: &PeVars,
    gamma: &PeVars,
    f: Var,
    edge_row: Var,
    topo: &GraphTopology,
    n_users: usize,
) -> Result<Var> {
    let msgs = messages(t, phi, f, edge_row, topo, n_users)?;
    let agg = t.gather_mean(msgs, n_users, topo.incoming_edges())?;
    let x = t.concat_rows(f, agg)?;
    pe_unit(t, gamma, x, n_users, false)
}

/// Shapes of one unit: `(field, rows, cols)`.
fn unit_shapes(input: usize, hidden: usize, output: usize, edge: bool) -> Vec<(&'static str, usize, usize)> {
    let mut v = vec![
        ("w1c", hidden, input),
        ("b1c", hidden, 1),
        ("w1a", hidden, input),
        ("b1a", hidden, 1),
        ("w2", output, 2 * hidden),
        ("b2", output, 1),
    ];
    if edge {
        v.push(("w1c_edge", hidden, 1));
        v.push(("w1a_edge", hidden, 1));
    }
    v
}

/// Every parameter as `(name, rows, cols)`, in initialization order.
pub(crate) fn parameter_shapes(config: &GnnConfig) -> Vec<(String, usize, usize)> {
    let h = config.hidden;
    let mut out = Vec::new();
    let mut push = |prefix: String, shapes: Vec<(&str, usize, usize)>| {
        for (field, r, c) in shapes {
            out.push((format!("{prefix}.{field}"), r, c));
        }
    };
    let mut width = INPUT_FEATURES;
    for i in 0..config.layers {
        push(format!("layer{i}.phi"), unit_shapes(width, h, config.message, true));
        push(format!("layer{i}.gamma"), unit_shapes(width + config.message, h, h, false));
        width = h;
    }
    push("head".into(), unit_shapes(width, h, 1, false));
    out
}

/// Glorot-uniform weights, zero biases, drawn in a fixed order from `rng`.
/// The edge columns of a message unit's first stage are initialized
/// jointly with the node columns, as one `hidden x (width+1)` matrix.
pub fn init_params(config: &GnnConfig, rng: &mut impl Rng) -> ParamStore {
    let mut store = ParamStore::new();
    let shapes = parameter_shapes(config);
    for (name, rows, cols) in &shapes {
        if name.ends_with("_edge") {
            continue;
        }
        if name.rsplit('.').next().is_some_and(|f| f.starts_with('b')) {
            store.insert(name.clone(), Matrix::zeros(*rows, *cols));
            continue;
        }
        let edge_name = format!("{name}_edge");
        if shapes.iter().any(|(n, _, _)| *n == edge_name) {
            let joint = glorot_uniform(*rows, cols + 1, rng);
            store.insert(name.clone(), Matrix::from_fn(*rows, *cols, |r, c| joint.get(r, c)));
            store.insert(edge_name, Matrix::from_fn(*rows, 1, |r, _| joint.get(r, *cols)));
        } else {
            store.insert(name.clone(), glorot_uniform(*rows, *cols, rng));
        }
    }
    store
}

/// Errors unless `params` holds exactly the tensors `config` calls for.
pub fn check_params(config: &GnnConfig, params: &ParamStore) -> Result<()> {
    let shapes = parameter_shapes(config);
    for (name, r, c) in &shapes {
        if params.get(name).map(Matrix::shape) != Some((*r, *c)) {
            return Err(Error::Parameter { name: name.clone() });
        }
    }
    if params.len() != shapes.len() {
        let extra = params.iter().find(|(n, _)| !shapes.iter().any(|s| s.0 == *n));
        return Err(Error::Parameter { name: extra.map_or("?".into(), |(n, _)| n.to_string()) });
    }
    Ok(())
}

/// Total number of scalar parameters.
pub fn parameter_count(params: &ParamStore) -> usize {
    params.scalar_count()
}

fn unit_vars(params: &ParamStore, bound: &BoundParams, prefix: &str, edge: bool) -> Result<PeVars> {
    let var = |field: &str| {
        let name = format!("{prefix}.{field}");
        params.index_of(&name).map(|i| bound.var(i)).ok_or(Error::Parameter { name })
    };
    Ok(PeVars {
        w1c: var("w1c")?,
        b1c: var("b1c")?,
        w1a: var("w1a")?,
        b1a: var("b1a")?,
        w2: var("w2")?,
        b2: var("b2")?,
        w1c_edge: if edge { Some(var("w1c_edge")?) } else { None },
        w1a_edge: if edge { Some(var("w1a_edge")?) } else { None },
    })
}

/// `K x N` to the `1 x (N*K)` AP-major row used on the tape.
pub fn ap_major(m: &Matrix) -> Matrix {
    let (k, n) = m.shape();
    Matrix::from_fn(1, n * k, |_, c| m.get(c % k, c / k))
}

/// Inverse of [`ap_major`].
pub fn user_major(row: &Matrix, n_users: usize) -> Matrix {
    let n_aps = row.cols() / n_users;
    Matrix::from_fn(n_users, n_aps, |k, n| row.get(0, n * n_users + k))
}

/// Tape handles of one recurrent inference, all `1 x (N*K)` AP-major rows.
#[derive(Clone, Debug)]
pub struct RunVars {
    pub runs: Vec<Var>,
    /// `sum_u s^(u)`.
    pub total: Var,
    /// The assignment fed to the objective, per [`Combine`].
    pub combined: Var,
}

/// `ReLU(L - sum of earlier runs)`, per pair or per user; before the first
/// run, `L` everywhere. `total` is the AP-major `1 x (N*K)` running sum.
pub(crate) fn gap_input(tape: &mut Tape, total: Option<Var>, gap: Gap, n_users: usize, width: usize, l: f64) -> Result<Var> {
    let Some(acc) = total else {
        return Ok(tape.constant(Matrix::filled(1, width, l)));
    };
    let served = match gap {
        Gap::Pair => acc,
        Gap::User => {
            let n_aps = width / n_users;
            let grid = tape.reshape(acc, n_aps, n_users)?;
            let per_user = tape.sum_rows(grid);
            let ones = tape.constant(Matrix::filled(n_aps, 1, 1.0));
            let tiled = tape.matmul(ones, per_user)?;
            tape.reshape(tiled, 1, width)?
        }
    };
    let deficit = tape.affine(served, -1.0, l);
    Ok(tape.relu(deficit))
}

/// Records `runs` recurrent passes of the network on `tape`.
///
/// Run `u` sees `[g_hat; ReLU(L - sum_{mu<u} s^(mu))]` per (user, AP), the
/// sum taken per pair or per user (see [`Gap`]), and
/// emits a softmax over users at every AP. Parameters are shared by all
/// runs.
#[allow(clippy::too_many_arguments)]
pub fn record_assign(
    tape: &mut Tape,
    config: &GnnConfig,
    params: &ParamStore,
    bound: &BoundParams,
    g_hat: &Matrix,
    topo: &GraphTopology,
    runs: usize,
    min_serving: usize,
) -> Result<RunVars> {
    let (n_users, n_aps) = g_hat.shape();
    if n_aps != topo.n_nodes() {
        return Err(Error::dim("record_assign", format!("{n_aps} APs in gains, {} graph nodes", topo.n_nodes())));
    }
    if runs == 0 {
        return Err(Error::dim("record_assign", "at least one run is required"));
    }
    let mut layers = Vec::with_capacity(config.layers);
    for i in 0..config.layers {
        layers.push((
            unit_vars(params, bound, &format!("layer{i}.phi"), true)?,
            unit_vars(params, bound, &format!("layer{i}.gamma"), false)?,
        ));
    }
    let head = unit_vars(params, bound, "head", false)?;
    let width = n_aps * n_users;
    let g = tape.constant(ap_major(g_hat));
    let edge_row = tape.constant(Matrix::from_vec(1, topo.n_edges(), topo.edge_features().to_vec())?);
    let l = min_serving as f64;

    let mut outs = Vec::with_capacity(runs);
    let mut total: Option<Var> = None;
    for _ in 0..runs {
        let gap = gap_input(tape, total, config.gap, n_users, width, l)?;
        let mut f = tape.concat_rows(g, gap)?;
        for (phi, gamma) in &layers {
            f = layer(tape, phi, gamma, f, edge_row, topo, n_users)?;
        }
        let logits = pe_unit(tape, &head, f, n_users, true)?;
        let s = tape.softmax_groups(logits, n_users)?;
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(acc, s)?,
        });
        outs.push(s);
    }
    let total = total.expect("runs >= 1");
    let combined = match config.combine {
        Combine::Sum => total,
        Combine::SoftUnion => {
            let mut miss = tape.affine(outs[0], -1.0, 1.0);
            for &s in &outs[1..] {
                let m = tape.affine(s, -1.0, 1.0);
                miss = tape.mul(miss, m)?;
            }
            tape.affine(miss, -1.0, 1.0)
        }
    };
    Ok(RunVars { runs: outs, total, combined })
}

/// One GNN layer on plain matrices: `features` is `d x (N*K)` AP-major.
pub fn gnn_layer(
    params: &ParamStore,
    index: usize,
    features: &Matrix,
    topo: &GraphTopology,
    n_users: usize,
) -> Result<Matrix> {
    let mut t = Tape::new();
    let bound = params.bind(&mut t);
    let phi = unit_vars(params, &bound, &format!("layer{index}.phi"), true)?;
    let gamma = unit_vars(params, &bound, &format!("layer{index}.gamma"), false)?;
    let f = t.constant(features.clone());
    let edge_row = t.constant(Matrix::from_vec(1, topo.n_edges(), topo.edge_features().to_vec())?);
    let out = layer(&mut t, &phi, &gamma, f, edge_row, topo, n_users)?;
    Ok(t.value(out).clone())
}
