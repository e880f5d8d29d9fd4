//! Checkpoint files: model configuration, input normalization, weights and,
//! for resuming, the optimizer and multiplier state.
//!
//! ```text
//! cf-assign-checkpoint v1
//! layers=2
//! ...                 (model, normalizer, ALM and Adam scalars)
//! params=<count>
//! tensor <name> <rows> <cols>
//! ...
//! adam_m=<count>
//! ...
//! adam_v=<count>
//! ...
//! end
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AlmState, Model, TrainState};
use crate::autodiff::{AdamConfig, AdamState, ParamStore};
use crate::error::{Error, Result};
use crate::gnn::{check_params, GainNormalizer, GnnConfig};
use crate::textio::LineReader;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "cf-assign-checkpoint";

/// What a checkpoint file holds.
pub type Checkpoint = TrainState;

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(state, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read(&mut LineReader::new(BufReader::new(file), path))
}

fn write(s: &TrainState, w: &mut impl Write) -> std::io::Result<()> {
    let c = &s.model.config;
    writeln!(w, "{MAGIC} v{CHECKPOINT_VERSION}")?;
    writeln!(w, "layers={}", c.layers)?;
    writeln!(w, "hidden={}", c.hidden)?;
    writeln!(w, "message={}", c.message)?;
    writeln!(w, "topology={}", c.topology)?;
    writeln!(w, "combine={}", c.combine)?;
    writeln!(w, "gap={}", c.gap)?;
    writeln!(w, "norm_mean={:?}", s.model.normalizer.mean)?;
    writeln!(w, "norm_std={:?}", s.model.normalizer.std)?;
    writeln!(w, "iteration={}", s.iteration)?;
    writeln!(w, "outer={}", s.outer)?;
    let a = &s.alm;
    writeln!(w, "phase={}", a.phase)?;
    writeln!(w, "lambda1={:?}", a.lambda1)?;
    writeln!(w, "lambda2={:?}", a.lambda2)?;
    writeln!(w, "nu1={:?}", a.nu1)?;
    writeln!(w, "nu2={:?}", a.nu2)?;
    writeln!(w, "delta_nu={:?}", a.delta_nu)?;
    let ad = &s.adam.config;
    writeln!(w, "adam_lr={:?}", ad.lr)?;
    writeln!(w, "adam_beta1={:?}", ad.beta1)?;
    writeln!(w, "adam_beta2={:?}", ad.beta2)?;
    writeln!(w, "adam_eps={:?}", ad.eps)?;
    writeln!(w, "adam_t={}", s.adam.t)?;
    for (key, store) in [("params", &s.model.params), ("adam_m", &s.adam.m), ("adam_v", &s.adam.v)] {
        writeln!(w, "{key}={}", store.len())?;
        store.write_tensors(w)?;
    }
    writeln!(w, "end")
}

fn read<R: BufRead>(lines: &mut LineReader<R>) -> Result<TrainState> {
    let version = lines.expect_header(MAGIC)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { path: lines.path().to_path_buf(), found: version, expected: CHECKPOINT_VERSION });
    }
    let parse_with = |lines: &mut LineReader<R>, key: &str| -> Result<String> { lines.expect_kv(key) };
    let config = GnnConfig {
        layers: lines.expect_kv_parse("layers")?,
        hidden: lines.expect_kv_parse("hidden")?,
        message: lines.expect_kv_parse("message")?,
        topology: {
            let v = parse_with(lines, "topology")?;
            v.parse().map_err(|e: String| lines.schema(e))?
        },
        combine: {
            let v = parse_with(lines, "combine")?;
            v.parse().map_err(|e: String| lines.schema(e))?
        },
        gap: {
            let v = parse_with(lines, "gap")?;
            v.parse().map_err(|e: String| lines.schema(e))?
        },
    };
    let normalizer = GainNormalizer { mean: lines.expect_kv_parse("norm_mean")?, std: lines.expect_kv_parse("norm_std")? };
    let iteration = lines.expect_kv_parse("iteration")?;
    let outer = lines.expect_kv_parse("outer")?;
    let phase = {
        let v = parse_with(lines, "phase")?;
        v.parse().map_err(|e: String| lines.schema(e))?
    };
    let alm = AlmState {
        lambda1: lines.expect_kv_parse("lambda1")?,
        lambda2: lines.expect_kv_parse("lambda2")?,
        nu1: lines.expect_kv_parse("nu1")?,
        nu2: lines.expect_kv_parse("nu2")?,
        delta_nu: lines.expect_kv_parse("delta_nu")?,
        phase,
    };
    let adam_config = AdamConfig {
        lr: lines.expect_kv_parse("adam_lr")?,
        beta1: lines.expect_kv_parse("adam_beta1")?,
        beta2: lines.expect_kv_parse("adam_beta2")?,
        eps: lines.expect_kv_parse("adam_eps")?,
    };
    let t = lines.expect_kv_parse("adam_t")?;
    let mut stores: Vec<ParamStore> = Vec::with_capacity(3);
    for key in ["params", "adam_m", "adam_v"] {
        let count: usize = lines.expect_kv_parse(key)?;
        stores.push(ParamStore::read_tensors(lines, count)?);
    }
    lines.expect_exact("end")?;
    let v = stores.pop().expect("three stores");
    let m = stores.pop().expect("three stores");
    let params = stores.pop().expect("three stores");
    check_params(&config, &params).map_err(|e| lines.schema(e.to_string()))?;
    if !params.same_layout(&m) || !params.same_layout(&v) {
        return Err(lines.schema("optimizer moments do not match the parameters"));
    }
    Ok(TrainState {
        model: Model { config, normalizer, params },
        adam: AdamState { config: adam_config, m, v, t },
        alm,
        iteration,
        outer,
    })
}

/// Reads just the model part of a checkpoint.
pub fn load_model(path: &Path) -> Result<Model> {
    load_checkpoint(path).map(|s| s.model)
}
