use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cf_assign::baselines::{exhaustive, gsd, random_assignment, Exhaustive, GSD_VARIANT};
use cf_assign::scenario::{generate_dataset, load_dataset, save_dataset, Dataset, Split};
use cf_assign::training::{
    evaluate, evaluate_samples, load_checkpoint, load_model, save_checkpoint, Event, Metrics, Model, Record, Trainer,
};
use cf_assign::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, TOOL_VERSION};

pub const TRAIN_FILE: &str = "train.dataset";
pub const TEST_FILE: &str = "test.dataset";
pub const MODEL_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const COMPARISON_HEADER: &str = "method,scenario,mean_sum_rate,feasibility_rate,test_size,note";
pub const VIZ_HEADER: &str = "figure,series,iteration,value";

/// Creates the output directory and records the resolved config and the
/// tool version in it.
fn prepare_out(config: &ExperimentConfig) -> Result<&Path> {
    let out = config.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_file(&out.join("experiment.toml"), &config.to_toml())?;
    write_file(&out.join("scenario.txt"), &config.scenario()?.to_kv())?;
    write_file(&out.join("VERSION"), &format!("cf-assign {TOOL_VERSION}\n"))?;
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn gen_data(config: &ExperimentConfig) -> Result<()> {
    let out = prepare_out(config)?;
    let sc = config.scenario()?;
    let exec = Execution::default();
    let mut manifest = String::new();
    let splits = [
        (Split::Train, config.scenario.train_size, config.train_seed(), TRAIN_FILE),
        (Split::Test, config.scenario.test_size, config.test_seed(), TEST_FILE),
    ];
    for (split, size, seed, name) in splits {
        let ds = generate_dataset(&sc, size, seed, split, exec)?;
        let path = out.join(name);
        save_dataset(&ds, &path)?;
        writeln!(manifest, "{name} split={} size={size} seed={seed} sha256={}", split.as_str(), sha256_file(&path)?)?;
    }
    write_file(&out.join("manifest.txt"), &manifest)?;
    eprintln!("wrote {} and {} to {}", TRAIN_FILE, TEST_FILE, out.display());
    Ok(())
}

fn load_split(config: &ExperimentConfig, name: &str) -> Result<Dataset> {
    let path = config.out.join(name);
    if !path.exists() {
        bail!("{} not found; run `cf-assign gen-data` with the same --out first", path.display());
    }
    let ds = load_dataset(&path)?;
    if ds.scenario != config.scenario()? {
        bail!("{} was generated for a different scenario than the config describes", path.display());
    }
    Ok(ds)
}

fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut buf = Vec::new();
    metrics.write_csv(&mut buf)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn read_metrics(path: &Path) -> Result<Metrics> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    if file.metadata()?.len() == 0 {
        return Ok(Metrics::new());
    }
    Ok(Metrics::read_csv(BufReader::new(file), path)?)
}

pub fn train(config: &ExperimentConfig, resume: Option<&Path>) -> Result<()> {
    let out = prepare_out(config)?;
    let train = load_split(config, TRAIN_FILE)?;
    let test = load_split(config, TEST_FILE)?;
    let trainer = Trainer::new(&train, &test, config.train_config()?, Execution::default())?;
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).with_context(|| format!("creating {}", ckpt_dir.display()))?;
    let metrics_path = out.join(METRICS_FILE);

    let (state, mut metrics) = match resume {
        Some(path) => {
            let state = load_checkpoint(path)?;
            let mut kept = Metrics::new();
            if metrics_path.exists() {
                for r in read_metrics(&metrics_path)?.records() {
                    if r.iteration < state.iteration {
                        kept.push(*r);
                    }
                }
            }
            eprintln!("resuming at iteration {} in phase {}", state.iteration, state.alm.phase);
            (state, kept)
        }
        None => {
            let state = trainer.initial_state();
            save_checkpoint(&state, &phase_checkpoint(&ckpt_dir, &state))?;
            (state, Metrics::new())
        }
    };

    let mut last_checkpoint: Option<PathBuf> = None;
    let result = trainer.run(state, |event| {
        match event {
            Event::Record(r) => {
                if r.iteration % 100 == 0 {
                    eprintln!("{}", progress_line(r));
                }
                metrics.push(*r);
            }
            Event::PhaseStart(s) => {
                let path = phase_checkpoint(&ckpt_dir, s);
                save_checkpoint(s, &path)?;
                eprintln!("phase {} begins at iteration {}", s.alm.phase, s.iteration);
                last_checkpoint = Some(path);
            }
        }
        Ok(())
    });
    write_metrics(&metrics_path, &metrics)?;
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let salvage = last_checkpoint.map_or_else(String::new, |p| format!("; resume with --resume {}", p.display()));
            bail!("training failed: {e}{salvage}");
        }
    };
    save_checkpoint(&outcome.state, &out.join(MODEL_FILE))?;
    let mut summary = format!("iterations={}\n", outcome.state.iteration);
    let limits: Vec<&str> = outcome.outer_limit_hit.iter().map(|p| p.as_str()).collect();
    writeln!(summary, "outer_limit_hit={}", limits.join(";"))?;
    write_file(&out.join("train_summary.txt"), &summary)?;
    if !limits.is_empty() {
        eprintln!("warning: max_outer_iters reached in phase(s) {}", limits.join(", "));
    }
    eprintln!("wrote {} and {}", out.join(MODEL_FILE).display(), metrics_path.display());
    Ok(())
}

fn phase_checkpoint(dir: &Path, state: &cf_assign::training::TrainState) -> PathBuf {
    dir.join(format!("{:07}-{}.ckpt", state.iteration, state.alm.phase))
}

fn progress_line(r: &Record) -> String {
    let mut line = format!(
        "iter {:>6} {:<13} train_f={:.4} conn={:.4} disc={:.4}",
        r.iteration, r.phase, r.train.f, r.train.conn, r.train.disc
    );
    if let Some(t) = &r.test {
        let _ = write!(line, " test_f={:.4}", t.f);
    }
    line
}

fn model_path(config: &ExperimentConfig, checkpoint: Option<&Path>) -> PathBuf {
    checkpoint.map_or_else(|| config.out.join(MODEL_FILE), Path::to_path_buf)
}

fn load_trained(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Model> {
    let path = model_path(config, checkpoint);
    if !path.exists() {
        bail!("{} not found; run `cf-assign train` first or pass --checkpoint", path.display());
    }
    Ok(load_model(&path)?)
}

pub fn eval(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<()> {
    let out = prepare_out(config)?;
    let model = load_trained(config, checkpoint)?;
    let test = load_split(config, TEST_FILE)?;
    let s = evaluate(&model, &test, Execution::default())?;
    let text = format!(
        "samples={}\nrelaxed_rate={}\nbinary_rate={}\nconnection_violations={}\ncapacity_violations={}\n\
         mean_entropy={}\nmean_p_total={}\nduplicate_rate={}\n",
        s.samples,
        s.relaxed_rate,
        s.binary_rate,
        s.connection_violations,
        s.capacity_violations,
        s.mean_entropy,
        s.mean_p_total,
        s.duplicate_rate
    );
    print!("{text}");
    write_file(&out.join("eval.txt"), &text)
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodRow {
    pub method: String,
    pub mean_sum_rate: Option<f64>,
    pub feasibility_rate: Option<f64>,
    pub note: String,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n.max(1) as f64
}

fn baseline_rows(config: &ExperimentConfig, test: &Dataset) -> Result<Vec<MethodRow>> {
    let sc = &test.scenario;
    let (u, l, sigma2) = (sc.max_served_users, sc.min_serving_aps, sc.noise_power);
    let exec = Execution::default();
    let budget = config.baseline.budget;

    let first = exhaustive(&test.samples[0].gains, u, l, sigma2, true, budget, Execution::Sequential)?;
    let exhaustive_row = match first {
        Exhaustive::NotAvailable { assignments, budget } => MethodRow {
            method: "exhaustive".into(),
            mean_sum_rate: None,
            feasibility_rate: None,
            note: format!("not available: {assignments:.3e} assignments exceed budget {budget}"),
        },
        Exhaustive::Found(_) => {
            let results = exec.map(test.len(), |i| {
                exhaustive(&test.samples[i].gains, u, l, sigma2, true, budget, Execution::Sequential)
            });
            let found = results
                .into_iter()
                .map(|r| r.map(|e| e.found().cloned().expect("same shape as the first sample")))
                .collect::<Result<Vec<_>, _>>()?;
            MethodRow {
                method: "exhaustive".into(),
                mean_sum_rate: Some(mean(found.iter().map(|r| r.sum_rate))),
                feasibility_rate: Some(mean(found.iter().map(|r| f64::from(u8::from(r.feasible))))),
                note: String::new(),
            }
        }
    };

    let draws = config.baseline.random_draws;
    let random = exec.map(test.len(), |i| -> cf_assign::Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let (mut rate, mut feasible) = (0.0, 0.0);
        for _ in 0..draws {
            let r = random_assignment(&test.samples[i].gains, u, l, sigma2, &mut rng)?;
            rate += r.sum_rate;
            feasible += f64::from(u8::from(r.feasible));
        }
        Ok((rate / draws as f64, feasible / draws as f64))
    });
    let random = random.into_iter().collect::<Result<Vec<_>, _>>()?;

    let greedy = exec.map(test.len(), |i| gsd(&test.samples[i].gains, u, l, sigma2));
    let greedy = greedy.into_iter().collect::<Result<Vec<_>, _>>()?;

    Ok(vec![
        exhaustive_row,
        MethodRow {
            method: "random".into(),
            mean_sum_rate: Some(mean(random.iter().map(|r| r.0))),
            feasibility_rate: Some(mean(random.iter().map(|r| r.1))),
            note: format!("mean of {draws} draws per sample"),
        },
        MethodRow {
            method: "gsd".into(),
            mean_sum_rate: Some(mean(greedy.iter().map(|r| r.sum_rate))),
            feasibility_rate: Some(mean(greedy.iter().map(|r| f64::from(u8::from(r.feasible))))),
            note: GSD_VARIANT.into(),
        },
    ])
}

fn proposed_row(model: &Model, test: &Dataset) -> Result<MethodRow> {
    let evals = evaluate_samples(model, test, Execution::default())?;
    Ok(MethodRow {
        method: "proposed".into(),
        mean_sum_rate: Some(mean(evals.iter().map(|e| e.binary_rate))),
        feasibility_rate: Some(mean(evals.iter().map(|e| f64::from(u8::from(e.connection_ok && e.capacity_ok))))),
        note: "binarized".into(),
    })
}

fn write_rows(path: &Path, config: &ExperimentConfig, rows: &[MethodRow], test_size: usize) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
    let mut text = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.method,
            config.scenario.preset,
            opt(r.mean_sum_rate),
            opt(r.feasibility_rate),
            test_size,
            r.note.replace(',', ";")
        )?;
    }
    print!("{text}");
    write_file(path, &text)
}

pub fn baseline(config: &ExperimentConfig) -> Result<()> {
    let out = prepare_out(config)?;
    let test = load_split(config, TEST_FILE)?;
    let rows = baseline_rows(config, &test)?;
    write_rows(&out.join("baselines.csv"), config, &rows, test.len())
}

pub fn compare(config: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<()> {
    let out = prepare_out(config)?;
    let model = load_trained(config, checkpoint)?;
    let test = load_split(config, TEST_FILE)?;
    let mut rows = vec![proposed_row(&model, &test)?];
    rows.extend(baseline_rows(config, &test)?);
    write_rows(&out.join("comparison.csv"), config, &rows, test.len())
}

/// Long-format rows `(figure, series, iteration, value)` for the sum-rate,
/// connection-penalty and discreteness-penalty curves.
pub fn viz_rows(metrics: &Metrics) -> String {
    type Pick = fn(&cf_assign::training::SplitStats) -> f64;
    let figures: [(&str, Pick); 3] =
        [("sum_rate", |s| s.f), ("connection_penalty", |s| s.conn), ("discreteness_penalty", |s| s.disc)];
    let mut text = format!("{VIZ_HEADER}\n");
    for (figure, pick) in figures {
        for r in metrics.records() {
            let _ = writeln!(text, "{figure},train,{},{:?}", r.iteration, pick(&r.train));
        }
        for r in metrics.records() {
            if let Some(t) = &r.test {
                let _ = writeln!(text, "{figure},test,{},{:?}", r.iteration, pick(t));
            }
        }
    }
    text
}

pub fn viz(config: &ExperimentConfig, metrics: Option<&Path>) -> Result<()> {
    let out = prepare_out(config)?;
    let path = metrics.map_or_else(|| out.join(METRICS_FILE), Path::to_path_buf);
    let metrics = read_metrics(&path)?;
    let target = out.join("viz.csv");
    let mut file = fs::File::create(&target).with_context(|| format!("writing {}", target.display()))?;
    file.write_all(viz_rows(&metrics).as_bytes())?;
    eprintln!("wrote {} ({} iterations)", target.display(), metrics.len());
    Ok(())
}
