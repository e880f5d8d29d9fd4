//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 5 to 8 train full models (the small scenario with default
//! hyperparameters, the large one with the reduced schedule below), so a
//! release build is strongly recommended:
//! `cargo test --release -p cf-assign --test acceptance`.

use std::time::{Duration, Instant};

use cf_assign::autodiff::{finite_difference_gradient, Matrix, ParamStore, Tape};
use cf_assign::baselines::{exhaustive, gsd, random_assignment, Exhaustive, DEFAULT_BUDGET};
use cf_assign::gnn::{
    ap_major, build_graph, fronthaul_bytes, init_params, parameter_count, record_assign, recurrent_assign,
    GnnConfig, GraphTopology, TopologyRule,
};
use cf_assign::scenario::{generate_dataset, Area, Dataset, Point, Scenario, Split};
use cf_assign::training::{
    alm_objective, connection_violation, discreteness_penalty, evaluate, evaluate_samples, infer, record_objective,
    sum_rate, AlmState, Event, Metrics, Model, Phase, TrainConfig, TrainState, Trainer,
};
use cf_assign::Execution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Initialized weights with random non-zero biases.
fn random_params(config: &GnnConfig, rng: &mut impl Rng) -> ParamStore {
    let mut p = init_params(config, rng);
    for i in 0..p.len() {
        if p.name(i).rsplit('.').next().unwrap().starts_with('b') {
            for x in p.matrix_mut(i).data_mut() {
                *x = rng.random_range(-0.3..0.3);
            }
        }
    }
    p
}

fn two_by_two() -> Scenario {
    Scenario {
        n_aps: 2,
        n_users: 2,
        area: Area::square(10.0),
        ap_positions: vec![Point::new(2.0, 5.0), Point::new(8.0, 5.0)],
        min_serving_aps: 2,
        max_served_users: 2,
        noise_power: 1.0,
        gain_scale: 1.0,
        rician_variance: 0.0,
    }
}

// 1. Backward gradients of the full ALM objective against central
// differences of the same objective assembled from plain-value functions.
fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let sc = two_by_two();
    let config = GnnConfig { hidden: 5, message: 3, ..GnnConfig::default() };
    let topo = build_graph(&sc, config.topology).unwrap();
    let (k, u, l) = (sc.n_users, sc.max_served_users, sc.min_serving_aps);
    let mut worst: f64 = 0.0;
    let seeds = 20;
    let (mut seed, mut used, mut skipped) = (0u64, 0, 0);
    while used < seeds {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let params = random_params(&config, &mut rng);
        let g_hat = random_matrix(k, sc.n_aps, -1.5, 1.5, &mut rng);
        let gains = random_matrix(k, sc.n_aps, 0.2, 3.0, &mut rng);
        let alm = AlmState {
            lambda1: rng.random_range(0.1..1.0),
            lambda2: rng.random_range(0.1..1.0),
            nu1: rng.random_range(0.1..1.0),
            nu2: rng.random_range(0.1..1.0),
            delta_nu: 0.1,
            phase: Phase::Discreteness,
        };
        // Low gains and a soft network leave users short of L, so the
        // connection terms are active.
        let plain = |p: &ParamStore| {
            let a = recurrent_assign(&config, p, &g_hat, &topo, u, l).unwrap();
            let f = sum_rate(&gains, &a.combined, sc.noise_power).unwrap();
            let (per_user, conn) = connection_violation(&a.combined, l);
            let conn_sq: f64 = per_user.iter().map(|v| v * v).sum();
            let (p_values, _) = discreteness_penalty(&a.runs).unwrap();
            alm_objective(f, conn, conn_sq, &p_values, &alm)
        };
        let mut t = Tape::new();
        let bound = params.bind(&mut t);
        let vars = record_assign(&mut t, &config, &params, &bound, &g_hat, &topo, u, l).unwrap();
        let snr = ap_major(&gains.map(|g| g / sc.noise_power));
        let obj = record_objective(&mut t, &vars, &snr, k, l, &alm).unwrap();
        assert!(t.value(obj.conn).get(0, 0) > 0.0, "connection penalty inactive for seed {seed}");
        let analytic = params.gradients(&bound, &t.backward(obj.g).unwrap());
        let numeric = finite_difference_gradient(plain, &params, 1e-5);
        // A ReLU pre-activation inside the stencil makes the central
        // difference meaningless; such draws are replaced.
        let coarse = finite_difference_gradient(plain, &params, 2e-5);
        let kinked = numeric
            .iter()
            .zip(coarse.iter())
            .any(|((_, a), (_, b))| a.data().iter().zip(b.data()).any(|(x, y)| (x - y).abs() > 1e-7));
        if kinked {
            skipped += 1;
            continue;
        }
        used += 1;
        for ((_, a), (_, b)) in analytic.iter().zip(numeric.iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-6));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 60.0,
        format!("max relative error {worst:.2e} over {seeds} seeds (< 1e-4), {skipped} draws at a ReLU kink replaced, {secs:.1} s (< 60 s)"),
    )
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        out.row_mut(perm[r]).copy_from_slice(m.row(r));
    }
    out
}

fn permute_cols(m: &Matrix, perm: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out.set(r, perm[c], m.get(r, c));
        }
    }
    out
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// 2. Relabelling users permutes the rows of every run; relabelling APs
// (graph included) permutes the columns.
fn hpe_suite() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let trials = 100;
    for (i, sc) in [Scenario::small(), Scenario::large()].iter().enumerate() {
        let config = GnnConfig { hidden: 8, message: 4, topology: TopologyRule::KNearest(3), ..GnnConfig::default() };
        let topo = build_graph(sc, config.topology).unwrap();
        let (k, n, u, l) = (sc.n_users, sc.n_aps, sc.max_served_users, sc.min_serving_aps);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64((i as u64) << 32 | trial);
            let params = random_params(&config, &mut rng);
            let g = random_matrix(k, n, -1.5, 1.5, &mut rng);
            let base = recurrent_assign(&config, &params, &g, &topo, u, l).unwrap();
            let mut pi: Vec<usize> = (0..k).collect();
            pi.shuffle(&mut rng);
            let users = recurrent_assign(&config, &params, &permute_rows(&g, &pi), &topo, u, l).unwrap();
            let mut sigma: Vec<usize> = (0..n).collect();
            sigma.shuffle(&mut rng);
            let topo_p = topo.permuted(&sigma).unwrap();
            let aps = recurrent_assign(&config, &params, &permute_cols(&g, &sigma), &topo_p, u, l).unwrap();
            for r in 0..u {
                worst = worst.max(max_diff(&users.runs[r], &permute_rows(&base.runs[r], &pi)));
                worst = worst.max(max_diff(&aps.runs[r], &permute_cols(&base.runs[r], &sigma)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 60.0,
        format!("max deviation {worst:.1e} over {trials} triples per scenario (<= 1e-12), {secs:.1} s (< 60 s)"),
    )
}

// 3. Every run's column is a distribution over users; one parameter set
// serves both network sizes.
fn stochasticity_and_scalability() -> Outcome {
    let config = GnnConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = random_params(&config, &mut rng);
    let mut worst: f64 = 0.0;
    for sc in [Scenario::small(), Scenario::large()] {
        let topo = build_graph(&sc, config.topology).unwrap();
        for _ in 0..20 {
            let g = random_matrix(sc.n_users, sc.n_aps, -2.0, 2.0, &mut rng);
            let a = recurrent_assign(&config, &params, &g, &topo, sc.max_served_users, sc.min_serving_aps).unwrap();
            for run in &a.runs {
                for c in 0..run.cols() {
                    let s: f64 = (0..run.rows()).map(|r| run.get(r, c)).sum();
                    worst = worst.max((s - 1.0).abs());
                }
            }
        }
    }
    let small = parameter_count(&init_params(&config, &mut ChaCha8Rng::seed_from_u64(1)));
    let large = parameter_count(&init_params(&config, &mut ChaCha8Rng::seed_from_u64(2)));
    outcome(
        worst <= 1e-9 && small == large,
        format!("max |column sum - 1| {worst:.1e} (<= 1e-9); parameter count {small} (5x4) vs {large} (20x15)"),
    )
}

/// Brute force over all `2^(K N)` binary matrices.
fn brute_force(gains: &Matrix, max_served: usize, min_serving: usize, sigma2: f64) -> (Matrix, f64) {
    let (k, n) = gains.shape();
    let mut best: Option<(Matrix, f64)> = None;
    for mask in 0u32..(1 << (k * n)) {
        let s = Matrix::from_fn(k, n, |r, c| f64::from((mask >> (r * n + c)) & 1));
        let cols_ok = (0..n).all(|c| (0..k).map(|r| s.get(r, c)).sum::<f64>() <= max_served as f64);
        let rows_ok = (0..k).all(|r| s.row(r).iter().sum::<f64>() >= min_serving as f64);
        if !(cols_ok && rows_ok) {
            continue;
        }
        let rate: f64 = (0..k)
            .map(|r| (1.0 + (0..n).map(|c| gains.get(r, c) * s.get(r, c)).sum::<f64>() / sigma2).log2())
            .sum();
        if best.as_ref().is_none_or(|b| rate > b.1) {
            best = Some((s, rate));
        }
    }
    best.expect("feasible instance")
}

// 4. Enumeration count and agreement with an independent enumerator.
fn exhaustive_oracle() -> Outcome {
    let small = Scenario::small();
    let g = Matrix::filled(small.n_users, small.n_aps, 0.5);
    let count = match exhaustive(&g, 2, 2, 1.0, true, DEFAULT_BUDGET, Execution::default()).unwrap() {
        Exhaustive::Found(r) => r.enumerated_count,
        Exhaustive::NotAvailable { .. } => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    let instances = 50;
    for _ in 0..instances {
        let gains = random_matrix(3, 3, 0.05, 3.0, &mut rng);
        let found = exhaustive(&gains, 2, 2, 1.0, true, DEFAULT_BUDGET, Execution::Sequential).unwrap();
        let r = found.found().unwrap();
        let (s, rate) = brute_force(&gains, 2, 2, 1.0);
        if r.s == s && (r.sum_rate - rate).abs() <= 1e-12 * rate.abs() {
            agree += 1;
        }
    }
    outcome(
        count == Some(7776) && agree == instances,
        format!("small-scenario count {count:?} (= 7776); {agree}/{instances} 3x3 instances match the brute-force enumerator"),
    )
}

// 9. Local messages ship fewer bytes than a generic GNN that also ships
// node features, for every connected topology; both counts follow the
// closed form.
fn fronthaul() -> Outcome {
    let mut checked = 0;
    let mut ok = true;
    for sc in [Scenario::small(), Scenario::large()] {
        let mut rules = vec![TopologyRule::Full];
        rules.extend((1..sc.n_aps).map(TopologyRule::KNearest));
        for rule in rules {
            let topo = build_graph(&sc, rule).unwrap();
            if !connected(&topo) {
                continue;
            }
            for config in [GnnConfig::default(), GnnConfig { layers: 3, hidden: 24, message: 5, ..GnnConfig::default() }] {
                let (e, k, u) = (topo.n_edges() as u64, sc.n_users as u64, sc.max_served_users as u64);
                let (layers, m, h) = (config.layers as u64, config.message as u64, config.hidden as u64);
                let local = 8 * e * k * u * layers * m;
                let generic = local + 8 * e * k * u * (2 + (layers - 1) * h);
                let b = fronthaul_bytes(&topo, &config, sc.max_served_users, sc.n_users);
                ok &= b.local == local && b.generic == generic && b.local < b.generic;
                checked += 1;
            }
        }
    }
    outcome(ok, format!("local < generic and closed form exact on {checked} (topology, model) pairs"))
}

fn connected(topo: &GraphTopology) -> bool {
    let n = topo.n_nodes();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for w in topo.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A finished training run with what the trajectory checks need.
struct Trained {
    model: Model,
    metrics: Metrics,
    /// Test-set mean connection deficit of the relaxed output when the
    /// discreteness phase begins, if it began.
    conn_end_phase_two: Option<f64>,
    outer_limit_hit: Vec<Phase>,
    /// Training hit its wall-clock limit.
    stopped: bool,
    secs: f64,
}

fn mean_relaxed_deficit(model: &Model, test: &Dataset) -> f64 {
    let topo = build_graph(&test.scenario, model.config.topology).unwrap();
    let total: f64 = test
        .samples
        .iter()
        .map(|s| connection_violation(&infer(model, &test.scenario, &topo, s).unwrap().combined, test.scenario.min_serving_aps).1)
        .sum();
    total / test.len() as f64
}

fn train_model(train: &Dataset, test: &Dataset, config: TrainConfig, limit: Option<Duration>, label: &str) -> Trained {
    let start = Instant::now();
    let trainer = Trainer::new(train, test, config, Execution::default()).unwrap();
    let mut at_boundary: Option<TrainState> = None;
    let out = trainer
        .run_until(trainer.initial_state(), limit.map(|d| start + d), |e| {
            match e {
                Event::PhaseStart(s) => {
                    eprintln!("  [{label}] phase {} at iteration {} ({:.0} s)", s.alm.phase, s.iteration, start.elapsed().as_secs_f64());
                    if s.alm.phase == Phase::Discreteness {
                        at_boundary = Some(s.clone());
                    }
                }
                Event::Record(_) => {}
            }
            Ok(())
        })
        .unwrap();
    if out.stopped {
        eprintln!("  [{label}] stopped at iteration {} in phase {}", out.state.iteration, out.state.alm.phase);
    }
    Trained {
        conn_end_phase_two: at_boundary.map(|s| mean_relaxed_deficit(&s.model, test)),
        model: out.state.model,
        metrics: out.metrics,
        outer_limit_hit: out.outer_limit_hit,
        stopped: out.stopped,
        secs: start.elapsed().as_secs_f64(),
    }
}

struct Baselines {
    exhaustive: Option<f64>,
    gsd: f64,
    random: f64,
}

fn baselines(test: &Dataset) -> Baselines {
    let sc = &test.scenario;
    let (u, l, s2) = (sc.max_served_users, sc.min_serving_aps, sc.noise_power);
    let exec = Execution::default();
    let n = test.len() as f64;
    let ex = exec.map(test.len(), |i| {
        exhaustive(&test.samples[i].gains, u, l, s2, true, DEFAULT_BUDGET, Execution::Sequential)
            .unwrap()
            .found()
            .map(|r| r.sum_rate)
    });
    let exhaustive = ex.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n);
    let gsd_mean = exec.map(test.len(), |i| gsd(&test.samples[i].gains, u, l, s2).unwrap().sum_rate).iter().sum::<f64>() / n;
    let random = exec
        .map(test.len(), |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_stream(i as u64);
            (0..100).map(|_| random_assignment(&test.samples[i].gains, u, l, s2, &mut rng).unwrap().sum_rate).sum::<f64>()
                / 100.0
        })
        .iter()
        .sum::<f64>()
        / n;
    Baselines { exhaustive, gsd: gsd_mean, random }
}

fn datasets(sc: &Scenario, train_size: usize, test_size: usize) -> (Dataset, Dataset) {
    let exec = Execution::default();
    (
        generate_dataset(sc, train_size, 0, Split::Train, exec).unwrap(),
        generate_dataset(sc, test_size, 1, Split::Test, exec).unwrap(),
    )
}

/// Criterion 5's runtime target. Training stops here; criteria 6 and 8 then
/// score the model as it stands.
const SMALL_LIMIT: Duration = Duration::from_secs(30 * 60);

/// Default hyperparameters. The test set is scored every 25 iterations
/// instead of every iteration; test scores never feed back into training.
fn small_config() -> TrainConfig {
    TrainConfig { test_interval: 25, ..TrainConfig::default() }
}

/// Reduced schedule for the large scenario on a CPU budget: sparser graph,
/// smaller batches, shorter inner loops and a smaller test set.
fn large_config() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        max_inner_iters: 400,
        convergence_window: 50,
        max_outer_iters: 12,
        eval_batch: 128,
        test_interval: 50,
        model: GnnConfig { topology: TopologyRule::KNearest(4), ..GnnConfig::default() },
        ..TrainConfig::default()
    }
}

// 5. Constraints hold on every binarized test assignment and the runs are
// discrete at termination.
fn constraint_satisfaction(t: &Trained, test: &Dataset) -> Outcome {
    let s = evaluate(&t.model, test, Execution::default()).unwrap();
    let ok = s.connection_violations == 0 && s.capacity_violations == 0;
    let mins = t.secs / 60.0;
    let finished = if t.stopped { "stopped at the limit" } else { "finished" };
    outcome(
        ok && s.mean_entropy <= 1e-3 && !t.stopped && mins < 30.0,
        format!(
            "{} connection and {} capacity violations in {} samples (0); mean per-run entropy {:.2e} (<= 1e-3); \
             training {finished} after {mins:.1} min (< 30 min); outer limit hit in {:?}",
            s.connection_violations, s.capacity_violations, s.samples, s.mean_entropy, t.outer_limit_hit
        ),
    )
}

fn binary_mean(model: &Model, test: &Dataset) -> f64 {
    let e = evaluate_samples(model, test, Execution::default()).unwrap();
    e.iter().map(|x| x.binary_rate).sum::<f64>() / e.len() as f64
}

// 6. Binarized GNN within 5 % of the exhaustive optimum.
fn near_optimality(gnn: f64, b: &Baselines) -> Outcome {
    let ex = b.exhaustive.expect("small scenario is enumerable");
    outcome(gnn >= 0.95 * ex, format!("GNN {gnn:.4} vs exhaustive {ex:.4}: ratio {:.4} (>= 0.95)", gnn / ex))
}

// 7. GNN > GSD > random in both scenarios.
fn ordering(small: (f64, &Baselines), large: (f64, &Baselines)) -> Outcome {
    let holds = |(g, b): (f64, &Baselines)| g > b.gsd && b.gsd > b.random;
    let show = |(g, b): (f64, &Baselines)| format!("GNN {g:.4} > GSD {:.4} > random {:.4}", b.gsd, b.random);
    outcome(holds(small) && holds(large), format!("small: {}; large: {}", show(small), show(large)))
}

// 8. Shape of the multiplier and penalty curves.
fn trajectory(t: &Trained, test: &Dataset, tol: f64) -> Outcome {
    let rec = t.metrics.records();
    let zero_in_one = rec
        .iter()
        .filter(|r| r.phase == Phase::Unconstrained)
        .all(|r| r.lambda1 == 0.0 && r.lambda2 == 0.0 && r.nu1 == 0.0 && r.nu2 == 0.0);
    let test_conn = |p: Phase| rec.iter().filter(move |r| r.phase == p).filter_map(|r| r.test.map(|s| s.conn));
    let first_two = test_conn(Phase::Connection).next();
    let end_two = t.conn_end_phase_two.unwrap_or(f64::NAN);
    let decreasing = first_two.is_none_or(|c| end_two < c || c == 0.0);
    let reaches_tol = end_two <= tol;
    let peak_three = test_conn(Phase::Discreteness).fold(f64::NEG_INFINITY, f64::max);
    let transient = peak_three > end_two;
    let peak = rec.iter().filter_map(|r| r.test.map(|s| s.f)).fold(f64::NEG_INFINITY, f64::max);
    let s = evaluate(&t.model, test, Execution::default()).unwrap();
    let final_f = s.relaxed_rate;
    let decline = peak - final_f;
    let decline_ok = decline >= 0.0 && decline <= 0.05 * peak;
    outcome(
        zero_in_one && decreasing && reaches_tol && transient && decline_ok,
        format!(
            "(a) multipliers zero in phase one: {zero_in_one}; (b) test deficit {} -> {:.2e} at end of phase two \
             (<= {tol:.0e}: {reaches_tol}), peak {peak_three:.2e} in phase three (transient rise: {transient}); \
             (c) test sum-rate peak {peak:.4}, final {final_f:.4}, decline {:.2}% (0 to 5%)",
            first_two.map_or("n/a".into(), |c| format!("{c:.2e}")),
            end_two,
            100.0 * decline / peak
        ),
    )
}

/// Criteria to run: numeric command-line arguments, or all of them.
fn selected() -> Vec<u32> {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=9).collect()
    } else {
        picked
    }
}

fn main() {
    let want = selected();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &str, o: Outcome| {
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, o));
    };
    let quick: [(u32, &str, fn() -> Outcome); 5] = [
        (1, "gradient oracle", gradient_oracle),
        (2, "HPE", hpe_suite),
        (3, "stochasticity and scalability", stochasticity_and_scalability),
        (4, "exhaustive oracle", exhaustive_oracle),
        (9, "fronthaul accounting", fronthaul),
    ];
    for (id, name, run) in quick {
        if want.contains(&id) {
            report(id, name, run());
        }
    }

    let trained = [5, 6, 7, 8];
    if want.iter().any(|id| trained.contains(id)) {
        let (train_s, test_s) = datasets(&Scenario::small(), 8192, 1024);
        let small_cfg = small_config();
        let small = train_model(&train_s, &test_s, small_cfg, Some(SMALL_LIMIT), "small");
        let base_s = baselines(&test_s);
        let gnn_s = binary_mean(&small.model, &test_s);
        if want.contains(&5) {
            report(5, "constraint satisfaction", constraint_satisfaction(&small, &test_s));
        }
        if want.contains(&6) {
            report(6, "near-optimality", near_optimality(gnn_s, &base_s));
        }
        if want.contains(&8) {
            report(8, "ALM trajectory", trajectory(&small, &test_s, small_cfg.violation_tol));
        }
        if want.contains(&7) {
            let (train_l, test_l) = datasets(&Scenario::large(), 8192, 256);
            let large = train_model(&train_l, &test_l, large_config(), None, "large");
            let base_l = baselines(&test_l);
            let gnn_l = binary_mean(&large.model, &test_l);
            report(7, "ordering", ordering((gnn_s, &base_s), (gnn_l, &base_l)));
        }
    }

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
