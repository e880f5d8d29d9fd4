//! Sum-rate, constraint penalties and the augmented-Lagrangian objective,
//! both as plain functions on `K x N` matrices and recorded on a tape.

use super::AlmState;
use crate::autodiff::{Matrix, Tape, Var, LOG_EPS};
use crate::error::{Error, Result};
use crate::gnn::RunVars;

/// `sum_k log2(1 + sum_n g_kn s_kn / sigma2)`.
pub fn sum_rate(gains: &Matrix, s: &Matrix, sigma2: f64) -> Result<f64> {
    if gains.shape() != s.shape() {
        return Err(Error::dim("sum_rate", format!("gains {:?}, assignment {:?}", gains.shape(), s.shape())));
    }
    let mut f = 0.0;
    for k in 0..gains.rows() {
        let mut signal = 0.0;
        for (n, (&g, &x)) in gains.row(k).iter().zip(s.row(k)).enumerate() {
            if g < 0.0 {
                return Err(Error::NegativeGain { user: k, ap: n });
            }
            signal += g * x;
        }
        f += (1.0 + signal / sigma2).log2();
    }
    Ok(f)
}

/// Per-user `ReLU(L - sum_n s_kn)` and their total.
pub fn connection_violation(s: &Matrix, min_serving: usize) -> (Vec<f64>, f64) {
    let per_user: Vec<f64> = (0..s.rows())
        .map(|k| (min_serving as f64 - s.row(k).iter().sum::<f64>()).max(0.0))
        .collect();
    let total = per_user.iter().sum();
    (per_user, total)
}

/// Per-AP `p_n = sum_u -sum_k s_kn^(u) ln s_kn^(u)` (with `0 ln 0 = 0`) and
/// their total.
pub fn discreteness_penalty(runs: &[Matrix]) -> Result<(Vec<f64>, f64)> {
    let n_aps = runs.first().map_or(0, Matrix::cols);
    let mut p = vec![0.0; n_aps];
    for s in runs {
        for k in 0..s.rows() {
            for (n, &x) in s.row(k).iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::OutOfRange { row: k, col: n, value: x });
                }
                if x > 0.0 {
                    p[n] -= x * x.ln();
                }
            }
        }
    }
    let total = p.iter().sum();
    Ok((p, total))
}

/// `f - l1 C - l2/2 P - n1 C2 - n2/2 P2` where `C`, `C2` are the summed and
/// summed-squared connection deficits and `P`, `P2` the summed and
/// summed-squared per-AP entropies.
pub fn alm_objective(f: f64, conn_total: f64, conn_sq_total: f64, p_values: &[f64], alm: &AlmState) -> f64 {
    let p: f64 = p_values.iter().sum();
    let p_sq: f64 = p_values.iter().map(|x| x * x).sum();
    f - alm.lambda1 * conn_total - 0.5 * alm.lambda2 * p - alm.nu1 * conn_sq_total - 0.5 * alm.nu2 * p_sq
}

/// Scalar nodes of one sample's objective.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveVars {
    pub g: Var,
    pub f: Var,
    pub conn: Var,
    pub conn_sq: Var,
    pub p_total: Var,
    pub p_sq: Var,
}

/// Records the objective of one inference. `snr` is `g / sigma2` as a
/// `1 x (N*K)` AP-major row.
pub fn record_objective(
    t: &mut Tape,
    vars: &RunVars,
    snr: &Matrix,
    n_users: usize,
    min_serving: usize,
    alm: &AlmState,
) -> Result<ObjectiveVars> {
    let n_aps = snr.cols() / n_users;
    let s = vars.combined;
    let snr = t.constant(snr.clone());
    let signal = t.mul(s, snr)?;
    let signal = t.reshape(signal, n_aps, n_users)?;
    let signal = t.sum_rows(signal);
    let one_plus = t.add_scalar(signal, 1.0);
    let ln = t.ln(one_plus, 0.0);
    let nats = t.sum(ln);
    let f = t.mul_scalar(nats, std::f64::consts::LOG2_E);

    let served = t.reshape(s, n_aps, n_users)?;
    let served = t.sum_rows(served);
    let deficit = t.affine(served, -1.0, min_serving as f64);
    let deficit = t.relu(deficit);
    let conn = t.sum(deficit);
    let deficit_sq = t.square(deficit)?;
    let conn_sq = t.sum(deficit_sq);

    let mut neg_p: Option<Var> = None;
    for &run in &vars.runs {
        let ln = t.ln(run, LOG_EPS);
        let xlx = t.mul(run, ln)?;
        let xlx = t.reshape(xlx, n_aps, n_users)?;
        let per_ap = t.sum_cols(xlx);
        neg_p = Some(match neg_p {
            None => per_ap,
            Some(acc) => t.add(acc, per_ap)?,
        });
    }
    let p = t.mul_scalar(neg_p.expect("at least one run"), -1.0);
    let p_total = t.sum(p);
    let p2 = t.square(p)?;
    let p_sq = t.sum(p2);

    let terms = [
        (conn, alm.lambda1),
        (p_total, 0.5 * alm.lambda2),
        (conn_sq, alm.nu1),
        (p_sq, 0.5 * alm.nu2),
    ];
    let mut g = f;
    for (term, weight) in terms {
        if weight != 0.0 {
            let w = t.mul_scalar(term, weight);
            g = t.sub(g, w)?;
        }
    }
    Ok(ObjectiveVars { g, f, conn, conn_sq, p_total, p_sq })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alm(l1: f64, l2: f64, n1: f64, n2: f64) -> AlmState {
        AlmState { lambda1: l1, lambda2: l2, nu1: n1, nu2: n2, ..AlmState::new(0.1) }
    }

    #[test]
    fn sum_rate_cases() {
        let g = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, 4.0]]);
        assert_eq!(sum_rate(&g, &Matrix::zeros(2, 2), 1.0).unwrap(), 0.0);
        let one = Matrix::from_rows(&[&[3.0]]);
        assert!((sum_rate(&one, &Matrix::scalar(1.0), 1.0).unwrap() - 2.0).abs() < 1e-15);
        let s = Matrix::from_rows(&[&[0.3, 0.9], &[1.0, 0.2]]);
        let parts: f64 = (0..2)
            .map(|k| {
                let gk = Matrix::from_rows(&[g.row(k)]);
                let sk = Matrix::from_rows(&[s.row(k)]);
                sum_rate(&gk, &sk, 2.0).unwrap()
            })
            .sum();
        assert!((sum_rate(&g, &s, 2.0).unwrap() - parts).abs() < 1e-15);
        let neg = Matrix::from_rows(&[&[1.0, -0.1]]);
        assert!(matches!(
            sum_rate(&neg, &Matrix::zeros(1, 2), 1.0),
            Err(Error::NegativeGain { user: 0, ap: 1 })
        ));
    }

    #[test]
    fn connection_cases() {
        let s = Matrix::from_rows(&[&[1.0, 1.0, 0.5], &[0.0, 0.0, 0.0], &[1.0, 0.5, 0.0]]);
        let (per, total) = connection_violation(&s, 2);
        assert_eq!(per, vec![0.0, 2.0, 0.5]);
        assert_eq!(total, 2.5);
    }

    #[test]
    fn entropy_cases() {
        let one_hot = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]]);
        let (p, total) = discreteness_penalty(&[one_hot.clone(), one_hot]).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        assert_eq!(total, 0.0);
        let uniform = Matrix::filled(4, 1, 0.25);
        let (p, _) = discreteness_penalty(&[uniform]).unwrap();
        assert!((p[0] - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(discreteness_penalty(&[Matrix::zeros(4, 1)]).unwrap().1, 0.0);
        assert!(discreteness_penalty(&[Matrix::filled(2, 1, 1.5)]).is_err());
    }

    #[test]
    fn recorded_terms_match_plain_values() {
        use crate::gnn::{ap_major, build_graph, init_params, record_assign, recurrent_assign, GnnConfig};
        use crate::scenario::Scenario;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        let sc = Scenario::small();
        let config = GnnConfig { hidden: 6, message: 3, ..GnnConfig::default() };
        let topo = build_graph(&sc, config.topology).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = init_params(&config, &mut rng);
        let (k, n, u, l) = (sc.n_users, sc.n_aps, sc.max_served_users, sc.min_serving_aps);
        let g_hat = Matrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
        let gains = Matrix::from_fn(k, n, |_, _| rng.random_range(0.01..5.0));
        let state = alm(0.4, 0.3, 0.2, 0.1);

        let plain = recurrent_assign(&config, &params, &g_hat, &topo, u, l).unwrap();
        let f = sum_rate(&gains, &plain.combined, 2.0).unwrap();
        let (per_user, conn) = connection_violation(&plain.combined, l);
        let conn_sq: f64 = per_user.iter().map(|v| v * v).sum();
        let (p, p_total) = discreteness_penalty(&plain.runs).unwrap();

        let mut t = Tape::new();
        let bound = params.bind(&mut t);
        let vars = record_assign(&mut t, &config, &params, &bound, &g_hat, &topo, u, l).unwrap();
        let snr = ap_major(&gains.map(|g| g / 2.0));
        let obj = record_objective(&mut t, &vars, &snr, k, l, &state).unwrap();
        let close = |v: Var, x: f64| approx::assert_relative_eq!(t.value(v).get(0, 0), x, epsilon = 1e-9, max_relative = 1e-9);
        close(obj.f, f);
        close(obj.conn, conn);
        close(obj.conn_sq, conn_sq);
        close(obj.p_total, p_total);
        close(obj.p_sq, p.iter().map(|x| x * x).sum());
        close(obj.g, alm_objective(f, conn, conn_sq, &p, &state));
    }

    #[test]
    fn alm_substitutions() {
        assert_eq!(alm_objective(1.7, 3.0, 4.0, &[1.0, 2.0], &alm(0.0, 0.0, 0.0, 0.0)), 1.7);
        assert_eq!(alm_objective(0.0, 2.0, 4.0, &[0.0], &alm(1.0, 0.0, 0.0, 0.0)), -2.0);
        assert_eq!(alm_objective(0.0, 0.0, 0.0, &[1.0, 1.0], &alm(0.0, 0.0, 0.0, 2.0)), -2.0);
    }
}
