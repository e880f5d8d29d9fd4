//! Reference assignment methods: the exhaustive upper bound, uniformly random
//! feasible assignments, and greedy serial dictatorship.

mod exhaustive;
mod greedy;

use rand::Rng;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::scenario::check_feasible;
use crate::training::sum_rate;

pub use exhaustive::{exhaustive, subsets, Exhaustive, DEFAULT_BUDGET};
pub use greedy::{gsd, GSD_VARIANT};

/// A binary assignment with its score.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult {
    pub s: Matrix,
    pub sum_rate: f64,
    pub feasible: bool,
    /// Assignments examined (exhaustive search only).
    pub enumerated_count: Option<u64>,
}

impl AssignmentResult {
    pub(crate) fn score(s: Matrix, gains: &Matrix, max_served: usize, min_serving: usize, sigma2: f64) -> Result<Self> {
        Ok(AssignmentResult {
            sum_rate: sum_rate(gains, &s, sigma2)?,
            feasible: is_feasible(&s, max_served, min_serving),
            s,
            enumerated_count: None,
        })
    }
}

/// Binary entries, at most `max_served` users per AP and at least
/// `min_serving` APs per user.
pub fn is_feasible(s: &Matrix, max_served: usize, min_serving: usize) -> bool {
    let binary = s.data().iter().all(|&x| x == 0.0 || x == 1.0);
    let per_ap = (0..s.cols()).all(|n| (0..s.rows()).map(|k| s.get(k, n)).sum::<f64>() <= max_served as f64);
    let per_user = (0..s.rows()).all(|k| s.row(k).iter().sum::<f64>() >= min_serving as f64);
    binary && per_ap && per_user
}

const RANDOM_RETRIES: usize = 1000;

/// Every AP serves `U` users drawn uniformly without replacement. Draws
/// are repeated until every user has `L` APs; after the retry cap the last
/// draw is repaired by [`repair_connections`].
pub fn random_assignment(
    gains: &Matrix,
    max_served: usize,
    min_serving: usize,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<AssignmentResult> {
    let (k, n) = gains.shape();
    check_feasible(k, n, min_serving, max_served)?;
    if max_served > k {
        return Err(Error::InvalidScenario(format!("U = {max_served} exceeds {k} users")));
    }
    let mut s = Matrix::zeros(k, n);
    for _ in 0..RANDOM_RETRIES {
        s = Matrix::zeros(k, n);
        for ap in 0..n {
            for user in rand::seq::index::sample(rng, k, max_served) {
                s.set(user, ap, 1.0);
            }
        }
        if is_feasible(&s, max_served, min_serving) {
            return AssignmentResult::score(s, gains, max_served, min_serving, sigma2);
        }
    }
    repair_connections(&mut s, min_serving);
    AssignmentResult::score(s, gains, max_served, min_serving, sigma2)
}

/// Moves AP slots from users with more than `L` APs to users with fewer,
/// until every user has `L`. Requires every AP to be full and `K L <= N U`.
/// Deterministic: the lowest-index deficient user takes a slot from the
/// lowest-index AP that serves a surplus user but not it.
pub fn repair_connections(s: &mut Matrix, min_serving: usize) {
    let (k, n) = s.shape();
    let count = |s: &Matrix, u: usize| s.row(u).iter().sum::<f64>() as usize;
    while let Some(d) = (0..k).find(|&u| count(s, u) < min_serving) {
        let swap = (0..n).find_map(|ap| {
            if s.get(d, ap) == 1.0 {
                return None;
            }
            (0..k).find(|&u| s.get(u, ap) == 1.0 && count(s, u) > min_serving).map(|u| (ap, u))
        });
        let Some((ap, u)) = swap else { return };
        s.set(u, ap, 0.0);
        s.set(d, ap, 1.0);
    }
}
