use super::{repair_connections, AssignmentResult};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::scenario::check_feasible;

/// Name of the serialization implemented by [`gsd`].
pub const GSD_VARIANT: &str = "user_dictator_v1";

/// Greedy serial dictatorship.
///
/// Users take turns in descending order of their best gain; each claims its
/// `L` strongest APs that still have capacity. Then the remaining capacity
/// is filled by scanning the unassigned (user, AP) pairs by descending
/// gain. Ties go to the lower index. If an unlucky order leaves a user
/// short, AP slots are moved over from users with surplus.
pub fn gsd(gains: &Matrix, max_served: usize, min_serving: usize, sigma2: f64) -> Result<AssignmentResult> {
    let (k, n) = gains.shape();
    check_feasible(k, n, min_serving, max_served)?;
    if max_served > k {
        return Err(Error::InvalidScenario(format!("U = {max_served} exceeds {k} users")));
    }
    let mut s = Matrix::zeros(k, n);
    let mut capacity = vec![max_served; n];
    let best = |u: usize| gains.row(u).iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| best(b).total_cmp(&best(a)).then(a.cmp(&b)));

    for &u in &order {
        let mut aps: Vec<usize> = (0..n).filter(|&ap| capacity[ap] > 0).collect();
        aps.sort_by(|&a, &b| gains.get(u, b).total_cmp(&gains.get(u, a)).then(a.cmp(&b)));
        for &ap in aps.iter().take(min_serving) {
            s.set(u, ap, 1.0);
            capacity[ap] -= 1;
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|u| (0..n).map(move |ap| (u, ap))).collect();
    pairs.sort_by(|&(u, a), &(v, b)| gains.get(v, b).total_cmp(&gains.get(u, a)).then((u, a).cmp(&(v, b))));
    for (u, ap) in pairs {
        if capacity[ap] > 0 && s.get(u, ap) == 0.0 {
            s.set(u, ap, 1.0);
            capacity[ap] -= 1;
        }
    }
    repair_connections(&mut s, min_serving);
    AssignmentResult::score(s, gains, max_served, min_serving, sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{exhaustive, random_assignment, DEFAULT_BUDGET};
    use crate::par::Execution;
    use crate::scenario::{generate_dataset, Scenario, Split};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_trace_single_user() {
        let g = Matrix::from_rows(&[&[3.0, 5.0]]);
        let r = gsd(&g, 1, 1, 1.0).unwrap();
        assert_eq!(r.s.data(), &[1.0, 1.0]);
        assert!(r.feasible);
    }

    #[test]
    fn deterministic_feasible_and_bounded_by_exhaustive() {
        let ds = generate_dataset(&Scenario::small(), 30, 5, Split::Test, Execution::Sequential).unwrap();
        for sample in &ds.samples {
            let a = gsd(&sample.gains, 2, 2, 1.0).unwrap();
            assert_eq!(a, gsd(&sample.gains, 2, 2, 1.0).unwrap());
            assert!(a.feasible);
            let ex = exhaustive(&sample.gains, 2, 2, 1.0, true, DEFAULT_BUDGET, Execution::Sequential).unwrap();
            assert!(a.sum_rate <= ex.found().unwrap().sum_rate + 1e-12);
        }
    }

    #[test]
    fn beats_random_on_average() {
        let sc = Scenario::small();
        let ds = generate_dataset(&sc, 200, 6, Split::Test, Execution::Sequential).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut g, mut r) = (0.0, 0.0);
        for sample in &ds.samples {
            g += gsd(&sample.gains, 2, 2, sc.noise_power).unwrap().sum_rate;
            r += random_assignment(&sample.gains, 2, 2, sc.noise_power, &mut rng).unwrap().sum_rate;
        }
        assert!(g > r);
    }
}
