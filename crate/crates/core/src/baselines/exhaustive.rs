use super::AssignmentResult;
use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::par::Execution;

/// Largest number of assignments [`exhaustive`] examines by default.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Outcome of an exhaustive search.
#[derive(Clone, Debug, PartialEq)]
pub enum Exhaustive {
    Found(AssignmentResult),
    /// `C(K, U)^N` exceeds the budget.
    NotAvailable { assignments: f64, budget: u64 },
}

impl Exhaustive {
    pub fn found(&self) -> Option<&AssignmentResult> {
        match self {
            Exhaustive::Found(r) => Some(r),
            Exhaustive::NotAvailable { .. } => None,
        }
    }
}

/// All `size`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    rec(0, n, size, &mut cur, &mut out);
    out
}

struct Search<'a> {
    gains: &'a Matrix,
    choices: Vec<Vec<usize>>,
    sigma2: f64,
    min_serving: usize,
    require_lower: bool,
}

#[derive(Clone, Debug)]
struct Best {
    rate: f64,
    picks: Vec<usize>,
    visited: u64,
}

impl Search<'_> {
    /// Depth-first over APs `ap..N` from the given partial sums; keeps the
    /// first maximum in enumeration order.
    fn run(&self, ap: usize, signal: &[f64], served: &[usize], picks: &mut Vec<usize>, best: &mut Option<Best>, visited: &mut u64) {
        let n_aps = self.gains.cols();
        if ap == n_aps {
            *visited += 1;
            if self.require_lower && served.iter().any(|&c| c < self.min_serving) {
                return;
            }
            let rate: f64 = signal.iter().map(|x| (1.0 + x / self.sigma2).log2()).sum();
            if best.as_ref().is_none_or(|b| rate > b.rate) {
                *best = Some(Best { rate, picks: picks.clone(), visited: 0 });
            }
            return;
        }
        let mut sig = signal.to_vec();
        let mut srv = served.to_vec();
        for (c, users) in self.choices.iter().enumerate() {
            sig.copy_from_slice(signal);
            srv.copy_from_slice(served);
            for &k in users {
                sig[k] += self.gains.get(k, ap);
                srv[k] += 1;
            }
            picks.push(c);
            self.run(ap + 1, &sig, &srv, picks, best, visited);
            picks.pop();
        }
    }
}

/// Best assignment in which every AP serves exactly `U` users.
///
/// APs are enumerated outer to inner by index and subsets in lexicographic
/// order; the first maximum wins. With `require_lower`, assignments that
/// leave a user with fewer than `L` APs are skipped (but still counted).
/// Under [`Execution::Parallel`] the search is split by the first AP's
/// subset and reduced in that order, so both modes return the same result.
pub fn exhaustive(
    gains: &Matrix,
    max_served: usize,
    min_serving: usize,
    sigma2: f64,
    require_lower: bool,
    budget: u64,
    execution: Execution,
) -> Result<Exhaustive> {
    let (k, n) = gains.shape();
    if max_served == 0 || max_served > k || n == 0 {
        return Err(Error::InvalidScenario(format!("cannot pick {max_served} of {k} users at {n} APs")));
    }
    let choices = subsets(k, max_served);
    let assignments = (choices.len() as f64).powi(n as i32);
    if assignments > budget as f64 {
        return Ok(Exhaustive::NotAvailable { assignments, budget });
    }
    let search = Search { gains, choices, sigma2, min_serving, require_lower };
    let parts = execution.map(search.choices.len(), |c| {
        let mut signal = vec![0.0; k];
        let mut served = vec![0; k];
        for &u in &search.choices[c] {
            signal[u] += gains.get(u, 0);
            served[u] += 1;
        }
        let mut best = None;
        let mut visited = 0;
        let mut picks = vec![c];
        search.run(1, &signal, &served, &mut picks, &mut best, &mut visited);
        Best { visited, ..best.unwrap_or(Best { rate: f64::NEG_INFINITY, picks: Vec::new(), visited: 0 }) }
    });
    let visited: u64 = parts.iter().map(|b| b.visited).sum();
    let mut winner: Option<Best> = None;
    for part in parts {
        if !part.picks.is_empty() && winner.as_ref().is_none_or(|w| part.rate > w.rate) {
            winner = Some(part);
        }
    }
    let Some(winner) = winner else {
        return Err(Error::Infeasible { n_users: k, n_aps: n, min_serving, max_served });
    };
    let mut s = Matrix::zeros(k, n);
    for (ap, &c) in winner.picks.iter().enumerate() {
        for &u in &search.choices[c] {
            s.set(u, ap, 1.0);
        }
    }
    let mut result = AssignmentResult::score(s, gains, max_served, min_serving, sigma2)?;
    result.enumerated_count = Some(visited);
    Ok(Exhaustive::Found(result))
}
