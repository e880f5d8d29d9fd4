//! Network geometry, channel draws and train/test datasets.

mod io;
mod rician;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

pub use io::{load_dataset, save_dataset, DATASET_VERSION};
pub use rician::{Rician, RAYLEIGH_RATIO};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular deployment area anchored at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn square(side: f64) -> Self {
        Area { width: side, height: side }
    }

    pub fn diagonal(self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn contains(self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Regular AP grid. Points are spread evenly from `margin` to
/// `side - margin` along each axis and filled row by row from the bottom;
/// the top row may be partially filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub margin: f64,
}

/// Deterministic AP placement on `layout`.
pub fn place_aps(layout: GridLayout, n_aps: usize, area: Area) -> Result<Vec<Point>> {
    let GridLayout { rows, cols, margin } = layout;
    let invalid = || Error::InvalidLayout { n_aps, rows, cols };
    if n_aps == 0 || rows == 0 || cols == 0 || n_aps > rows * cols || n_aps <= (rows - 1) * cols {
        return Err(invalid());
    }
    if margin < 0.0 || 2.0 * margin > area.width || 2.0 * margin > area.height {
        return Err(invalid());
    }
    let axis = |count: usize, side: f64, i: usize| {
        if count == 1 {
            side / 2.0
        } else {
            margin + (side - 2.0 * margin) * i as f64 / (count - 1) as f64
        }
    };
    Ok((0..n_aps)
        .map(|i| Point::new(axis(cols, area.width, i % cols), axis(rows, area.height, i / cols)))
        .collect())
}

/// `n_users` i.i.d. uniform points. Consumes exactly two uniforms per user.
pub fn sample_users(rng: &mut impl Rng, n_users: usize, area: Area) -> Result<Vec<Point>> {
    if n_users == 0 {
        return Err(Error::InvalidScenario("at least one user is required".into()));
    }
    Ok((0..n_users)
        .map(|_| {
            let x = rng.random::<f64>() * area.width;
            let y = rng.random::<f64>() * area.height;
            Point::new(x, y)
        })
        .collect())
}

/// Problem geometry and channel constants shared by every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub n_aps: usize,
    pub n_users: usize,
    pub area: Area,
    pub ap_positions: Vec<Point>,
    /// L: every user needs at least this many serving APs.
    pub min_serving_aps: usize,
    /// U: every AP serves at most this many users.
    pub max_served_users: usize,
    pub noise_power: f64,
    /// c in the mean gain c / d.
    pub gain_scale: f64,
    pub rician_variance: f64,
}

impl Scenario {
    /// 5 APs, 4 users on a 100 m square.
    pub fn small() -> Self {
        let area = Area::square(100.0);
        let layout = GridLayout { rows: 2, cols: 3, margin: 5.0 };
        Scenario {
            n_aps: 5,
            n_users: 4,
            area,
            ap_positions: place_aps(layout, 5, area).expect("valid preset layout"),
            min_serving_aps: 2,
            max_served_users: 2,
            noise_power: 1.0,
            gain_scale: 2.45,
            rician_variance: 2.5e-3,
        }
    }

    /// 20 APs, 15 users on a 1 km square.
    pub fn large() -> Self {
        let area = Area::square(1000.0);
        let layout = GridLayout { rows: 4, cols: 5, margin: 50.0 };
        Scenario {
            n_aps: 20,
            n_users: 15,
            area,
            ap_positions: place_aps(layout, 20, area).expect("valid preset layout"),
            min_serving_aps: 2,
            max_served_users: 2,
            noise_power: 1.0,
            gain_scale: LARGE_GAIN_SCALE,
            rician_variance: 2.5e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_aps == 0 || self.n_users == 0 {
            return bad("need at least one AP and one user".into());
        }
        if self.max_served_users == 0 || self.max_served_users > self.n_users {
            return bad(format!(
                "max_served_users must lie in 1..={}, got {}",
                self.n_users, self.max_served_users
            ));
        }
        if self.min_serving_aps > self.n_aps {
            return bad(format!(
                "min_serving_aps must lie in 0..={}, got {}",
                self.n_aps, self.min_serving_aps
            ));
        }
        check_feasible(self.n_users, self.n_aps, self.min_serving_aps, self.max_served_users)?;
        if self.ap_positions.len() != self.n_aps {
            return bad(format!(
                "{} AP positions for {} APs",
                self.ap_positions.len(),
                self.n_aps
            ));
        }
        if let Some(p) = self.ap_positions.iter().find(|p| !self.area.contains(**p)) {
            return bad(format!("AP at ({}, {}) lies outside the area", p.x, p.y));
        }
        if !(self.noise_power > 0.0 && self.gain_scale > 0.0 && self.rician_variance >= 0.0) {
            return bad("noise_power and gain_scale must be positive, rician_variance non-negative".into());
        }
        Ok(())
    }
}

const LARGE_GAIN_SCALE: f64 = 7.5;

/// `K * L <= N * U`, the counting condition without which no assignment
/// can satisfy both connection constraints.
pub fn check_feasible(n_users: usize, n_aps: usize, min_serving: usize, max_served: usize) -> Result<()> {
    if n_users * min_serving > n_aps * max_served {
        return Err(Error::Infeasible { n_users, n_aps, min_serving, max_served });
    }
    Ok(())
}

/// One effective gain between an AP and a user: Rician with mean
/// `gain_scale / distance` and variance `rician_variance`.
pub fn channel_gain(ap: Point, user: Point, scenario: &Scenario, rng: &mut impl Rng) -> Result<f64> {
    let d = ap.distance(user);
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    let mean = scenario.gain_scale / d;
    if scenario.rician_variance == 0.0 {
        return Ok(mean);
    }
    Ok(Rician::from_moments(mean, scenario.rician_variance).sample(rng))
}

/// One problem instance: gains `g[k][n]` (K x N) and the user drop that
/// produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub gains: Matrix,
    pub user_positions: Vec<Point>,
}

impl ChannelRealization {
    pub fn n_users(&self) -> usize {
        self.gains.rows()
    }

    pub fn n_aps(&self) -> usize {
        self.gains.cols()
    }

    /// Draws users and gains for `scenario`.
    pub fn sample(scenario: &Scenario, rng: &mut impl Rng) -> Result<Self> {
        let users = sample_users(rng, scenario.n_users, scenario.area)?;
        let mut gains = Matrix::zeros(scenario.n_users, scenario.n_aps);
        for (k, &u) in users.iter().enumerate() {
            for (n, &ap) in scenario.ap_positions.iter().enumerate() {
                gains.set(k, n, channel_gain(ap, u, scenario, rng)?);
            }
        }
        Ok(ChannelRealization { gains, user_positions: users })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scenario: Scenario,
    pub samples: Vec<ChannelRealization>,
    pub seed: u64,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Generator for sample `index` of a dataset with master `seed`: the seed
/// keys the stream cipher, the index selects the stream. Samples are
/// therefore independent of generation order and of each other.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `size` independent realizations; `(scenario, seed, size)` fixes the
/// contents bit for bit.
pub fn generate_dataset(
    scenario: &Scenario,
    size: usize,
    seed: u64,
    split: Split,
    exec: Execution,
) -> Result<Dataset> {
    scenario.validate()?;
    if size == 0 {
        return Err(Error::InvalidScenario("dataset size must be at least 1".into()));
    }
    let samples = exec
        .map(size, |i| ChannelRealization::sample(scenario, &mut sample_rng(seed, i as u64)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { scenario: scenario.clone(), samples, seed, split })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn small_layout_matches_figure() {
        let aps = place_aps(GridLayout { rows: 2, cols: 3, margin: 5.0 }, 5, Area::square(100.0)).unwrap();
        assert_eq!(aps, pts(&[(5., 5.), (50., 5.), (95., 5.), (5., 95.), (50., 95.)]));
    }

    #[test]
    fn large_layout_matches_figure() {
        let aps = place_aps(GridLayout { rows: 4, cols: 5, margin: 50.0 }, 20, Area::square(1000.0)).unwrap();
        let mut xs: Vec<f64> = aps.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = aps.iter().map(|p| p.y).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        assert_eq!(xs, [50., 275., 500., 725., 950.]);
        assert_eq!(ys, [50., 350., 650., 950.]);
        assert_eq!(aps.len(), 20);
    }

    #[test]
    fn single_ap_sits_in_the_middle() {
        let aps = place_aps(GridLayout { rows: 1, cols: 1, margin: 50.0 }, 1, Area::square(100.0)).unwrap();
        assert_eq!(aps, pts(&[(50., 50.)]));
    }

    #[test]
    fn layout_must_fit_the_ap_count() {
        let area = Area::square(100.0);
        let grid = GridLayout { rows: 3, cols: 3, margin: 5.0 };
        assert!(matches!(place_aps(grid, 5, area), Err(Error::InvalidLayout { .. })));
        assert!(place_aps(grid, 10, area).is_err());
        assert!(place_aps(grid, 7, area).is_ok());
    }

    #[test]
    fn presets_validate() {
        Scenario::small().validate().unwrap();
        Scenario::large().validate().unwrap();
    }

    #[test]
    fn infeasible_counts_are_rejected() {
        let mut s = Scenario::small();
        s.min_serving_aps = 3; // 4 * 3 > 5 * 2
        assert!(matches!(s.validate(), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn users_are_reproducible_and_reject_zero() {
        let area = Area::square(100.0);
        let a = sample_users(&mut sample_rng(11, 0), 4, area).unwrap();
        let b = sample_users(&mut sample_rng(11, 0), 4, area).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| area.contains(*p)));
        assert!(sample_users(&mut sample_rng(11, 0), 0, area).is_err());
    }

    #[test]
    fn zero_variance_gives_the_mean_exactly() {
        let mut s = Scenario::small();
        s.rician_variance = 0.0;
        let g = channel_gain(Point::new(0.0, 0.0), Point::new(3.0, 4.0), &s, &mut sample_rng(1, 0)).unwrap();
        assert_eq!(g, s.gain_scale / 5.0);
    }

    #[test]
    fn coincident_positions_are_degenerate() {
        let s = Scenario::small();
        let p = Point::new(5.0, 5.0);
        assert!(matches!(
            channel_gain(p, p, &s, &mut sample_rng(1, 0)),
            Err(Error::DegenerateGeometry)
        ));
    }

    #[test]
    fn datasets_are_reproducible_and_seed_dependent() {
        let s = Scenario::small();
        let a = generate_dataset(&s, 16, 7, Split::Test, Execution::Sequential).unwrap();
        let b = generate_dataset(&s, 16, 7, Split::Test, Execution::Parallel).unwrap();
        let c = generate_dataset(&s, 16, 8, Split::Test, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().zip(&c.samples).any(|(x, y)| x.gains != y.gains));
        for sample in &a.samples {
            assert!(sample.gains.data().iter().all(|&g| g > 0.0));
            assert_eq!(sample.gains.shape(), (4, 5));
        }
        assert!(generate_dataset(&s, 0, 7, Split::Test, Execution::Sequential).is_err());
    }
}
