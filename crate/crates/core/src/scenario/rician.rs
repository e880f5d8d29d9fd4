//! Rician gains parameterized by their mean and variance.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest variance/mean² ratio a Rician law can have (the Rayleigh case).
pub const RAYLEIGH_RATIO: f64 = 4.0 / std::f64::consts::PI - 1.0;

/// `|nu + sigma * (Z1 + i Z2)|` for independent standard normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rician {
    pub nu: f64,
    pub sigma: f64,
}

impl Rician {
    /// The Rician law with the given mean and variance. A variance beyond the
    /// Rayleigh limit `RAYLEIGH_RATIO * mean²` is capped there; the mean is
    /// always matched.
    pub fn from_moments(mean: f64, variance: f64) -> Self {
        assert!(mean > 0.0 && variance >= 0.0, "mean must be positive, variance non-negative");
        if variance == 0.0 {
            return Rician { nu: mean, sigma: 0.0 };
        }
        let q = variance / (mean * mean);
        let r = if q >= RAYLEIGH_RATIO { 0.0 } else { solve_k(q) };
        let sigma = mean / unit_mean(r);
        Rician { nu: r * sigma, sigma }
    }

    pub fn mean(&self) -> f64 {
        if self.sigma == 0.0 {
            return self.nu;
        }
        self.sigma * unit_mean(self.nu / self.sigma)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (2.0 * self.sigma * self.sigma + self.nu * self.nu - m * m).max(0.0)
    }
}

impl Distribution<f64> for Rician {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        (self.nu + self.sigma * z1).hypot(self.sigma * z2)
    }
}

/// Mean of Rice(nu = r, sigma = 1): `sqrt(pi/2) * L_{1/2}(-r²/2)`.
fn unit_mean(r: f64) -> f64 {
    let y = r * r / 4.0;
    let laguerre = (1.0 + r * r / 2.0) * i0e(y) + (r * r / 2.0) * i1e(y);
    (std::f64::consts::PI / 2.0).sqrt() * laguerre
}

/// variance / mean² of Rice(r, 1); strictly decreasing in r.
fn ratio(r: f64) -> f64 {
    let m = unit_mean(r);
    (2.0 + r * r) / (m * m) - 1.0
}

/// Solves `ratio(r) = q` by bisection, for `0 < q < RAYLEIGH_RATIO`.
fn solve_k(q: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = (4.0 / q.sqrt()).max(10.0);
    while ratio(hi) > q {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// Exponentially scaled modified Bessel functions e^{-x} I0(x), e^{-x} I1(x)
// for x >= 0 (Abramowitz & Stegun 9.8.1-9.8.4, |rel err| < 2e-7).
fn i0e(x: f64) -> f64 {
    if x < 3.75 {
        let t = (x / 3.75).powi(2);
        let p = 1.0
            + t * (3.5156229
                + t * (3.0899424 + t * (1.2067492 + t * (0.2659732 + t * (0.0360768 + t * 0.0045813)))));
        p * (-x).exp()
    } else {
        let t = 3.75 / x;
        let p = 0.39894228
            + t * (0.01328592
                + t * (0.00225319
                    + t * (-0.00157565
                        + t * (0.00916281
                            + t * (-0.02057706 + t * (0.02635537 + t * (-0.01647633 + t * 0.00392377)))))));
        p / x.sqrt()
    }
}

fn i1e(x: f64) -> f64 {
    if x < 3.75 {
        let t = (x / 3.75).powi(2);
        let p = 0.5
            + t * (0.87890594
                + t * (0.51498869 + t * (0.15084934 + t * (0.02658733 + t * (0.00301532 + t * 0.00032411)))));
        x * p * (-x).exp()
    } else {
        let t = 3.75 / x;
        let p = 0.39894228
            + t * (-0.03988024
                + t * (-0.00362018
                    + t * (0.00163801
                        + t * (-0.01031555
                            + t * (0.02282967 + t * (-0.02895312 + t * (0.01787654 - t * 0.00420059)))))));
        p / x.sqrt()
    }
}
