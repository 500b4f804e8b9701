//! Posterior representations and the trial decision rule.
//!
//! Every analysis method returns a [`Posterior`] over the target treatment
//! effect. Three representations cover all methods in the crate: exact
//! normals (conjugate methods), finite normal mixtures (robust mixture
//! prior), and dense grid densities (quadrature-based methods). All tail
//! probabilities and quantiles are computed from the CDF, never from
//! sampling, so decisions are deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::trapezoid_uniform;
use crate::stats::{norm_cdf, norm_pdf_at, norm_quantile};

/// Which side of the null boundary counts as effective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    GreaterIsEffective,
    LessIsEffective,
}

/// Success criterion: declare success when Pr(effect beyond theta0) > rho.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub theta0: f64,
    pub direction: Direction,
    pub rho: f64,
}

impl DecisionRule {
    pub fn new(theta0: f64, direction: Direction, rho: f64) -> Result<Self> {
        if !(rho > 0.5 && rho < 1.0) {
            return Err(Error::domain(format!("rho must lie in (0.5, 1), got {rho}")));
        }
        Ok(DecisionRule { theta0, direction, rho })
    }

    pub fn one_sided(theta0: f64, direction: Direction) -> Self {
        DecisionRule { theta0, direction, rho: 0.975 }
    }
}

/// Vague initial prior on the treatment effect, N(mean, sd^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaguePrior {
    pub mean: f64,
    pub sd: f64,
}

impl Default for VaguePrior {
    fn default() -> Self {
        // Variance 1000, the conventional vague prior for O(1) effect scales.
        VaguePrior { mean: 0.0, sd: 1000f64.sqrt() }
    }
}

impl VaguePrior {
    pub fn with_sd(sd: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(Error::domain("vague prior sd must be positive"));
        }
        Ok(VaguePrior { mean: 0.0, sd })
    }

    pub fn precision(&self) -> f64 {
        1.0 / (self.sd * self.sd)
    }
}

/// One component of a normal mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Finite normal mixture with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMixture {
    pub components: Vec<MixtureComponent>,
}

impl NormalMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mixture weights sum to {wsum}, not 1")));
        }
        for c in &components {
            if !(c.sd > 0.0) || c.weight < 0.0 {
                return Err(Error::domain("mixture components need sd > 0 and weight >= 0"));
            }
        }
        Ok(NormalMixture { components })
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.sd * c.sd + (c.mean - m) * (c.mean - m)))
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * norm_cdf((x - c.mean) / c.sd))
            .sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * norm_pdf_at(x, c.mean, c.sd))
            .sum()
    }
}

/// Normalized density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    /// Leftmost grid point.
    pub x0: f64,
    /// Grid spacing.
    pub dx: f64,
    /// Density values at x0 + i*dx, trapezoid-normalized to integrate to 1.
    pub density: Vec<f64>,
}

impl GridDensity {
    /// Build from (possibly unnormalized) nonnegative density values.
    pub fn from_unnormalized(x0: f64, dx: f64, mut density: Vec<f64>) -> Result<Self> {
        if density.len() < 3 || !(dx > 0.0) {
            return Err(Error::domain("grid needs dx > 0 and at least 3 points"));
        }
        if density.iter().any(|y| !y.is_finite() || *y < 0.0) {
            return Err(Error::domain("grid density must be finite and nonnegative"));
        }
        let total = trapezoid_uniform(&density, dx);
        if !(total > 0.0) {
            return Err(Error::domain("grid density integrates to zero"));
        }
        for y in &mut density {
            *y /= total;
        }
        Ok(GridDensity { x0, dx, density })
    }

    pub fn validate(&self) -> Result<()> {
        let total = trapezoid_uniform(&self.density, self.dx);
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::domain(format!("grid integrates to {total}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn mean(&self) -> f64 {
        let ys: Vec<f64> = (0..self.len()).map(|i| self.x(i) * self.density[i]).collect();
        trapezoid_uniform(&ys, self.dx)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let ys: Vec<f64> = (0..self.len())
            .map(|i| {
                let d = self.x(i) - m;
                d * d * self.density[i]
            })
            .collect();
        trapezoid_uniform(&ys, self.dx)
    }

    /// CDF at `x`, exact for the piecewise-linear density the grid represents.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.x0 {
            return 0.0;
        }
        if x >= self.x_max() {
            return 1.0;
        }
        let t = (x - self.x0) / self.dx;
        let cell = (t.floor() as usize).min(self.len() - 2);
        let frac = t - cell as f64;
        let mut acc = 0.0;
        for i in 0..cell {
            acc += 0.5 * (self.density[i] + self.density[i + 1]) * self.dx;
        }
        // Within the cell the density is linear, so the CDF piece is quadratic.
        let y0 = self.density[cell];
        let y1 = self.density[cell + 1];
        acc + self.dx * frac * (y0 + 0.5 * (y1 - y0) * frac)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_max() {
            return 0.0;
        }
        let t = (x - self.x0) / self.dx;
        let cell = (t.floor() as usize).min(self.len() - 2);
        let frac = t - cell as f64;
        self.density[cell] * (1.0 - frac) + self.density[cell + 1] * frac
    }
}

/// Posterior distribution over the target treatment effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Posterior {
    Normal { mean: f64, sd: f64 },
    Mixture(NormalMixture),
    Grid(GridDensity),
}

impl Posterior {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::domain(format!("invalid normal posterior N({mean}, {sd}^2)")));
        }
        Ok(Posterior::Normal { mean, sd })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Posterior::Normal { mean, .. } => *mean,
            Posterior::Mixture(m) => m.mean(),
            Posterior::Grid(g) => g.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Posterior::Normal { sd, .. } => sd * sd,
            Posterior::Mixture(m) => m.variance(),
            Posterior::Grid(g) => g.variance(),
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Posterior::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Posterior::Mixture(m) => m.cdf(x),
            Posterior::Grid(g) => g.cdf(x),
        }
    }

    /// Quantile of the posterior; closed form for normals, CDF inversion to
    /// absolute tolerance 1e-9 on the effect axis otherwise.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
        match self {
            Posterior::Normal { mean, sd } => Ok(mean + sd * norm_quantile(q)),
            Posterior::Mixture(m) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for c in &m.components {
                    lo = lo.min(c.mean - 12.0 * c.sd);
                    hi = hi.max(c.mean + 12.0 * c.sd);
                }
                // Widen until the bracket encloses q (weights can be tiny).
                let mut span = hi - lo;
                while m.cdf(lo) > q {
                    lo -= span;
                    span *= 2.0;
                }
                while m.cdf(hi) < q {
                    hi += span;
                    span *= 2.0;
                }
                Ok(bisect_cdf(|x| m.cdf(x), lo, hi, q))
            }
            Posterior::Grid(g) => {
                let lo = g.x0;
                let hi = g.x_max();
                Ok(bisect_cdf(|x| g.cdf(x), lo, hi, q))
            }
        }
    }

    /// 95% equal-tail credible interval.
    pub fn credible_interval_95(&self) -> Result<(f64, f64)> {
        Ok((self.quantile(0.025)?, self.quantile(0.975)?))
    }

    /// Pr(effect is outside the null space) under the rule's direction.
    pub fn prob_effective(&self, rule: &DecisionRule) -> f64 {
        let below = self.cdf(rule.theta0);
        match rule.direction {
            Direction::GreaterIsEffective => 1.0 - below,
            Direction::LessIsEffective => below,
        }
    }

    /// Success iff the posterior probability strictly exceeds rho.
    pub fn decide_success(&self, rule: &DecisionRule) -> bool {
        self.prob_effective(rule) > rule.rho
    }
}

fn bisect_cdf<F: Fn(f64) -> f64>(cdf: F, mut lo: f64, mut hi: f64, q: f64) -> f64 {
    // ~60 halvings take any practical bracket below 1e-9 absolute width.
    for _ in 0..200 {
        if hi - lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
