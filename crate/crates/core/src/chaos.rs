//! The Bülban map `y ↦ y·sqrt(a / (y − b))` and its diagnostics.
//!
//! The map is the keystream source of the image cipher. Its orbit stays in
//! the domain `y > b` for `a > 0` (the minimum of the map over `y > b` is
//! attained at `y = 2b`), but a trajectory that lands exactly on that
//! minimum is sent to `b` and the next step fails; such keys are rejected.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 500;

/// Initial state of the reference key (seven decimals, not `e`).
#[allow(clippy::approx_constant)]
pub const REFERENCE_Y0: f64 = 2.7182818;

/// Map parameters plus initial state; together they form the cipher key.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosParams {
    pub a: f64,
    pub b: f64,
    pub y0: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl ChaosParams {
    pub fn new(a: f64, b: f64, y0: f64) -> Result<Self> {
        Self::with_burn_in(a, b, y0, DEFAULT_BURN_IN)
    }

    pub fn with_burn_in(a: f64, b: f64, y0: f64, burn_in: usize) -> Result<Self> {
        let p = Self { a, b, y0, burn_in };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.y0.is_finite()) {
            return Err(Error::param("chaos parameters must be finite"));
        }
        if self.a <= 0.0 {
            return Err(Error::param(format!("a must be positive, got {}", self.a)));
        }
        if self.y0 <= self.b {
            return Err(Error::param(format!(
                "y0 = {} must exceed b = {}",
                self.y0, self.b
            )));
        }
        Ok(())
    }
}

/// One step of the map.
pub fn bulban_step(y: f64, params: &ChaosParams) -> Result<f64> {
    step_at(y, params, 0)
}

fn step_at(y: f64, p: &ChaosParams, index: usize) -> Result<f64> {
    let gap = y - p.b;
    if !(gap > 0.0) || p.a < 0.0 {
        return Err(Error::Domain { index, value: y });
    }
    let next = y * (p.a / gap).sqrt();
    if !next.is_finite() {
        return Err(Error::Domain { index, value: y });
    }
    Ok(next)
}

/// Analytic derivative `f'(y) = sqrt(a/(y−b)) · (1 − y / (2(y−b)))`.
pub fn bulban_derivative(y: f64, params: &ChaosParams) -> Result<f64> {
    let gap = y - params.b;
    if !(gap > 0.0) {
        return Err(Error::Domain { index: 0, value: y });
    }
    Ok((params.a / gap).sqrt() * (1.0 - y / (2.0 * gap)))
}

/// A running orbit of the map, positioned after the burn-in.
///
/// Counts every map evaluation (burn-in included) so callers can audit the
/// number of iterations a derivation consumed.
#[derive(Clone, Debug)]
pub struct Orbit {
    params: ChaosParams,
    y: f64,
    steps: usize,
}

impl Orbit {
    pub fn new(params: ChaosParams) -> Result<Self> {
        params.validate()?;
        let mut orbit = Self {
            params,
            y: params.y0,
            steps: 0,
        };
        for _ in 0..params.burn_in {
            orbit.advance()?;
        }
        Ok(orbit)
    }

    fn advance(&mut self) -> Result<f64> {
        self.y = step_at(self.y, &self.params, self.steps)?;
        self.steps += 1;
        Ok(self.y)
    }

    /// Next post-burn-in value.
    pub fn next_value(&mut self) -> Result<f64> {
        self.advance()
    }

    /// Values drawn after the burn-in.
    pub fn draws(&self) -> usize {
        self.steps - self.params.burn_in
    }

    pub fn current(&self) -> f64 {
        self.y
    }
}

/// A deterministic trajectory together with the parameters that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealSequence {
    pub values: Vec<f64>,
    pub params: ChaosParams,
}

/// `n` consecutive values following the burn-in.
pub fn chaotic_sequence(params: &ChaosParams, n: usize) -> Result<RealSequence> {
    if n == 0 {
        return Err(Error::param("sequence length must be at least 1"));
    }
    let mut orbit = Orbit::new(*params)?;
    let values = (0..n).map(|_| orbit.next_value()).collect::<Result<_>>()?;
    Ok(RealSequence {
        values,
        params: *params,
    })
}

/// Mean of `ln|f'(y_k)|` over `n` post-burn-in orbit points, starting
/// with the first point after the burn-in.
pub fn lyapunov_exponent(params: &ChaosParams, n: usize) -> Result<f64> {
    if n < 1000 {
        return Err(Error::param(format!(
            "Lyapunov estimate needs at least 1000 iterations, got {n}"
        )));
    }
    let mut orbit = Orbit::new(*params)?;
    let mut y = orbit.current();
    // running mean: exact on constant orbits
    let mut mean = 0.0;
    for k in 0..n {
        let v = bulban_derivative(y, params)?.abs().ln();
        mean += (v - mean) / (k + 1) as f64;
        y = orbit.next_value()?;
    }
    Ok(mean)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BifurcationColumn {
    pub a: f64,
    /// Empty when the orbit left the domain.
    pub samples: Vec<f64>,
}

/// For each `a`, iterates `settle` times from `y0` and then records `keep`
/// further iterates.
pub fn bifurcation_scan(
    a_grid: &[f64],
    b: f64,
    y0: f64,
    settle: usize,
    keep: usize,
) -> Result<Vec<BifurcationColumn>> {
    if a_grid.is_empty() {
        return Err(Error::param("bifurcation grid is empty"));
    }
    Ok(a_grid
        .iter()
        .map(|&a| {
            let samples = ChaosParams::with_burn_in(a, b, y0, settle)
                .and_then(|p| chaotic_sequence(&p, keep.max(1)))
                .map(|s| {
                    let mut v = s.values;
                    v.truncate(keep);
                    v
                })
                .unwrap_or_default();
            BifurcationColumn { a, samples }
        })
        .collect())
}

/// Lyapunov exponent for each `a` in the grid; `None` on domain exit.
pub fn lyapunov_scan(a_grid: &[f64], b: f64, y0: f64, n: usize) -> Vec<(f64, Option<f64>)> {
    a_grid
        .iter()
        .map(|&a| {
            let v = ChaosParams::new(a, b, y0).and_then(|p| lyapunov_exponent(&p, n));
            (a, v.ok())
        })
        .collect()
}
