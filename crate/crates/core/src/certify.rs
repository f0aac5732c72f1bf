//! Delay-robust state-feedback certificates: assembly and verification of
//! the block matrix inequality, gain recovery, numerical checks of the two
//! integral inequalities, Lyapunov–Krasovskii evaluation, and a best-effort
//! certificate search.
//!
//! Block indices in this module are 1-based and follow the stacked vector
//! used by the inequality: blocks 1 to 12 have the plant order `n`, block 13
//! has the row count of `E`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, quad};
use crate::plant::{DelayBounds, Gain, PlantModel};
use crate::seed;
use crate::{Error, Result};

/// Default tuning scalars `θ₁..θ₄`.
pub const DEFAULT_THETA: [f64; 4] = [0.01, 0.75, 1.2, 0.022];
pub const DEFAULT_EPS1: f64 = 0.9;
pub const DEFAULT_EPS2: f64 = 0.1;
/// Symmetry tolerance for decision matrices.
const SYM_TOL: f64 = 1e-9;

/// System data entering the inequality, of any order `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

impl LmiPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, d: DMatrix<f64>, e: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let checks = [
            (a.ncols() == n, "A square"),
            (b.nrows() == n, "B with n rows"),
            (d.nrows() == n, "D with n rows"),
            (e.ncols() == n, "E with n columns"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::DimensionMismatch {
                    expected: what.into(),
                    found: format!(
                        "A {}x{}, B {}x{}, D {}x{}, E {}x{}",
                        a.nrows(), a.ncols(), b.nrows(), b.ncols(), d.nrows(), d.ncols(), e.nrows(), e.ncols()
                    ),
                });
            }
        }
        Ok(Self { a, b, d, e })
    }

    /// One-dimensional plant `ẋ = a·x + b·u` with `D = d`, `E = e`.
    pub fn scalar(a: f64, b: f64, d: f64, e: f64) -> Self {
        let s = |v| DMatrix::from_element(1, 1, v);
        Self { a: s(a), b: s(b), d: s(d), e: s(e) }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
}

impl From<&PlantModel> for LmiPlant {
    fn from(p: &PlantModel) -> Self {
        Self {
            a: DMatrix::from_iterator(4, 4, p.a.iter().copied()),
            b: DMatrix::from_iterator(4, 1, p.b.iter().copied()),
            d: DMatrix::from_iterator(4, 4, p.d.iter().copied()),
            e: DMatrix::from_iterator(4, 4, p.e.iter().copied()),
        }
    }
}

/// A candidate feasible point with the fixed scalars it was built for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CertificateFile", into = "CertificateFile")]
pub struct Certificate {
    pub x: DMatrix<f64>,
    /// `Q̃₁..Q̃₇`.
    pub qt: Vec<DMatrix<f64>>,
    /// `Z̃₁..Z̃₄`.
    pub zt: Vec<DMatrix<f64>>,
    pub y: DMatrix<f64>,
    pub eps: f64,
    pub theta: [f64; 4],
    pub eps1: f64,
    pub eps2: f64,
    pub bounds: DelayBounds,
}

/// JSON form: matrices as lists of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    x: Vec<Vec<f64>>,
    qt: Vec<Vec<Vec<f64>>>,
    zt: Vec<Vec<Vec<f64>>>,
    y: Vec<Vec<f64>>,
    eps: f64,
    #[serde(default = "default_theta")]
    theta: [f64; 4],
    #[serde(default = "default_eps1")]
    eps1: f64,
    #[serde(default = "default_eps2")]
    eps2: f64,
    bounds: DelayBounds,
}

fn default_theta() -> [f64; 4] {
    DEFAULT_THETA
}

fn default_eps1() -> f64 {
    DEFAULT_EPS1
}

fn default_eps2() -> f64 {
    DEFAULT_EPS2
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> std::result::Result<DMatrix<f64>, String> {
    let rows = r.len();
    let cols = r.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || r.iter().any(|row| row.len() != cols) {
        return Err("matrix rows must be nonempty and of equal length".into());
    }
    Ok(DMatrix::from_row_iterator(rows, cols, r.iter().flatten().copied()))
}

impl TryFrom<CertificateFile> for Certificate {
    type Error = String;
    fn try_from(f: CertificateFile) -> std::result::Result<Self, String> {
        let cert = Certificate {
            x: from_rows(&f.x)?,
            qt: f.qt.iter().map(|m| from_rows(m)).collect::<std::result::Result<_, _>>()?,
            zt: f.zt.iter().map(|m| from_rows(m)).collect::<std::result::Result<_, _>>()?,
            y: from_rows(&f.y)?,
            eps: f.eps,
            theta: f.theta,
            eps1: f.eps1,
            eps2: f.eps2,
            bounds: f.bounds,
        };
        cert.validate().map_err(|e| e.to_string())?;
        Ok(cert)
    }
}

impl From<Certificate> for CertificateFile {
    fn from(c: Certificate) -> Self {
        Self {
            x: to_rows(&c.x),
            qt: c.qt.iter().map(to_rows).collect(),
            zt: c.zt.iter().map(to_rows).collect(),
            y: to_rows(&c.y),
            eps: c.eps,
            theta: c.theta,
            eps1: c.eps1,
            eps2: c.eps2,
            bounds: c.bounds,
        }
    }
}

impl Certificate {
    /// All decision variables zero except `ϵ`, with default scalars.
    pub fn zeros(n: usize, m: usize, eps: f64, bounds: DelayBounds) -> Self {
        Self {
            x: DMatrix::zeros(n, n),
            qt: vec![DMatrix::zeros(n, n); 7],
            zt: vec![DMatrix::zeros(n, n); 4],
            y: DMatrix::zeros(m, n),
            eps,
            theta: DEFAULT_THETA,
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
            bounds,
        }
    }

    pub fn order(&self) -> usize {
        self.x.nrows()
    }

    /// Shape, symmetry and scalar checks. Positive definiteness of `X` is
    /// checked separately by [`recover_gain`].
    pub fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 || self.qt.len() != 7 || self.zt.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: "X plus 7 Q̃ and 4 Z̃ matrices".into(),
                found: format!("n={n}, {} Q̃, {} Z̃", self.qt.len(), self.zt.len()),
            });
        }
        let named = std::iter::once(("X".to_string(), &self.x))
            .chain(self.qt.iter().enumerate().map(|(i, m)| (format!("Q̃{}", i + 1), m)))
            .chain(self.zt.iter().enumerate().map(|(i, m)| (format!("Z̃{}", i + 1), m)));
        for (name, m) in named {
            if m.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{name} {n}x{n}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("{name} has non-finite entries")));
            }
            if linalg::asymmetry(m) > SYM_TOL {
                return Err(Error::param(format!("{name} is not symmetric")));
            }
        }
        if self.y.ncols() != n || self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch {
                expected: format!("finite Y with {n} columns"),
                found: format!("{}x{}", self.y.nrows(), self.y.ncols()),
            });
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param("ϵ must be positive"));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) || self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("ε₁, ε₂ must be positive and θ finite"));
        }
        self.bounds.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub label: &'static str,
}

/// The assembled symmetric matrix with its nonzero upper-triangle blocks.
#[derive(Clone, Debug)]
pub struct AssembledLmi {
    pub phi: DMatrix<f64>,
    /// Sizes of blocks 1..13.
    pub block_sizes: Vec<usize>,
    pub blocks: Vec<BlockEntry>,
}

impl AssembledLmi {
    pub fn offset(&self, block: usize) -> usize {
        self.block_sizes[..block - 1].iter().sum()
    }

    /// Copy of block `(i, j)`, 1-based.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.phi
            .view((self.offset(i), self.offset(j)), (self.block_sizes[i - 1], self.block_sizes[j - 1]))
            .into_owned()
    }
}

/// Builds the 13×13 block matrix exactly as stated, with `Eᵀ` in block
/// `(1, 13)` and `−ϵI` in `(13, 13)`, then mirrors the upper triangle.
pub fn assemble_theorem1(cert: &Certificate, plant: &LmiPlant) -> Result<AssembledLmi> {
    cert.validate()?;
    let n = cert.order();
    if plant.order() != n || plant.inputs() != cert.y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("plant of order {n} with {} inputs", cert.y.nrows()),
            found: format!("order {} with {} inputs", plant.order(), plant.inputs()),
        });
    }
    let q = plant.e.nrows();
    let mut sizes = vec![n; 12];
    sizes.push(q);
    let total: usize = sizes.iter().sum();
    let mut phi = DMatrix::zeros(total, total);
    let mut blocks = Vec::new();
    let off = |b: usize| (b - 1) * n;

    let DelayBounds { tau_bar, lambda_lower: ll, .. } = cert.bounds;
    let (l1, l2, l3) = (cert.bounds.lambda1(), cert.bounds.lambda2(), cert.bounds.lambda3());
    let [t1, t2, t3, t4] = cert.theta;
    let (x, y, eps) = (&cert.x, &cert.y, cert.eps);
    let qt = |i: usize| &cert.qt[i - 1];
    let zt = |i: usize| &cert.zt[i - 1];
    let ddt = &plant.d * plant.d.transpose();
    let xat = x * plant.a.transpose();
    let by = &plant.b * y;
    let ybt = by.transpose();

    let mut put = |i: usize, j: usize, m: DMatrix<f64>, label: &'static str| {
        let (r0, c0) = (off(i), off(j));
        phi.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(&m);
        blocks.push(BlockEntry { row: i, col: j, label });
    };

    let sum_q = cert.qt.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m);
    put(1, 1, &plant.a * x + &xat + sum_q - zt(1) - zt(3) + &ddt * eps, "AX+XAᵀ+ΣQ̃-Z̃1-Z̃3+ϵDDᵀ");
    put(1, 2, zt(1).clone(), "Z̃1");
    put(1, 5, zt(3).clone(), "Z̃3");
    put(1, 7, by.clone(), "BY");
    put(2, 2, -qt(1) - zt(1) - zt(2) - zt(4), "-Q̃1-Z̃1-Z̃2-Z̃4");
    put(2, 3, zt(2).clone(), "Z̃2");
    put(2, 7, zt(4).clone(), "Z̃4");
    put(3, 3, -qt(2) * (1.0 - cert.eps1) - zt(2) * 2.0, "-(1-ε1)Q̃2-2Z̃2");
    put(3, 4, zt(2).clone(), "Z̃2");
    put(4, 4, -qt(3) - zt(2), "-Q̃3-Z̃2");
    put(5, 5, -qt(4) * (1.0 - cert.eps2) - zt(3) * 2.0, "-(1-ε2)Q̃4-2Z̃3");
    put(5, 6, zt(3).clone(), "Z̃3");
    put(6, 6, -qt(5) - zt(3), "-Q̃5-Z̃3");
    put(7, 7, -zt(4) * 2.0, "-2Z̃4");
    put(7, 8, zt(4).clone(), "Z̃4");
    put(8, 8, -qt(7) - zt(4), "-Q̃7-Z̃4");

    let row1 = [(9, ll, "λ̲(XAᵀ+ϵDDᵀ)"), (10, l2, "λ2(XAᵀ+ϵDDᵀ)"), (11, tau_bar, "τ̄(XAᵀ+ϵDDᵀ)"), (12, l3, "λ3(XAᵀ+ϵDDᵀ)")];
    for (j, c, label) in row1 {
        put(1, j, (&xat + &ddt * eps) * c, label);
    }
    let row7 = [(9, ll, "λ̲YᵀBᵀ"), (10, l2, "λ2YᵀBᵀ"), (11, tau_bar, "τ̄YᵀBᵀ"), (12, l1, "λ1YᵀBᵀ")];
    for (j, c, label) in row7 {
        put(7, j, &ybt * c, label);
    }

    let diag = [(9, t1, 1, l1), (10, t2, 2, l2), (11, t3, 3, tau_bar), (12, t4, 4, l3)];
    for (i, t, z, c) in diag {
        put(i, i, x * (-2.0 * t) + zt(z) * (t * t) + &ddt * (eps * c * c), "-2θX+θ²Z̃+ϵc²DDᵀ");
    }
    let scales = [ll, l2, tau_bar, l3];
    for i in 0..4 {
        for j in i + 1..4 {
            put(9 + i, 9 + j, &ddt * (eps * scales[i] * scales[j]), "ϵcᵢcⱼDDᵀ");
        }
    }
    put(1, 13, plant.e.transpose(), "Eᵀ");
    put(13, 13, DMatrix::identity(q, q) * -eps, "-ϵI");

    for i in 0..total {
        for j in 0..i {
            phi[(i, j)] = phi[(j, i)];
        }
    }
    Ok(AssembledLmi { phi, block_sizes: sizes, blocks })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Definiteness {
    pub negative_definite: bool,
    pub max_eigenvalue: f64,
}

pub const DEFAULT_TOL: f64 = 1e-9;

/// Negative definite iff the largest eigenvalue of the symmetric part is
/// below `−tol`.
pub fn is_negative_definite(m: &DMatrix<f64>, tol: f64) -> Result<Definiteness> {
    let max = linalg::max_eigenvalue(&linalg::symmetrize(m))?;
    Ok(Definiteness { negative_definite: max < -tol, max_eigenvalue: max })
}

/// `K = Y·X⁻¹`; requires `X` symmetric positive definite.
pub fn recover_gain_matrix(cert: &Certificate) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(&cert.x)).ok_or(Error::Singular)?;
    // K X = Y  ⇔  X Kᵀ = Yᵀ
    let kt = chol.solve(&cert.y.transpose());
    if kt.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(kt.transpose())
}

/// Single-input gain for the 4-state plant.
pub fn recover_gain(cert: &Certificate) -> Result<Gain> {
    let k = recover_gain_matrix(cert)?;
    if k.shape() != (1, 4) {
        return Err(Error::DimensionMismatch {
            expected: "1x4 gain".into(),
            found: format!("{}x{}", k.nrows(), k.ncols()),
        });
    }
    Ok(Gain([k[0], k[1], k[2], k[3]]))
}

#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    pub negative_definite: bool,
    pub max_eigenvalue: f64,
    pub x_min_eigenvalue: f64,
    pub gain: Option<Vec<f64>>,
}

pub fn verify(cert: &Certificate, plant: &LmiPlant, tol: f64) -> Result<Verification> {
    let lmi = assemble_theorem1(cert, plant)?;
    let d = is_negative_definite(&lmi.phi, tol)?;
    let x_min = linalg::min_eigenvalue(&linalg::symmetrize(&cert.x))?;
    let gain = recover_gain_matrix(cert).ok().map(|k| k.iter().copied().collect());
    Ok(Verification {
        negative_definite: d.negative_definite && x_min > 0.0,
        max_eigenvalue: d.max_eigenvalue,
        x_min_eigenvalue: x_min,
        gain,
    })
}

/// Outcome of an integral-inequality check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    /// Right-hand side minus left-hand side; the inequality asserts ≥ 0.
    pub residual: f64,
    /// Magnitude of the terms involved, for relative tolerances.
    pub scale: f64,
}

impl Residual {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.residual >= -rel_tol * self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Trapezoid integral of samples `f` spaced `dt`, restricted to
/// `[lo, hi]` measured in sample units from the first sample. Partial end
/// cells use the linear interpolant, so the rule integrates piecewise-linear
/// data exactly.
fn trapezoid_window<T>(f: &[T], dt: f64, lo: f64, hi: f64, zero: T) -> T
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let interp = |s: f64| -> T {
        let i = (s.floor() as usize).min(f.len() - 2);
        let w = s - i as f64;
        f[i].clone() * (1.0 - w) + f[i + 1].clone() * w
    };
    let mut acc = zero;
    let mut a = lo;
    while a < hi - 1e-12 {
        let b = (a.floor() + 1.0).min(hi);
        acc = acc + (interp(a) + interp(b)) * (0.5 * (b - a) * dt);
        a = b;
    }
    acc
}

fn check_samples(xdot: &[DVector<f64>], r: &DMatrix<f64>) -> Result<usize> {
    let n = r.nrows();
    if xdot.len() < 2 || !r.is_square() || xdot.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: format!("at least two samples of length {n}"),
            found: format!("{} samples", xdot.len()),
        });
    }
    Ok(n)
}

/// `−γ∫ẋᵀRẋ ≤ −(x(t)−x(t−γ))ᵀR(x(t)−x(t−γ))` on samples of `ẋ` covering
/// `[t−γ, t]` uniformly. The increment `x(t) − x(t−γ)` is the trapezoid
/// integral of the samples.
pub fn check_lemma1(xdot: &[DVector<f64>], r: &DMatrix<f64>, gamma: f64) -> Result<Residual> {
    let n = check_samples(xdot, r)?;
    if !(gamma > 0.0) {
        return Err(Error::param("γ must be positive"));
    }
    let cells = (xdot.len() - 1) as f64;
    let dt = gamma / cells;
    let energy: Vec<f64> = xdot.iter().map(|v| quad(r, v)).collect();
    let integral = trapezoid_window(&energy, dt, 0.0, cells, 0.0);
    let dx = trapezoid_window(xdot, dt, 0.0, cells, DVector::zeros(n));
    let lhs = -gamma * integral;
    let h = DVector::from_iterator(2 * n, dx.iter().copied().chain(std::iter::repeat_n(0.0, n)));
    // [x(t); x(t−γ)] with x(t−γ) = 0 without loss of generality
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    omega.view_mut((0, 0), (n, n)).copy_from(&(-r));
    omega.view_mut((0, n), (n, n)).copy_from(r);
    omega.view_mut((n, 0), (n, n)).copy_from(r);
    omega.view_mut((n, n), (n, n)).copy_from(&(-r));
    let rhs = quad(&omega, &h);
    Ok(Residual { residual: rhs - lhs, scale: lhs.abs() + rhs.abs() })
}

/// `−(d₂−d₁)∫_{t−d₂}^{t−d₁}ẋᵀRẋ ≤ HᵀΩH` with
/// `H = (x(t−d₁), x(t−d(t)), x(t−d₂))` on samples of `ẋ` covering
/// `[t−d₂, t−d₁]` uniformly. `H` is reconstructed by trapezoid integration
/// from `x(t−d₂) = 0`; `HᵀΩH` depends only on differences.
pub fn check_lemma2(xdot: &[DVector<f64>], r: &DMatrix<f64>, d1: f64, d2: f64, d_t: f64) -> Result<Residual> {
    let n = check_samples(xdot, r)?;
    if !(0.0 < d1 && d1 < d2 && (d1..=d2).contains(&d_t)) {
        return Err(Error::param(format!("need 0 < d1 ≤ d(t) ≤ d2 with d1 < d2, got {d1}, {d_t}, {d2}")));
    }
    let cells = (xdot.len() - 1) as f64;
    let dt = (d2 - d1) / cells;
    // sample 0 sits at t−d₂, sample `cells` at t−d₁
    let split = (d2 - d_t) / dt;
    let energy: Vec<f64> = xdot.iter().map(|v| quad(r, v)).collect();
    let integral = trapezoid_window(&energy, dt, 0.0, cells, 0.0);
    let x2 = DVector::zeros(n);
    let xd = trapezoid_window(xdot, dt, 0.0, split, DVector::zeros(n));
    let x1 = &xd + trapezoid_window(xdot, dt, split, cells, DVector::zeros(n));
    let mut h = DVector::zeros(3 * n);
    h.rows_mut(0, n).copy_from(&x1);
    h.rows_mut(n, n).copy_from(&xd);
    h.rows_mut(2 * n, n).copy_from(&x2);
    let mut omega = DMatrix::zeros(3 * n, 3 * n);
    for (i, j, s) in [(0, 0, -1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, -1.0)] {
        omega.view_mut((i * n, j * n), (n, n)).copy_from(&(r * s));
    }
    let lhs = -(d2 - d1) * integral;
    let rhs = quad(&omega, &h);
    Ok(Residual { residual: rhs - lhs, scale: lhs.abs() + rhs.abs() })
}

/// Matrices of the Lyapunov–Krasovskii functional.
#[derive(Clone, Debug, PartialEq)]
pub struct LkfMatrices {
    pub p: DMatrix<f64>,
    /// `Q₁..Q₇`.
    pub q: Vec<DMatrix<f64>>,
    /// `Z₁..Z₄`.
    pub z: Vec<DMatrix<f64>>,
}

impl LkfMatrices {
    /// `P = X⁻¹`, `Qᵢ = X⁻¹Q̃ᵢX⁻¹`, `Zᵢ = X⁻¹Z̃ᵢX⁻¹`.
    pub fn from_certificate(cert: &Certificate) -> Result<Self> {
        let p = cert.x.clone().try_inverse().ok_or(Error::Singular)?;
        let congr = |m: &DMatrix<f64>| linalg::symmetrize(&(&p * m * &p));
        Ok(Self {
            q: cert.qt.iter().map(congr).collect(),
            z: cert.zt.iter().map(congr).collect(),
            p: linalg::symmetrize(&p),
        })
    }
}

/// A state history on a uniform grid.
#[derive(Clone, Debug)]
pub struct SampledPath {
    pub t0: f64,
    pub dt: f64,
    pub x: Vec<DVector<f64>>,
    pub xdot: Vec<DVector<f64>>,
}

/// Delay values at the evaluation instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelaysAt {
    pub lambda: f64,
    pub tau: f64,
}

/// `V(t) = V₁ + … + V₇` at grid index `k`:
///
/// * `V₁ = xᵀPx`
/// * `V₂ = ∫_{t−λ̲} xᵀQ₁x + ∫_{t−λ(t)} xᵀQ₂x + ∫_{t−λ̄} xᵀQ₃x`
/// * `V₃ = λ̲∫_{−λ̲}^0∫_{t+s}^t ẋᵀZ₁ẋ + λ₁∫_{−λ̄}^{−λ̲}∫_{t+s}^t ẋᵀZ₂ẋ`
/// * `V₄ = ∫_{t−τ(t)} xᵀQ₄x + ∫_{t−τ̄} xᵀQ₅x`
/// * `V₅ = τ̄∫_{−τ̄}^0∫_{t+s}^t ẋᵀZ₃ẋ`
/// * `V₆ = ∫_{t−λ(t)−τ(t)} xᵀQ₆x + ∫_{t−λ₂} xᵀQ₇x`
/// * `V₇ = λ₃∫_{−λ₂}^{−λ̲}∫_{t+s}^t ẋᵀZ₄ẋ`
pub fn evaluate_lkf(m: &LkfMatrices, path: &SampledPath, k: usize, at: DelaysAt, bounds: &DelayBounds) -> Result<f64> {
    if m.q.len() != 7 || m.z.len() != 4 || path.x.len() != path.xdot.len() || k >= path.x.len() {
        return Err(Error::param("LKF needs 7 Q, 4 Z and a path covering index k"));
    }
    let (ll, lu, tb) = (bounds.lambda_lower, bounds.lambda_upper, bounds.tau_bar);
    let (l1, l2, l3) = (bounds.lambda1(), bounds.lambda2(), bounds.lambda3());
    let reach = [ll, at.lambda, lu, at.tau, tb, at.lambda + at.tau, l2, l1]
        .into_iter()
        .fold(0.0, f64::max);
    let t_cells = k as f64;
    if reach / path.dt > t_cells + 1e-9 {
        return Err(Error::param(format!(
            "path covers {:.6} s before the evaluation instant, {reach:.6} s needed",
            t_cells * path.dt
        )));
    }
    let dt = path.dt;
    let xs = &path.x[..=k];
    let xds = &path.xdot[..=k];
    let single = |q: &DMatrix<f64>, window: f64| -> f64 {
        let f: Vec<f64> = xs.iter().map(|v| quad(q, v)).collect();
        trapezoid_window(&f, dt, t_cells - window / dt, t_cells, 0.0)
    };
    // c·∫_{−b}^{−a}∫_{t+s}^{t} ẋᵀZẋ = c·∫ w(σ) ẋᵀZẋ(σ) dσ with w the measure
    // of {s ∈ [−b, −a] : t + s ≤ σ}
    let double = |z: &DMatrix<f64>, a: f64, b: f64, c: f64| -> f64 {
        let (lo, hi, sign) = if b >= a { (a, b, 1.0) } else { (b, a, -1.0) };
        let f: Vec<f64> = xds
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let back = (k - i) as f64 * dt;
                let w = ((-lo).min(-back) + hi).max(0.0);
                w * quad(z, v)
            })
            .collect();
        sign * c * trapezoid_window(&f, dt, t_cells - hi / dt, t_cells, 0.0)
    };
    let v1 = quad(&m.p, &xs[k]);
    let v2 = single(&m.q[0], ll) + single(&m.q[1], at.lambda) + single(&m.q[2], lu);
    let v3 = double(&m.z[0], 0.0, ll, ll) + double(&m.z[1], ll, lu, l1);
    let v4 = single(&m.q[3], at.tau) + single(&m.q[4], tb);
    let v5 = double(&m.z[2], 0.0, tb, tb);
    let v6 = single(&m.q[5], at.lambda + at.tau) + single(&m.q[6], l2);
    let v7 = double(&m.z[3], ll, l2, l3);
    Ok(v1 + v2 + v3 + v4 + v5 + v6 + v7)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Newton-step budget across all starts.
    pub iters: usize,
    pub starts: usize,
    /// Success needs `λ_max(Φ) < −tol·max(1, max|zᵢ|)` over the decision
    /// entries `zᵢ`, so near-zero points of a homogeneous problem do not count.
    pub tol: f64,
    /// Box bound on every decision entry.
    pub bound: f64,
    /// Search on `A + σI` to favour gains with decay rate about `σ`; the
    /// returned certificate is always verified against the unshifted plant.
    pub decay: f64,
    pub theta: [f64; 4],
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            iters: 400,
            starts: 3,
            tol: DEFAULT_TOL,
            bound: 1e4,
            decay: 0.5,
            theta: DEFAULT_THETA,
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
        }
    }
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum SearchOutcome {
    Found { cert: Certificate, max_eigenvalue: f64, iterations: usize },
    NotFound { best_max_eigenvalue: f64, iterations: usize },
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            SearchOutcome::Found { cert, .. } => Some(cert),
            SearchOutcome::NotFound { .. } => None,
        }
    }
}

/// Layout of the decision vector: upper triangles of `X`, `Q̃₁..₇`,
/// `Z̃₁..₄`, then `Y` row-major, then `ϵ`.
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn tri(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn len(&self) -> usize {
        12 * self.tri() + self.m * self.n + 1
    }

    fn sym(&self, z: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        let mut it = z.iter();
        for i in 0..self.n {
            for j in i..self.n {
                let v = *it.next().expect("layout length");
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    fn write_sym(&self, m: &DMatrix<f64>, z: &mut [f64]) {
        let mut k = 0;
        for i in 0..self.n {
            for j in i..self.n {
                z[k] = m[(i, j)];
                k += 1;
            }
        }
    }

    /// Unit symmetric matrices for the entries of matrix block `b`.
    fn sym_basis(&self, b: usize) -> Vec<(usize, DMatrix<f64>)> {
        let mut out = Vec::with_capacity(self.tri());
        let mut k = b * self.tri();
        for i in 0..self.n {
            for j in i..self.n {
                let mut e = DMatrix::zeros(self.n, self.n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                out.push((k, e));
                k += 1;
            }
        }
        out
    }

    fn decode(&self, z: &[f64], opts: &SearchOptions, bounds: DelayBounds) -> Certificate {
        let t = self.tri();
        let mat = |b: usize| self.sym(&z[b * t..(b + 1) * t]);
        let y0 = 12 * t;
        Certificate {
            x: mat(0),
            qt: (1..8).map(mat).collect(),
            zt: (8..12).map(mat).collect(),
            y: DMatrix::from_row_slice(self.m, self.n, &z[y0..y0 + self.m * self.n]),
            eps: z[self.len() - 1],
            theta: opts.theta,
            eps1: opts.eps1,
            eps2: opts.eps2,
            bounds,
        }
    }
}

/// `F₀ + Σ vᵢ·Fᵢ` over the nonzero terms, constrained to be positive
/// definite.
struct AffineSym {
    f0: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineSym {
    fn eval(&self, v: &[f64]) -> DMatrix<f64> {
        self.terms.iter().fold(self.f0.clone(), |acc, (i, f)| acc + f * v[*i])
    }

    /// `−log det` with its gradient and Hessian accumulated into `g`, `h`;
    /// `None` outside the cone.
    fn barrier(&self, v: &[f64], g: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>) -> Option<f64> {
        let chol = nalgebra::Cholesky::new(self.eval(v))?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if let Some((g, h)) = g {
            let inv = chol.inverse();
            let w: Vec<DMatrix<f64>> = self.terms.iter().map(|(_, f)| &inv * f).collect();
            let wt: Vec<DMatrix<f64>> = w.iter().map(|m| m.transpose()).collect();
            for (a, (i, _)) in self.terms.iter().enumerate() {
                g[*i] -= w[a].trace();
                for (b, (j, _)) in self.terms.iter().enumerate().skip(a) {
                    let v = w[a].dot(&wt[b]);
                    h[(*i, *j)] += v;
                    if a != b {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        Some(-logdet)
    }
}

/// Barrier objective `s·t − Σ log det Gₖ(v)`; `None` when infeasible.
fn barrier_objective(cons: &[AffineSym], v: &[f64], s: f64, t_idx: usize) -> Option<f64> {
    cons.iter().try_fold(s * v[t_idx], |acc, c| c.barrier(v, None).map(|b| acc + b))
}

/// Multi-start log-barrier descent on `t` subject to `Φ(z) ≺ t·I`,
/// `X ≻ 10⁻⁶·I`, `Q̃ᵢ, Z̃ᵢ ≻ 0`, `ϵ > 0` and a box on every entry. Each
/// start draws a random `Y` and `ϵ`; each iteration is one damped Newton
/// step, and the barrier weight grows tenfold when a step no longer
/// improves the centering. The first point whose verified `λ_max(Φ)` clears
/// the relative margin is returned.
pub fn certificate_search(plant: &LmiPlant, bounds: DelayBounds, seed: u64, opts: &SearchOptions) -> Result<SearchOutcome> {
    bounds.validate()?;
    if opts.starts == 0 || !(opts.bound >= 1.0) || !(opts.tol > 0.0) || !(opts.decay >= 0.0) {
        return Err(Error::param("search needs at least one start, bound ≥ 1, tol > 0 and decay ≥ 0"));
    }
    let shifted = LmiPlant {
        a: &plant.a + DMatrix::identity(plant.order(), plant.order()) * opts.decay,
        ..plant.clone()
    };
    let layout = Layout { n: plant.order(), m: plant.inputs() };
    let dim = layout.len();
    let t_idx = dim;
    let assemble = |z: &[f64]| -> Result<DMatrix<f64>> {
        // Φ is affine in ϵ; evaluate at ϵ = 1, 2 and extrapolate so that the
        // validated domain ϵ > 0 is never left
        let mut cert = layout.decode(z, opts, bounds);
        let eps = cert.eps;
        cert.eps = 1.0;
        let phi1 = assemble_theorem1(&cert, &shifted)?.phi;
        cert.eps = 2.0;
        let phi2 = assemble_theorem1(&cert, &shifted)?.phi;
        Ok(&phi1 + (&phi2 - &phi1) * (eps - 1.0))
    };
    let zero = vec![0.0; dim];
    let phi0 = assemble(&zero)?;
    let size = phi0.nrows();
    let mut main = AffineSym { f0: -&phi0, terms: Vec::new() };
    for i in 0..dim {
        let mut e = zero.clone();
        e[i] = 1.0;
        let fi = assemble(&e)? - &phi0;
        if fi.amax() > 0.0 {
            main.terms.push((i, -fi));
        }
    }
    main.terms.push((t_idx, DMatrix::identity(size, size)));

    let n = layout.n;
    let mut cons = vec![main];
    for b in 0..12 {
        let floor = if b == 0 { 1e-6 } else { 0.0 };
        cons.push(AffineSym { f0: DMatrix::identity(n, n) * -floor, terms: layout.sym_basis(b) });
    }
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    cons.push(AffineSym { f0: one(0.0), terms: vec![(dim - 1, one(1.0))] });
    for j in 0..dim {
        cons.push(AffineSym { f0: one(opts.bound), terms: vec![(j, one(-1.0))] });
        cons.push(AffineSym { f0: one(opts.bound), terms: vec![(j, one(1.0))] });
    }

    let lmax_of = |z: &[f64]| -> Result<f64> { linalg::max_eigenvalue(&linalg::symmetrize(&assemble(z)?)) };
    let mut rng = seed::rng(seed::derive(seed, "certificate_search", 0));
    let mut best = f64::INFINITY;
    let mut steps = 0;
    'starts: for _ in 0..opts.starts {
        let mut v = vec![0.0; dim + 1];
        let t = layout.tri();
        let ident = DMatrix::<f64>::identity(n, n);
        layout.write_sym(&ident, &mut v[..t]);
        for b in 1..12 {
            layout.write_sym(&(&ident * 0.1), &mut v[b * t..(b + 1) * t]);
        }
        for x in &mut v[12 * t..dim - 1] {
            let r: f64 = StandardNormal.sample(&mut rng);
            *x = 0.1 * r;
        }
        v[dim - 1] = rng.random_range(0.1..1.0);
        v[t_idx] = lmax_of(&v[..dim])? + 1.0;
        let mut s = 1.0;
        while steps < opts.iters {
            steps += 1;
            let mut g = DVector::zeros(dim + 1);
            let mut h = DMatrix::zeros(dim + 1, dim + 1);
            g[t_idx] = s;
            for c in &cons {
                if c.barrier(&v, Some((&mut g, &mut h))).is_none() {
                    continue 'starts;
                }
            }
            let scale = h.diagonal().amax().max(1.0);
            let mut reg = 1e-12 * scale;
            let delta = loop {
                let mut hr = h.clone();
                for i in 0..=dim {
                    hr[(i, i)] += reg;
                }
                if let Some(ch) = nalgebra::Cholesky::new(hr) {
                    break -ch.solve(&g);
                }
                reg *= 100.0;
                if reg > scale {
                    continue 'starts;
                }
            };
            let decrement = -g.dot(&delta);
            let f0 = barrier_objective(&cons, &v, s, t_idx).expect("current point is interior");
            let mut alpha = 1.0;
            let moved = loop {
                let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(f) = barrier_objective(&cons, &trial, s, t_idx) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        v = trial;
                        break true;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    break false;
                }
            };
            let z = &v[..dim];
            let lmax = lmax_of(z)?;
            best = best.min(lmax);
            let margin = opts.tol * z.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if lmax < -margin {
                let cert = layout.decode(z, opts, bounds);
                let v = verify(&cert, plant, margin)?;
                if v.negative_definite {
                    return Ok(SearchOutcome::Found { cert, max_eigenvalue: v.max_eigenvalue, iterations: steps });
                }
            }
            if !moved || decrement / 2.0 < 1e-6 {
                s *= 10.0;
                if s > 1e14 {
                    continue 'starts;
                }
            }
        }
        break;
    }
    Ok(SearchOutcome::NotFound { best_max_eigenvalue: best, iterations: steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_cert(vals: &[f64]) -> Certificate {
        Certificate {
            x: s(vals[0]),
            qt: (1..8).map(|i| s(vals[i])).collect(),
            zt: (8..12).map(|i| s(vals[i])).collect(),
            y: s(vals[12]),
            eps: vals[13],
            theta: DEFAULT_THETA,
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
            bounds: DelayBounds::default(),
        }
    }

    /// Entry-by-entry 13×13 assembly for a scalar plant.
    fn hand_scalar(c: &Certificate, p: &LmiPlant) -> DMatrix<f64> {
        let (a, b, d, e) = (p.a[0], p.b[0], p.d[0], p.e[0]);
        let x = c.x[0];
        let q: Vec<f64> = c.qt.iter().map(|m| m[0]).collect();
        let z: Vec<f64> = c.zt.iter().map(|m| m[0]).collect();
        let (y, ep) = (c.y[0], c.eps);
        let bd = c.bounds;
        let (ll, tb) = (bd.lambda_lower, bd.tau_bar);
        let (l1, l2, l3) = (bd.lambda1(), bd.lambda2(), bd.lambda3());
        let [t1, t2, t3, t4] = c.theta;
        let dd = d * d;
        let mut m = DMatrix::zeros(13, 13);
        let mut set = |i: usize, j: usize, v: f64| {
            m[(i - 1, j - 1)] = v;
            m[(j - 1, i - 1)] = v;
        };
        set(1, 1, 2.0 * a * x + q.iter().sum::<f64>() - z[0] - z[2] + ep * dd);
        set(1, 2, z[0]);
        set(1, 5, z[2]);
        set(1, 7, b * y);
        set(2, 2, -q[0] - z[0] - z[1] - z[3]);
        set(2, 3, z[1]);
        set(2, 7, z[3]);
        set(3, 3, -(1.0 - c.eps1) * q[1] - 2.0 * z[1]);
        set(3, 4, z[1]);
        set(4, 4, -q[2] - z[1]);
        set(5, 5, -(1.0 - c.eps2) * q[3] - 2.0 * z[2]);
        set(5, 6, z[2]);
        set(6, 6, -q[4] - z[2]);
        set(7, 7, -2.0 * z[3]);
        set(7, 8, z[3]);
        set(8, 8, -q[6] - z[3]);
        set(1, 9, ll * x * a + ep * ll * dd);
        set(1, 10, l2 * x * a + ep * l2 * dd);
        set(1, 11, tb * x * a + ep * tb * dd);
        set(1, 12, l3 * x * a + ep * l3 * dd);
        set(7, 9, ll * y * b);
        set(7, 10, l2 * y * b);
        set(7, 11, tb * y * b);
        set(7, 12, l1 * y * b);
        set(9, 9, -2.0 * t1 * x + t1 * t1 * z[0] + ep * l1 * l1 * dd);
        set(9, 10, ep * ll * l2 * dd);
        set(9, 11, ep * ll * tb * dd);
        set(9, 12, ep * ll * l3 * dd);
        set(10, 10, -2.0 * t2 * x + t2 * t2 * z[1] + ep * l2 * l2 * dd);
        set(10, 11, ep * l2 * tb * dd);
        set(10, 12, ep * l2 * l3 * dd);
        set(11, 11, -2.0 * t3 * x + t3 * t3 * z[2] + ep * tb * tb * dd);
        set(11, 12, ep * tb * l3 * dd);
        set(12, 12, -2.0 * t4 * x + t4 * t4 * z[3] + ep * l3 * l3 * dd);
        set(1, 13, e);
        set(13, 13, -ep);
        m
    }

    #[test]
    fn zero_skeleton() {
        let p = LmiPlant::scalar(1.0, 1.0, 1.0, 0.5);
        let c = Certificate::zeros(1, 1, 1.0, DelayBounds::default());
        let lmi = assemble_theorem1(&c, &p).unwrap();
        assert_eq!(lmi.phi[(12, 12)], -1.0);
        assert_eq!(lmi.phi[(0, 12)], 0.5);
        assert_eq!(lmi.phi[(0, 0)], 1.0);
        // only ϵDDᵀ patterns in rows/columns 1, 9..12
        for i in 1..8 {
            assert!(lmi.phi.row(i).iter().all(|&v| v == 0.0));
        }
        assert_eq!(lmi.phi, lmi.phi.transpose());
    }

    #[test]
    fn scalar_matches_hand_assembly() {
        let p = LmiPlant::scalar(1.0, 1.0, 1.0, 0.7);
        let mut rng = seed::rng(5);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..14).map(|i| if i == 13 { rng.random_range(0.1..2.0) } else { rng.random_range(-2.0..2.0) }).collect();
            let c = scalar_cert(&vals);
            let lmi = assemble_theorem1(&c, &p).unwrap();
            let hand = hand_scalar(&c, &p);
            assert!((&lmi.phi - &hand).amax() <= 1e-12, "{}", &lmi.phi - &hand);
        }
    }

    #[test]
    fn four_state_blocks_and_symmetry() {
        let plant = LmiPlant::from(&crate::plant::default_plant());
        let mut c = Certificate::zeros(4, 1, 0.5, DelayBounds::default());
        c.x = DMatrix::identity(4, 4) * 2.0;
        c.zt[3] = DMatrix::identity(4, 4) * 0.3;
        c.y = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let lmi = assemble_theorem1(&c, &plant).unwrap();
        assert_eq!(lmi.phi.shape(), (52, 52));
        assert_eq!(lmi.phi, lmi.phi.transpose());
        assert_eq!(lmi.block(1, 7), &plant.b * &c.y);
        assert_eq!(lmi.block(7, 8), c.zt[3]);
        assert_eq!(lmi.block(13, 1), plant.e.clone());
        let mut bad = c.clone();
        bad.qt[2][(0, 1)] = 1.0;
        assert!(assemble_theorem1(&bad, &plant).is_err());
        assert!(assemble_theorem1(&c, &LmiPlant::scalar(1.0, 1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn definiteness_examples() {
        assert!(is_negative_definite(&-DMatrix::<f64>::identity(3, 3), DEFAULT_TOL).unwrap().negative_definite);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1e-6]));
        assert!(!is_negative_definite(&m, DEFAULT_TOL).unwrap().negative_definite);
        // 2×2 oracle: negative definite iff trace < 0 and det > 0
        let mut rng = seed::rng(11);
        for _ in 0..500 {
            let (a, b, c): (f64, f64, f64) = (rng.random_range(-3.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(-3.0..1.0));
            let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
            let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
            let lmax = (a + c + disc) / 2.0;
            if lmax.abs() < 1e-6 {
                continue;
            }
            let want = lmax < -DEFAULT_TOL;
            assert_eq!(is_negative_definite(&m, DEFAULT_TOL).unwrap().negative_definite, want);
        }
    }

    #[test]
    fn gain_recovery() {
        let mut c = Certificate::zeros(4, 1, 1.0, DelayBounds::default());
        c.x = DMatrix::identity(4, 4);
        c.y = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(recover_gain(&c).unwrap(), Gain([1.0, 2.0, 3.0, 4.0]));
        c.x *= 2.0;
        let k = recover_gain(&c).unwrap();
        assert!(k.0.iter().zip([0.5, 1.0, 1.5, 2.0]).all(|(a, b)| (a - b).abs() < 1e-15));
        let mut rng = seed::rng(2);
        for _ in 0..100 {
            let g = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            c.x = &g * g.transpose() + DMatrix::identity(4, 4) * 0.1;
            c.y = DMatrix::from_fn(1, 4, |_, _| rng.random_range(-5.0..5.0));
            let k = recover_gain_matrix(&c).unwrap();
            let res = (&k * &c.x - &c.y).norm() / c.y.norm().max(1.0);
            assert!(res <= 1e-10, "{res}");
        }
        c.x = DMatrix::zeros(4, 4);
        assert!(matches!(recover_gain(&c), Err(Error::Singular)));
    }

    #[test]
    fn json_round_trip() {
        let mut c = Certificate::zeros(2, 1, 0.3, DelayBounds::default());
        c.x = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Certificate>(&json).unwrap(), c);
        let broken = json.replace("\"eps\":0.3", "\"eps\":-1.0");
        assert!(serde_json::from_str::<Certificate>(&broken).is_err());
    }

    fn const_samples(v: &[f64], n: usize) -> Vec<DVector<f64>> {
        vec![DVector::from_column_slice(v); n]
    }

    #[test]
    fn lemma_trivial_cases() {
        let r = DMatrix::identity(2, 2);
        let z = check_lemma1(&const_samples(&[0.0, 0.0], 11), &r, 1.0).unwrap();
        assert_eq!(z.residual, 0.0);
        let c = check_lemma1(&const_samples(&[1.5, -0.3], 101), &r, 0.7).unwrap();
        assert!(c.residual.abs() <= 1e-12 * c.scale, "{c:?}");
        let c = check_lemma2(&const_samples(&[1.5, -0.3], 101), &r, 0.1, 0.4, 0.1).unwrap();
        assert!(c.residual.abs() <= 1e-12 * c.scale, "{c:?}");
        let z = check_lemma2(&const_samples(&[0.0, 0.0], 11), &r, 0.1, 0.4, 0.1).unwrap();
        assert_eq!(z.residual, 0.0);
        assert!(check_lemma2(&const_samples(&[1.0, 1.0], 11), &r, 0.1, 0.4, 0.5).is_err());
    }

    #[test]
    fn lkf_trivial_cases() {
        let bounds = DelayBounds::default();
        let n = 2;
        let dt = 1e-3;
        let len = 200;
        let zero_path = SampledPath { t0: 0.0, dt, x: vec![DVector::zeros(n); len], xdot: vec![DVector::zeros(n); len] };
        let full = LkfMatrices {
            p: DMatrix::identity(n, n),
            q: vec![DMatrix::identity(n, n); 7],
            z: vec![DMatrix::identity(n, n); 4],
        };
        let at = DelaysAt { lambda: 0.03, tau: 0.002 };
        assert_eq!(evaluate_lkf(&full, &zero_path, len - 1, at, &bounds).unwrap(), 0.0);
        let only_p = LkfMatrices { q: vec![DMatrix::zeros(n, n); 7], z: vec![DMatrix::zeros(n, n); 4], ..full.clone() };
        let path = SampledPath {
            t0: 0.0,
            dt,
            x: (0..len).map(|i| DVector::from_vec(vec![(i as f64 * dt).sin(), 2.0])).collect(),
            xdot: (0..len).map(|i| DVector::from_vec(vec![(i as f64 * dt).cos(), 0.0])).collect(),
        };
        let v = evaluate_lkf(&only_p, &path, len - 1, at, &bounds).unwrap();
        assert!((v - path.x[len - 1].norm_squared()).abs() < 1e-15);
        assert!(evaluate_lkf(&full, &path, 10, at, &bounds).is_err());
        // constant x with Q = I: V₂ = (λ̲ + λ(t) + λ̄)·|x|²
        let flat = SampledPath { t0: 0.0, dt, x: vec![DVector::from_vec(vec![1.0, 1.0]); len], xdot: vec![DVector::zeros(n); len] };
        let mut q_only = only_p.clone();
        q_only.p = DMatrix::zeros(n, n);
        q_only.q[0] = DMatrix::identity(n, n);
        q_only.q[1] = DMatrix::identity(n, n);
        q_only.q[2] = DMatrix::identity(n, n);
        let v = evaluate_lkf(&q_only, &flat, len - 1, at, &bounds).unwrap();
        let want = 2.0 * (bounds.lambda_lower + at.lambda + bounds.lambda_upper);
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn double_integral_weight() {
        // ẋ constant: ∫_{−b}^{−a}∫_{t+s}^t |ẋ|² = (b² − a²)/2 · |ẋ|²
        let bounds = DelayBounds { tau_bar: 0.005, lambda_lower: 0.02, lambda_upper: 0.05 };
        let dt = 1e-4;
        let len = 1000;
        let path = SampledPath { t0: 0.0, dt, x: vec![DVector::zeros(1); len], xdot: vec![DVector::from_element(1, 2.0); len] };
        let mut m = LkfMatrices { p: s(0.0), q: vec![s(0.0); 7], z: vec![s(0.0); 4] };
        m.z[1] = s(1.0);
        let at = DelaysAt { lambda: 0.03, tau: 0.0 };
        let v = evaluate_lkf(&m, &path, len - 1, at, &bounds).unwrap();
        let (a, b) = (bounds.lambda_lower, bounds.lambda_upper);
        let want = bounds.lambda1() * (b * b - a * a) / 2.0 * 4.0;
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn search_validates_inputs() {
        let p = LmiPlant::scalar(0.0, 1.0, 0.0, 0.0);
        let opts = SearchOptions { starts: 0, ..SearchOptions::default() };
        assert!(certificate_search(&p, DelayBounds::default(), 0, &opts).is_err());
        let opts = SearchOptions { tol: 0.0, ..SearchOptions::default() };
        assert!(certificate_search(&p, DelayBounds::default(), 0, &opts).is_err());
    }
}
