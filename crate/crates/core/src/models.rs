//! System families, basis orderings, and truncated control operators.
//!
//! The displacement matrix element
//!
//! ```text
//! <n'| exp(i eta (a + a^dag)) |n> =
//!     exp(-eta^2/2) sqrt(n_<! / n_>!) (i eta)^|n'-n| L_{n_<}^{|n'-n|}(eta^2)
//! ```
//!
//! is the single source of truth for every oscillator-changing coupling; the
//! operator builders below only place its values into skew-Hermitian matrices.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{max_abs, skew_residual, C64, CMatrix, SKEW_TOL};

/// Model families supported by the operator builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    HarmonicOscillator,
    SpinOscillator,
    NLevelOscillator,
    SpinTwoOscillators,
    BlockExample,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::HarmonicOscillator => "harmonic-oscillator",
            Family::SpinOscillator => "spin-oscillator",
            Family::NLevelOscillator => "n-level-oscillator",
            Family::SpinTwoOscillators => "spin-two-oscillators",
            Family::BlockExample => "block-example",
        };
        f.write_str(s)
    }
}

/// Control-field schemes for the families that admit more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "carrier+red")]
    CarrierRed,
    #[serde(rename = "red+blue")]
    RedBlue,
    /// N-level ladder transition from level 1: `(1, n) <-> (N, n-1)`.
    #[serde(rename = "scheme-a")]
    SchemeA,
    /// N-level ladder transition from level 2: `(2, n) <-> (N, n-1)`.
    #[serde(rename = "scheme-b")]
    SchemeB,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::CarrierRed => "carrier+red",
            Scheme::RedBlue => "red+blue",
            Scheme::SchemeA => "scheme-a",
            Scheme::SchemeB => "scheme-b",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinState {
    Down,
    Up,
}

impl fmt::Display for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinState::Down => "down",
            SpinState::Up => "up",
        })
    }
}

/// Labeled eigenstate of one of the model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisState {
    /// Plain number state (harmonic oscillator and block example).
    Number { n: usize },
    /// Spin-oscillator state `|spin, n>`.
    SpinNumber { spin: SpinState, n: usize },
    /// N-level-oscillator state with 1-based internal level `k`.
    LevelNumber { level: usize, n: usize },
    /// Trapped-electron state: cyclotron number `n`, axial number `l`, spin.
    Electron { n: usize, l: usize, spin: SpinState },
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisState::Number { n } => write!(f, "{n}"),
            BasisState::SpinNumber { spin, n } => write!(f, "{spin},{n}"),
            BasisState::LevelNumber { level, n } => write!(f, "{level},{n}"),
            BasisState::Electron { n, l, spin } => write!(f, "{n},{l},{spin}"),
        }
    }
}

fn default_guard() -> usize {
    4
}
fn default_mu() -> f64 {
    1.0
}

/// A resolved system description. Deserializes from the JSON document
/// `{"family", "scheme", "eta", "n_max", "guard", "levels", "mu"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemModel {
    pub family: Family,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub eta: f64,
    pub n_max: usize,
    #[serde(default = "default_guard")]
    pub guard: usize,
    #[serde(default)]
    pub levels: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default)]
    pub drift_freqs: BTreeMap<String, f64>,
}

impl SystemModel {
    pub fn new(family: Family, scheme: Option<Scheme>, eta: f64, n_max: usize) -> Result<Self> {
        SystemModel {
            family,
            scheme,
            eta,
            n_max,
            guard: default_guard(),
            levels: 0,
            mu: default_mu(),
            drift_freqs: BTreeMap::new(),
        }
        .resolved()
    }

    /// Fills family defaults and validates the parameter set.
    pub fn resolved(mut self) -> Result<Self> {
        if self.eta.is_nan() || self.eta < 0.0 {
            return Err(Error::InvalidModel(format!(
                "eta must be >= 0, got {}",
                self.eta
            )));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidModel("n_max must be >= 1".into()));
        }
        let default_levels = match self.family {
            Family::HarmonicOscillator | Family::BlockExample => 1,
            Family::SpinOscillator | Family::SpinTwoOscillators => 2,
            Family::NLevelOscillator => 3,
        };
        if self.levels == 0 {
            self.levels = default_levels;
        }
        match self.family {
            Family::SpinOscillator | Family::SpinTwoOscillators => {
                if self.levels != 2 {
                    return Err(Error::InvalidModel(format!(
                        "{} requires levels = 2",
                        self.family
                    )));
                }
            }
            Family::NLevelOscillator => {
                if self.levels < 3 {
                    return Err(Error::InvalidModel(
                        "n-level-oscillator requires levels >= 3".into(),
                    ));
                }
            }
            Family::HarmonicOscillator | Family::BlockExample => {
                if self.levels != 1 {
                    return Err(Error::InvalidModel(format!(
                        "{} has no internal levels",
                        self.family
                    )));
                }
            }
        }
        let scheme_ok = match self.family {
            Family::SpinOscillator => matches!(
                self.scheme,
                Some(Scheme::CarrierRed) | Some(Scheme::RedBlue)
            ),
            Family::NLevelOscillator => {
                matches!(self.scheme, Some(Scheme::SchemeA) | Some(Scheme::SchemeB))
            }
            _ => self.scheme.is_none(),
        };
        if !scheme_ok {
            return Err(Error::UnknownScheme {
                family: self.family.to_string(),
                scheme: self
                    .scheme
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "none".into()),
            });
        }
        Ok(self)
    }

    /// Oscillator levels kept per mode, guard band included.
    pub fn osc_size(&self) -> usize {
        self.n_max + self.guard + 1
    }

    pub fn dim(&self) -> usize {
        let m = self.osc_size();
        match self.family {
            Family::HarmonicOscillator | Family::BlockExample => m,
            Family::SpinOscillator => 2 * m,
            Family::NLevelOscillator => self.levels * m,
            Family::SpinTwoOscillators => 2 * m * m,
        }
    }

    /// Field-amplitude conversion constants `(c1, c2) = (0.25 mu, 0.25 eta mu)`.
    /// The `exp(-eta^2/2)` factor lives inside [`coupling`], not here.
    pub fn field_constants(&self) -> (f64, f64) {
        (0.25 * self.mu, 0.25 * self.eta * self.mu)
    }

    /// Position of a labeled eigenstate in the canonical ordering.
    ///
    /// SpinOscillator interleaves `|down,0>, |up,0>, |down,1>, |up,1>, ...`;
    /// the electron basis is axial-major, then cyclotron, then spin.
    pub fn canonical_index(&self, s: &BasisState) -> Result<usize> {
        let m = self.osc_size();
        let out_of_range = || Error::OutOfRange {
            label: s.to_string(),
        };
        match (self.family, s) {
            (Family::HarmonicOscillator | Family::BlockExample, BasisState::Number { n }) => {
                if *n < m {
                    Ok(*n)
                } else {
                    Err(out_of_range())
                }
            }
            (Family::SpinOscillator, BasisState::SpinNumber { spin, n }) => {
                if *n < m {
                    Ok(2 * n + usize::from(*spin == SpinState::Up))
                } else {
                    Err(out_of_range())
                }
            }
            (Family::NLevelOscillator, BasisState::LevelNumber { level, n }) => {
                if (1..=self.levels).contains(level) && *n < m {
                    Ok(n * self.levels + (level - 1))
                } else {
                    Err(out_of_range())
                }
            }
            (Family::SpinTwoOscillators, BasisState::Electron { n, l, spin }) => {
                if *n < m && *l < m {
                    Ok(l * 2 * m + 2 * n + usize::from(*spin == SpinState::Up))
                } else {
                    Err(out_of_range())
                }
            }
            _ => Err(Error::InvalidLabel {
                label: s.to_string(),
                reason: format!("label kind does not match family {}", self.family),
            }),
        }
    }

    /// Inverse of [`SystemModel::canonical_index`].
    pub fn state_at(&self, index: usize) -> BasisState {
        let m = self.osc_size();
        match self.family {
            Family::HarmonicOscillator | Family::BlockExample => BasisState::Number { n: index },
            Family::SpinOscillator => BasisState::SpinNumber {
                spin: if index.is_multiple_of(2) {
                    SpinState::Down
                } else {
                    SpinState::Up
                },
                n: index / 2,
            },
            Family::NLevelOscillator => BasisState::LevelNumber {
                level: index % self.levels + 1,
                n: index / self.levels,
            },
            Family::SpinTwoOscillators => {
                let l = index / (2 * m);
                let rem = index % (2 * m);
                BasisState::Electron {
                    n: rem / 2,
                    l,
                    spin: if rem.is_multiple_of(2) {
                        SpinState::Down
                    } else {
                        SpinState::Up
                    },
                }
            }
        }
    }

    /// True at indices inside the guard band (any mode index above `n_max`).
    pub fn guard_mask(&self) -> Vec<bool> {
        let dim = self.dim();
        (0..dim)
            .map(|i| match (self.family, self.state_at(i)) {
                (Family::BlockExample, _) => i > self.n_max,
                (_, BasisState::Number { n }) => n > self.n_max,
                (_, BasisState::SpinNumber { n, .. }) => n > self.n_max,
                (_, BasisState::LevelNumber { n, .. }) => n > self.n_max,
                (_, BasisState::Electron { n, l, .. }) => n > self.n_max || l > self.n_max,
            })
            .collect()
    }

    /// Parses the family-specific label grammar used by reports and the CLI:
    /// `"3"`, `"down,2"`, `"2,0"` (level, n) or `"1,0,up"` (n, l, spin).
    pub fn parse_label(&self, label: &str) -> Result<BasisState> {
        let bad = |reason: &str| Error::InvalidLabel {
            label: label.to_string(),
            reason: reason.to_string(),
        };
        let parts: Vec<&str> = label.split(',').map(str::trim).collect();
        let parse_n = |s: &str| s.parse::<usize>().map_err(|_| bad("expected an integer"));
        let parse_spin = |s: &str| match s {
            "down" => Ok(SpinState::Down),
            "up" => Ok(SpinState::Up),
            _ => Err(bad("expected 'down' or 'up'")),
        };
        let state = match (self.family, parts.as_slice()) {
            (Family::HarmonicOscillator | Family::BlockExample, [n]) => BasisState::Number {
                n: parse_n(n)?,
            },
            (Family::SpinOscillator, [spin, n]) => BasisState::SpinNumber {
                spin: parse_spin(spin)?,
                n: parse_n(n)?,
            },
            (Family::NLevelOscillator, [level, n]) => BasisState::LevelNumber {
                level: parse_n(level)?,
                n: parse_n(n)?,
            },
            (Family::SpinTwoOscillators, [n, l, spin]) => BasisState::Electron {
                n: parse_n(n)?,
                l: parse_n(l)?,
                spin: parse_spin(spin)?,
            },
            _ => return Err(bad("wrong number of label fields for this family")),
        };
        // range check
        self.canonical_index(&state)?;
        Ok(state)
    }
}

/// Associated Laguerre polynomial `L_n^alpha(x)` by the three-term recurrence.
pub fn laguerre(n: usize, alpha: usize, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Oscillator matrix element `<n_to| exp(i eta (a + a^dag)) |n_from>`.
pub fn coupling(n_from: usize, n_to: usize, eta: f64) -> C64 {
    let lo = n_from.min(n_to);
    let hi = n_from.max(n_to);
    let delta = hi - lo;
    let mut factorial_ratio = 1.0;
    for k in lo + 1..=hi {
        factorial_ratio /= (k as f64).sqrt();
    }
    let magnitude = (-eta * eta / 2.0).exp()
        * factorial_ratio
        * eta.powi(delta as i32)
        * laguerre(lo, delta, eta * eta);
    C64::i().powu(delta as u32) * magnitude
}

/// Truncated annihilation operator `a` (entries `sqrt(n)` on the
/// super-diagonal).
pub fn annihilation(dim: usize) -> CMatrix {
    let mut m: CMatrix = Array2::zeros((dim, dim));
    for n in 1..dim {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// A truncated skew-Hermitian control generator with its labeled edge set.
#[derive(Debug, Clone)]
pub struct ControlOperator {
    pub id: String,
    pub matrix: CMatrix,
    /// Strict upper-triangle sparsity: `(i, j, coupling)` with `i < j`.
    pub edges: Vec<(usize, usize, C64)>,
}

impl ControlOperator {
    /// Wraps a matrix, extracting its edge set and checking
    /// skew-Hermiticity to 1e-12.
    pub fn from_matrix(id: impl Into<String>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let residual = skew_residual(&matrix);
        if residual > SKEW_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::NotSkewHermitian { residual });
        }
        let mut edges = Vec::new();
        for i in 0..matrix.nrows() {
            for j in i + 1..matrix.ncols() {
                let z = matrix[[i, j]];
                if z != C64::new(0.0, 0.0) {
                    edges.push((i, j, z));
                }
            }
        }
        Ok(ControlOperator {
            id: id.into(),
            matrix,
            edges,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn edge_coupling(&self, i: usize, j: usize) -> Option<C64> {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|(a, b, _)| *a == lo && *b == hi)
            .map(|(_, _, c)| *c)
    }
}

fn carrier_operator(model: &SystemModel) -> Result<ControlOperator> {
    let m = model.osc_size();
    let mut mat: CMatrix = Array2::zeros((2 * m, 2 * m));
    for n in 0..m {
        // Delta = 0 coupling is real; the carrier is pure imaginary symmetric
        let c = coupling(n, n, model.eta).re;
        mat[[2 * n, 2 * n + 1]] = C64::new(0.0, c);
        mat[[2 * n + 1, 2 * n]] = C64::new(0.0, c);
    }
    ControlOperator::from_matrix("carrier", mat)
}

fn red_operator(model: &SystemModel) -> Result<ControlOperator> {
    let m = model.osc_size();
    let mut mat: CMatrix = Array2::zeros((2 * m, 2 * m));
    for n in 1..m {
        // (down, n) <-> (up, n-1), real antisymmetric
        let w = coupling(n, n - 1, model.eta).im;
        mat[[2 * n - 1, 2 * n]] = C64::new(w, 0.0);
        mat[[2 * n, 2 * n - 1]] = C64::new(-w, 0.0);
    }
    ControlOperator::from_matrix("red", mat)
}

fn blue_operator(model: &SystemModel) -> Result<ControlOperator> {
    let m = model.osc_size();
    let mut mat: CMatrix = Array2::zeros((2 * m, 2 * m));
    for n in 0..m.saturating_sub(1) {
        // (down, n) <-> (up, n+1), real antisymmetric
        let w = coupling(n, n + 1, model.eta).im;
        mat[[2 * n, 2 * n + 3]] = C64::new(w, 0.0);
        mat[[2 * n + 3, 2 * n]] = C64::new(-w, 0.0);
    }
    ControlOperator::from_matrix("blue", mat)
}

fn n_level_operators(model: &SystemModel, ladder_from: usize) -> Result<Vec<ControlOperator>> {
    let m = model.osc_size();
    let nl = model.levels;
    let dim = nl * m;
    let mut ops = Vec::new();
    // one carrier field per adjacent internal pair, strength independent of n
    for k in 1..nl {
        let mut mat: CMatrix = Array2::zeros((dim, dim));
        for n in 0..m {
            let i = n * nl + (k - 1);
            let j = n * nl + k;
            mat[[i, j]] = C64::new(0.0, 1.0);
            mat[[j, i]] = C64::new(0.0, 1.0);
        }
        ops.push(ControlOperator::from_matrix(format!("c{k}"), mat)?);
    }
    // ladder transition (ladder_from, n) <-> (N, n-1)
    let mut mat: CMatrix = Array2::zeros((dim, dim));
    for n in 1..m {
        let w = coupling(n, n - 1, model.eta).im;
        let i = (n - 1) * nl + (nl - 1);
        let j = n * nl + (ladder_from - 1);
        mat[[i, j]] = C64::new(w, 0.0);
        mat[[j, i]] = C64::new(-w, 0.0);
    }
    ops.push(ControlOperator::from_matrix("red", mat)?);
    Ok(ops)
}

fn electron_operators(model: &SystemModel) -> Result<Vec<ControlOperator>> {
    let m = model.osc_size();
    let dim = 2 * m * m;
    let idx = |n: usize, l: usize, up: bool| l * 2 * m + 2 * n + usize::from(up);

    let mut s: CMatrix = Array2::zeros((dim, dim));
    for l in 0..m {
        for n in 0..m {
            let (i, j) = (idx(n, l, false), idx(n, l, true));
            s[[i, j]] = C64::new(0.0, 1.0);
            s[[j, i]] = C64::new(0.0, 1.0);
        }
    }

    let mut sa: CMatrix = Array2::zeros((dim, dim));
    for l in 0..m.saturating_sub(1) {
        for n in 0..m {
            // (n, l, down) <-> (n, l+1, up), strength sqrt(l+1)
            let (i, j) = (idx(n, l, false), idx(n, l + 1, true));
            let w = ((l + 1) as f64).sqrt();
            sa[[i, j]] = C64::new(0.0, w);
            sa[[j, i]] = C64::new(0.0, w);
        }
    }

    let mut sc: CMatrix = Array2::zeros((dim, dim));
    for l in 0..m {
        for n in 1..m {
            // (n, l, down) <-> (n-1, l, up), strength sqrt(n)
            let (i, j) = (idx(n - 1, l, true), idx(n, l, false));
            let w = (n as f64).sqrt();
            sc[[i, j]] = C64::new(0.0, w);
            sc[[j, i]] = C64::new(0.0, w);
        }
    }

    Ok(vec![
        ControlOperator::from_matrix("s", s)?,
        ControlOperator::from_matrix("sa", sa)?,
        ControlOperator::from_matrix("sc", sc)?,
    ])
}

fn harmonic_operators(model: &SystemModel) -> Result<Vec<ControlOperator>> {
    let m = model.osc_size();
    let omega = model.drift_freqs.get("omega_m").copied().unwrap_or(1.0);
    let mut a: CMatrix = Array2::zeros((m, m));
    for n in 0..m {
        a[[n, n]] = C64::new(0.0, -omega * (n as f64 + 0.5));
    }
    // dipole operator -i x with <n-1|x|n> = sqrt(n/2)
    let mut b: CMatrix = Array2::zeros((m, m));
    for n in 1..m {
        let x = (n as f64 / 2.0).sqrt();
        b[[n - 1, n]] = C64::new(0.0, -x);
        b[[n, n - 1]] = C64::new(0.0, -x);
    }
    Ok(vec![
        ControlOperator::from_matrix("A", a)?,
        ControlOperator::from_matrix("B", b)?,
    ])
}

fn block_example_operators(model: &SystemModel) -> Result<Vec<ControlOperator>> {
    let dim = model.dim();
    let mut a: CMatrix = Array2::zeros((dim, dim));
    let mut k = 0;
    while k + 1 < dim {
        a[[k, k + 1]] = C64::new(1.0, 0.0);
        a[[k + 1, k]] = C64::new(-1.0, 0.0);
        k += 2;
    }
    let mut b: CMatrix = Array2::zeros((dim, dim));
    let mut k = 1;
    while k + 1 < dim {
        b[[k, k + 1]] = C64::new(1.0, 0.0);
        b[[k + 1, k]] = C64::new(-1.0, 0.0);
        k += 2;
    }
    Ok(vec![
        ControlOperator::from_matrix("A", a)?,
        ControlOperator::from_matrix("B", b)?,
    ])
}

/// Builds the control operators of `model` on the truncated basis
/// (guard band included).
pub fn build_operators(model: &SystemModel) -> Result<Vec<ControlOperator>> {
    if model.osc_size() < 2 {
        return Err(Error::TruncationTooSmall {
            needed: 2,
            got: model.osc_size(),
        });
    }
    match (model.family, model.scheme) {
        (Family::SpinOscillator, Some(Scheme::CarrierRed)) => {
            Ok(vec![carrier_operator(model)?, red_operator(model)?])
        }
        (Family::SpinOscillator, Some(Scheme::RedBlue)) => {
            Ok(vec![red_operator(model)?, blue_operator(model)?])
        }
        (Family::NLevelOscillator, Some(Scheme::SchemeA)) => n_level_operators(model, 1),
        (Family::NLevelOscillator, Some(Scheme::SchemeB)) => n_level_operators(model, 2),
        (Family::SpinTwoOscillators, None) => electron_operators(model),
        (Family::HarmonicOscillator, None) => harmonic_operators(model),
        (Family::BlockExample, None) => block_example_operators(model),
        (family, scheme) => Err(Error::UnknownScheme {
            family: family.to_string(),
            scheme: scheme.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
        }),
    }
}
