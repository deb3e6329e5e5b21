//! Dense complex linear algebra shared by every other module: matrix
//! exponentials, two-level zeroing rotations, real-span ranks, and state
//! fidelities.
//!
//! The two-level rotation convention is fixed here once and referenced by
//! synthesis and evolution:
//!
//! ```text
//! new_a = cos(theta) * a - exp(-i phi) * sin(theta) * b
//! new_b = exp(i phi) * sin(theta) * a + cos(theta) * b
//! ```

use ndarray::{s, Array1, Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Complex amplitude vector.
pub type CVector = Array1<C64>;
/// Dense complex matrix.
pub type CMatrix = Array2<C64>;

/// Max-entry tolerance for unitarity checks.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Relative tolerance for skew-Hermiticity checks.
pub const SKEW_TOL: f64 = 1e-12;
/// Default relative tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn identity(dim: usize) -> CMatrix {
    Array2::from_diag_elem(dim, C64::new(1.0, 0.0))
}

pub fn zero_vector(dim: usize) -> CVector {
    Array1::zeros(dim)
}

pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = zero_vector(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

/// `sum_i conj(bra_i) * ket_i`.
pub fn overlap(bra: &CVector, ket: &CVector) -> C64 {
    bra.iter().zip(ket.iter()).map(|(b, k)| b.conj() * k).sum()
}

pub fn norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `M + M^dagger`; zero for an exactly skew-Hermitian matrix.
pub fn skew_residual(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[[i, j]] + m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn is_skew_hermitian(m: &CMatrix) -> bool {
    m.nrows() == m.ncols() && skew_residual(m) <= SKEW_TOL * max_abs(m).max(1.0)
}

/// Complex matrix product through four real GEMMs; much faster than a naive
/// complex loop at the dimensions used here.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let ar = a.mapv(|z| z.re);
    let ai = a.mapv(|z| z.im);
    let br = b.mapv(|z| z.re);
    let bi = b.mapv(|z| z.im);
    let rr = ar.dot(&br);
    let ii = ai.dot(&bi);
    let ri = ar.dot(&bi);
    let ir = ai.dot(&br);
    let mut out: CMatrix = Array2::zeros((a.nrows(), b.ncols()));
    Zip::from(&mut out)
        .and(&rr)
        .and(&ii)
        .and(&ri)
        .and(&ir)
        .for_each(|o, &rr, &ii, &ri, &ir| *o = C64::new(rr - ii, ri + ir));
    out
}

pub fn matvec(a: &CMatrix, x: &CVector) -> CVector {
    let mut out: CVector = Array1::zeros(a.nrows());
    for i in 0..a.nrows() {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..a.ncols() {
            acc += a[[i, j]] * x[j];
        }
        out[i] = acc;
    }
    out
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// General matrix exponential by scaling and squaring with a truncated series
/// kernel. The scaled norm is kept below 1/2, where the series reaches machine
/// precision in under twenty terms.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let dim = m.nrows();
    let norm1 = one_norm(m);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled = m.mapv(|z| z * scale);

    let mut result = identity(dim);
    let mut term = identity(dim);
    for k in 1..=30u32 {
        term = matmul(&term, &scaled).mapv(|z| z / k as f64);
        result += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    Ok(result)
}

/// `exp(t M)` for skew-Hermitian `M`; rejects inputs that fail the
/// skew-Hermiticity check, so the result is unitary.
pub fn expm_skew(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let residual = skew_residual(m);
    if residual > SKEW_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotSkewHermitian { residual });
    }
    expm(&m.mapv(|z| z * t))
}

/// Two-level rotation parameters. `theta` is the rotation angle of the
/// `cos/sin` parametrization, `phi` the relative phase, both in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2 {
    pub theta: f64,
    pub phi: f64,
}

impl Rotation2 {
    /// Applies the module-level rotation convention to an amplitude pair.
    pub fn apply(&self, a: C64, b: C64) -> (C64, C64) {
        let (sin, cos) = self.theta.sin_cos();
        let eip = C64::from_polar(1.0, self.phi);
        let new_a = cos * a - eip.conj() * sin * b;
        let new_b = eip * sin * a + cos * b;
        (new_a, new_b)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % std::f64::consts::TAU;
    if y > std::f64::consts::PI {
        y -= std::f64::consts::TAU;
    } else if y <= -std::f64::consts::PI {
        y += std::f64::consts::TAU;
    }
    y
}

/// Rotation that zeroes `a` against `b` under the convention above:
/// `theta = atan2(|a|, |b|)`, `phi = arg(b) - arg(a)`. Returns `theta = 0`
/// when `a` is already zero.
pub fn givens_zero(a: C64, b: C64) -> Result<Rotation2> {
    let ra = a.norm();
    let rb = b.norm();
    if ra == 0.0 && rb == 0.0 {
        return Err(Error::GivensZeroPair);
    }
    let arg = |z: C64| if z.norm() == 0.0 { 0.0 } else { z.arg() };
    Ok(Rotation2 {
        theta: ra.atan2(rb),
        phi: wrap_angle(arg(b) - arg(a)),
    })
}

/// Real inner product `Re tr(X^dagger Y)` used for real-span ranks.
pub fn real_inner(x: &CMatrix, y: &CMatrix) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Rank of the real span of `vecs` under the inner product `Re tr(X^dagger Y)`,
/// with an orthonormal basis of that span. The threshold is `tol` times the
/// largest input scale, so the rank is invariant under uniform rescaling.
pub fn orthonormal_rank(vecs: &[CMatrix], tol: f64) -> Result<(usize, Vec<CMatrix>)> {
    let mut basis: Vec<CMatrix> = Vec::new();
    if vecs.is_empty() {
        return Ok((0, basis));
    }
    let shape = vecs[0].dim();
    let scale = vecs
        .iter()
        .map(|v| real_inner(v, v).sqrt())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok((0, basis));
    }
    let threshold = tol * scale;
    for v in vecs {
        if v.dim() != shape {
            return Err(Error::DimensionMismatch {
                left: shape.0 * shape.1,
                right: v.nrows() * v.ncols(),
            });
        }
        let mut r = v.clone();
        // two Gram-Schmidt passes to keep the basis orthonormal in fp
        for _ in 0..2 {
            for b in &basis {
                let c = real_inner(b, &r);
                r = r - b.mapv(|z| z * c);
            }
        }
        let nrm = real_inner(&r, &r).sqrt();
        if nrm > threshold {
            basis.push(r.mapv(|z| z / nrm));
        }
    }
    Ok((basis.len(), basis))
}

/// Squared overlap `|<phi|psi>|^2`; invariant under global phase.
pub fn fidelity(psi: &CVector, phi: &CVector) -> Result<f64> {
    if psi.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            left: psi.len(),
            right: phi.len(),
        });
    }
    Ok(overlap(phi, psi).norm_sqr())
}

/// Leading `w x w` block, used to discard truncation-contaminated borders.
pub fn leading_block(m: &CMatrix, w: usize) -> CMatrix {
    m.slice(s![..w, ..w]).to_owned()
}
