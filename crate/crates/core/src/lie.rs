//! Numerical Lie-bracket engine: closure dimension estimates with
//! truncation-safe interior projection, plus bracket-identity checks for
//! block-embedded ladder operators.
//!
//! Finite truncations contaminate the high-index border of every product, so
//! independence is always decided on a leading interior window. Inputs must
//! keep that contamination at the tail, which holds for number-ordered banded
//! operators; block-embedded generators should be passed through
//! [`to_interleaved`] first.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{
    identity, leading_block, matmul, max_abs, real_inner, skew_residual, C64, CMatrix,
};

pub fn bracket(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    if x.nrows() != x.ncols() || x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    Ok(matmul(x, y) - matmul(y, x))
}

/// `J(T) = [[0, T], [-T^dag, 0]]`; skew-Hermitian for any `T`.
pub fn j_embed(t: &CMatrix) -> CMatrix {
    let m = t.nrows();
    let mut out: CMatrix = Array2::zeros((2 * m, 2 * m));
    for i in 0..m {
        for j in 0..m {
            out[[i, m + j]] = t[[i, j]];
            out[[m + i, j]] = -t[[j, i]].conj();
        }
    }
    out
}

/// `K(T) = [[T, 0], [0, -T]]`; skew-Hermitian iff `T` is.
pub fn k_embed(t: &CMatrix) -> CMatrix {
    let m = t.nrows();
    let mut out: CMatrix = Array2::zeros((2 * m, 2 * m));
    for i in 0..m {
        for j in 0..m {
            out[[i, j]] = t[[i, j]];
            out[[m + i, m + j]] = -t[[i, j]];
        }
    }
    out
}

/// Conjugates a block-2x2 matrix (upper component first) into the interleaved
/// ordering where pair `n` occupies indices `2n, 2n + 1` with the lower
/// component first. Ladder embeddings become banded, which keeps truncation
/// contamination at the tail where the interior window discards it.
pub fn to_interleaved(m: &CMatrix) -> Result<CMatrix> {
    let dim = m.nrows();
    if dim != m.ncols() || !dim.is_multiple_of(2) {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let half = dim / 2;
    let perm = |r: usize| if r < half { 2 * r + 1 } else { 2 * (r - half) };
    let mut out: CMatrix = Array2::zeros((dim, dim));
    for r in 0..dim {
        for c in 0..dim {
            out[[perm(r), perm(c)]] = m[[r, c]];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ClosureOptions {
    /// Stop once this many independent directions are found.
    pub max_dim: usize,
    /// Relative residual below which a candidate counts as dependent.
    pub tol: f64,
    /// Side length of the leading window used for independence tests.
    pub interior: usize,
    /// Maximum bracket generations.
    pub depth_cap: usize,
}

impl ClosureOptions {
    pub fn new(max_dim: usize, tol: f64, interior: usize) -> Self {
        ClosureOptions {
            max_dim,
            tol,
            interior,
            depth_cap: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LieClosureReport {
    pub generators: Vec<String>,
    pub dimension_found: usize,
    pub saturated: bool,
    pub depth: usize,
    pub interior_dim: usize,
}

struct SpanTracker {
    interior: usize,
    tol: f64,
    basis: Vec<CMatrix>,
    elements: Vec<CMatrix>,
}

impl SpanTracker {
    fn try_add(&mut self, full: CMatrix) -> bool {
        let proj = leading_block(&full, self.interior);
        let pnorm = real_inner(&proj, &proj).sqrt();
        let full_norm = real_inner(&full, &full).sqrt();
        if pnorm <= 1e-13 * full_norm.max(1.0) {
            return false;
        }
        let mut r = proj.mapv(|z| z / pnorm);
        for _ in 0..2 {
            for b in &self.basis {
                let c = real_inner(b, &r);
                r = r - b.mapv(|z| z * c);
            }
        }
        let res = real_inner(&r, &r).sqrt();
        if res <= self.tol {
            return false;
        }
        self.basis.push(r.mapv(|z| z / res));
        self.elements.push(full.mapv(|z| z / full_norm));
        true
    }
}

/// Breadth-first bracket closure of named skew-Hermitian generators.
/// Independence is decided on the leading `interior` window; the search stops
/// at saturation, at `max_dim` directions, or at the depth cap.
pub fn closure(gens: &[(String, CMatrix)], opts: &ClosureOptions) -> Result<LieClosureReport> {
    if gens.is_empty() {
        return Err(Error::InvalidModel("closure needs at least one generator".into()));
    }
    if opts.max_dim < gens.len() {
        return Err(Error::MaxDimTooSmall {
            max_dim: opts.max_dim,
            generators: gens.len(),
        });
    }
    let dim = gens[0].1.nrows();
    if opts.interior == 0 || opts.interior >= dim {
        return Err(Error::InvalidModel(format!(
            "interior window must lie in 1..{dim}"
        )));
    }
    for (id, g) in gens {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: g.nrows(),
            });
        }
        if skew_residual(g) > 1e-12 * max_abs(g).max(1.0) {
            return Err(Error::NotSkewHermitian {
                residual: skew_residual(g),
            });
        }
        let _ = id;
    }

    let mut tracker = SpanTracker {
        interior: opts.interior,
        tol: opts.tol,
        basis: Vec::new(),
        elements: Vec::new(),
    };
    for (_, g) in gens {
        tracker.try_add(g.clone());
    }
    let ids: Vec<String> = gens.iter().map(|(id, _)| id.clone()).collect();

    let report = |tracker: &SpanTracker, saturated: bool, depth: usize| LieClosureReport {
        generators: ids.clone(),
        dimension_found: tracker.elements.len(),
        saturated,
        depth,
        interior_dim: opts.interior,
    };

    if tracker.elements.len() >= opts.max_dim {
        return Ok(report(&tracker, false, 0));
    }

    let mut gen_start = 0usize;
    for depth in 1..=opts.depth_cap {
        let gen_end = tracker.elements.len();
        let mut found_new = false;
        for gi in gen_start..gen_end {
            for j in 0..gi {
                let cand = bracket(&tracker.elements[gi], &tracker.elements[j])?;
                debug_assert!(
                    skew_residual(&cand) <= 1e-9 * max_abs(&cand).max(1.0),
                    "bracket of skew-Hermitian matrices must stay skew-Hermitian"
                );
                if tracker.try_add(cand) {
                    found_new = true;
                    if tracker.elements.len() >= opts.max_dim {
                        return Ok(report(&tracker, false, depth));
                    }
                }
            }
        }
        if !found_new {
            return Ok(report(&tracker, true, depth - 1));
        }
        gen_start = gen_end;
    }
    Ok(report(&tracker, false, opts.depth_cap))
}

#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: String,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub passed: bool,
    pub max_residual: f64,
    pub checks: Vec<LemmaCheck>,
}

fn quadrant_residual(a: &CMatrix, b: &CMatrix, half: usize, window: usize) -> f64 {
    let mut worst = 0.0f64;
    for &r0 in &[0, half] {
        for &c0 in &[0, half] {
            for r in 0..window {
                for c in 0..window {
                    worst = worst.max((a[[r0 + r, c0 + c]] - b[[r0 + r, c0 + c]]).norm());
                }
            }
        }
    }
    worst
}

/// Checks the bracket identities of the `J`/`K` embedding for an
/// annihilation-type `T` on interior windows:
///
/// ```text
/// [J(T), J(iI)] = K(W)
/// [J(iI), K(W)] = J(-2iW)
/// ad_{J(W)}^p (K(W)) = (-2)^p { J(W^{p+1}) p odd; K(W^{p+1}) p even }
/// ```
///
/// with `W = i (T + T^dag)`. The identities are exact on the interior, so the
/// report passes iff the worst windowed residual stays below 1e-9.
pub fn verify_lemma(t: &CMatrix, p_max: usize) -> Result<LemmaReport> {
    let m = t.nrows();
    if m != t.ncols() {
        return Err(Error::NotSquare {
            rows: m,
            cols: t.ncols(),
        });
    }
    if p_max < 1 {
        return Err(Error::InvalidModel("p_max must be >= 1".into()));
    }
    if m < 2 * p_max + 4 {
        return Err(Error::TruncationTooSmall {
            needed: 2 * p_max + 4,
            got: m,
        });
    }
    let window = m - 2 * p_max;

    let t_dag = t.t().mapv(|z| z.conj());
    let w_mat = (t + &t_dag).mapv(|z| z * C64::i());
    let j_i = j_embed(&identity(m).mapv(|z| z * C64::i()));
    let j_t = j_embed(t);
    let j_w = j_embed(&w_mat);
    let k_w = k_embed(&w_mat);

    let mut checks = Vec::new();
    let push = |name: String, lhs: &CMatrix, rhs: &CMatrix, checks: &mut Vec<LemmaCheck>| {
        checks.push(LemmaCheck {
            name,
            residual: quadrant_residual(lhs, rhs, m, window),
        });
    };

    let c1 = bracket(&j_t, &j_i)?;
    push("[J(T), J(iI)] = K(W)".into(), &c1, &k_w, &mut checks);

    let c2 = bracket(&j_i, &k_w)?;
    let rhs2 = j_embed(&w_mat.mapv(|z| z * C64::new(0.0, -2.0)));
    push("[J(iI), K(W)] = -2i J(W)".into(), &c2, &rhs2, &mut checks);

    let mut cur = k_w.clone();
    let mut w_pow = w_mat.clone();
    for p in 1..=p_max {
        cur = bracket(&j_w, &cur)?;
        w_pow = matmul(&w_pow, &w_mat);
        let coef = (-2.0f64).powi(p as i32);
        let scaled = w_pow.mapv(|z| z * coef);
        let rhs = if p % 2 == 1 {
            j_embed(&scaled)
        } else {
            k_embed(&scaled)
        };
        push(format!("ad_JW^{p}(K(W))"), &cur, &rhs, &mut checks);
    }

    let max_residual = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(LemmaReport {
        passed: max_residual <= 1e-9,
        max_residual,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{annihilation, build_operators, Family, SystemModel};
    use crate::numeric::orthonormal_rank;

    fn ho_generators(n_levels: usize) -> Vec<(String, CMatrix)> {
        let mut model = SystemModel::new(Family::HarmonicOscillator, None, 0.0, n_levels - 1)
            .unwrap();
        model.guard = 0;
        build_operators(&model)
            .unwrap()
            .into_iter()
            .map(|op| (op.id, op.matrix))
            .collect()
    }

    #[test]
    fn bracket_of_itself_vanishes() {
        let a = annihilation(6);
        let ja = j_embed(&a);
        let z = bracket(&ja, &ja).unwrap();
        assert!(max_abs(&z) == 0.0);
        assert!(bracket(&ja, &annihilation(4)).is_err());
    }

    #[test]
    fn oscillator_commutator_has_the_derivative_pattern() {
        // [A, B] with A = -i(N + 1/2), B = -i x equals (a - a^dag)/sqrt(2):
        // real antisymmetric entries +-sqrt(n/2), exact because A is diagonal
        let gens = ho_generators(20);
        let c = bracket(&gens[0].1, &gens[1].1).unwrap();
        let m = 20;
        let mut expected: CMatrix = Array2::zeros((m, m));
        for n in 1..m {
            let x = (n as f64 / 2.0).sqrt();
            expected[[n - 1, n]] = C64::new(x, 0.0);
            expected[[n, n - 1]] = C64::new(-x, 0.0);
        }
        let diff = max_abs(&(&c - &expected));
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn base_bracket_matches_k_embedding() {
        let a = annihilation(16);
        let w = (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * C64::i());
        let lhs = bracket(&j_embed(&a), &j_embed(&identity(16).mapv(|z| z * C64::i()))).unwrap();
        let rhs = k_embed(&w);
        assert!(quadrant_residual(&lhs, &rhs, 16, 14) < 1e-13);
    }

    #[test]
    fn lemma_passes_for_truncated_annihilation() {
        let report = verify_lemma(&annihilation(24), 4).unwrap();
        assert!(report.passed, "max residual {}", report.max_residual);
        assert!(report.max_residual <= 1e-10);
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn lemma_trivial_and_error_cases() {
        let zero: CMatrix = Array2::zeros((12, 12));
        let report = verify_lemma(&zero, 3).unwrap();
        assert!(report.passed);
        assert_eq!(report.max_residual, 0.0);
        assert!(matches!(
            verify_lemma(&annihilation(10), 4),
            Err(Error::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn closure_of_single_generator_saturates_immediately() {
        let gens = vec![("A".to_string(), ho_generators(12)[0].1.clone())];
        let report = closure(&gens, &ClosureOptions::new(8, 1e-9, 8)).unwrap();
        assert_eq!(report.dimension_found, 1);
        assert!(report.saturated);
        assert_eq!(report.depth, 0);
    }

    #[test]
    fn oscillator_algebra_is_four_dimensional() {
        let gens = ho_generators(40);
        let opts = ClosureOptions::new(24, 1e-9, 30);
        let report = closure(&gens, &opts).unwrap();
        assert_eq!(report.dimension_found, 4);
        assert!(report.saturated);

        // same dimension under generator reordering and a smaller window
        let mut reversed = gens.clone();
        reversed.reverse();
        assert_eq!(closure(&reversed, &opts).unwrap().dimension_found, 4);
        let opts_small = ClosureOptions::new(24, 1e-9, 24);
        assert_eq!(closure(&gens, &opts_small).unwrap().dimension_found, 4);

        // the found span matches {A, B, (a - a^dag)/sqrt2, iI} and nothing more
        let a = annihilation(40);
        let deriv = (&a - &a.t().mapv(|z| z.conj())).mapv(|z| z / C64::new(2f64.sqrt(), 0.0));
        let i_id = identity(40).mapv(|z| z * C64::i());
        let mut span: Vec<CMatrix> = gens.iter().map(|(_, g)| leading_block(g, 30)).collect();
        span.push(leading_block(&deriv, 30));
        span.push(leading_block(&i_id, 30));
        let (rank, _) = orthonormal_rank(&span, 1e-9).unwrap();
        assert_eq!(rank, 4);
    }

    #[test]
    fn lamb_dicke_pair_keeps_growing() {
        let m = 24;
        let eta = 0.1;
        let g1 = to_interleaved(&j_embed(&identity(m).mapv(|z| z * C64::i()))).unwrap();
        let g2 = to_interleaved(&j_embed(&annihilation(m))).unwrap().mapv(|z| z * eta);
        let gens = vec![("carrier".to_string(), g1), ("red".to_string(), g2)];
        let report = closure(&gens, &ClosureOptions::new(12, 1e-9, 32)).unwrap();
        assert_eq!(report.dimension_found, 12);
        assert!(!report.saturated);
    }

    #[test]
    fn interleaving_matches_the_model_builders() {
        // eta -> 0 red operator equals eta * interleaved J(a)
        let mut model = SystemModel::new(
            Family::SpinOscillator,
            Some(crate::models::Scheme::CarrierRed),
            1e-9,
            7,
        )
        .unwrap();
        model.guard = 0;
        let ops = build_operators(&model).unwrap();
        let m = model.osc_size();
        let ja = to_interleaved(&j_embed(&annihilation(m))).unwrap().mapv(|z| z * model.eta);
        let diff = max_abs(&(&ops[1].matrix - &ja));
        assert!(diff < 1e-17, "diff {diff}");
    }
}
