//! Energy-efficient waterfilling for one user's block.
//!
//! With the other users fixed, user `i` maximizes
//!
//! ```text
//!   (b + W log2 det(I + G^H Q G)) / (Tr(Q)/eta + a)
//! ```
//!
//! over PSD `Q`. This is a concave fractional program. For a price `lambda`
//! the parametric program `max_Q  b + W log2 det(I + G^H Q G) - lambda (Tr(Q)/eta + a)`
//! diagonalizes in the eigenbasis of `G G^H` and is solved by waterfilling
//! with level `W eta / (ln 2 lambda)`. Its optimal value `Y(lambda)` is
//! continuous and strictly decreasing, and the fractional optimum is the
//! unique root `lambda*` of `Y`, found here by bracketing and bisection.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::objective::UserDecomposition;

/// Bracket expansions allowed before giving up.
const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 400;
const MAX_POLISH_STEPS: usize = 8;

/// Default relative width of the final bisection bracket.
pub const DEFAULT_WATER_LEVEL_TOL: f64 = 1e-10;

/// The parametric program in diagonal form.
#[derive(Debug, Clone)]
pub struct DiagonalProgram {
    /// Positive eigenvalues of `G G^H`, descending (length `L >= 1`).
    pub d: Vec<f64>,
    /// Unitary eigenbasis of `G G^H` (N x N); the first `L` columns match `d`.
    pub u: ComplexMatrix,
    pub a: f64,
    pub b: f64,
    /// Bandwidth in Hz.
    pub w: f64,
    pub eta: f64,
}

/// Result of diagonalizing one block.
#[derive(Debug, Clone)]
pub enum Parametric {
    /// The effective channel is zero: the block optimum is `Q = 0`.
    Degenerate { a: f64, b: f64, n: usize },
    Diagonal(DiagonalProgram),
}

#[derive(Debug, Clone)]
pub struct WaterfillSolution {
    /// Power per active eigenchannel (length `L`).
    pub s_diag: Vec<f64>,
    /// Root of `Y`, bits/Joule.
    pub lambda_star: f64,
    /// Optimal covariance (N x N).
    pub q_star: ComplexMatrix,
    /// Block objective at `q_star`, bits/Joule.
    pub achieved_value: f64,
    /// `Y(lambda_star)`.
    pub y_residual: f64,
}

pub fn build_parametric(dec: &UserDecomposition, w: f64, eta: f64) -> Result<Parametric> {
    if !(dec.a > 0.0) {
        return Err(Error::Domain(format!(
            "denominator constant must be positive, got {}",
            dec.a
        )));
    }
    let n = dec.g.nrows();
    // G^H Q G and Q G G^H share their log-det; Q lives in the N-dim space.
    let ggh = &dec.g * dec.g.adjoint();
    let eig = linalg::eig_hermitian(&ggh)?;
    let rank = eig.significant_rank();
    if rank == 0 {
        return Ok(Parametric::Degenerate {
            a: dec.a,
            b: dec.b,
            n,
        });
    }
    Ok(Parametric::Diagonal(DiagonalProgram {
        d: eig.eigenvalues.as_slice()[..rank].to_vec(),
        u: eig.eigenvectors,
        a: dec.a,
        b: dec.b,
        w,
        eta,
    }))
}

impl DiagonalProgram {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `b + W sum log2(1 + s_k d_k)`.
    pub fn numerator(&self, s: &[f64]) -> f64 {
        self.b
            + self.w
                * s.iter()
                    .zip(&self.d)
                    .map(|(&s, &d)| (s * d).ln_1p())
                    .sum::<f64>()
                / LN_2
    }

    /// `sum s_k / eta + a`.
    pub fn denominator(&self, s: &[f64]) -> f64 {
        s.iter().sum::<f64>() / self.eta + self.a
    }

    /// The block objective for a diagonal allocation.
    pub fn ratio(&self, s: &[f64]) -> f64 {
        self.numerator(s) / self.denominator(s)
    }

    /// `G(S, lambda)` for a diagonal allocation.
    pub fn value(&self, s: &[f64], lambda: f64) -> f64 {
        self.numerator(s) - lambda * self.denominator(s)
    }

    /// `G(S, lambda)` for a full Hermitian PSD `S` expressed in the
    /// eigenbasis `u` (any size up to `dim()`; missing eigenvalues are 0).
    pub fn value_matrix(&self, s: &ComplexMatrix, lambda: f64) -> Result<f64> {
        let size = s.nrows();
        let roots: Vec<f64> = (0..size)
            .map(|k| self.d.get(k).copied().unwrap_or(0.0).sqrt())
            .collect();
        let dh = linalg::real_diagonal(&roots);
        let inner = linalg::identity(size) + &dh * s * &dh;
        let rate = self.w * linalg::logdet_pd(&inner)?;
        Ok(self.b + rate - lambda * (linalg::trace_re(s) / self.eta + self.a))
    }

    /// Water level `W eta / (ln 2 lambda)`.
    fn level(&self, lambda: f64) -> f64 {
        self.w * self.eta / (LN_2 * lambda)
    }

    fn waterfill(&self, lambda: f64) -> Vec<f64> {
        let level = self.level(lambda);
        self.d.iter().map(|&d| (level - 1.0 / d).max(0.0)).collect()
    }

    fn y(&self, lambda: f64) -> f64 {
        self.value(&self.waterfill(lambda), lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("water-level parameter must be positive, got {lambda}")));
    }
    Ok(())
}

/// Maximizer of `G(., lambda)`: `s_k = [W eta / (ln 2 lambda) - 1/d_k]^+`.
pub fn waterfill_at_level(prog: &DiagonalProgram, lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(prog.waterfill(lambda))
}

/// `Y(lambda) = max_S G(S, lambda)`.
pub fn y_of_lambda(prog: &DiagonalProgram, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(prog.y(lambda))
}

/// A price at which `Y >= 0`: the block objective of any feasible point.
fn feasible_lower_bound(prog: &DiagonalProgram) -> f64 {
    let mut probe = vec![0.0; prog.rank()];
    probe[0] = prog.eta * prog.a;
    (prog.b / prog.a).max(prog.ratio(&probe))
}

/// Finds the root of `Y` starting from the bracket `[lo, hi]`, widening it
/// until `Y(lo) >= 0 > Y(hi)`, then bisecting to relative width `tol`.
pub fn bisect_water_level(prog: &DiagonalProgram, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    check_lambda(lo)?;
    check_lambda(hi)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut expansions = 0;
    while prog.y(lo) < 0.0 {
        hi = lo;
        lo *= 0.5;
        expansions += 1;
        if expansions > MAX_BRACKET_DOUBLINGS || lo == 0.0 {
            return Err(Error::Numerical("could not find a price with Y >= 0".into()));
        }
    }
    let mut expansions = 0;
    while prog.y(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Numerical(
                "water-level bracket did not close after 200 doublings".into(),
            ));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if prog.y(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(polish(prog, lo))
}

/// Dinkelbach steps from a price with `Y >= 0`: each step moves to the
/// achieved ratio of the current waterfilling, which never overshoots the root.
fn polish(prog: &DiagonalProgram, mut lambda: f64) -> f64 {
    for _ in 0..MAX_POLISH_STEPS {
        let next = prog.ratio(&prog.waterfill(lambda));
        if !(next > lambda) {
            break;
        }
        lambda = next;
    }
    lambda
}

/// Solves the diagonal program for its water level and optimal covariance.
pub fn solve_water_level(prog: &DiagonalProgram, tol: f64) -> Result<WaterfillSolution> {
    let lo = feasible_lower_bound(prog);
    let lambda_star = bisect_water_level(prog, lo, 2.0 * lo, tol)?;
    let s_diag = prog.waterfill(lambda_star);
    let mut sol = WaterfillSolution {
        achieved_value: prog.ratio(&s_diag),
        y_residual: prog.value(&s_diag, lambda_star),
        q_star: linalg::zeros(prog.dim(), prog.dim()),
        lambda_star,
        s_diag,
    };
    sol.q_star = reconstruct_q(prog, &sol);
    Ok(sol)
}

/// `Q* = U diag(s, 0, ..., 0) U^H`.
pub fn reconstruct_q(prog: &DiagonalProgram, sol: &WaterfillSolution) -> ComplexMatrix {
    let n = prog.dim();
    let mut padded = vec![0.0; n];
    padded[..sol.s_diag.len()].copy_from_slice(&sol.s_diag);
    linalg::hermitian_part(&(&prog.u * linalg::real_diagonal(&padded) * prog.u.adjoint()))
}

/// Runs the whole block update: diagonalize, find the water level, map back.
pub fn solve_subproblem(
    dec: &UserDecomposition,
    w: f64,
    eta: f64,
    tol: f64,
) -> Result<WaterfillSolution> {
    match build_parametric(dec, w, eta)? {
        Parametric::Degenerate { a, b, n } => Ok(WaterfillSolution {
            s_diag: Vec::new(),
            lambda_star: b / a,
            q_star: linalg::zeros(n, n),
            achieved_value: b / a,
            y_residual: 0.0,
        }),
        Parametric::Diagonal(prog) => solve_water_level(&prog, tol),
    }
}
