use nalgebra::{DMatrix, DVector, DVectorView};

use super::design::DesignMatrix;
use crate::error::{Error, Result};

/// Smallest admissible Sherman–Morrison denominator `1 + zᵀGz`.
pub const MIN_DENOMINATOR: f64 = 1e-12;

/// Dual quantities for a selected column set `S`:
/// `K = Σ_{i∈S} zᵢzᵢᵀ` and `G = (K + λ_eff·I)⁻¹`, both `m×m`.
///
/// `λ_eff = m·λ`, so that the implied primal objective is the mean squared
/// error plus `λ‖w‖²`.
#[derive(Debug, Clone)]
pub struct DualState {
    k: DMatrix<f64>,
    g: DMatrix<f64>,
    lambda_eff: f64,
}

impl DualState {
    /// Empty-selection state for `m` examples and mean-scale regularizer `lambda`.
    pub fn new(m: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if m == 0 {
            return Err(Error::Dimension("dual state needs m >= 1".into()));
        }
        let lambda_eff = m as f64 * lambda;
        Ok(Self {
            k: DMatrix::zeros(m, m),
            g: DMatrix::identity(m, m) / lambda_eff,
            lambda_eff,
        })
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn lambda_eff(&self) -> f64 {
        self.lambda_eff
    }

    /// Adds `z` to the selection: `K ← K + zzᵀ`,
    /// `G ← G − (Gz)(Gz)ᵀ / (1 + zᵀGz)`, then symmetrizes `G`.
    pub fn sm_update(&mut self, z: DVectorView<'_, f64>) -> Result<()> {
        self.check_len(z.len())?;
        let gz = &self.g * z;
        let denom = 1.0 + z.dot(&gz);
        if denom.is_nan() || denom <= MIN_DENOMINATOR {
            return Err(Error::NumericDegeneracy(format!(
                "rank-one update denominator {denom:e} <= {MIN_DENOMINATOR:e}"
            )));
        }
        self.k.ger(1.0, &z, &z, 1.0);
        self.g.ger(-1.0 / denom, &gz, &gz, 1.0);
        let m = self.m();
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (self.g[(i, j)] + self.g[(j, i)]);
                self.g[(i, j)] = v;
                self.g[(j, i)] = v;
            }
        }
        Ok(())
    }

    /// Non-mutating form of [`sm_update`](Self::sm_update).
    pub fn updated(&self, z: DVectorView<'_, f64>) -> Result<Self> {
        let mut next = self.clone();
        next.sm_update(z)?;
        Ok(next)
    }

    /// Current dual value `yᵀKGy`.
    pub fn score(&self, y: &DVector<f64>) -> f64 {
        // KG = I − λ_eff·G
        y.norm_squared() - self.lambda_eff * y.dot(&(&self.g * y))
    }

    /// `w_i = z_iᵀ G y` for every `i` in `support`.
    pub fn weights(&self, design: &DesignMatrix, support: &[usize]) -> Vec<(usize, f64)> {
        let gy = &self.g * design.y();
        support
            .iter()
            .map(|&i| (i, design.column(i).dot(&gy)))
            .collect()
    }

    /// Relative Frobenius residual `‖G(K + λ_eff I) − I‖ / √m`.
    pub fn inverse_residual(&self) -> f64 {
        let m = self.m();
        let mut a = self.k.clone();
        for i in 0..m {
            a[(i, i)] += self.lambda_eff;
        }
        let r = &self.g * a - DMatrix::<f64>::identity(m, m);
        r.norm() / (m as f64).sqrt()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.m() {
            return Err(Error::Dimension(format!(
                "column has {len} entries, dual state has m = {}",
                self.m()
            )));
        }
        Ok(())
    }
}

/// Scores candidate columns against a fixed state and label vector.
///
/// Precomputes `Gy` and `yᵀGy` once so each candidate costs a single
/// `m×m` matrix-vector product.
pub struct CandidateScorer<'a> {
    state: &'a DualState,
    gy: DVector<f64>,
    y_gy: f64,
    y_norm2: f64,
}

impl<'a> CandidateScorer<'a> {
    pub fn new(state: &'a DualState, y: &DVector<f64>) -> Result<Self> {
        state.check_len(y.len())?;
        let gy = state.g() * y;
        let y_gy = y.dot(&gy);
        Ok(Self {
            state,
            gy,
            y_gy,
            y_norm2: y.norm_squared(),
        })
    }

    /// Score of the current selection, `yᵀKGy`.
    pub fn current(&self) -> f64 {
        self.y_norm2 - self.state.lambda_eff * self.y_gy
    }

    /// `yᵀ(K + zzᵀ)G′y` where `G′` is the tentative Sherman–Morrison update.
    ///
    /// Uses `(K′)G′ = I − λ_eff·G′` and `yᵀG′y = yᵀGy − (zᵀGy)² / (1 + zᵀGz)`.
    pub fn score(&self, z: DVectorView<'_, f64>) -> Result<f64> {
        self.state.check_len(z.len())?;
        let gz = self.state.g() * z;
        let denom = 1.0 + z.dot(&gz);
        if denom.is_nan() || denom <= MIN_DENOMINATOR {
            return Err(Error::NumericDegeneracy(format!(
                "candidate denominator {denom:e} <= {MIN_DENOMINATOR:e}"
            )));
        }
        let zgy = z.dot(&self.gy);
        let y_gprime_y = self.y_gy - zgy * zgy / denom;
        Ok(self.y_norm2 - self.state.lambda_eff * y_gprime_y)
    }
}

/// One-off candidate score; see [`CandidateScorer::score`].
pub fn candidate_score(
    state: &DualState,
    z: DVectorView<'_, f64>,
    y: &DVector<f64>,
) -> Result<f64> {
    CandidateScorer::new(state, y)?.score(z)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub(crate) fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    a.cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::NumericDegeneracy(format!("{n}x{n} system is not positive definite")))
}

/// Reference score `b_Sᵀ(C_S + λ_eff I)⁻¹ b_S` by direct `|S|×|S|` solve.
pub fn naive_regularized_score(
    design: &DesignMatrix,
    support: &[usize],
    lambda: f64,
) -> Result<f64> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if support.is_empty() {
        return Ok(0.0);
    }
    let zs = design.restrict(support)?;
    let lambda_eff = design.m() as f64 * lambda;
    let mut c = zs.z().tr_mul(zs.z());
    for i in 0..support.len() {
        c[(i, i)] += lambda_eff;
    }
    let b = zs.z().tr_mul(design.y());
    let x = spd_solve(c, &b)?;
    Ok(b.dot(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn naive_inverse(cols: &[DVector<f64>], m: usize, lambda_eff: f64) -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::identity(m, m) * lambda_eff;
        for z in cols {
            a += z * z.transpose();
        }
        a.try_inverse().unwrap()
    }

    #[test]
    fn two_by_two_update() {
        // m=2, λ=1 → λ_eff=2
        let mut s = DualState::new(2, 1.0).unwrap();
        assert_eq!(s.g(), &(DMatrix::identity(2, 2) * 0.5));
        let z = DVector::from_vec(vec![1.0, -1.0]);
        s.sm_update(z.as_view()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.375, 0.125, 0.125, 0.375]);
        assert!((s.g() - &expected).norm() < 1e-15);
        assert_eq!(
            s.k(),
            &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
    }

    #[test]
    fn zero_vector_is_noop() {
        let mut s = DualState::new(3, 0.7).unwrap();
        s.sm_update(DVector::from_vec(vec![1.0, 2.0, -1.0]).as_view())
            .unwrap();
        let before = s.clone();
        s.sm_update(DVector::zeros(3).as_view()).unwrap();
        assert_eq!(s.g(), before.g());
        assert_eq!(s.k(), before.k());
    }

    #[test]
    fn successive_updates_match_direct_inverse() {
        let z1 = DVector::from_vec(vec![0.3, -1.2, 2.0, 0.5]);
        let z2 = DVector::from_vec(vec![1.1, 0.4, -0.7, -0.9]);
        let mut s = DualState::new(4, 0.25).unwrap();
        s.sm_update(z1.as_view()).unwrap();
        s.sm_update(z2.as_view()).unwrap();
        let direct = naive_inverse(&[z1, z2], 4, 1.0);
        assert!((s.g() - &direct).norm() / direct.norm() < 1e-12);
        assert!(s.inverse_residual() < 1e-12);
    }

    #[test]
    fn wrong_length_rejected() {
        let mut s = DualState::new(3, 1.0).unwrap();
        assert!(matches!(
            s.sm_update(DVector::zeros(2).as_view()),
            Err(Error::Dimension(_))
        ));
        assert!(DualState::new(3, 0.0).is_err());
        assert!(DualState::new(3, -1.0).is_err());
    }

    #[test]
    fn scalar_candidate_score() {
        let s = DualState::new(2, 1.0).unwrap();
        let z = DVector::from_vec(vec![1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        assert!(close(
            candidate_score(&s, z.as_view(), &y).unwrap(),
            1.0,
            1e-14
        ));
    }

    #[test]
    fn orthogonal_candidate_scores_zero() {
        let s = DualState::new(4, 1.0).unwrap();
        let z = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        assert!(candidate_score(&s, z.as_view(), &y).unwrap().abs() < 1e-14);
    }

    #[test]
    fn empty_selection_closed_form() {
        let s = DualState::new(5, 0.3).unwrap();
        let z = DVector::from_vec(vec![0.2, -1.5, 0.7, 1.9, -0.4]);
        let y = DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0, 1.0]);
        let zy = z.dot(&y);
        let expected = zy * zy / (z.norm_squared() + 5.0 * 0.3);
        let got = candidate_score(&s, z.as_view(), &y).unwrap();
        assert!(close(got, expected, 1e-13));
        assert!(got >= 0.0);
    }

    #[test]
    fn scorer_matches_literal_formula() {
        // yᵀ(K + zzᵀ)G′y with G′ materialized.
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0, -1.0]);
        let mut s = DualState::new(5, 0.5).unwrap();
        s.sm_update(DVector::from_vec(vec![0.5, 1.0, -1.0, 0.2, 0.0]).as_view())
            .unwrap();
        let z = DVector::from_vec(vec![-0.3, 0.8, 1.4, -1.0, 0.6]);
        let next = s.updated(z.as_view()).unwrap();
        let literal = y.dot(&((s.k() + &z * z.transpose()) * next.g() * &y));
        let fast = candidate_score(&s, z.as_view(), &y).unwrap();
        assert!(close(fast, literal, 1e-12));
        assert!(close(next.score(&y), literal, 1e-12));
    }

    #[test]
    fn naive_score_examples() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let z = DesignMatrix::assemble(&x, &DMatrix::zeros(2, 0), &[1.0, -1.0]).unwrap();
        assert_eq!(naive_regularized_score(&z, &[], 1.0).unwrap(), 0.0);
        // (zᵀy)² / (m + λ_eff) = 4 / (2 + 2)
        assert!(close(
            naive_regularized_score(&z, &[0], 1.0).unwrap(),
            1.0,
            1e-14
        ));
    }
}
