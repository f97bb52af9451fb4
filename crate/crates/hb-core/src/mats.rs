//! Complex dense matrix kernel and the Riemannian geometry of
//! `P_n = GL(n,ℂ)/U(n)`, the space of positive definite Hermitian matrices.
//!
//! `GL(n,ℂ)` acts transitively by `g ∘ H = g H g*`; the isotropy group at the
//! identity is `U(n)`. The invariant metric at `H` is
//! `⟨A, B⟩_H = tr(H⁻¹ A H⁻¹ B)` on Hermitian tangent matrices (normalization
//! constant fixed to 1 and recorded in reports). Geodesics through the
//! identity are `s ↦ exp(sA)` with `A` Hermitian.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HbError, Result};

pub type C64 = Complex<f64>;
/// Dense complex matrix, the ambient arithmetic type of the whole crate.
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Condition-number guard on `PosDefMetric` inversion. Near-puncture metrics
/// degenerate by design; callers must rescale instead of inverting blindly.
pub const COND_GUARD: f64 = 1e12;

/// Relative Hermitian-deviation tolerated at construction before
/// symmetrization is considered a data error.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn cplx(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Hermitian matrix; `A = A*` is enforced by symmetrization `(A + A*)/2` on
/// construction to control drift in iterative flows.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMat);

impl Hermitian {
    /// Symmetrizes and wraps. Errors if the input deviates from Hermitian by
    /// more than `HERMITIAN_TOL` relative to its norm.
    pub fn new(a: CMat) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(HbError::DimensionMismatch(format!(
                "expected square nonempty matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HbError::InvalidInput("non-finite entries".into()));
        }
        let sym = (&a + a.adjoint()) * cplx(0.5, 0.0);
        let dev = (&a - &sym).norm();
        let scale = sym.norm().max(1.0);
        if dev > HERMITIAN_TOL * scale {
            return Err(HbError::InvalidInput(format!(
                "matrix is not Hermitian: relative deviation {:.3e}",
                dev / scale
            )));
        }
        Ok(Hermitian(sym))
    }

    /// Symmetrizes unconditionally; for internal updates where the deviation
    /// is known to be pure floating-point drift.
    pub fn symmetrize(a: CMat) -> Self {
        let sym = (&a + a.adjoint()) * cplx(0.5, 0.0);
        Hermitian(sym)
    }

    pub fn zeros(n: usize) -> Self {
        Hermitian(CMat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// Eigendecomposition with real eigenvalues (ascending not guaranteed).
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        let se = self.0.clone().symmetric_eigen();
        (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
    }

    /// Applies `f` to the eigenvalues: `U f(Λ) U*`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> CMat {
        let (vals, vecs) = self.eigen();
        let d = CMat::from_diagonal(&DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| cplx(f(v), 0.0)),
        ));
        &vecs * d * vecs.adjoint()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

/// A point of `P_n`: positive definite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PosDefMetric {
    h: Hermitian,
}

impl PosDefMetric {
    pub fn new(a: CMat) -> Result<Self> {
        let h = Hermitian::new(a)?;
        Self::from_hermitian(h)
    }

    pub fn from_hermitian(h: Hermitian) -> Result<Self> {
        let (vals, _) = h.eigen();
        if vals.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(HbError::NotPositiveDefinite);
        }
        Ok(PosDefMetric { h })
    }

    /// For internal flows where positivity is structural (exp retractions);
    /// still verifies finiteness.
    pub(crate) fn from_hermitian_unchecked(h: Hermitian) -> Self {
        PosDefMetric { h }
    }

    pub fn identity(n: usize) -> Self {
        PosDefMetric {
            h: Hermitian::symmetrize(CMat::identity(n, n)),
        }
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn matrix(&self) -> &CMat {
        self.h.matrix()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.h
    }

    /// Largest/smallest eigenvalue ratio.
    pub fn condition_number(&self) -> f64 {
        let (vals, _) = self.h.eigen();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Inverse, guarded by [`COND_GUARD`].
    pub fn try_inverse(&self) -> Result<CMat> {
        let cond = self.condition_number();
        if !(cond.is_finite() && cond < COND_GUARD) {
            return Err(HbError::IllConditioned {
                cond,
                guard: COND_GUARD,
            });
        }
        self.matrix()
            .clone()
            .try_inverse()
            .ok_or(HbError::NotPositiveDefinite)
    }

    /// `H^{1/2}` and `H^{-1/2}` in one eigendecomposition.
    pub fn sqrt_and_inv_sqrt(&self) -> (CMat, CMat) {
        let (vals, vecs) = self.h.eigen();
        let mk = |f: &dyn Fn(f64) -> f64| {
            let d = CMat::from_diagonal(&DVector::from_iterator(
                vals.len(),
                vals.iter().map(|&v| cplx(f(v), 0.0)),
            ));
            &vecs * d * vecs.adjoint()
        };
        (mk(&|v| v.sqrt()), mk(&|v| 1.0 / v.sqrt()))
    }
}

/// Group action `g ∘ H = g H g*` of `GL(n,ℂ)` on `P_n`.
pub fn act(g: &CMat, h: &PosDefMetric) -> Result<PosDefMetric> {
    if g.nrows() != h.dim() || g.ncols() != h.dim() {
        return Err(HbError::DimensionMismatch(format!(
            "group element {}x{} vs metric dim {}",
            g.nrows(),
            g.ncols(),
            h.dim()
        )));
    }
    // Invertibility check through LU; the action of a singular g leaves P_n.
    if g.clone().lu().try_inverse().is_none() {
        return Err(HbError::SingularGroupElement);
    }
    let m = g * h.matrix() * g.adjoint();
    PosDefMetric::new(m)
}

/// Invariant Riemannian inner product `tr(H⁻¹ A H⁻¹ B)` at `H`.
pub fn inner(h: &PosDefMetric, a: &Hermitian, b: &Hermitian) -> Result<f64> {
    if a.dim() != h.dim() || b.dim() != h.dim() {
        return Err(HbError::DimensionMismatch(format!(
            "tangents {} / {} vs metric dim {}",
            a.dim(),
            b.dim(),
            h.dim()
        )));
    }
    let hinv = h.try_inverse()?;
    let m = &hinv * a.matrix() * &hinv * b.matrix();
    // tr(H⁻¹AH⁻¹B) is real for Hermitian A, B.
    Ok(m.trace().re)
}

/// Geodesic through the identity: `exp(sA)`.
pub fn geodesic(a: &Hermitian, s: f64) -> PosDefMetric {
    let m = a.map_eigenvalues(|v| (s * v).exp());
    PosDefMetric::from_hermitian_unchecked(Hermitian::symmetrize(m))
}

/// Principal logarithm of a positive definite matrix.
pub fn matlog_pd(h: &PosDefMetric) -> Hermitian {
    Hermitian::symmetrize(h.hermitian().map_eigenvalues(f64::ln))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
///
/// Hermitian inputs should go through [`geodesic`] / eigendecomposition
/// instead; this path serves nilpotent and general inputs.
pub fn matexp(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.norm();
    let mut k = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        k += 1;
    }
    let b = a * cplx(scale, 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for i in 1..=18 {
        term = &term * &b / cplx(i as f64, 0.0);
        sum += &term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}

/// Riemannian exponential at base point `H`:
/// `exp_H(S) = H^{1/2} exp(H^{-1/2} S H^{-1/2}) H^{1/2}`.
pub fn exp_at(base: &PosDefMetric, tangent: &Hermitian) -> PosDefMetric {
    let (s, si) = base.sqrt_and_inv_sqrt();
    let inner_h = Hermitian::symmetrize(&si * tangent.matrix() * &si);
    let e = inner_h.map_eigenvalues(f64::exp);
    PosDefMetric::from_hermitian_unchecked(Hermitian::symmetrize(&s * e * &s))
}

/// Riemannian logarithm at base point `H` of target `K`:
/// `log_H(K) = H^{1/2} log(H^{-1/2} K H^{-1/2}) H^{1/2}`.
pub fn log_at(base: &PosDefMetric, target: &PosDefMetric) -> Hermitian {
    let (s, si) = base.sqrt_and_inv_sqrt();
    let m = Hermitian::symmetrize(&si * target.matrix() * &si);
    let l = m.map_eigenvalues(f64::ln);
    Hermitian::symmetrize(&s * l * &s)
}

/// Invariant distance `√(Σ log² λ_i)`, `λ_i` the eigenvalues of `H₁⁻¹H₂`
/// (computed through the Hermitian pencil `H₁^{-1/2} H₂ H₁^{-1/2}`).
pub fn dist(h1: &PosDefMetric, h2: &PosDefMetric) -> f64 {
    let (_, si) = h1.sqrt_and_inv_sqrt();
    let m = Hermitian::symmetrize(&si * h2.matrix() * &si);
    let (vals, _) = m.eigen();
    vals.iter().map(|&v| v.ln().powi(2)).sum::<f64>().sqrt()
}

/// Serialization shape for complex scalars: `[re, im]`. Matrices serialize as
/// row-major nested arrays of these pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl MatrixJson {
    pub fn from_mat(m: &CMat) -> Self {
        MatrixJson(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_mat(&self) -> Result<CMat> {
        let rows = self.0.len();
        if rows == 0 {
            return Err(HbError::InvalidInput("empty matrix".into()));
        }
        let cols = self.0[0].len();
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(HbError::InvalidInput("ragged matrix rows".into()));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| {
            cplx(self.0[i][j][0], self.0[i][j][1])
        }))
    }
}

/// Random test-data helpers shared by unit and acceptance tests.
pub mod testing {
    use super::*;
    use rand::Rng;

    pub fn random_cmat<R: Rng>(rng: &mut R, n: usize) -> CMat {
        CMat::from_fn(n, n, |_, _| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Hermitian {
        Hermitian::symmetrize(random_cmat(rng, n))
    }

    /// Random positive definite matrix with eigenvalues in `[lo, hi]`.
    pub fn random_posdef<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> PosDefMetric {
        let a = random_cmat(rng, n);
        // QR of a generic matrix gives a Haar-ish unitary.
        let q = a.qr().q();
        let d = CMat::from_diagonal(&DVector::from_iterator(
            n,
            (0..n).map(|_| cplx(rng.gen_range(lo..hi), 0.0)),
        ));
        PosDefMetric::new(&q * d * q.adjoint()).expect("constructed positive definite")
    }

    /// Random invertible group element (entries O(1), determinant bounded away
    /// from zero by retry).
    pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> CMat {
        loop {
            let g = random_cmat(rng, n);
            if let Some(_) = g.clone().lu().try_inverse() {
                if g.determinant().norm() > 1e-3 {
                    return g;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&v| cplx(v, 0.0)),
        ))
    }

    #[test]
    fn act_identity_fixes_metric() {
        let h = PosDefMetric::new(diag(&[2.0, 3.0])).unwrap();
        let g = CMat::identity(2, 2);
        let out = act(&g, &h).unwrap();
        assert_eq!(out.matrix(), h.matrix());
    }

    #[test]
    fn act_diagonal_example() {
        // act(diag(2,1), I) = diag(4,1)
        let g = diag(&[2.0, 1.0]);
        let out = act(&g, &PosDefMetric::identity(2)).unwrap();
        assert_eq!(out.matrix()[(0, 0)], cplx(4.0, 0.0));
        assert_eq!(out.matrix()[(1, 1)], cplx(1.0, 0.0));
    }

    #[test]
    fn act_unitary_fixes_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            let q = testing::random_cmat(&mut rng, n).qr().q();
            let out = act(&q, &PosDefMetric::identity(n)).unwrap();
            let dev = (out.matrix() - CMat::identity(n, n)).norm();
            assert!(dev < 1e-12, "isotropy violated: {dev}");
        }
    }

    #[test]
    fn act_rejects_singular() {
        let g = CMat::zeros(2, 2);
        let err = act(&g, &PosDefMetric::identity(2)).unwrap_err();
        assert!(matches!(err, HbError::SingularGroupElement));
    }

    #[test]
    fn act_is_left_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let g1 = testing::random_invertible(&mut rng, n);
            let g2 = testing::random_invertible(&mut rng, n);
            let h = testing::random_posdef(&mut rng, n, 0.2, 5.0);
            let lhs = act(&(&g1 * &g2), &h).unwrap();
            let rhs = act(&g1, &act(&g2, &h).unwrap()).unwrap();
            let rel = (lhs.matrix() - rhs.matrix()).norm() / rhs.matrix().norm();
            assert!(rel < 1e-10, "action composition deviates: {rel}");
        }
    }

    #[test]
    fn inner_identity_examples() {
        let id = PosDefMetric::identity(3);
        let a = Hermitian::new(CMat::identity(3, 3)).unwrap();
        assert!((inner(&id, &a, &a).unwrap() - 3.0).abs() < 1e-14);

        let id2 = PosDefMetric::identity(2);
        let b = Hermitian::new(diag(&[1.0, -1.0])).unwrap();
        assert!((inner(&id2, &b, &b).unwrap() - 2.0).abs() < 1e-14);

        let z = Hermitian::zeros(2);
        assert_eq!(inner(&id2, &z, &b).unwrap(), 0.0);
    }

    #[test]
    fn inner_positive_and_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let h = testing::random_posdef(&mut rng, n, 0.2, 5.0);
            let a = testing::random_hermitian(&mut rng, n);
            if a.frobenius_norm() < 1e-10 {
                continue;
            }
            assert!(inner(&h, &a, &a).unwrap() > 0.0);

            let g = testing::random_invertible(&mut rng, n);
            let gh = act(&g, &h).unwrap();
            let push = |m: &Hermitian| Hermitian::symmetrize(&g * m.matrix() * g.adjoint());
            let b = testing::random_hermitian(&mut rng, n);
            let lhs = inner(&gh, &push(&a), &push(&b)).unwrap();
            let rhs = inner(&h, &a, &b).unwrap();
            let denom = rhs.abs().max(1.0);
            assert!(
                (lhs - rhs).abs() / denom < 1e-10,
                "invariance violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn geodesic_examples() {
        let z = Hermitian::zeros(3);
        let g0 = geodesic(&z, 2.5);
        assert!((g0.matrix() - CMat::identity(3, 3)).norm() < 1e-14);

        let a = Hermitian::new(diag(&[1.0, -1.0])).unwrap();
        let g = geodesic(&a, 2.0_f64.ln());
        assert!((g.matrix()[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((g.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);

        let d = Hermitian::new(diag(&[0.3, -1.2, 2.0])).unwrap();
        let gd = geodesic(&d, 1.0);
        for (i, &v) in [0.3f64, -1.2, 2.0].iter().enumerate() {
            assert!((gd.matrix()[(i, i)].re - v.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_is_one_parameter_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = testing::random_hermitian(&mut rng, 3);
            let s = rng.gen_range(-1.0..1.0);
            let u = rng.gen_range(-1.0..1.0);
            let lhs = geodesic(&a, s + u);
            let rhs = geodesic(&a, s).matrix() * geodesic(&a, u).matrix();
            let rel = (lhs.matrix() - &rhs).norm() / rhs.norm();
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn matlog_examples() {
        let id = PosDefMetric::identity(2);
        assert!(matlog_pd(&id).frobenius_norm() < 1e-14);

        let h = PosDefMetric::new(diag(&[1f64.exp(), 2f64.exp()])).unwrap();
        let l = matlog_pd(&h);
        assert!((l.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((l.matrix()[(1, 1)].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matexp_nilpotent_terminates() {
        let mut n = CMat::zeros(2, 2);
        n[(0, 1)] = cplx(3.0, 0.0);
        let e = matexp(&n);
        let expected = CMat::identity(2, 2) + &n;
        assert!((e - expected).norm() < 1e-14);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            // Condition numbers up to 1e6.
            let h = testing::random_posdef(&mut rng, n, 1e-3, 1e3);
            let l = matlog_pd(&h);
            let back = geodesic(&l, 1.0);
            let rel = (back.matrix() - h.matrix()).norm() / h.matrix().norm();
            assert!(rel < 1e-8, "round trip error {rel}");
        }
    }

    #[test]
    fn dist_examples_and_invariance() {
        let id = PosDefMetric::identity(2);
        assert_eq!(dist(&id, &id), 0.0);

        let h = PosDefMetric::new(diag(&[(2.0f64).exp().powi(1), 1.0])).unwrap();
        // eigenvalues of I⁻¹ diag(e²,1) are {e²,1}: dist = 2
        let h2 = PosDefMetric::new(diag(&[std::f64::consts::E.powi(2), 1.0])).unwrap();
        assert!((dist(&id, &h2) - 2.0).abs() < 1e-12);
        let _ = h;

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let n = rng.gen_range(1..=4);
            let h1 = testing::random_posdef(&mut rng, n, 0.1, 10.0);
            let h2 = testing::random_posdef(&mut rng, n, 0.1, 10.0);
            let g = testing::random_invertible(&mut rng, n);
            let d0 = dist(&h1, &h2);
            let d1 = dist(&act(&g, &h1).unwrap(), &act(&g, &h2).unwrap());
            assert!((d0 - d1).abs() < 1e-10 * d0.max(1.0), "{d0} vs {d1}");
            assert!((d0 - dist(&h2, &h1)).abs() < 1e-12 * d0.max(1.0));
        }
    }

    #[test]
    fn exp_at_log_at_inverse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let n = rng.gen_range(1..=3);
            let base = testing::random_posdef(&mut rng, n, 0.3, 3.0);
            let target = testing::random_posdef(&mut rng, n, 0.3, 3.0);
            let v = log_at(&base, &target);
            let back = exp_at(&base, &v);
            let rel = (back.matrix() - target.matrix()).norm() / target.matrix().norm();
            assert!(rel < 1e-10);
            // dist is the norm of the log.
            let d = dist(&base, &target);
            let vn = inner(&base, &v, &v).unwrap().sqrt();
            assert!((d - vn).abs() < 1e-8 * d.max(1.0));
        }
    }

    #[test]
    fn cond_guard_rejects_degenerate() {
        let h = PosDefMetric::new(diag(&[1e14, 1.0])).unwrap();
        assert!(matches!(
            h.try_inverse(),
            Err(HbError::IllConditioned { .. })
        ));
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = testing::random_cmat(&mut rng, 3);
        let j = MatrixJson::from_mat(&m);
        let text = serde_json::to_string(&j).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_mat().unwrap(), m);
    }
}
