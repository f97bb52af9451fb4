//! The explicit model metric on the punctured disk.
//!
//! On the universal cover `{x + iy : y > −log α}` of `Δ*_α` the metric is,
//! blockwise in the model's adapted flat frame,
//!
//! ```text
//!     H(x, y) = exp(x̃ N) · diag(y^{−j}) · exp(x̃ N)*,     x̃ = x / 2π,
//! ```
//!
//! with `j` the weight labels of the adapted basis. The deck step
//! `x ↦ x + 2π` then transports by exactly `exp(N)`, and `‖e_j‖² = y^{−j}`
//! at `x = 0`. The remaining freedom is the per-block scaling of the chain
//! basis, the *gauge*:
//!
//! - [`Gauge::Plain`] keeps the chain coefficients of the monodromy module
//!   (`N e_j = e_{j−2}`). Energy density is
//!   `[2(b−1)/(2π)² + b(b²−1)/3]·y⁻²` per block.
//! - [`Gauge::Harmonic`] rescales the chains so that `[N, N*] = 4π² H₀`
//!   (coefficients `2π√(q(b−q))`). This is the unique scaling for which the
//!   map is exactly harmonic; energy density is `(2/3)b(b²−1)·y⁻²` per
//!   block.
//!
//! The two gauges are congruent models of the same monodromy and agree on
//! equivariance and the norm profile; which one is active is part of the
//! convention record. Reading the diagonal exponents ascending
//! ([`DiagConvention::AscendingLiteral`]) makes the energy density grow like
//! `y²` and the total energy diverge; it is kept as a negative control.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HbError, Result};
use crate::mats::{act, cplx, CMat, Hermitian, PosDefMetric};
use crate::monodromy::{
    log_unipotent, sl2_triple, NilpotentLog, Sl2Data, Sl2Json, UnipotentMonodromy,
};

/// Chain-basis scaling of the model frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Reference coefficients `N e_j = e_{j−2}`; reproduces the reference
    /// energy closed form, not exactly harmonic.
    Plain,
    /// Coefficients `2π√(q(b−q))`; exactly harmonic.
    Harmonic,
}

/// Direction of the diagonal exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagConvention {
    /// `‖e_j‖² = y^{−j}`: finite energy.
    Descending,
    /// The literal ascending reading `y^{+j}`: divergent energy, negative
    /// control only.
    AscendingLiteral,
}

/// A point of the punctured-disk cover: angular `x`, height `y = −log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuncturedPoint {
    pub x: f64,
    pub y: f64,
}

impl PuncturedPoint {
    pub fn from_xr(x: f64, r: f64) -> Self {
        PuncturedPoint { x, y: -r.ln() }
    }

    pub fn radius(&self) -> f64 {
        (-self.y).exp()
    }
}

/// The model (initial) metric attached to sl2 data on `Δ*_α`.
#[derive(Debug, Clone)]
pub struct ModelMetric {
    sl2: Sl2Data,
    alpha: f64,
    gauge: Gauge,
    diag: DiagConvention,
    /// Block sizes, descending.
    sizes: Vec<usize>,
    /// Weight label per model-frame column.
    labels: Vec<i64>,
    /// Model-frame shift: block-diagonal, `n_shift[(p, p+1)] = β_{p+1}`.
    n_shift: CMat,
}

impl ModelMetric {
    pub fn new(sl2: Sl2Data, alpha: f64, gauge: Gauge, diag: DiagConvention) -> Result<Self> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(HbError::InvalidInput("alpha must lie in (0,1)".into()));
        }
        let sizes: Vec<usize> = sl2.blocks.iter().map(|b| b.size).collect();
        let labels = sl2.labels_flat();
        let n = labels.len();
        let mut n_shift = CMat::zeros(n, n);
        for b in &sl2.blocks {
            let s = b.size;
            for q in 1..s {
                let beta = match gauge {
                    Gauge::Plain => 1.0,
                    Gauge::Harmonic => 2.0 * PI * ((q * (s - q)) as f64).sqrt(),
                };
                let col = b.cols.start + q;
                n_shift[(col - 1, col)] = cplx(beta, 0.0);
            }
        }
        Ok(ModelMetric {
            sl2,
            alpha,
            gauge,
            diag,
            sizes,
            labels,
            n_shift,
        })
    }

    /// Model for a unipotent monodromy, default conventions
    /// (harmonic gauge, descending diagonal).
    pub fn from_monodromy(gamma: &UnipotentMonodromy, alpha: f64) -> Result<Self> {
        let log = log_unipotent(gamma)?;
        let sl2 = sl2_triple(&log)?;
        Self::new(sl2, alpha, Gauge::Harmonic, DiagConvention::Descending)
    }

    pub fn from_nilpotent(log: &NilpotentLog, alpha: f64, gauge: Gauge) -> Result<Self> {
        let sl2 = sl2_triple(log)?;
        Self::new(sl2, alpha, gauge, DiagConvention::Descending)
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn diag_convention(&self) -> DiagConvention {
        self.diag
    }

    pub fn sl2(&self) -> &Sl2Data {
        &self.sl2
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn y_min(&self) -> f64 {
        -self.alpha.ln()
    }

    /// The model-frame monodromy log (scaled shift).
    pub fn n_shift(&self) -> &CMat {
        &self.n_shift
    }

    /// Deck transport `γ = exp(N)` in the model frame.
    pub fn twist(&self) -> CMat {
        exp_shift(&self.n_shift, 1.0)
    }

    fn check_domain(&self, p: PuncturedPoint) -> Result<()> {
        let y_min = self.y_min();
        if !(p.y > y_min) {
            return Err(HbError::OutsideChart { y: p.y, y_min });
        }
        Ok(())
    }

    /// Diagonal exponent of column `c`: `−j` descending, `+j` ascending.
    fn diag_exponent(&self, c: usize) -> f64 {
        match self.diag {
            DiagConvention::Descending => -(self.labels[c] as f64),
            DiagConvention::AscendingLiteral => self.labels[c] as f64,
        }
    }

    /// `H(x, y) = exp(x̃N) diag(y^{d_j}) exp(x̃N)*` in the model frame.
    pub fn eval(&self, p: PuncturedPoint) -> Result<PosDefMetric> {
        self.check_domain(p)?;
        let n = self.dim();
        let g = exp_shift(&self.n_shift, p.x / (2.0 * PI));
        let mut gd = g.clone();
        for c in 0..n {
            let d = p.y.powf(self.diag_exponent(c));
            for r in 0..n {
                gd[(r, c)] *= cplx(d, 0.0);
            }
        }
        // H = (G D) G*; positivity is structural (Cholesky-type factor).
        let h = &gd * g.adjoint();
        Ok(PosDefMetric::from_hermitian_unchecked(
            Hermitian::symmetrize(h),
        ))
    }

    /// `H⁻¹ ∂H/∂x` and `H⁻¹ ∂H/∂y`, analytically in the model frame.
    ///
    /// With `M = G^{-*} N G*` and `A` the diagonal-exponent generator:
    /// `H⁻¹H_x = κ (y^{−2σ} M + N*)`, `H⁻¹H_y = (1/y) G^{-*} A G*`,
    /// where `σ = +1` descending, `−1` ascending, `κ = 1/2π`.
    pub fn log_derivatives(&self, p: PuncturedPoint) -> Result<(CMat, CMat)> {
        self.check_domain(p)?;
        let n = self.dim();
        let kappa = 1.0 / (2.0 * PI);
        let x_t = p.x / (2.0 * PI);
        let g_star = exp_shift(&self.n_shift, x_t).adjoint();
        let g_inv_star = exp_shift(&self.n_shift, -x_t).adjoint();
        let sigma = match self.diag {
            DiagConvention::Descending => 1.0,
            DiagConvention::AscendingLiteral => -1.0,
        };
        let m = &g_inv_star * &self.n_shift * &g_star;
        let hx =
            (m * cplx(p.y.powf(-2.0 * sigma), 0.0) + self.n_shift.adjoint()) * cplx(kappa, 0.0);
        let mut a = CMat::zeros(n, n);
        for c in 0..n {
            a[(c, c)] = cplx(self.diag_exponent(c), 0.0);
        }
        let hy = &g_inv_star * a * &g_star * cplx(1.0 / p.y, 0.0);
        Ok((hx, hy))
    }

    /// Flat-cylinder energy density `e = tr((H⁻¹H_x)²) + tr((H⁻¹H_y)²)`.
    pub fn energy_density(&self, p: PuncturedPoint) -> Result<f64> {
        let (hx, hy) = self.log_derivatives(p)?;
        Ok(((&hx * &hx).trace() + (&hy * &hy).trace()).re)
    }

    /// Exact per-block closed form of the energy density times `y²`
    /// (descending diagonal only; the ascending control has no finite form).
    pub fn energy_density_coefficient(&self) -> f64 {
        self.sizes
            .iter()
            .map(|&b| {
                let b = b as f64;
                let y_term = b * (b * b - 1.0) / 3.0;
                let x_term = match self.gauge {
                    Gauge::Plain => 2.0 * (b - 1.0) / (4.0 * PI * PI),
                    Gauge::Harmonic => b * (b * b - 1.0) / 3.0,
                };
                x_term + y_term
            })
            .sum()
    }

    /// Closed-form total energy over `[0,2π] × [y0, ∞)`:
    /// `2π · Σ_blocks c_b / y0`.
    pub fn total_energy_closed_form(&self, y0: f64) -> f64 {
        2.0 * PI * self.energy_density_coefficient() / y0
    }

    /// Norm profile at `x = 0`: `(label j, ‖e_j‖²)` per adapted vector.
    pub fn norm_profile(&self, y: f64) -> Result<Vec<(i64, f64)>> {
        let h = self.eval(PuncturedPoint { x: 0.0, y })?;
        Ok(self
            .labels
            .iter()
            .enumerate()
            .map(|(c, &j)| (j, h.matrix()[(c, c)].re))
            .collect())
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            sl2: self.sl2.to_json(),
            alpha: self.alpha,
            convention: ConventionRecord {
                d: match self.diag {
                    DiagConvention::Descending => "descending".into(),
                    DiagConvention::AscendingLiteral => "ascending_literal".into(),
                },
                angular: "x/2pi".into(),
                gauge: self.gauge,
            },
        }
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let n_mat = json.sl2.n_matrix.to_mat()?;
        let log = NilpotentLog::from_matrix(n_mat)?;
        let sl2 = sl2_triple(&log)?;
        let diag = match json.convention.d.as_str() {
            "descending" => DiagConvention::Descending,
            "ascending_literal" => DiagConvention::AscendingLiteral,
            other => {
                return Err(HbError::InvalidInput(format!(
                    "unknown diagonal convention {other:?}"
                )))
            }
        };
        Self::new(sl2, json.alpha, json.convention.gauge, diag)
    }
}

/// `model.json` payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub sl2: Sl2Json,
    pub alpha: f64,
    pub convention: ConventionRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionRecord {
    pub d: String,
    pub angular: String,
    pub gauge: Gauge,
}

/// `exp(t·S)` for a strictly upper-triangular block shift: terminating series.
fn exp_shift(shift: &CMat, t: f64) -> CMat {
    let n = shift.nrows();
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..n {
        term = &term * shift * cplx(t / k as f64, 0.0);
        if term.iter().all(|z| z.norm_sqr() == 0.0) {
            break;
        }
        sum += &term;
    }
    sum
}

/// Max relative deviation of `H(x+2π, y)` against `act(exp(N), H(x, y))`
/// over the given samples.
pub fn check_equivariance(model: &ModelMetric, samples: &[PuncturedPoint]) -> Result<f64> {
    let twist = model.twist();
    let mut worst: f64 = 0.0;
    for &p in samples {
        let h = model.eval(p)?;
        let shifted = model.eval(PuncturedPoint {
            x: p.x + 2.0 * PI,
            y: p.y,
        })?;
        let expected = act(&twist, &h)?;
        let rel = (shifted.matrix() - expected.matrix()).norm() / expected.matrix().norm();
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Quadrature controls for [`total_energy`].
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    /// Analytic tail beyond this height.
    pub y_cutoff: f64,
    /// Simpson panels on the substituted variable `u = 1/y`.
    pub panels: usize,
    /// Angular sample count (density is x-independent; a few suffice).
    pub x_samples: usize,
    /// Relative step for the finite-difference density.
    pub fd_step: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            y_cutoff: 1e4,
            panels: 256,
            x_samples: 4,
            fd_step: 1e-5,
        }
    }
}

/// Finite-difference energy density at a point: first derivatives of the
/// evaluated metric, independent of the analytic formulas.
pub fn energy_density_fd(model: &ModelMetric, p: PuncturedPoint, rel_step: f64) -> Result<f64> {
    let hx_step = rel_step * 2.0 * PI;
    let hy_step = rel_step * p.y;
    let h = model.eval(p)?;
    let hinv = h
        .matrix()
        .clone()
        .try_inverse()
        .ok_or(HbError::NotPositiveDefinite)?;
    let dx = (model
        .eval(PuncturedPoint {
            x: p.x + hx_step,
            y: p.y,
        })?
        .matrix()
        - model
            .eval(PuncturedPoint {
                x: p.x - hx_step,
                y: p.y,
            })?
            .matrix())
        / cplx(2.0 * hx_step, 0.0);
    let dy = (model
        .eval(PuncturedPoint {
            x: p.x,
            y: p.y + hy_step,
        })?
        .matrix()
        - model
            .eval(PuncturedPoint {
                x: p.x,
                y: p.y - hy_step,
            })?
            .matrix())
        / cplx(2.0 * hy_step, 0.0);
    let ax = &hinv * dx;
    let ay = &hinv * dy;
    Ok(((&ax * &ax).trace() + (&ay * &ay).trace()).re)
}

/// Numerical total energy over `[0,2π] × [y0, ∞)`, tail integrated
/// analytically past `quad.y_cutoff` using the exact `y⁻²` law.
///
/// Uses the finite-difference density so the comparison against
/// [`ModelMetric::total_energy_closed_form`] exercises the full pipeline.
pub fn total_energy(model: &ModelMetric, y0: f64, quad: &QuadratureSpec) -> Result<f64> {
    if matches!(model.diag_convention(), DiagConvention::AscendingLiteral) {
        return Err(HbError::InvalidInput(
            "ascending diagonal has divergent energy; use total_energy_truncated".into(),
        ));
    }
    if y0 <= model.y_min() {
        return Err(HbError::OutsideChart {
            y: y0,
            y_min: model.y_min(),
        });
    }
    let mean_density = |y: f64| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..quad.x_samples {
            let x = 2.0 * PI * (i as f64 + 0.5) / quad.x_samples as f64;
            acc += energy_density_fd(model, PuncturedPoint { x, y }, quad.fd_step)?;
        }
        Ok(acc / quad.x_samples as f64)
    };

    // ∫_{y0}^{Y} e dy = ∫_{1/Y}^{1/y0} e(1/u) u^{-2} du, Simpson.
    let u_lo = 1.0 / quad.y_cutoff;
    let u_hi = 1.0 / y0;
    let m = quad.panels * 2;
    let du = (u_hi - u_lo) / m as f64;
    let mut integral = 0.0;
    for i in 0..=m {
        let u = u_lo + i as f64 * du;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let y = 1.0 / u;
        integral += w * mean_density(y)? * y * y;
    }
    integral *= du / 3.0;

    // Tail: e ~ c/y² beyond the cutoff, so ∫_Y^∞ e dy = e(Y)·Y.
    let tail = mean_density(quad.y_cutoff)? * quad.y_cutoff;
    Ok(2.0 * PI * (integral + tail))
}

/// Numerical energy over the truncated cylinder `[0,2π] × [y0, y1]`; used by
/// the ascending-diagonal divergence control.
pub fn total_energy_truncated(
    model: &ModelMetric,
    y0: f64,
    y1: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let m = quad.panels * 2;
    let dy = (y1 - y0) / m as f64;
    let mut integral = 0.0;
    for i in 0..=m {
        let y = y0 + i as f64 * dy;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let mut acc = 0.0;
        for k in 0..quad.x_samples {
            let x = 2.0 * PI * (k as f64 + 0.5) / quad.x_samples as f64;
            acc += model.energy_density(PuncturedPoint { x, y })?;
        }
        integral += w * acc / quad.x_samples as f64;
    }
    Ok(2.0 * PI * integral * dy / 3.0)
}

/// Sup over an `n×n` window grid of the nested centered-difference residual
/// `‖∂_x(H⁻¹H_x) + ∂_y(H⁻¹H_y)‖_F`.
///
/// The window is fixed so refinement studies see a second-order trend.
pub fn harmonicity_residual(model: &ModelMetric, grid_n: usize, window: (f64, f64)) -> Result<f64> {
    let (y_lo, y_hi) = window;
    let nx = grid_n;
    let ny = grid_n;
    let dx = 2.0 * PI / nx as f64;
    let dy = (y_hi - y_lo) / (ny - 1) as f64;
    let dim = model.dim();

    // A = (H⁻¹H_x, H⁻¹H_y) by centered differences on an extended grid
    // (one ghost column/row each side), then R by centered differences of A.
    let mut ax = vec![CMat::zeros(dim, dim); (nx + 2) * (ny + 2)];
    let mut ay = vec![CMat::zeros(dim, dim); (nx + 2) * (ny + 2)];
    let idx = |i: usize, k: usize| i * (ny + 2) + k;
    for i in 0..nx + 2 {
        for k in 0..ny + 2 {
            let x = (i as f64 - 1.0) * dx;
            let y = y_lo + (k as f64 - 1.0) * dy;
            let h = model.eval(PuncturedPoint { x, y })?;
            let hinv = h
                .matrix()
                .clone()
                .try_inverse()
                .ok_or(HbError::NotPositiveDefinite)?;
            let hxp = model.eval(PuncturedPoint { x: x + dx, y })?;
            let hxm = model.eval(PuncturedPoint { x: x - dx, y })?;
            let hyp = model.eval(PuncturedPoint { x, y: y + dy })?;
            let hym = model.eval(PuncturedPoint { x, y: y - dy })?;
            ax[idx(i, k)] = &hinv * ((hxp.matrix() - hxm.matrix()) / cplx(2.0 * dx, 0.0));
            ay[idx(i, k)] = &hinv * ((hyp.matrix() - hym.matrix()) / cplx(2.0 * dy, 0.0));
        }
    }
    let mut sup: f64 = 0.0;
    for i in 1..nx + 1 {
        for k in 1..ny + 1 {
            let rx = (&ax[idx(i + 1, k)] - &ax[idx(i - 1, k)]) / cplx(2.0 * dx, 0.0);
            let ry = (&ay[idx(i, k + 1)] - &ay[idx(i, k - 1)]) / cplx(2.0 * dy, 0.0);
            sup = sup.max((rx + ry).norm());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mats::dist;
    use crate::monodromy::partitions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(profile: &[usize], gauge: Gauge) -> ModelMetric {
        let log = NilpotentLog::canonical(profile);
        ModelMetric::from_nilpotent(&log, 0.5, gauge).unwrap()
    }

    #[test]
    fn trivial_block_is_constant_one() {
        let m = model(&[1], Gauge::Harmonic);
        let h = m.eval(PuncturedPoint { x: 1.3, y: 7.0 }).unwrap();
        assert_eq!(h.matrix()[(0, 0)], cplx(1.0, 0.0));
        assert_eq!(
            m.energy_density(PuncturedPoint { x: 0.0, y: 5.0 }).unwrap(),
            0.0
        );
    }

    #[test]
    fn rank2_diagonal_profile_at_x0() {
        for gauge in [Gauge::Plain, Gauge::Harmonic] {
            let m = model(&[2], gauge);
            let y = std::f64::consts::E;
            let h = m.eval(PuncturedPoint { x: 0.0, y }).unwrap();
            assert!((h.matrix()[(0, 0)].re - y).abs() < 1e-14);
            assert!((h.matrix()[(1, 1)].re - 1.0 / y).abs() < 1e-14);
            assert!(h.matrix()[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn rank2_closed_form_general_x() {
        // H = exp(x̃N) diag(y, 1/y) exp(x̃N)^T = [[y + x̃²/y, x̃/y], [x̃/y, 1/y]].
        let m = model(&[2], Gauge::Plain);
        let (x, y) = (1.7, 9.0);
        let xt = x / (2.0 * PI);
        let h = m.eval(PuncturedPoint { x, y }).unwrap();
        assert!((h.matrix()[(0, 0)].re - (y + xt * xt / y)).abs() < 1e-12);
        assert!((h.matrix()[(0, 1)].re - xt / y).abs() < 1e-14);
        assert!((h.matrix()[(1, 1)].re - 1.0 / y).abs() < 1e-14);
    }

    #[test]
    fn outside_chart_rejected() {
        let m = model(&[2], Gauge::Harmonic);
        let err = m.eval(PuncturedPoint { x: 0.0, y: 0.3 }).unwrap_err();
        assert!(matches!(err, HbError::OutsideChart { .. }));
    }

    #[test]
    fn equivariance_all_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=5 {
            for profile in partitions(n) {
                for gauge in [Gauge::Plain, Gauge::Harmonic] {
                    let m = model(&profile, gauge);
                    let samples: Vec<PuncturedPoint> = (0..40)
                        .map(|_| PuncturedPoint {
                            x: rng.gen_range(-3.0..3.0),
                            y: rng.gen_range(1.0..50.0),
                        })
                        .collect();
                    let dev = check_equivariance(&m, &samples).unwrap();
                    assert!(dev < 1e-12, "profile {profile:?} {gauge:?}: {dev}");
                }
            }
        }
    }

    #[test]
    fn energy_density_closed_forms() {
        // b=2 plain at y=10: (2/(2π)² + 2)/100.
        let m2 = model(&[2], Gauge::Plain);
        let e = m2
            .energy_density(PuncturedPoint { x: 0.77, y: 10.0 })
            .unwrap();
        let expected = (2.0 / (4.0 * PI * PI) + 2.0) / 100.0;
        assert!(
            (e - expected).abs() < 1e-14 * expected.max(1.0),
            "{e} vs {expected}"
        );

        // b=3 plain at y=10: (4/(2π)² + 8)/100.
        let m3 = model(&[3], Gauge::Plain);
        let e3 = m3
            .energy_density(PuncturedPoint { x: -2.0, y: 10.0 })
            .unwrap();
        let expected3 = (4.0 / (4.0 * PI * PI) + 8.0) / 100.0;
        assert!((e3 - expected3).abs() < 1e-13, "{e3} vs {expected3}");

        // Harmonic gauge: 2b(b²−1)/3 · y⁻².
        let h3 = model(&[3], Gauge::Harmonic);
        let eh = h3
            .energy_density(PuncturedPoint { x: 0.3, y: 10.0 })
            .unwrap();
        let expectedh = 2.0 * 8.0 / 100.0;
        assert!((eh - expectedh).abs() < 1e-11, "{eh} vs {expectedh}");
    }

    #[test]
    fn energy_density_x_independent() {
        for gauge in [Gauge::Plain, Gauge::Harmonic] {
            let m = model(&[3, 2], gauge);
            let base = m
                .energy_density(PuncturedPoint { x: 0.0, y: 12.0 })
                .unwrap();
            let mut max_var: f64 = 0.0;
            for i in 0..32 {
                let x = -6.0 + 12.0 * i as f64 / 31.0;
                let e = m.energy_density(PuncturedPoint { x, y: 12.0 }).unwrap();
                max_var = max_var.max((e - base).abs());
            }
            assert!(max_var < 1e-12 * base.max(1.0), "variation {max_var}");
        }
    }

    #[test]
    fn fd_density_matches_analytic() {
        let m = model(&[3], Gauge::Harmonic);
        let p = PuncturedPoint { x: 1.1, y: 8.0 };
        let fd = energy_density_fd(&m, p, 1e-5).unwrap();
        let an = m.energy_density(p).unwrap();
        assert!((fd - an).abs() < 1e-7 * an, "{fd} vs {an}");
    }

    #[test]
    fn total_energy_matches_closed_form() {
        for profile in [vec![2usize], vec![3]] {
            for gauge in [Gauge::Plain, Gauge::Harmonic] {
                let m = model(&profile, gauge);
                let y0 = 10.0;
                let numeric = total_energy(&m, y0, &QuadratureSpec::default()).unwrap();
                let closed = m.total_energy_closed_form(y0);
                let rel = (numeric - closed).abs() / closed;
                assert!(rel < 5e-3, "profile {profile:?} {gauge:?}: rel {rel}");
            }
        }
    }

    #[test]
    fn ascending_literal_diverges_under_domain_extension() {
        let log = NilpotentLog::canonical(&[2]);
        let sl2 = sl2_triple(&log).unwrap();
        let m = ModelMetric::new(sl2, 0.5, Gauge::Plain, DiagConvention::AscendingLiteral).unwrap();
        let quad = QuadratureSpec {
            panels: 128,
            ..Default::default()
        };
        let e1 = total_energy_truncated(&m, 5.0, 100.0, &quad).unwrap();
        let e2 = total_energy_truncated(&m, 5.0, 1000.0, &quad).unwrap();
        // Density grows like y², so a 10× taller domain has ~1000× the energy.
        assert!(e2 / e1 > 100.0, "no divergence growth: {e1} -> {e2}");
        assert!(total_energy(&m, 5.0, &quad).is_err());
    }

    #[test]
    fn harmonic_gauge_residual_refines_to_zero() {
        let m = model(&[2], Gauge::Harmonic);
        let window = (5.0, 12.0);
        let r32 = harmonicity_residual(&m, 32, window).unwrap();
        let r64 = harmonicity_residual(&m, 64, window).unwrap();
        let r128 = harmonicity_residual(&m, 128, window).unwrap();
        let order1 = (r32 / r64).log2();
        let order2 = (r64 / r128).log2();
        assert!(
            order1 >= 1.8 && order2 >= 1.8,
            "orders {order1:.2}, {order2:.2} (residuals {r32:.3e} {r64:.3e} {r128:.3e})"
        );
    }

    #[test]
    fn plain_gauge_residual_does_not_vanish() {
        // Negative control: the plain scaling is not harmonic; the residual
        // converges to the nonzero continuum tension instead of zero.
        let m = model(&[2], Gauge::Plain);
        let window = (5.0, 12.0);
        let r64 = harmonicity_residual(&m, 64, window).unwrap();
        let r128 = harmonicity_residual(&m, 128, window).unwrap();
        assert!(
            r128 > 1e-4,
            "plain-gauge residual unexpectedly small: {r128}"
        );
        assert!(r64 / r128 < 1.5, "should converge to a constant, not zero");
    }

    #[test]
    fn norm_profile_examples() {
        let m2 = model(&[2], Gauge::Harmonic);
        let prof = m2.norm_profile(100.0).unwrap();
        assert_eq!(prof.len(), 2);
        assert_eq!(prof[0].0, -1);
        assert!((prof[0].1 - 100.0).abs() < 1e-10);
        assert_eq!(prof[1].0, 1);
        assert!((prof[1].1 - 0.01).abs() < 1e-14);

        let m3 = model(&[3], Gauge::Plain);
        let prof3 = m3.norm_profile(10.0).unwrap();
        let expected = [(-2, 100.0), (0, 1.0), (2, 0.01)];
        for ((j, v), (je, ve)) in prof3.iter().zip(expected.iter()) {
            assert_eq!(*j, *je);
            assert!((v - ve).abs() < 1e-10 * ve.max(1.0));
        }
    }

    #[test]
    fn positive_definite_up_to_y_1e6() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = model(&[3, 2], Gauge::Harmonic);
        for _ in 0..10_000 {
            let p = PuncturedPoint {
                x: rng.gen_range(-10.0..10.0),
                y: 10f64.powf(rng.gen_range(0.0..6.0)).max(1.0),
            };
            let h = m.eval(p).unwrap();
            // Positivity is structural: H = (GD^{1/2})(GD^{1/2})*. Check
            // finiteness always; eigenvalues where conditioning allows.
            assert!(h
                .matrix()
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite()));
            if p.y < 1e3 {
                let (vals, _) = h.hermitian().eigen();
                assert!(vals.iter().all(|&v| v > 0.0), "non-PD at y={}", p.y);
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = model(&[2, 1], Gauge::Harmonic);
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let parsed: ModelJson = serde_json::from_str(&text).unwrap();
        let m2 = ModelMetric::from_json(&parsed).unwrap();
        assert_eq!(m2.gauge(), Gauge::Harmonic);
        assert_eq!(m2.labels(), m.labels());
        let p = PuncturedPoint { x: 0.9, y: 6.0 };
        assert!(dist(&m.eval(p).unwrap(), &m2.eval(p).unwrap()) < 1e-12);
    }
}
