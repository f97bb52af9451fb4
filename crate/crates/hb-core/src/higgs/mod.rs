//! Higgs field extraction, residues, and operator-level Kähler identities.
//!
//! In the flat frame the Higgs field of a metric `H` is
//! `θ = θ_z dz` with `θ_z = −½ H⁻¹ ∂_z H`, the side and constant fixed by the
//! Simpson decomposition `θ = (d' − δ')/2` (the metric connection has
//! `(1,0)`-coefficient `H⁻¹∂_zH`). The opposite side `−½(∂_zH)H⁻¹` is kept as
//! a negative control: on the model it violates the L² bound by a factor
//! growing like `y²`.
//!
//! For the model metric, `t·θ_t = −i·θ_z(x, y)` is a polynomial in `1/y` at
//! `x = 0` with constant term `(i/8π)·N*`; the residue operation recovers it
//! by Neville extrapolation over a `y`-ladder.

pub mod quad;

use serde::Serialize;

use crate::error::{HbError, Result};
use crate::flow::GridMap;
use crate::mats::{cplx, CMat, C64};
use crate::model::{ModelMetric, PuncturedPoint};
use crate::monodromy::jordan_profile_f64;

/// Which side of the metric the `∂H` factor multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HiggsConvention {
    /// Default `θ_z = −½ H⁻¹ ∂_z H` (L²-bounded on the model).
    RightInverse,
    /// Negative control `θ_z = −½ (∂_z H) H⁻¹` (unbounded on the model).
    LeftInverse,
}

/// Sampled End-valued `(1,0)`-form coefficient in the flat frame.
#[derive(Debug, Clone)]
pub struct HiggsField {
    pub nx: usize,
    pub ny: usize,
    pub y0: f64,
    pub y1: f64,
    pub convention: HiggsConvention,
    /// `θ_z` samples, index `i·ny + k`.
    pub samples: Vec<CMat>,
}

impl HiggsField {
    pub fn get(&self, i: usize, k: usize) -> &CMat {
        &self.samples[i * self.ny + k]
    }
}

/// Pointwise `θ_z` of the model, from the analytic frame derivatives.
pub fn higgs_at_model(
    model: &ModelMetric,
    p: PuncturedPoint,
    convention: HiggsConvention,
) -> Result<CMat> {
    let (hx, hy) = model.log_derivatives(p)?;
    // H⁻¹ ∂_z H = ½(H⁻¹H_x − i·H⁻¹H_y)
    let right = (&hx - &hy * cplx(0.0, 1.0)) * cplx(0.5, 0.0);
    match convention {
        HiggsConvention::RightInverse => Ok(right * cplx(-0.5, 0.0)),
        HiggsConvention::LeftInverse => {
            // (∂_z H) H⁻¹ = H (H⁻¹∂_zH) H⁻¹
            let h = model.eval(p)?;
            let hinv = h
                .matrix()
                .clone()
                .try_inverse()
                .ok_or(HbError::NotPositiveDefinite)?;
            Ok(h.matrix() * right * hinv * cplx(-0.5, 0.0))
        }
    }
}

/// Extracts `θ_z` on a grid sampled from the model (analytic derivatives).
pub fn extract_higgs_model(
    model: &ModelMetric,
    nx: usize,
    ny: usize,
    y0: f64,
    y1: f64,
    convention: HiggsConvention,
) -> Result<HiggsField> {
    let mut samples = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
        for k in 0..ny {
            let y = y0 + (y1 - y0) * k as f64 / (ny - 1) as f64;
            samples.push(higgs_at_model(model, PuncturedPoint { x, y }, convention)?);
        }
    }
    Ok(HiggsField {
        nx,
        ny,
        y0,
        y1,
        convention,
        samples,
    })
}

/// Extracts `θ_z` from grid samples by centered differences (one-sided at the
/// Dirichlet rows), twist-aware across the seam.
pub fn extract_higgs_grid(g: &GridMap, convention: HiggsConvention) -> Result<HiggsField> {
    let (dx, dy) = (g.dx(), g.dy());
    let mut samples = Vec::with_capacity(g.nx * g.ny);
    for i in 0..g.nx {
        for k in 0..g.ny {
            let h = g.get(i, k);
            let hx = (g.x_neighbor(i, k, 1).matrix() - g.x_neighbor(i, k, -1).matrix())
                / cplx(2.0 * dx, 0.0);
            let hy = if k == 0 {
                (g.get(i, 1).matrix() * cplx(4.0, 0.0)
                    - g.get(i, 2).matrix()
                    - g.get(i, 0).matrix() * cplx(3.0, 0.0))
                    / cplx(2.0 * dy, 0.0)
            } else if k == g.ny - 1 {
                (g.get(i, k).matrix() * cplx(3.0, 0.0) - g.get(i, k - 1).matrix() * cplx(4.0, 0.0)
                    + g.get(i, k - 2).matrix())
                    / cplx(2.0 * dy, 0.0)
            } else {
                (g.get(i, k + 1).matrix() - g.get(i, k - 1).matrix()) / cplx(2.0 * dy, 0.0)
            };
            let dz = (hx - hy * cplx(0.0, 1.0)) * cplx(0.5, 0.0);
            let theta = match convention {
                HiggsConvention::RightInverse => h.try_inverse()? * dz * cplx(-0.5, 0.0),
                HiggsConvention::LeftInverse => dz * h.try_inverse()? * cplx(-0.5, 0.0),
            };
            samples.push(theta);
        }
    }
    Ok(HiggsField {
        nx: g.nx,
        ny: g.ny,
        y0: g.y0,
        y1: g.y1,
        convention,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidueReport {
    /// Extrapolated `lim t·θ_t`.
    pub residue: Vec<Vec<[f64; 2]>>,
    /// Best-fit complex scale against the reference conjugate of `N`.
    pub scale: [f64; 2],
    /// Relative deviation `‖R − scale·N*‖/‖R‖`.
    pub rel_deviation: f64,
    /// Jordan profile of the extrapolated residue.
    pub profile: Vec<usize>,
    pub ladder: Vec<f64>,
    /// Extrapolation stability: change from dropping the coarsest rung.
    pub stability: f64,
}

/// Entrywise Neville extrapolation to `u = 0` of matrices sampled at
/// `u_i = 1/y_i`.
fn neville_extrapolate(ys: &[f64], mats: &[CMat]) -> CMat {
    let m = ys.len();
    let us: Vec<f64> = ys.iter().map(|&y| 1.0 / y).collect();
    let mut table: Vec<CMat> = mats.to_vec();
    for level in 1..m {
        for i in 0..m - level {
            let num = table[i + 1].clone() * cplx(us[i], 0.0)
                - table[i].clone() * cplx(us[i + level], 0.0);
            table[i] = num / cplx(us[i] - us[i + level], 0.0);
        }
    }
    table[0].clone()
}

/// Residue `R = lim_{y→∞} t·θ_t = lim −i·θ_z(0, y)` of the model's Higgs
/// field, Richardson/Neville-extrapolated over the ladder.
///
/// Verifies nilpotency (profile equality is the caller's check) and reports
/// the proportionality to the reference `N*` in the model frame.
pub fn residue_model(model: &ModelMetric, ladder: &[f64]) -> Result<ResidueReport> {
    if ladder.len() < 3 {
        return Err(HbError::NoResidueLimit("ladder needs ≥ 3 rungs".into()));
    }
    let samples: Result<Vec<CMat>> = ladder
        .iter()
        .map(|&y| {
            Ok(
                higgs_at_model(model, PuncturedPoint { x: 0.0, y }, HiggsConvention::RightInverse)?
                    * cplx(0.0, -1.0),
            )
        })
        .collect();
    let samples = samples?;
    let full = neville_extrapolate(ladder, &samples);
    let dropped = neville_extrapolate(&ladder[1..], &samples[1..]);
    let stability = (&full - &dropped).norm() / full.norm().max(1e-300);
    if stability > 1e-3 {
        return Err(HbError::NoResidueLimit(format!(
            "extrapolation unstable: dropping a rung moves the limit by {stability:.3e}"
        )));
    }
    let reference = model.n_shift().adjoint();
    let denom = reference.norm().powi(2);
    let scale: C64 = if denom > 0.0 {
        // Frobenius projection ⟨R, ref⟩ / ⟨ref, ref⟩.
        let mut acc = cplx(0.0, 0.0);
        for (a, b) in full.iter().zip(reference.iter()) {
            acc += a * b.conj();
        }
        acc / cplx(denom, 0.0)
    } else {
        cplx(0.0, 0.0)
    };
    let rel_deviation = if full.norm() > 0.0 {
        (&full - &reference * scale).norm() / full.norm()
    } else {
        0.0
    };
    let profile = jordan_profile_f64(&full, 1e-8);
    Ok(ResidueReport {
        residue: crate::mats::MatrixJson::from_mat(&full).0,
        scale: [scale.re, scale.im],
        rel_deviation,
        profile,
        ladder: ladder.to_vec(),
        stability,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HiggsNormReport {
    pub convention: HiggsConvention,
    /// `sup |θ|_{ω,h}` over the sampled region.
    pub sup_norm: f64,
    /// Per-y-level sup of `|θ|` (log-spaced ladder).
    pub levels: Vec<(f64, f64)>,
    /// Fitted growth exponent p in `sup|θ|(y) ~ y^p` over the upper half.
    pub growth_exponent: f64,
    /// `∫‖θ s‖²` for unit-L²-norm test sections (integral reading).
    pub section_norms: Vec<f64>,
    /// Finite and non-increasing beyond `2·y0`.
    pub pass: bool,
}

/// Lemma-1 check: `|θ|_{ω,h} = ‖θ_z‖_h · |dz|_ω` with `|dz|_ω = y`, computed
/// in the metric-unitary frame by exact diagonal scaling (stable at large y).
pub fn higgs_norm_check(
    model: &ModelMetric,
    convention: HiggsConvention,
    y0: f64,
    y_max: f64,
    n_levels: usize,
) -> Result<HiggsNormReport> {
    let n = model.dim();
    let labels = model.labels();
    let mut levels = Vec::new();
    let mut sup: f64 = 0.0;
    for li in 0..n_levels {
        let t = li as f64 / (n_levels - 1) as f64;
        let y = y0 * (y_max / y0).powf(t);
        let mut level_sup: f64 = 0.0;
        for xi in 0..8 {
            let x = 2.0 * std::f64::consts::PI * xi as f64 / 8.0;
            let p = PuncturedPoint { x, y };
            let theta = higgs_at_model(model, p, convention)?;
            // Unitary-frame operator: W θ W⁻¹ with W = D^{1/2} G*;
            // conjugate by G* first (bounded), then scale entries by
            // y^{(j_col − j_row)/2} (descending convention d = −j).
            let xt = x / (2.0 * std::f64::consts::PI);
            let g_star = crate::mats::matexp(&(model.n_shift() * cplx(xt, 0.0))).adjoint();
            let g_inv_star = crate::mats::matexp(&(model.n_shift() * cplx(-xt, 0.0))).adjoint();
            let mid = &g_star * theta * &g_inv_star;
            let framed = CMat::from_fn(n, n, |r, c| {
                mid[(r, c)] * cplx(y.powf((labels[c] - labels[r]) as f64 / 2.0), 0.0)
            });
            let op_norm = framed
                .svd(false, false)
                .singular_values
                .iter()
                .cloned()
                .fold(0.0, f64::max);
            level_sup = level_sup.max(op_norm * y);
        }
        sup = sup.max(level_sup);
        levels.push((y, level_sup));
    }
    // Growth exponent from the upper half of the ladder.
    let half = levels.len() / 2;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let pts = &levels[half..];
    for &(y, v) in pts {
        let (lx, ly) = (y.ln(), v.max(1e-300).ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let m = pts.len() as f64;
    let growth_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    // Integral reading: unit-norm sections against the weighted L² norm on
    // the truncated cylinder [0,2π]×[y0, y_max].
    let section_norms = section_norm_suite(model, convention, y0, y_max)?;

    let beyond = levels.iter().filter(|(y, _)| *y >= 2.0 * y0).collect::<Vec<_>>();
    let non_increasing = beyond.windows(2).all(|w| w[1].1 <= w[0].1 * 1.02);
    let pass = sup.is_finite() && non_increasing;
    Ok(HiggsNormReport {
        convention,
        sup_norm: sup,
        levels,
        growth_exponent,
        section_norms,
        pass,
    })
}

/// `∫‖θ s‖²_{ω,h} dV / ∫‖s‖²_h dV` for a few fixed flat test sections.
fn section_norm_suite(
    model: &ModelMetric,
    convention: HiggsConvention,
    y0: f64,
    y_max: f64,
) -> Result<Vec<f64>> {
    let n = model.dim();
    let (nx, ny) = (8, 64);
    let mut sections: Vec<crate::mats::CVec> = Vec::new();
    for b in 0..n {
        sections.push(crate::mats::CVec::from_fn(n, |r, _| {
            cplx(if r == b { 1.0 } else { 0.0 }, 0.0)
        }));
    }
    sections.push(crate::mats::CVec::from_fn(n, |r, _| {
        cplx(1.0 / (n as f64).sqrt(), (r as f64 - 0.5) / n as f64)
    }));
    let mut num = vec![0.0f64; sections.len()];
    let mut den = vec![0.0f64; sections.len()];
    for i in 0..nx {
        let x = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
        for k in 0..ny {
            // Log-spaced in y; volume dV = dx·dy/y².
            let t0 = k as f64 / ny as f64;
            let t1 = (k + 1) as f64 / ny as f64;
            let ya = y0 * (y_max / y0).powf(t0);
            let yb = y0 * (y_max / y0).powf(t1);
            let y = 0.5 * (ya + yb);
            let cell = (2.0 * std::f64::consts::PI / nx as f64) * (yb - ya) / (y * y);
            let p = PuncturedPoint { x, y };
            let h = model.eval(p)?.matrix().clone();
            let theta = higgs_at_model(model, p, convention)?;
            for (si, s) in sections.iter().enumerate() {
                let hs = &h * s;
                let s_norm = s
                    .iter()
                    .zip(hs.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>();
                let ts = &theta * s;
                let hts = &h * &ts;
                let ts_norm = ts
                    .iter()
                    .zip(hts.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>();
                // |θs dz|² = ‖θs‖²_h · |dz|²_ω with |dz|²_ω = y².
                num[si] += ts_norm * y * y * cell;
                den[si] += s_norm * cell;
            }
        }
    }
    Ok(num
        .iter()
        .zip(den.iter())
        .map(|(a, b)| a / b.max(1e-300))
        .collect())
}

/// Discrete integrability residual: `sup ‖(D'')² s‖ / ‖s‖` for a smooth test
/// section on an `n×n` grid over the window; `(D'')² = ∂̄θ` in one variable.
pub fn integrability_residual(
    model: &ModelMetric,
    grid_n: usize,
    window: (f64, f64),
) -> Result<f64> {
    let quad = quad::OperatorQuad::from_model(model, grid_n, grid_n, window, quad::BaseMetric::Poincare)?;
    let s = quad.bump_section(7);
    let d1 = quad.apply_dpp0(&s);
    let d2 = quad.apply_dpp1(&d1);
    let norm_s = quad.norm0(&s);
    Ok(quad.norm2(&d2) / norm_s.max(1e-300))
}
