//! Discrete equivariant harmonic-map relaxation on the twisted cylinder.
//!
//! A [`GridMap`] stores one fundamental domain `x ∈ [0, 2π)`, `y ∈ [y0, y1]`
//! of a `ρ`-equivariant map into `P_n`; crossing the seam applies the twist
//! `H(x + 2π) = γ H γ*`. Because only the fundamental domain is stored, the
//! twist identification holds exactly at all times.
//!
//! The solver is Riemannian Gauss–Seidel on the discrete geodesic energy
//!
//! ```text
//!   E = Σ_x-edges (dy/dx) d²(H_a, H_b) + Σ_y-edges (dx/dy) d²(H_a, H_b),
//! ```
//!
//! whose negative gradient at a node is (twice) the Karcher tangent
//! `S = Σ_nb w log_H(H_nb)`. Updates retract along
//! `H ← H^{1/2} exp(τ H^{-1/2} S H^{-1/2}) H^{1/2}`, which keeps iterates
//! positive definite; red-black ordering makes simultaneous updates within a
//! color independent, and a step is accepted only if the energy does not
//! increase (otherwise rolled back and the step halved).
//!
//! The tension field reported for termination is the metric-frame Hermitian
//! `R = H^{-1/2} S H^{-1/2}`, similar to the coordinate residual
//! `∂_x(H⁻¹H_x) + ∂_y(H⁻¹H_y)`; both vanish together, and `S` is its own
//! second-order-consistent discretization (exactly zero on geodesics).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HbError, Result};
use crate::mats::{cplx, dist, exp_at, log_at, CMat, Hermitian, PosDefMetric};
use crate::model::{ModelMetric, PuncturedPoint};

/// Sampled equivariant map on the twisted cylinder grid.
#[derive(Debug, Clone)]
pub struct GridMap {
    pub nx: usize,
    pub ny: usize,
    pub y0: f64,
    pub y1: f64,
    dim: usize,
    twist: CMat,
    twist_inv: CMat,
    samples: Vec<PosDefMetric>,
}

impl GridMap {
    pub fn from_model(model: &ModelMetric, nx: usize, ny: usize, y0: f64, y1: f64) -> Result<Self> {
        if nx < 4 || ny < 3 {
            return Err(HbError::InvalidInput("grid too small".into()));
        }
        if y0 <= model.y_min() || y1 <= y0 {
            return Err(HbError::InvalidInput("bad y range".into()));
        }
        let twist = model.twist();
        let twist_inv = crate::mats::matexp(&(-model.n_shift()));
        let mut samples = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = 2.0 * std::f64::consts::PI * i as f64 / nx as f64;
            for k in 0..ny {
                let y = y0 + (y1 - y0) * k as f64 / (ny - 1) as f64;
                samples.push(model.eval(PuncturedPoint { x, y })?);
            }
        }
        Ok(GridMap {
            nx,
            ny,
            y0,
            y1,
            dim: model.dim(),
            twist,
            twist_inv,
            samples,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn y_at(&self, k: usize) -> f64 {
        self.y0 + self.dy() * k as f64
    }

    fn idx(&self, i: usize, k: usize) -> usize {
        i * self.ny + k
    }

    pub fn get(&self, i: usize, k: usize) -> &PosDefMetric {
        &self.samples[self.idx(i, k)]
    }

    pub fn set(&mut self, i: usize, k: usize, h: PosDefMetric) {
        let id = self.idx(i, k);
        self.samples[id] = h;
    }

    fn twist_apply(&self, h: &PosDefMetric, forward: bool) -> PosDefMetric {
        let t = if forward { &self.twist } else { &self.twist_inv };
        PosDefMetric::from_hermitian_unchecked(Hermitian::symmetrize(t * h.matrix() * t.adjoint()))
    }

    /// Horizontal neighbor with seam wrap (`di = ±1`).
    pub fn x_neighbor(&self, i: usize, k: usize, di: i64) -> PosDefMetric {
        let n = self.nx as i64;
        let j = i as i64 + di;
        if j < 0 {
            self.twist_apply(self.get((j + n) as usize, k), false)
        } else if j >= n {
            self.twist_apply(self.get((j - n) as usize, k), true)
        } else {
            self.get(j as usize, k).clone()
        }
    }

    /// Max relative seam mismatch of the twist identification; exact modulo
    /// floating point because only the fundamental domain is stored.
    pub fn seam_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.ny {
            let via_right = self.x_neighbor(self.nx - 1, k, 1);
            let direct = self.twist_apply(self.get(0, k), true);
            let rel =
                (via_right.matrix() - direct.matrix()).norm() / direct.matrix().norm().max(1e-300);
            worst = worst.max(rel);
        }
        worst
    }

    /// Perturbs every interior node by a random tangent of invariant norm
    /// `magnitude` (so `dist(H', H) = magnitude` exactly).
    pub fn perturb_interior(&mut self, seed: u64, magnitude: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..self.nx {
            for k in 1..self.ny - 1 {
                let n = self.dim;
                let raw = CMat::from_fn(n, n, |_, _| {
                    cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let herm = Hermitian::symmetrize(raw);
                let norm = herm.frobenius_norm();
                if norm == 0.0 {
                    continue;
                }
                let base = self.get(i, k).clone();
                let (s, _) = base.sqrt_and_inv_sqrt();
                let scaled =
                    Hermitian::symmetrize(&s * herm.matrix() * &s * cplx(magnitude / norm, 0.0));
                // exp_at(base, H^{1/2} E H^{1/2}) = H^{1/2} exp(E) H^{1/2}
                let pert = exp_at(&base, &scaled);
                self.set(i, k, pert);
            }
        }
    }

    /// Sup over nodes of the invariant distance to another grid.
    pub fn sup_dist(&self, other: &GridMap) -> f64 {
        assert_eq!((self.nx, self.ny), (other.nx, other.ny));
        self.samples
            .iter()
            .zip(other.samples.iter())
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max)
    }

    /// Karcher tangent at an interior node: `Σ_nb w · log_H(H_nb)`.
    fn karcher_tangent(&self, i: usize, k: usize) -> Hermitian {
        let wx = 1.0 / (self.dx() * self.dx());
        let wy = 1.0 / (self.dy() * self.dy());
        let h = self.get(i, k);
        let left = self.x_neighbor(i, k, -1);
        let right = self.x_neighbor(i, k, 1);
        let down = self.get(i, k - 1);
        let up = self.get(i, k + 1);
        let mut acc = CMat::zeros(self.dim, self.dim);
        for (nb, w) in [(&left, wx), (&right, wx), (down, wy), (up, wy)] {
            acc += log_at(h, nb).matrix() * cplx(w, 0.0);
        }
        Hermitian::symmetrize(acc)
    }
}

/// Tension field: `R = H^{-1/2} S H^{-1/2}` at interior nodes, zero rows at
/// the Dirichlet boundary. `R = 0` identically iff discretely harmonic.
pub fn tension(g: &GridMap) -> Vec<Hermitian> {
    let mut out = vec![Hermitian::zeros(g.dim()); g.nx * g.ny];
    for i in 0..g.nx {
        for k in 1..g.ny - 1 {
            let s = g.karcher_tangent(i, k);
            let (_, si) = g.get(i, k).sqrt_and_inv_sqrt();
            out[g.idx(i, k)] = Hermitian::symmetrize(&si * s.matrix() * &si);
        }
    }
    out
}

pub fn sup_tension(g: &GridMap) -> f64 {
    tension(g)
        .iter()
        .map(Hermitian::frobenius_norm)
        .fold(0.0, f64::max)
}

/// Discrete geodesic energy (seam edges included through the twist).
pub fn discrete_energy(g: &GridMap) -> f64 {
    let (dx, dy) = (g.dx(), g.dy());
    let mut e = 0.0;
    for i in 0..g.nx {
        for k in 0..g.ny {
            let h = g.get(i, k);
            // x-edge to the right (every edge once, seam via twist).
            let right = g.x_neighbor(i, k, 1);
            let d = dist(h, &right);
            e += (dy / dx) * d * d;
            if k + 1 < g.ny {
                let d = dist(h, g.get(i, k + 1));
                e += (dx / dy) * d * d;
            }
        }
    }
    e
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Relaxation factor ω ∈ (0, 2); the tangent step is ω/(2wx + 2wy).
    pub omega: f64,
    /// Termination threshold on the sup tension.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Tension is evaluated every this many sweeps.
    pub check_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            omega: 1.6,
            tol: 1e-8,
            max_sweeps: 200_000,
            check_every: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxStats {
    pub sweeps: usize,
    pub final_sup_tension: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub energy_monotone: bool,
    pub rejected_steps: usize,
    pub seam_deviation: f64,
}

/// Red-black Riemannian Gauss–Seidel until `sup‖R‖ < tol`.
///
/// Energy is strictly non-increasing across accepted color sweeps; a sweep
/// that would increase it is rolled back with a halved step, and exhaustion
/// of the step is an error (the flow stalled).
pub fn relax(g: &mut GridMap, cfg: &FlowConfig) -> Result<RelaxStats> {
    let wx = 1.0 / (g.dx() * g.dx());
    let wy = 1.0 / (g.dy() * g.dy());
    let base_step = 1.0 / (2.0 * wx + 2.0 * wy);
    let mut omega = cfg.omega;
    let initial_energy = discrete_energy(g);
    let mut energy = initial_energy;
    let mut rejected = 0usize;
    let mut sweeps = 0usize;
    let mut sup = sup_tension(g);

    while sup >= cfg.tol {
        if sweeps >= cfg.max_sweeps {
            return Err(HbError::FlowStalled { sweep: sweeps });
        }
        for color in 0..2usize {
            let tau = omega * base_step;
            let before = energy;
            let snapshot = g.samples.clone();
            // Nodes of one color have disjoint neighborhoods: simultaneous
            // updates are well defined.
            let mut finite = true;
            let mut updates = Vec::new();
            for i in 0..g.nx {
                for k in 1..g.ny - 1 {
                    if (i + k) % 2 != color {
                        continue;
                    }
                    let s = g.karcher_tangent(i, k);
                    let scaled = Hermitian::symmetrize(s.matrix() * cplx(tau, 0.0));
                    let h = exp_at(g.get(i, k), &scaled);
                    if h.matrix()
                        .iter()
                        .any(|z| !z.re.is_finite() || !z.im.is_finite())
                    {
                        finite = false;
                        break;
                    }
                    updates.push((i, k, h));
                }
                if !finite {
                    break;
                }
            }
            if !finite {
                omega *= 0.5;
                rejected += 1;
                if omega < 1e-10 {
                    return Err(HbError::FlowStalled { sweep: sweeps });
                }
                continue;
            }
            for (i, k, h) in updates {
                g.set(i, k, h);
            }
            let after = discrete_energy(g);
            // Energy evaluation itself carries eigendecomposition rounding of
            // order 1e-14 relative; demand monotonicity up to that noise.
            let slack = 1e-12 * before.abs().max(1.0);
            if after > before + slack {
                g.samples = snapshot;
                omega *= 0.5;
                rejected += 1;
                if omega < 1e-10 {
                    if sup_tension(g) < cfg.tol {
                        break;
                    }
                    return Err(HbError::FlowStalled { sweep: sweeps });
                }
            } else {
                energy = energy.min(after);
                // Cautious recovery toward the configured factor.
                omega = (omega * 1.01).min(cfg.omega);
            }
        }
        sweeps += 1;
        if sweeps % cfg.check_every == 0 {
            sup = sup_tension(g);
        }
    }

    Ok(RelaxStats {
        sweeps,
        final_sup_tension: sup_tension(g),
        initial_energy,
        final_energy: energy,
        // Accepted steps never increase the energy by construction.
        energy_monotone: energy <= initial_energy,
        rejected_steps: rejected,
        seam_deviation: g.seam_deviation(),
    })
}

/// Bilinear prolongation to a grid of twice the x-resolution and doubled
/// y-intervals; interpolation respects the seam twist. Boundary rows are
/// re-sampled from the model.
pub fn prolong(coarse: &GridMap, model: &ModelMetric) -> Result<GridMap> {
    let nx = coarse.nx * 2;
    let ny = coarse.ny * 2 - 1;
    let mut fine = GridMap::from_model(model, nx, ny, coarse.y0, coarse.y1)?;
    let avg2 = |a: &PosDefMetric, b: &PosDefMetric| {
        PosDefMetric::from_hermitian_unchecked(Hermitian::symmetrize(
            (a.matrix() + b.matrix()) * cplx(0.5, 0.0),
        ))
    };
    for i in 0..nx {
        for k in 1..ny - 1 {
            let (ic, kc) = (i / 2, k / 2);
            let h = match (i % 2 == 0, k % 2 == 0) {
                (true, true) => coarse.get(ic, kc).clone(),
                (false, true) => {
                    let a = coarse.get(ic, kc).clone();
                    let b = coarse.x_neighbor(ic, kc, 1);
                    avg2(&a, &b)
                }
                (true, false) => avg2(coarse.get(ic, kc), coarse.get(ic, kc + 1)),
                (false, false) => {
                    let a = avg2(coarse.get(ic, kc), coarse.get(ic, kc + 1));
                    let b = avg2(
                        &coarse.x_neighbor(ic, kc, 1),
                        &coarse.x_neighbor(ic, kc + 1, 1),
                    );
                    avg2(&a, &b)
                }
            };
            fine.set(i, k, h);
        }
    }
    Ok(fine)
}

/// Gradient-bound data: `|dh|²_ω = y² · e(x, y)` against the bound `C·y²`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientBound {
    /// `sup |dh|²/|log r|²` over interior nodes (= sup of the flat density).
    pub sup_ratio: f64,
    /// Max flat density per interior y-row.
    pub row_max: Vec<f64>,
    /// Finite and non-increasing toward the puncture-side boundary.
    pub pass: bool,
}

/// Computes `|dh|²/|log r|²` from centered differences on a converged grid.
pub fn gradient_bound_check(g: &GridMap) -> Result<GradientBound> {
    let (dx, dy) = (g.dx(), g.dy());
    let mut row_max = vec![0.0f64; g.ny];
    let mut sup: f64 = 0.0;
    for i in 0..g.nx {
        for k in 1..g.ny - 1 {
            let h = g.get(i, k);
            let hinv = h.try_inverse()?;
            let hx = (g.x_neighbor(i, k, 1).matrix() - g.x_neighbor(i, k, -1).matrix())
                / cplx(2.0 * dx, 0.0);
            let hy = (g.get(i, k + 1).matrix() - g.get(i, k - 1).matrix()) / cplx(2.0 * dy, 0.0);
            let ax = &hinv * hx;
            let ay = &hinv * hy;
            let e = ((&ax * &ax).trace() + (&ay * &ay).trace()).re;
            sup = sup.max(e);
            row_max[k] = row_max[k].max(e);
        }
    }
    // Monotone trend toward large y (small slack for discretization noise).
    let first = row_max[1];
    let last = row_max[g.ny - 2];
    let pass = sup.is_finite() && last <= first * 1.05;
    Ok(GradientBound {
        sup_ratio: sup,
        row_max: row_max[1..g.ny - 1].to_vec(),
        pass,
    })
}
