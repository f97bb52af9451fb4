//! Discrete realizations of `D`, `D'_u`, `D''_u`, `D^c_u`, `Λ` on a bundle
//! over a rectangle chart, with adjoints taken against the weighted discrete
//! inner products by exact transposition.
//!
//! Degrees: 0-forms (sections), 1-forms (`dz` and `dz̄` components stacked),
//! 2-forms (`dz∧dz̄` coefficient). With conformal base metric
//! `vol = λ dx∧dy` the pointwise weights are `λ` (0-forms), `2` (either
//! 1-form component), `4/λ` (2-forms), each times the fiber Gram `H` and the
//! cell area. `Λ` on 2-forms is multiplication by `−2i/λ` (the adjoint of
//! `L = ω∧·`, `ω = (iλ/2)dz∧dz̄`).
//!
//! In the flat frame the operators are first order:
//!
//! ```text
//!   D''s = θ_z s · dz + (∂_z̄ + ½A_z̄)s · dz̄          θ_z = −½A_z
//!   D' s = (∂_z + ½A_z)s · dz + (−½A_z̄)s · dz̄        A_z = H⁻¹∂_zH
//! ```
//!
//! so `D = D' + D''` is exactly the flat `d` and the identities
//! `(D'')* = −i[Λ, D']`, `(D)* = i[Λ, D^c]`, `Δ = 2Δ''` can be tested as
//! statements about the discrete operators themselves.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::Result;
use crate::mats::{cplx, CMat, C64};
use crate::model::{ModelMetric, PuncturedPoint};

/// Conformal factor of the base metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMetric {
    /// `λ = 1/y²` (Poincaré-like on the cylinder chart).
    Poincare,
    /// `λ = 1`.
    Euclidean,
}

/// Sparse complex operator in triplet form.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(u32, u32, C64)>,
}

impl SparseOp {
    fn new(rows: usize, cols: usize) -> Self {
        SparseOp {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, r: usize, c: usize, v: C64) {
        if v.norm_sqr() != 0.0 {
            self.entries.push((r as u32, c as u32, v));
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![cplx(0.0, 0.0); self.rows];
        for &(r, c, v) in &self.entries {
            out[r as usize] += v * x[c as usize];
        }
        out
    }

    /// Plain conjugate-transpose application.
    pub fn apply_adjoint_raw(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![cplx(0.0, 0.0); self.cols];
        for &(r, c, v) in &self.entries {
            out[c as usize] += v.conj() * x[r as usize];
        }
        out
    }

    fn add_from(&mut self, other: &SparseOp, row_off: usize, col_off: usize, scale: C64) {
        for &(r, c, v) in &other.entries {
            self.push(r as usize + row_off, c as usize + col_off, v * scale);
        }
    }
}

/// Block-diagonal Gram matrix: one `n×n` positive block per point, already
/// scaled by the cell weight.
#[derive(Debug, Clone)]
pub struct Gram {
    pub n: usize,
    blocks: Vec<CMat>,
    inv_blocks: Vec<CMat>,
}

impl Gram {
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.apply_blocks(&self.blocks, x)
    }

    fn apply_inv(&self, x: &[C64]) -> Vec<C64> {
        self.apply_blocks(&self.inv_blocks, x)
    }

    fn apply_blocks(&self, blocks: &[CMat], x: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![cplx(0.0, 0.0); x.len()];
        for (p, b) in blocks.iter().enumerate() {
            for a in 0..n {
                let mut acc = cplx(0.0, 0.0);
                for c in 0..n {
                    acc += b[(a, c)] * x[p * n + c];
                }
                out[p * n + a] = acc;
            }
        }
        out
    }

    /// `⟨u, v⟩ = Σ_p v_p* G_p u_p`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        let gu = self.apply(u);
        v.iter()
            .zip(gu.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm(&self, u: &[C64]) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }
}

/// The assembled operator quadruple on one grid.
pub struct OperatorQuad {
    pub nx: usize,
    pub ny: usize,
    pub rank: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    lambda: Vec<f64>,
    pub g0: Gram,
    pub g1: Gram,
    pub g2: Gram,
    d0: SparseOp,
    dp0: SparseOp,
    dpp0: SparseOp,
    dc0: SparseOp,
    d1: SparseOp,
    dp1: SparseOp,
    dpp1: SparseOp,
    dc1: SparseOp,
}

struct BundleSamples {
    rank: usize,
    h: Vec<CMat>,
    az: Vec<CMat>,
    azbar: Vec<CMat>,
    lambda: Vec<f64>,
}

impl OperatorQuad {
    /// Bundle data from the model metric restricted to the window
    /// `[0, 2π] × [y_lo, y_hi]` (rectangle chart, not periodic).
    pub fn from_model(
        model: &ModelMetric,
        nx: usize,
        ny: usize,
        window: (f64, f64),
        base: BaseMetric,
    ) -> Result<Self> {
        let rank = model.dim();
        let npts = nx * ny;
        let mut h = Vec::with_capacity(npts);
        let mut az = Vec::with_capacity(npts);
        let mut azbar = Vec::with_capacity(npts);
        let mut lambda = Vec::with_capacity(npts);
        let (y_lo, y_hi) = window;
        for i in 0..nx {
            let x = 2.0 * std::f64::consts::PI * i as f64 / (nx - 1) as f64;
            for k in 0..ny {
                let y = y_lo + (y_hi - y_lo) * k as f64 / (ny - 1) as f64;
                let p = PuncturedPoint { x, y };
                let hm = model.eval(p)?;
                let (hx, hy) = model.log_derivatives(p)?;
                let a_z = (&hx - &hy * cplx(0.0, 1.0)) * cplx(0.5, 0.0);
                let a_zbar = (&hx + &hy * cplx(0.0, 1.0)) * cplx(0.5, 0.0);
                h.push(hm.matrix().clone());
                az.push(a_z);
                azbar.push(a_zbar);
                lambda.push(match base {
                    BaseMetric::Poincare => 1.0 / (y * y),
                    BaseMetric::Euclidean => 1.0,
                });
            }
        }
        Ok(Self::assemble(
            nx,
            ny,
            (0.0, 2.0 * std::f64::consts::PI),
            window,
            BundleSamples {
                rank,
                h,
                az,
                azbar,
                lambda,
            },
        ))
    }

    /// Flat trivial line bundle with Euclidean base metric: the classical
    /// Kähler identities.
    pub fn flat_scalar(nx: usize, ny: usize, window: (f64, f64)) -> Self {
        let npts = nx * ny;
        Self::assemble(
            nx,
            ny,
            (0.0, 2.0 * std::f64::consts::PI),
            window,
            BundleSamples {
                rank: 1,
                h: vec![CMat::identity(1, 1); npts],
                az: vec![CMat::zeros(1, 1); npts],
                azbar: vec![CMat::zeros(1, 1); npts],
                lambda: vec![1.0; npts],
            },
        )
    }

    fn assemble(
        nx: usize,
        ny: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
        data: BundleSamples,
    ) -> Self {
        let n = data.rank;
        let npts = nx * ny;
        let dx = (x_range.1 - x_range.0) / (nx - 1) as f64;
        let dy = (y_range.1 - y_range.0) / (ny - 1) as f64;
        let area = dx * dy;

        // Scalar finite-difference stencils ⊗ fiber identity.
        let fd = |axis_x: bool| -> SparseOp {
            let mut op = SparseOp::new(npts * n, npts * n);
            let h = if axis_x { dx } else { dy };
            for i in 0..nx {
                for k in 0..ny {
                    let p = i * ny + k;
                    let (pos, len) = if axis_x { (i, nx) } else { (k, ny) };
                    let nb = |d: i64| -> usize {
                        let q = (pos as i64 + d) as usize;
                        if axis_x {
                            q * ny + k
                        } else {
                            i * ny + q
                        }
                    };
                    let stencil: Vec<(usize, f64)> = if pos == 0 {
                        vec![(nb(0), -1.5), (nb(1), 2.0), (nb(2), -0.5)]
                    } else if pos == len - 1 {
                        vec![(nb(0), 1.5), (nb(-1), -2.0), (nb(-2), 0.5)]
                    } else {
                        vec![(nb(1), 0.5), (nb(-1), -0.5)]
                    };
                    for (q, w) in stencil {
                        for a in 0..n {
                            op.push(p * n + a, q * n + a, cplx(w / h, 0.0));
                        }
                    }
                }
            }
            op
        };
        let dx_op = fd(true);
        let dy_op = fd(false);

        // ∂_z = ½(Dx − iDy), ∂_z̄ = ½(Dx + iDy).
        let mut dz = SparseOp::new(npts * n, npts * n);
        dz.add_from(&dx_op, 0, 0, cplx(0.5, 0.0));
        dz.add_from(&dy_op, 0, 0, cplx(0.0, -0.5));
        let mut dzbar = SparseOp::new(npts * n, npts * n);
        dzbar.add_from(&dx_op, 0, 0, cplx(0.5, 0.0));
        dzbar.add_from(&dy_op, 0, 0, cplx(0.0, 0.5));

        // Pointwise block multiplications.
        let mult = |mats: &[CMat], scale: C64| -> SparseOp {
            let mut op = SparseOp::new(npts * n, npts * n);
            for (p, m) in mats.iter().enumerate() {
                for a in 0..n {
                    for b in 0..n {
                        op.push(p * n + a, p * n + b, m[(a, b)] * scale);
                    }
                }
            }
            op
        };
        let half_az = mult(&data.az, cplx(0.5, 0.0));
        let half_azbar = mult(&data.azbar, cplx(0.5, 0.0));

        let f0 = npts * n;
        let f1 = 2 * npts * n;
        let f2 = npts * n;

        // Degree 0 → 1: rows [dz-component; dz̄-component].
        let mut dpp0 = SparseOp::new(f1, f0);
        dpp0.add_from(&half_az, 0, 0, cplx(-1.0, 0.0)); // θ_z = −½A_z
        dpp0.add_from(&dzbar, f0, 0, cplx(1.0, 0.0));
        dpp0.add_from(&half_azbar, f0, 0, cplx(1.0, 0.0));

        let mut dp0 = SparseOp::new(f1, f0);
        dp0.add_from(&dz, 0, 0, cplx(1.0, 0.0));
        dp0.add_from(&half_az, 0, 0, cplx(1.0, 0.0));
        dp0.add_from(&half_azbar, f0, 0, cplx(-1.0, 0.0)); // θ̄_z̄ = −½A_z̄

        let mut d0 = SparseOp::new(f1, f0);
        d0.add_from(&dpp0, 0, 0, cplx(1.0, 0.0));
        d0.add_from(&dp0, 0, 0, cplx(1.0, 0.0));

        let mut dc0 = SparseOp::new(f1, f0);
        dc0.add_from(&dpp0, 0, 0, cplx(1.0, 0.0));
        dc0.add_from(&dp0, 0, 0, cplx(-1.0, 0.0));

        // Degree 1 → 2: input (u dz | v dz̄), output dz∧dz̄ coefficient.
        let mut dpp1 = SparseOp::new(f2, f1);
        dpp1.add_from(&dzbar, 0, 0, cplx(-1.0, 0.0));
        dpp1.add_from(&half_azbar, 0, 0, cplx(-1.0, 0.0));
        dpp1.add_from(&half_az, 0, f0, cplx(-1.0, 0.0)); // θ_z·v

        let mut dp1 = SparseOp::new(f2, f1);
        dp1.add_from(&half_azbar, 0, 0, cplx(1.0, 0.0));
        dp1.add_from(&dz, 0, f0, cplx(1.0, 0.0));
        dp1.add_from(&half_az, 0, f0, cplx(1.0, 0.0));

        let mut d1 = SparseOp::new(f2, f1);
        d1.add_from(&dpp1, 0, 0, cplx(1.0, 0.0));
        d1.add_from(&dp1, 0, 0, cplx(1.0, 0.0));

        let mut dc1 = SparseOp::new(f2, f1);
        dc1.add_from(&dpp1, 0, 0, cplx(1.0, 0.0));
        dc1.add_from(&dp1, 0, 0, cplx(-1.0, 0.0));

        // Grams: weights λ (deg 0), 2 (each 1-form component), 4/λ (deg 2),
        // times cell area and the fiber matrix H.
        let make_gram = |weights: &[f64], duplicate: bool| -> Gram {
            let mut blocks = Vec::with_capacity(npts * if duplicate { 2 } else { 1 });
            let mut inv_blocks = Vec::with_capacity(blocks.capacity());
            let copies = if duplicate { 2 } else { 1 };
            for copy in 0..copies {
                let _ = copy;
                for (p, w) in weights.iter().enumerate() {
                    let b = &data.h[p] * cplx(w * area, 0.0);
                    let ib = b.clone().try_inverse().expect("positive fiber Gram");
                    blocks.push(b);
                    inv_blocks.push(ib);
                }
            }
            Gram {
                n,
                blocks,
                inv_blocks,
            }
        };
        let w0: Vec<f64> = data.lambda.clone();
        let w1: Vec<f64> = vec![2.0; npts];
        let w2: Vec<f64> = data.lambda.iter().map(|&l| 4.0 / l).collect();
        let g0 = make_gram(&w0, false);
        let g1 = make_gram(&w1, true);
        let g2 = make_gram(&w2, false);

        OperatorQuad {
            nx,
            ny,
            rank: n,
            x_range,
            y_range,
            lambda: data.lambda,
            g0,
            g1,
            g2,
            d0,
            dp0,
            dpp0,
            dc0,
            d1,
            dp1,
            dpp1,
            dc1,
        }
    }

    pub fn f0_len(&self) -> usize {
        self.nx * self.ny * self.rank
    }

    // Forward applications.
    pub fn apply_d0(&self, s: &[C64]) -> Vec<C64> {
        self.d0.apply(s)
    }
    pub fn apply_dp0(&self, s: &[C64]) -> Vec<C64> {
        self.dp0.apply(s)
    }
    pub fn apply_dpp0(&self, s: &[C64]) -> Vec<C64> {
        self.dpp0.apply(s)
    }
    pub fn apply_dc0(&self, s: &[C64]) -> Vec<C64> {
        self.dc0.apply(s)
    }
    pub fn apply_d1(&self, s: &[C64]) -> Vec<C64> {
        self.d1.apply(s)
    }
    pub fn apply_dp1(&self, s: &[C64]) -> Vec<C64> {
        self.dp1.apply(s)
    }
    pub fn apply_dpp1(&self, s: &[C64]) -> Vec<C64> {
        self.dpp1.apply(s)
    }
    pub fn apply_dc1(&self, s: &[C64]) -> Vec<C64> {
        self.dc1.apply(s)
    }

    /// `Λ` on 2-forms: multiplication by `−2i/λ`.
    pub fn apply_lambda(&self, w: &[C64]) -> Vec<C64> {
        let n = self.rank;
        let mut out = vec![cplx(0.0, 0.0); w.len()];
        for p in 0..self.nx * self.ny {
            let s = cplx(0.0, -2.0 / self.lambda[p]);
            for a in 0..n {
                out[p * n + a] = s * w[p * n + a];
            }
        }
        out
    }

    /// `L = ω ∧ ·` on 0-forms: multiplication by `iλ/2`.
    pub fn apply_l(&self, s: &[C64]) -> Vec<C64> {
        let n = self.rank;
        let mut out = vec![cplx(0.0, 0.0); s.len()];
        for p in 0..self.nx * self.ny {
            let sc = cplx(0.0, self.lambda[p] / 2.0);
            for a in 0..n {
                out[p * n + a] = sc * s[p * n + a];
            }
        }
        out
    }

    fn adjoint(&self, op: &SparseOp, g_in: &Gram, g_out: &Gram, w: &[C64]) -> Vec<C64> {
        let t = g_out.apply(w);
        let s = op.apply_adjoint_raw(&t);
        g_in.apply_inv(&s)
    }

    // Weighted adjoints (exact transposes against the Grams).
    pub fn adj_d0(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.d0, &self.g0, &self.g1, w)
    }
    pub fn adj_dp0(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.dp0, &self.g0, &self.g1, w)
    }
    pub fn adj_dpp0(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.dpp0, &self.g0, &self.g1, w)
    }
    pub fn adj_d1(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.d1, &self.g1, &self.g2, w)
    }
    pub fn adj_dp1(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.dp1, &self.g1, &self.g2, w)
    }
    pub fn adj_dpp1(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.dpp1, &self.g1, &self.g2, w)
    }
    pub fn adj_dc1(&self, w: &[C64]) -> Vec<C64> {
        self.adjoint(&self.dc1, &self.g1, &self.g2, w)
    }

    pub fn norm0(&self, v: &[C64]) -> f64 {
        self.g0.norm(v)
    }
    pub fn norm1(&self, v: &[C64]) -> f64 {
        self.g1.norm(v)
    }
    pub fn norm2(&self, v: &[C64]) -> f64 {
        self.g2.norm(v)
    }

    fn coords(&self, p: usize) -> (f64, f64) {
        let i = p / self.ny;
        let k = p % self.ny;
        let x = self.x_range.0
            + (self.x_range.1 - self.x_range.0) * i as f64 / (self.nx - 1) as f64;
        let y = self.y_range.0
            + (self.y_range.1 - self.y_range.0) * k as f64 / (self.ny - 1) as f64;
        (x, y)
    }

    fn bump_value(&self, x: f64, y: f64) -> f64 {
        let mid_x = 0.5 * (self.x_range.0 + self.x_range.1);
        let mid_y = 0.5 * (self.y_range.0 + self.y_range.1);
        let half_x = 0.37 * (self.x_range.1 - self.x_range.0);
        let half_y = 0.37 * (self.y_range.1 - self.y_range.0);
        let tx = (x - mid_x) / half_x;
        let ty = (y - mid_y) / half_y;
        let b = |t: f64| {
            if t.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        };
        b(tx) * b(ty)
    }

    fn random_component(&self, rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64, f64, f64)> {
        (0..self.rank)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.0..6.28),
                    rng.gen_range(0.0..6.28),
                )
            })
            .collect()
    }

    fn eval_component(&self, params: &[(f64, f64, f64, f64, f64)], out: &mut [C64]) {
        for p in 0..self.nx * self.ny {
            let (x, y) = self.coords(p);
            let b = self.bump_value(x, y);
            for (a, &(c0, c1, om, phx, phy)) in params.iter().enumerate() {
                let v = b * (c0 + c1 * (om * x + phx).sin() * (om * y + phy).cos());
                out[p * self.rank + a] = cplx(v, 0.6 * v);
            }
        }
    }

    /// Compactly supported random section; deterministic in the seed and
    /// independent of the grid (samples a fixed analytic function).
    pub fn bump_section(&self, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = self.random_component(&mut rng);
        let mut out = vec![cplx(0.0, 0.0); self.f0_len()];
        self.eval_component(&params, &mut out);
        out
    }

    /// Compactly supported random 1-form (both components).
    pub fn bump_oneform(&self, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pu = self.random_component(&mut rng);
        let pv = self.random_component(&mut rng);
        let mut out = vec![cplx(0.0, 0.0); 2 * self.f0_len()];
        let half = self.f0_len();
        let (lo, hi) = out.split_at_mut(half);
        self.eval_component(&pu, lo);
        self.eval_component(&pv, hi);
        out
    }

    /// Compactly supported random 2-form.
    pub fn bump_twoform(&self, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let params = self.random_component(&mut rng);
        let mut out = vec![cplx(0.0, 0.0); self.f0_len()];
        self.eval_component(&params, &mut out);
        out
    }
}

fn rel_err(diff: f64, a: f64, b: f64) -> f64 {
    diff / a.max(b).max(1e-300)
}

/// Residuals of the identity set on one grid for one seed.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityErrors {
    /// `(D'')*η` vs `−i[Λ, D']η` on 1-forms.
    pub dpp_star_1: f64,
    /// Same identity on 2-forms.
    pub dpp_star_2: f64,
    /// `(D)*η` vs `i[Λ, D^c]η` on 1-forms.
    pub d_star_1: f64,
    /// Same identity on 2-forms.
    pub d_star_2: f64,
    /// `Δη` vs `2Δ''η` on 0-forms.
    pub laplace_0: f64,
    /// `Δη` vs `2Δ''η` on 1-forms.
    pub laplace_1: f64,
}

impl IdentityErrors {
    pub fn max(&self) -> f64 {
        [
            self.dpp_star_1,
            self.dpp_star_2,
            self.d_star_1,
            self.d_star_2,
            self.laplace_0,
            self.laplace_1,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates the first-order identities and `Δ = 2Δ''` on bump test data.
pub fn identity_errors(q: &OperatorQuad, seed: u64) -> IdentityErrors {
    let eta1 = q.bump_oneform(seed);
    let eta2 = q.bump_twoform(seed);
    let s0 = q.bump_section(seed.wrapping_add(101));

    // (D'')* = −i[Λ, D'] on 1-forms: Λη = 0.
    let lhs = q.adj_dpp0(&eta1);
    let rhs: Vec<C64> = q
        .apply_lambda(&q.apply_dp1(&eta1))
        .iter()
        .map(|z| z * cplx(0.0, -1.0))
        .collect();
    let dpp_star_1 = rel_err(
        q.norm0(&sub(&lhs, &rhs)),
        q.norm0(&lhs),
        q.norm0(&rhs),
    );

    // (D'')* = −i[Λ, D'] on 2-forms: D' of a 2-form vanishes.
    let lhs = q.adj_dpp1(&eta2);
    let rhs: Vec<C64> = q
        .apply_dp0(&q.apply_lambda(&eta2))
        .iter()
        .map(|z| z * cplx(0.0, 1.0))
        .collect();
    let dpp_star_2 = rel_err(
        q.norm1(&sub(&lhs, &rhs)),
        q.norm1(&lhs),
        q.norm1(&rhs),
    );

    // (D)* = i[Λ, D^c] on 1-forms.
    let lhs = q.adj_d0(&eta1);
    let rhs: Vec<C64> = q
        .apply_lambda(&q.apply_dc1(&eta1))
        .iter()
        .map(|z| z * cplx(0.0, 1.0))
        .collect();
    let d_star_1 = rel_err(
        q.norm0(&sub(&lhs, &rhs)),
        q.norm0(&lhs),
        q.norm0(&rhs),
    );

    // (D)* = i[Λ, D^c] on 2-forms.
    let lhs = q.adj_d1(&eta2);
    let rhs: Vec<C64> = q
        .apply_dc0(&q.apply_lambda(&eta2))
        .iter()
        .map(|z| z * cplx(0.0, -1.0))
        .collect();
    let d_star_2 = rel_err(
        q.norm1(&sub(&lhs, &rhs)),
        q.norm1(&lhs),
        q.norm1(&rhs),
    );

    // Δ vs 2Δ'' on 0-forms.
    let lhs = q.adj_d0(&q.apply_d0(&s0));
    let rhs: Vec<C64> = q
        .adj_dpp0(&q.apply_dpp0(&s0))
        .iter()
        .map(|z| z * cplx(2.0, 0.0))
        .collect();
    let laplace_0 = rel_err(
        q.norm0(&sub(&lhs, &rhs)),
        q.norm0(&lhs),
        q.norm0(&rhs),
    );

    // Δ vs 2Δ'' on 1-forms.
    let lhs = add(
        &q.adj_d1(&q.apply_d1(&eta1)),
        &q.apply_d0(&q.adj_d0(&eta1)),
    );
    let rhs: Vec<C64> = add(
        &q.adj_dpp1(&q.apply_dpp1(&eta1)),
        &q.apply_dpp0(&q.adj_dpp0(&eta1)),
    )
    .iter()
    .map(|z| z * cplx(2.0, 0.0))
    .collect();
    let laplace_1 = rel_err(
        q.norm1(&sub(&lhs, &rhs)),
        q.norm1(&lhs),
        q.norm1(&rhs),
    );

    IdentityErrors {
        dpp_star_1,
        dpp_star_2,
        d_star_1,
        d_star_2,
        laplace_0,
        laplace_1,
    }
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b.iter()).map(|(x, y)| x - y).collect()
}

fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

/// Refinement study of the identity residuals on the model bundle.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KahlerReport {
    pub grids: Vec<usize>,
    /// `errors[grid][trial]` = max identity residual.
    pub errors: Vec<Vec<f64>>,
    /// Observed order per trial: `log2(e_first/e_last)/levels`.
    pub orders: Vec<f64>,
    pub min_order: f64,
    pub pass: bool,
}

pub fn kahler_identity_check(
    model: &ModelMetric,
    grids: &[usize],
    trials: usize,
    window: (f64, f64),
    required_order: f64,
) -> Result<KahlerReport> {
    let mut errors: Vec<Vec<f64>> = Vec::new();
    for &g in grids {
        let quad = OperatorQuad::from_model(model, g, g, window, BaseMetric::Poincare)?;
        let per_trial: Vec<f64> = (0..trials)
            .map(|t| identity_errors(&quad, 1000 + t as u64).max())
            .collect();
        errors.push(per_trial);
    }
    let levels = (grids.len() - 1) as f64;
    let orders: Vec<f64> = (0..trials)
        .map(|t| (errors[0][t] / errors[grids.len() - 1][t]).log2() / levels)
        .collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(KahlerReport {
        grids: grids.to_vec(),
        errors,
        orders,
        min_order,
        pass: min_order >= required_order,
    })
}
