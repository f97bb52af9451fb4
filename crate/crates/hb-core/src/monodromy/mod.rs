//! Unipotent monodromy algebra: logarithms, Jordan profiles, sl2 triples and
//! monodromy weight filtrations.
//!
//! Everything here is combinatorial data, so it is computed in exact rational
//! arithmetic. Float inputs convert exactly (finite floats are dyadic
//! rationals); inputs that are only approximately unipotent are snapped to
//! nearby small-denominator rationals first. Jordan structure is discontinuous
//! in the entries, so there is deliberately no tolerance-based fallback for
//! the sl2/filtration constructions; only `jordan_profile_f64` works with
//! genuinely inexact matrices (rank decisions by singular value threshold).
//!
//! Sign conventions: the adapted basis satisfies `N e_j = e_{j−2}` and
//! `Y e_j = j e_j`, which forces `[Y, N] = −2N`. The sl2 neutral element is
//! therefore stored as `H₀ = −Y`, for which `[H₀, N] = 2N`, `[H₀, N⁻] = −2N⁻`
//! and `[N, N⁻] = H₀` hold exactly. Both operators are kept and emitted.

pub mod exact;

use serde::{Deserialize, Serialize};

use crate::error::{HbError, Result};
use crate::mats::{CMat, MatrixJson};
use exact::{snap_cmat, GRat, RatMat};

/// Denominator bound for snapping float monodromies to exact rationals.
const SNAP_MAX_DEN: i64 = 1 << 24;
const SNAP_TOL: f64 = 1e-9;
/// Numerical unipotency tolerance for inputs that cannot be rationalized.
pub const UNIPOTENT_TOL: f64 = 1e-10;

/// A unipotent monodromy transformation `γ` with `(γ − I)ⁿ = 0`.
#[derive(Debug, Clone)]
pub struct UnipotentMonodromy {
    gamma: CMat,
    exact: Option<RatMat>,
    snapped: bool,
}

impl UnipotentMonodromy {
    pub fn new(gamma: CMat) -> Result<Self> {
        let n = gamma.nrows();
        if n == 0 || gamma.ncols() != n {
            return Err(HbError::DimensionMismatch("monodromy must be square".into()));
        }
        let exact0 = RatMat::from_cmat_exact(&gamma)?;
        let diff = exact0.sub(&RatMat::identity(n));
        if diff.pow(n).is_zero() {
            return Ok(UnipotentMonodromy {
                gamma,
                exact: Some(exact0),
                snapped: false,
            });
        }
        if let Some(snapped) = snap_cmat(&gamma, SNAP_MAX_DEN, SNAP_TOL) {
            let d = snapped.sub(&RatMat::identity(n));
            if d.pow(n).is_zero() {
                return Ok(UnipotentMonodromy {
                    gamma,
                    exact: Some(snapped),
                    snapped: true,
                });
            }
        }
        // Numerically unipotent inputs are accepted for the logarithm only.
        let mut d = gamma.clone();
        for i in 0..n {
            d[(i, i)] -= crate::mats::cplx(1.0, 0.0);
        }
        let mut p = CMat::identity(n, n);
        for _ in 0..n {
            p = &p * &d;
        }
        if p.norm() < UNIPOTENT_TOL * gamma.norm().max(1.0) {
            Ok(UnipotentMonodromy {
                gamma,
                exact: None,
                snapped: false,
            })
        } else {
            Err(HbError::NotUnipotent)
        }
    }

    /// Canonical unipotent with the given Jordan profile: block diagonal of
    /// `I + shift`.
    pub fn canonical(profile: &[usize]) -> Self {
        let n: usize = profile.iter().sum();
        let mut m = RatMat::identity(n);
        let mut off = 0;
        for &s in profile {
            for k in 0..s.saturating_sub(1) {
                m[(off + k, off + k + 1)] = GRat::one();
            }
            off += s;
        }
        UnipotentMonodromy {
            gamma: m.to_cmat(),
            exact: Some(m),
            snapped: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.gamma
    }

    pub fn exact(&self) -> Option<&RatMat> {
        self.exact.as_ref()
    }

    pub fn was_snapped(&self) -> bool {
        self.snapped
    }
}

/// `N = log γ`, nilpotent with `exp(N) = γ`.
#[derive(Debug, Clone)]
pub struct NilpotentLog {
    mat: CMat,
    exact: Option<RatMat>,
}

impl NilpotentLog {
    /// Wraps a matrix known to be nilpotent (exactly over the rationals, or
    /// numerically with `‖Nⁿ‖ < tol`).
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != n {
            return Err(HbError::DimensionMismatch("nilpotent must be square".into()));
        }
        if let Ok(exact) = RatMat::from_cmat_exact(&mat) {
            if exact.pow(n).is_zero() {
                return Ok(NilpotentLog {
                    mat,
                    exact: Some(exact),
                });
            }
        }
        if let Some(snapped) = snap_cmat(&mat, SNAP_MAX_DEN, SNAP_TOL) {
            if snapped.pow(n).is_zero() {
                return Ok(NilpotentLog {
                    mat,
                    exact: Some(snapped),
                });
            }
        }
        let mut p = CMat::identity(n, n);
        for _ in 0..n {
            p = &p * &mat;
        }
        if p.norm() < UNIPOTENT_TOL * mat.norm().max(1.0) {
            Ok(NilpotentLog { mat, exact: None })
        } else {
            Err(HbError::NotNilpotent)
        }
    }

    /// Canonical nilpotent with the given profile: plain shift blocks,
    /// `N e_j = e_{j−2}` in ascending-label order.
    pub fn canonical(profile: &[usize]) -> Self {
        let n: usize = profile.iter().sum();
        let mut m = RatMat::zeros(n, n);
        let mut off = 0;
        for &s in profile {
            for k in 0..s.saturating_sub(1) {
                m[(off + k, off + k + 1)] = GRat::one();
            }
            off += s;
        }
        NilpotentLog {
            mat: m.to_cmat(),
            exact: Some(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn exact(&self) -> Option<&RatMat> {
        self.exact.as_ref()
    }

    /// `exp(N)` by the terminating series; exact when the matrix is exact.
    pub fn exp(&self) -> CMat {
        match &self.exact {
            Some(e) => exp_nilpotent_exact(e).to_cmat(),
            None => crate::mats::matexp(&self.mat),
        }
    }

    pub fn exp_exact(&self) -> Option<RatMat> {
        self.exact.as_ref().map(exp_nilpotent_exact)
    }
}

fn exp_nilpotent_exact(n_mat: &RatMat) -> RatMat {
    let n = n_mat.nrows;
    let mut sum = RatMat::identity(n);
    let mut term = RatMat::identity(n);
    for k in 1..n {
        term = term.mul(n_mat).scale(&GRat::from_ratio(1, k as i64));
        sum = sum.add(&term);
    }
    sum
}

/// `log γ = Σ_{k≥1} (−1)^{k+1} (γ−I)^k / k`, terminating at `k = n−1`.
pub fn log_unipotent(gamma: &UnipotentMonodromy) -> Result<NilpotentLog> {
    let n = gamma.dim();
    match gamma.exact() {
        Some(g) => {
            let s = g.sub(&RatMat::identity(n));
            let mut sum = RatMat::zeros(n, n);
            let mut power = RatMat::identity(n);
            for k in 1..n.max(2) {
                power = power.mul(&s);
                let sign = if k % 2 == 1 { 1 } else { -1 };
                sum = sum.add(&power.scale(&GRat::from_ratio(sign, k as i64)));
            }
            Ok(NilpotentLog {
                mat: sum.to_cmat(),
                exact: Some(sum),
            })
        }
        None => {
            let mut s = gamma.matrix().clone();
            for i in 0..n {
                s[(i, i)] -= crate::mats::cplx(1.0, 0.0);
            }
            let mut sum = CMat::zeros(n, n);
            let mut power = CMat::identity(n, n);
            for k in 1..n.max(2) {
                power = &power * &s;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sum += &power * crate::mats::cplx(sign / k as f64, 0.0);
            }
            NilpotentLog::from_matrix(sum)
        }
    }
}

/// Jordan profile from the exact rank sequence, sorted descending.
pub fn jordan_profile(n_log: &NilpotentLog) -> Result<Vec<usize>> {
    let n = n_log.dim();
    match n_log.exact() {
        Some(e) => {
            let ranks: Vec<usize> = (0..=n).map(|k| e.pow(k).rank()).collect();
            Ok(profile_from_ranks(&ranks))
        }
        None => Ok(jordan_profile_f64(n_log.matrix(), 1e-8)),
    }
}

/// Jordan profile of a numerically nilpotent matrix.
///
/// Two-scale rank rule per power `N^k`: the power counts as zero when its
/// largest singular value is below `tol·‖N‖₂^k` (noise inherited from an
/// inexact nilpotent), otherwise singular values above `tol·σ₁(N^k)` count
/// toward the rank.
pub fn jordan_profile_f64(m: &CMat, tol: f64) -> Vec<usize> {
    let n = m.nrows();
    let scale = {
        let sv = m.clone().svd(false, false).singular_values;
        sv.iter().cloned().fold(0.0, f64::max)
    };
    let mut ranks = Vec::with_capacity(n + 1);
    let mut p = CMat::identity(n, n);
    for k in 0..=n {
        let sv = p.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = if smax <= tol * scale.powi(k as i32) {
            0
        } else {
            sv.iter().filter(|&&s| s > tol * smax).count()
        };
        ranks.push(rank.min(n));
        p = &p * m;
    }
    profile_from_ranks(&ranks)
}

fn profile_from_ranks(ranks: &[usize]) -> Vec<usize> {
    let n = ranks.len() - 1;
    let mut profile = Vec::new();
    for k in 1..=n {
        // blocks of size exactly k
        let r_prev = ranks[k - 1];
        let r_k = ranks[k];
        let r_next = if k + 1 <= n { ranks[k + 1] } else { 0 };
        let count = (r_prev + r_next).saturating_sub(2 * r_k);
        for _ in 0..count {
            profile.push(k);
        }
    }
    profile.sort_unstable_by(|a, b| b.cmp(a));
    profile
}

/// One Jordan block of the adapted basis.
#[derive(Debug, Clone)]
pub struct Sl2Block {
    pub size: usize,
    /// Weight labels of the block's adapted vectors, ascending:
    /// `−(size−1), −(size−3), …, size−1`.
    pub labels: Vec<i64>,
    /// Column range of this block inside the adapted basis matrix.
    pub cols: std::ops::Range<usize>,
}

/// sl2 data attached to a nilpotent: adapted basis, `H₀`, `Y`, `N⁻`,
/// all in the original coordinates, exact.
#[derive(Debug, Clone)]
pub struct Sl2Data {
    pub nilpotent: NilpotentLog,
    pub profile: Vec<usize>,
    pub blocks: Vec<Sl2Block>,
    /// Columns are the adapted basis vectors (blocks in descending size,
    /// labels ascending within a block).
    pub basis: RatMat,
    pub basis_inv: RatMat,
    pub h0: RatMat,
    pub y: RatMat,
    pub nminus: RatMat,
}

impl Sl2Data {
    pub fn dim(&self) -> usize {
        self.basis.nrows
    }

    /// Weight label of each adapted basis column.
    pub fn labels_flat(&self) -> Vec<i64> {
        let mut out = vec![0; self.dim()];
        for b in &self.blocks {
            for (k, &l) in b.labels.iter().enumerate() {
                out[b.cols.start + k] = l;
            }
        }
        out
    }

    pub fn h0_c(&self) -> CMat {
        self.h0.to_cmat()
    }

    pub fn y_c(&self) -> CMat {
        self.y.to_cmat()
    }

    pub fn nminus_c(&self) -> CMat {
        self.nminus.to_cmat()
    }

    pub fn basis_c(&self) -> CMat {
        self.basis.to_cmat()
    }

    /// Exact bracket identities `[H₀,N] = 2N`, `[H₀,N⁻] = −2N⁻`,
    /// `[N,N⁻] = H₀`.
    pub fn brackets_exact(&self) -> bool {
        let n_mat = match self.nilpotent.exact() {
            Some(e) => e.clone(),
            None => return false,
        };
        let two = GRat::from_i64(2);
        let c1 = commutator(&self.h0, &n_mat).sub(&n_mat.scale(&two));
        let c2 = commutator(&self.h0, &self.nminus).add(&self.nminus.scale(&two));
        let c3 = commutator(&n_mat, &self.nminus).sub(&self.h0);
        c1.is_zero() && c2.is_zero() && c3.is_zero()
    }

    pub fn to_json(&self) -> Sl2Json {
        Sl2Json {
            n: self.dim(),
            n_matrix: MatrixJson::from_mat(self.nilpotent.matrix()),
            blocks: self
                .blocks
                .iter()
                .map(|b| Sl2BlockJson {
                    size: b.size,
                    basis: b
                        .cols
                        .clone()
                        .map(|c| {
                            self.basis
                                .column(c)
                                .iter()
                                .map(|g| {
                                    let z = g.to_c64();
                                    [z.re, z.im]
                                })
                                .collect()
                        })
                        .collect(),
                    labels: b.labels.clone(),
                })
                .collect(),
            h0: MatrixJson::from_mat(&self.h0_c()),
            y: MatrixJson::from_mat(&self.y_c()),
        }
    }
}

fn commutator(a: &RatMat, b: &RatMat) -> RatMat {
    a.mul(b).sub(&b.mul(a))
}

/// `sl2.json` payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sl2Json {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_matrix: MatrixJson,
    pub blocks: Vec<Sl2BlockJson>,
    #[serde(rename = "H0")]
    pub h0: MatrixJson,
    #[serde(rename = "Y")]
    pub y: MatrixJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sl2BlockJson {
    pub size: usize,
    pub basis: Vec<Vec<[f64; 2]>>,
    pub labels: Vec<i64>,
}

/// Builds the blockwise adapted basis and the sl2 triple for an exactly
/// nilpotent matrix.
///
/// Jordan chain tops are found per level: at level `j` the bottoms of blocks
/// of size ≥ j span `ker N ∩ im N^{j−1}`; bottoms inherited from larger
/// blocks are extended to a basis of that space (deterministically, in
/// echelon order), and each extension vector is lifted through `N^{j−1}` to a
/// fresh top.
pub fn sl2_triple(n_log: &NilpotentLog) -> Result<Sl2Data> {
    let exact = n_log
        .exact()
        .ok_or_else(|| {
            HbError::InvalidInput(
                "sl2 construction requires an exactly nilpotent matrix; \
                 provide rational entries"
            .into())
        })?
        .clone();
    let n = exact.nrows;

    // Powers and max block size.
    let mut powers = vec![RatMat::identity(n)];
    for _ in 0..n {
        let next = powers.last().unwrap().mul(&exact);
        powers.push(next);
    }
    let kmax = (0..=n)
        .find(|&k| powers[k].is_zero())
        .ok_or(HbError::NotNilpotent)?;
    if kmax == 0 {
        return Err(HbError::NotNilpotent); // zero-dimensional cannot happen
    }

    // Chains: (top, size), discovered in descending size order.
    let mut tops: Vec<(Vec<GRat>, usize)> = Vec::new();
    let mut bottoms: Vec<Vec<GRat>> = Vec::new();
    for j in (1..=kmax).rev() {
        // Basis of ker N ∩ im N^{j−1}.
        let im_basis = powers[j - 1].column_space_basis();
        if im_basis.is_empty() {
            continue;
        }
        let im_mat = RatMat::from_columns(n, &im_basis);
        let n_im = exact.mul(&im_mat);
        let coeff_kernel = n_im.kernel_basis();
        let space: Vec<Vec<GRat>> = coeff_kernel
            .iter()
            .map(|c| {
                let v = im_mat.mul(&RatMat::from_columns(im_basis.len(), &[c.clone()]));
                v.column(0)
            })
            .collect();

        for v in space {
            let mut test = bottoms.clone();
            test.push(v.clone());
            let test_mat = RatMat::from_columns(n, &test);
            if test_mat.rank() == bottoms.len() + 1 {
                let u = powers[j - 1]
                    .solve(&v)
                    .ok_or_else(|| HbError::InvalidInput("chain lift failed".into()))?;
                bottoms.push(v);
                tops.push((u, j));
            }
        }
    }

    // Adapted columns: per chain, ascending labels (N^{s−1}u first).
    let mut cols: Vec<Vec<GRat>> = Vec::new();
    let mut blocks = Vec::new();
    let mut profile = Vec::new();
    for (u, s) in &tops {
        let start = cols.len();
        let mut chain = Vec::with_capacity(*s);
        let u_mat = RatMat::from_columns(n, &[u.clone()]);
        for m in 0..*s {
            let v = powers[*s - 1 - m].mul(&u_mat).column(0);
            chain.push(v);
        }
        cols.extend(chain);
        let labels: Vec<i64> = (0..*s).map(|p| -((*s as i64) - 1) + 2 * p as i64).collect();
        blocks.push(Sl2Block {
            size: *s,
            labels,
            cols: start..start + *s,
        });
        profile.push(*s);
    }
    debug_assert_eq!(cols.len(), n);

    let basis = RatMat::from_columns(n, &cols);
    let basis_inv = basis
        .inverse()
        .ok_or_else(|| HbError::InvalidInput("adapted basis is singular".into()))?;

    // Adapted-coordinate operators.
    let mut h0_ad = RatMat::zeros(n, n);
    let mut y_ad = RatMat::zeros(n, n);
    let mut nm_ad = RatMat::zeros(n, n);
    for b in &blocks {
        let s = b.size;
        for (p, &l) in b.labels.iter().enumerate() {
            let c = b.cols.start + p;
            h0_ad[(c, c)] = GRat::from_i64(-l);
            y_ad[(c, c)] = GRat::from_i64(l);
            if p + 1 < s {
                // N⁻ e_{label j} = (p+1)(s−1−p) e_{label j+2}
                let coeff = ((p + 1) * (s - 1 - p)) as i64;
                nm_ad[(b.cols.start + p + 1, c)] = GRat::from_i64(coeff);
            }
        }
    }

    let conj = |m: &RatMat| basis.mul(m).mul(&basis_inv);
    let data = Sl2Data {
        nilpotent: n_log.clone(),
        profile,
        blocks,
        h0: conj(&h0_ad),
        y: conj(&y_ad),
        nminus: conj(&nm_ad),
        basis,
        basis_inv,
    };
    debug_assert!(data.brackets_exact());
    Ok(data)
}

/// Monodromy weight filtration `W_ℓ = span{adapted e_j : label ≤ ℓ}`.
#[derive(Debug, Clone)]
pub struct WeightFiltration {
    /// Distinct weights, ascending.
    pub weights: Vec<i64>,
    /// For each weight, a basis of `W_ℓ` (columns, original coordinates).
    pub spaces: Vec<RatMat>,
       /// Label of each adapted basis vector, in basis-column order.
    pub labels: Vec<i64>,
    pub basis: RatMat,
}

impl WeightFiltration {
    pub fn level(&self, l: i64) -> Option<&RatMat> {
        // W_l for arbitrary l: the largest stored weight ≤ l.
        let idx = self.weights.iter().rposition(|&w| w <= l)?;
        Some(&self.spaces[idx])
    }

    pub fn dim_w(&self, l: i64) -> usize {
        self.level(l).map(|m| m.ncols).unwrap_or(0)
    }

    /// Checks `N W_ℓ ⊆ W_{ℓ−2}` and the rank condition
    /// `N^ℓ : Gr_ℓ ≅ Gr_{−ℓ}` for every ℓ > 0, exactly.
    pub fn verify(&self, n_mat: &RatMat) -> bool {
        for (i, &w) in self.weights.iter().enumerate() {
            let img = n_mat.mul(&self.spaces[i]);
            let lower_dim = self.dim_w(w - 2);
            let lower = if lower_dim > 0 {
                self.level(w - 2).unwrap().clone()
            } else {
                RatMat::zeros(self.basis.nrows, 0)
            };
            // span(img) ⊆ span(lower)
            let mut joint_cols: Vec<Vec<GRat>> =
                (0..lower.ncols).map(|c| lower.column(c)).collect();
            for c in 0..img.ncols {
                joint_cols.push(img.column(c));
            }
            let joint = RatMat::from_columns(self.basis.nrows, &joint_cols);
            if joint.rank() != lower.rank() {
                return false;
            }
        }
        // Gr_ℓ ≅ Gr_{−ℓ} through N^ℓ.
        for &l in self.weights.iter().filter(|&&w| w > 0) {
            let gr_dim = self.dim_w(l) - self.dim_w(l - 1);
            let gr_neg_dim = self.dim_w(-l) - self.dim_w(-l - 1);
            if gr_dim != gr_neg_dim {
                return false;
            }
            // Move a Gr_ℓ basis through N^ℓ and check it stays independent
            // modulo W_{−ℓ−2}.
            let top_cols: Vec<Vec<GRat>> = self
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &lab)| lab == l)
                .map(|(c, _)| self.basis.column(c))
                .collect();
            if top_cols.is_empty() {
                continue;
            }
            let nl = n_mat.pow(l as usize);
            let mut joint: Vec<Vec<GRat>> = Vec::new();
            let below = self.dim_w(-l - 2);
            if below > 0 {
                let lower = self.level(-l - 2).unwrap();
                for c in 0..lower.ncols {
                    joint.push(lower.column(c));
                }
            }
            let base_rank = if joint.is_empty() {
                0
            } else {
                RatMat::from_columns(self.basis.nrows, &joint).rank()
            };
            for t in &top_cols {
                let img = nl.mul(&RatMat::from_columns(self.basis.nrows, &[t.clone()]));
                joint.push(img.column(0));
            }
            let full_rank = RatMat::from_columns(self.basis.nrows, &joint).rank();
            if full_rank - base_rank != top_cols.len() {
                return false;
            }
            // Images must also land inside W_{−ℓ}.
            let wneg = self.dim_w(-l);
            let wneg_basis = if wneg > 0 {
                self.level(-l).unwrap().clone()
            } else {
                RatMat::zeros(self.basis.nrows, 0)
            };
            let mut cols: Vec<Vec<GRat>> = (0..wneg_basis.ncols)
                .map(|c| wneg_basis.column(c))
                .collect();
            let rank0 = wneg_basis.rank();
            for t in &top_cols {
                let img = nl.mul(&RatMat::from_columns(self.basis.nrows, &[t.clone()]));
                cols.push(img.column(0));
            }
            if RatMat::from_columns(self.basis.nrows, &cols).rank() != rank0 {
                return false;
            }
        }
        true
    }
}

/// Weight filtration from the sl2 adapted basis.
pub fn weight_filtration(n_log: &NilpotentLog) -> Result<WeightFiltration> {
    let sl2 = sl2_triple(n_log)?;
    Ok(filtration_from_sl2(&sl2))
}

pub fn filtration_from_sl2(sl2: &Sl2Data) -> WeightFiltration {
    let labels = sl2.labels_flat();
    let mut weights: Vec<i64> = labels.clone();
    weights.sort_unstable();
    weights.dedup();
    let n = sl2.dim();
    let spaces = weights
        .iter()
        .map(|&w| {
            let cols: Vec<Vec<GRat>> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l <= w)
                .map(|(c, _)| sl2.basis.column(c))
                .collect();
            RatMat::from_columns(n, &cols)
        })
        .collect();
    WeightFiltration {
        weights,
        spaces,
        labels,
        basis: sl2.basis.clone(),
    }
}

/// All integer partitions of `n`, descending parts, deterministic order.
pub fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=max.min(n)).rev() {
            cur.push(k);
            rec(n - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mats::cplx;
    use exact::GRat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cmat(rows: &[&[f64]]) -> CMat {
        CMat::from_fn(rows.len(), rows[0].len(), |i, j| cplx(rows[i][j], 0.0))
    }

    #[test]
    fn log_identity_is_zero() {
        let gamma = UnipotentMonodromy::new(CMat::identity(3, 3)).unwrap();
        let n = log_unipotent(&gamma).unwrap();
        assert!(n.matrix().norm() == 0.0);
    }

    #[test]
    fn log_single_block() {
        let gamma = UnipotentMonodromy::new(cmat(&[&[1.0, 1.0], &[0.0, 1.0]])).unwrap();
        let n = log_unipotent(&gamma).unwrap();
        assert_eq!(n.matrix()[(0, 1)], cplx(1.0, 0.0));
        assert_eq!(n.matrix()[(0, 0)], cplx(0.0, 0.0));
    }

    #[test]
    fn log_two_step_series() {
        // γ = I + E12 + E23 → N = E12 + E23 − ½E13
        let gamma = UnipotentMonodromy::new(cmat(&[
            &[1.0, 1.0, 0.0],
            &[0.0, 1.0, 1.0],
            &[0.0, 0.0, 1.0],
        ]))
        .unwrap();
        let n = log_unipotent(&gamma).unwrap();
        assert_eq!(n.matrix()[(0, 1)], cplx(1.0, 0.0));
        assert_eq!(n.matrix()[(1, 2)], cplx(1.0, 0.0));
        assert_eq!(n.matrix()[(0, 2)], cplx(-0.5, 0.0));
        // exp(log γ) = γ exactly over the rationals.
        let back = n.exp_exact().unwrap();
        assert_eq!(&back, gamma.exact().unwrap());
    }

    #[test]
    fn non_unipotent_rejected() {
        let err = UnipotentMonodromy::new(cmat(&[&[2.0, 0.0], &[0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, HbError::NotUnipotent));
    }

    #[test]
    fn exp_log_round_trip_exact_all_profiles() {
        for n in 1..=6 {
            for profile in partitions(n) {
                let gamma = UnipotentMonodromy::canonical(&profile);
                let log = log_unipotent(&gamma).unwrap();
                let back = log.exp_exact().unwrap();
                assert_eq!(&back, gamma.exact().unwrap(), "profile {profile:?}");
            }
        }
    }

    #[test]
    fn profile_examples() {
        let zero = NilpotentLog::from_matrix(CMat::zeros(3, 3)).unwrap();
        assert_eq!(jordan_profile(&zero).unwrap(), vec![1, 1, 1]);

        let block3 = NilpotentLog::canonical(&[3]);
        assert_eq!(jordan_profile(&block3).unwrap(), vec![3]);

        let mixed = NilpotentLog::canonical(&[2, 1]);
        assert_eq!(jordan_profile(&mixed).unwrap(), vec![2, 1]);
    }

    #[test]
    fn profile_float_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for profile in [vec![3usize], vec![2, 2], vec![4, 1]] {
            let n: usize = profile.iter().sum();
            let canon = NilpotentLog::canonical(&profile);
            // Conjugate by a random unitary and add noise.
            let g = crate::mats::testing::random_cmat(&mut rng, n).qr().q();
            let gi = g.adjoint();
            let mut m = &g * canon.matrix() * &gi;
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += cplx(rng.gen_range(-1e-12..1e-12), 0.0);
                }
            }
            assert_eq!(jordan_profile_f64(&m, 1e-8), profile);
        }
    }

    #[test]
    fn sl2_rank2_example() {
        let n = NilpotentLog::canonical(&[2]);
        let sl2 = sl2_triple(&n).unwrap();
        assert_eq!(sl2.profile, vec![2]);
        let h0 = sl2.h0_c();
        assert_eq!(h0[(0, 0)], cplx(1.0, 0.0));
        assert_eq!(h0[(1, 1)], cplx(-1.0, 0.0));
        let nm = sl2.nminus_c();
        assert_eq!(nm[(1, 0)], cplx(1.0, 0.0));
        assert_eq!(nm[(0, 1)], cplx(0.0, 0.0));
        assert!(sl2.brackets_exact());
    }

    #[test]
    fn sl2_rank3_example() {
        let n = NilpotentLog::canonical(&[3]);
        let sl2 = sl2_triple(&n).unwrap();
        let h0 = sl2.h0_c();
        assert_eq!(h0[(0, 0)], cplx(2.0, 0.0));
        assert_eq!(h0[(1, 1)], cplx(0.0, 0.0));
        assert_eq!(h0[(2, 2)], cplx(-2.0, 0.0));
        // N⁻ e_{−2} = 2 e_0, N⁻ e_0 = 2 e_2 in the adapted (canonical) basis.
        let nm = sl2.nminus_c();
        assert_eq!(nm[(1, 0)], cplx(2.0, 0.0));
        assert_eq!(nm[(2, 1)], cplx(2.0, 0.0));
    }

    #[test]
    fn sl2_zero_matrix() {
        let n = NilpotentLog::from_matrix(CMat::zeros(2, 2)).unwrap();
        let sl2 = sl2_triple(&n).unwrap();
        assert!(sl2.h0.is_zero());
        assert!(sl2.nminus.is_zero());
        assert_eq!(sl2.profile, vec![1, 1]);
    }

    #[test]
    fn brackets_exact_all_profiles_n6() {
        for n in 1..=6 {
            for profile in partitions(n) {
                let log = NilpotentLog::canonical(&profile);
                let sl2 = sl2_triple(&log).unwrap();
                assert!(sl2.brackets_exact(), "profile {profile:?}");
                assert_eq!(sl2.profile, profile);
            }
        }
    }

    #[test]
    fn brackets_exact_under_rational_conjugation() {
        // Conjugated nilpotents exercise the non-canonical path.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for profile in [vec![2usize], vec![3], vec![2, 1], vec![3, 2]] {
            let n: usize = profile.iter().sum();
            let canon = NilpotentLog::canonical(&profile);
            // Random small-integer conjugator with determinant ±1-ish.
            let g = loop {
                let cand = RatMat::from_fn(n, n, |i, j| {
                    let v: i64 = if i == j {
                        1
                    } else {
                        rng.gen_range(-2..=2)
                    };
                    GRat::from_i64(v)
                });
                if cand.inverse().is_some() {
                    break cand;
                }
            };
            let gi = g.inverse().unwrap();
            let conj = g.mul(canon.exact().unwrap()).mul(&gi);
            let log = NilpotentLog::from_matrix(conj.to_cmat()).unwrap();
            let sl2 = sl2_triple(&log).unwrap();
            assert!(sl2.brackets_exact(), "profile {profile:?}");
            assert_eq!(sl2.profile, profile);
            let filt = filtration_from_sl2(&sl2);
            assert!(filt.verify(log.exact().unwrap()), "profile {profile:?}");
        }
    }

    #[test]
    fn filtration_examples() {
        let zero = NilpotentLog::from_matrix(CMat::zeros(3, 3)).unwrap();
        let filt = weight_filtration(&zero).unwrap();
        assert_eq!(filt.weights, vec![0]);
        assert_eq!(filt.dim_w(0), 3);

        let b2 = NilpotentLog::canonical(&[2]);
        let f2 = weight_filtration(&b2).unwrap();
        assert_eq!(f2.weights, vec![-1, 1]);
        assert_eq!(f2.dim_w(-1), 1);
        // W_{−1} = Im N = ker N: first canonical vector.
        let w = f2.level(-1).unwrap();
        assert!(!w.column(0)[0].is_zero());
        assert!(w.column(0)[1].is_zero());

        let m21 = NilpotentLog::canonical(&[2, 1]);
        let f21 = weight_filtration(&m21).unwrap();
        assert_eq!(f21.weights, vec![-1, 0, 1]);
    }

    #[test]
    fn filtration_matches_kernel_power_oracle() {
        // Independent construction: W_ℓ = Σ_k ker N^{ℓ+k+1} ∩ im N^k,
        // Jacobson–Morosov-free.
        fn oracle_space(n_mat: &RatMat, l: i64) -> RatMat {
            let n = n_mat.nrows;
            let mut cols: Vec<Vec<GRat>> = Vec::new();
            for k in 0..=(n as i64) {
                let power = l + k + 1;
                if power < 0 {
                    continue;
                }
                let ker_pow = n_mat.pow(power.min(n as i64 + 1) as usize);
                let im = n_mat.pow(k as usize);
                let im_basis = im.column_space_basis();
                if im_basis.is_empty() {
                    continue;
                }
                let im_mat = RatMat::from_columns(n, &im_basis);
                let prod = ker_pow.mul(&im_mat);
                for c in prod.kernel_basis() {
                    let v = im_mat.mul(&RatMat::from_columns(im_basis.len(), &[c]));
                    cols.push(v.column(0));
                }
            }
            if cols.is_empty() {
                RatMat::zeros(n, 0)
            } else {
                RatMat::from_columns(n, &cols)
            }
        }

        for n in 1..=5 {
            for profile in partitions(n) {
                let log = NilpotentLog::canonical(&profile);
                let filt = weight_filtration(&log).unwrap();
                let n_mat = log.exact().unwrap();
                assert!(filt.verify(n_mat), "verify failed for {profile:?}");
                let lmax = *profile.iter().max().unwrap() as i64 - 1;
                for l in -lmax..=lmax {
                    let ours = filt.dim_w(l);
                    let oracle = oracle_space(n_mat, l);
                    assert_eq!(
                        oracle.rank(),
                        ours,
                        "dim W_{l} mismatch for profile {profile:?}"
                    );
                    // Same span: ranks of unions agree.
                    if ours > 0 {
                        let ours_mat = filt.level(l).unwrap();
                        let mut cols: Vec<Vec<GRat>> =
                            (0..ours_mat.ncols).map(|c| ours_mat.column(c)).collect();
                        for c in 0..oracle.ncols {
                            cols.push(oracle.column(c));
                        }
                        let joint = RatMat::from_columns(n, &cols);
                        assert_eq!(joint.rank(), ours, "span mismatch at W_{l} {profile:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn snapped_float_monodromy() {
        // Entries like 1/3 are not dyadic; the snap path must recover them.
        let g = cmat(&[&[1.0, 1.0 / 3.0], &[0.0, 1.0]]);
        let gamma = UnipotentMonodromy::new(g).unwrap();
        assert!(gamma.was_snapped() || gamma.exact().is_some());
        let log = log_unipotent(&gamma).unwrap();
        let sl2 = sl2_triple(&log).unwrap();
        assert!(sl2.brackets_exact());
    }

    #[test]
    fn sl2_json_schema_round_trip() {
        let n = NilpotentLog::canonical(&[2, 1]);
        let sl2 = sl2_triple(&n).unwrap();
        let json = serde_json::to_string(&sl2.to_json()).unwrap();
        let parsed: Sl2Json = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.n, 3);
        assert_eq!(parsed.blocks.len(), 2);
        assert_eq!(parsed.blocks[0].labels, vec![-1, 1]);
        assert_eq!(parsed.blocks[1].labels, vec![0]);
    }
}
