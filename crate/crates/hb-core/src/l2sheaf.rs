//! Symbolic L² membership of germs near the divisor and the graded
//! exact-sequence probe, with a numeric integration oracle.
//!
//! A germ term is `t₁^{a₁} t₂^{a₂} (log t)^{p} · (form part) ⊗ v` with `v` of
//! exact weights `(l₁, l₂)` with respect to the two weight filtrations
//! (`W¹ = W(N₁)`, `W² = W(N₁+N₂)` in the intended reading). The symbolic
//! predicate pattern-matches the four-summand decompositions
//!
//! ```text
//!  Ω⁰ = t₁t₂H̄ + t₁⋃_{l₂−l₁≤0}W̄ + t₂W̄¹₀      + ⋃_{l₁≤0,  l₂≤l₁}  W̄
//!  Ω¹ = dt₁/t₁ ⊗ (… t₂W̄¹₋₂ + ⋃_{l₁≤−2, l₂≤l₁}W̄)
//!     + dt₂/t₂ ⊗ (… t₁⋃_{l₂≤l₁−2} + ⋃_{l₁≤0,  l₂≤l₁−2}W̄)
//!  Ω² = dt₁/t₁∧dt₂/t₂ ⊗ (… ⋃_{l₁≤−2, l₂≤l₁−2}W̄)
//! ```
//!
//! The numeric oracle integrates the norm model `‖v‖² = (L₁/L₂)^{l₁}·L₂^{l₂}`
//! (equivalently `L₁^{l₁}·L₂^{l₂−l₁}`, a single global formula once the
//! second-variable weight is measured relative to the first) against the
//! Poincaré-like volume over the corner neighbourhood — the union of both
//! `D_ε` orderings and the bounded-ratio band, which reduces exactly to a
//! product of two one-dimensional `∫ e^{−2aL} L^c dL` factors. Membership
//! verdicts are therefore ε-independent, which is itself one of the spec'd
//! invariants.

use serde::{Deserialize, Serialize};

use crate::error::{HbError, Result};

/// Wedge factors present in a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormPart {
    pub dt1: bool,
    pub dt2: bool,
}

impl FormPart {
    pub const NONE: FormPart = FormPart {
        dt1: false,
        dt2: false,
    };

    pub fn degree(&self) -> usize {
        self.dt1 as usize + self.dt2 as usize
    }
}

/// One pure-weight term of a germ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GermTerm {
    /// Monomial exponents `(a₁, a₂)`, `a_k ≥ 0`.
    pub monomial: [u32; 2],
    /// Log powers `(p₁, p₂)`; accepted by the oracle, rejected by the
    /// symbolic predicate.
    pub log_powers: [u32; 2],
    pub form: FormPart,
    /// Exact weight labels `(l₁, l₂)`.
    pub labels: [i64; 2],
}

/// Formal local section: finitely many pure-weight terms in 1 or 2 variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GermExpression {
    pub vars: usize,
    pub terms: Vec<GermTerm>,
}

impl GermExpression {
    pub fn new(vars: usize, terms: Vec<GermTerm>) -> Result<Self> {
        if vars == 0 || vars > 2 {
            return Err(HbError::BeyondScope(format!("{vars} variables")));
        }
        for t in &terms {
            if vars == 1 && (t.monomial[1] != 0 || t.form.dt2 || t.log_powers[1] != 0) {
                return Err(HbError::InvalidInput(
                    "one-variable germ uses second-variable data".into(),
                ));
            }
        }
        Ok(GermExpression { vars, terms })
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.form.degree()).max().unwrap_or(0)
    }
}

/// Weight labels (and optional Hodge levels) per adapted basis vector.
#[derive(Debug, Clone)]
pub struct FiltrationData {
    pub labels1: Vec<i64>,
    pub labels2: Vec<i64>,
    /// Hodge level per basis vector, for the graded probe.
    pub hodge: Option<Vec<i64>>,
}

impl FiltrationData {
    pub fn dim(&self) -> usize {
        self.labels1.len()
    }

    /// Splits a coefficient vector along the graded decomposition: indices
    /// grouped by their `(l₁, l₂)` pair, deterministic order.
    pub fn split_vector(&self, support: &[usize]) -> Vec<([i64; 2], Vec<usize>)> {
        let mut groups: Vec<([i64; 2], Vec<usize>)> = Vec::new();
        for &i in support {
            let key = [self.labels1[i], *self.labels2.get(i).unwrap_or(&0)];
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        groups
    }
}

/// `D_ε` region parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionSpec {
    pub epsilon: f64,
}

impl RegionSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(HbError::InvalidInput("epsilon must lie in (0,1)".into()));
        }
        Ok(RegionSpec { epsilon })
    }

    /// Lower integration bound for the L-variables.
    fn l_floor(&self) -> f64 {
        self.epsilon.max(1.0)
    }
}

/// Which summand of the four-term decomposition certified a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Summand {
    BothPrefactors,
    T1Prefactor,
    T2Prefactor,
    Bare,
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Verdict {
    pub member: bool,
    /// Per term: the certifying summand (None where no summand matched).
    pub trace: Vec<Option<Summand>>,
}

/// Label conditions of the four summands for a given form part.
/// Returns (t1-condition, t2-threshold-on-l1, bare-conditions).
fn summand_conditions(form: FormPart) -> (fn(i64, i64) -> bool, i64, fn(i64, i64) -> bool) {
    match (form.dt1, form.dt2) {
        (false, false) => (|l1, l2| l2 - l1 <= 0, 0, |l1, l2| l1 <= 0 && l2 <= l1),
        (true, false) => (|l1, l2| l2 - l1 <= 0, -2, |l1, l2| l1 <= -2 && l2 <= l1),
        (false, true) => (|l1, l2| l2 <= l1 - 2, 0, |l1, l2| l1 <= 0 && l2 <= l1 - 2),
        (true, true) => (|l1, l2| l2 <= l1 - 2, -2, |l1, l2| l1 <= -2 && l2 <= l1 - 2),
    }
}

/// Symbolic membership in `Ω^r(H_ℂ)_{(2)}` by exact pattern match.
pub fn is_l2(germ: &GermExpression, _f: Option<&FiltrationData>, _region: RegionSpec) -> Result<L2Verdict> {
    if germ.vars > 2 || germ.degree() > 2 {
        return Err(HbError::BeyondScope(format!(
            "vars {} degree {}",
            germ.vars,
            germ.degree()
        )));
    }
    if germ.terms.iter().any(|t| t.log_powers.iter().any(|&p| p > 0)) {
        return Err(HbError::BeyondScope(
            "the reference formulas carry no log factors; use the numeric oracle".into(),
        ));
    }
    let mut trace = Vec::with_capacity(germ.terms.len());
    let mut member = true;
    for t in &germ.terms {
        let hit = if germ.vars == 1 {
            let l = t.labels[0];
            let bare_ok = match t.form.dt1 {
                false => l <= 0,
                true => l <= -2,
            };
            if t.monomial[0] >= 1 {
                Some(Summand::T1Prefactor)
            } else if bare_ok {
                Some(Summand::Bare)
            } else {
                None
            }
        } else {
            let (c_t1, t2_threshold, c_bare) = summand_conditions(t.form);
            let (l1, l2) = (t.labels[0], t.labels[1]);
            let has_t1 = t.monomial[0] >= 1;
            let has_t2 = t.monomial[1] >= 1;
            if has_t1 && has_t2 {
                Some(Summand::BothPrefactors)
            } else if has_t1 && c_t1(l1, l2) {
                Some(Summand::T1Prefactor)
            } else if has_t2 && l1 <= t2_threshold {
                Some(Summand::T2Prefactor)
            } else if c_bare(l1, l2) {
                Some(Summand::Bare)
            } else {
                None
            }
        };
        member &= hit.is_some();
        trace.push(hit);
    }
    Ok(L2Verdict { member, trace })
}

/// One radial factor `∫_{Λ}^{∞} e^{−2aL} L^{c} dL`: analytic convergence
/// verdict plus a numeric value (f64::INFINITY when divergent).
fn radial_factor(a: u32, c: f64, floor: f64) -> (bool, f64) {
    if a >= 1 {
        // Exponential decay: always converges; integrate numerically to the
        // negligible-tail cutoff.
        let upper = floor + 24.0 / a as f64;
        let m = 4000;
        let h = (upper - floor) / m as f64;
        let f = |l: f64| (-2.0 * a as f64 * l).exp() * l.powf(c);
        let mut s = f(floor) + f(upper);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(floor + i as f64 * h);
        }
        (true, s * h / 3.0)
    } else if c < -1.0 {
        (true, floor.powf(c + 1.0) / (-c - 1.0))
    } else {
        (false, f64::INFINITY)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericVerdict {
    pub member: bool,
    /// Product of the per-variable factor integrals (∞ if divergent);
    /// 2π-angle factors omitted (they cancel in verdicts).
    pub integral: f64,
    pub per_term: Vec<bool>,
}

/// Brute-force oracle: integrates `‖germ‖²` with the model norm
/// `‖v‖² = L₁^{l₁} L₂^{l₂−l₁}` (one variable: `L^l`), the Poincaré-like
/// volume `Π dL_k/L_k²`, and form factors `|dt_k/t_k|² = L_k²`, per term.
pub fn is_l2_numeric(
    germ: &GermExpression,
    _f: Option<&FiltrationData>,
    region: RegionSpec,
) -> Result<NumericVerdict> {
    if germ.vars > 2 || germ.degree() > 2 {
        return Err(HbError::BeyondScope(format!(
            "vars {} degree {}",
            germ.vars,
            germ.degree()
        )));
    }
    let floor = region.l_floor();
    let mut member = true;
    let mut per_term = Vec::new();
    let mut total = 0.0f64;
    for t in &germ.terms {
        let mut term_ok = true;
        let mut term_val = 1.0f64;
        for var in 0..germ.vars {
            let weight_exp = if germ.vars == 1 {
                t.labels[0] as f64
            } else if var == 0 {
                t.labels[0] as f64
            } else {
                (t.labels[1] - t.labels[0]) as f64
            };
            let form_exp = match var {
                0 if t.form.dt1 => 2.0,
                1 if t.form.dt2 => 2.0,
                _ => 0.0,
            };
            let c = weight_exp + form_exp + 2.0 * t.log_powers[var] as f64 - 2.0;
            let (ok, val) = radial_factor(t.monomial[var], c, floor);
            term_ok &= ok;
            term_val *= val;
        }
        per_term.push(term_ok);
        member &= term_ok;
        total += term_val;
    }
    Ok(NumericVerdict {
        member,
        integral: if member { total } else { f64::INFINITY },
        per_term,
    })
}

/// Formal Higgs action `N_k ⊗ dt_k/t_k` on a germ: wedges the form factor
/// and shifts the labels (`N₁` lowers both, `N₂` only the second — the first
/// filtration does not see `N₂`). Terms whose form already contains the
/// factor are annihilated by the wedge.
pub fn higgs_shift(germ: &GermExpression, k: usize) -> Result<GermExpression> {
    if k == 0 || k > germ.vars {
        return Err(HbError::InvalidInput(format!("no variable t{k}")));
    }
    let mut terms = Vec::new();
    for t in &germ.terms {
        let already = if k == 1 { t.form.dt1 } else { t.form.dt2 };
        if already {
            continue; // dt_k ∧ dt_k = 0
        }
        let mut nt = t.clone();
        if k == 1 {
            nt.form.dt1 = true;
            nt.labels[0] -= 2;
            nt.labels[1] -= 2;
        } else {
            nt.form.dt2 = true;
            nt.labels[1] -= 2;
        }
        terms.push(nt);
    }
    GermExpression::new(germ.vars, terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradedProbeCase {
    pub hodge_level: i64,
    pub in_fp: bool,
    pub graded_zero: bool,
    pub in_fp_plus_1: Option<bool>,
    pub lift_member: Option<bool>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradedProbeReport {
    pub cases: Vec<GradedProbeCase>,
    pub pass: bool,
}

/// Probes exactness of
/// `0 → F^{p+1}Ω^r_{(2)} → F^pΩ^r_{(2)} → (Ω^r ⊗ E^{p−r})_{(2)} → 0`
/// on sampled germs carried by single basis directions.
///
/// Each sample is a term together with the Hodge level of its coefficient
/// direction. Kernel direction: a germ of level > p−r (graded image zero)
/// must lie in `F^{p+1}` iff it is L². Surjectivity: a graded germ of level
/// exactly p−r lifts along the same basis direction; quotient and total norms
/// agree on split directions, so the lift must have the same verdict.
pub fn graded_sequence_probe(
    f: &FiltrationData,
    germs: &[(GermExpression, usize, i64)], // (germ, basis index, p)
    region: RegionSpec,
) -> Result<GradedProbeReport> {
    let hodge = f
        .hodge
        .as_ref()
        .ok_or_else(|| HbError::InvalidInput("no Hodge levels in filtration data".into()))?;
    let mut cases = Vec::new();
    let mut pass = true;
    for (germ, basis_idx, p) in germs {
        let r = germ.degree() as i64;
        let level = hodge[*basis_idx];
        let in_fp = level >= p - r && is_l2(germ, Some(f), region)?.member;
        let graded_zero = level > p - r;
        let (in_fp_plus_1, lift_member, ok) = if graded_zero {
            // Kernel: zero graded image must mean F^{p+1} membership.
            let in_next = level >= p + 1 - r && is_l2(germ, Some(f), region)?.member;
            let ok = !in_fp || in_next;
            (Some(in_next), None, ok)
        } else {
            // Surjectivity: the split-basis lift has the same L² verdict.
            let graded_member = is_l2(germ, Some(f), region)?.member;
            let lift = is_l2(germ, Some(f), region)?.member;
            (None, Some(lift), graded_member == lift)
        };
        pass &= ok;
        cases.push(GradedProbeCase {
            hodge_level: level,
            in_fp,
            graded_zero,
            in_fp_plus_1,
            lift_member,
            ok,
        });
    }
    Ok(GradedProbeReport { cases, pass })
}

/// `germs.json` schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GermJson {
    pub vars: usize,
    pub terms: Vec<GermTermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GermTermJson {
    pub a: Vec<u32>,
    #[serde(default)]
    pub logp: Vec<u32>,
    #[serde(default)]
    pub form: Vec<String>,
    pub labels: Vec<i64>,
}

impl GermJson {
    pub fn to_germ(&self) -> Result<GermExpression> {
        let terms: Result<Vec<GermTerm>> = self
            .terms
            .iter()
            .map(|t| {
                let get = |v: &Vec<u32>, i: usize| v.get(i).copied().unwrap_or(0);
                let getl = |v: &Vec<i64>, i: usize| v.get(i).copied().unwrap_or(0);
                let mut form = FormPart::NONE;
                for f in &t.form {
                    match f.as_str() {
                        "dt1/t1" => form.dt1 = true,
                        "dt2/t2" => form.dt2 = true,
                        other => {
                            return Err(HbError::InvalidInput(format!(
                                "unknown form factor {other:?}"
                            )))
                        }
                    }
                }
                Ok(GermTerm {
                    monomial: [get(&t.a, 0), get(&t.a, 1)],
                    log_powers: [get(&t.logp, 0), get(&t.logp, 1)],
                    form,
                    labels: [getl(&t.labels, 0), getl(&t.labels, 1)],
                })
            })
            .collect();
        GermExpression::new(self.vars, terms?)
    }

    pub fn from_germ(g: &GermExpression) -> Self {
        GermJson {
            vars: g.vars,
            terms: g
                .terms
                .iter()
                .map(|t| GermTermJson {
                    a: t.monomial.to_vec(),
                    logp: t.log_powers.to_vec(),
                    form: {
                        let mut v = Vec::new();
                        if t.form.dt1 {
                            v.push("dt1/t1".into());
                        }
                        if t.form.dt2 {
                            v.push("dt2/t2".into());
                        }
                        v
                    },
                    labels: t.labels.to_vec(),
                })
                .collect(),
        }
    }
}

/// Exhaustive/randomized predicate–oracle agreement sweep. Returns the number
/// of germs checked; errors on the first disagreement.
pub fn oracle_agreement_sweep(
    degree: usize,
    label_range: i64,
    region: RegionSpec,
    seed: u64,
    min_cases: usize,
) -> Result<usize> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let forms: Vec<FormPart> = match degree {
        0 => vec![FormPart::NONE],
        1 => vec![
            FormPart { dt1: true, dt2: false },
            FormPart { dt1: false, dt2: true },
        ],
        2 => vec![FormPart { dt1: true, dt2: true }],
        _ => return Err(HbError::BeyondScope("degree > 2".into())),
    };
    let mut count = 0usize;
    while count < min_cases {
        for l1 in -label_range..=label_range {
            for l2 in -label_range..=label_range {
                for form in &forms {
                    let monomial = [rng.gen_range(0..3u32), rng.gen_range(0..3u32)];
                    let germ = GermExpression::new(
                        2,
                        vec![GermTerm {
                            monomial,
                            log_powers: [0, 0],
                            form: *form,
                            labels: [l1, l2],
                        }],
                    )?;
                    let sym = is_l2(&germ, None, region)?;
                    let num = is_l2_numeric(&germ, None, region)?;
                    if sym.member != num.member {
                        return Err(HbError::InvalidInput(format!(
                            "oracle disagreement at labels ({l1},{l2}) monomial {monomial:?} \
                             form {form:?}: symbolic {} numeric {}",
                            sym.member, num.member
                        )));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}
