//! The V/W/X/Y partial-integral decomposition of the commutator functional,
//! the asymptotic trace test, and the graded heat idempotent pairing.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::dirac::{DiracOperator, SectionSpace};
use crate::error::{Error, Result};
use crate::exhaustion::{accumulation_points, ExhaustionPlan};
use crate::heat::{fit_al_constants, fit_gaussian_envelope, KernelAt, KernelFamily};
use crate::linalg::{dense_op_norm, linear_fit, CMat, SparseOp};
use crate::trace::{action_diagonal, localized_stage, Weighting};
use crate::SNAP;

/// Values below this are treated as sitting at the arithmetic roundoff
/// floor: decay-trend fits on them are meaningless (and unnecessary).
pub const NOISE_FLOOR: f64 = 1e-12;

/// Site-pair regions V_j, W_j, X_j, Y_j partitioning U_j × M.
#[derive(Clone, Debug)]
pub struct RegionDecomposition {
    pub j: usize,
    pub r: f64,
    pub v: Vec<(usize, usize)>,
    pub w: Vec<(usize, usize)>,
    pub x: Vec<(usize, usize)>,
    pub y: Vec<(usize, usize)>,
}

impl RegionDecomposition {
    pub fn total_pairs(&self) -> usize {
        self.v.len() + self.w.len() + self.x.len() + self.y.len()
    }
}

/// V_j = U_j × U_j; W_j/X_j split U_j × (M ∖ M_j) by whether m' comes within
/// r of m or φ⁻¹(m); Y_j = U_j × (M_j ∖ U_j).
pub fn decompose_regions(
    plan: &ExhaustionPlan,
    pair: &crate::isometry::IsometryPair,
    j: usize,
    r: f64,
) -> Result<RegionDecomposition> {
    if !(r > 0.0) {
        return Err(Error::Exhaustion("region decomposition needs r > 0".into()));
    }
    if j >= plan.stage_count() {
        return Err(Error::Exhaustion(format!("stage {j} out of range")));
    }
    let model = plan.model();
    let mj = plan.mj(j);
    let uj_sites = plan.uj_sites(j);
    let in_uj: std::collections::HashSet<usize> = uj_sites.iter().copied().collect();
    let eps = SNAP * (1.0 + r.abs());
    let mut dec = RegionDecomposition {
        j,
        r,
        v: Vec::new(),
        w: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
    };
    for &m in &uj_sites {
        let mpos = model.site_pos(m);
        let mphi = pair.apply_pos_inv(&mpos);
        for mp in 0..model.site_count() {
            let ppos = model.site_pos(mp);
            if in_uj.contains(&mp) {
                dec.v.push((m, mp));
            } else if mj.contains_pos(model, &ppos) {
                dec.y.push((m, mp));
            } else {
                let near = model.distance_pos(&mpos, &ppos) < r - eps
                    || model.distance_pos(&mphi, &ppos) < r - eps;
                if near {
                    dec.w.push((m, mp));
                } else {
                    dec.x.push((m, mp));
                }
            }
        }
    }
    Ok(dec)
}

/// The four partial integrals of the commutator integrand
/// tr(Φ κ_A(φ⁻¹m, m') κ_B(m', m) − Φ κ_B(φ⁻¹m, m') κ_A(m', m)),
/// each normalized by vol(U_j). Order: [V, W, X, Y].
pub fn commutator_region_integrals(
    space: &SectionSpace,
    action: &SparseOp,
    a: &KernelAt<'_>,
    b: &KernelAt<'_>,
    plan: &ExhaustionPlan,
    dec: &RegionDecomposition,
) -> Result<[Complex64; 4]> {
    let pa = action.mul_dense(a.op_matrix());
    let pb = action.mul_dense(b.op_matrix());
    let vol = plan.uj_volume(dec.j);
    let part = |pairs: &[(usize, usize)]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(m, mp) in pairs {
            let rows = space.site_dofs(m);
            let cols = space.site_dofs(mp);
            for &i in &rows {
                for &k in &cols {
                    acc += pa[(i, k)] * b.op_matrix()[(k, i)] - pb[(i, k)] * a.op_matrix()[(k, i)];
                }
            }
        }
        acc / Complex64::new(vol, 0.0)
    };
    Ok([part(&dec.v), part(&dec.w), part(&dec.x), part(&dec.y)])
}

/// Cauchy–Schwarz bound for the X_j part: (1/vol) Σ_m h^n ·
/// √(row mass of κ_A at φ⁻¹m beyond r) · √(column mass of κ_B at m beyond r).
pub fn x_region_bound(
    plan: &ExhaustionPlan,
    phi_inverse_site: impl Fn(usize) -> usize,
    a: &KernelAt<'_>,
    b: &KernelAt<'_>,
    j: usize,
    r: f64,
) -> Result<f64> {
    let hn = plan.model().weight();
    let vol = plan.uj_volume(j);
    let mut acc = 0.0;
    for &m in &plan.uj_sites(j) {
        let (row_a, _) = a.offdiagonal_mass(phi_inverse_site(m), r);
        let (_, col_b) = b.offdiagonal_mass(m, r);
        acc += hn * row_a.sqrt() * col_b.sqrt();
    }
    Ok(acc / vol)
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceTestRow {
    pub t_squared: f64,
    /// per-stage commutator functional values (re, im)
    pub stages: Vec<[f64; 2]>,
    /// functional value: accumulation-selected stage value magnitude
    pub value: f64,
    /// region parts [V, W, X, Y] magnitudes at the last stage
    pub region_parts: [f64; 4],
    /// the displayed Y-estimate v_A(δ/2,t)·C_B t^{−a_B} + (A↔B)
    pub y_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceTestReport {
    pub rows: Vec<TraceTestRow>,
    /// log|value| vs log t slope over the smaller half of the grid
    pub slope: Option<f64>,
    pub at_noise_floor: bool,
    pub final_value: f64,
    pub pass: bool,
}

/// The asymptotic trace test: commutator functional values across a t-grid,
/// with the trend statistic and the Y-region estimate displayed per t.
///
/// A is expected equivariant; δ is the displacement bound off U.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_trace_test(
    plan: &ExhaustionPlan,
    pair: &crate::isometry::IsometryPair,
    a: &KernelFamily,
    b: &KernelFamily,
    t_squared_grid: &[f64],
    r: f64,
    delta: f64,
    tol: f64,
) -> Result<TraceTestReport> {
    let space = a.space();
    if !Arc::ptr_eq(space, b.space()) {
        return Err(Error::Operator("families live on different spaces".into()));
    }
    let action = space.action(pair)?;
    // fitted decay data on the calibration half of the grid (odd indices)
    let calib_ts: Vec<f64> = t_squared_grid
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 1)
        .map(|(_, &t2)| t2.sqrt())
        .collect();
    let probe_sites: Vec<usize> = {
        let sites = plan.uj_sites(plan.stage_count() - 1);
        let step = (sites.len() / 4).max(1);
        sites.into_iter().step_by(step).take(4).collect()
    };
    let y_bound_data = if calib_ts.len() >= 2 {
        let mut pts = Vec::new();
        for &t in &calib_ts {
            for &m in &probe_sites {
                pts.push((m, delta / 2.0, t));
            }
        }
        let env_a = fit_gaussian_envelope(a, &pts).ok();
        let env_b = fit_gaussian_envelope(b, &pts).ok();
        let ca = fit_al_constants(a, &probe_sites, &calib_ts).ok();
        let cb = fit_al_constants(b, &probe_sites, &calib_ts).ok();
        match (env_a, env_b, ca, cb) {
            (Some(ea), Some(eb), Some((ca, aa)), Some((cb, ab))) => Some((ea, eb, ca, aa, cb, ab)),
            _ => None,
        }
    } else {
        None
    };

    let last_j = plan.stage_count() - 1;
    let dec = decompose_regions(plan, pair, last_j, r)?;
    let mut rows = Vec::with_capacity(t_squared_grid.len());
    for &t2 in t_squared_grid {
        let t = t2.sqrt();
        let a_at = a.at(t)?;
        let b_at = b.at(t)?;
        // commutator operator and its stage values
        let comm = a_at.op_matrix() * b_at.op_matrix() - b_at.op_matrix() * a_at.op_matrix();
        let diag = action_diagonal(space, &action, &comm, Weighting::Plain);
        let stages: Vec<Complex64> = (0..plan.stage_count())
            .map(|j| localized_stage(plan, space, &diag, j))
            .collect::<Result<_>>()?;
        // accumulation over stages of the real part; magnitude as the value
        let res: Vec<f64> = stages.iter().map(|z| z.re).collect();
        let value = if res.len() >= 8 {
            match accumulation_points(&res, tol.max(1e-9), 0.25) {
                Ok(rep) if !rep.clusters.is_empty() => {
                    let centers: Vec<f64> = rep.clusters.iter().map(|c| c.center).collect();
                    let im_max = stages.iter().map(|z| z.im.abs()).fold(0.0f64, f64::max);
                    centers
                        .iter()
                        .map(|c| c.abs())
                        .fold(0.0f64, f64::max)
                        .max(im_max)
                }
                _ => stages.last().unwrap().norm(),
            }
        } else {
            stages.last().unwrap().norm()
        };
        let parts = commutator_region_integrals(space, &action, &a_at, &b_at, plan, &dec)?;
        let y_bound = match &y_bound_data {
            Some((ea, eb, ca, aa, cb, ab)) => {
                ea.eval(delta / 2.0, t) * cb * t.powf(-ab)
                    + eb.eval(delta / 2.0, t) * ca * t.powf(-aa)
            }
            None => f64::NAN,
        };
        rows.push(TraceTestRow {
            t_squared: t2,
            stages: stages.iter().map(|z| [z.re, z.im]).collect(),
            value,
            region_parts: [parts[0].norm(), parts[1].norm(), parts[2].norm(), parts[3].norm()],
            y_bound,
        });
    }

    // trend over the smaller-t half; values at the roundoff floor certify
    // the limit directly
    let mut by_t: Vec<(f64, f64)> = rows.iter().map(|r| (r.t_squared.sqrt(), r.value)).collect();
    by_t.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let final_value = by_t.first().map(|&(_, v)| v).unwrap_or(f64::NAN);
    let at_noise_floor = by_t.iter().all(|&(_, v)| v <= NOISE_FLOOR);
    let half = (by_t.len() / 2).max(2).min(by_t.len());
    let slope = if at_noise_floor {
        None
    } else {
        let xs: Vec<f64> = by_t[..half].iter().map(|&(t, _)| t.ln()).collect();
        let ys: Vec<f64> = by_t[..half]
            .iter()
            .map(|&(_, v)| v.max(NOISE_FLOOR).ln())
            .collect();
        Some(linear_fit(&xs, &ys).1)
    };
    let decay_ok = at_noise_floor || slope.map(|s| s > 0.0).unwrap_or(false);
    let pass = decay_ok && final_value < tol;
    Ok(TraceTestReport {
        rows,
        slope,
        at_noise_floor,
        final_value,
        pass,
    })
}

/// (1 − e^{−u})/u with the removable singularity: 4-term Taylor below 1e−6.
fn phi_ratio(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u / 2.0 + u * u / 6.0 - u * u * u / 24.0
    } else {
        -(-u).exp_m1() / u
    }
}

/// The graded heat idempotent: 2×2 blocks over H⁺ ⊕ H⁻ built from the
/// spectral calculus of D⁻D⁺ and D⁺D⁻, with reference idempotent
/// f = diag(0, 1).
pub struct GradedIdempotent {
    space: Arc<SectionSpace>,
    t: f64,
    plus: Vec<usize>,
    minus: Vec<usize>,
    e11: CMat,
    e12: CMat,
    e21: CMat,
    e22: CMat,
}

pub fn graded_idempotent(d: &DiracOperator, t: f64, budget: usize) -> Result<GradedIdempotent> {
    let space = Arc::clone(d.space());
    let plus: Vec<usize> = (0..space.dof_count())
        .filter(|&i| space.dof(i).parity > 0.0)
        .collect();
    let minus: Vec<usize> = (0..space.dof_count())
        .filter(|&i| space.dof(i).parity < 0.0)
        .collect();
    let dd = d.to_dense();
    let p = plus.len();
    let q = minus.len();
    // D⁺: H⁺ → H⁻ and D⁻ = (D⁺)*: H⁻ → H⁺
    let d_plus = CMat::from_fn(q, p, |i, j| dd[(minus[i], plus[j])]);
    let d_minus = d_plus.adjoint();
    let x = &d_minus * &d_plus; // D⁻D⁺ on H⁺
    let y = &d_plus * &d_minus; // D⁺D⁻ on H⁻
    let ex = crate::linalg::hermitian_eig(&x, budget)?;
    let ey = crate::linalg::hermitian_eig(&y, budget)?;
    let t2 = t * t;
    let e11 = ex.apply_function(|l| (-t2 * l).exp());
    // e^{−(t²/2)X} (1 − e^{−t²X})/X · D⁻, singularity via the series
    let f12 = ex.apply_function(|l| (-0.5 * t2 * l).exp() * phi_ratio(t2 * l) * t2);
    let e12 = &f12 * &d_minus;
    let f21 = ey.apply_function(|l| (-0.5 * t2 * l).exp());
    let e21 = &f21 * &d_plus;
    let e22 = CMat::identity(q, q) - ey.apply_function(|l| (-t2 * l).exp());
    Ok(GradedIdempotent {
        space,
        t,
        plus,
        minus,
        e11,
        e12,
        e21,
        e22,
    })
}

impl GradedIdempotent {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        &self.space
    }

    /// e(t) as a matrix over H⁺ ⊕ H⁻ (block order [plus; minus]).
    pub fn block_matrix(&self) -> CMat {
        let p = self.plus.len();
        let q = self.minus.len();
        let mut e = CMat::zeros(p + q, p + q);
        e.view_mut((0, 0), (p, p)).copy_from(&self.e11);
        e.view_mut((0, p), (p, q)).copy_from(&self.e12);
        e.view_mut((p, 0), (q, p)).copy_from(&self.e21);
        e.view_mut((p, p), (q, q)).copy_from(&self.e22);
        e
    }

    fn reference_block(&self) -> CMat {
        let p = self.plus.len();
        let q = self.minus.len();
        let mut f = CMat::zeros(p + q, p + q);
        for i in 0..q {
            f[(p + i, p + i)] = Complex64::new(1.0, 0.0);
        }
        f
    }

    /// ‖e² − e‖₂.
    pub fn idempotency_defect(&self, budget: usize) -> Result<f64> {
        let e = self.block_matrix();
        dense_op_norm(&(&e * &e - &e), budget)
    }

    /// ‖e(t) − f‖₂.
    pub fn distance_to_reference(&self, budget: usize) -> Result<f64> {
        dense_op_norm(&(self.block_matrix() - self.reference_block()), budget)
    }

    /// e − f scattered back to dof ordering (for localized pairing).
    pub fn pairing_operator(&self) -> CMat {
        let n = self.space.dof_count();
        let e = self.block_matrix();
        let f = self.reference_block();
        let g = e - f;
        let order: Vec<usize> = self.plus.iter().chain(self.minus.iter()).copied().collect();
        let mut out = CMat::zeros(n, n);
        for (bi, &di) in order.iter().enumerate() {
            for (bj, &dj) in order.iter().enumerate() {
                out[(di, dj)] = g[(bi, bj)];
            }
        }
        out
    }

    /// Conjugate by a unitary on the dof space (must preserve the grading
    /// split). The resulting blocks represent u e u*.
    pub fn conjugated(&self, u: &CMat) -> Result<GradedIdempotent> {
        let n = self.space.dof_count();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Operator("conjugator dimension mismatch".into()));
        }
        let order: Vec<usize> = self.plus.iter().chain(self.minus.iter()).copied().collect();
        let p = self.plus.len();
        // permute u to block order and check it is parity-preserving
        let ub = CMat::from_fn(n, n, |i, j| u[(order[i], order[j])]);
        for i in 0..n {
            for j in 0..n {
                if (i < p) != (j < p) && ub[(i, j)].norm() > 1e-12 {
                    return Err(Error::Operator(
                        "conjugator does not preserve the grading".into(),
                    ));
                }
            }
        }
        let e = &ub * self.block_matrix() * ub.adjoint();
        let q = self.minus.len();
        Ok(GradedIdempotent {
            space: Arc::clone(&self.space),
            t: self.t,
            plus: self.plus.clone(),
            minus: self.minus.clone(),
            e11: e.view((0, 0), (p, p)).into(),
            e12: e.view((0, p), (p, q)).into(),
            e21: e.view((p, 0), (q, p)).into(),
            e22: e.view((p, p), (q, q)).into(),
        })
    }
}

/// Stage-j value of Tr^U_Φ(e(t)) − Tr^U_Φ(f) via the matrix-trace extension.
pub fn idempotent_pairing(
    plan: &ExhaustionPlan,
    action: &SparseOp,
    e: &GradedIdempotent,
    j: usize,
) -> Result<Complex64> {
    let g = e.pairing_operator();
    let diag = action_diagonal(&e.space, action, &g, Weighting::Plain);
    localized_stage(plan, &e.space, &diag, j)
}
