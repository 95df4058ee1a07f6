//! The localized functional: stage-j averages over U_j of the density
//! m ↦ tr(Φ κ_t(φ⁻¹(m), m)) dm, optionally γ-weighted, plus the
//! displaced-kernel mass the Gaussian off-fixed-set bounds control.

use num_complex::Complex64;

use crate::dirac::SectionSpace;
use crate::error::Result;
use crate::exhaustion::ExhaustionPlan;
use crate::heat::KernelAt;
use crate::linalg::{CMat, SparseOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    Plain,
    /// insert the grading: tr(γ Φ κ(φ⁻¹m, m))
    Graded,
}

/// Per-dof diagonal of (Γ?)·P_Φ·A. Summing the entries of the dofs at site m
/// gives h^n · α(m) with α the paper's trace density.
pub fn action_diagonal(
    space: &SectionSpace,
    action: &SparseOp,
    op: &CMat,
    weighting: Weighting,
) -> Vec<Complex64> {
    (0..space.dof_count())
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(k, p) in action.row(i) {
                acc += p * op[(k, i)];
            }
            if weighting == Weighting::Graded {
                acc *= Complex64::new(space.dof(i).parity, 0.0);
            }
            acc
        })
        .collect()
}

/// Stage-j value: (1/vol(U_j)) Σ_{dofs in U_j} diag; vol from lattice site
/// counts.
pub fn localized_stage(
    plan: &ExhaustionPlan,
    space: &SectionSpace,
    diag: &[Complex64],
    j: usize,
) -> Result<Complex64> {
    let vol = plan.uj_volume(j);
    if vol == 0.0 {
        return Err(crate::error::Error::Exhaustion(format!("vol(U_{j}) = 0")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, d) in diag.iter().enumerate() {
        if plan.uj_contains_pos(j, &space.dof(i).pos) {
            acc += d;
        }
    }
    Ok(acc / Complex64::new(vol, 0.0))
}

/// Tr^U_Φ at stage j of a kernel family evaluated at t.
pub fn tr_u_phi(
    plan: &ExhaustionPlan,
    action: &SparseOp,
    kernel: &KernelAt<'_>,
    j: usize,
    weighting: Weighting,
) -> Result<Complex64> {
    let space = kernel.space();
    let diag = action_diagonal(space, action, kernel.op_matrix(), weighting);
    localized_stage(plan, space, &diag, j)
}

/// Stage values across all j for a fixed kernel evaluation.
pub fn stage_values(
    plan: &ExhaustionPlan,
    action: &SparseOp,
    kernel: &KernelAt<'_>,
    weighting: Weighting,
) -> Result<Vec<Complex64>> {
    let space = kernel.space();
    let diag = action_diagonal(space, action, kernel.op_matrix(), weighting);
    (0..plan.stage_count())
        .map(|j| localized_stage(plan, space, &diag, j))
        .collect()
}

/// (1/vol(U_j)) ∫_{U_j} ‖Φ κ_t(φ⁻¹m, m)‖_F dm: the displaced kernel-block
/// mass whose Gaussian decay in the displacement drives the off-fixed-set
/// vanishing bounds.
pub fn displaced_block_mass(
    plan: &ExhaustionPlan,
    action: &SparseOp,
    kernel: &KernelAt<'_>,
    j: usize,
) -> Result<f64> {
    let space = kernel.space();
    let model = space.model();
    let hn = model.weight();
    let op = kernel.op_matrix();
    let vol = plan.uj_volume(j);
    if vol == 0.0 {
        return Err(crate::error::Error::Exhaustion(format!("vol(U_{j}) = 0")));
    }
    let mut total = 0.0;
    for &m in &plan.uj_sites(j) {
        let dofs = space.site_dofs(m);
        let mut fro2 = 0.0;
        for &i in &dofs {
            for &jd in &dofs {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(k, p) in action.row(i) {
                    acc += p * op[(k, jd)];
                }
                fro2 += acc.norm_sqr();
            }
        }
        // block of P_Φ A has kernel convention block·h^n
        total += hn * fro2.sqrt() / hn;
    }
    Ok(total / vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{BundleKind, CliffordBundle};
    use crate::dirac::{assemble_dirac, Scheme, SectionSpace};
    use crate::exhaustion::ExhaustionPlan;
    use crate::geometry::{AxisSet, Interval, LatticeModel, ProductRegion};
    use crate::heat::KernelFamily;
    use crate::isometry::{IsometryPair, LiftSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    #[test]
    fn identity_kernel_stage_is_fiber_dim() {
        let model = Arc::new(LatticeModel::build_torus(&[8.0], 1.0).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let pair = IsometryPair::make(
            &model,
            DMatrix::identity(1, 1),
            vec![0.0],
            &LiftSpec::identity(),
            &bundle,
        )
        .unwrap();
        let action = space.action(&pair).unwrap();
        let plan =
            ExhaustionPlan::new(model, ProductRegion::full(1), vec![2.0, 4.0, 8.0]).unwrap();
        // unit spacing: the identity kernel δ/h^n has density fiber_dim/h^n
        let ident = KernelFamily::spectral(&d, 6000, Arc::new(|_, _| 1.0), "1").unwrap();
        let at = ident.at(1.0).unwrap();
        for j in 0..3 {
            let v = tr_u_phi(&plan, &action, &at, j, Weighting::Plain).unwrap();
            assert_abs_diff_eq!(v.re, 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_kernel_stage_is_zero() {
        let model = Arc::new(LatticeModel::build_torus(&[8.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let pair = IsometryPair::make(
            &model,
            DMatrix::identity(1, 1),
            vec![0.0],
            &LiftSpec::identity(),
            &bundle,
        )
        .unwrap();
        let action = space.action(&pair).unwrap();
        let plan =
            ExhaustionPlan::new(model, ProductRegion::full(1), vec![2.0, 4.0, 8.0]).unwrap();
        let zero = KernelFamily::spectral(&d, 6000, Arc::new(|_, _| 0.0), "0").unwrap();
        let at = zero.at(1.0).unwrap();
        let v = tr_u_phi(&plan, &action, &at, 1, Weighting::Plain).unwrap();
        assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn stage_values_linear_in_kernel() {
        let model = Arc::new(LatticeModel::build_torus(&[6.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();
        let action = space.action(&pair).unwrap();
        let plan =
            ExhaustionPlan::new(model, ProductRegion::full(1), vec![3.0, 6.0]).unwrap();
        let t = 0.5;
        let heat = KernelFamily::heat(&d, 6000).unwrap();
        let dj1 = KernelFamily::dj_heat(&d, 2, 6000).unwrap();
        let ha = heat.at(t).unwrap();
        let da = dj1.at(t).unwrap();
        let combo = ha.op_matrix() * Complex64::new(2.0, 0.0)
            + da.op_matrix() * Complex64::new(-0.5, 0.0);
        let diag_combo =
            action_diagonal(&space, &action, &combo, Weighting::Graded);
        let s_combo = localized_stage(&plan, &space, &diag_combo, 0).unwrap();
        let s_h = tr_u_phi(&plan, &action, &ha, 0, Weighting::Graded).unwrap();
        let s_d = tr_u_phi(&plan, &action, &da, 0, Weighting::Graded).unwrap();
        let lin = s_h * Complex64::new(2.0, 0.0) + s_d * Complex64::new(-0.5, 0.0);
        assert_abs_diff_eq!((s_combo - lin).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_torus_graded_stage_matches_supertrace_over_volume() {
        // U = M, identity pair: stage value of the γ-weighted functional
        // equals Str(γ e^{−t²D²})/vol(M) — eigensum oracle route
        let model = Arc::new(LatticeModel::build_torus(&[6.0], 0.25).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Spinor).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let pair = IsometryPair::make(
            &model,
            DMatrix::identity(1, 1),
            vec![0.0],
            &LiftSpec::identity(),
            &bundle,
        )
        .unwrap();
        let action = space.action(&pair).unwrap();
        let plan =
            ExhaustionPlan::new(model.clone(), ProductRegion::full(1), vec![3.0, 6.0]).unwrap();
        let t = 0.7;
        let heat = KernelFamily::heat(&d, 6000).unwrap();
        let at = heat.at(t).unwrap();
        let stage = tr_u_phi(&plan, &action, &at, 1, Weighting::Graded).unwrap();
        let eig = d.eig(6000).unwrap();
        let mut eigensum = 0.0;
        for k in 0..eig.dim() {
            let w = (-(t * t) * eig.values[k] * eig.values[k]).exp();
            let mut g = 0.0;
            for i in 0..d.dim() {
                g += d.space().dof(i).parity * eig.vectors[(i, k)].norm_sqr();
            }
            eigensum += w * g;
        }
        let vol = model.weight() * model.site_count() as f64;
        assert_abs_diff_eq!(stage.re, eigensum / vol, epsilon = 1e-8);
    }

    #[test]
    fn reflection_staggered_stage_tends_to_half() {
        // Gauss-Bonnet bundle, U = (−1,1), commensurate spacing: lattice
        // vol(U) = 2 and the γΦ-weighted heat stage localizes to 1/2
        let h = 2.0 / 31.0;
        let half_width = 93.0 * h; // = 6 exactly
        let model = Arc::new(LatticeModel::build_box(&[half_width], h).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Staggered).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();
        let action = space.action(&pair).unwrap();
        let u = ProductRegion::new(vec![AxisSet::Union(vec![Interval::open(0.0, 1.0)])]);
        let plan = ExhaustionPlan::new(model, u, vec![2.0, 4.0, half_width]).unwrap();
        let t2 = 0.09_f64; // t = 0.3 > 4h = 0.258
        let heat = KernelFamily::heat(&d, 6000).unwrap();
        let at = heat.at(t2.sqrt()).unwrap();
        for j in 0..plan.stage_count() {
            let v = tr_u_phi(&plan, &action, &at, j, Weighting::Graded).unwrap();
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-4);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn displaced_mass_decays_with_translation_distance() {
        let model = Arc::new(LatticeModel::build_torus(&[12.8], 0.1).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Spinor).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(Arc::clone(&space), 0.0).unwrap();
        let plan = ExhaustionPlan::new(
            model.clone(),
            ProductRegion::full(1),
            vec![6.4, 12.8],
        )
        .unwrap();
        let heat = KernelFamily::heat(&d, 6000).unwrap();
        let at = heat.at(0.4).unwrap();
        let mut masses = Vec::new();
        for &c in &[1.0, 2.0, 3.0] {
            let pair = IsometryPair::make(
                &model,
                DMatrix::identity(1, 1),
                vec![c],
                &LiftSpec::identity(),
                &bundle,
            )
            .unwrap();
            let action = space.action(&pair).unwrap();
            masses.push(displaced_block_mass(&plan, &action, &at, 1).unwrap());
        }
        assert!(masses[0] > 10.0 * masses[1]);
        assert!(masses[1] > 10.0 * masses[2]);
    }
}
