//! Section spaces over a lattice model and self-adjoint graded Dirac-type
//! operators commuting with the isometry action.
//!
//! Two differencing schemes are provided. `Central` is the plain tensor
//! assembly D = Σᵢ cᵢ ⊗ ∂ᵢ with antisymmetric central differences (periodic
//! wrap on the torus, zero extension on the box). Any antisymmetric stencil
//! carries a second symbol zero at θ = π, and that doubler branch
//! contributes a same-sign copy of the localized supertrace density, so
//! fixed-point verdicts run on the `Staggered` scheme instead: degree-p
//! components of the exterior bundle live on p-cells of the grid complex and
//! D = d + dᵀ, whose square is the cell-wise graph Laplacian with a single
//! symbol zero.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{subset_sign, BundleKind, CliffordBundle};
use crate::error::{Error, Result};
use crate::geometry::{LatticeKind, LatticeModel};
use crate::isometry::IsometryPair;
use crate::linalg::{hermitian_eig, op_norm_est, CMat, CVec, EigData, SparseOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Central,
    Staggered,
}

/// One degree of freedom of the section space: a fiber component attached to
/// a site, carrying its own position (cell midpoints differ from the owner
/// site under the staggered scheme) and grading parity.
#[derive(Clone, Debug)]
pub struct Dof {
    pub site: usize,
    pub fiber: usize,
    pub pos: Vec<f64>,
    pub parity: f64,
}

/// The discrete section space: an ordered list of DOFs plus lookup tables.
pub struct SectionSpace {
    model: Arc<LatticeModel>,
    bundle: Arc<CliffordBundle>,
    scheme: Scheme,
    dofs: Vec<Dof>,
    /// (site, fiber) -> dof index, usize::MAX when the cell does not exist
    lookup: Vec<usize>,
}

impl SectionSpace {
    pub fn build(
        model: Arc<LatticeModel>,
        bundle: Arc<CliffordBundle>,
        scheme: Scheme,
    ) -> Result<Arc<Self>> {
        if bundle.dim() != model.dim() {
            return Err(Error::Operator(format!(
                "bundle dimension {} does not match model dimension {}",
                bundle.dim(),
                model.dim()
            )));
        }
        if scheme == Scheme::Staggered && bundle.kind() != BundleKind::Exterior {
            return Err(Error::Operator(
                "staggered scheme is defined for the exterior bundle".into(),
            ));
        }
        let n = model.dim();
        let f = bundle.fiber_dim();
        let h = model.spacing();
        let sites = model.site_count();
        let mut dofs = Vec::with_capacity(sites * f);
        let mut lookup = vec![usize::MAX; sites * f];
        for site in 0..sites {
            let base = model.site_pos(site);
            let multi = model.site_multi(site);
            for fiber in 0..f {
                let (exists, pos) = match scheme {
                    Scheme::Central => (true, base.clone()),
                    Scheme::Staggered => {
                        // fiber index is the axis subset; the cell spans +h
                        // along each subset axis
                        let mut ok = true;
                        let mut pos = base.clone();
                        for a in 0..n {
                            if fiber & (1 << a) != 0 {
                                if model.axis_period(a).is_none()
                                    && multi[a] + 1 >= model.axis_count(a)
                                {
                                    ok = false;
                                    break;
                                }
                                pos[a] += 0.5 * h;
                            }
                        }
                        (ok, pos)
                    }
                };
                if exists {
                    lookup[site * f + fiber] = dofs.len();
                    dofs.push(Dof {
                        site,
                        fiber,
                        pos,
                        parity: bundle.grading()[fiber],
                    });
                }
            }
        }
        Ok(Arc::new(SectionSpace {
            model,
            bundle,
            scheme,
            dofs,
            lookup,
        }))
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<LatticeModel> {
        Arc::clone(&self.model)
    }

    pub fn bundle(&self) -> &CliffordBundle {
        &self.bundle
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof(&self, i: usize) -> &Dof {
        &self.dofs[i]
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn fiber_dim(&self) -> usize {
        self.bundle.fiber_dim()
    }

    pub fn index_of(&self, site: usize, fiber: usize) -> Option<usize> {
        let v = self.lookup[site * self.fiber_dim() + fiber];
        (v != usize::MAX).then_some(v)
    }

    /// DOF indices attached to a site, fiber order.
    pub fn site_dofs(&self, site: usize) -> Vec<usize> {
        (0..self.fiber_dim())
            .filter_map(|f| self.index_of(site, f))
            .collect()
    }

    /// Φ as a sparse unitary on this section space.
    ///
    /// Central scheme: site permutation tensored with the constant lift.
    /// Staggered scheme: signed cell permutation derived from the
    /// exterior-algebra lift (requires a signed-permutation O).
    pub fn action(&self, pair: &IsometryPair) -> Result<SparseOp> {
        if pair.fiber_dim() != self.fiber_dim() {
            return Err(Error::Isometry(format!(
                "lift dimension {} does not match fiber dimension {}",
                pair.fiber_dim(),
                self.fiber_dim()
            )));
        }
        let mut op = SparseOp::new(self.dof_count());
        match self.scheme {
            Scheme::Central => {
                let f = self.fiber_dim();
                let lift = pair.lift();
                for site in 0..self.model.site_count() {
                    let image = pair.map_site(&self.model, site).ok_or_else(|| {
                        Error::Isometry("site set not invariant under isometry".into())
                    })?;
                    for tf in 0..f {
                        let row = self.index_of(image, tf).unwrap();
                        for sf in 0..f {
                            let v = lift[(tf, sf)];
                            if v.norm() > 0.0 {
                                op.push(row, self.index_of(site, sf).unwrap(), v);
                            }
                        }
                    }
                }
            }
            Scheme::Staggered => {
                if !pair.is_signed_permutation() {
                    return Err(Error::Isometry(
                        "staggered action needs a signed-permutation isometry".into(),
                    ));
                }
                let n = self.model.dim();
                let h = self.model.spacing();
                let lift = pair.lift();
                for (src, dof) in self.dofs.iter().enumerate() {
                    let s = dof.fiber;
                    // Λ(O) column s has a single signed entry at the image
                    // subset for signed-permutation O
                    let mut target_subset = usize::MAX;
                    let mut sign = Complex64::new(0.0, 0.0);
                    for t in 0..self.fiber_dim() {
                        let v = lift[(t, s)];
                        if v.norm() > 1e-14 {
                            target_subset = t;
                            sign = v;
                            break;
                        }
                    }
                    if target_subset == usize::MAX {
                        return Err(Error::Isometry("degenerate exterior lift".into()));
                    }
                    // base corner of the image cell
                    let img = pair.apply_pos(&dof.pos);
                    let mut corner = img.clone();
                    for a in 0..n {
                        if target_subset & (1 << a) != 0 {
                            corner[a] -= 0.5 * h;
                        }
                    }
                    let site = self.model.site_at_pos(&corner).ok_or_else(|| {
                        Error::Isometry("cell complex not invariant under isometry".into())
                    })?;
                    let dst = self.index_of(site, target_subset).ok_or_else(|| {
                        Error::Isometry("cell complex not invariant under isometry".into())
                    })?;
                    op.push(dst, src, sign);
                }
            }
        }
        Ok(op)
    }

    /// Apply Φ to a section coefficient vector; unitary for valid pairs.
    pub fn act_on_section(&self, pair: &IsometryPair, section: &CVec) -> Result<CVec> {
        if section.len() != self.dof_count() {
            return Err(Error::Operator(format!(
                "section length {} does not match dof count {}",
                section.len(),
                self.dof_count()
            )));
        }
        Ok(self.action(pair)?.matvec(section))
    }
}

/// A self-adjoint, γ-odd Dirac-type lattice operator.
pub struct DiracOperator {
    space: Arc<SectionSpace>,
    matrix: SparseOp,
    mass: f64,
    eig_cache: OnceLock<Arc<EigData>>,
}

/// D = Σᵢ cᵢ ⊗ ∂ᵢ (central) or d + dᵀ (staggered), plus an optional mass
/// term m·γ′ ⊗ 1 built from the bundle's extra anticommuting generator.
pub fn assemble_dirac(space: Arc<SectionSpace>, mass: f64) -> Result<DiracOperator> {
    let model = space.model_arc();
    let n = model.dim();
    let h = model.spacing();
    let mut m = SparseOp::new(space.dof_count());

    match space.scheme() {
        Scheme::Central => {
            let f = space.fiber_dim();
            let half = Complex64::new(1.0 / (2.0 * h), 0.0);
            for site in 0..model.site_count() {
                let multi = model.site_multi(site);
                for axis in 0..n {
                    let c = space.bundle().generator(axis);
                    for (dir, sgn) in [(1isize, 1.0), (-1isize, -1.0)] {
                        let count = model.axis_count(axis);
                        let idx = multi[axis] as isize + dir;
                        let neighbor_idx = match model.kind() {
                            LatticeKind::Torus => Some(idx.rem_euclid(count as isize) as usize),
                            LatticeKind::Box => {
                                (idx >= 0 && (idx as usize) < count).then_some(idx as usize)
                            }
                        };
                        let Some(ni) = neighbor_idx else { continue };
                        let mut nb = multi.clone();
                        nb[axis] = ni;
                        let neighbor = model.index_of_multi(&nb);
                        // row at `site`, column at `neighbor`:
                        // (Ds)(x) += c_axis · s(x ± h e_axis) / (±2h)
                        for tf in 0..f {
                            for sf in 0..f {
                                let v = c[(tf, sf)];
                                if v.norm() > 0.0 {
                                    m.push(
                                        space.index_of(site, tf).unwrap(),
                                        space.index_of(neighbor, sf).unwrap(),
                                        v * half * Complex64::new(sgn, 0.0),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            if mass != 0.0 {
                let mg = space.bundle().mass_generator().ok_or_else(|| {
                    Error::Operator(
                        "bundle has no anticommuting generator for a mass term".into(),
                    )
                })?;
                let mc = Complex64::new(mass, 0.0);
                for site in 0..model.site_count() {
                    for tf in 0..f {
                        for sf in 0..f {
                            let v = mg[(tf, sf)];
                            if v.norm() > 0.0 {
                                m.push(
                                    space.index_of(site, tf).unwrap(),
                                    space.index_of(site, sf).unwrap(),
                                    v * mc,
                                );
                            }
                        }
                    }
                }
            }
        }
        Scheme::Staggered => {
            if mass != 0.0 {
                return Err(Error::Operator(
                    "mass-gapped variants are provided on the central scheme".into(),
                ));
            }
            // d on cubical cochains: for each (p+1)-cell (x, T) and a ∈ T,
            // (dω)(x,T) = Σ_a σ(a, T∖a) [ω(x + h e_a, T∖a) − ω(x, T∖a)]/h,
            // then D = d + dᵀ.
            let inv_h = 1.0 / h;
            for (target, dof) in space.dofs().iter().enumerate() {
                let t_subset = dof.fiber;
                if t_subset == 0 {
                    continue;
                }
                let multi = model.site_multi(dof.site);
                for a in 0..n {
                    if t_subset & (1 << a) == 0 {
                        continue;
                    }
                    let face = t_subset & !(1 << a);
                    let sgn = subset_sign(a, face) * inv_h;
                    let near = space.index_of(dof.site, face).unwrap();
                    let count = model.axis_count(a);
                    let mut nb = multi.clone();
                    nb[a] = match model.kind() {
                        LatticeKind::Torus => (multi[a] + 1) % count,
                        LatticeKind::Box => multi[a] + 1, // exists: the cell spans +h
                    };
                    let far_site = model.index_of_multi(&nb);
                    let far = space.index_of(far_site, face).ok_or_else(|| {
                        Error::Operator("staggered cell complex is inconsistent".into())
                    })?;
                    let v = Complex64::new(sgn, 0.0);
                    // d entry and its transpose partner
                    m.push(target, far, v);
                    m.push(far, target, v);
                    m.push(target, near, -v);
                    m.push(near, target, -v);
                }
            }
        }
    }

    let defect = m.hermitian_defect();
    if defect > 1e-12 {
        return Err(Error::Operator(format!(
            "assembled operator is not self-adjoint (defect {defect:.3e})"
        )));
    }
    Ok(DiracOperator {
        space,
        matrix: m,
        mass,
        eig_cache: OnceLock::new(),
    })
}

impl DiracOperator {
    /// Wrap an explicit matrix as a Dirac-type operator, checking
    /// self-adjointness and γ-oddness.
    pub fn from_parts(space: Arc<SectionSpace>, matrix: SparseOp) -> Result<Self> {
        if matrix.dim != space.dof_count() {
            return Err(Error::Operator("matrix dimension mismatch".into()));
        }
        let defect = matrix.hermitian_defect();
        if defect > 1e-12 {
            return Err(Error::Operator(format!(
                "operator is not self-adjoint (defect {defect:.3e})"
            )));
        }
        let d = DiracOperator {
            space,
            matrix,
            mass: 0.0,
            eig_cache: OnceLock::new(),
        };
        let odd = d.grading_anticommutator_defect();
        if odd > 1e-12 {
            return Err(Error::Operator(format!(
                "operator is not γ-odd (defect {odd:.3e})"
            )));
        }
        Ok(d)
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &SparseOp {
        &self.matrix
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.space.dof_count()
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.matrix.matvec(v)
    }

    /// Spectral oracle: full dense eigendecomposition, cached.
    pub fn eig(&self, budget: usize) -> Result<Arc<EigData>> {
        if let Some(e) = self.eig_cache.get() {
            return Ok(Arc::clone(e));
        }
        let data = Arc::new(hermitian_eig(&self.to_dense(), budget)?);
        let _ = self.eig_cache.set(Arc::clone(&data));
        Ok(data)
    }

    /// max |γDγ + D| entry: exact sparse pattern identity for odd operators.
    pub fn grading_anticommutator_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.dim() {
            let pr = self.space.dof(r).parity;
            for &(c, v) in self.matrix.row(r) {
                let pc = self.space.dof(c).parity;
                // (γDγ)_{rc} = p_r p_c D_{rc}; odd means p_r p_c = −1 wherever D ≠ 0
                let defect = (v * Complex64::new(pr * pc, 0.0) + v).norm();
                worst = worst.max(defect);
            }
        }
        worst
    }

    /// Operator 2-norm estimate of DΦ − ΦD by power iteration.
    pub fn commutator_norm(&self, pair: &IsometryPair) -> Result<f64> {
        let p = self.space.action(pair)?;
        let pa = p.adjoint();
        let apply = |v: &CVec| {
            let dp = self.matrix.matvec(&p.matvec(v));
            let pd = p.matvec(&self.matrix.matvec(v));
            dp - pd
        };
        let apply_adj = |v: &CVec| {
            // (DP − PD)* = P*D − DP*
            let pd = pa.matvec(&self.matrix.matvec(v));
            let dp = self.matrix.matvec(&pa.matvec(v));
            pd - dp
        };
        Ok(op_norm_est(apply, apply_adj, self.dim()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::LiftSpec;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn torus_central_1d(nsites: usize, h: f64) -> DiracOperator {
        let model = Arc::new(LatticeModel::build_torus(&[nsites as f64 * h], h).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model, bundle, Scheme::Central).unwrap();
        assemble_dirac(space, 0.0).unwrap()
    }

    #[test]
    fn torus_central_spectrum_matches_closed_form() {
        let nsites = 16;
        let h = 0.25;
        let d = torus_central_1d(nsites, h);
        let eig = d.eig(1000).unwrap();
        // eigenvalues {± sin(2πk/N)/h}, k = 0..N−1
        let mut expect: Vec<f64> = (0..nsites)
            .flat_map(|k| {
                let s = (2.0 * PI * k as f64 / nsites as f64).sin() / h;
                [s.abs(), -s.abs()]
            })
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eig.values.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn gamma_anticommutator_vanishes_exactly() {
        let d = torus_central_1d(12, 0.5);
        assert_eq!(d.grading_anticommutator_defect(), 0.0);
    }

    #[test]
    fn spectral_symmetry_from_grading() {
        let d = torus_central_1d(10, 0.5);
        let eig = d.eig(1000).unwrap();
        let n = eig.dim();
        for i in 0..n {
            assert_abs_diff_eq!(eig.values[i], -eig.values[n - 1 - i], epsilon = 1e-9);
        }
    }

    #[test]
    fn reflection_commutes_with_central_dirac_on_box() {
        let model = Arc::new(LatticeModel::build_box(&[4.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();
        assert!(d.commutator_norm(&pair).unwrap() < 1e-12);
    }

    #[test]
    fn broken_lift_gives_order_one_over_h_commutator() {
        // reflection with the identity lift instead of Λ(O) = γ
        let model = Arc::new(LatticeModel::build_box(&[4.0], 0.25).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair =
            IsometryPair::make(&model, o, vec![0.0], &LiftSpec::identity(), &bundle).unwrap();
        let norm = d.commutator_norm(&pair).unwrap();
        assert!(norm > 1.0 / model.spacing(), "got {norm}");
    }

    #[test]
    fn identity_pair_commutator_is_zero() {
        let model = Arc::new(LatticeModel::build_box(&[3.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        let pair = IsometryPair::make(
            &model,
            DMatrix::identity(1, 1),
            vec![0.0],
            &LiftSpec::identity(),
            &bundle,
        )
        .unwrap();
        assert!(d.commutator_norm(&pair).unwrap() < 1e-12);
    }

    #[test]
    fn staggered_torus_square_is_cell_laplacian() {
        let nsites = 12;
        let h = 0.5;
        let model = Arc::new(LatticeModel::build_torus(&[nsites as f64 * h], h).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model, bundle, Scheme::Staggered).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        let eig = d.eig(1000).unwrap();
        // D² eigenvalues: 4 sin²(πk/N)/h², each twice (vertex and edge copies)
        let mut expect: Vec<f64> = (0..nsites)
            .flat_map(|k| {
                let s = 4.0 * (PI * k as f64 / nsites as f64).sin().powi(2) / (h * h);
                [s, s]
            })
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got: Vec<f64> = eig.values.iter().map(|l| l * l).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(g, w, epsilon = 1e-8);
        }
    }

    #[test]
    fn staggered_box_dofs_and_oddness() {
        let model = Arc::new(LatticeModel::build_box(&[2.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model, bundle, Scheme::Staggered).unwrap();
        // 9 vertices, 8 edges
        assert_eq!(space.dof_count(), 17);
        let d = assemble_dirac(space, 0.0).unwrap();
        assert_eq!(d.grading_anticommutator_defect(), 0.0);
    }

    #[test]
    fn staggered_reflection_action_commutes() {
        let model = Arc::new(LatticeModel::build_box(&[3.0], 0.25).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Staggered).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();
        assert!(d.commutator_norm(&pair).unwrap() < 1e-12);
        // the action is unitary
        let p = d.space().action(&pair).unwrap();
        let dense = p.to_dense();
        let uu = dense.adjoint() * &dense;
        assert!(crate::linalg::fro_norm(&(uu - CMat::identity(d.dim(), d.dim()))) < 1e-12);
    }

    #[test]
    fn staggered_2d_rotation_action_commutes() {
        let model = Arc::new(LatticeModel::build_box(&[2.0, 2.0], 0.5).unwrap());
        let bundle = Arc::new(CliffordBundle::build(2, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Staggered).unwrap();
        let d = assemble_dirac(space, 0.0).unwrap();
        // rotation by π = diag(−1, −1)
        let o = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let pair =
            IsometryPair::make(&model, o, vec![0.0, 0.0], &LiftSpec::exterior(), &bundle).unwrap();
        assert!(d.commutator_norm(&pair).unwrap() < 1e-11);
    }

    #[test]
    fn mass_gap_on_spinor_torus() {
        let model = Arc::new(LatticeModel::build_torus(&[4.0], 0.25).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Spinor).unwrap());
        let space = SectionSpace::build(model, bundle, Scheme::Central).unwrap();
        let mass = 0.7;
        let d = assemble_dirac(space, mass).unwrap();
        assert_eq!(d.grading_anticommutator_defect(), 0.0);
        let eig = d.eig(1000).unwrap();
        // D_m² = D² + m²: spectrum bounded away from zero by m
        let min_abs = eig.values.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        assert!(min_abs >= mass - 1e-9, "gap violated: {min_abs}");
    }

    #[test]
    fn act_on_section_is_unitary_and_moves_delta() {
        let model = Arc::new(LatticeModel::build_box(&[4.0], 1.0).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();

        // delta section at x=2, degree 0
        let site = model.site_at_pos(&[2.0]).unwrap();
        let mut s = CVec::zeros(space.dof_count());
        s[space.index_of(site, 0).unwrap()] = Complex64::new(1.0, 0.0);
        let out = space.act_on_section(&pair, &s).unwrap();
        let target = model.site_at_pos(&[-2.0]).unwrap();
        assert_abs_diff_eq!(out[space.index_of(target, 0).unwrap()].re, 1.0);
        assert_abs_diff_eq!(out.norm(), s.norm(), epsilon = 1e-12);
    }

    #[test]
    fn action_group_law_on_random_section() {
        let model = Arc::new(LatticeModel::build_torus(&[8.0], 1.0).unwrap());
        let bundle = Arc::new(CliffordBundle::build(1, BundleKind::Exterior).unwrap());
        let space = SectionSpace::build(model.clone(), bundle.clone(), Scheme::Central).unwrap();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let refl = IsometryPair::make(&model, o, vec![0.0], &LiftSpec::exterior(), &bundle).unwrap();
        let tr = IsometryPair::make(
            &model,
            DMatrix::identity(1, 1),
            vec![2.0],
            &LiftSpec::identity(),
            &bundle,
        )
        .unwrap();
        let comp = refl.compose(&tr);
        let s = CVec::from_fn(space.dof_count(), |i, _| {
            Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())
        });
        let lhs = space.act_on_section(&comp, &s).unwrap();
        let rhs = space
            .act_on_section(&refl, &space.act_on_section(&tr, &s).unwrap())
            .unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
