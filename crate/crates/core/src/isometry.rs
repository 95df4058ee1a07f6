//! Affine lattice isometries φ(x) = Ox + b, their unitary bundle lifts, and
//! displacement bookkeeping off the localization neighbourhood.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{exterior_lift, CliffordBundle};
use crate::error::{Error, Result};
use crate::geometry::{LatticeKind, LatticeModel, Region};
use crate::linalg::{fro_norm, CMat};
use crate::SNAP;

/// Models small enough to validate site-set invariance by enumeration.
const ENUM_THRESHOLD: usize = 2_000_000;

/// How the fiber lift of φ is specified.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LiftSpec {
    /// "identity", "builtin:exterior", "builtin:scalar-sign",
    /// "builtin:scalar-sign:-1"
    Named(String),
    /// explicit fiber matrix, rows of [re, im] pairs
    Matrix { rows: Vec<Vec<[f64; 2]>> },
}

impl LiftSpec {
    pub fn identity() -> Self {
        LiftSpec::Named("identity".into())
    }

    pub fn exterior() -> Self {
        LiftSpec::Named("builtin:exterior".into())
    }

    pub fn resolve(&self, o: &DMatrix<f64>, bundle: &CliffordBundle) -> Result<CMat> {
        let f = bundle.fiber_dim();
        match self {
            LiftSpec::Named(name) => match name.as_str() {
                "identity" => Ok(CMat::identity(f, f)),
                "builtin:exterior" => {
                    if 1usize << bundle.dim() != f {
                        return Err(Error::Isometry(
                            "builtin:exterior lift needs the exterior bundle".into(),
                        ));
                    }
                    Ok(exterior_lift(o))
                }
                "builtin:scalar-sign" | "builtin:scalar-sign:+1" => Ok(CMat::identity(f, f)),
                "builtin:scalar-sign:-1" => {
                    Ok(CMat::identity(f, f).map(|z| z * Complex64::new(-1.0, 0.0)))
                }
                other => Err(Error::Isometry(format!("unknown lift spec `{other}`"))),
            },
            LiftSpec::Matrix { rows } => {
                if rows.len() != f || rows.iter().any(|r| r.len() != f) {
                    return Err(Error::Isometry(format!(
                        "explicit lift must be {f}x{f} for this bundle"
                    )));
                }
                Ok(CMat::from_fn(f, f, |i, j| {
                    Complex64::new(rows[i][j][0], rows[i][j][1])
                }))
            }
        }
    }
}

/// A validated affine isometry of the lattice together with its constant
/// unitary, grading-preserving fiber lift.
#[derive(Clone)]
pub struct IsometryPair {
    orthogonal: DMatrix<f64>,
    translation: Vec<f64>,
    lift: CMat,
    fiber_dim: usize,
}

impl IsometryPair {
    /// Validates: O orthogonal to 1e−12, φ maps the site set onto itself,
    /// lift unitary and commuting with the grading.
    pub fn make(
        model: &LatticeModel,
        orthogonal: DMatrix<f64>,
        translation: Vec<f64>,
        lift_spec: &LiftSpec,
        bundle: &CliffordBundle,
    ) -> Result<Self> {
        let n = model.dim();
        if orthogonal.nrows() != n || orthogonal.ncols() != n || translation.len() != n {
            return Err(Error::Isometry(format!(
                "isometry data does not match dimension {n}"
            )));
        }
        let defect = fro_norm(
            &(orthogonal.transpose() * &orthogonal - DMatrix::identity(n, n))
                .map(|x| Complex64::new(x, 0.0)),
        );
        if defect > 1e-12 * (n as f64) {
            return Err(Error::Isometry(format!(
                "matrix is not orthogonal (defect {defect:.3e})"
            )));
        }

        let lift = lift_spec.resolve(&orthogonal, bundle)?;
        let f = bundle.fiber_dim();
        let uni = fro_norm(&(lift.adjoint() * &lift - CMat::identity(f, f)));
        if uni > 1e-12 * (f as f64) {
            return Err(Error::Isometry(format!("lift is not unitary ({uni:.3e})")));
        }
        let gamma = bundle.grading_matrix();
        let grad = fro_norm(&(&gamma * &lift - &lift * &gamma));
        if grad > 1e-12 * (f as f64) {
            return Err(Error::Isometry(format!(
                "lift does not commute with the grading ({grad:.3e})"
            )));
        }

        let pair = IsometryPair {
            orthogonal,
            translation,
            lift,
            fiber_dim: f,
        };
        pair.check_lattice_compatible(model)?;
        Ok(pair)
    }

    pub fn orthogonal(&self) -> &DMatrix<f64> {
        &self.orthogonal
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    pub fn lift(&self) -> &CMat {
        &self.lift
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// True when O is a signed permutation matrix (the lattice-compatible
    /// orthogonal maps apart from trivial cases).
    pub fn is_signed_permutation(&self) -> bool {
        let n = self.orthogonal.nrows();
        for i in 0..n {
            let mut nonzero = 0;
            for j in 0..n {
                let v = self.orthogonal[(i, j)];
                if v.abs() > SNAP {
                    nonzero += 1;
                    if (v.abs() - 1.0).abs() > SNAP {
                        return false;
                    }
                }
            }
            if nonzero != 1 {
                return false;
            }
        }
        true
    }

    /// Axis image under a signed permutation O: returns (target axis, sign).
    pub fn axis_image(&self, axis: usize) -> Option<(usize, f64)> {
        let n = self.orthogonal.nrows();
        (0..n).find_map(|i| {
            let v = self.orthogonal[(i, axis)];
            (v.abs() > 0.5).then_some((i, if v > 0.0 { 1.0 } else { -1.0 }))
        })
    }

    pub fn apply_pos(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.orthogonal[(i, j)] * x[j])
                    .sum::<f64>()
                    + self.translation[i]
            })
            .collect()
    }

    pub fn apply_pos_inv(&self, y: &[f64]) -> Vec<f64> {
        // O orthogonal: φ⁻¹(y) = Oᵀ(y − b)
        let n = y.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.orthogonal[(j, i)] * (y[j] - self.translation[j]))
                    .sum::<f64>()
            })
            .collect()
    }

    /// φ as a map on site indices; None when the image misses the lattice.
    pub fn map_site(&self, model: &LatticeModel, m: usize) -> Option<usize> {
        model.site_at_pos(&self.apply_pos(&model.site_pos(m)))
    }

    pub fn map_site_inv(&self, model: &LatticeModel, m: usize) -> Option<usize> {
        model.site_at_pos(&self.apply_pos_inv(&model.site_pos(m)))
    }

    fn check_lattice_compatible(&self, model: &LatticeModel) -> Result<()> {
        if self.is_signed_permutation() {
            // endpoint check per axis: the image of each axis coordinate range
            // must land on the target axis coordinate set
            for a in 0..model.dim() {
                let (ta, _) = self.axis_image(a).unwrap();
                if model.axis_count(ta) != model.axis_count(a)
                    || (model.axis_period(a).is_some() != model.axis_period(ta).is_some())
                {
                    return Err(Error::Isometry(format!(
                        "axis {a} maps to incompatible axis {ta}"
                    )));
                }
            }
            for &probe_end in &[true, false] {
                let mut pos = Vec::with_capacity(model.dim());
                for a in 0..model.dim() {
                    let i = if probe_end { model.axis_count(a) - 1 } else { 0 };
                    pos.push(model.axis_coord(a, i));
                }
                if model.site_at_pos(&self.apply_pos(&pos)).is_none() {
                    return Err(Error::Isometry(
                        "site set is not invariant under the isometry".into(),
                    ));
                }
            }
            Ok(())
        } else {
            if model.site_count() > ENUM_THRESHOLD {
                return Err(Error::Isometry(
                    "non-signed-permutation isometry on a model too large to validate".into(),
                ));
            }
            for m in 0..model.site_count() {
                if self.map_site(model, m).is_none() {
                    return Err(Error::Isometry(
                        "site set is not invariant under the isometry".into(),
                    ));
                }
            }
            Ok(())
        }
    }

    /// Compose φ_self ∘ φ_other (apply other first).
    pub fn compose(&self, other: &IsometryPair) -> IsometryPair {
        let o = &self.orthogonal * &other.orthogonal;
        let b: Vec<f64> = (0..self.translation.len())
            .map(|i| {
                (0..self.translation.len())
                    .map(|j| self.orthogonal[(i, j)] * other.translation[j])
                    .sum::<f64>()
                    + self.translation[i]
            })
            .collect();
        IsometryPair {
            orthogonal: o,
            translation: b,
            lift: &self.lift * &other.lift,
            fiber_dim: self.fiber_dim,
        }
    }

    /// Sites with φ(m) = m.
    pub fn fixed_sites(&self, model: &LatticeModel) -> Vec<usize> {
        (0..model.site_count())
            .filter(|&m| self.map_site(model, m) == Some(m))
            .collect()
    }

    /// Dimension of the fixed affine subspace: n − rank(I − O).
    pub fn fixed_dim(&self, model: &LatticeModel) -> usize {
        let n = model.dim();
        let a = DMatrix::identity(n, n) - &self.orthogonal;
        let rank = a.rank(1e-9);
        n - rank
    }

    /// min over the region of d(φ(m), m); +∞ on an empty region.
    pub fn displacement_lower_bound(&self, model: &LatticeModel, region: &Region) -> f64 {
        region
            .indices()
            .iter()
            .map(|&m| {
                let p = model.site_pos(m);
                model.distance_pos(&self.apply_pos(&p), &p)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Fixed-component centers along one axis, for tube construction around
    /// the fixed set. Only meaningful for diagonal-signed axes.
    pub fn axis_fixed_centers(&self, model: &LatticeModel, axis: usize) -> Result<Vec<f64>> {
        let (ta, sign) = self
            .axis_image(axis)
            .ok_or_else(|| Error::Isometry("tube U needs a signed-permutation isometry".into()))?;
        if ta != axis {
            return Err(Error::Isometry(
                "tube U needs an axis-diagonal isometry".into(),
            ));
        }
        let b = self.translation[axis];
        if sign > 0.0 {
            // fixed direction when b = 0; no fixed coordinate otherwise
            if b.abs() < SNAP {
                Ok(vec![]) // whole axis fixed: caller treats as Full
            } else {
                Err(Error::Isometry(
                    "axis translated with no fixed point; tube U undefined".into(),
                ))
            }
        } else {
            // −x + b = x  =>  x = b/2 (and + C/2 on a torus)
            let c0 = b / 2.0;
            match model.kind() {
                LatticeKind::Box => Ok(vec![c0]),
                LatticeKind::Torus => {
                    let c = model.axis_period(axis).unwrap();
                    Ok(vec![c0.rem_euclid(c), (c0 + c / 2.0).rem_euclid(c)])
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::BundleKind;
    use approx::assert_abs_diff_eq;

    fn exterior_1d() -> CliffordBundle {
        CliffordBundle::build(1, BundleKind::Exterior).unwrap()
    }

    #[test]
    fn reflection_on_box_is_valid_and_fixes_origin() {
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        let b = exterior_1d();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&m, o, vec![0.0], &LiftSpec::exterior(), &b).unwrap();
        let fixed = pair.fixed_sites(&m);
        assert_eq!(fixed.len(), 1);
        assert_abs_diff_eq!(m.site_pos(fixed[0])[0], 0.0);
        assert_eq!(pair.fixed_dim(&m), 0);
    }

    #[test]
    fn identity_fixes_everything() {
        let m = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        let b = exterior_1d();
        let pair = IsometryPair::make(
            &m,
            DMatrix::identity(1, 1),
            vec![0.0],
            &LiftSpec::identity(),
            &b,
        )
        .unwrap();
        assert_eq!(pair.fixed_sites(&m).len(), m.site_count());
        assert_eq!(pair.fixed_dim(&m), 1);
    }

    #[test]
    fn half_step_translation_rejected() {
        let m = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        let b = exterior_1d();
        let res = IsometryPair::make(
            &m,
            DMatrix::identity(1, 1),
            vec![0.5],
            &LiftSpec::identity(),
            &b,
        );
        assert!(res.is_err());
    }

    #[test]
    fn box_translation_rejected_torus_translation_ok() {
        let b = exterior_1d();
        let mbox = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        assert!(IsometryPair::make(
            &mbox,
            DMatrix::identity(1, 1),
            vec![1.0],
            &LiftSpec::identity(),
            &b
        )
        .is_err());
        let mtor = LatticeModel::build_torus(&[8.0], 1.0).unwrap();
        let pair = IsometryPair::make(
            &mtor,
            DMatrix::identity(1, 1),
            vec![3.0],
            &LiftSpec::identity(),
            &b,
        )
        .unwrap();
        assert!(pair.fixed_sites(&mtor).is_empty());
        let full = mtor.full_region();
        assert_abs_diff_eq!(pair.displacement_lower_bound(&mtor, &full), 3.0);
    }

    #[test]
    fn reflection_displacement_bound_matches_example() {
        // min over |x| >= 1 of 2|x| = 2
        let m = LatticeModel::build_box(&[4.0], 0.5).unwrap();
        let b = exterior_1d();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&m, o, vec![0.0], &LiftSpec::exterior(), &b).unwrap();
        let outside: Vec<usize> = (0..m.site_count())
            .filter(|&i| m.site_pos(i)[0].abs() >= 1.0 - 1e-12)
            .collect();
        let reg = Region::new(outside, "complement of U");
        assert_abs_diff_eq!(pair.displacement_lower_bound(&m, &reg), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn displacement_bound_on_empty_region_is_infinite() {
        let m = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        let b = exterior_1d();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&m, o, vec![0.0], &LiftSpec::exterior(), &b).unwrap();
        let empty = Region::new(vec![], "empty");
        assert!(pair
            .displacement_lower_bound(&m, &empty)
            .is_infinite());
    }

    #[test]
    fn non_unitary_lift_rejected() {
        let m = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        let b = exterior_1d();
        let spec = LiftSpec::Matrix {
            rows: vec![
                vec![[2.0, 0.0], [0.0, 0.0]],
                vec![[0.0, 0.0], [1.0, 0.0]],
            ],
        };
        assert!(IsometryPair::make(&m, DMatrix::identity(1, 1), vec![0.0], &spec, &b).is_err());
    }

    #[test]
    fn grading_flip_lift_rejected() {
        let m = LatticeModel::build_box(&[2.0], 1.0).unwrap();
        let b = exterior_1d();
        // σ₁ swaps even and odd degrees: unitary but grading-breaking
        let spec = LiftSpec::Matrix {
            rows: vec![
                vec![[0.0, 0.0], [1.0, 0.0]],
                vec![[1.0, 0.0], [0.0, 0.0]],
            ],
        };
        assert!(IsometryPair::make(&m, DMatrix::identity(1, 1), vec![0.0], &spec, &b).is_err());
    }

    #[test]
    fn torus_reflection_fixed_centers() {
        let m = LatticeModel::build_torus(&[6.4], 0.1).unwrap();
        let b = exterior_1d();
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let pair = IsometryPair::make(&m, o, vec![0.0], &LiftSpec::exterior(), &b).unwrap();
        let centers = pair.axis_fixed_centers(&m, 0).unwrap();
        assert_eq!(centers.len(), 2);
        assert_abs_diff_eq!(centers[0], 0.0);
        assert_abs_diff_eq!(centers[1], 3.2);
        assert_eq!(pair.fixed_sites(&m).len(), 2);
    }
}
