//! Clifford modules over flat ℝⁿ: generator matrices with c(v)² = −‖v‖²,
//! the grading involution, and the induced exterior-algebra lifts of
//! orthogonal maps.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE_C, ZERO_C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    /// Irreducible graded Clifford module, fiber dimension 2^⌈n/2⌉.
    Spinor,
    /// Complexified exterior algebra ΛℝⁿM with c = ε − ι, fiber dimension 2ⁿ.
    Exterior,
}

/// A graded Clifford module: skew-adjoint generators c₁..c_n with
/// cᵢcⱼ + cⱼcᵢ = −2δᵢⱼ, and a diagonal grading γ (γ² = 1, γcᵢ = −cᵢγ).
#[derive(Clone)]
pub struct CliffordBundle {
    kind: BundleKind,
    dim: usize,
    fiber_dim: usize,
    generators: Vec<CMat>,
    /// diagonal of γ, entries ±1
    grading: Vec<f64>,
    /// Hermitian unitary anticommuting with γ and every cᵢ, when one exists
    /// in the module: the mass term D + m·γ′ stays odd and self-adjoint and
    /// gaps the spectrum at m.
    mass_generator: Option<CMat>,
}

const PAULI_1: [[Complex64; 2]; 2] = [
    [ZERO_C, ONE_C],
    [ONE_C, ZERO_C],
];

fn pauli(k: usize) -> CMat {
    match k {
        1 => CMat::from_fn(2, 2, |i, j| PAULI_1[i][j]),
        2 => CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => ZERO_C,
        }),
        3 => CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => ONE_C,
            (1, 1) => -ONE_C,
            _ => ZERO_C,
        }),
        _ => CMat::identity(2, 2),
    }
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// (−1)^{#{j ∈ S : j < i}}, the anticommutation sign of axis i past the
/// generators of S.
pub fn subset_sign(i: usize, s: usize) -> f64 {
    let below = (s & ((1usize << i) - 1)).count_ones();
    if below % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl CliffordBundle {
    pub fn build(dim: usize, kind: BundleKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Clifford("dimension must be >= 1".into()));
        }
        let bundle = match kind {
            BundleKind::Spinor => Self::build_spinor(dim),
            BundleKind::Exterior => Self::build_exterior(dim),
        };
        let defect = bundle.relation_defect();
        debug_assert!(defect < 1e-12, "clifford relations violated: {defect}");
        Ok(bundle)
    }

    /// Jordan–Wigner tower: Hermitian anticommuting γᴴ₁..γᴴ₂ₘ on (ℂ²)^⊗m,
    /// generators cᵢ = i·γᴴᵢ for i ≤ n, grading σ₃^⊗m.
    fn build_spinor(n: usize) -> Self {
        let m = n.div_ceil(2);
        let fiber = 1usize << m;
        let mut gammas = Vec::with_capacity(2 * m);
        for j in 0..m {
            for p in [1usize, 2usize] {
                let mut g = CMat::identity(1, 1);
                for slot in 0..m {
                    let factor = if slot < j {
                        pauli(3)
                    } else if slot == j {
                        pauli(p)
                    } else {
                        CMat::identity(2, 2)
                    };
                    g = kron(&g, &factor);
                }
                gammas.push(g);
            }
        }
        let i_unit = Complex64::new(0.0, 1.0);
        let generators: Vec<CMat> = gammas[..n].iter().map(|g| g.map(|z| z * i_unit)).collect();
        let mut grading = vec![1.0f64; fiber];
        for (idx, g) in grading.iter_mut().enumerate() {
            // σ₃^⊗m diagonal entry: parity of set bits of the index
            if (idx.count_ones() % 2) == 1 {
                *g = -1.0;
            }
        }
        let mass_generator = if n % 2 == 1 {
            Some(gammas[n].clone())
        } else {
            None
        };
        CliffordBundle {
            kind: BundleKind::Spinor,
            dim: n,
            fiber_dim: fiber,
            generators,
            grading,
            mass_generator,
        }
    }

    /// Λℝⁿ with basis e_S indexed by bitmask, cᵢ = εᵢ − ιᵢ, γ = (−1)^{|S|}.
    fn build_exterior(n: usize) -> Self {
        let fiber = 1usize << n;
        let mut generators = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = CMat::zeros(fiber, fiber);
            let bit = 1usize << i;
            for s in 0..fiber {
                if s & bit == 0 {
                    // ε_i: e_S -> sign · e_{S∪i}
                    c[(s | bit, s)] += Complex64::new(subset_sign(i, s), 0.0);
                } else {
                    // −ι_i: e_S -> −sign · e_{S∖i}
                    c[(s & !bit, s)] -= Complex64::new(subset_sign(i, s & !bit), 0.0);
                }
            }
            generators.push(c);
        }
        let grading = (0..fiber)
            .map(|s| if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        // δ₁ = ε₀ + ι₀ is Hermitian, odd, and anticommutes with every cᵢ.
        let mut mass = CMat::zeros(fiber, fiber);
        for s in 0..fiber {
            if s & 1 == 0 {
                mass[(s | 1, s)] += ONE_C;
            } else {
                mass[(s & !1, s)] += ONE_C;
            }
        }
        CliffordBundle {
            kind: BundleKind::Exterior,
            dim: n,
            fiber_dim: fiber,
            generators,
            grading,
            mass_generator: Some(mass),
        }
    }

    pub fn kind(&self) -> BundleKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn generator(&self, i: usize) -> &CMat {
        &self.generators[i]
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    /// Diagonal of the grading involution γ.
    pub fn grading(&self) -> &[f64] {
        &self.grading
    }

    pub fn grading_matrix(&self) -> CMat {
        CMat::from_fn(self.fiber_dim, self.fiber_dim, |i, j| {
            if i == j {
                Complex64::new(self.grading[i], 0.0)
            } else {
                ZERO_C
            }
        })
    }

    pub fn mass_generator(&self) -> Option<&CMat> {
        self.mass_generator.as_ref()
    }

    /// c(v) = Σ vᵢ cᵢ.
    pub fn clifford_action(&self, v: &[f64]) -> CMat {
        let mut c = CMat::zeros(self.fiber_dim, self.fiber_dim);
        for (i, &vi) in v.iter().enumerate() {
            c += self.generators[i].map(|z| z * Complex64::new(vi, 0.0));
        }
        c
    }

    /// Max violation over the defining relations: anticommutators
    /// cᵢcⱼ + cⱼcᵢ + 2δᵢⱼ, skew-adjointness, γ² = 1, γcᵢ + cᵢγ = 0, and the
    /// mass generator's relations when present.
    pub fn relation_defect(&self) -> f64 {
        let n = self.dim;
        let f = self.fiber_dim;
        let id = CMat::identity(f, f);
        let gamma = self.grading_matrix();
        let mut worst = 0.0f64;
        let mut upd = |m: &CMat| {
            let v = m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            if v > worst {
                worst = v;
            }
        };
        for i in 0..n {
            let ci = &self.generators[i];
            upd(&(ci.adjoint() + ci));
            for j in 0..n {
                let cj = &self.generators[j];
                let mut anti = ci * cj + cj * ci;
                if i == j {
                    anti += id.map(|z| z * Complex64::new(2.0, 0.0));
                }
                upd(&anti);
            }
            upd(&(&gamma * ci + ci * &gamma));
        }
        upd(&(&gamma * &gamma - &id));
        if let Some(mg) = &self.mass_generator {
            upd(&(mg.adjoint() - mg));
            upd(&(mg * mg - &id));
            upd(&(&gamma * mg + mg * &gamma));
            for ci in &self.generators {
                upd(&(ci * mg + mg * ci));
            }
        }
        worst
    }
}

/// Λ(O) on the subset basis of Λℝⁿ: entry (T, S) is the minor det O[T, S]
/// over rows T and columns S of equal cardinality. For orthogonal O this is
/// the unitary exterior-algebra lift intertwining c(v) ↦ c(Ov).
pub fn exterior_lift(o: &DMatrix<f64>) -> CMat {
    let n = o.nrows();
    let fiber = 1usize << n;
    let mut lift = CMat::zeros(fiber, fiber);
    for s in 0..fiber {
        let cols: Vec<usize> = (0..n).filter(|&j| s & (1 << j) != 0).collect();
        for t in 0..fiber {
            if (t as usize).count_ones() != (s as usize).count_ones() {
                continue;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| t & (1 << i) != 0).collect();
            let k = rows.len();
            let det = if k == 0 {
                1.0
            } else {
                let minor = DMatrix::from_fn(k, k, |a, b| o[(rows[a], cols[b])]);
                minor.determinant()
            };
            if det.abs() > 1e-14 {
                lift[(t, s)] = Complex64::new(det, 0.0);
            }
        }
    }
    lift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm;

    #[test]
    fn exterior_1d_matches_forced_form() {
        let b = CliffordBundle::build(1, BundleKind::Exterior).unwrap();
        assert_eq!(b.fiber_dim(), 2);
        let c = b.generator(0);
        assert_eq!(c[(1, 0)], ONE_C);
        assert_eq!(c[(0, 1)], -ONE_C);
        assert_eq!(b.grading(), &[1.0, -1.0]);
        assert!(b.relation_defect() < 1e-12);
    }

    #[test]
    fn spinor_2d_fiber_two_anticommutes() {
        let b = CliffordBundle::build(2, BundleKind::Spinor).unwrap();
        assert_eq!(b.fiber_dim(), 2);
        let anti = b.generator(0) * b.generator(1) + b.generator(1) * b.generator(0);
        assert!(fro_norm(&anti) < 1e-12);
        assert!(b.relation_defect() < 1e-12);
        assert!(b.mass_generator().is_none());
    }

    #[test]
    fn exterior_3d_all_relations() {
        let b = CliffordBundle::build(3, BundleKind::Exterior).unwrap();
        assert_eq!(b.fiber_dim(), 8);
        assert!(b.relation_defect() < 1e-12);
    }

    #[test]
    fn spinor_odd_dims_have_mass_generator() {
        for n in [1usize, 3] {
            let b = CliffordBundle::build(n, BundleKind::Spinor).unwrap();
            assert!(b.mass_generator().is_some());
            assert!(b.relation_defect() < 1e-12);
        }
    }

    #[test]
    fn clifford_action_squares_to_minus_norm() {
        let b = CliffordBundle::build(2, BundleKind::Exterior).unwrap();
        let v = [0.6, -0.8];
        let cv = b.clifford_action(&v);
        let sq = &cv * &cv;
        let expect = CMat::identity(4, 4).map(|z| z * Complex64::new(-1.0, 0.0));
        assert!(fro_norm(&(sq - expect)) < 1e-12);
    }

    #[test]
    fn exterior_lift_of_reflection_is_grading_in_1d() {
        let o = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let lift = exterior_lift(&o);
        assert_eq!(lift[(0, 0)], ONE_C);
        assert_eq!(lift[(1, 1)], -ONE_C);
    }

    #[test]
    fn exterior_lift_intertwines_clifford_action() {
        // rotation by 90 degrees in the plane
        let o = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let lift = exterior_lift(&o);
        let b = CliffordBundle::build(2, BundleKind::Exterior).unwrap();
        // unitary
        let uu = lift.adjoint() * &lift;
        assert!(fro_norm(&(uu - CMat::identity(4, 4))) < 1e-12);
        for k in 0..2 {
            let v: Vec<f64> = (0..2).map(|i| o[(i, k)]).collect();
            let lhs = &lift * b.generator(k);
            let rhs = b.clifford_action(&v) * &lift;
            assert!(fro_norm(&(lhs - rhs)) < 1e-12);
        }
    }
}
