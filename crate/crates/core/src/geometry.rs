//! Finite lattice samplings of flat boxes and tori: distances, balls,
//! volumes, penumbra sets, and axis-factorized product regions for the
//! large-grid exhaustion bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SNAP;

/// Default cap on the number of sites a model may declare.
pub const DEFAULT_SITE_BUDGET: usize = 8_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    Box,
    Torus,
}

#[derive(Clone, Debug)]
struct Axis {
    count: usize,
    /// coordinate of index 0
    origin: f64,
    /// circumference, for torus axes
    period: Option<f64>,
}

impl Axis {
    fn coord(&self, i: usize, h: f64) -> f64 {
        self.origin + i as f64 * h
    }
}

/// A finite grid sampling of a flat box ∏[−Lᵢ, Lᵢ] or flat torus ∏(ℝ/Cᵢℤ)
/// with uniform spacing `h` and quadrature weight `h^n` per site.
///
/// Site coordinates are generated on demand from per-axis data; ordering is
/// lexicographic by axis (axis 0 slowest), stable across runs.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    kind: LatticeKind,
    spacing: f64,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    site_count: usize,
    extents: Vec<f64>,
}

impl LatticeModel {
    pub fn build_box(half_widths: &[f64], h: f64) -> Result<Self> {
        Self::build_box_with_budget(half_widths, h, DEFAULT_SITE_BUDGET)
    }

    /// Grid covering ∏[−Lᵢ, Lᵢ]: per axis, sites at k·h for |k| ≤ ⌊Lᵢ/h⌋.
    pub fn build_box_with_budget(half_widths: &[f64], h: f64, budget: usize) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::Geometry("dimension must be >= 1".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Geometry(format!("nonpositive spacing {h}")));
        }
        let mut axes = Vec::with_capacity(half_widths.len());
        for &l in half_widths {
            if !(l > 0.0) {
                return Err(Error::Geometry(format!("nonpositive half width {l}")));
            }
            let m = ((l / h) + SNAP * (1.0 + l / h)).floor() as usize;
            axes.push(Axis {
                count: 2 * m + 1,
                origin: -(m as f64) * h,
                period: None,
            });
        }
        Self::finish(LatticeKind::Box, h, axes, half_widths.to_vec(), budget)
    }

    pub fn build_torus(circumferences: &[f64], h: f64) -> Result<Self> {
        Self::build_torus_with_budget(circumferences, h, DEFAULT_SITE_BUDGET)
    }

    /// Periodic grid; each circumference must be an integer multiple of `h`.
    pub fn build_torus_with_budget(circumferences: &[f64], h: f64, budget: usize) -> Result<Self> {
        if circumferences.is_empty() {
            return Err(Error::Geometry("dimension must be >= 1".into()));
        }
        if !(h > 0.0) {
            return Err(Error::Geometry(format!("nonpositive spacing {h}")));
        }
        let mut axes = Vec::with_capacity(circumferences.len());
        for &c in circumferences {
            if !(c > 0.0) {
                return Err(Error::Geometry(format!("nonpositive circumference {c}")));
            }
            let n = (c / h).round();
            if n < 1.0 || (c - n * h).abs() > SNAP * (1.0 + c) {
                return Err(Error::Geometry(format!(
                    "circumference {c} is not an integer multiple of spacing {h}"
                )));
            }
            axes.push(Axis {
                count: n as usize,
                origin: 0.0,
                period: Some(c),
            });
        }
        Self::finish(LatticeKind::Torus, h, axes, circumferences.to_vec(), budget)
    }

    fn finish(
        kind: LatticeKind,
        h: f64,
        axes: Vec<Axis>,
        extents: Vec<f64>,
        budget: usize,
    ) -> Result<Self> {
        let mut site_count: usize = 1;
        for a in &axes {
            site_count = site_count
                .checked_mul(a.count)
                .ok_or(Error::SiteBudget { got: usize::MAX, budget })?;
        }
        if site_count > budget {
            return Err(Error::SiteBudget { got: site_count, budget });
        }
        let n = axes.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].count;
        }
        Ok(LatticeModel {
            kind,
            spacing: h,
            axes,
            strides,
            site_count,
            extents,
        })
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight h^n per site.
    pub fn weight(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn axis_count(&self, axis: usize) -> usize {
        self.axes[axis].count
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.axes[axis].coord(i, self.spacing)
    }

    pub fn axis_period(&self, axis: usize) -> Option<f64> {
        self.axes[axis].period
    }

    /// Declared half-widths (box) or circumferences (torus).
    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn site_multi(&self, idx: usize) -> Vec<usize> {
        debug_assert!(idx < self.site_count);
        let mut rem = idx;
        self.strides
            .iter()
            .map(|&s| {
                let q = rem / s;
                rem %= s;
                q
            })
            .collect()
    }

    pub fn index_of_multi(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| m * s)
            .sum()
    }

    pub fn site_pos(&self, idx: usize) -> Vec<f64> {
        let multi = self.site_multi(idx);
        multi
            .iter()
            .enumerate()
            .map(|(a, &i)| self.axis_coord(a, i))
            .collect()
    }

    /// Locate the site with the given coordinates, within snap tolerance.
    pub fn site_at_pos(&self, pos: &[f64]) -> Option<usize> {
        let h = self.spacing;
        let mut multi = Vec::with_capacity(self.dim());
        for (a, &x) in pos.iter().enumerate() {
            let ax = &self.axes[a];
            let mut y = x;
            if let Some(c) = ax.period {
                y = y.rem_euclid(c);
                // snap a value that rounded up to the period back to 0
                if (c - y).abs() < SNAP * (1.0 + c) {
                    y = 0.0;
                }
            }
            let k = ((y - ax.origin) / h).round();
            if k < 0.0 || k as usize >= ax.count {
                return None;
            }
            if ((y - ax.origin) - k * h).abs() > SNAP * (1.0 + y.abs()) + SNAP {
                return None;
            }
            multi.push(k as usize);
        }
        Some(self.index_of_multi(&multi))
    }

    /// Per-axis displacement (wrapped to the shortest image on torus axes).
    pub fn axis_delta(&self, axis: usize, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        match self.axes[axis].period {
            Some(c) => {
                let d = d.rem_euclid(c);
                d.min(c - d)
            }
            None => d,
        }
    }

    pub fn distance_pos(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim() {
            let d = self.axis_delta(a, p[a], q[a]);
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Euclidean (box) or wrapped-Euclidean (torus) distance between sites.
    pub fn distance(&self, p: usize, q: usize) -> f64 {
        let pp = self.site_pos(p);
        let qq = self.site_pos(q);
        self.distance_pos(&pp, &qq)
    }

    /// Open ball {m : d(center, m) < r}.
    pub fn ball(&self, center: usize, r: f64) -> Region {
        let cpos = self.site_pos(center);
        let eps = SNAP * (1.0 + r.abs());
        let indices = (0..self.site_count)
            .filter(|&m| self.distance_pos(&cpos, &self.site_pos(m)) < r - eps)
            .collect();
        Region::from_sorted(indices, "ball")
    }

    /// Pen⁺(X, r) = {m : d(m, X) ≤ r}, closure convention.
    pub fn outer_penumbra(&self, x: &Region, r: f64) -> Result<Region> {
        x.check_subset(self)?;
        let eps = SNAP * (1.0 + r.abs());
        let xpos: Vec<Vec<f64>> = x.indices().iter().map(|&m| self.site_pos(m)).collect();
        let indices = (0..self.site_count)
            .filter(|&m| {
                let mp = self.site_pos(m);
                xpos.iter()
                    .any(|xp| self.distance_pos(&mp, xp) <= r + eps)
            })
            .collect();
        Ok(Region::from_sorted(indices, "pen+"))
    }

    /// Pen⁻_U(U_j, r) = {m ∈ U ∩ M_j : d(m, M ∖ M_j) ≥ r}.
    pub fn inner_penumbra_u(&self, u: &Region, mj: &Region, r: f64) -> Result<Region> {
        u.check_subset(self)?;
        mj.check_subset(self)?;
        let eps = SNAP * (1.0 + r.abs());
        let uj = u.intersect(mj);
        let complement: Vec<Vec<f64>> = (0..self.site_count)
            .filter(|m| !mj.contains(*m))
            .map(|m| self.site_pos(m))
            .collect();
        let indices = uj
            .indices()
            .iter()
            .copied()
            .filter(|&m| {
                let mp = self.site_pos(m);
                complement
                    .iter()
                    .map(|cp| self.distance_pos(&mp, cp))
                    .fold(f64::INFINITY, f64::min)
                    >= r - eps
            })
            .collect();
        Ok(Region::from_sorted(indices, "pen-"))
    }

    /// min over m ∈ region of d(m, set), +∞ for an empty set.
    pub fn distance_to_set(&self, m: usize, set: &Region) -> f64 {
        let mp = self.site_pos(m);
        set.indices()
            .iter()
            .map(|&s| self.distance_pos(&mp, &self.site_pos(s)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn full_region(&self) -> Region {
        Region::from_sorted((0..self.site_count).collect(), "full")
    }
}

/// A site-index subset of a model with a free-form tag.
#[derive(Clone, Debug)]
pub struct Region {
    indices: Vec<usize>,
    tag: String,
}

impl Region {
    pub fn new(mut indices: Vec<usize>, tag: &str) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Region {
            indices,
            tag: tag.to_string(),
        }
    }

    fn from_sorted(indices: Vec<usize>, tag: &str) -> Self {
        Region {
            indices,
            tag: tag.to_string(),
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.indices.binary_search(&m).is_ok()
    }

    pub fn check_subset(&self, model: &LatticeModel) -> Result<()> {
        match self.indices.last() {
            Some(&m) if m >= model.site_count() => Err(Error::Geometry(format!(
                "region `{}` references site {m} outside the model ({} sites)",
                self.tag,
                model.site_count()
            ))),
            _ => Ok(()),
        }
    }

    /// volume = weight × cardinality.
    pub fn volume(&self, model: &LatticeModel) -> f64 {
        model.weight() * self.indices.len() as f64
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let indices = self
            .indices
            .iter()
            .copied()
            .filter(|&m| other.contains(m))
            .collect();
        Region::from_sorted(indices, &format!("{}∩{}", self.tag, other.tag))
    }

    pub fn complement(&self, model: &LatticeModel) -> Region {
        let indices = (0..model.site_count())
            .filter(|&m| !self.contains(m))
            .collect();
        Region::from_sorted(indices, &format!("∁{}", self.tag))
    }
}

/// One axis factor of a product region: either the full axis or a union of
/// center/half-width intervals (wrapped on torus axes).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AxisSet {
    Full,
    Union(Vec<Interval>),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub half: f64,
    /// open: membership is strict (|x−c| < half); closed otherwise.
    pub open: bool,
}

impl Interval {
    pub fn open(center: f64, half: f64) -> Self {
        Interval { center, half, open: true }
    }

    pub fn closed(center: f64, half: f64) -> Self {
        Interval { center, half, open: false }
    }
}

/// An axis-aligned product set ∏ᵢ Aᵢ. Membership, site counts and volumes
/// factorize over axes, which keeps exhaustion bookkeeping exact on grids far
/// too large to enumerate pairwise.
#[derive(Clone, Debug)]
pub struct ProductRegion {
    axes: Vec<AxisSet>,
}

impl ProductRegion {
    pub fn new(axes: Vec<AxisSet>) -> Self {
        ProductRegion { axes }
    }

    pub fn full(dim: usize) -> Self {
        ProductRegion {
            axes: vec![AxisSet::Full; dim],
        }
    }

    /// Centered cube [−a, a]^n (closed).
    pub fn cube(dim: usize, a: f64) -> Self {
        ProductRegion {
            axes: vec![AxisSet::Union(vec![Interval::closed(0.0, a)]); dim],
        }
    }

    pub fn axes(&self) -> &[AxisSet] {
        &self.axes
    }

    pub fn axis_contains(&self, model: &LatticeModel, axis: usize, x: f64) -> bool {
        match &self.axes[axis] {
            AxisSet::Full => true,
            AxisSet::Union(ivs) => ivs.iter().any(|iv| {
                let d = model.axis_delta(axis, x, iv.center);
                let eps = SNAP * (1.0 + iv.half.abs());
                if iv.open {
                    d < iv.half - eps
                } else {
                    d <= iv.half + eps
                }
            }),
        }
    }

    pub fn contains_pos(&self, model: &LatticeModel, pos: &[f64]) -> bool {
        (0..model.dim()).all(|a| self.axis_contains(model, a, pos[a]))
    }

    /// Intersection with another product region (axis-wise).
    pub fn intersect_counts(&self, other: &ProductRegion, model: &LatticeModel) -> Vec<usize> {
        (0..model.dim())
            .map(|a| {
                (0..model.axis_count(a))
                    .filter(|&i| {
                        let x = model.axis_coord(a, i);
                        self.axis_contains(model, a, x) && other.axis_contains(model, a, x)
                    })
                    .count()
            })
            .collect()
    }

    /// Lattice site count, factorized over axes.
    pub fn site_count(&self, model: &LatticeModel) -> usize {
        (0..model.dim())
            .map(|a| {
                (0..model.axis_count(a))
                    .filter(|&i| self.axis_contains(model, a, model.axis_coord(a, i)))
                    .count()
            })
            .product()
    }

    /// Lattice volume = site count × h^n, computed without enumeration.
    pub fn volume(&self, model: &LatticeModel) -> f64 {
        self.site_count(model) as f64 * model.weight()
    }

    /// Materialize as an explicit site-index region (small models only).
    pub fn materialize(&self, model: &LatticeModel, tag: &str) -> Region {
        let indices = (0..model.site_count())
            .filter(|&m| self.contains_pos(model, &model.site_pos(m)))
            .collect();
        Region::new(indices, tag)
    }

    /// Per-axis 1D distance from coordinate `x` to the nearest lattice
    /// coordinate outside this region's axis factor; +∞ if the factor covers
    /// the whole axis.
    pub fn axis_exit_distance(&self, model: &LatticeModel, axis: usize, x: f64) -> f64 {
        let outside: Vec<f64> = (0..model.axis_count(axis))
            .map(|i| model.axis_coord(axis, i))
            .filter(|&y| !self.axis_contains(model, axis, y))
            .collect();
        outside
            .iter()
            .map(|&y| model.axis_delta(axis, x, y))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_lattice_1d_l4_h1_has_9_sites() {
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        assert_eq!(m.site_count(), 9);
        assert_abs_diff_eq!(m.site_pos(0)[0], -4.0);
        assert_abs_diff_eq!(m.site_pos(8)[0], 4.0);
    }

    #[test]
    fn box_lattice_2d_25_sites() {
        let m = LatticeModel::build_box(&[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.site_count(), 25);
    }

    #[test]
    fn box_rejects_zero_spacing() {
        assert!(LatticeModel::build_box(&[4.0], 0.0).is_err());
    }

    #[test]
    fn box_respects_budget() {
        assert!(matches!(
            LatticeModel::build_box_with_budget(&[100.0, 100.0], 0.1, 1000),
            Err(Error::SiteBudget { .. })
        ));
    }

    #[test]
    fn torus_site_counts() {
        let m = LatticeModel::build_torus(&[6.4], 0.1).unwrap();
        assert_eq!(m.site_count(), 64);
        let m2 = LatticeModel::build_torus(&[1.0, 1.0], 0.25).unwrap();
        assert_eq!(m2.site_count(), 16);
    }

    #[test]
    fn torus_rejects_incommensurate() {
        assert!(LatticeModel::build_torus(&[1.0], 0.3).is_err());
    }

    #[test]
    fn box_distance() {
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        let p = m.site_at_pos(&[-2.0]).unwrap();
        let q = m.site_at_pos(&[3.0]).unwrap();
        assert_abs_diff_eq!(m.distance(p, q), 5.0);
        assert_abs_diff_eq!(m.distance(p, p), 0.0);
    }

    #[test]
    fn torus_distance_wraps() {
        let m = LatticeModel::build_torus(&[10.0], 1.0).unwrap();
        let p = m.site_at_pos(&[1.0]).unwrap();
        let q = m.site_at_pos(&[9.0]).unwrap();
        assert_abs_diff_eq!(m.distance(p, q), 2.0);
    }

    #[test]
    fn ball_is_open() {
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        let c = m.site_at_pos(&[0.0]).unwrap();
        let b = m.ball(c, 2.5);
        let coords: Vec<f64> = b.indices().iter().map(|&i| m.site_pos(i)[0]).collect();
        assert_eq!(coords, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        // exact-radius sites excluded
        let b2 = m.ball(c, 2.0);
        assert_eq!(b2.len(), 3);
    }

    #[test]
    fn outer_penumbra_zero_radius_is_closure() {
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        let x = Region::new(vec![2, 3], "x");
        let p = m.outer_penumbra(&x, 0.0).unwrap();
        assert_eq!(p.indices(), x.indices());
    }

    #[test]
    fn inner_penumbra_matches_displayed_definition() {
        // M = [-4,4], M_j = [-2,2], U = full; Pen^-(U_j, 1) = sites with
        // d(m, complement) >= 1: complement starts at |x|=3, so |x| <= 2 all
        // qualify at r=1, |x| <= 1 at r=2.
        let m = LatticeModel::build_box(&[4.0], 1.0).unwrap();
        let u = m.full_region();
        let mj = ProductRegion::cube(1, 2.0).materialize(&m, "mj");
        let p1 = m.inner_penumbra_u(&u, &mj, 1.0).unwrap();
        assert_eq!(p1.len(), 5);
        let p2 = m.inner_penumbra_u(&u, &mj, 2.0).unwrap();
        assert_eq!(p2.len(), 3);
    }

    #[test]
    fn product_region_counts_match_materialization() {
        let m = LatticeModel::build_box(&[3.0, 3.0], 0.5).unwrap();
        let u = ProductRegion::new(vec![
            AxisSet::Union(vec![Interval::open(0.0, 1.0)]),
            AxisSet::Full,
        ]);
        let mat = u.materialize(&m, "u");
        assert_eq!(u.site_count(&m), mat.len());
        assert_abs_diff_eq!(u.volume(&m), mat.volume(&m));
    }

    #[test]
    fn axis_exit_distance_factorizes_set_distance() {
        let m = LatticeModel::build_box(&[4.0, 4.0], 1.0).unwrap();
        let mj = ProductRegion::cube(2, 2.0);
        let mj_reg = mj.materialize(&m, "mj");
        let comp = mj_reg.complement(&m);
        for &s in mj_reg.indices() {
            let pos = m.site_pos(s);
            let factored = (0..2)
                .map(|a| mj.axis_exit_distance(&m, a, pos[a]))
                .fold(f64::INFINITY, f64::min);
            let brute = m.distance_to_set(s, &comp);
            assert_abs_diff_eq!(factored, brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn torus_interval_wraps() {
        let m = LatticeModel::build_torus(&[6.4], 0.1).unwrap();
        let u = ProductRegion::new(vec![AxisSet::Union(vec![Interval::open(0.0, 1.0)])]);
        // sites x in [0, 1) and (5.4, 6.4) are members
        assert!(u.axis_contains(&m, 0, 0.5));
        assert!(u.axis_contains(&m, 0, 6.0));
        assert!(!u.axis_contains(&m, 0, 3.2));
    }

    #[test]
    fn quadrature_weight_sums_to_volume() {
        let m = LatticeModel::build_torus(&[2.0, 3.0], 0.5).unwrap();
        let total = m.weight() * m.site_count() as f64;
        assert_abs_diff_eq!(total, 6.0, epsilon = 1e-12);
    }
}
