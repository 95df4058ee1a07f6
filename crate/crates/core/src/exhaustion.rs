//! Exhaustions U ∩ M_j, penumbra-regularity ratios, averaged integrals and
//! the accumulation-point functionals they induce.
//!
//! All counting goes through the axis-factorized product-region paths so the
//! bookkeeping stays exact on grids far too large to enumerate pairwise; the
//! brute-force region ops in `geometry` cross-check the factorization on
//! small models.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{AxisSet, Interval, LatticeModel, ProductRegion};
use crate::isometry::IsometryPair;
use crate::SNAP;

/// The sets U and M_j (nested cubes of given half-widths) over a model.
pub struct ExhaustionPlan {
    model: Arc<LatticeModel>,
    u: ProductRegion,
    radii: Vec<f64>,
}

impl ExhaustionPlan {
    /// `radii[j]` is the half-width of the cube M_j. Requires a nested
    /// family whose last stage covers every lattice site.
    pub fn new(model: Arc<LatticeModel>, u: ProductRegion, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Exhaustion("empty exhaustion".into()));
        }
        if radii.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Exhaustion("M_j must be nested: radii decrease".into()));
        }
        let last = ProductRegion::cube(model.dim(), *radii.last().unwrap());
        if last.site_count(&model) != model.site_count() {
            return Err(Error::Exhaustion(
                "the largest M_j does not exhaust the lattice".into(),
            ));
        }
        Ok(ExhaustionPlan { model, u, radii })
    }

    pub fn model(&self) -> &Arc<LatticeModel> {
        &self.model
    }

    pub fn u(&self) -> &ProductRegion {
        &self.u
    }

    pub fn stage_count(&self) -> usize {
        self.radii.len()
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.radii[j]
    }

    pub fn mj(&self, j: usize) -> ProductRegion {
        ProductRegion::cube(self.model.dim(), self.radii[j])
    }

    /// Per-axis coordinate index lists of U ∩ M_j.
    fn uj_axis_indices(&self, j: usize) -> Vec<Vec<usize>> {
        let mj = self.mj(j);
        (0..self.model.dim())
            .map(|a| {
                (0..self.model.axis_count(a))
                    .filter(|&i| {
                        let x = self.model.axis_coord(a, i);
                        self.u.axis_contains(&self.model, a, x)
                            && mj.axis_contains(&self.model, a, x)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn uj_site_count(&self, j: usize) -> usize {
        self.uj_axis_indices(j).iter().map(Vec::len).product()
    }

    /// vol(U_j) by lattice quadrature (site count × h^n).
    pub fn uj_volume(&self, j: usize) -> f64 {
        self.uj_site_count(j) as f64 * self.model.weight()
    }

    /// Site indices of U_j, factorized (only materializes U_j itself).
    pub fn uj_sites(&self, j: usize) -> Vec<usize> {
        let axes = self.uj_axis_indices(j);
        let mut sites = Vec::with_capacity(axes.iter().map(Vec::len).product());
        let n = axes.len();
        let mut cursor = vec![0usize; n];
        if axes.iter().any(Vec::is_empty) {
            return sites;
        }
        loop {
            let multi: Vec<usize> = (0..n).map(|a| axes[a][cursor[a]]).collect();
            sites.push(self.model.index_of_multi(&multi));
            // odometer
            let mut a = n;
            loop {
                if a == 0 {
                    return sites;
                }
                a -= 1;
                cursor[a] += 1;
                if cursor[a] < axes[a].len() {
                    break;
                }
                cursor[a] = 0;
            }
        }
    }

    /// Membership test for an arbitrary position (staggered cell midpoints
    /// included).
    pub fn uj_contains_pos(&self, j: usize, pos: &[f64]) -> bool {
        self.u.contains_pos(&self.model, pos) && self.mj(j).contains_pos(&self.model, pos)
    }

    /// Validate φ-invariance of U and return the displacement bound δ =
    /// min d(φ(m), m) off U. Enumerates the complement, so small models only.
    pub fn validate_pair(&self, pair: &IsometryPair) -> Result<f64> {
        // algebraic invariance for signed permutations: image of each axis
        // factor must equal the factor of the target axis
        if pair.is_signed_permutation() {
            for a in 0..self.model.dim() {
                let (ta, sign) = pair.axis_image(a).unwrap();
                let img: Vec<Interval> = match &self.u.axes()[a] {
                    AxisSet::Full => {
                        if !matches!(self.u.axes()[ta], AxisSet::Full) {
                            return Err(Error::Exhaustion(
                                "U is not invariant under the isometry".into(),
                            ));
                        }
                        continue;
                    }
                    AxisSet::Union(ivs) => ivs
                        .iter()
                        .map(|iv| Interval {
                            center: sign * iv.center + pair.translation()[ta],
                            half: iv.half,
                            open: iv.open,
                        })
                        .collect(),
                };
                let target = match &self.u.axes()[ta] {
                    AxisSet::Full => {
                        return Err(Error::Exhaustion(
                            "U is not invariant under the isometry".into(),
                        ))
                    }
                    AxisSet::Union(ivs) => ivs,
                };
                for iv in &img {
                    let matched = target.iter().any(|t| {
                        self.model.axis_delta(ta, iv.center, t.center) < SNAP * (1.0 + 1.0)
                            && (iv.half - t.half).abs() < SNAP
                            && iv.open == t.open
                    });
                    if !matched {
                        return Err(Error::Exhaustion(
                            "U is not invariant under the isometry".into(),
                        ));
                    }
                }
            }
        } else {
            let u_reg = self.u.materialize(&self.model, "U");
            for &m in u_reg.indices() {
                let img = pair.map_site(&self.model, m).ok_or_else(|| {
                    Error::Exhaustion("isometry does not preserve the lattice".into())
                })?;
                if !u_reg.contains(img) {
                    return Err(Error::Exhaustion(
                        "U is not invariant under the isometry".into(),
                    ));
                }
            }
        }
        // δ off U by enumeration
        let mut delta = f64::INFINITY;
        for m in 0..self.model.site_count() {
            let pos = self.model.site_pos(m);
            if !self.u.contains_pos(&self.model, &pos) {
                let d = self.model.distance_pos(&pair.apply_pos(&pos), &pos);
                delta = delta.min(d);
            }
        }
        Ok(delta)
    }
}

/// (vol(U_j) − vol(Pen⁻_U(U_j, r))) / vol(U_j), computed by per-axis counts.
///
/// For a product M_j, the lattice distance to M ∖ M_j factorizes as
/// min over axes of the 1D exit distances, so the penumbra count is a
/// product of per-axis counts.
pub fn u_regularity_ratio(plan: &ExhaustionPlan, r: f64, j: usize) -> Result<f64> {
    let model = plan.model();
    let mj = plan.mj(j);
    let eps = SNAP * (1.0 + r.abs());
    let mut count_uj: f64 = 1.0;
    let mut count_pen: f64 = 1.0;
    for a in 0..model.dim() {
        // exit distances only depend on the axis coordinate
        let mut cu = 0usize;
        let mut cp = 0usize;
        for i in 0..model.axis_count(a) {
            let x = model.axis_coord(a, i);
            if !(plan.u().axis_contains(model, a, x) && mj.axis_contains(model, a, x)) {
                continue;
            }
            cu += 1;
            if mj.axis_exit_distance(model, a, x) >= r - eps {
                cp += 1;
            }
        }
        count_uj *= cu as f64;
        count_pen *= cp as f64;
    }
    if count_uj == 0.0 {
        return Err(Error::Exhaustion(format!("vol(U_{j}) = 0")));
    }
    Ok(1.0 - count_pen / count_uj)
}

/// (1/vol(U_j)) Σ_{m ∈ U_j} h^n · density(m).
pub fn averaged_integral(
    plan: &ExhaustionPlan,
    j: usize,
    density: impl Fn(usize) -> f64,
) -> Result<f64> {
    let sites = plan.uj_sites(j);
    if sites.is_empty() {
        return Err(Error::Exhaustion(format!("U_{j} is empty")));
    }
    let hn = plan.model().weight();
    let total: f64 = sites.iter().map(|&m| hn * density(m)).sum();
    Ok(total / plan.uj_volume(j))
}

/// A polynomial bump supported in [0,1]: amplitude · c_p · x^p (1−x)^p with
/// c_p chosen so the unit-amplitude bump has unit integral.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    pub power: u32,
    pub amplitude: f64,
    norm: f64,
}

impl Bump {
    pub fn new(power: u32, amplitude: f64) -> Result<Self> {
        if power == 0 {
            return Err(Error::Exhaustion("bump power must be >= 1".into()));
        }
        // 1/∫ x^p(1−x)^p dx = (2p+1)! / (p!)²
        let mut norm = 1.0f64;
        for k in 1..=(2 * power + 1) {
            norm *= k as f64;
        }
        let mut pf = 1.0f64;
        for k in 1..=power {
            pf *= k as f64;
        }
        norm /= pf * pf;
        let bump = Bump { power, amplitude, norm };
        // numeric normalization check against the closed form
        let steps = 4096;
        let quad: f64 = (0..steps)
            .map(|i| bump.eval((i as f64 + 0.5) / steps as f64) / steps as f64)
            .sum();
        if (quad - amplitude).abs() > 1e-6 * (1.0 + amplitude.abs()) {
            return Err(Error::Exhaustion(format!(
                "bump normalization defect: ∫χ = {quad}, expected {amplitude}"
            )));
        }
        Ok(bump)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.amplitude * self.norm * x.powi(self.power as i32) * (1.0 - x).powi(self.power as i32)
    }
}

/// ζ(x) = Σ_j (−1)^j χ(2^{−j} x − 1): term j supported in [2^j, 2^{j+1}].
pub fn zeta_eval(bump: &Bump, x: f64) -> f64 {
    if x < 1.0 {
        return 0.0;
    }
    let j = x.log2().floor() as i32;
    let y = x / 2f64.powi(j) - 1.0;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    sign * bump.eval(y)
}

#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub center: f64,
    pub witnesses: Vec<usize>,
    /// at least two witnessing stages
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AccumulationReport {
    pub clusters: Vec<Cluster>,
    pub burn_in: usize,
    pub has_stable: bool,
}

/// Cluster the tail of a stage sequence (after burn-in) by single linkage at
/// `cluster_tol`; keep clusters whose witnesses extend into the final window
/// (accumulation points must recur arbitrarily late). Cluster centers
/// average the latest (up to 3) witness values, the best finite-range
/// estimate of the subsequence limit.
pub fn accumulation_points(
    seq: &[f64],
    cluster_tol: f64,
    burn_in_frac: f64,
) -> Result<AccumulationReport> {
    if seq.len() < 8 {
        return Err(Error::Exhaustion(format!(
            "accumulation analysis needs >= 8 stages, got {}",
            seq.len()
        )));
    }
    let burn_in = ((seq.len() as f64) * burn_in_frac).floor() as usize;
    let burn_in = burn_in.min(seq.len().saturating_sub(4));
    let tail: Vec<(usize, f64)> = seq
        .iter()
        .copied()
        .enumerate()
        .skip(burn_in)
        .filter(|(_, v)| v.is_finite())
        .collect();
    if tail.len() < 4 {
        return Err(Error::Exhaustion("too few finite tail stages".into()));
    }
    let mut sorted = tail.clone();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    // single-linkage chains
    let mut groups: Vec<Vec<(usize, f64)>> = Vec::new();
    for &(i, v) in &sorted {
        match groups.last_mut() {
            Some(g) if (v - g.last().unwrap().1).abs() <= cluster_tol => g.push((i, v)),
            _ => groups.push(vec![(i, v)]),
        }
    }
    // recurrence filter: witnesses must reach the final window
    let last_index = seq.len() - 1;
    let window = std::cmp::max(4, tail.len() / 4);
    let reach = last_index.saturating_sub(window);
    let mut clusters = Vec::new();
    for g in groups {
        let max_witness = g.iter().map(|&(i, _)| i).max().unwrap();
        if max_witness < reach {
            continue;
        }
        let mut witnesses: Vec<usize> = g.iter().map(|&(i, _)| i).collect();
        witnesses.sort_unstable();
        let late: Vec<f64> = witnesses
            .iter()
            .rev()
            .take(3)
            .map(|&i| seq[i])
            .collect();
        clusters.push(Cluster {
            center: late.iter().sum::<f64>() / late.len() as f64,
            stable: witnesses.len() >= 2,
            witnesses,
        });
    }
    clusters.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    let has_stable = clusters.iter().any(|c| c.stable);
    Ok(AccumulationReport {
        clusters,
        burn_in,
        has_stable,
    })
}

/// Which accumulation point an associated functional reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SelectionRule {
    /// earliest stage index achieving a stable cluster
    First,
    Min,
    Max,
    NearestTo(f64),
}

impl SelectionRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(SelectionRule::First),
            "min" => Ok(SelectionRule::Min),
            "max" => Ok(SelectionRule::Max),
            other => other
                .strip_prefix("nearest:")
                .and_then(|v| v.parse::<f64>().ok())
                .map(SelectionRule::NearestTo)
                .ok_or_else(|| Error::Config(format!("unknown selection rule `{other}`"))),
        }
    }
}

/// Stage averages together with their accumulation analysis.
#[derive(Clone, Debug, Serialize)]
pub struct AveragedFunctional {
    pub stages: Vec<f64>,
    pub report: AccumulationReport,
}

impl AveragedFunctional {
    pub fn analyze(stages: Vec<f64>, cluster_tol: f64, burn_in_frac: f64) -> Result<Self> {
        let report = accumulation_points(&stages, cluster_tol, burn_in_frac)?;
        Ok(AveragedFunctional { stages, report })
    }

    /// The functional value under a selection rule; None when no cluster
    /// qualifies.
    pub fn select(&self, rule: SelectionRule) -> Option<f64> {
        let pool: Vec<&Cluster> = if self.report.has_stable {
            self.report.clusters.iter().filter(|c| c.stable).collect()
        } else {
            self.report.clusters.iter().collect()
        };
        if pool.is_empty() {
            return None;
        }
        let chosen = match rule {
            SelectionRule::First => pool
                .iter()
                .min_by_key(|c| c.witnesses.first().copied().unwrap_or(usize::MAX))?,
            SelectionRule::Min => pool
                .iter()
                .min_by(|a, b| a.center.partial_cmp(&b.center).unwrap())?,
            SelectionRule::Max => pool
                .iter()
                .max_by(|a, b| a.center.partial_cmp(&b.center).unwrap())?,
            SelectionRule::NearestTo(x) => pool.iter().min_by(|a, b| {
                (a.center - x)
                    .abs()
                    .partial_cmp(&(b.center - x).abs())
                    .unwrap()
            })?,
        };
        Some(chosen.center)
    }
}

/// The dyadic averaged-integral example: M_j = [−2^{j+1}, 2^{j+1}], stage
/// averages of ζ, accumulation points ±(amplitude/6).
pub fn zeta_example(bump: &Bump, j_max: usize, h: f64) -> Result<AveragedFunctional> {
    let half = 2f64.powi(j_max as i32 + 1);
    let model = Arc::new(LatticeModel::build_box_with_budget(&[half], h, 40_000_000)?);
    let radii: Vec<f64> = (0..=j_max).map(|j| 2f64.powi(j as i32 + 1)).collect();
    let plan = ExhaustionPlan::new(Arc::clone(&model), ProductRegion::full(1), radii)?;
    let stages: Result<Vec<f64>> = (0..=j_max)
        .map(|j| averaged_integral(&plan, j, |m| zeta_eval(bump, model.site_pos(m)[0])))
        .collect();
    AveragedFunctional::analyze(stages?, 1e-3, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn box_plan(n: usize, half: f64, h: f64, u: ProductRegion, radii: Vec<f64>) -> ExhaustionPlan {
        let model = Arc::new(LatticeModel::build_box(&[half; 1].repeat(n), h).unwrap());
        ExhaustionPlan::new(model, u, radii).unwrap()
    }

    fn reflection_u(n: usize, k: usize) -> ProductRegion {
        let mut axes = Vec::new();
        for a in 0..n {
            if a < k {
                axes.push(AxisSet::Union(vec![Interval::open(0.0, 1.0)]));
            } else {
                axes.push(AxisSet::Full);
            }
        }
        ProductRegion::new(axes)
    }

    #[test]
    fn ratio_matches_continuum_closed_form() {
        // 1 − ((j−r)/j)^{n−k} within max(2h/j, 1e−3)
        let h = 0.25;
        for &(n, k) in &[(2usize, 1usize), (3, 2)] {
            let plan = box_plan(n, 9.0, h, reflection_u(n, k), vec![2.0, 4.0, 8.0, 9.0]);
            for &(j_idx, jr) in &[(1usize, 4.0), (2, 8.0)] {
                for &r in &[1.0f64, 2.0] {
                    let got = u_regularity_ratio(&plan, r, j_idx).unwrap();
                    let want = 1.0 - ((jr - r) / jr).powi((n - k) as i32);
                    let tol = f64::max(2.0 * h / jr, 1e-3);
                    assert!(
                        (got - want).abs() <= tol,
                        "n={n} k={k} j={jr} r={r}: {got} vs {want} (tol {tol})"
                    );
                }
            }
        }
    }

    #[test]
    fn ratio_is_zero_at_r_zero_and_on_covering_stage_of_torus() {
        let plan = box_plan(1, 8.0, 0.5, reflection_u(1, 1), vec![2.0, 4.0, 8.0]);
        assert_abs_diff_eq!(u_regularity_ratio(&plan, 0.0, 1).unwrap(), 0.0);
        // torus exhausted at every stage: no exterior, ratio 0
        let model = Arc::new(LatticeModel::build_torus(&[6.0], 0.5).unwrap());
        let tplan =
            ExhaustionPlan::new(model, ProductRegion::full(1), vec![6.0, 6.0, 6.0]).unwrap();
        assert_abs_diff_eq!(u_regularity_ratio(&tplan, 1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn ratio_matches_bruteforce_regions() {
        let h = 0.5;
        let model = Arc::new(LatticeModel::build_box(&[5.0, 5.0], h).unwrap());
        let u = reflection_u(2, 1);
        let plan =
            ExhaustionPlan::new(Arc::clone(&model), u.clone(), vec![2.0, 3.5, 5.0]).unwrap();
        for j in 0..2 {
            for &r in &[0.5f64, 1.0, 1.7] {
                let fact = u_regularity_ratio(&plan, r, j).unwrap();
                // brute force through explicit regions
                let u_reg = u.materialize(&model, "u");
                let mj = plan.mj(j).materialize(&model, "mj");
                let uj = u_reg.intersect(&mj);
                let pen = model.inner_penumbra_u(&u_reg, &mj, r).unwrap();
                let brute =
                    (uj.volume(&model) - pen.volume(&model)) / uj.volume(&model);
                assert_abs_diff_eq!(fact, brute, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ratio_errors_on_empty_uj() {
        let model = Arc::new(LatticeModel::build_box(&[4.0], 1.0).unwrap());
        let u = ProductRegion::new(vec![AxisSet::Union(vec![Interval::open(3.7, 0.1)])]);
        let plan = ExhaustionPlan::new(model, u, vec![1.0, 4.0]).unwrap();
        assert!(u_regularity_ratio(&plan, 1.0, 0).is_err());
    }

    #[test]
    fn averaged_integral_of_constant_and_indicator() {
        let plan = box_plan(1, 8.0, 0.5, ProductRegion::full(1), vec![2.0, 4.0, 8.0]);
        let c = 2.75;
        for j in 0..3 {
            assert_abs_diff_eq!(
                averaged_integral(&plan, j, |_| c).unwrap(),
                c,
                epsilon = 1e-12
            );
        }
        // indicator of U_j integrates to 1
        let uj: std::collections::HashSet<usize> = plan.uj_sites(1).into_iter().collect();
        let got = averaged_integral(&plan, 1, |m| if uj.contains(&m) { 1.0 } else { 0.0 })
            .unwrap();
        assert_abs_diff_eq!(got, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn plan_rejects_non_nested_and_non_exhausting() {
        let model = Arc::new(LatticeModel::build_box(&[4.0], 1.0).unwrap());
        assert!(ExhaustionPlan::new(
            Arc::clone(&model),
            ProductRegion::full(1),
            vec![3.0, 2.0, 4.0]
        )
        .is_err());
        assert!(ExhaustionPlan::new(
            Arc::clone(&model),
            ProductRegion::full(1),
            vec![1.0, 2.0]
        )
        .is_err());
    }

    #[test]
    fn bump_normalization_and_support() {
        let b = Bump::new(2, 1.0).unwrap();
        assert_eq!(b.eval(-0.1), 0.0);
        assert_eq!(b.eval(1.1), 0.0);
        assert_abs_diff_eq!(b.eval(0.5), 1.875); // 30/16
        let steps = 10000;
        let quad: f64 = (0..steps)
            .map(|i| b.eval((i as f64 + 0.5) / steps as f64) / steps as f64)
            .sum();
        assert_abs_diff_eq!(quad, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zeta_stage_values_match_continuum_formula() {
        let bump = Bump::new(2, 1.0).unwrap();
        let f = zeta_example(&bump, 10, 0.0625).unwrap();
        let h = 0.0625;
        for (j, &s) in f.stages.iter().enumerate().skip(3) {
            let vol = 2f64.powi(j as i32 + 2);
            let want = 1.0 / (3.0 * vol) + if j % 2 == 0 { 1.0 / 6.0 } else { -1.0 / 6.0 };
            // the closed dyadic interval carries one extra lattice site:
            // O(h/vol) volume quantization on top of quadrature error
            let tol = 2.0 * h / vol + 1e-5;
            assert!(
                (s - want).abs() < tol,
                "stage {j}: {s} vs continuum {want} (tol {tol})"
            );
        }
    }

    #[test]
    fn zeta_accumulation_points_are_plus_minus_sixth() {
        let bump = Bump::new(2, 1.0).unwrap();
        let f = zeta_example(&bump, 14, 0.0625).unwrap();
        let clusters = &f.report.clusters;
        assert_eq!(clusters.len(), 2, "{clusters:?}");
        assert!((clusters[0].center + 1.0 / 6.0).abs() < 1e-3);
        assert!((clusters[1].center - 1.0 / 6.0).abs() < 1e-3);
        // parity-correct witnessing subsequences
        assert!(clusters[1].witnesses.iter().all(|w| w % 2 == 0));
        assert!(clusters[0].witnesses.iter().all(|w| w % 2 == 1));
        // rescaled bump scales the accumulation points linearly
        let bump2 = Bump::new(2, 2.0).unwrap();
        let f2 = zeta_example(&bump2, 14, 0.0625).unwrap();
        assert!((f2.report.clusters[1].center - 1.0 / 3.0).abs() < 2e-3);
        assert!((f2.report.clusters[0].center + 1.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn accumulation_of_constant_alternating_and_decaying() {
        let c = 0.42;
        let constant = vec![c; 12];
        let rep = accumulation_points(&constant, 1e-3, 0.25).unwrap();
        assert_eq!(rep.clusters.len(), 1);
        assert_abs_diff_eq!(rep.clusters[0].center, c);

        let alternating: Vec<f64> = (0..20)
            .map(|j| {
                1.0 / (3.0 * 2f64.powi(j + 2))
                    + if j % 2 == 0 { 1.0 / 6.0 } else { -1.0 / 6.0 }
            })
            .collect();
        let rep = accumulation_points(&alternating, 1e-3, 0.25).unwrap();
        assert_eq!(rep.clusters.len(), 2);
        assert!((rep.clusters[0].center + 1.0 / 6.0).abs() < 1e-3);
        assert!((rep.clusters[1].center - 1.0 / 6.0).abs() < 1e-3);

        let decaying: Vec<f64> = (1..=2000).map(|j| 1.0 / j as f64).collect();
        let rep = accumulation_points(&decaying, 1e-3, 0.25).unwrap();
        assert_eq!(rep.clusters.len(), 1, "{:?}", rep.clusters);
        assert!(rep.clusters[0].center.abs() < 1e-3);
    }

    #[test]
    fn accumulation_needs_eight_stages() {
        assert!(accumulation_points(&[1.0; 7], 1e-3, 0.25).is_err());
    }

    #[test]
    fn selection_rules() {
        let alternating: Vec<f64> = (0..20)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let f = AveragedFunctional::analyze(alternating, 1e-3, 0.25).unwrap();
        assert_abs_diff_eq!(f.select(SelectionRule::Min).unwrap(), -1.0);
        assert_abs_diff_eq!(f.select(SelectionRule::Max).unwrap(), 1.0);
        assert_abs_diff_eq!(f.select(SelectionRule::NearestTo(0.9)).unwrap(), 1.0);
        // burn-in 25% of 20 = 5: earliest surviving witness is stage 5 (odd)
        assert_abs_diff_eq!(f.select(SelectionRule::First).unwrap(), -1.0);
        assert_eq!(SelectionRule::parse("nearest:0.5").unwrap(), SelectionRule::NearestTo(0.5));
        assert!(SelectionRule::parse("bogus").is_err());
    }
}
