//! t-indexed kernel families: the exact continuum Gaussian e^{−t²Δ} ⊗ 1
//! (image sums on torus axes), spectral families f(tD) from the dense
//! eigendecomposition oracle, and decay-envelope machinery.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::dirac::{DiracOperator, SectionSpace};
use crate::error::{Error, Result};
use crate::geometry::LatticeKind;
use crate::linalg::{linear_fit, CMat, EigData};
use crate::SNAP;

/// How a family's kernels are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelSource {
    ContinuumGaussian,
    TorusImageSum,
    SpectralOracle,
}

pub type SpectralFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

enum Backend {
    Gaussian {
        image_tol: f64,
        max_images: usize,
    },
    Spectral {
        eig: Arc<EigData>,
        func: Arc<SpectralFn>,
        /// optional per-dof multiplier applied on the left: Diag(g)·f(tD)
        multiplier: Option<Vec<f64>>,
    },
}

/// A t-indexed family of discrete Schwartz kernels over a section space.
/// Kernels follow the h^n quadrature convention: the operator matrix is
/// κ · h^n.
pub struct KernelFamily {
    space: Arc<SectionSpace>,
    backend: Backend,
    symbol: String,
}

impl KernelFamily {
    /// Continuum heat kernel of e^{−t²Δ} ⊗ 1_fiber, exact on ℝⁿ, per-axis
    /// image sums on torus axes truncated at `image_tol`.
    pub fn gaussian(space: Arc<SectionSpace>, image_tol: f64, max_images: usize) -> Self {
        KernelFamily {
            space,
            backend: Backend::Gaussian { image_tol, max_images },
            symbol: "e^{-t^2 Laplacian}".into(),
        }
    }

    pub fn spectral(
        d: &DiracOperator,
        budget: usize,
        func: Arc<SpectralFn>,
        symbol: &str,
    ) -> Result<Self> {
        Ok(KernelFamily {
            space: Arc::clone(d.space()),
            backend: Backend::Spectral {
                eig: d.eig(budget)?,
                func,
                multiplier: None,
            },
            symbol: symbol.into(),
        })
    }

    /// e^{−t²D²}.
    pub fn heat(d: &DiracOperator, budget: usize) -> Result<Self> {
        Self::spectral(
            d,
            budget,
            Arc::new(|t: f64, l: f64| (-(t * t) * l * l).exp()),
            "e^{-t^2 D^2}",
        )
    }

    /// D^j e^{−t²D²}.
    pub fn dj_heat(d: &DiracOperator, j: u32, budget: usize) -> Result<Self> {
        Self::spectral(
            d,
            budget,
            Arc::new(move |t: f64, l: f64| l.powi(j as i32) * (-(t * t) * l * l).exp()),
            &format!("D^{j} e^{{-t^2 D^2}}"),
        )
    }

    /// The parametrix Q(t) = (1 − e^{−t²D²})/D.
    pub fn parametrix(d: &DiracOperator, budget: usize) -> Result<Self> {
        Self::spectral(d, budget, Arc::new(q_scalar), "(1 - e^{-t^2 D^2})/D")
    }

    /// Diag(g) ∘ f(tD): a bounded multiplier composed with a spectral family
    /// (`g` given per dof).
    pub fn multiplied(
        d: &DiracOperator,
        budget: usize,
        func: Arc<SpectralFn>,
        multiplier: Vec<f64>,
        symbol: &str,
    ) -> Result<Self> {
        if multiplier.len() != d.dim() {
            return Err(Error::Operator("multiplier length mismatch".into()));
        }
        Ok(KernelFamily {
            space: Arc::clone(d.space()),
            backend: Backend::Spectral {
                eig: d.eig(budget)?,
                func,
                multiplier: Some(multiplier),
            },
            symbol: symbol.into(),
        })
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        &self.space
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn source(&self) -> KernelSource {
        match &self.backend {
            Backend::Gaussian { .. } => match self.space.model().kind() {
                LatticeKind::Box => KernelSource::ContinuumGaussian,
                LatticeKind::Torus => KernelSource::TorusImageSum,
            },
            Backend::Spectral { .. } => KernelSource::SpectralOracle,
        }
    }

    /// Evaluate the family at time t (dense operator matrix).
    pub fn at(&self, t: f64) -> Result<KernelAt<'_>> {
        if !(t > 0.0) {
            return Err(Error::Operator(format!("kernel family needs t > 0, got {t}")));
        }
        let matrix = match &self.backend {
            Backend::Gaussian { image_tol, max_images } => {
                let space = &self.space;
                let model = space.model();
                let hn = model.weight();
                let nd = space.dof_count();
                let mut m = CMat::zeros(nd, nd);
                for i in 0..nd {
                    let di = space.dof(i);
                    for j in 0..nd {
                        let dj = space.dof(j);
                        if di.fiber != dj.fiber {
                            continue;
                        }
                        let mut g = 1.0;
                        for a in 0..model.dim() {
                            g *= axis_gauss_factor(
                                model.axis_period(a),
                                di.pos[a] - dj.pos[a],
                                t,
                                *image_tol,
                                *max_images,
                            )?;
                        }
                        m[(i, j)] = Complex64::new(g * hn, 0.0);
                    }
                }
                m
            }
            Backend::Spectral { eig, func, multiplier } => {
                let mut m = eig.apply_function(|l| func(t, l));
                if let Some(g) = multiplier {
                    for (r, &gr) in g.iter().enumerate() {
                        for c in 0..m.ncols() {
                            m[(r, c)] *= Complex64::new(gr, 0.0);
                        }
                    }
                }
                m
            }
        };
        Ok(KernelAt {
            space: &self.space,
            t,
            matrix,
        })
    }
}

/// Scalar symbol of the parametrix: (1 − e^{−(tλ)²})/λ with the removable
/// singularity evaluated by a 4-term series below |tλ| < 1e−3.
pub fn q_scalar(t: f64, l: f64) -> f64 {
    let u = t * l;
    if u.abs() < 1e-3 {
        // (1 − e^{−u²})/λ = t²λ (1 − u²/2 + u⁴/6 − u⁶/24)
        let u2 = u * u;
        t * t * l * (1.0 - u2 / 2.0 + u2 * u2 / 6.0 - u2 * u2 * u2 / 24.0)
    } else {
        // expm1 keeps the small-u² regime cancellation-free
        -(-u * u).exp_m1() / l
    }
}

/// sup_x |x^j e^{−t²x²}| = (j/(2t²))^{j/2} e^{−j/2}; 1 for j = 0.
pub fn dj_norm_bound(j: u32, t: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        let jf = j as f64;
        (jf / (2.0 * t * t)).powf(jf / 2.0) * (-jf / 2.0).exp()
    }
}

fn gauss_1d(t: f64, d: f64) -> f64 {
    let s2 = 4.0 * t * t; // e^{−t²Δ} kernel: (4πt²)^{−1/2} e^{−d²/(4t²)}
    (-d * d / s2).exp() / (std::f64::consts::PI * s2).sqrt()
}

fn axis_gauss_factor(
    period: Option<f64>,
    dx: f64,
    t: f64,
    image_tol: f64,
    max_images: usize,
) -> Result<f64> {
    match period {
        None => Ok(gauss_1d(t, dx)),
        Some(c) => {
            let mut total = gauss_1d(t, dx);
            for k in 1..=max_images {
                let term = gauss_1d(t, dx + k as f64 * c) + gauss_1d(t, dx - k as f64 * c);
                total += term;
                if term < image_tol {
                    return Ok(total);
                }
            }
            Err(Error::Operator(format!(
                "image tolerance {image_tol:.1e} unreachable within {max_images} images"
            )))
        }
    }
}

/// A family evaluated at a fixed time: the dense operator matrix plus
/// kernel-convention views.
pub struct KernelAt<'a> {
    space: &'a Arc<SectionSpace>,
    t: f64,
    matrix: CMat,
}

impl KernelAt<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn space(&self) -> &Arc<SectionSpace> {
        self.space
    }

    /// Operator matrix (κ · h^n).
    pub fn op_matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_op_matrix(self) -> CMat {
        self.matrix
    }

    /// Fiber block κ(m, m') over the dofs attached to the two sites.
    pub fn kernel_block(&self, m: usize, mp: usize) -> CMat {
        let rows = self.space.site_dofs(m);
        let cols = self.space.site_dofs(mp);
        let hn = self.space.model().weight();
        CMat::from_fn(rows.len(), cols.len(), |i, j| {
            self.matrix[(rows[i], cols[j])] / hn
        })
    }

    /// max |K − K†| entry: Hermitian symmetry of self-adjoint-function
    /// families.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Quadrature L² mass of the kernel row/column of site `m` outside the
    /// open ball B(m, r): returns the (row, column) versions
    /// ∫_{d(m,m') ≥ r} ‖κ_t(m, m')‖²_F dm' and the same with arguments
    /// swapped.
    pub fn offdiagonal_mass(&self, m: usize, r: f64) -> (f64, f64) {
        let model = self.space.model();
        let hn = model.weight();
        let eps = SNAP * (1.0 + r.abs());
        let mpos = model.site_pos(m);
        let rows = self.space.site_dofs(m);
        let mut row_mass = 0.0;
        let mut col_mass = 0.0;
        for mp in 0..model.site_count() {
            if model.distance_pos(&mpos, &model.site_pos(mp)) < r - eps {
                continue;
            }
            let cols = self.space.site_dofs(mp);
            let mut fro_row = 0.0;
            let mut fro_col = 0.0;
            for &i in &rows {
                for &j in &cols {
                    fro_row += self.matrix[(i, j)].norm_sqr();
                    fro_col += self.matrix[(j, i)].norm_sqr();
                }
            }
            // κ = matrix/h^n; ∫‖κ‖² dm' picks up one factor h^n
            row_mass += fro_row / hn;
            col_mass += fro_col / hn;
        }
        (row_mass, col_mass)
    }
}

/// Decay envelopes for kernel masses: Gaussian c·e^{−a r²/t²} or the
/// polynomial functional-calculus bound c·r^{k̃−b+1} t^{b−k̃−1}.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum DecayEnvelope {
    Gaussian { c: f64, a: f64 },
    Polynomial { c: f64, b: f64, k_tilde: f64 },
}

impl DecayEnvelope {
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        match *self {
            DecayEnvelope::Gaussian { c, a } => c * (-a * r * r / (t * t)).exp(),
            DecayEnvelope::Polynomial { c, b, k_tilde } => {
                c * r.powf(k_tilde - b + 1.0) * t.powf(b - k_tilde - 1.0)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeRow {
    pub site: usize,
    pub r: f64,
    pub t: f64,
    pub mass: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub rows: Vec<EnvelopeRow>,
    pub max_violation_ratio: f64,
    pub all_pass: bool,
}

/// Compare row masses against an envelope on a grid of (site, r, t);
/// report-only, never fails on violations.
pub fn check_envelope(
    kf: &KernelFamily,
    env: &DecayEnvelope,
    grid: &[(usize, f64, f64)],
) -> Result<EnvelopeReport> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_ratio = 0.0f64;
    let mut ts: Vec<f64> = grid.iter().map(|&(_, _, t)| t).collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    for &t in &ts {
        let at = kf.at(t)?;
        for &(site, r, tt) in grid.iter().filter(|&&(_, _, tt)| tt == t) {
            let (mass, _) = at.offdiagonal_mass(site, r);
            let bound = env.eval(r, tt);
            let ratio = if bound > 0.0 { mass / bound } else { f64::INFINITY };
            max_ratio = max_ratio.max(ratio);
            rows.push(EnvelopeRow {
                site,
                r,
                t: tt,
                mass,
                bound,
                pass: mass <= bound * (1.0 + 1e-12),
            });
        }
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(EnvelopeReport {
        rows,
        max_violation_ratio: max_ratio,
        all_pass,
    })
}

/// Fit the full-row-mass bound C t^{−a} on a calibration grid of (site, t):
/// least squares in log-log, intercept raised so the bound holds on every
/// calibration point.
pub fn fit_al_constants(kf: &KernelFamily, sites: &[usize], ts: &[f64]) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &t in ts {
        let at = kf.at(t)?;
        for &m in sites {
            let (row, col) = at.offdiagonal_mass(m, 0.0);
            let mass = row.max(col);
            if mass > 0.0 {
                xs.push(t.ln());
                ys.push(mass.ln());
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::Operator("not enough calibration data for fit".into()));
    }
    let (_, slope) = linear_fit(&xs, &ys);
    let a = (-slope).max(0.0);
    let logc = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| y + a * x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((logc.exp(), a))
}

/// Fit a Gaussian envelope c·e^{−a r²/t²} to off-diagonal masses on a
/// calibration grid of (site, r, t) points, intercept raised to dominate it.
pub fn fit_gaussian_envelope(
    kf: &KernelFamily,
    pts: &[(usize, f64, f64)],
) -> Result<DecayEnvelope> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(m, r, t) in pts {
        let at = kf.at(t)?;
        let (mass, _) = at.offdiagonal_mass(m, r);
        if mass > 0.0 {
            xs.push(r * r / (t * t));
            ys.push(mass.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Operator("not enough calibration data for fit".into()));
    }
    let (_, slope) = linear_fit(&xs, &ys);
    let a = (-slope).max(0.0);
    let logc = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| y + a * x)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayEnvelope::Gaussian { c: logc.exp(), a })
}
