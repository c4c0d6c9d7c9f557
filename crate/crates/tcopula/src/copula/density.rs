//! The integral density of the generalized/grouped t-copula, the closed-form
//! standard t-copula density and the joint log-likelihood.
//!
//! The density of one observation is
//!
//! ```text
//! c(u) = int_0^1 phi_Sigma(x_1/w_1(s), ..., x_n/w_n(s)) prod_i w_i(s)^{-1} ds
//!        / prod_i f_{nu_i}(x_i),        x_i = t_{nu_i}^{-1}(u_i)
//! ```
//!
//! with w_i(s) the quantile of sqrt(nu_i/S). The integrand is evaluated in
//! log space and factored as exp(shift) * int exp(g(s) - shift) ds, with the
//! shift taken as the max of g over the initial panel nodes.
//!
//! The integral is computed after substituting s = F_ref(e^t), where F_ref
//! is the chi-square cdf with the smallest dof in play: t = log of the
//! reference chi-square variable. Extreme observations concentrate the
//! integrand where the mixing scale is large, which in the raw s variable is
//! a sliver of width far below machine epsilon next to an endpoint; in t the
//! same region is wide, log-concave and centered at representable values, so
//! the adaptive refinement can find and resolve it. For the reference
//! dimension w = sqrt(nu/e^t) needs no quantile solve at all, which also
//! makes the equal-dof case quantile-free.
//!
//! The likelihood evaluates all observations over one shared, globally
//! adaptive panel set: a panel stores per-observation values and error
//! estimates and the worst panel (relative to the worst observation's
//! tolerance) is split first. Mixing quantiles w_i(s) are then computed once
//! per node rather than once per node per observation.

use crate::error::{Error, Result};
use crate::quad::{WG, WGK, XGK};
use crate::special::{chi2_cdf, chi2_quantile, chi2_quantile_upper, chi2_sf, log_gamma, t_log_pdf, t_quantile};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::pairwise_sum;
use super::types::{CorrelationMatrix, DofVector, PseudoSample};
use super::workspace::DensityWorkspace;

/// Numerical knobs for evaluating the integral density.
#[derive(Debug, Clone)]
pub struct DensityEvalConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper clip of the mixing probability: integration stops where the
    /// reference survival probability falls below this. The integrand is
    /// doubly-exponentially small there.
    pub endpoint_eps: f64,
    /// Panels the interval is seeded with before adaptation.
    pub initial_panels: usize,
    /// Shared panel budget for one likelihood evaluation.
    pub max_panels: usize,
}

impl Default for DensityEvalConfig {
    fn default() -> Self {
        DensityEvalConfig {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            endpoint_eps: 1e-12,
            initial_panels: 8,
            max_panels: 600,
        }
    }
}

struct BatchPanel {
    a: f64,
    b: f64,
    /// Per-observation Kronrod estimates of int exp(g_j - shift_j) over [a,b].
    values: Vec<f64>,
    /// Per-observation |Kronrod - Gauss|.
    errors: Vec<f64>,
    priority: f64,
}

impl PartialEq for BatchPanel {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for BatchPanel {}
impl PartialOrd for BatchPanel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for BatchPanel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .partial_cmp(&other.priority)
            .unwrap_or(Ordering::Equal)
    }
}

/// Evaluation context shared by the panel passes.
struct BatchCtx<'a> {
    ws: &'a DensityWorkspace,
    corr: &'a CorrelationMatrix,
    nus: &'a [f64],
    x_slots: &'a [usize],
    w_slots: &'a [usize],
    n_obs: usize,
    dim: usize,
    /// -(n/2) ln(2 pi) - (1/2) ln det Sigma
    log_norm: f64,
    /// Smallest dof in play; the integration variable is the log of its
    /// chi-square deviate.
    nu_ref: f64,
    /// -(nu_ref/2) ln 2 - ln Gamma(nu_ref/2)
    log_chi2_norm: f64,
}

impl<'a> BatchCtx<'a> {
    /// g_j(t) for every observation j, appended to `out`.
    fn log_integrand_at(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.dim;
        let y = t.exp();
        let p = chi2_cdf(y, self.nu_ref)?.max(1e-300);
        let q = if p > 0.5 { chi2_sf(y, self.nu_ref)? } else { 1.0 - p };
        let ref_bits = self.nu_ref.to_bits();
        // per-dimension mixing quantities at this node
        let mut inv_w = [0.0f64; 16];
        let mut log_w_sum = 0.0;
        for i in 0..n {
            let (iw, lw) = if self.nus[i].to_bits() == ref_bits {
                let w2 = self.nus[i] / y;
                ((1.0 / w2).sqrt(), 0.5 * w2.ln())
            } else {
                self.ws.w_at(i, self.w_slots[i], self.nus[i], t, p, q)?
            };
            inv_w[i] = iw;
            log_w_sum += lw;
        }
        // A = D Sigma^{-1} D with D = diag(1/w): q_j = x_j' A x_j
        let sinv = self.corr.inverse();
        let mut a = [0.0f64; 256];
        for i in 0..n {
            for l in 0..n {
                a[i * n + l] = sinv[(i, l)] * inv_w[i] * inv_w[l];
            }
        }
        let base = self.log_norm - log_w_sum + 0.5 * self.nu_ref * t - 0.5 * y
            + self.log_chi2_norm;
        for j in 0..self.n_obs {
            let mut q = 0.0;
            for i in 0..n {
                let xi = self.ws.quantiles(i, self.x_slots[i])[j];
                let mut row = 0.0;
                for l in 0..n {
                    row += a[i * n + l] * self.ws.quantiles(l, self.x_slots[l])[j];
                }
                q += xi * row;
            }
            out[j] = base - 0.5 * q;
        }
        Ok(())
    }

    /// Gauss-Kronrod panel over [a, b] for every observation at once.
    fn evaluate_panel(&self, a: f64, b: f64, shifts: &[f64]) -> Result<BatchPanel> {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let k = self.n_obs;
        let mut kronrod = vec![0.0f64; k];
        let mut gauss = vec![0.0f64; k];
        let mut g = vec![0.0f64; k];

        let accumulate = |s: f64,
                              wk: f64,
                              wg: Option<f64>,
                              g: &mut [f64],
                              kronrod: &mut [f64],
                              gauss: &mut [f64]|
         -> Result<()> {
            self.log_integrand_at(s, g)?;
            for j in 0..k {
                let v = (g[j] - shifts[j]).exp();
                kronrod[j] += wk * v;
                if let Some(wg) = wg {
                    gauss[j] += wg * v;
                }
            }
            Ok(())
        };

        accumulate(center, WGK[7], Some(WG[3]), &mut g, &mut kronrod, &mut gauss)?;
        for idx in 0..7 {
            let dx = half * XGK[idx];
            let wg = if idx % 2 == 1 { Some(WG[idx / 2]) } else { None };
            accumulate(center - dx, WGK[idx], wg, &mut g, &mut kronrod, &mut gauss)?;
            accumulate(center + dx, WGK[idx], wg, &mut g, &mut kronrod, &mut gauss)?;
        }

        let mut values = kronrod;
        let mut errors = vec![0.0f64; k];
        for j in 0..k {
            values[j] *= half;
            errors[j] = (values[j] - gauss[j] * half).abs();
        }
        Ok(BatchPanel {
            a,
            b,
            values,
            errors,
            priority: 0.0,
        })
    }
}

/// Log of the one-dimensional integral in the density, for every observation
/// covered by the workspace slots. Returns one value per observation.
fn batch_log_integrals(ctx: &BatchCtx, cfg: &DensityEvalConfig) -> Result<Vec<f64>> {
    let k = ctx.n_obs;
    // Domain in t = ln y: clip the reference lower tail at probability
    // 1e-300 (or the smallest y the quantile solver resolves) and the upper
    // tail at endpoint_eps. Both truncations are far below the tolerances.
    let y_lo = match chi2_quantile(1e-300, ctx.nu_ref) {
        Ok(y) if y.is_finite() && y > 0.0 => y.max(1e-290),
        _ => 1e-290,
    };
    let y_hi = chi2_quantile_upper(cfg.endpoint_eps.max(1e-16), ctx.nu_ref)?;
    let lo = y_lo.ln();
    let hi = y_hi.ln();
    if !(lo < hi) {
        return Err(Error::numeric(format!(
            "degenerate integration domain [{lo}, {hi}]"
        )));
    }

    // Pass 1: probe g on the initial panel nodes to fix per-observation
    // shifts, so the exponentials stay in range.
    let n_init = cfg.initial_panels.max(1);
    let mut shifts = vec![f64::NEG_INFINITY; k];
    let mut g = vec![0.0f64; k];
    let mut panel_edges = Vec::with_capacity(n_init + 1);
    for p in 0..=n_init {
        panel_edges.push(lo + (hi - lo) * p as f64 / n_init as f64);
    }
    for p in 0..n_init {
        let center = 0.5 * (panel_edges[p] + panel_edges[p + 1]);
        let half = 0.5 * (panel_edges[p + 1] - panel_edges[p]);
        for idx in 0..8 {
            let dx = half * XGK[idx];
            for s in [center - dx, center + dx] {
                ctx.log_integrand_at(s, &mut g)?;
                for j in 0..k {
                    if g[j] > shifts[j] {
                        shifts[j] = g[j];
                    }
                }
                if idx == 7 {
                    break; // center node once
                }
            }
        }
    }
    for (j, s) in shifts.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::numeric(format!(
                "integrand is zero everywhere on the probe grid for observation {j}"
            )));
        }
    }

    // Pass 2: globally adaptive refinement on the shared panel set.
    let mut totals = vec![0.0f64; k];
    let mut total_err = vec![0.0f64; k];
    let mut heap: BinaryHeap<BatchPanel> = BinaryHeap::new();
    let mut n_panels = 0usize;
    let push = |mut panel: BatchPanel,
                    totals: &[f64],
                    heap: &mut BinaryHeap<BatchPanel>| {
        let mut pri = 0.0f64;
        for j in 0..k {
            let tol = cfg.abs_tol.max(cfg.rel_tol * totals[j].abs()).max(1e-300);
            pri = pri.max(panel.errors[j] / tol);
        }
        panel.priority = pri;
        heap.push(panel);
    };

    for p in 0..n_init {
        let panel = ctx.evaluate_panel(panel_edges[p], panel_edges[p + 1], &shifts)?;
        for j in 0..k {
            totals[j] += panel.values[j];
            total_err[j] += panel.errors[j];
        }
        n_panels += 1;
        heap.push(panel); // priorities fixed after totals are seeded
    }
    // re-prioritize the seed panels now that totals exist
    {
        let seed: Vec<BatchPanel> = heap.drain().collect();
        for panel in seed {
            push(panel, &totals, &mut heap);
        }
    }

    let converged = |totals: &[f64], total_err: &[f64]| -> bool {
        (0..k).all(|j| total_err[j] <= cfg.abs_tol.max(cfg.rel_tol * totals[j].abs()))
    };

    while !converged(&totals, &total_err) {
        if n_panels >= cfg.max_panels {
            let worst = (0..k)
                .max_by(|&a, &b| {
                    (total_err[a] / totals[a].abs().max(1e-300))
                        .partial_cmp(&(total_err[b] / totals[b].abs().max(1e-300)))
                        .unwrap_or(Ordering::Equal)
                })
                .unwrap_or(0);
            return Err(Error::Convergence {
                message: format!(
                    "density quadrature budget of {} panels exhausted (worst observation {})",
                    cfg.max_panels, worst
                ),
                best: shifts[worst] + totals[worst].max(1e-300).ln(),
                err_estimate: total_err[worst],
            });
        }
        let parent = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (parent.a + parent.b);
        if mid <= parent.a || mid >= parent.b {
            heap.push(parent);
            break;
        }
        let left = ctx.evaluate_panel(parent.a, mid, &shifts)?;
        let right = ctx.evaluate_panel(mid, parent.b, &shifts)?;
        for j in 0..k {
            totals[j] += left.values[j] + right.values[j] - parent.values[j];
            total_err[j] += left.errors[j] + right.errors[j] - parent.errors[j];
        }
        n_panels += 1;
        push(left, &totals, &mut heap);
        push(right, &totals, &mut heap);
    }

    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        if !(totals[j] > 0.0) || !totals[j].is_finite() {
            return Err(Error::numeric(format!(
                "density integral non-positive for observation {j}: {}",
                totals[j]
            )));
        }
        out.push(shifts[j] + totals[j].ln());
    }
    Ok(out)
}

fn check_shapes(
    sample: &PseudoSample,
    dof: &DofVector,
    corr: &CorrelationMatrix,
) -> Result<usize> {
    let n = sample.dim();
    if dof.dim() != n || corr.dim() != n {
        return Err(Error::shape(format!(
            "dimension mismatch: sample {}, dof {}, corr {}",
            n,
            dof.dim(),
            corr.dim()
        )));
    }
    if n > 16 {
        return Err(Error::shape(format!(
            "density supports at most 16 dimensions, got {n}"
        )));
    }
    Ok(n)
}

/// Joint log-likelihood of the sample under the copula (sum over observations
/// of the log integral density), split into three terms: the
/// quadrature terms, the per-observation t-density terms and the K-scaled
/// gamma constants computed once.
pub fn log_likelihood(
    sample: &PseudoSample,
    dof: &DofVector,
    corr: &CorrelationMatrix,
    ws: &mut DensityWorkspace,
    cfg: &DensityEvalConfig,
) -> Result<f64> {
    let n = check_shapes(sample, dof, corr)?;
    if !ws.matches(sample) {
        return Err(Error::shape(
            "workspace was created for a different sample".to_string(),
        ));
    }
    let k = sample.n_obs();

    let mut x_slots = Vec::with_capacity(n);
    let nu_ref = dof.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w_slots = Vec::with_capacity(n);
    for i in 0..n {
        x_slots.push(ws.ensure_quantiles(sample, i, dof.get(i))?);
        w_slots.push(ws.ensure_w_cache(i, dof.get(i), nu_ref));
    }

    let ctx = BatchCtx {
        ws,
        corr,
        nus: dof.values(),
        x_slots: &x_slots,
        w_slots: &w_slots,
        n_obs: k,
        dim: n,
        log_norm: -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * corr.log_det(),
        nu_ref,
        log_chi2_norm: -0.5 * nu_ref * (2.0f64).ln() - log_gamma(0.5 * nu_ref)?,
    };
    let log_integrals = batch_log_integrals(&ctx, cfg)?;

    // Per-observation contribution: quadrature term plus the x-dependent part
    // of -sum_i log f_{nu_i}(x_i).
    let mut per_obs = Vec::with_capacity(k);
    for j in 0..k {
        let mut t_terms = 0.0;
        for i in 0..n {
            let x = ws.quantiles(i, x_slots[i])[j];
            let nu = dof.get(i);
            t_terms += 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
        }
        per_obs.push(log_integrals[j] + t_terms);
    }

    // Gamma constants, once per dof vector.
    let mut constants = 0.0;
    for i in 0..n {
        let nu = dof.get(i);
        constants += 0.5 * (nu * std::f64::consts::PI).ln() + log_gamma(0.5 * nu)?
            - log_gamma(0.5 * (nu + 1.0))?;
    }

    Ok(pairwise_sum(&per_obs) + k as f64 * constants)
}

/// Log density of a single point in (0,1)^n under the generalized/grouped
/// t-copula (the integral form).
pub fn log_density(
    u: &[f64],
    dof: &DofVector,
    corr: &CorrelationMatrix,
    cfg: &DensityEvalConfig,
) -> Result<f64> {
    let sample = PseudoSample::from_rows(&[u.to_vec()])?;
    let mut ws = DensityWorkspace::new(&sample);
    log_likelihood(&sample, dof, corr, &mut ws, cfg)
}

/// Closed-form log density of the standard t-copula (all dof equal): the
/// multivariate-t implied copula density. Fast path and oracle for the
/// integral form.
pub fn standard_t_log_density(u: &[f64], nu: f64, corr: &CorrelationMatrix) -> Result<f64> {
    let n = u.len();
    if corr.dim() != n {
        return Err(Error::shape(format!(
            "dimension mismatch: point {}, corr {}",
            n,
            corr.dim()
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::domain(format!("nu must be positive, got {nu}")));
    }
    let mut x = Vec::with_capacity(n);
    for &ui in u {
        x.push(t_quantile(ui, nu)?);
    }
    let q = corr.quadratic_form(&x);
    let nf = n as f64;
    let mv = log_gamma(0.5 * (nu + nf))? - log_gamma(0.5 * nu)?
        - 0.5 * nf * (nu * std::f64::consts::PI).ln()
        - 0.5 * corr.log_det()
        - 0.5 * (nu + nf) * (q / nu).ln_1p();
    let marginals: f64 = x.iter().map(|&xi| t_log_pdf(xi, nu)).sum();
    Ok(mv - marginals)
}
