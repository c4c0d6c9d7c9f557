//! Caches for the integral density: per-dimension t-quantiles of the sample
//! and per-dimension mixing quantiles w_i(s) at quadrature nodes.
//!
//! Both caches are keyed by the dof value of their dimension and keep the two
//! most recent dof values, so a rejected Metropolis proposal does not evict
//! the entry for the retained state. Only the dimension whose dof changed
//! recomputes anything; this is what makes single-component MCMC affordable.

use crate::error::{Error, Result};
use crate::special::{chi2_quantile, chi2_quantile_upper, t_quantile};
use std::cell::RefCell;
use std::collections::HashMap;

use super::types::PseudoSample;

const SLOTS_PER_DIM: usize = 2;

#[derive(Debug, Clone)]
struct XSlot {
    nu_bits: u64,
    x: Vec<f64>,
}

#[derive(Debug)]
struct WSlot {
    nu_bits: u64,
    /// The reference dof of the node variable; the cached values are only
    /// valid for one (nu, nu_ref) pair.
    ref_bits: u64,
    /// t.to_bits() -> (1/w, log w)
    map: RefCell<HashMap<u64, (f64, f64)>>,
}

/// Workspace owned by one evaluation thread; single writer.
#[derive(Debug)]
pub struct DensityWorkspace {
    n_obs: usize,
    dim: usize,
    x_slots: Vec<Vec<XSlot>>,
    w_slots: Vec<Vec<WSlot>>,
}

impl DensityWorkspace {
    pub fn new(sample: &PseudoSample) -> Self {
        DensityWorkspace {
            n_obs: sample.n_obs(),
            dim: sample.dim(),
            x_slots: (0..sample.dim()).map(|_| Vec::new()).collect(),
            w_slots: (0..sample.dim()).map(|_| Vec::new()).collect(),
        }
    }

    pub fn matches(&self, sample: &PseudoSample) -> bool {
        self.n_obs == sample.n_obs() && self.dim == sample.dim()
    }

    /// Make the t-quantile column for dimension `i` at dof `nu` available and
    /// return its slot index.
    pub fn ensure_quantiles(
        &mut self,
        sample: &PseudoSample,
        i: usize,
        nu: f64,
    ) -> Result<usize> {
        if !self.matches(sample) {
            return Err(Error::shape(
                "workspace was created for a different sample shape".to_string(),
            ));
        }
        let bits = nu.to_bits();
        let slots = &mut self.x_slots[i];
        if let Some(pos) = slots.iter().position(|s| s.nu_bits == bits) {
            if pos != 0 {
                slots.swap(0, pos);
            }
            return Ok(0);
        }
        let mut x = Vec::with_capacity(self.n_obs);
        for j in 0..self.n_obs {
            x.push(t_quantile(sample.get(j, i), nu)?);
        }
        slots.insert(0, XSlot { nu_bits: bits, x });
        slots.truncate(SLOTS_PER_DIM);
        Ok(0)
    }

    pub fn quantiles(&self, i: usize, slot: usize) -> &[f64] {
        &self.x_slots[i][slot].x
    }

    /// Make the w-cache for dimension `i` at dof `nu` under reference dof
    /// `nu_ref` available and return its slot index.
    pub fn ensure_w_cache(&mut self, i: usize, nu: f64, nu_ref: f64) -> usize {
        let bits = nu.to_bits();
        let rbits = nu_ref.to_bits();
        let slots = &mut self.w_slots[i];
        if let Some(pos) = slots
            .iter()
            .position(|s| s.nu_bits == bits && s.ref_bits == rbits)
        {
            if pos != 0 {
                slots.swap(0, pos);
            }
            return 0;
        }
        slots.insert(
            0,
            WSlot {
                nu_bits: bits,
                ref_bits: rbits,
                map: RefCell::new(HashMap::with_capacity(256)),
            },
        );
        slots.truncate(SLOTS_PER_DIM);
        0
    }

    /// (1/w_i, log w_i) at node `t`, where the node carries the mixing level
    /// as a tail probability: `p` if `p <= 0.5` (lower tail), else the
    /// survival `q`. w_i = sqrt(nu / chi2_quantile at that level), memoized
    /// per node.
    pub fn w_at(&self, i: usize, slot: usize, nu: f64, t: f64, p: f64, q: f64) -> Result<(f64, f64)> {
        let cell = &self.w_slots[i][slot];
        debug_assert_eq!(cell.nu_bits, nu.to_bits());
        let key = t.to_bits();
        if let Some(&v) = cell.map.borrow().get(&key) {
            return Ok(v);
        }
        let chi2 = if p <= 0.5 {
            chi2_quantile(p, nu)?
        } else {
            chi2_quantile_upper(q, nu)?
        };
        let w = (nu / chi2).sqrt();
        let entry = (1.0 / w, w.ln());
        cell.map.borrow_mut().insert(key, entry);
        Ok(entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::t_cdf;

    #[test]
    fn quantile_cache_round_trip() {
        let sample =
            PseudoSample::from_rows(&[vec![0.2, 0.9], vec![0.5, 0.4], vec![0.71, 0.03]]).unwrap();
        let mut ws = DensityWorkspace::new(&sample);
        let slot = ws.ensure_quantiles(&sample, 0, 4.5).unwrap();
        let xs = ws.quantiles(0, slot).to_vec();
        for (j, &x) in xs.iter().enumerate() {
            assert!((t_cdf(x, 4.5).unwrap() - sample.get(j, 0)).abs() < 1e-10);
        }
        // second call reuses the slot
        let slot2 = ws.ensure_quantiles(&sample, 0, 4.5).unwrap();
        assert_eq!(ws.quantiles(0, slot2), xs.as_slice());
    }

    #[test]
    fn keeps_two_dof_values() {
        let sample = PseudoSample::from_rows(&[vec![0.3], vec![0.6]]).unwrap();
        let mut ws = DensityWorkspace::new(&sample);
        ws.ensure_quantiles(&sample, 0, 5.0).unwrap();
        ws.ensure_quantiles(&sample, 0, 9.0).unwrap();
        // both retained
        assert_eq!(ws.x_slots[0].len(), 2);
        ws.ensure_quantiles(&sample, 0, 5.0).unwrap();
        assert_eq!(ws.x_slots[0].len(), 2);
        // a third evicts the oldest
        ws.ensure_quantiles(&sample, 0, 2.0).unwrap();
        assert_eq!(ws.x_slots[0].len(), 2);
        assert!(ws.x_slots[0].iter().all(|s| s.nu_bits != 9.0f64.to_bits()));
    }

    #[test]
    fn w_cache_consistency() {
        let sample = PseudoSample::from_rows(&[vec![0.3]]).unwrap();
        let mut ws = DensityWorkspace::new(&sample);
        let slot = ws.ensure_w_cache(0, 4.0, 2.0);
        // lower-tail node at p = 0.3
        let (inv_w, log_w) = ws.w_at(0, slot, 4.0, -1.0, 0.3, 0.7).unwrap();
        let w = (4.0 / crate::special::chi2_quantile(0.3, 4.0).unwrap()).sqrt();
        assert!((1.0 / inv_w - w).abs() < 1e-12);
        assert!((log_w - w.ln()).abs() < 1e-12);
        // memoized value identical
        let again = ws.w_at(0, slot, 4.0, -1.0, 0.3, 0.7).unwrap();
        assert_eq!(again, (inv_w, log_w));
        // upper-tail node uses the survival probability
        let slot2 = ws.ensure_w_cache(0, 4.0, 2.0);
        let (inv_w2, _) = ws.w_at(0, slot2, 4.0, 1.5, 0.9, 0.1).unwrap();
        let w2 = (4.0 / crate::special::chi2_quantile_upper(0.1, 4.0).unwrap()).sqrt();
        assert!((1.0 / inv_w2 - w2).abs() < 1e-12);
        // a different reference dof starts a fresh cache
        let slot3 = ws.ensure_w_cache(0, 4.0, 3.0);
        assert_eq!(slot3, 0);
        assert!(ws.w_slots[0].len() == 2);
    }
}
