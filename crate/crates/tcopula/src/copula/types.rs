use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Positive-definite correlation matrix with cached Cholesky factor,
/// inverse and log-determinant.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::shape(format!(
                "correlation matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..n {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "correlation matrix diagonal must be 1, entry ({i},{i}) = {}",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                let e = entries[(i, j)];
                if (e - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "correlation matrix not symmetric at ({i},{j})"
                    )));
                }
                if !(e > -1.0 && e < 1.0) {
                    return Err(Error::domain(format!(
                        "off-diagonal correlation out of (-1,1) at ({i},{j}): {e}"
                    )));
                }
            }
        }
        let chol = nalgebra::Cholesky::new(entries.clone()).ok_or_else(|| {
            Error::domain("correlation matrix is not positive definite".to_string())
        })?;
        let chol_lower = chol.l();
        let log_det = 2.0 * (0..n).map(|i| chol_lower[(i, i)].ln()).sum::<f64>();
        let inverse = chol.inverse();
        Ok(CorrelationMatrix {
            dim: n,
            entries,
            chol_lower,
            inverse,
            log_det,
        })
    }

    pub fn identity(n: usize) -> Self {
        CorrelationMatrix::new(DMatrix::identity(n, n)).expect("identity is a valid correlation")
    }

    /// 2x2 correlation matrix with off-diagonal `rho`.
    pub fn bivariate(rho: f64) -> Result<Self> {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        CorrelationMatrix::new(m)
    }

    /// Equicorrelated n x n matrix, handy for tests.
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self> {
        let mut m = DMatrix::from_element(n, n, rho);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        CorrelationMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// z' Sigma^{-1} z using the cached inverse.
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        let n = self.dim;
        debug_assert_eq!(z.len(), n);
        let mut q = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.inverse[(i, j)] * z[j];
            }
            q += z[i] * row;
        }
        q
    }
}

/// Per-dimension degrees-of-freedom vector with common bound constraints.
///
/// Always stores one value per dimension; group sharing is represented by
/// writing the group's value to every member.
#[derive(Debug, Clone, PartialEq)]
pub struct DofVector {
    values: Vec<f64>,
    lower: f64,
    upper: f64,
}

pub const DEFAULT_NU_MIN: f64 = 1.0;
pub const DEFAULT_NU_MAX: f64 = 100.0;

impl DofVector {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::domain(format!(
                "dof bounds must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > lower && v < upper) {
                return Err(Error::domain(format!(
                    "dof component {i} = {v} outside ({lower}, {upper})"
                )));
            }
        }
        Ok(DofVector {
            values,
            lower,
            upper,
        })
    }

    pub fn with_default_bounds(values: Vec<f64>) -> Result<Self> {
        DofVector::new(values, DEFAULT_NU_MIN, DEFAULT_NU_MAX)
    }

    pub fn constant(n: usize, nu: f64, lower: f64, upper: f64) -> Result<Self> {
        DofVector::new(vec![nu; n], lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, v: f64) -> Result<()> {
        if !(v > self.lower && v < self.upper) {
            return Err(Error::domain(format!(
                "dof value {v} outside ({}, {})",
                self.lower, self.upper
            )));
        }
        self.values[i] = v;
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
}

/// A partition of the dimensions into groups sharing one dof parameter.
///
/// Stored in canonical form: group labels are assigned in order of each
/// group's smallest member, so exchanging group labels yields the same value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupConfig {
    dim: usize,
    group_of: Vec<usize>,
    m: usize,
}

impl GroupConfig {
    /// Build from a per-dimension group assignment (any labeling); the
    /// assignment is canonicalized.
    pub fn new(group_of: &[usize]) -> Result<Self> {
        let n = group_of.len();
        if n == 0 {
            return Err(Error::shape("empty group assignment".to_string()));
        }
        let mut relabel: Vec<Option<usize>> = vec![None; n];
        let mut next = 0usize;
        let mut canonical = Vec::with_capacity(n);
        for &g in group_of {
            if g >= n {
                return Err(Error::domain(format!(
                    "group label {g} out of range for dimension {n}"
                )));
            }
            let lbl = match relabel[g] {
                Some(l) => l,
                None => {
                    relabel[g] = Some(next);
                    next += 1;
                    next - 1
                }
            };
            canonical.push(lbl);
        }
        Ok(GroupConfig {
            dim: n,
            group_of: canonical,
            m: next,
        })
    }

    /// One group per dimension (the generalized copula).
    pub fn generalized(n: usize) -> Self {
        GroupConfig::new(&(0..n).collect::<Vec<_>>()).expect("valid")
    }

    /// Single group (the standard t-copula).
    pub fn standard(n: usize) -> Self {
        GroupConfig::new(&vec![0; n]).expect("valid")
    }

    /// Two groups: `first` holds the members of group 0, everything else is
    /// group 1.
    pub fn two_group(n: usize, first: &[usize]) -> Result<Self> {
        if first.is_empty() || first.len() >= n {
            return Err(Error::domain(
                "two_group needs a proper nonempty subset".to_string(),
            ));
        }
        let mut assign = vec![1usize; n];
        for &i in first {
            if i >= n {
                return Err(Error::domain(format!("member index {i} out of range")));
            }
            assign[i] = 0;
        }
        GroupConfig::new(&assign)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_count(&self) -> usize {
        self.m
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.group_of
    }

    pub fn members(&self, k: usize) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.group_of[i] == k).collect()
    }

    /// Expand `m` group values into an n-dimensional dof value vector.
    pub fn expand(&self, group_values: &[f64]) -> Result<Vec<f64>> {
        if group_values.len() != self.m {
            return Err(Error::shape(format!(
                "expected {} group values, got {}",
                self.m,
                group_values.len()
            )));
        }
        Ok(self.group_of.iter().map(|&k| group_values[k]).collect())
    }

    /// Collapse an n-dimensional dof vector to its m group values, checking
    /// that members of one group share the value.
    pub fn collapse(&self, dof: &DofVector) -> Result<Vec<f64>> {
        if dof.dim() != self.dim {
            return Err(Error::shape(format!(
                "dof dimension {} != config dimension {}",
                dof.dim(),
                self.dim
            )));
        }
        let mut vals = vec![f64::NAN; self.m];
        for i in 0..self.dim {
            let k = self.group_of[i];
            if vals[k].is_nan() {
                vals[k] = dof.get(i);
            } else if vals[k] != dof.get(i) {
                return Err(Error::domain(format!(
                    "dof values differ within group {k}: {} vs {}",
                    vals[k],
                    dof.get(i)
                )));
            }
        }
        Ok(vals)
    }

    /// Human-readable label like "(0,1,2)(3,4,5)".
    pub fn label(&self) -> String {
        let mut s = String::new();
        for k in 0..self.m {
            s.push('(');
            let members = self.members(k);
            for (idx, i) in members.iter().enumerate() {
                if idx > 0 {
                    s.push(',');
                }
                s.push_str(&i.to_string());
            }
            s.push(')');
        }
        s
    }
}

/// Observations mapped into the open unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    n_obs: usize,
    dim: usize,
    /// Row-major K x n.
    u: Vec<f64>,
}

impl PseudoSample {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::shape("pseudo sample must be nonempty".to_string()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::shape("pseudo sample needs dimension >= 1".to_string()));
        }
        let mut u = Vec::with_capacity(rows.len() * dim);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::shape(format!(
                    "row {j} has length {}, expected {dim}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::domain(format!(
                        "pseudo observation ({j},{i}) = {v} not strictly inside (0,1)"
                    )));
                }
                u.push(v);
            }
        }
        Ok(PseudoSample {
            n_obs: rows.len(),
            dim,
            u,
        })
    }

    pub(crate) fn from_raw(n_obs: usize, dim: usize, u: Vec<f64>) -> Self {
        debug_assert_eq!(u.len(), n_obs * dim);
        PseudoSample { n_obs, dim, u }
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.u[j * self.dim + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.u[j * self.dim..(j + 1) * self.dim]
    }

    /// Column i as an owned vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_obs).map(|j| self.get(j, i)).collect()
    }

    /// Concatenate observations of two samples with equal dimension.
    pub fn stacked(&self, other: &PseudoSample) -> Result<PseudoSample> {
        if self.dim != other.dim {
            return Err(Error::shape("dimension mismatch in stack".to_string()));
        }
        let mut u = self.u.clone();
        u.extend_from_slice(&other.u);
        Ok(PseudoSample {
            n_obs: self.n_obs + other.n_obs,
            dim: self.dim,
            u,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_matrix_validation() {
        assert!(CorrelationMatrix::bivariate(0.5).is_ok());
        assert!(CorrelationMatrix::bivariate(1.0).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(CorrelationMatrix::new(bad).is_err());
        let nd = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(CorrelationMatrix::new(nd).is_err());
    }

    #[test]
    fn quadratic_form_matches_inverse() {
        let c = CorrelationMatrix::bivariate(0.5).unwrap();
        // Sigma^{-1} for rho=0.5 is [4/3, -2/3; -2/3, 4/3]
        let q = c.quadratic_form(&[1.0, 1.0]);
        assert!((q - 4.0 / 3.0).abs() < 1e-12);
        assert!((c.log_det() - 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn group_config_canonicalization() {
        let a = GroupConfig::new(&[1, 1, 0, 0, 2, 2]).unwrap();
        let b = GroupConfig::new(&[0, 0, 1, 1, 2, 2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.group_count(), 3);
        assert_eq!(a.members(0), vec![0, 1]);
        assert_eq!(a.label(), "(0,1)(2,3)(4,5)");

        let std = GroupConfig::standard(6);
        assert_eq!(std.group_count(), 1);
        let gen = GroupConfig::generalized(6);
        assert_eq!(gen.group_count(), 6);
    }

    #[test]
    fn expand_collapse_round_trip() {
        let cfg = GroupConfig::two_group(4, &[0, 2]).unwrap();
        let expanded = cfg.expand(&[5.0, 20.0]).unwrap();
        assert_eq!(expanded, vec![5.0, 20.0, 5.0, 20.0]);
        let dof = DofVector::with_default_bounds(expanded).unwrap();
        assert_eq!(cfg.collapse(&dof).unwrap(), vec![5.0, 20.0]);

        let bad = DofVector::with_default_bounds(vec![5.0, 20.0, 6.0, 20.0]).unwrap();
        assert!(cfg.collapse(&bad).is_err());
    }

    #[test]
    fn pseudo_sample_bounds() {
        assert!(PseudoSample::from_rows(&[vec![0.5, 0.0]]).is_err());
        assert!(PseudoSample::from_rows(&[vec![0.5, 1.0]]).is_err());
        let s = PseudoSample::from_rows(&[vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        assert_eq!(s.n_obs(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get(1, 0), 0.5);
        assert_eq!(s.column(1), vec![0.75, 0.5]);
    }

    #[test]
    fn dof_vector_bounds() {
        assert!(DofVector::with_default_bounds(vec![1.0]).is_err());
        assert!(DofVector::with_default_bounds(vec![100.0]).is_err());
        let mut d = DofVector::with_default_bounds(vec![5.0, 20.0]).unwrap();
        assert!(d.set(0, 0.5).is_err());
        d.set(0, 7.0).unwrap();
        assert_eq!(d.get(0), 7.0);
    }
}
