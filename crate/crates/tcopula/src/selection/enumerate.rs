//! Enumeration of candidate grouping configurations.

use crate::copula::GroupConfig;
use crate::error::{Error, Result};

/// Which groupings enter the candidate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationPolicy {
    /// Fully grouped first, every unordered split into two groups, fully
    /// pooled last.
    TwoGroup,
    /// Every set partition of the margins, extremes first and last.
    All,
}

/// An ordered, duplicate-free list of models M0, M1, ...
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    dim: usize,
    models: Vec<GroupConfig>,
}

impl ModelFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, h: usize) -> &GroupConfig {
        &self.models[h]
    }

    pub fn models(&self) -> &[GroupConfig] {
        &self.models
    }

    pub fn model_id(&self, h: usize) -> String {
        format!("M{h}")
    }

    /// Models that are neither fully grouped nor fully pooled.
    pub fn grouped_count(&self) -> usize {
        self.models
            .iter()
            .filter(|g| g.group_count() != 1 && g.group_count() != self.dim)
            .count()
    }
}

/// All size-k index combinations of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < n - (k - i) {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn two_group_family(n: usize) -> Result<Vec<GroupConfig>> {
    let mut models = vec![GroupConfig::generalized(n)];
    let mut seen: Vec<Vec<usize>> = vec![models[0].assignments().to_vec()];
    let standard = GroupConfig::standard(n);

    // Blocks ordered by the smaller group size, largest first: for n = 6
    // this gives the (3,3), (2,4), (1,5) blocks.
    for a in (1..=n / 2).rev() {
        let mut combos = if 2 * a == n {
            // Equal split: restrict to combinations containing index 0 so
            // each unordered split appears once.
            combinations(n, a)
                .into_iter()
                .filter(|c| c[0] == 0)
                .collect::<Vec<_>>()
        } else {
            combinations(n, a)
        };
        // Historical report ordering for six margins puts the (4,5) pair at
        // the head of its block.
        if n == 6 && a == 2 {
            if let Some(pos) = combos.iter().position(|c| c == &[4, 5]) {
                let special = combos.remove(pos);
                combos.insert(0, special);
            }
        }
        for combo in combos {
            let g = GroupConfig::two_group(n, &combo)?;
            let key = g.assignments().to_vec();
            if key == standard.assignments() || seen.contains(&key) {
                continue;
            }
            seen.push(key);
            models.push(g);
        }
    }
    models.push(standard);
    Ok(models)
}

/// All set partitions of 0..n via restricted growth strings, in lexicographic
/// string order. The all-singletons partition comes first and the one-block
/// partition last by construction of the final ordering.
fn all_partitions(n: usize) -> Result<Vec<GroupConfig>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        out.push(GroupConfig::new(&rgs)?);
        // Next restricted growth string.
        let mut i = n;
        loop {
            if i <= 1 {
                // Move extremes to canonical positions: generalized first,
                // standard last, everything else keeps RGS order.
                let generalized = GroupConfig::generalized(n);
                let standard = GroupConfig::standard(n);
                let mut ordered = vec![generalized.clone()];
                for g in out {
                    if g != generalized && g != standard {
                        ordered.push(g);
                    }
                }
                ordered.push(standard);
                return Ok(ordered);
            }
            i -= 1;
            let max_prefix = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Build the candidate family for `n` margins under a policy.
pub fn enumerate_models(n: usize, policy: EnumerationPolicy) -> Result<ModelFamily> {
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 margins, got {n}")));
    }
    let models = match policy {
        EnumerationPolicy::TwoGroup => two_group_family(n)?,
        EnumerationPolicy::All => all_partitions(n)?,
    };
    Ok(ModelFamily { dim: n, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(g: &GroupConfig) -> Vec<usize> {
        let mut sizes: Vec<usize> = (0..g.group_count()).map(|k| g.members(k).len()).collect();
        sizes.sort();
        sizes
    }

    #[test]
    fn six_margins_two_group_family() {
        let fam = enumerate_models(6, EnumerationPolicy::TwoGroup).unwrap();
        assert_eq!(fam.len(), 33);
        assert_eq!(fam.model(0), &GroupConfig::generalized(6));
        assert_eq!(fam.model(32), &GroupConfig::standard(6));
        let count_shape = |s: &[usize]| fam.models().iter().filter(|g| shape(g) == s).count();
        assert_eq!(count_shape(&[3, 3]), 10);
        assert_eq!(count_shape(&[2, 4]), 15);
        assert_eq!(count_shape(&[1, 5]), 6);
    }

    #[test]
    fn six_margins_block_order_and_special_pair() {
        let fam = enumerate_models(6, EnumerationPolicy::TwoGroup).unwrap();
        // (3,3) block occupies models 1..=10.
        assert_eq!(shape(fam.model(1)), vec![3, 3]);
        assert_eq!(fam.model(1), &GroupConfig::two_group(6, &[0, 1, 2]).unwrap());
        assert_eq!(shape(fam.model(10)), vec![3, 3]);
        // The (2,4) block starts with the (4,5) pair, then lexicographic.
        assert_eq!(fam.model(11), &GroupConfig::two_group(6, &[4, 5]).unwrap());
        assert_eq!(fam.model(12), &GroupConfig::two_group(6, &[0, 1]).unwrap());
        assert_eq!(fam.model(25), &GroupConfig::two_group(6, &[3, 5]).unwrap());
        // Singleton block 26..=31 in margin order.
        for i in 0..6 {
            assert_eq!(fam.model(26 + i), &GroupConfig::two_group(6, &[i]).unwrap());
        }
    }

    #[test]
    fn no_duplicate_configurations() {
        for policy in [EnumerationPolicy::TwoGroup, EnumerationPolicy::All] {
            let fam = enumerate_models(6, policy).unwrap();
            for a in 0..fam.len() {
                for b in 0..a {
                    assert_ne!(
                        fam.model(a).assignments(),
                        fam.model(b).assignments(),
                        "models {a} and {b} coincide"
                    );
                }
            }
        }
    }

    #[test]
    fn exchanging_group_labels_is_the_same_model() {
        let a = GroupConfig::two_group(6, &[4, 5]).unwrap();
        let b = GroupConfig::two_group(6, &[0, 1, 2, 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_margins_degenerate_family() {
        let fam = enumerate_models(2, EnumerationPolicy::TwoGroup).unwrap();
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.model(0), &GroupConfig::generalized(2));
        assert_eq!(fam.model(1), &GroupConfig::standard(2));
    }

    #[test]
    fn all_policy_counts_match_bell_numbers() {
        // Bell numbers 15 and 203 for n = 4 and 6; grouped excludes the two
        // extreme partitions.
        let f4 = enumerate_models(4, EnumerationPolicy::All).unwrap();
        assert_eq!(f4.len(), 15);
        assert_eq!(f4.grouped_count(), 13);
        let f6 = enumerate_models(6, EnumerationPolicy::All).unwrap();
        assert_eq!(f6.len(), 203);
        assert_eq!(f6.grouped_count(), 201);
        assert_eq!(f6.model(0), &GroupConfig::generalized(6));
        assert_eq!(f6.model(202), &GroupConfig::standard(6));
    }
}
