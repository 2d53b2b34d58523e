//! Vose's alias method: O(n) construction, O(1) sampling from a fixed
//! discrete distribution.

use rand::Rng;

/// Alias table over outcome indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds a table proportional to `weights`. Negative or non-finite
    /// weights are treated as zero. All-zero input gives an empty table.
    pub fn new(weights: &[f64]) -> AliasTable {
        let mut prob = vec![0.0; weights.len()];
        let mut alias = vec![0u32; weights.len()];
        if build_into(weights, &mut prob, &mut alias) {
            AliasTable { prob, alias }
        } else {
            AliasTable::default()
        }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    /// An empty table has no outcome to offer (a dead end).
    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// Draws an outcome index, or `None` for an empty table.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        sample_slices(&self.prob, &self.alias, rng)
    }

    /// The exact distribution encoded by the table.
    pub fn probabilities(&self) -> Vec<f64> {
        probabilities_of(&self.prob, &self.alias)
    }
}

/// Fills `prob`/`alias` (both `weights.len()` long) and returns false when
/// the weights carry no mass.
pub(crate) fn build_into(weights: &[f64], prob: &mut [f64], alias: &mut [u32]) -> bool {
    let n = weights.len();
    debug_assert!(prob.len() == n && alias.len() == n);
    let clean = |w: f64| if w.is_finite() && w > 0.0 { w } else { 0.0 };
    let total: f64 = weights.iter().map(|&w| clean(w)).sum();
    if n == 0 || !(total > 0.0) {
        return false;
    }
    let scale = n as f64 / total;
    let mut small = Vec::with_capacity(n);
    let mut large = Vec::with_capacity(n);
    for (i, &w) in weights.iter().enumerate() {
        prob[i] = clean(w) * scale;
        alias[i] = i as u32;
        if prob[i] < 1.0 {
            small.push(i);
        } else {
            large.push(i);
        }
    }
    while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
        small.pop();
        alias[s] = l as u32;
        prob[l] = (prob[l] + prob[s]) - 1.0;
        if prob[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    // Leftovers are 1 up to rounding.
    for i in large.into_iter().chain(small) {
        prob[i] = 1.0;
    }
    true
}

#[inline]
pub(crate) fn sample_slices<R: Rng + ?Sized>(
    prob: &[f64],
    alias: &[u32],
    rng: &mut R,
) -> Option<usize> {
    if prob.is_empty() {
        return None;
    }
    let i = rng.random_range(0..prob.len());
    if rng.random::<f64>() < prob[i] {
        Some(i)
    } else {
        Some(alias[i] as usize)
    }
}

pub(crate) fn probabilities_of(prob: &[f64], alias: &[u32]) -> Vec<f64> {
    let n = prob.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] += prob[i];
        out[alias[i] as usize] += 1.0 - prob[i];
    }
    for p in &mut out {
        *p /= n as f64;
    }
    out
}
