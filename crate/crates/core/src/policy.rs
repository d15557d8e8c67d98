//! Method scoring, the Boltzmann distribution over methods, and its entropy.

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;

/// Score of a method whose rollout dead-ended. Such methods get probability 0
/// and are explored last.
pub const DEAD_END: f64 = f64::NEG_INFINITY;

/// `1/(1+D) + 1/(1+L) + A`: higher is better. `L` is the rollout plan length,
/// `D` the goal distance after the rollout, `A` the adherence.
pub fn score_method(plan_len: usize, distance: usize, adherence: i64) -> f64 {
    1.0 / (1.0 + distance as f64) + 1.0 / (1.0 + plan_len as f64) + adherence as f64
}

/// `p_i ∝ exp(s_i / T)`, computed with a max shift. Entries equal to
/// [`DEAD_END`] receive probability 0; if every entry is a dead end the
/// distribution is uniform.
pub fn boltzmann(scores: &[f64], temperature: f64) -> Result<Vec<f64>, PolicyError> {
    if scores.is_empty() {
        return Err(PolicyError::EmptyScores);
    }
    if temperature.is_nan() || temperature <= 0.0 || !temperature.is_finite() {
        return Err(PolicyError::InvalidTemperature(temperature));
    }
    let live = scores.iter().filter(|s| s.is_finite());
    let Some(max) = live.clone().copied().reduce(f64::max) else {
        let u = 1.0 / scores.len() as f64;
        return Ok(vec![u; scores.len()]);
    };
    let weights: Vec<f64> = scores
        .iter()
        .map(|&s| {
            if s.is_finite() {
                ((s - max) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Shannon entropy `Σ p ln(1/p)` in nats.
pub fn entropy(dist: &[f64]) -> Result<f64, PolicyError> {
    entropy_in_base(dist, std::f64::consts::E)
}

/// Entropy with logarithms in `base` (e.g. 2 for bits).
pub fn entropy_in_base(dist: &[f64], base: f64) -> Result<f64, PolicyError> {
    let sum: f64 = dist.iter().sum();
    if dist.is_empty() || (sum - 1.0).abs() > 1e-9 || dist.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(PolicyError::NotADistribution { sum });
    }
    let h: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok((h / base.ln()).max(0.0))
}

/// Per-method evaluation at a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method_id: String,
    /// Method id plus admissibility-only bindings, unique within a node.
    pub label: String,
    #[serde(rename = "L")]
    pub plan_len: usize,
    #[serde(rename = "D")]
    pub distance: usize,
    #[serde(rename = "A")]
    pub adherence: i64,
    pub score: f64,
    #[serde(rename = "p")]
    pub probability: f64,
    pub dead_end: bool,
}

/// The distribution over a node's admissible methods and its entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub scores: Vec<MethodScore>,
    pub entropy: f64,
}

impl Policy {
    /// Assembles a policy from raw per-method scores, filling in
    /// probabilities and entropy.
    pub fn from_scores(
        mut scores: Vec<MethodScore>,
        temperature: f64,
        entropy_base: f64,
    ) -> Result<Policy, PolicyError> {
        let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
        let dist = boltzmann(&raw, temperature)?;
        for (s, p) in scores.iter_mut().zip(&dist) {
            s.probability = *p;
        }
        let entropy = entropy_in_base(&dist, entropy_base)?;
        Ok(Policy { scores, entropy })
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.probability).collect()
    }

    /// Highest-probability index; ties go to the earliest (canonical) entry.
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.probabilities())
    }

    /// Every index whose probability ties the maximum.
    pub fn argmax_set(&self) -> Vec<usize> {
        let top = self
            .scores
            .iter()
            .map(|s| s.probability)
            .fold(0.0, f64::max);
        (0..self.scores.len())
            .filter(|&i| top - self.scores[i].probability <= 1e-12)
            .collect()
    }

    /// Indices by descending probability, canonical order on ties.
    pub fn exploration_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b]
                .probability
                .total_cmp(&self.scores[a].probability)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        assert_eq!(score_method(1, 0, 0), 1.5);
        assert_eq!(score_method(0, 0, 0), 2.0);
        assert!((score_method(4, 2, 1) - score_method(4, 2, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boltzmann_edge_cases() {
        assert_eq!(boltzmann(&[], 1.0), Err(PolicyError::EmptyScores));
        assert_eq!(boltzmann(&[3.0], 1.0).unwrap(), vec![1.0]);
        assert!(boltzmann(&[1.0], 0.0).is_err());
        let p = boltzmann(&[DEAD_END, 1.0, DEAD_END], 1.0).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        let p = boltzmann(&[DEAD_END, DEAD_END], 1.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn boltzmann_survives_huge_scores() {
        let p = boltzmann(&[1000.0, 999.0], 1.0).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        assert!(p[0] > p[1]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[1.0]).unwrap(), 0.0);
        assert!((entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((entropy_in_base(&[0.5, 0.5], 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            entropy(&[0.5, 0.6]),
            Err(PolicyError::NotADistribution { .. })
        ));
        assert!(entropy(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn ordering_is_stable_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), Some(1));
        let mk = |p: f64| MethodScore {
            method_id: String::new(),
            label: String::new(),
            plan_len: 0,
            distance: 0,
            adherence: 0,
            score: 0.0,
            probability: p,
            dead_end: false,
        };
        let pol = Policy {
            scores: vec![mk(0.2), mk(0.4), mk(0.0), mk(0.4)],
            entropy: 0.0,
        };
        assert_eq!(pol.exploration_order(), vec![1, 3, 0, 2]);
        assert_eq!(pol.argmax_set(), vec![1, 3]);
    }
}
