use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};

/// Cosine similarity of two non-zero vectors.
pub fn cosine_score(e1: &[f64], e2: &[f64]) -> Result<f64> {
    if e1.len() != e2.len() {
        bail!(Dimension, "embedding lengths differ: {} vs {}", e1.len(), e2.len());
    }
    let n1 = Float::sqrt(e1.iter().map(|a| a * a).sum::<f64>());
    let n2 = Float::sqrt(e2.iter().map(|a| a * a).sum::<f64>());
    if n1 == 0.0 || n2 == 0.0 {
        bail!(Usage, "cosine score of a zero vector");
    }
    let dot: f64 = e1.iter().zip(e2).map(|(a, b)| a * b).sum();
    Ok((dot / (n1 * n2)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub score: f64,
    pub target: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
}

impl TrialSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, score: f64, target: bool) {
        self.trials.push(Trial { score, target });
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let t = self.trials.iter().filter(|t| t.target).count();
        (t, self.trials.len() - t)
    }

    /// Scores every unordered pair of embeddings; same-speaker pairs are
    /// targets.
    pub fn all_pairs(embeddings: &[Vec<f64>], speakers: &[usize]) -> Result<Self> {
        if embeddings.len() != speakers.len() {
            bail!(Input, "{} embeddings but {} speaker labels", embeddings.len(), speakers.len());
        }
        let mut set = Self::new();
        for i in 0..embeddings.len() {
            for j in i + 1..embeddings.len() {
                set.push(cosine_score(&embeddings[i], &embeddings[j])?, speakers[i] == speakers[j]);
            }
        }
        Ok(set)
    }
}

impl FromIterator<(f64, bool)> for TrialSet {
    fn from_iter<I: IntoIterator<Item = (f64, bool)>>(iter: I) -> Self {
        Self { trials: iter.into_iter().map(|(score, target)| Trial { score, target }).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate over a threshold sweep.
///
/// Candidate thresholds are the distinct scores plus `+inf`; a trial is
/// accepted when `score >= threshold`. Where false acceptance and false
/// rejection cross between two adjacent thresholds, both rates are
/// interpolated linearly.
pub fn compute_eer(trials: &TrialSet) -> Result<Eer> {
    let (n_tgt, n_non) = trials.counts();
    if n_tgt == 0 || n_non == 0 {
        bail!(Usage, "EER needs target and nontarget trials (got {n_tgt} and {n_non})");
    }
    if let Some(t) = trials.trials.iter().find(|t| !t.score.is_finite()) {
        bail!(Input, "non-finite score {}", t.score);
    }
    let mut sorted: Vec<Trial> = trials.trials.clone();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    // (threshold, false accepts, false rejects) at each candidate
    let mut points = Vec::new();
    let (mut fa, mut fr) = (n_non, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let tau = sorted[i].score;
        points.push((tau, fa, fr));
        while i < sorted.len() && sorted[i].score == tau {
            if sorted[i].target {
                fr += 1;
            } else {
                fa -= 1;
            }
            i += 1;
        }
    }
    points.push((f64::INFINITY, fa, fr));

    let rates: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(tau, fa, fr)| (tau, fa as f64 / n_non as f64, fr as f64 / n_tgt as f64))
        .collect();
    Ok(crossing(&rates))
}

/// Locates the FAR = FRR crossing on `(threshold, far, frr)` points sorted by
/// threshold.
pub(crate) fn crossing(points: &[(f64, f64, f64)]) -> Eer {
    for k in 0..points.len() {
        let (tau, far, frr) = points[k];
        let d = far - frr;
        if d == 0.0 {
            return Eer { eer: far, threshold: tau };
        }
        if d < 0.0 {
            // first sign change lies between k-1 and k; the sweep starts at
            // far = 1, frr = 0 so k >= 1
            let (tau0, far0, frr0) = points[k - 1];
            let d0 = far0 - frr0;
            let alpha = d0 / (d0 - d);
            let threshold = if tau.is_finite() { tau0 + alpha * (tau - tau0) } else { tau0 };
            return Eer { eer: far0 + alpha * (far - far0), threshold };
        }
    }
    unreachable!("the sweep ends at far = 0, frr = 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cosine_examples() {
        let e = [0.3, -1.2, 2.0];
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        assert!((cosine_score(&e, &e).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_score(&e, &neg).unwrap() + 1.0).abs() < 1e-15);
        let h = 1.0 / 2f64.sqrt();
        assert!((cosine_score(&[1.0, 0.0], &[h, h]).unwrap() - h).abs() < 1e-15);
        assert!(matches!(cosine_score(&[0.0, 0.0], &[1.0, 0.0]), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn hand_case() {
        let set: TrialSet = [0.9, 0.8, 0.7]
            .iter()
            .map(|&s| (s, true))
            .chain([0.75, 0.6, 0.2].iter().map(|&s| (s, false)))
            .collect();
        let r = compute_eer(&set).unwrap();
        assert!((r.eer - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.threshold, 0.75);
    }

    #[test]
    fn separated_is_zero() {
        let set: TrialSet = vec![(0.9, true), (0.8, true), (0.1, false), (-0.3, false)].into_iter().collect();
        assert_eq!(compute_eer(&set).unwrap().eer, 0.0);
    }

    #[test]
    fn inverted_is_one() {
        let set: TrialSet = vec![(0.1, true), (0.9, false)].into_iter().collect();
        assert_eq!(compute_eer(&set).unwrap().eer, 1.0);
    }

    #[test]
    fn interpolated_crossing() {
        // one target at 0.5, nontargets at 0.4 and 0.6:
        // tau=0.4 (1, 0), 0.5 (0.5, 0), 0.6 (0.5, 1)
        let set: TrialSet = vec![(0.5, true), (0.4, false), (0.6, false)].into_iter().collect();
        let r = compute_eer(&set).unwrap();
        assert!((r.eer - 0.5).abs() < 1e-15);
        assert!((r.threshold - 0.55).abs() < 1e-12);
    }

    #[test]
    fn missing_class() {
        let set: TrialSet = vec![(0.5, true)].into_iter().collect();
        assert!(matches!(compute_eer(&set), Err(crate::Error::Usage(_))));
    }
}
