//! Optimal matching of cluster labels to reference labels.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `permutation[z - 1]` is the reference label matched to predicted label `z`.
    pub permutation: Vec<usize>,
    /// Predicted labels after relabeling.
    pub aligned: Vec<usize>,
    pub accuracy: f64,
    /// Mean intersection-over-union over classes with a non-empty union.
    pub miou: f64,
}

/// Minimum-cost assignment on a square matrix; returns, for each row, its
/// column.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials, column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Relabels `predicted` to maximize agreement with `truth` (labels in
/// `1..=classes`) and scores the result.
pub fn align_labels(predicted: &[usize], truth: &[usize], classes: usize) -> Result<Alignment> {
    if predicted.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} predicted labels but {} reference labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() || classes == 0 {
        return Err(Error::Parameter("nothing to align".into()));
    }
    if let Some(&bad) = predicted
        .iter()
        .chain(truth)
        .find(|&&y| y == 0 || y > classes)
    {
        return Err(Error::Parameter(format!("label {bad} outside 1..={classes}")));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&a, &b) in predicted.iter().zip(truth) {
        confusion[a - 1][b - 1] += 1;
    }
    let cost: Vec<Vec<f64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&c| -(c as f64)).collect())
        .collect();
    let permutation: Vec<usize> = hungarian(&cost).into_iter().map(|j| j + 1).collect();
    let aligned: Vec<usize> = predicted.iter().map(|&y| permutation[y - 1]).collect();

    let hits = aligned.iter().zip(truth).filter(|(a, b)| a == b).count();
    let mut ious = Vec::with_capacity(classes);
    for c in 1..=classes {
        let inter = aligned.iter().zip(truth).filter(|&(&a, &b)| a == c && b == c).count();
        let union = aligned.iter().zip(truth).filter(|&(&a, &b)| a == c || b == c).count();
        if union > 0 {
            ious.push(inter as f64 / union as f64);
        }
    }
    Ok(Alignment {
        permutation,
        aligned,
        accuracy: hits as f64 / truth.len() as f64,
        miou: ious.iter().sum::<f64>() / ious.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let a = align_labels(&[2, 2, 2, 1], &[1, 1, 2, 2], 2).unwrap();
        assert_eq!(a.permutation, vec![2, 1]);
        assert_eq!(a.aligned, vec![1, 1, 1, 2]);
        assert!((a.accuracy - 0.75).abs() < 1e-15);
        assert!((a.miou - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_swap() {
        let t = [1, 2, 3, 1, 2, 3];
        let a = align_labels(&t, &t, 3).unwrap();
        assert_eq!(a.permutation, vec![1, 2, 3]);
        assert_eq!((a.accuracy, a.miou), (1.0, 1.0));
        let swapped: Vec<usize> = t.iter().map(|&y| [2, 1, 3][y - 1]).collect();
        let a = align_labels(&swapped, &t, 3).unwrap();
        assert_eq!(a.permutation, vec![2, 1, 3]);
        assert_eq!(a.accuracy, 1.0);
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        assert_eq!(hungarian(&cost), vec![1, 0, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(align_labels(&[1], &[1, 2], 2).is_err());
        assert!(align_labels(&[3], &[1], 2).is_err());
    }
}
