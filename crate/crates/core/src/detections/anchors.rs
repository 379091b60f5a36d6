use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    /// (w, h) per cluster, in initialization order (ascending area).
    pub centroids: Vec<(f64, f64)>,
    pub iterations: usize,
    /// Total within-cluster distance after each assignment step.
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnchorError {
    #[error("k = {k} but only {distinct} distinct boxes")]
    DegenerateInput { k: usize, distinct: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("box sizes must be finite and in (0, 1]")]
    InvalidBox,
}

/// 1 - IoU of two boxes sharing a center.
pub fn shape_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = a.0.min(b.0) * a.1.min(b.1);
    1.0 - inter / (a.0 * a.1 + b.0 * b.1 - inter)
}

fn nearest(b: (f64, f64), centroids: &[(f64, f64)]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centroids.iter().enumerate() {
        let d = shape_distance(b, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// K-means over (w, h) with the co-centered IoU distance.
///
/// Initial centroids are the distinct boxes sorted by area (then w, then h)
/// sampled at the k quantile midpoints `(2i+1)m/(2k)`. Each update moves a
/// centroid to the mean of its members unless that would increase the
/// cluster's total distance, so the cost never goes up. A cluster that loses
/// all members keeps its previous centroid.
pub fn anchor_kmeans(
    boxes: &[(f64, f64)],
    k: usize,
    max_iters: usize,
) -> Result<AnchorSet, AnchorError> {
    if k == 0 {
        return Err(AnchorError::ZeroK);
    }
    if boxes
        .iter()
        .any(|&(w, h)| !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0))
    {
        return Err(AnchorError::InvalidBox);
    }
    let mut distinct = boxes.to_vec();
    distinct.sort_by(|a, b| {
        (a.0 * a.1)
            .total_cmp(&(b.0 * b.1))
            .then(a.0.total_cmp(&b.0))
            .then(a.1.total_cmp(&b.1))
    });
    distinct.dedup();
    let m = distinct.len();
    if k > m {
        return Err(AnchorError::DegenerateInput { k, distinct: m });
    }
    let mut centroids: Vec<(f64, f64)> =
        (0..k).map(|i| distinct[(2 * i + 1) * m / (2 * k)]).collect();

    let mut assign: Vec<usize> = Vec::new();
    let mut cost_history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut cost = 0.0;
        let next: Vec<usize> = boxes
            .iter()
            .map(|&b| {
                let (i, d) = nearest(b, &centroids);
                cost += d;
                i
            })
            .collect();
        cost_history.push(cost);
        if next == assign {
            break;
        }
        assign = next;
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&b, &c) in boxes.iter().zip(&assign) {
            sums[c].0 += b.0;
            sums[c].1 += b.1;
            sums[c].2 += 1;
        }
        for (ci, s) in sums.iter().enumerate() {
            if s.2 == 0 {
                continue;
            }
            let mean = (s.0 / s.2 as f64, s.1 / s.2 as f64);
            let members = boxes.iter().zip(&assign).filter(|(_, &a)| a == ci);
            let (mut old, mut new) = (0.0, 0.0);
            for (&b, _) in members {
                old += shape_distance(b, centroids[ci]);
                new += shape_distance(b, mean);
            }
            // the mean does not minimise 1 - IoU; never let it raise the cost
            if new <= old {
                centroids[ci] = mean;
            }
        }
    }
    Ok(AnchorSet {
        centroids,
        iterations,
        cost_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_boxes_single_cluster() {
        let a = anchor_kmeans(&[(0.3, 0.2); 5], 1, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(a.centroids, vec![(0.3, 0.2)]);
    }

    #[test]
    fn k_equal_to_distinct_returns_the_boxes() {
        let boxes = [(0.1, 0.4), (0.5, 0.5), (0.1, 0.4), (0.2, 0.2)];
        let a = anchor_kmeans(&boxes, 3, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(a.centroids, vec![(0.1, 0.4), (0.2, 0.2), (0.5, 0.5)]);
    }

    #[test]
    fn too_many_clusters_is_degenerate() {
        let e = anchor_kmeans(&[(0.1, 0.1), (0.1, 0.1)], 2, 10).unwrap_err();
        assert_eq!(e, AnchorError::DegenerateInput { k: 2, distinct: 1 });
    }

    #[test]
    fn distance_of_nested_boxes() {
        // (0.2,0.2) inside (0.4,0.4): IoU 0.25
        assert!((shape_distance((0.2, 0.2), (0.4, 0.4)) - 0.75).abs() < 1e-12);
    }
}
