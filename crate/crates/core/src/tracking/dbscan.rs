use std::collections::VecDeque;

/// Cluster assignment for each input point; `None` marks noise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub clusters: usize,
}

impl ClusterLabeling {
    /// Point indices of each cluster, in cluster order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.clusters];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                out[*c].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// DBSCAN over 3-D feature vectors. A point's neighbourhood includes itself.
/// Border points join the first cluster that reaches them.
pub fn dbscan(points: &[[f64; 3]], eps: f64, min_pts: usize) -> ClusterLabeling {
    let n = points.len();
    let eps2 = eps * eps;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(&points[i], &points[j]) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![None; n];
    let mut clusters = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters;
        clusters += 1;
        labels[start] = Some(id);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    ClusterLabeling { labels, clusters }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(cx: f64, cy: f64, n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [cx + 0.03 * (i % 4) as f64, cy + 0.04 * (i / 4) as f64, 0.0]).collect()
    }

    #[test]
    fn two_separated_blobs() {
        let mut pts = blob(0.0, 1.0, 10);
        pts.extend(blob(3.0, 1.0, 10));
        let l = dbscan(&pts, 0.5, 5);
        assert_eq!(l.clusters, 2);
        assert!(l.labels[..10].iter().all(|&x| x == Some(0)));
        assert!(l.labels[10..].iter().all(|&x| x == Some(1)));
    }

    #[test]
    fn isolated_point_is_noise() {
        let l = dbscan(&[[0.0, 1.0, 0.0]], 0.5, 5);
        assert_eq!(l.clusters, 0);
        assert_eq!(l.labels, vec![None]);
        assert_eq!(dbscan(&[], 0.5, 5).clusters, 0);
    }

    #[test]
    fn min_pts_one_makes_every_point_a_cluster_core() {
        let l = dbscan(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]], 0.5, 1);
        assert_eq!(l.clusters, 2);
    }
}
