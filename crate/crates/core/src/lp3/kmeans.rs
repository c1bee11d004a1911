//! Seeded spherical k-means over unit vectors with k-means++ initialization.
//! Assignment ties break to the lowest cluster index; the whole procedure is
//! deterministic for a fixed seed.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Clustering {
    /// Per-point cluster index, compacted to 0..k_effective.
    pub assignment: Vec<usize>,
    /// Unit centroids, one per surviving cluster.
    pub centroids: Vec<Vector3<f64>>,
}

pub fn kmeans_unit(points: &[Vector3<f64>], k: usize, seed: u64, max_iter: usize) -> Clustering {
    let n = points.len();
    let k = k.min(n).max(1);
    if n == 0 {
        return Clustering {
            assignment: Vec::new(),
            centroids: Vec::new(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let a = nearest_centroid(p, &centroids);
            if a != assignment[i] {
                assignment[i] = a;
                changed = true;
            }
        }
        // recompute centroids; empty clusters keep their previous direction
        let mut sums = vec![Vector3::zeros(); centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (i, p) in points.iter().enumerate() {
            sums[assignment[i]] += p;
            counts[assignment[i]] += 1;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] > 0 {
                let s = sums[c];
                let norm = s.norm();
                if norm > 1e-12 {
                    *centroid = s / norm;
                }
            }
        }
        if !changed {
            break;
        }
    }

    compact(points, assignment, centroids)
}

fn nearest_centroid(p: &Vector3<f64>, centroids: &[Vector3<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = (p - centroid).norm_squared();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn init_plus_plus(points: &[Vector3<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| (p - centroids[0]).norm_squared())
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centroid; pick uniformly
            rng.random_range(0..n)
        } else {
            let target = rng.random_range(0.0..total);
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    idx = i;
                    break;
                }
            }
            idx
        };
        let c = points[next];
        centroids.push(c);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min((p - c).norm_squared());
        }
    }
    centroids
}

/// Drop empty clusters and renumber assignments to 0..k_effective.
fn compact(points: &[Vector3<f64>], assignment: Vec<usize>, centroids: Vec<Vector3<f64>>) -> Clustering {
    let mut counts = vec![0usize; centroids.len()];
    for &a in &assignment {
        counts[a] += 1;
    }
    let mut remap = vec![usize::MAX; centroids.len()];
    let mut kept = Vec::new();
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            remap[c] = kept.len();
            kept.push(centroids[c]);
        }
    }
    let assignment = assignment.into_iter().map(|a| remap[a]).collect();
    let _ = points;
    Clustering {
        assignment,
        centroids: kept,
    }
}

/// Greedily merge clusters whose centroids are within `merge_angle_deg`.
/// Returns the same-shape assignment with merged indices compacted.
pub fn merge_close_clusters(
    points: &[Vector3<f64>],
    clustering: &Clustering,
    merge_angle_deg: f64,
) -> Clustering {
    let cos_thresh = merge_angle_deg.to_radians().cos();
    let mut centroids = clustering.centroids.clone();
    let mut assignment = clustering.assignment.clone();
    loop {
        let k = centroids.len();
        if k < 2 {
            break;
        }
        // closest pair by angle
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..k {
            for b in a + 1..k {
                let cos = centroids[a].dot(&centroids[b]);
                if cos > cos_thresh && best.map_or(true, |(_, _, bc)| cos > bc) {
                    best = Some((a, b, cos));
                }
            }
        }
        let Some((a, b, _)) = best else { break };
        for asg in assignment.iter_mut() {
            if *asg == b {
                *asg = a;
            } else if *asg > b {
                *asg -= 1;
            }
        }
        centroids.remove(b);
        // recompute the merged centroid from member points
        let mut sum = Vector3::zeros();
        for (i, &asg) in assignment.iter().enumerate() {
            if asg == a {
                sum += points[i];
            }
        }
        let norm = sum.norm();
        if norm > 1e-12 {
            centroids[a] = sum / norm;
        }
    }
    Clustering {
        assignment,
        centroids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jitter(base: Vector3<f64>, eps: f64, i: usize) -> Vector3<f64> {
        let t = i as f64 * 0.7;
        (base + Vector3::new(eps * t.sin(), eps * t.cos(), 0.0)).normalize()
    }

    #[test]
    fn separates_orthogonal_directions() {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push(jitter(Vector3::new(0.0, 0.0, -1.0), 0.01, i));
        }
        for i in 0..40 {
            pts.push(jitter(Vector3::new(-1.0, 0.0, 0.0), 0.01, i));
        }
        let c = kmeans_unit(&pts, 4, 3, 50);
        let m = merge_close_clusters(&pts, &c, 10.0);
        assert_eq!(m.centroids.len(), 2);
        let first = m.assignment[0];
        assert!(m.assignment[..40].iter().all(|&a| a == first));
        assert!(m.assignment[40..].iter().all(|&a| a != first));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pts: Vec<Vector3<f64>> = (0..100)
            .map(|i| {
                Vector3::new((i as f64).sin(), (i as f64 * 1.3).cos(), -1.2).normalize()
            })
            .collect();
        let a = kmeans_unit(&pts, 4, 42, 50);
        let b = kmeans_unit(&pts, 4, 42, 50);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn merges_nearly_parallel_clusters() {
        let mut pts = Vec::new();
        for i in 0..30 {
            pts.push(jitter(Vector3::new(0.0, 0.0, -1.0), 0.02, i));
        }
        // 5 degrees off
        let tilted = Vector3::new(0.0, (5f64).to_radians().sin(), -(5f64).to_radians().cos());
        for i in 0..30 {
            pts.push(jitter(tilted, 0.02, i));
        }
        let c = kmeans_unit(&pts, 2, 1, 50);
        let m = merge_close_clusters(&pts, &c, 10.0);
        assert_eq!(m.centroids.len(), 1);
    }
}
