use crate::diffcore::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Returns fewer than `k` clusters
/// when there are fewer than `k` distinct points. An empty cluster keeps its
/// previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, iterations: usize, rng: &mut Rng) -> KMeans {
    if points.is_empty() || k == 0 {
        return KMeans { centroids: Vec::new(), assignments: vec![0; points.len()] };
    }
    let mut centroids = vec![points[rng.below(points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.next_f64() * total;
        let mut pick = d.iter().rposition(|&x| x > 0.0).expect("total > 0");
        for (i, &di) in d.iter().enumerate() {
            if di > 0.0 && target < di {
                pick = i;
                break;
            }
            target -= di;
        }
        centroids.push(points[pick].clone());
    }

    let dim = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    for _ in 0..iterations {
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(points) {
            let c = nearest(p, &centroids).0;
            changed |= *a != c;
            *a = c;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
    }
    KMeans { centroids, assignments }
}
