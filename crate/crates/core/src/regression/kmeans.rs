//! Seeded k-means (k-means++ seeding followed by Lloyd iterations), used to
//! initialise mixtures and to place RBF centers.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EsdsError, Result};

const MAX_LLOYD_ITERS: usize = 100;

pub(crate) struct KMeans {
    pub centers: Vec<DVector<f64>>,
    pub labels: Vec<usize>,
}

pub(crate) fn kmeans(points: &[DVector<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(EsdsError::InvalidParameter("k-means needs k >= 1".into()));
    }
    if points.len() < k {
        return Err(EsdsError::InsufficientData(format!("{} points cannot seed {k} clusters", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_seed(points, k, &mut rng);
    let mut labels = vec![usize::MAX; points.len()];

    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let best = nearest(&centers, p);
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            sums[l] += p;
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = &sums[j] / counts[j] as f64;
            } else {
                // Empty cluster: steal the point farthest from its center.
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, (p - &centers[labels[i]]).norm_squared()))
                    .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
                centers[j] = points[far].clone();
                labels[far] = j;
            }
        }
    }
    Ok(KMeans { centers, labels })
}

fn nearest(centers: &[DVector<f64>], p: &DVector<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn plus_plus_seed(points: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // All points coincide with existing centers.
            rng.random_range(0..points.len())
        };
        let c = points[idx].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - &c).norm_squared());
        }
        centers.push(c);
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 0.01;
            pts.push(DVector::from_vec(vec![-10.0 + e, 0.0]));
            pts.push(DVector::from_vec(vec![10.0 - e, 1.0]));
        }
        let km = kmeans(&pts, 2, 7).unwrap();
        let a = km.labels[0];
        let b = km.labels[1];
        assert_ne!(a, b);
        assert!(km.labels.iter().step_by(2).all(|&l| l == a));
        assert!(km.labels.iter().skip(1).step_by(2).all(|&l| l == b));
    }

    #[test]
    fn deterministic_for_seed() {
        let pts: Vec<_> = (0..50).map(|i| DVector::from_vec(vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])).collect();
        let a = kmeans(&pts, 4, 3).unwrap();
        let b = kmeans(&pts, 4, 3).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centers, b.centers);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![DVector::from_vec(vec![0.0])];
        assert!(kmeans(&pts, 2, 0).is_err());
    }
}
