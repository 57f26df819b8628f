use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GmmError;
use crate::Scalar;

const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<F> {
    pub centroids: Array2<F>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist<F: Scalar>(a: ArrayView1<'_, F>, b: ArrayView1<'_, F>) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

fn nearest<F: Scalar>(x: ArrayView1<'_, F>, centroids: &Array2<F>) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (k, c) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is
/// stable (or 300 rounds). Empty clusters are re-seeded at the row farthest
/// from its centroid.
pub fn kmeans_init<F: Scalar>(
    data: ArrayView2<'_, F>,
    k: usize,
    rng_seed: u64,
) -> Result<KMeans<F>, GmmError> {
    let n = data.nrows();
    if k == 0 {
        return Err(GmmError::ZeroComponents);
    }
    if k > n {
        return Err(GmmError::KExceedsN { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = data
        .rows()
        .into_iter()
        .map(|r| sq_dist(r, data.row(chosen[0])).to_f64_lossy())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n leaves an unchosen row")
        };
        chosen.push(next);
        for (i, r) in data.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, data.row(next)).to_f64_lossy());
        }
    }
    let mut centroids = data.select(Axis(0), &chosen);

    let mut assignment = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut dist = vec![F::zero(); n];
        for (i, r) in data.rows().into_iter().enumerate() {
            let (c, d) = nearest(r, &centroids);
            dist[i] = d;
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        let mut sums = Array2::<F>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, r) in data.rows().into_iter().enumerate() {
            sums.row_mut(assignment[i]).scaled_add(F::one(), &r);
            counts[assignment[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = F::one() / F::from_usize_lossy(counts[c]);
                centroids.row_mut(c).assign(&(&sums.row(c) * inv));
            } else {
                let far = (0..n)
                    .filter(|&i| counts[assignment[i]] > 1)
                    .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[assignment[i]] -= 1;
                    assignment[i] = c;
                    counts[c] = 1;
                    dist[i] = F::zero();
                    centroids.row_mut(c).assign(&data.row(i));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(KMeans { centroids, assignment, iterations })
}
