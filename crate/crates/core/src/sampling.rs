use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points in `[0, 1)^d`, one per stratum in every dimension.
pub fn latin_hypercube<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..d {
        strata.shuffle(rng);
        for (p, &s) in points.iter_mut().zip(&strata) {
            p[k] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}
