use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Draws from Dirichlet(alpha) by normalizing independent Gamma(alpha_c, 1) draws.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        for d in &mut draws {
            *d /= total;
        }
    } else {
        // Every draw underflowed; only reachable with tiny shapes.
        let k = draws.len() as f64;
        draws.iter_mut().for_each(|d| *d = 1.0 / k);
    }
    draws
}

/// Index drawn with probability proportional to `weights` (assumed to sum to `total`).
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // Rounding left u just past the end: take the last positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}
