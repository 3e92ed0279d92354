//! Derivative-free coordinate pattern search on the unit cube, shared by the
//! acquisition maximizer and the confidence-bound minimizer.

/// Maximizes `score` starting from `start`, taking up to `steps` rounds.
///
/// Each round evaluates the `2 d` axis neighbors of the current point at the
/// current step size (clamped to `[0, 1]`), moves to the best neighbor when it
/// improves strictly, and halves the step otherwise. Fully deterministic.
///
/// `score` receives a batch of points and must return one value per point.
pub(crate) fn pattern_search_max(
    start: &[f64],
    start_value: f64,
    steps: usize,
    mut score: impl FnMut(&[Vec<f64>]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut best = start.to_vec();
    let mut best_value = start_value;
    let mut step = 0.1;
    for _ in 0..steps {
        let mut neighbors = Vec::with_capacity(2 * d);
        for dim in 0..d {
            for sign in [1.0, -1.0] {
                let mut coords = best.clone();
                coords[dim] = (coords[dim] + sign * step).clamp(0.0, 1.0);
                neighbors.push(coords);
            }
        }
        let values = score(&neighbors);
        debug_assert_eq!(values.len(), neighbors.len());
        let mut round_best: Option<usize> = None;
        for (i, &v) in values.iter().enumerate() {
            if round_best.is_none_or(|j| v > values[j]) {
                round_best = Some(i);
            }
        }
        match round_best {
            Some(i) if values[i] > best_value => {
                best = neighbors[i].clone();
                best_value = values[i];
            }
            _ => step *= 0.5,
        }
    }
    (best, best_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_to_interior_quadratic_peak() {
        let target = [0.3, 0.7];
        let score = |batch: &[Vec<f64>]| {
            batch
                .iter()
                .map(|p| {
                    -p.iter()
                        .zip(&target)
                        .map(|(x, t)| (x - t) * (x - t))
                        .sum::<f64>()
                })
                .collect()
        };
        let start = vec![0.9, 0.1];
        let start_value = -(0.6f64 * 0.6 + 0.6 * 0.6);
        let (best, value) = pattern_search_max(&start, start_value, 50, score);
        assert!(value > -1e-6, "value {value}");
        assert!((best[0] - 0.3).abs() < 1e-3 && (best[1] - 0.7).abs() < 1e-3);
    }

    #[test]
    fn stays_inside_unit_cube() {
        let score = |batch: &[Vec<f64>]| {
            batch
                .iter()
                .map(|p| p.iter().sum::<f64>())
                .collect::<Vec<_>>()
        };
        let (best, _) = pattern_search_max(&[0.95], 0.95, 20, score);
        assert!(best[0] <= 1.0);
        assert!((best[0] - 1.0).abs() < 1e-9);
    }
}
