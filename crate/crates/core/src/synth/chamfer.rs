use super::SynthError;

fn nearest(sorted: &[f64], x: f64) -> f64 {
    let k = sorted.partition_point(|&v| v < x);
    let mut best = f64::INFINITY;
    if k < sorted.len() {
        best = sorted[k] - x;
    }
    if k > 0 {
        best = best.min(x - sorted[k - 1]);
    }
    best
}

fn mean_nn(from: &[f64], to_sorted: &[f64]) -> f64 {
    from.iter().map(|&x| nearest(to_sorted, x)).sum::<f64>() / from.len() as f64
}

/// Symmetric mean nearest-neighbour distance between two timestamp sets,
/// as a percentage of the window length `window`.
pub fn chamfer_distance(a: &[f64], b: &[f64], window: f64) -> Result<f64, SynthError> {
    if a.is_empty() || b.is_empty() {
        return Err(SynthError::EmptySet);
    }
    if !(window > 0.0) {
        return Err(SynthError::InvalidConfig(format!("window length {window} must be > 0")));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    Ok(100.0 / window * 0.5 * (mean_nn(&sa, &sb) + mean_nn(&sb, &sa)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(chamfer_distance(&[0.1, 0.5], &[0.5, 0.1], 1.0).unwrap(), 0.0);
        assert!((chamfer_distance(&[0.0], &[0.1], 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(chamfer_distance(&[], &[0.1], 1.0), Err(SynthError::EmptySet)));
    }
}
