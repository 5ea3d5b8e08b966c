//! Benchmark-only crate; the benchmarks live in `benches/`.

/// Deterministic test signal: two tones over a slow trend.
pub fn signal(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            let t = t as f64;
            (0.3 * t).sin() + 0.5 * (0.05 * t).cos() + 0.002 * t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn signal_is_finite() {
        assert!(super::signal(100).iter().all(|v| v.is_finite()));
    }
}
