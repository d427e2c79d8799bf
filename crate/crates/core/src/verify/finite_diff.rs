/// Central-difference gradient with step `h_rel * p_i` per coordinate.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], h_rel: f64) -> Vec<f64> {
    let mut x = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = h_rel * p[i];
            x[i] = p[i] + h;
            let up = f(&x);
            x[i] = p[i] - h;
            let down = f(&x);
            x[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Richardson-extrapolated central differences (steps `h` and `h / 2`,
/// `h = h_rel * p_i`), which removes the `h^2` truncation term, together with
/// a bound on their floating-point error per coordinate.
pub fn finite_diff_with_roundoff(f: impl Fn(&[f64]) -> f64, p: &[f64], h_rel: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = p.to_vec();
    let mut central = |i: usize, h: f64| {
        x[i] = p[i] + h;
        let up = f(&x);
        x[i] = p[i] - h;
        let down = f(&x);
        x[i] = p[i];
        (
            (up - down) / (2.0 * h),
            4.0 * f64::EPSILON * (up.abs() + down.abs()) / (2.0 * h),
        )
    };
    (0..p.len())
        .map(|i| {
            let h = h_rel * p[i];
            let (d1, n1) = central(i, h);
            let (d2, n2) = central(i, 0.5 * h);
            ((4.0 * d2 - d1) / 3.0, (4.0 * n2 + n1) / 3.0)
        })
        .unzip()
}

/// Worst ratio `|fd - exact| / (rel * scale + roundoff)` over coordinates;
/// at most 1 when the gradients agree. `scale` is the magnitude against
/// which relative errors are measured (`|exact|` when nothing cancels).
pub fn gradient_mismatch(fd: &[f64], roundoff: &[f64], exact: &[f64], scale: &[f64], rel: f64) -> f64 {
    (0..fd.len())
        .map(|i| (fd[i] - exact[i]).abs() / (rel * scale[i].abs() + roundoff[i]).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sum() {
        let g = finite_diff_gradient(|p| p.iter().sum(), &[0.3, 2.0, 7.0], 1e-6);
        for x in g {
            assert!((x - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn log_of_sum() {
        let g = finite_diff_gradient(|p| (p.iter().sum::<f64>() + 1.0).ln(), &[1.0, 1.0], 1e-6);
        for x in g {
            assert!((x - 1.0 / 3.0).abs() < 1e-9);
        }
    }
}
