use super::{DensityModel, Kde, Kernel};
use crate::error::{Error, Result};

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman-style rule-of-thumb bandwidth.
///
/// `h = c * s * n^(-1/5)` with `s = min(sd, IQR / 1.349)` and `c = 1.06` for
/// the Gaussian kernel, `2.345` for Epanechnikov. Falls back to `sd` when the
/// IQR is zero.
pub fn rule_of_thumb_bandwidth(samples: &[f64], kernel: Kernel) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let robust = iqr / 1.349;
    let scale = if robust > 0.0 { sd.min(robust) } else { sd };
    let factor = match kernel {
        Kernel::Gaussian => 1.06,
        Kernel::Epanechnikov => 2.345,
    };
    Ok(factor * scale * (n as f64).powf(-0.2))
}

/// Fits a KDE. Without an explicit bandwidth the rule of thumb is used, which
/// needs at least two samples with non-zero spread.
pub fn fit_kde(samples: &[f64], kernel: Kernel, bandwidth: Option<f64>) -> Result<DensityModel> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let h = match bandwidth {
        Some(h) => {
            if samples.is_empty() {
                return Err(Error::TooFewSamples { needed: 1, got: 0 });
            }
            h
        }
        None => rule_of_thumb_bandwidth(samples, kernel)?,
    };
    Kde::new(kernel, h, samples.to_vec()).map(DensityModel::Kde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_sample_epanechnikov() {
        let m = fit_kde(&[0.0], Kernel::Epanechnikov, Some(1.0)).unwrap();
        assert_abs_diff_eq!(m.eval(0.0), 0.75);
    }

    #[test]
    fn single_sample_gaussian() {
        let m = fit_kde(&[0.0], Kernel::Gaussian, Some(1.0)).unwrap();
        assert_abs_diff_eq!(m.eval(0.0), 0.39894, epsilon = 1e-5);
    }

    #[test]
    fn two_sample_epanechnikov_sum() {
        // (1/2)(K(1.5) + K(0.5)) = (1/2)(0 + 0.5625)
        let m = fit_kde(&[-1.0, 1.0], Kernel::Epanechnikov, Some(1.0)).unwrap();
        assert_abs_diff_eq!(m.eval(0.5), 0.28125, epsilon = 1e-15);
        assert_abs_diff_eq!(m.eval(0.0), 0.0);
    }

    #[test]
    fn support_hint_padding() {
        let m = fit_kde(&[0.0, 2.0], Kernel::Epanechnikov, Some(0.5)).unwrap();
        assert_eq!(m.support_hint(), (-0.5, 2.5));
        let m = fit_kde(&[0.0, 2.0], Kernel::Gaussian, Some(0.5)).unwrap();
        assert_eq!(m.support_hint(), (-2.5, 4.5));
    }

    #[test]
    fn rule_needs_spread() {
        assert!(matches!(fit_kde(&[1.0], Kernel::Gaussian, None), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_kde(&[2.0, 2.0, 2.0], Kernel::Gaussian, None), Err(Error::ZeroVariance)));
        assert!(fit_kde(&[], Kernel::Gaussian, Some(1.0)).is_err());
    }

    #[test]
    fn rule_constants() {
        // Symmetric sample where sd < IQR/1.349.
        let xs = [-1.0, 1.0];
        let sd = 2f64.sqrt();
        let h = rule_of_thumb_bandwidth(&xs, Kernel::Gaussian).unwrap();
        assert_abs_diff_eq!(h, 1.06 * sd.min(1.0 / 1.349) * 2f64.powf(-0.2), epsilon = 1e-15);
        let h2 = rule_of_thumb_bandwidth(&xs, Kernel::Epanechnikov).unwrap();
        assert_abs_diff_eq!(h2 / h, 2.345 / 1.06, epsilon = 1e-12);
    }
}
