//! Small descriptive statistics helpers.

use statrs::function::erf::erfc;

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation with the n−1 denominator; `None` below two points.
pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Two-sided normal tail probability 2·(1 − Φ(|z|)).
pub fn two_sided_normal_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sd_examples() {
        assert_eq!(sample_sd(&[5.0, 5.0, 5.0]), Some(0.0));
        assert!((sample_sd(&[4.0, 6.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd(&[1.0]), None);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn normal_tail() {
        assert!((two_sided_normal_p(0.0) - 1.0).abs() < 1e-15);
        assert!((two_sided_normal_p(1.959963984540054) - 0.05).abs() < 1e-10);
        assert_eq!(two_sided_normal_p(-2.5), two_sided_normal_p(2.5));
    }
}
