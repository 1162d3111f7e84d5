use super::HarnessError;

pub const Z_95: f64 = 1.96;

pub fn mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        Some(samples.iter().sum::<f64>() / samples.len() as f64)
    }
}

/// Standard deviation with 1/n normalization.
pub fn population_std(samples: &[f64]) -> Option<f64> {
    let m = mean(samples)?;
    let var = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / samples.len() as f64;
    Some(var.sqrt())
}

pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) })
}

/// 95% half-width `1.96·σ/√n`, population σ.
pub fn confidence_interval(samples: &[f64]) -> Result<f64, HarnessError> {
    if samples.len() < 2 {
        return Err(HarnessError::TooFewSamples(samples.len()));
    }
    let sigma = population_std(samples).expect("non-empty");
    Ok(Z_95 * sigma / (samples.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_examples() {
        assert_eq!(confidence_interval(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        // mean 0, population σ = 2
        assert_eq!(confidence_interval(&[2.0, -2.0, 2.0, -2.0]).unwrap(), 1.96);
        let half = confidence_interval(&[0.0, 2.0]).unwrap();
        assert!((half - 1.96 / 2f64.sqrt()).abs() < 1e-15);
        assert!((half - 1.3859).abs() < 1e-4);
        assert!(matches!(confidence_interval(&[1.0]), Err(HarnessError::TooFewSamples(1))));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
