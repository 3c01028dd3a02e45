use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

/// Mean and sample standard deviation; `None` for an empty sample.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

/// Exact two-sided sign test on paired differences; zeros are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the first member is larger.
    pub positive: usize,
    /// Pairs where the second member is larger.
    pub negative: usize,
    pub ties: usize,
    pub p_value: f64,
}

pub fn sign_test(pairs: impl IntoIterator<Item = (f64, f64)>) -> SignTest {
    let (mut positive, mut negative, mut ties) = (0, 0, 0);
    for (a, b) in pairs {
        if a > b {
            positive += 1;
        } else if a < b {
            negative += 1;
        } else {
            ties += 1;
        }
    }
    let n = positive + negative;
    let p_value = if n == 0 {
        1.0
    } else {
        let k = positive.min(negative) as u64;
        let dist = Binomial::new(0.5, n as u64).expect("valid binomial");
        (2.0 * dist.cdf(k)).min(1.0)
    };
    SignTest {
        positive,
        negative,
        ties,
        p_value,
    }
}
