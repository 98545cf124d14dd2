use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `ln(count)` against `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub rate: f64,
    /// Root-mean-square residual of the fit, in log units.
    pub residual: f64,
    pub first_n: usize,
    pub last_n: usize,
}

/// Slope of `ln(count)` against `n` over the last `tail` records.
pub fn growth_rate(counts: &[(usize, u64)], tail: usize) -> Result<Growth> {
    if tail < 2 {
        return Err(Error::input("tail window needs at least 2 records"));
    }
    if counts.len() < tail {
        return Err(Error::input(format!(
            "{} records cannot fill a tail window of {tail}",
            counts.len()
        )));
    }
    if let Some(&(n, _)) = counts.iter().find(|&&(_, c)| c == 0) {
        return Err(Error::input(format!("zero count at n = {n}")));
    }
    let window = &counts[counts.len() - tail..];
    let xs: Vec<f64> = window.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let k = tail as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::input("tail window needs distinct n values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let rate = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (my + rate * (x - mx));
            r * r
        })
        .sum();
    Ok(Growth {
        rate,
        residual: (sse / k).sqrt(),
        first_n: window[0].0,
        last_n: window[tail - 1].0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_counts() {
        let g = growth_rate(&[(1, 2), (2, 4), (3, 8), (4, 16)], 4).unwrap();
        assert!((g.rate - 2f64.ln()).abs() < 1e-12);
        assert!(g.residual < 1e-12);
        assert_eq!((g.first_n, g.last_n), (1, 4));
    }

    #[test]
    fn constant_counts() {
        let g = growth_rate(&[(1, 7), (2, 7), (3, 7)], 2).unwrap();
        assert_eq!(g.rate, 0.0);
    }

    #[test]
    fn tail_uses_last_records() {
        let g = growth_rate(&[(1, 1), (2, 1), (3, 3), (4, 9)], 2).unwrap();
        assert!((g.rate - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(growth_rate(&[(1, 2)], 2).is_err());
        assert!(growth_rate(&[(1, 2), (2, 3)], 1).is_err());
        assert!(growth_rate(&[(1, 0), (2, 3)], 2).is_err());
    }
}
