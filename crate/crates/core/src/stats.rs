//! Loss statistics and per-iteration training log rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// z-value of the two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

/// Mean, sample standard deviation, 95% interval and coefficient of
/// variation of a set of repeated loss estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub cv: f64,
}

impl LossStats {
    /// Needs at least two values (the standard deviation uses `n − 1`).
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "loss statistics need at least 2 batch losses, got {}",
                values.len()
            )));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Ok(Self::from_mean_std(mean, (ss / (n - 1.0)).sqrt()))
    }

    /// A single estimate with no spread.
    pub fn point(value: f64) -> Self {
        Self::from_mean_std(value, 0.0)
    }

    pub fn from_mean_std(mean: f64, std: f64) -> Self {
        let cv = if mean != 0.0 {
            std / mean.abs()
        } else if std == 0.0 {
            0.0
        } else {
            f64::NAN
        };
        Self {
            mean,
            std,
            ci_low: mean - Z95 * std,
            ci_high: mean + Z95 * std,
            cv,
        }
    }
}

/// One CSV row: `iteration,loss,loss_std,lower_bound,upper_bound,grad_norm,cv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub loss: f64,
    pub loss_std: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub grad_norm: f64,
    pub cv: f64,
}

impl TrainLogRow {
    pub const HEADER: [&'static str; 7] = [
        "iteration",
        "loss",
        "loss_std",
        "lower_bound",
        "upper_bound",
        "grad_norm",
        "cv",
    ];

    pub fn new(iteration: usize, stats: &LossStats, grad_norm: f64) -> Self {
        Self {
            iteration,
            loss: stats.mean,
            loss_std: stats.std,
            lower_bound: stats.ci_low,
            upper_bound: stats.ci_high,
            grad_norm,
            cv: stats.cv,
        }
    }
}

/// Writes rows with the fixed header.
pub fn write_log<W: std::io::Write>(rows: &[TrainLogRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TrainLogRow::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_batch_example() {
        let s = LossStats::from_samples(&[0.2, 0.3, 0.25]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ci_low, 0.152, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ci_high, 0.348, epsilon = 1e-12);
        assert_abs_diff_eq!(s.cv, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn identical_batches_collapse() {
        let s = LossStats::from_samples(&[0.3; 5]).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!((s.ci_low, s.ci_high), (s.mean, s.mean));
        assert!(LossStats::from_samples(&[0.1]).is_err());
    }

    #[test]
    fn csv_header_is_fixed() {
        let mut buf = Vec::new();
        write_log(&[TrainLogRow::new(0, &LossStats::point(0.5), 1.0)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,loss,loss_std,lower_bound,upper_bound,grad_norm,cv"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.0,0.5,0.5,1.0,0.0");
    }
}
