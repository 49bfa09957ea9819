/// The eight per-window statistics, in feature order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean = 0,
    Max,
    Min,
    /// Mean absolute deviation around the mean.
    MeanAbsDev,
    /// `p75 - p25` with linearly interpolated quantiles.
    InterquartileRange,
    RootMeanSquare,
    /// Population skewness `m3 / m2^1.5`.
    Skewness,
    /// Population (non-excess) kurtosis `m4 / m2^2`.
    Kurtosis,
}

pub const STAT_COUNT: usize = 8;

impl Statistic {
    pub const ALL: [Statistic; STAT_COUNT] = [
        Statistic::Mean,
        Statistic::Max,
        Statistic::Min,
        Statistic::MeanAbsDev,
        Statistic::InterquartileRange,
        Statistic::RootMeanSquare,
        Statistic::Skewness,
        Statistic::Kurtosis,
    ];
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// All eight statistics of `x`, in [`Statistic::ALL`] order.
///
/// Skewness and kurtosis are defined as 0 when the spread is at rounding
/// level relative to the data magnitude. Panics on an empty slice.
pub fn describe(x: &[f64]) -> [f64; STAT_COUNT] {
    assert!(!x.is_empty(), "describe() needs at least one sample");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut abs_dev, mut sq, mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &v in x {
        max = max.max(v);
        min = min.min(v);
        let d = v - mean;
        let d2 = d * d;
        abs_dev += d.abs();
        sq += v * v;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);

    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);

    let scale = max.abs().max(min.abs());
    let degenerate = m2.sqrt() <= 64.0 * f64::EPSILON * scale || m2 == 0.0;
    let (skew, kurt) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    [mean, max, min, abs_dev / n, iqr, (sq / n).sqrt(), skew, kurt]
}
