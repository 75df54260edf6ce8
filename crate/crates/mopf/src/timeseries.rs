//! Hourly demand shapes, marginal emission factors, and load scaling.
//!
//! Demand shapes are normalized jointly: the maximum raw consumption over
//! *all* seasons maps to 1.0, so off-peak seasons sit strictly below one.
//! The demand-consistency weight ties fleet charging magnitudes to the grid:
//!
//! ```text
//!   weight = total grid demand / max(summer total, winter total)
//! ```
//!
//! with both totals in the units of the raw inputs. It multiplies every
//! fleet energy parameter downstream.

use crate::case::Network;
use thiserror::Error;

/// Default horizon: 24 one-hour periods.
pub const DEFAULT_HORIZON: usize = 24;

#[derive(Debug, Error)]
pub enum TimeseriesError {
    #[error("series is empty")]
    Empty,
    #[error("series entry {index} is not positive ({value})")]
    NonPositive { index: usize, value: f64 },
    #[error("series lengths differ across seasons")]
    LengthMismatch,
    #[error("profile length {got} does not match horizon {expected}")]
    HorizonMismatch { got: usize, expected: usize },
    #[error("emission factor {index} is negative ({value})")]
    NegativeEmission { index: usize, value: f64 },
    #[error("weight denominator is zero")]
    ZeroDenominator,
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// A season's normalized hourly consumption shape; values in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonProfile {
    pub label: String,
    pub values: Vec<f64>,
}

impl SeasonProfile {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Hourly marginal CO2 emission factors in kg per MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSeries {
    pub values: Vec<f64>,
}

impl EmissionSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, TimeseriesError> {
        if values.is_empty() {
            return Err(TimeseriesError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if value < 0.0 {
                return Err(TimeseriesError::NegativeEmission { index, value });
            }
        }
        Ok(EmissionSeries { values })
    }
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// Per-period bus loads, per-unit: `p[bus][t]`, `q[bus][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodLoads {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl PeriodLoads {
    pub fn horizon(&self) -> usize {
        self.p.first().map(|r| r.len()).unwrap_or(0)
    }
    pub fn num_buses(&self) -> usize {
        self.p.len()
    }
    /// Total real load over all buses and periods, per-unit hours.
    pub fn total_p(&self) -> f64 {
        self.p.iter().flatten().sum()
    }
}

/// Normalizes raw hourly consumption series jointly across seasons: every
/// value is divided by the single maximum over all inputs.
pub fn normalize_profiles(
    seasons: &[(&str, &[f64])],
) -> Result<Vec<SeasonProfile>, TimeseriesError> {
    if seasons.is_empty() || seasons.iter().any(|(_, v)| v.is_empty()) {
        return Err(TimeseriesError::Empty);
    }
    let len0 = seasons[0].1.len();
    if seasons.iter().any(|(_, v)| v.len() != len0) {
        return Err(TimeseriesError::LengthMismatch);
    }
    let mut max = 0.0f64;
    for (_, vals) in seasons {
        for (index, &value) in vals.iter().enumerate() {
            if value <= 0.0 {
                return Err(TimeseriesError::NonPositive { index, value });
            }
            max = max.max(value);
        }
    }
    Ok(seasons
        .iter()
        .map(|(label, vals)| SeasonProfile {
            label: label.to_string(),
            values: vals.iter().map(|v| v / max).collect(),
        })
        .collect())
}

/// Expands base bus loads over the horizon: `p[i][t] = load_p[i] * shape[t]`.
pub fn scale_loads(network: &Network, shape: &SeasonProfile) -> PeriodLoads {
    let p = network
        .buses
        .iter()
        .map(|b| shape.values.iter().map(|s| b.load_p * s).collect())
        .collect();
    let q = network
        .buses
        .iter()
        .map(|b| shape.values.iter().map(|s| b.load_q * s).collect())
        .collect();
    PeriodLoads { p, q }
}

/// The demand-consistency weight: total grid demand over the horizon divided
/// by the larger of the two seasons' raw consumption totals. The same weight
/// is used for both seasons.
pub fn demand_weight(
    grid_total: f64,
    summer_total: f64,
    winter_total: f64,
) -> Result<f64, TimeseriesError> {
    let denom = summer_total.max(winter_total);
    if denom <= 0.0 {
        return Err(TimeseriesError::ZeroDenominator);
    }
    Ok(grid_total / denom)
}

/// Reads an `hour,value` CSV covering hours `0..horizon` without gaps.
pub fn parse_series_csv(text: &str, horizon: usize) -> Result<Vec<f64>, TimeseriesError> {
    let err = |line: usize, msg: &str| TimeseriesError::Csv {
        line,
        msg: msg.to_string(),
    };
    let mut values = vec![f64::NAN; horizon];
    let mut seen = vec![false; horizon];
    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if ln == 1 {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("hour") {
                continue;
            }
            return Err(err(ln, "expected header `hour,value`"));
        }
        let mut parts = line.split(',');
        let hour: usize = parts
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|_| err(ln, "bad hour"))?;
        let value: f64 = parts
            .next()
            .ok_or_else(|| err(ln, "missing value column"))?
            .trim()
            .parse()
            .map_err(|_| err(ln, "bad value"))?;
        if hour >= horizon {
            return Err(err(ln, &format!("hour {hour} outside horizon {horizon}")));
        }
        if seen[hour] {
            return Err(err(ln, &format!("duplicate hour {hour}")));
        }
        seen[hour] = true;
        values[hour] = value;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(TimeseriesError::Csv {
            line: 0,
            msg: format!("hour {missing} missing from series"),
        });
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;
    use proptest::prelude::*;

    #[test]
    fn single_season_normalizes_by_own_max() {
        let out = normalize_profiles(&[("s", &[50.0, 100.0])]).unwrap();
        assert_eq!(out[0].values, vec![0.5, 1.0]);
    }

    #[test]
    fn shared_max_across_seasons() {
        let summer = [60.0, 100.0];
        let winter = [40.0, 80.0];
        let out = normalize_profiles(&[("summer", &summer), ("winter", &winter)]).unwrap();
        assert_eq!(out[0].values, vec![0.6, 1.0]);
        assert_eq!(out[1].values, vec![0.4, 0.8]);
    }

    #[test]
    fn constant_series_maps_to_ones() {
        let out = normalize_profiles(&[("s", &[7.0, 7.0, 7.0])]).unwrap();
        assert!(out[0].values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn nonpositive_entry_rejected() {
        assert!(matches!(
            normalize_profiles(&[("s", &[1.0, 0.0])]),
            Err(TimeseriesError::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn weight_reproduces_published_regional_ratios() {
        // Daily kWh totals for the three reference regions.
        let il = demand_weight(29276.0, 149690.0, 129297.0).unwrap();
        let sc = demand_weight(151214.0, 82575.0, 69901.0).unwrap();
        let tx = demand_weight(1313994.0, 1256288.0, 923604.0).unwrap();
        assert!((il - 0.19).abs() < 0.01, "il = {il}");
        assert!((sc - 1.83).abs() < 0.01, "sc = {sc}");
        assert!((tx - 1.05).abs() < 0.01, "tx = {tx}");
    }

    #[test]
    fn weight_rejects_zero_denominator() {
        assert!(matches!(
            demand_weight(10.0, 0.0, 0.0),
            Err(TimeseriesError::ZeroDenominator)
        ));
    }

    #[test]
    fn scale_loads_pointwise() {
        let n = parse_case(include_str!("../tests/fixtures/case2.m")).unwrap();
        let shape = SeasonProfile {
            label: "s".into(),
            values: vec![1.0, 0.5],
        };
        let loads = scale_loads(&n, &shape);
        assert!((loads.p[1][0] - 0.40).abs() < 1e-12);
        assert!((loads.p[1][1] - 0.20).abs() < 1e-12);
    }

    #[test]
    fn parse_series_csv_happy_and_errors() {
        let ok = parse_series_csv("hour,value\n0,1.5\n1,2.5\n", 2).unwrap();
        assert_eq!(ok, vec![1.5, 2.5]);
        assert!(parse_series_csv("hour,value\n0,1.0\n", 2).is_err()); // gap
        assert!(parse_series_csv("hour,value\n0,1.0\n0,2.0\n", 1).is_err()); // dup
        assert!(parse_series_csv("nope\n", 1).is_err()); // header
    }

    proptest! {
        /// Bilinearity: sum of scaled loads equals (sum of base loads) x
        /// (sum of shape), and the q/p ratio is preserved wherever p != 0.
        #[test]
        fn scale_loads_bilinear_and_power_factor(
            shape in proptest::collection::vec(0.05f64..1.0, 4..12)
        ) {
            let n = parse_case(include_str!("../tests/fixtures/case5.m")).unwrap();
            let profile = SeasonProfile { label: "s".into(), values: shape.clone() };
            let loads = scale_loads(&n, &profile);
            let base_total: f64 = n.buses.iter().map(|b| b.load_p).sum();
            let shape_total: f64 = shape.iter().sum();
            let total = loads.total_p();
            prop_assert!((total - base_total * shape_total).abs() < 1e-9);
            for (bi, b) in n.buses.iter().enumerate() {
                if b.load_p != 0.0 {
                    let pf = b.load_q / b.load_p;
                    for t in 0..shape.len() {
                        prop_assert!((loads.q[bi][t] - pf * loads.p[bi][t]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
