use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::rng::{self, domain};

use super::calendar::{is_weekend, Calendar};
use super::{DataError, LoadSeries, ZONES};

/// Typical mean zonal load (MW), in load-index order.
pub const DEFAULT_ZONE_MW: [f64; 20] = [
    10700.0, 1200.0, 2600.0, 11800.0, 14300.0, 2100.0, 4800.0, 3050.0, 3200.0, 1950.0, 4700.0, 1800.0, 4300.0, 170.0,
    7600.0, 1600.0, 3600.0, 1700.0, 1400.0, 5300.0,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub calendar: Calendar,
    /// Mean MW per zone; defaults to [`DEFAULT_ZONE_MW`].
    pub zone_mw: Option<Vec<f64>>,
    /// Relative amplitudes of the annual, semiannual, weekly and daily cycles.
    pub annual_amp: f64,
    pub semiannual_amp: f64,
    pub weekly_amp: f64,
    pub daily_amp: f64,
    /// Relative drop on Saturdays and Sundays.
    pub weekend_shift: f64,
    /// Stationary standard deviation and lag-one coefficient of the AR(1) noise.
    pub noise_sd: f64,
    pub noise_ar: f64,
    /// Values never fall below this fraction of the zone mean.
    pub floor_frac: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2018, 12, 31).expect("valid date"),
            calendar: Calendar::UsEastern,
            zone_mw: None,
            annual_amp: 0.12,
            semiannual_amp: 0.08,
            weekly_amp: 0.01,
            daily_amp: 0.2,
            weekend_shift: 0.04,
            noise_sd: 0.02,
            noise_ar: 0.9,
            floor_frac: 0.1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.end < self.start {
            return Err(DataError::Invalid(format!("end {} before start {}", self.end, self.start)));
        }
        if let Some(z) = &self.zone_mw {
            if z.len() != ZONES.len() || z.iter().any(|&v| !(v > 0.0)) {
                return Err(DataError::Invalid("zone_mw needs 20 positive values".into()));
            }
        }
        if !(0.0..1.0).contains(&self.noise_ar) || self.noise_sd < 0.0 || self.floor_frac <= 0.0 {
            return Err(DataError::Invalid("noise_ar must be in [0, 1), noise_sd >= 0, floor_frac > 0".into()));
        }
        Ok(())
    }
}

/// Zone-level hourly loads: scaled sums of annual, weekly and daily cycles, a weekend
/// drop and AR(1) noise. Timestamps follow the wall clock, so the autumn clock change
/// yields two readings for one hour and the spring change skips one.
pub fn synth_loads(cfg: &SynthConfig, seed: u64) -> Result<LoadSeries, DataError> {
    cfg.validate()?;
    let mw = cfg.zone_mw.clone().unwrap_or_else(|| DEFAULT_ZONE_MW.to_vec());
    let first = cfg.start.and_hms_opt(0, 0, 0).expect("midnight");
    let last = cfg.end.and_hms_opt(23, 0, 0).expect("valid time");
    // absolute hours in standard time; the wall clock reads one hour later during DST
    let mut std_hours = Vec::new();
    let mut t = first - Duration::hours(1);
    while cfg.calendar.from_standard(t) <= last {
        if cfg.calendar.from_standard(t) >= first {
            std_hours.push(t);
        }
        t += Duration::hours(1);
    }
    let wall: Vec<NaiveDateTime> = std_hours.iter().map(|&s| cfg.calendar.from_standard(s)).collect();

    let n = wall.len();
    let z = ZONES.len();
    let mut values = Matrix::zeros(n, z);
    let innov = cfg.noise_sd * (1.0 - cfg.noise_ar * cfg.noise_ar).sqrt();
    for (k, &scale) in mw.iter().enumerate() {
        let mut rng = rng::stream(seed, domain::SYNTH, k as u64);
        // small per-zone variation of the shared cycles
        let phase = 0.15 * ((k as f64) * 1.7).sin();
        let amp = 1.0 + 0.1 * ((k as f64) * 2.3).cos();
        let mut e = if cfg.noise_sd > 0.0 {
            let g: f64 = StandardNormal.sample(&mut rng);
            cfg.noise_sd * g
        } else {
            0.0
        };
        for (i, &w) in wall.iter().enumerate() {
            if i > 0 && cfg.noise_sd > 0.0 {
                let g: f64 = StandardNormal.sample(&mut rng);
                e = cfg.noise_ar * e + innov * g;
            }
            let doy = w.ordinal0() as f64 / 365.25;
            let hr = w.hour() as f64;
            let dow = w.weekday().num_days_from_monday() as f64;
            let annual = cfg.annual_amp * (2.0 * PI * (doy - 0.55)).cos() + cfg.semiannual_amp * (4.0 * PI * (doy - 0.04)).cos();
            let weekly = cfg.weekly_amp * (2.0 * PI * dow / 7.0).cos();
            let daily = cfg.daily_amp * amp * ((2.0 * PI * (hr - 17.0) / 24.0 + phase).cos() + 0.35 * (4.0 * PI * (hr - 8.0) / 24.0).cos());
            let weekend = if is_weekend(w) { -cfg.weekend_shift } else { 0.0 };
            let v = scale * (1.0 + annual + weekly + daily + weekend + e);
            values[(i, k)] = v.max(cfg.floor_frac * scale);
        }
    }
    LoadSeries::new(wall, ZONES.iter().map(|(z, _)| z.to_string()).collect(), values)
}
