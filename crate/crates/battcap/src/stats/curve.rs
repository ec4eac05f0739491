use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::MAX_SECONDS_PER_PERCENT;

/// Lowest addressable SOC index.
pub const SOC_LO: u8 = 1;
/// Highest addressable SOC index.
pub const SOC_HI: u8 = 100;

/// A per-SOC array indexed 1..=100 with nullable entries.
///
/// Serializes as a plain array of 100 nullable numbers (index 0 holds SOC 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Option<f64>>", into = "Vec<Option<f64>>")]
pub struct SocSeries {
    entries: Vec<Option<f64>>,
}

impl Default for SocSeries {
    fn default() -> Self {
        Self::new()
    }
}

impl SocSeries {
    pub fn new() -> Self {
        Self { entries: vec![None; SOC_HI as usize] }
    }

    fn slot(soc: u8) -> Option<usize> {
        (SOC_LO..=SOC_HI).contains(&soc).then(|| soc as usize - 1)
    }

    pub fn get(&self, soc: u8) -> Option<f64> {
        Self::slot(soc).and_then(|i| self.entries[i])
    }

    pub fn set(&mut self, soc: u8, value: f64) -> Result<(), StatsError> {
        let i = Self::slot(soc).ok_or(StatsError::BadIndex(soc))?;
        self.entries[i] = Some(value);
        Ok(())
    }

    pub fn clear(&mut self, soc: u8) {
        if let Some(i) = Self::slot(soc) {
            self.entries[i] = None;
        }
    }

    /// Known `(soc, value)` pairs within `[lo, hi]`, ascending.
    pub fn known_in(&self, lo: u8, hi: u8) -> Vec<(u8, f64)> {
        (lo.max(SOC_LO)..=hi.min(SOC_HI))
            .filter_map(|soc| self.get(soc).map(|v| (soc, v)))
            .collect()
    }

    pub fn known_count_in(&self, lo: u8, hi: u8) -> usize {
        self.known_in(lo, hi).len()
    }

    pub fn first_known_in(&self, lo: u8, hi: u8) -> Option<(u8, f64)> {
        self.known_in(lo, hi).into_iter().next()
    }

    pub fn last_known_in(&self, lo: u8, hi: u8) -> Option<(u8, f64)> {
        self.known_in(lo, hi).into_iter().last()
    }

    /// True when every entry in `[lo, hi]` is present.
    pub fn complete_in(&self, lo: u8, hi: u8) -> bool {
        if lo > hi {
            return true;
        }
        self.known_count_in(lo, hi) == (hi - lo + 1) as usize
    }

    /// Fill every null in `[lo, hi]` by linear interpolation between the
    /// nearest known neighbors inside the range. Ends with no outer neighbor
    /// take the nearest known value (flat extrapolation). Entries outside the
    /// range are untouched. Needs at least two known entries in range.
    pub fn interpolate_in(&mut self, lo: u8, hi: u8) -> Result<(), StatsError> {
        let known = self.known_in(lo, hi);
        if known.len() < 2 {
            return Err(StatsError::TooSparse { known: known.len(), lo, hi });
        }
        for soc in lo.max(SOC_LO)..=hi.min(SOC_HI) {
            if self.get(soc).is_some() {
                continue;
            }
            let left = known.iter().rev().find(|(s, _)| *s < soc);
            let right = known.iter().find(|(s, _)| *s > soc);
            let value = match (left, right) {
                (Some(&(ls, lv)), Some(&(rs, rv))) => {
                    lv + (rv - lv) * (soc - ls) as f64 / (rs - ls) as f64
                }
                (Some(&(_, lv)), None) => lv,
                (None, Some(&(_, rv))) => rv,
                (None, None) => unreachable!("known.len() >= 2"),
            };
            self.set(soc, value)?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<Option<f64>>> for SocSeries {
    type Error = String;
    fn try_from(entries: Vec<Option<f64>>) -> Result<Self, Self::Error> {
        if entries.len() != SOC_HI as usize {
            return Err(format!("expected {} entries, got {}", SOC_HI, entries.len()));
        }
        Ok(Self { entries })
    }
}

impl From<SocSeries> for Vec<Option<f64>> {
    fn from(s: SocSeries) -> Self {
        s.entries
    }
}

/// Per-SOC battery voltage, mV. Present values must lie in [2500, 4600].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VoltageCurve {
    pub series: SocSeries,
}

impl VoltageCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_mv(&mut self, soc: u8, mv: f64) -> Result<(), StatsError> {
        if !(2500.0..=4600.0).contains(&mv) {
            return Err(StatsError::OutOfRange { what: "voltage_mv", value: mv });
        }
        self.series.set(soc, mv)
    }
}

/// Per-SOC seconds-per-percent charging time. Present values must lie in
/// (0, 36/0.07]: one percent can never take longer than the cutoff-rate time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeCurve {
    pub series: SocSeries,
}

impl TimeCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_seconds(&mut self, soc: u8, seconds: f64) -> Result<(), StatsError> {
        if !(seconds > 0.0 && seconds <= MAX_SECONDS_PER_PERCENT) {
            return Err(StatsError::OutOfRange { what: "seconds_per_percent", value: seconds });
        }
        self.series.set(soc, seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_fills_midpoint() {
        let mut s = SocSeries::new();
        s.set(39, 4000.0).unwrap();
        s.set(41, 4010.0).unwrap();
        s.interpolate_in(39, 41).unwrap();
        assert_eq!(s.get(40), Some(4005.0));
    }

    #[test]
    fn interpolation_fills_interior_points() {
        let mut s = SocSeries::new();
        s.set(10, 3700.0).unwrap();
        s.set(20, 3800.0).unwrap();
        s.interpolate_in(10, 20).unwrap();
        assert_eq!(s.get(15), Some(3750.0));
    }

    #[test]
    fn interpolation_extends_flat_at_the_ends() {
        let mut s = SocSeries::new();
        s.set(15, 3700.0).unwrap();
        s.set(20, 3800.0).unwrap();
        s.interpolate_in(10, 25).unwrap();
        assert_eq!(s.get(10), Some(3700.0));
        assert_eq!(s.get(12), Some(3700.0));
        assert_eq!(s.get(25), Some(3800.0));
    }

    #[test]
    fn interpolation_needs_two_known_entries() {
        let mut s = SocSeries::new();
        s.set(50, 4000.0).unwrap();
        assert!(matches!(
            s.interpolate_in(40, 60),
            Err(StatsError::TooSparse { known: 1, .. })
        ));
    }

    #[test]
    fn entries_outside_range_are_untouched() {
        let mut s = SocSeries::new();
        s.set(5, 3500.0).unwrap();
        s.set(30, 3900.0).unwrap();
        s.set(40, 3950.0).unwrap();
        s.interpolate_in(30, 40).unwrap();
        assert_eq!(s.get(5), Some(3500.0));
        assert_eq!(s.get(20), None);
        assert!(s.complete_in(30, 40));
    }

    #[test]
    fn voltage_bounds_enforced() {
        let mut v = VoltageCurve::new();
        assert!(v.set_mv(50, 2400.0).is_err());
        assert!(v.set_mv(50, 4601.0).is_err());
        assert!(v.set_mv(50, 3800.0).is_ok());
    }

    #[test]
    fn time_bounds_enforced() {
        let mut t = TimeCurve::new();
        assert!(t.set_seconds(50, 0.0).is_err());
        assert!(t.set_seconds(50, 515.0).is_err());
        assert!(t.set_seconds(50, 514.2).is_ok());
        assert!(t.set_seconds(50, 81.7).is_ok());
    }

    #[test]
    fn series_roundtrips_through_json() {
        let mut s = SocSeries::new();
        s.set(1, 3500.0).unwrap();
        s.set(100, 4200.0).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: SocSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
