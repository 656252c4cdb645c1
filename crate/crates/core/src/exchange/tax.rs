use serde::{Deserialize, Serialize};

use super::Gp;

/// Per-unit seller tax: zero below `exempt_below`, otherwise
/// `floor(rate * price)` capped at `cap`.
///
/// The rate is kept as an exact rational so the floor is computed in
/// integer arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxSchedule {
    pub exempt_below: Gp,
    pub rate_numerator: u64,
    pub rate_denominator: u64,
    pub cap: Gp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxScheduleError {
    #[error("tax rate {0}/{1} must lie strictly between 0 and 1")]
    RateOutOfRange(u64, u64),
    #[error("exemption threshold {exempt_below} must be below cap/rate ({limit})")]
    ThresholdAboveCapPoint { exempt_below: u64, limit: u64 },
}

impl Default for TaxSchedule {
    fn default() -> Self {
        TaxSchedule {
            exempt_below: Gp(100),
            rate_numerator: 1,
            rate_denominator: 100,
            cap: Gp(5_000_000),
        }
    }
}

impl TaxSchedule {
    pub fn new(
        exempt_below: Gp,
        rate_numerator: u64,
        rate_denominator: u64,
        cap: Gp,
    ) -> Result<Self, TaxScheduleError> {
        let schedule = TaxSchedule {
            exempt_below,
            rate_numerator,
            rate_denominator,
            cap,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), TaxScheduleError> {
        if self.rate_numerator == 0 || self.rate_numerator >= self.rate_denominator {
            return Err(TaxScheduleError::RateOutOfRange(
                self.rate_numerator,
                self.rate_denominator,
            ));
        }
        let limit = self.cap_point();
        if self.exempt_below.0 >= limit {
            return Err(TaxScheduleError::ThresholdAboveCapPoint {
                exempt_below: self.exempt_below.0,
                limit,
            });
        }
        Ok(())
    }

    /// Price at which `rate * price` first reaches the cap (`cap / rate`).
    pub fn cap_point(&self) -> u64 {
        let point =
            u128::from(self.cap.0) * u128::from(self.rate_denominator) / u128::from(self.rate_numerator);
        u64::try_from(point).unwrap_or(u64::MAX)
    }

    /// Tax owed on one unit sold at `price`.
    pub fn apply(&self, price: Gp) -> Gp {
        if price < self.exempt_below {
            return Gp(0);
        }
        let raw = u128::from(price.0) * u128::from(self.rate_numerator)
            / u128::from(self.rate_denominator);
        Gp(raw.min(u128::from(self.cap.0)) as u64)
    }

    /// Rate as a float, for the analytic kink in tax-per-GP.
    pub fn rate(&self) -> f64 {
        self.rate_numerator as f64 / self.rate_denominator as f64
    }
}

/// Free-function form of [`TaxSchedule::apply`].
pub fn apply_tax(price: Gp, schedule: &TaxSchedule) -> Gp {
    schedule.apply(price)
}
