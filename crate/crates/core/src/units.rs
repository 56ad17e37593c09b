//! Unit-annotated quantities in scenario files.
//!
//! Quantities are written as `"<number> <unit>"`, e.g. `"30 mph"` or
//! `"0.084 USD/mile"`. The number may be a ratio such as `1/1.3`.
//! Everything is converted to SI (m, s, J, kg, USD) on parse; lifetimes stay
//! in years and yearly amounts stay per year.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Length,
    Speed,
    Time,
    /// Frequencies and flow rates.
    PerTime,
    Money,
    MoneyPerLength,
    MoneyPerYear,
    Years,
    EnergyPerLength,
    MassPerEnergy,
    MassPerYear,
    MoneyPerMass,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Dimensionless => "dimensionless",
            Dimension::Length => "length",
            Dimension::Speed => "speed",
            Dimension::Time => "time",
            Dimension::PerTime => "rate",
            Dimension::Money => "money",
            Dimension::MoneyPerLength => "money per length",
            Dimension::MoneyPerYear => "money per year",
            Dimension::Years => "duration in years",
            Dimension::EnergyPerLength => "energy per length",
            Dimension::MassPerEnergy => "mass per energy",
            Dimension::MassPerYear => "mass per year",
            Dimension::MoneyPerMass => "money per mass",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("cannot parse number `{0}`")]
    BadNumber(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("unit `{unit}` is a {found}, expected a {expected}")]
    WrongDimension {
        unit: String,
        found: Dimension,
        expected: Dimension,
    },
    #[error("missing unit, expected a {0}")]
    MissingUnit(Dimension),
}

const MILE: f64 = 1609.344;

fn lookup(unit: &str) -> Option<(Dimension, f64)> {
    use Dimension::*;
    let entry = match unit {
        "m" => (Length, 1.0),
        "km" => (Length, 1000.0),
        "mi" | "mile" | "miles" => (Length, MILE),

        "m/s" => (Speed, 1.0),
        "km/h" => (Speed, 1.0 / 3.6),
        "mph" => (Speed, MILE / 3600.0),

        "s" => (Time, 1.0),
        "min" => (Time, 60.0),
        "h" => (Time, 3600.0),

        "1/s" | "req/s" | "veh/s" => (PerTime, 1.0),
        "1/min" | "req/min" | "veh/min" => (PerTime, 1.0 / 60.0),
        "1/h" | "req/h" | "veh/h" => (PerTime, 1.0 / 3600.0),

        "USD" => (Money, 1.0),
        "kUSD" => (Money, 1e3),
        "MUSD" => (Money, 1e6),

        "USD/m" => (MoneyPerLength, 1.0),
        "USD/km" => (MoneyPerLength, 1e-3),
        "USD/mi" | "USD/mile" => (MoneyPerLength, 1.0 / MILE),

        "USD/yr" | "USD/year" => (MoneyPerYear, 1.0),
        "USD/month" => (MoneyPerYear, 12.0),
        "kUSD/yr" | "kUSD/year" => (MoneyPerYear, 1e3),
        "MUSD/yr" | "MUSD/year" => (MoneyPerYear, 1e6),

        "yr" | "year" | "years" => (Years, 1.0),

        "J/m" | "kJ/km" => (EnergyPerLength, 1.0),
        "Wh/km" => (EnergyPerLength, 3.6),
        "kWh/100km" => (EnergyPerLength, 36.0),
        "Wh/mi" | "Wh/mile" => (EnergyPerLength, 3600.0 / MILE),

        "kg/J" => (MassPerEnergy, 1.0),
        "g/kJ" => (MassPerEnergy, 1e-6),
        "g/kWh" => (MassPerEnergy, 1e-3 / 3.6e6),
        "kg/kWh" => (MassPerEnergy, 1.0 / 3.6e6),

        "kg/yr" | "kg/year" => (MassPerYear, 1.0),
        "t/yr" | "t/year" | "ton/yr" | "ton/year" => (MassPerYear, 1e3),

        "USD/kg" => (MoneyPerMass, 1.0),
        "USD/t" | "USD/ton" => (MoneyPerMass, 1e-3),

        "%" => (Dimensionless, 0.01),
        _ => return None,
    };
    Some(entry)
}

/// Parses a plain number or a ratio `a/b`.
pub fn parse_number(s: &str) -> Result<f64, UnitError> {
    let s = s.trim();
    let bad = || UnitError::BadNumber(s.to_string());
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Parses `"<number> <unit>"` and converts it to SI for `expected`.
///
/// A dimensionless quantity may omit the unit or use `%`.
pub fn parse_quantity(text: &str, expected: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let (number, unit) = match text.split_once(char::is_whitespace) {
        Some((n, u)) => (n, u.trim()),
        None => (text, ""),
    };
    let value = parse_number(number)?;
    if unit.is_empty() {
        return if expected == Dimension::Dimensionless {
            Ok(value)
        } else {
            Err(UnitError::MissingUnit(expected))
        };
    }
    let (found, factor) = lookup(unit).ok_or_else(|| UnitError::UnknownUnit(unit.to_string()))?;
    if found != expected {
        return Err(UnitError::WrongDimension {
            unit: unit.to_string(),
            found,
            expected,
        });
    }
    Ok(value * factor)
}

/// Converts SI speed to miles per hour for reporting.
pub fn mps_to_mph(v: f64) -> f64 {
    v * 3600.0 / MILE
}

/// Uses the same factor as `parse_quantity`, so `mph_to_mps(50.0)` equals
/// a parsed `"50 mph"` exactly.
pub fn mph_to_mps(v: f64) -> f64 {
    v * (MILE / 3600.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        let mph = parse_quantity("30 mph", Dimension::Speed).unwrap();
        assert!((mph - 13.4112).abs() < 1e-12);
        assert_eq!(parse_quantity("1/1.3", Dimension::Dimensionless).unwrap(), 1.0 / 1.3);
        assert_eq!(parse_quantity("93 %", Dimension::Dimensionless).unwrap(), 0.93);
        assert!((parse_quantity("0.14 g/kJ", Dimension::MassPerEnergy).unwrap() - 1.4e-7).abs() < 1e-20);
        assert!((parse_quantity("1/6 1/min", Dimension::PerTime).unwrap() - 1.0 / 360.0).abs() < 1e-15);
        assert_eq!(parse_quantity("140 t/yr", Dimension::MassPerYear).unwrap(), 140_000.0);
        assert!((parse_quantity("0.084 USD/mile", Dimension::MoneyPerLength).unwrap() - 0.084 / MILE).abs() < 1e-18);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_quantity("30", Dimension::Speed), Err(UnitError::MissingUnit(_))));
        assert!(matches!(parse_quantity("30 furlongs", Dimension::Length), Err(UnitError::UnknownUnit(_))));
        assert!(matches!(
            parse_quantity("30 mph", Dimension::Length),
            Err(UnitError::WrongDimension { .. })
        ));
        assert!(matches!(parse_quantity("fast mph", Dimension::Speed), Err(UnitError::BadNumber(_))));
        assert!(parse_number("1/0").is_err());
    }

    #[test]
    fn mph_round_trip() {
        assert!((mps_to_mph(mph_to_mps(50.0)) - 50.0).abs() < 1e-12);
        for v in [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 65.0] {
            assert_eq!(mph_to_mps(v), parse_quantity(&format!("{v} mph"), Dimension::Speed).unwrap());
        }
    }
}
