//! CSV and JSON export of sweep results.
//!
//! The CSV schema is
//! `scheme,sweep_var,sweep_value,trial,seed,sum_rate_mbps,feasible,iterations`
//! with floats printed to 9 significant digits, newline-terminated, UTF-8.

use std::fs;
use std::path::Path;

use rsma_core::solver::Scheme;

use crate::error::SimError;
use crate::sweep::SweepResult;

/// Formats a float with `sig` significant digits, in the style of printf's
/// `%g`: fixed notation in a moderate exponent range, scientific outside it,
/// trailing zeros trimmed.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig > 0);
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let mantissa = format!("{:.*e}", sig - 1, x);
        // Rust renders "1.200000000e7"; trim mantissa zeros.
        if let Some(epos) = mantissa.find('e') {
            let (m, e) = mantissa.split_at(epos);
            let m = m.trim_end_matches('0').trim_end_matches('.');
            return format!("{m}{e}");
        }
        mantissa
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// Short scheme label used in CSV rows and chart legends.
pub fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Opt => "opt",
        Scheme::FixP => "fix_p",
        Scheme::RandX => "rand_x",
    }
}

/// Renders the per-trial records as CSV bytes.
pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::from("scheme,sweep_var,sweep_value,trial,seed,sum_rate_mbps,feasible,iterations\n");
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            scheme_name(r.scheme),
            r.sweep_var,
            format_sig(r.sweep_value, 9),
            r.trial,
            r.seed,
            format_sig(r.sum_rate_mbps, 9),
            r.feasible,
            r.iterations
        ));
    }
    out
}

/// Writes the CSV file.
pub fn write_csv(result: &SweepResult, path: &Path) -> Result<(), SimError> {
    fs::write(path, csv_string(result)).map_err(|e| SimError::io(path, e))
}

/// Writes the full result (spec, records, aggregates) as pretty JSON.
pub fn write_json(result: &SweepResult, path: &Path) -> Result<(), SimError> {
    let json = serde_json::to_string_pretty(result)
        .map_err(|e| SimError::config(format!("serialization failed: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| SimError::io(path, e))
}

/// Reads a result back from JSON.
pub fn read_json(path: &Path) -> Result<SweepResult, SimError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SimError::config(format!("bad result file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{SweepSpec, SweepVariable, TrialRecord};
    use rsma_core::SystemConfig;

    #[test]
    fn format_sig_cases() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(10.0, 9), "10");
        assert_eq!(format_sig(-2.5, 9), "-2.5");
        assert_eq!(format_sig(123.456789123, 9), "123.456789");
        assert_eq!(format_sig(1.0e12, 9), "1e12");
        assert_eq!(format_sig(1.23e-7, 9), "1.23e-7");
        assert_eq!(format_sig(0.0001, 9), "0.0001");
        // Nine significant digits survive a round trip.
        let v = 271.828182845;
        let parsed: f64 = format_sig(v, 9).parse().unwrap();
        assert!((parsed - v).abs() < 1e-6);
    }

    #[test]
    fn empty_result_is_header_only() {
        let spec = SweepSpec {
            variable: SweepVariable::TotalPower,
            values: vec![1.0],
            trials: 1,
            schemes: vec![rsma_core::solver::Scheme::Opt],
            seed_base: 0,
            base: SystemConfig::default(),
            generation: Default::default(),
            options: Default::default(),
        };
        let result = SweepResult { spec, records: vec![], aggregates: vec![] };
        let csv = csv_string(&result);
        assert_eq!(
            csv,
            "scheme,sweep_var,sweep_value,trial,seed,sum_rate_mbps,feasible,iterations\n"
        );
    }

    #[test]
    fn csv_row_shape() {
        let spec = SweepSpec {
            variable: SweepVariable::TotalPower,
            values: vec![10.0],
            trials: 1,
            schemes: vec![rsma_core::solver::Scheme::Opt],
            seed_base: 0,
            base: SystemConfig::default(),
            generation: Default::default(),
            options: Default::default(),
        };
        let records = vec![TrialRecord {
            scheme: rsma_core::solver::Scheme::Opt,
            sweep_var: "P_tot".into(),
            sweep_value: 10.0,
            trial: 0,
            seed: 7,
            sum_rate_mbps: 123.456789123,
            feasible: true,
            iterations: 321,
        }];
        let result = SweepResult { spec, records, aggregates: vec![] };
        let csv = csv_string(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "opt,P_tot,10,0,7,123.456789,true,321");
        assert!(csv.ends_with('\n'));
    }
}
