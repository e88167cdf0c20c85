use std::fmt::Write;

use super::oracle::CloudPoint;
use super::sweep::SweepReport;

/// Decimal rendering with nine significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("theta,status,P,Q\n");
    for r in &report.records {
        let _ = writeln!(out, "{},{},{},{}", format_sig9(r.theta), r.status, format_sig9(r.p), format_sig9(r.q));
    }
    out
}

pub fn cloud_csv(cloud: &[CloudPoint]) -> String {
    let mut out = String::from("re_slack,im_slack,P,Q,Un_mag\n");
    for c in cloud {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig9(c.slack.re),
            format_sig9(c.slack.im),
            format_sig9(c.p),
            format_sig9(c.q),
            format_sig9(c.un_mag)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(1.147225808478888), "1.14722581");
        assert_eq!(format_sig9(-0.0025), "-0.00250000000");
        assert_eq!(format_sig9(123.456), "123.456000");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1e-12), "1.00000000e-12");
    }
}
