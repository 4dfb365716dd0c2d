//! Text, JSON and CSV renderings of test reports.

use std::fmt::Write as _;

use crate::inference::TestReport;

/// Four significant digits, `inf`/`-inf` for infinities.
pub fn sig4(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Full-precision value for CSV cells.
pub fn full(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let header = ["contrast", "estimate", "stderr", "t", "adj_p", "lower", "upper"];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            cells.push(vec![
                r.label.clone(),
                sig4(r.estimate),
                sig4(r.stderr),
                sig4(r.tstat),
                sig4(r.adj_p),
                sig4(r.ci_low),
                sig4(r.ci_high),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "\nglobal min-p: {}   critical value: {}   df: {}   alpha: {}",
            sig4(self.global_min_p),
            sig4(self.quantile_used),
            self.df,
            self.spec.alpha
        );
        out
    }

    /// Confidence interval rows `label,estimate,lower,upper` for plotting.
    pub fn ci_csv(&self) -> String {
        let mut out = String::from("label,estimate,lower,upper\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.label, full(r.estimate), full(r.ci_low), full(r.ci_high));
        }
        out
    }

    /// All per-contrast fields at full precision.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("label,estimate,stderr,tstat,adj_p,lower,upper\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.label,
                full(r.estimate),
                full(r.stderr),
                full(r.tstat),
                full(r.adj_p),
                full(r.ci_low),
                full(r.ci_high)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.022_345), "0.02235");
        assert_eq!(sig4(1.234_56), "1.235");
        assert_eq!(sig4(-12.3456), "-12.35");
        assert_eq!(sig4(1234.6), "1235");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(f64::INFINITY), "inf");
        assert_eq!(sig4(f64::NEG_INFINITY), "-inf");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
    }

    #[test]
    fn full_precision_round_trips() {
        let x = 0.1 + 0.2;
        assert_eq!(full(x).parse::<f64>().unwrap(), x);
        assert_eq!(full(f64::NEG_INFINITY), "-inf");
    }
}
