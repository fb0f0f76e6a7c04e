//! Multi-seed evaluation reports, Welch's t-test and table rendering.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CliError, Result};

/// Welch's unequal-variance two-sample t-test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub significant: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Two-tailed Welch test of equal means, significant at p < 0.05. When both
/// samples have zero variance the result is p = 1 for equal means and p = 0
/// otherwise.
pub fn seed_compare(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CliError::input("t-test needs at least two values per sample"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let (t, p) = if diff == 0.0 { (0.0, 1.0) } else { (diff.signum() * f64::INFINITY, 0.0) };
        return Ok(TTest {
            t,
            df: na + nb - 2.0,
            p,
            significant: p < 0.05,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| CliError::internal(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        df,
        p,
        significant: p < 0.05,
    })
}

/// Metrics of one evaluation seed, aligned with the report's `ks`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub users: usize,
    pub excluded: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Hr,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Hr, Metric::Ndcg];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hr => "HR",
            Metric::Ndcg => "NDCG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub runs: Vec<SeedMetrics>,
    /// Extra `key: value` lines appended to the text rendering.
    pub notes: Vec<(String, String)>,
}

impl EvalReport {
    pub fn values(&self, metric: Metric, k: usize) -> Vec<f64> {
        let Some(pos) = self.ks.iter().position(|&x| x == k) else {
            return Vec::new();
        };
        self.runs
            .iter()
            .map(|r| match metric {
                Metric::Hr => r.hr[pos],
                Metric::Ndcg => r.ndcg[pos],
            })
            .collect()
    }

    pub fn mean(&self, metric: Metric, k: usize) -> f64 {
        mean(&self.values(metric, k))
    }

    pub fn std(&self, metric: Metric, k: usize) -> f64 {
        std_dev(&self.values(metric, k))
    }

    /// `key: value` blocks: a summary block per K, then one block per seed.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seeds: {}", self.runs.len());
        for &k in &self.ks {
            let _ = writeln!(out, "\nK: {k}");
            for m in Metric::ALL {
                let _ = writeln!(out, "{}@{k}.mean: {}", m.name(), self.mean(m, k));
                let _ = writeln!(out, "{}@{k}.std: {}", m.name(), self.std(m, k));
            }
        }
        for r in &self.runs {
            let _ = writeln!(out, "\nseed: {}", r.seed);
            let _ = writeln!(out, "users: {}", r.users);
            let _ = writeln!(out, "excluded: {}", r.excluded);
            let _ = writeln!(out, "missing: {}", r.missing);
            for (pos, &k) in self.ks.iter().enumerate() {
                let _ = writeln!(out, "HR@{k}: {}", r.hr[pos]);
                let _ = writeln!(out, "NDCG@{k}: {}", r.ndcg[pos]);
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for (k, v) in &self.notes {
                let _ = writeln!(out, "{k}: {v}");
            }
        }
        out
    }

    /// `metric,K,seed,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,K,seed,value\n");
        for m in Metric::ALL {
            for &k in &self.ks {
                for (r, v) in self.runs.iter().zip(self.values(m, k)) {
                    let _ = writeln!(out, "{},{k},{},{v}", m.name(), r.seed);
                }
            }
        }
        out
    }
}

/// A table rendered both as CSV and as aligned text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(&self.headers);
        for r in &self.rows {
            let _ = w.write_record(r);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (k, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if k > 0 {
                    s.push_str("  ");
                }
                let _ = write!(s, "{c:<w$}");
            }
            s.trim_end().to_string() + "\n"
        };
        let mut out = line(&self.headers);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&line(&rule));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// Fixed four-decimal rendering used in tables.
pub fn f4(x: f64) -> String {
    format!("{x:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_are_not_significant() {
        let a = [0.3, 0.31, 0.29, 0.305];
        let r = seed_compare(&a, &a).unwrap();
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
        let c = [0.5, 0.5, 0.5];
        assert_eq!(seed_compare(&c, &c).unwrap().p, 1.0);
    }

    #[test]
    fn separated_samples_with_jitter() {
        // means differ by ~1 with standard errors near 1e-9: |t| is huge,
        // far beyond any quantile giving p >= 0.001
        let a = [1.0, 1.0 + 1e-9, 1.0 - 1e-9];
        let b = [0.0, 1e-9, -1e-9];
        let r = seed_compare(&a, &b).unwrap();
        assert!(r.t > 1e8);
        assert!(r.p < 0.001 && r.significant);
        let s = seed_compare(&b, &a).unwrap();
        assert_eq!(s.p, r.p);
        assert_eq!(s.t, -r.t);
    }

    #[test]
    fn textbook_welch_values() {
        // hand computation: means 3 and 5, variances 1 and 2, n = 5 each
        // se^2 = 0.2 + 0.4 = 0.6, t = -2/sqrt(0.6), df = 0.36 / 0.05 = 7.2
        let a = [2.0, 3.0, 4.0, 2.0, 4.0];
        let b = [3.0, 5.0, 7.0, 5.0, 5.0];
        let r = seed_compare(&a, &b).unwrap();
        assert!((r.t + 2.0 / 0.6f64.sqrt()).abs() < 1e-12);
        assert!((r.df - 7.2).abs() < 1e-12);
        // reference p from an independent Welch implementation
        assert!((r.p - 0.035501652623377).abs() < 1e-9, "{}", r.p);
        assert!(r.significant);
    }

    #[test]
    fn too_few_values_is_an_error() {
        assert!(seed_compare(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_metric_k_seed() {
        let report = EvalReport {
            ks: vec![2, 10],
            runs: (0..5)
                .map(|s| SeedMetrics {
                    seed: s,
                    hr: vec![0.1, 0.2],
                    ndcg: vec![0.05, 0.1],
                    users: 10,
                    excluded: 0,
                    missing: 0,
                })
                .collect(),
            notes: Vec::new(),
        };
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 2 * 5);
        assert!(csv.contains("HR,10,3,0.2\n"));
        assert!(report.to_text().contains("HR@10.mean: 0.2"));
    }

    #[test]
    fn table_renders_aligned_and_csv() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a,b".into(), "1".into()]);
        assert_eq!(t.to_csv(), "name,value\n\"a,b\",1\n");
        assert_eq!(t.render(), "name  value\n----  -----\na,b   1\n");
    }
}
