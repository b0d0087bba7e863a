//! Report rows, aggregation, and CSV emission.
//!
//! All numbers are written with fixed six-decimal formatting and rows in a
//! deterministic order, so identical runs produce byte-identical files.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cfk_core::schema::Group;

/// Which anonymization produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Cfk,
    Mondrian,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Cfk => "CFK",
            Method::Mondrian => "Mondrian",
        }
    }

    /// Lowercase token used in per-method file names.
    pub fn file_token(self) -> &'static str {
        match self {
            Method::Cfk => "cfk",
            Method::Mondrian => "mondrian",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One explained instance under one method at one anonymity degree.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub explanation_id: usize,
    pub group: Group,
    pub method: Method,
    pub k: usize,
    pub ncp: f64,
    pub pureness: f64,
    pub k_degree: usize,
    pub elapsed_seconds: f64,
}

pub const REPORT_HEADER: [&str; 8] = [
    "explanation_id",
    "group",
    "method",
    "k",
    "ncp",
    "pureness",
    "k_degree",
    "elapsed_seconds",
];

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_report(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.explanation_id.to_string(),
            r.group.to_string(),
            r.method.to_string(),
            r.k.to_string(),
            f6(r.ncp),
            f6(r.pureness),
            r.k_degree.to_string(),
            f6(r.elapsed_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean metrics over one (method, k) slice of the report, for one group or
/// for all rows (`group: None`).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: Method,
    pub k: usize,
    pub group: Option<Group>,
    pub explanations: usize,
    pub mean_ncp: f64,
    pub mean_pureness: f64,
    pub mean_k_degree: f64,
    pub mean_elapsed_seconds: f64,
}

fn mean_of<'a, I: Iterator<Item = &'a ReportRow> + Clone>(rows: I) -> Option<AggregateRow> {
    let n = rows.clone().count();
    if n == 0 {
        return None;
    }
    let sum = |f: fn(&ReportRow) -> f64| rows.clone().map(f).sum::<f64>() / n as f64;
    let first = rows.clone().next().unwrap();
    Some(AggregateRow {
        method: first.method,
        k: first.k,
        group: None,
        explanations: n,
        mean_ncp: sum(|r| r.ncp),
        mean_pureness: sum(|r| r.pureness),
        mean_k_degree: sum(|r| r.k_degree as f64),
        mean_elapsed_seconds: sum(|r| r.elapsed_seconds),
    })
}

/// Means per (k, method): one row over all explanations plus one per group
/// present. Ordered by k, then method, then All/Minority/Majority.
pub fn aggregate(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, Method)> = rows.iter().map(|r| (r.k, r.method)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut out = Vec::new();
    for (k, method) in keys {
        let slice = || rows.iter().filter(move |r| r.k == k && r.method == method);
        out.extend(mean_of(slice()));
        for group in [Group::Minority, Group::Majority] {
            if let Some(mut row) = mean_of(slice().filter(|r| r.group == group)) {
                row.group = Some(group);
                out.push(row);
            }
        }
    }
    out
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record([
        "method",
        "k",
        "group",
        "explanations",
        "mean_ncp",
        "mean_pureness",
        "mean_k_degree",
        "mean_elapsed_seconds",
    ])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.k.to_string(),
            r.group.map_or_else(|| "All".to_string(), |g| g.to_string()),
            r.explanations.to_string(),
            f6(r.mean_ncp),
            f6(r.mean_pureness),
            f6(r.mean_k_degree),
            f6(r.mean_elapsed_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one `sorted_ncp_<method>_<k>.csv` per (method, k) present: the
/// per-instance information-loss curve with instances sorted by NCP.
pub fn write_sorted_ncp_curves(dir: &Path, rows: &[ReportRow]) -> Result<Vec<PathBuf>> {
    let mut keys: Vec<(usize, Method)> = rows.iter().map(|r| (r.k, r.method)).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut files = Vec::new();
    for (k, method) in keys {
        let mut points: Vec<(f64, usize)> = rows
            .iter()
            .filter(|r| r.k == k && r.method == method)
            .map(|r| (r.ncp, r.explanation_id))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let path = dir.join(format!("sorted_ncp_{}_{k}.csv", method.file_token()));
        let mut w = open_writer(&path)?;
        w.write_record(["rank", "explanation_id", "ncp"])?;
        for (rank, (ncp, id)) in points.into_iter().enumerate() {
            w.write_record([(rank + 1).to_string(), id.to_string(), f6(ncp)])?;
        }
        w.flush()?;
        files.push(path);
    }
    Ok(files)
}

/// Per-group mean metrics at one k, over the CF-K rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessRow {
    pub k: usize,
    pub group: Group,
    pub explanations: usize,
    pub mean_ncp: f64,
    pub mean_pureness: f64,
}

/// Minority minus majority means at one k; present only when both groups
/// received explanations.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessGapRow {
    pub k: usize,
    pub ncp_gap: f64,
    pub pureness_gap: f64,
}

/// Per-group aggregates and gaps across the report's CF-K rows. Groups with
/// no explanations are omitted rather than reported as zero.
pub fn fairness_report(rows: &[ReportRow]) -> (Vec<FairnessRow>, Vec<FairnessGapRow>) {
    let mut ks: Vec<usize> = rows
        .iter()
        .filter(|r| r.method == Method::Cfk)
        .map(|r| r.k)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let mut per_group = Vec::new();
    let mut gaps = Vec::new();
    for k in ks {
        let mut means = [None, None];
        for (slot, group) in [Group::Minority, Group::Majority].into_iter().enumerate() {
            let slice = rows
                .iter()
                .filter(|r| r.method == Method::Cfk && r.k == k && r.group == group);
            if let Some(agg) = mean_of(slice) {
                per_group.push(FairnessRow {
                    k,
                    group,
                    explanations: agg.explanations,
                    mean_ncp: agg.mean_ncp,
                    mean_pureness: agg.mean_pureness,
                });
                means[slot] = Some((agg.mean_ncp, agg.mean_pureness));
            }
        }
        if let (Some(min), Some(maj)) = (means[0], means[1]) {
            gaps.push(FairnessGapRow {
                k,
                ncp_gap: min.0 - maj.0,
                pureness_gap: min.1 - maj.1,
            });
        }
    }
    (per_group, gaps)
}

pub fn write_fairness(
    dir: &Path,
    per_group: &[FairnessRow],
    gaps: &[FairnessGapRow],
) -> Result<Vec<PathBuf>> {
    let fairness_path = dir.join("fairness.csv");
    let mut w = open_writer(&fairness_path)?;
    w.write_record(["k", "group", "explanations", "mean_ncp", "mean_pureness"])?;
    for r in per_group {
        w.write_record([
            r.k.to_string(),
            r.group.to_string(),
            r.explanations.to_string(),
            f6(r.mean_ncp),
            f6(r.mean_pureness),
        ])?;
    }
    w.flush()?;
    let gap_path = dir.join("fairness_gap.csv");
    let mut w = open_writer(&gap_path)?;
    w.write_record(["k", "ncp_gap", "pureness_gap"])?;
    for r in gaps {
        w.write_record([r.k.to_string(), f6(r.ncp_gap), f6(r.pureness_gap)])?;
    }
    w.flush()?;
    Ok(vec![fairness_path, gap_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: usize, group: Group, method: Method, k: usize, ncp: f64, pureness: f64) -> ReportRow {
        ReportRow {
            explanation_id: id,
            group,
            method,
            k,
            ncp,
            pureness,
            k_degree: k,
            elapsed_seconds: 0.0,
        }
    }

    #[test]
    fn aggregate_emits_all_and_per_group_means() {
        let rows = vec![
            row(0, Group::Minority, Method::Cfk, 5, 0.2, 1.0),
            row(1, Group::Majority, Method::Cfk, 5, 0.4, 0.5),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 3);
        assert_eq!(agg[0].group, None);
        assert_eq!(agg[0].explanations, 2);
        assert!((agg[0].mean_ncp - 0.3).abs() < 1e-12);
        assert_eq!(agg[1].group, Some(Group::Minority));
        assert!((agg[1].mean_ncp - 0.2).abs() < 1e-12);
        assert_eq!(agg[2].group, Some(Group::Majority));
        assert!((agg[2].mean_pureness - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_group_report_has_no_gap() {
        let rows = vec![row(0, Group::Majority, Method::Cfk, 5, 0.2, 1.0)];
        let (per_group, gaps) = fairness_report(&rows);
        assert_eq!(per_group.len(), 1);
        assert_eq!(per_group[0].group, Group::Majority);
        assert!(gaps.is_empty());
    }

    #[test]
    fn gap_is_minority_minus_majority() {
        let rows = vec![
            row(0, Group::Minority, Method::Cfk, 5, 0.5, 0.9),
            row(1, Group::Majority, Method::Cfk, 5, 0.2, 1.0),
            row(1, Group::Majority, Method::Mondrian, 5, 0.9, 0.1),
        ];
        let (per_group, gaps) = fairness_report(&rows);
        assert_eq!(per_group.len(), 2);
        assert_eq!(gaps.len(), 1);
        assert!((gaps[0].ncp_gap - 0.3).abs() < 1e-12);
        assert!((gaps[0].pureness_gap + 0.1).abs() < 1e-12);
    }

    #[test]
    fn report_file_is_deterministic() {
        let rows = vec![
            row(0, Group::Minority, Method::Cfk, 5, 0.25, 1.0),
            row(0, Group::Minority, Method::Mondrian, 5, 0.5, 0.75),
        ];
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_report(&a, &rows).unwrap();
        write_report(&b, &rows).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "explanation_id,group,method,k,ncp,pureness,k_degree,elapsed_seconds"
        );
        assert_eq!(lines.next().unwrap(), "0,Minority,CFK,5,0.250000,1.000000,5,0.000000");
    }

    #[test]
    fn sorted_curves_are_ascending_per_method() {
        let rows = vec![
            row(0, Group::Majority, Method::Cfk, 5, 0.9, 1.0),
            row(1, Group::Majority, Method::Cfk, 5, 0.1, 1.0),
            row(2, Group::Majority, Method::Cfk, 5, 0.5, 1.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let files = write_sorted_ncp_curves(dir.path(), &rows).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].ends_with("sorted_ncp_cfk_5.csv"));
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "1,1,0.100000");
        assert_eq!(lines[2], "2,2,0.500000");
        assert_eq!(lines[3], "3,0,0.900000");
    }
}
