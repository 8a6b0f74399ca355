//! Aggregates persisted run records into a per-method summary.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::HierarchyTree;
use crate::error::{Error, Result};
use crate::harness::config::Method;
use crate::harness::metrics::{mean_spread, time_reduction};
use crate::harness::run::{newick_for, structure_score, RunRecord, RECORDS_FILE};

pub const REPORT_FILE: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
/// Placeholder for a method that never reaches the reference accuracy.
pub const NOT_REACHED: &str = "–";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub best_test_acc: f64,
    pub auac: f64,
    pub best_epoch: usize,
    /// `None` when there is no reference run or it is never reached.
    pub time_reduction: Option<u32>,
    pub correlation_score: Option<f64>,
    pub newick: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub spread: f64,
    /// How many seeds contributed.
    pub count: usize,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        mean_spread(values).map(|(mean, spread)| Stat {
            mean,
            spread,
            count: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub rows: Vec<SeedRow>,
    pub best_test_acc: Stat,
    pub auac: Stat,
    pub time_reduction: Option<Stat>,
    pub correlation_score: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub methods: Vec<MethodSummary>,
}

/// Builds the summary. Time reduction compares each run against the
/// `std` run with the same seed (the n-th occurrence of a seed is paired
/// with the n-th `std` occurrence).
pub fn summarize(records: &[RunRecord], trees: &HashMap<PathBuf, HierarchyTree>) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Usage("report needs at least one run record".into()));
    }
    let mut reference: HashMap<(u64, usize), &RunRecord> = HashMap::new();
    let mut seen: HashMap<(Method, u64), usize> = HashMap::new();
    let mut occurrence = Vec::with_capacity(records.len());
    for r in records {
        let n = seen.entry((r.method, r.seed)).or_insert(0);
        occurrence.push(*n);
        if r.method == Method::Std {
            reference.insert((r.seed, *n), r);
        }
        *n += 1;
    }

    let mut grouped: BTreeMap<Method, Vec<SeedRow>> = BTreeMap::new();
    for (r, occ) in records.iter().zip(occurrence) {
        let table = r.label_table()?;
        let time_reduction = match reference.get(&(r.seed, occ)) {
            Some(std) => time_reduction(&r.curve(), &std.curve())?,
            None => None,
        };
        let correlation_score = match &r.hierarchy {
            Some(p) => {
                let tree = trees.get(p).expect("every referenced hierarchy is loaded");
                Some(structure_score(&table, &r.class_names, tree)?.score.mean)
            }
            None => None,
        };
        grouped.entry(r.method).or_default().push(SeedRow {
            seed: r.seed,
            best_test_acc: r.best_test_acc,
            auac: r.auac,
            best_epoch: r.best_epoch,
            time_reduction,
            correlation_score,
            newick: newick_for(&table, &r.class_names)?,
        });
    }

    let methods = grouped
        .into_iter()
        .map(|(method, rows)| {
            let col = |f: &dyn Fn(&SeedRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
            MethodSummary {
                method,
                best_test_acc: Stat::of(&col(&|r| Some(r.best_test_acc))).expect("non-empty group"),
                auac: Stat::of(&col(&|r| Some(r.auac))).expect("non-empty group"),
                time_reduction: Stat::of(&col(&|r| r.time_reduction.map(f64::from))),
                correlation_score: Stat::of(&col(&|r| r.correlation_score)),
                rows,
            }
        })
        .collect();
    Ok(Report { methods })
}

fn fmt_stat(s: &Stat, decimals: usize) -> String {
    format!("{:.*} ± {:.*}", decimals, s.mean, decimals, s.spread)
}

pub fn render(report: &Report) -> String {
    let mut out = String::new();
    for m in &report.methods {
        let n = m.rows.len();
        let _ = writeln!(out, "[{}]", m.method);
        let seeds: Vec<String> = m.rows.iter().map(|r| r.seed.to_string()).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        let _ = writeln!(out, "best_test_acc = {}", fmt_stat(&m.best_test_acc, 4));
        let _ = writeln!(out, "auac = {}", fmt_stat(&m.auac, 4));
        match &m.time_reduction {
            Some(s) => {
                let _ = writeln!(out, "time_reduction_pct = {} (reached on {}/{n})", fmt_stat(s, 1), s.count);
            }
            None => {
                let _ = writeln!(out, "time_reduction_pct = {NOT_REACHED}");
            }
        }
        if let Some(s) = &m.correlation_score {
            let _ = writeln!(out, "correlation_score = {}", fmt_stat(s, 4));
        }
        for r in &m.rows {
            let tr = r.time_reduction.map_or(NOT_REACHED.to_string(), |v| v.to_string());
            let _ = write!(
                out,
                "  seed={} best_test_acc={:.4} auac={:.4} best_epoch={} time_reduction_pct={tr}",
                r.seed, r.best_test_acc, r.auac, r.best_epoch
            );
            if let Some(c) = r.correlation_score {
                let _ = write!(out, " correlation_score={c:.4}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Finds `records.json` in `dir` and its immediate subdirectories, in
/// path order.
pub fn collect_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut files = Vec::new();
    let own = dir.join(RECORDS_FILE);
    if own.is_file() {
        files.push(own);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    files.extend(subdirs.into_iter().map(|d| d.join(RECORDS_FILE)).filter(|p| p.is_file()));
    if files.is_empty() {
        return Err(Error::Data(format!("no {RECORDS_FILE} under {}", dir.display())));
    }
    let mut records = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?;
        let mut batch: Vec<RunRecord> = serde_json::from_str(&text).map_err(|e| Error::format(&f, e.to_string()))?;
        records.append(&mut batch);
    }
    Ok(records)
}

/// Regenerates the report for a runs directory: writes `report.txt`,
/// `report.json` and one Newick dendrogram per run, and returns the text.
pub fn report_dir(dir: &Path) -> Result<String> {
    let records = collect_records(dir)?;
    let mut trees = HashMap::new();
    for p in records.iter().filter_map(|r| r.hierarchy.as_ref()) {
        if !trees.contains_key(p) {
            trees.insert(p.clone(), HierarchyTree::load(p)?);
        }
    }
    let report = summarize(&records, &trees)?;
    let text = render(&report);
    let write = |name: &str, contents: &str| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    };
    write(REPORT_FILE, &text)?;
    write(REPORT_JSON, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    for m in &report.methods {
        for (i, r) in m.rows.iter().enumerate() {
            write(&format!("dendrogram_{}_{i}_seed{}.newick", m.method, r.seed), &format!("{}\n", r.newick))?;
        }
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::EpochMetrics;

    fn record(method: Method, seed: u64, curve: &[f64]) -> RunRecord {
        let best = curve.iter().copied().fold(f64::MIN, f64::max);
        RunRecord {
            method,
            seed,
            epochs: curve
                .iter()
                .enumerate()
                .map(|(i, &a)| EpochMetrics {
                    seed,
                    epoch: i + 1,
                    train_loss: 1.0,
                    test_acc: a,
                    wall_ms: 0.0,
                })
                .collect(),
            best_test_acc: best,
            best_epoch: curve.iter().position(|&a| a == best).unwrap() + 1,
            auac: curve.iter().sum::<f64>() / curve.len() as f64,
            class_names: vec!["a".into(), "b".into(), "c".into()],
            labels: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 3.0]],
            hierarchy: None,
        }
    }

    #[test]
    fn single_seed_has_zero_spread() {
        let r = summarize(&[record(Method::Lwal, 1, &[0.5, 0.7])], &HashMap::new()).unwrap();
        assert_eq!(r.methods[0].best_test_acc.spread, 0.0);
        assert!(r.methods[0].time_reduction.is_none());
        assert!(render(&r).contains("time_reduction_pct = –"));
    }

    #[test]
    fn repeated_seeds_give_identical_rows() {
        let recs = vec![
            record(Method::Std, 7, &[0.2, 0.6, 0.8, 0.8]),
            record(Method::Std, 7, &[0.2, 0.6, 0.8, 0.8]),
            record(Method::LwalRpl, 7, &[0.5, 0.8, 0.9, 0.9]),
            record(Method::LwalRpl, 7, &[0.5, 0.8, 0.9, 0.9]),
        ];
        let r = summarize(&recs, &HashMap::new()).unwrap();
        assert_eq!(r.methods.len(), 2);
        let rpl = &r.methods[1];
        assert_eq!(rpl.method, Method::LwalRpl);
        assert_eq!(rpl.rows[0], rpl.rows[1]);
        assert_eq!(rpl.best_test_acc.spread, 0.0);
        // reaches 0.8 at epoch 2 of 4
        assert_eq!(rpl.rows[0].time_reduction, Some(50));
        // std against itself: best first reached at epoch 3 of 4
        assert_eq!(r.methods[0].rows[0].time_reduction, Some(25));
    }

    #[test]
    fn regeneration_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record(Method::Std, 1, &[0.3, 0.4]), record(Method::Lwal, 1, &[0.4, 0.5])];
        fs::write(dir.path().join(RECORDS_FILE), serde_json::to_string(&recs).unwrap()).unwrap();
        let a = report_dir(dir.path()).unwrap();
        let b = report_dir(dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap(), a);
    }
}
