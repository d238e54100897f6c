use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prepare, train_on, RunConfig, RunError};

/// A loss term that an ablation row can switch off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    CIn,
    CCode,
    CodeCond,
    Length,
    MaskCond,
    Cat,
}

impl Term {
    pub const ALL: [Term; 6] = [
        Term::CIn,
        Term::CCode,
        Term::CodeCond,
        Term::Length,
        Term::MaskCond,
        Term::Cat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::CIn => "c_in",
            Term::CCode => "c_code",
            Term::CodeCond => "code_cond",
            Term::Length => "length",
            Term::MaskCond => "mask_cond",
            Term::Cat => "cat",
        }
    }

    fn zero(self, cfg: &mut RunConfig) {
        let w = &mut cfg.weights;
        match self {
            Term::CIn => w.alpha = 0.0,
            Term::CCode => w.beta = 0.0,
            Term::CodeCond => w.zeta = 0.0,
            Term::Length => w.delta = 0.0,
            Term::MaskCond => w.mu = 0.0,
            Term::Cat => w.gamma = 0.0,
        }
    }
}

impl FromStr for Term {
    type Err = RunError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| {
                RunError::Config(format!(
                    "unknown loss term {s:?}; expected one of c_in, c_code, code_cond, length, mask_cond, cat"
                ))
            })
    }
}

/// Parses `"c_code,length"` into a set of disabled terms; `""` and
/// `"full"` mean none.
pub fn parse_row(s: &str) -> Result<Vec<Term>, RunError> {
    let s = s.trim();
    if s.is_empty() || s == "full" {
        return Ok(Vec::new());
    }
    let mut terms: Vec<Term> = s.split(',').map(Term::from_str).collect::<Result<_, _>>()?;
    terms.sort();
    terms.dedup();
    Ok(terms)
}

/// Full model plus one row per single term removed.
pub fn leave_one_out_rows() -> Vec<Vec<Term>> {
    std::iter::once(Vec::new())
        .chain(Term::ALL.iter().map(|&t| vec![t]))
        .collect()
}

pub fn row_name(off: &[Term]) -> String {
    if off.is_empty() {
        "full".into()
    } else {
        let names: Vec<String> = off.iter().map(|t| format!("-{}", t.name())).collect();
        names.join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub acc_all: f64,
    pub acc_known: f64,
    pub acc_novel: f64,
    pub purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub off: Vec<Term>,
    pub runs: Vec<SeedRun>,
}

fn mean_sd(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let m = v.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        v.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

impl AblationRow {
    pub fn is_on(&self, t: Term) -> bool {
        !self.off.contains(&t)
    }

    /// Mean and sample standard deviation of `acc_all` across seeds.
    pub fn acc_all(&self) -> (f64, f64) {
        mean_sd(self.runs.iter().map(|r| r.acc_all))
    }

    pub fn acc_known(&self) -> (f64, f64) {
        mean_sd(self.runs.iter().map(|r| r.acc_known))
    }

    pub fn acc_novel(&self) -> (f64, f64) {
        mean_sd(self.runs.iter().map(|r| r.acc_novel))
    }

    pub fn purity(&self) -> (f64, f64) {
        mean_sd(self.runs.iter().map(|r| r.purity))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Table with one check column per loss term and mean accuracies.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<22}", "row");
        for t in Term::ALL {
            let _ = write!(out, " {:>9}", t.name());
        }
        let _ = writeln!(out, " {:>13} {:>13} {:>13} {:>7}", "all", "known", "novel", "purity");
        for r in &self.rows {
            let _ = write!(out, "{:<22}", r.name);
            for t in Term::ALL {
                let _ = write!(out, " {:>9}", if r.is_on(t) { "on" } else { "off" });
            }
            let (a, asd) = r.acc_all();
            let (k, ksd) = r.acc_known();
            let (n, nsd) = r.acc_novel();
            let (p, _) = r.purity();
            let _ = writeln!(
                out,
                " {:>6.1}±{:<5.1} {:>6.1}±{:<5.1} {:>6.1}±{:<5.1} {:>7.3}",
                100.0 * a,
                100.0 * asd,
                100.0 * k,
                100.0 * ksd,
                100.0 * n,
                100.0 * nsd,
                p
            );
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string()];
        header.extend(Term::ALL.iter().map(|t| t.name().to_string()));
        header.extend(
            ["seeds", "acc_all", "acc_all_sd", "acc_known", "acc_novel", "purity"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![r.name.clone()];
            rec.extend(Term::ALL.iter().map(|&t| (r.is_on(t) as u8).to_string()));
            let (a, asd) = r.acc_all();
            rec.push(r.runs.len().to_string());
            rec.push(format!("{a:.4}"));
            rec.push(format!("{asd:.4}"));
            rec.push(format!("{:.4}", r.acc_known().0));
            rec.push(format!("{:.4}", r.acc_novel().0));
            rec.push(format!("{:.4}", r.purity().0));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8 csv")
    }
}

/// Reruns `cfg` once per (row, seed) with the row's terms switched off.
/// Runs execute in parallel and write no files.
pub fn ablate(cfg: &RunConfig, rows: &[Vec<Term>], seeds: &[u64]) -> Result<AblationReport, RunError> {
    let seeds: Vec<u64> = if seeds.is_empty() { vec![cfg.seed] } else { seeds.to_vec() };
    let jobs: Vec<(usize, u64)> = (0..rows.len())
        .flat_map(|r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<Result<SeedRun, RunError>> = jobs
        .par_iter()
        .map(|&(r, seed)| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.out_dir = None;
            c.eval_every = 0;
            for t in &rows[r] {
                t.zero(&mut c);
            }
            let (ds, split) = prepare(&c)?;
            let res = train_on(&c, &ds, &split)?;
            let m = res.headline();
            Ok(SeedRun {
                seed,
                acc_all: m.acc_all,
                acc_known: m.acc_known,
                acc_novel: m.acc_novel,
                purity: res.tree.mean_purity,
            })
        })
        .collect();
    let mut report = AblationReport {
        rows: rows
            .iter()
            .map(|off| AblationRow {
                name: row_name(off),
                off: off.clone(),
                runs: Vec::new(),
            })
            .collect(),
    };
    for (&(r, _), res) in jobs.iter().zip(results) {
        report.rows[r].runs.push(res?);
    }
    Ok(report)
}
