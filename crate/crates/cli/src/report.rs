use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context};

use crate::args::ReportArgs;
use crate::eval::SummaryFile;
use crate::CliError;

#[derive(Debug, Default)]
struct Group {
    runs: usize,
    mean: f64,
    ci95: f64,
    nmi: Vec<f64>,
    ari: Vec<f64>,
}

fn average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

pub fn run(args: ReportArgs) -> Result<(), CliError> {
    if args.summaries.is_empty() {
        return Err(CliError::Usage(anyhow!("no summary files given")));
    }
    let mut groups: BTreeMap<(usize, usize, usize), Group> = BTreeMap::new();
    for input in &args.summaries {
        let path: PathBuf = if input.is_dir() { input.join("summary.json") } else { input.clone() };
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let file: SummaryFile = serde_json::from_str(&text).with_context(|| format!("malformed summary file {}", path.display()))?;
        let s = &file.summary;
        let g = groups.entry((s.n_way, s.k_shot, file.subgraph_size)).or_default();
        g.runs += 1;
        g.mean += s.mean;
        g.ci95 += s.ci95;
        g.nmi.extend(s.nmi);
        g.ari.extend(s.ari);
    }

    let mut csv = String::from("n_way,k_shot,subgraph_size,runs,mean,ci95,nmi,ari\n");
    let mut rows = vec![["n_way", "k_shot", "subgraph_size", "runs", "accuracy", "nmi", "ari"].map(String::from)];
    for ((n, k, s), g) in &groups {
        let runs = g.runs as f64;
        let (mean, ci) = (g.mean / runs, g.ci95 / runs);
        let (nmi, ari) = (average(&g.nmi), average(&g.ari));
        writeln!(csv, "{n},{k},{s},{},{mean},{ci},{},{}", g.runs, nmi.map_or(String::new(), |v| v.to_string()), ari.map_or(String::new(), |v| v.to_string()))
            .expect("write to string");
        rows.push([
            n.to_string(),
            k.to_string(),
            s.to_string(),
            g.runs.to_string(),
            format!("{mean:.4} ± {ci:.4}"),
            fmt_opt(nmi),
            fmt_opt(ari),
        ]);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    for row in &rows {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:>w$}")).collect();
        println!("{}", cells.join("  "));
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("report.csv"));
    std::fs::write(&out, csv).with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
