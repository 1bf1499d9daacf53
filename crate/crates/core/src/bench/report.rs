//! Aggregation of RunRecords into mean ± sample-std summary cells, table
//! rendering, and the rank-correlation helper for the confidence-accuracy
//! diagnostic.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::expert::Split;
use crate::streamgen::Setup;

use super::{aggregate_incremental, RunRecord};

#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub method: String,
    pub setup: Setup,
    pub split: Split,
    /// One of sr_last, sr_avg, gc_last, gc_avg.
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
    /// Groups that could not be aggregated (reported, never fabricated).
    pub missing: Vec<String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Collapse records to per-(method, setup, split) cells: each run
/// contributes its incremental A_last/A_avg, averaged across seeds and
/// orderings. Joint runs carry no incremental trajectory, so their avg
/// metrics are omitted.
pub fn summarize(records: &[RunRecord]) -> Summary {
    type RunKey = (String, Setup, String, u64, Split);
    let mut runs: BTreeMap<RunKey, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for r in records {
        runs.entry((
            r.method.clone(),
            r.setup,
            r.ordering_id.clone(),
            r.seed,
            r.split,
        ))
        .or_default()
        .push((r.task_index, r.sr, r.gc));
    }

    type CellKey = (String, Setup, Split);
    let mut acc: BTreeMap<CellKey, BTreeMap<&'static str, Vec<f64>>> = BTreeMap::new();
    let mut missing = Vec::new();
    for ((method, setup, ordering, seed, split), mut series) in runs {
        series.sort_by_key(|&(i, _, _)| i);
        let sr: Vec<f64> = series.iter().map(|&(_, s, _)| s).collect();
        let gc: Vec<f64> = series.iter().map(|&(_, _, g)| g).collect();
        let (Ok((sr_last, sr_avg)), Ok((gc_last, gc_avg))) =
            (aggregate_incremental(&sr), aggregate_incremental(&gc))
        else {
            missing.push(format!("{method}/{ordering}/s{seed}/{split:?}: empty run"));
            continue;
        };
        let joint = method == "joint";
        let slot = acc.entry((method, setup, split)).or_default();
        slot.entry("sr_last").or_default().push(sr_last);
        slot.entry("gc_last").or_default().push(gc_last);
        if !joint {
            slot.entry("sr_avg").or_default().push(sr_avg);
            slot.entry("gc_avg").or_default().push(gc_avg);
        }
    }

    let mut cells = Vec::new();
    for ((method, setup, split), metrics) in acc {
        for (metric, vals) in metrics {
            let (mean, std) = mean_std(&vals);
            cells.push(SummaryCell {
                method: method.clone(),
                setup,
                split,
                metric: metric.to_string(),
                mean,
                std,
                n: vals.len(),
            });
        }
    }
    Summary { cells, missing }
}

fn lookup<'a>(
    s: &'a Summary,
    method: &str,
    setup: Setup,
    split: Split,
    metric: &str,
) -> Option<&'a SummaryCell> {
    s.cells.iter().find(|c| {
        c.method == method && c.setup == setup && c.split == split && c.metric == metric
    })
}

/// Fixed-width report table; absent cells (joint averages) render "-".
pub fn format_table(s: &Summary) -> String {
    let mut keys: Vec<(String, Setup, Split)> = s
        .cells
        .iter()
        .map(|c| (c.method.clone(), c.setup, c.split))
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:<14} {:<12} {:>15} {:>15} {:>15} {:>15}\n",
        "method", "setup", "split", "SR_last", "SR_avg", "GC_last", "GC_avg"
    ));
    for (method, setup, split) in keys {
        let fmt = |metric: &str| -> String {
            match lookup(s, &method, setup, split, metric) {
                Some(c) => format!("{:.3} ± {:.3}", c.mean, c.std),
                None => "-".to_string(),
            }
        };
        out.push_str(&format!(
            "{:<12} {:<14} {:<12} {:>15} {:>15} {:>15} {:>15}\n",
            method,
            format!("{setup:?}"),
            format!("{split:?}"),
            fmt("sr_last"),
            fmt("sr_avg"),
            fmt("gc_last"),
            fmt("gc_avg"),
        ));
    }
    for m in &s.missing {
        out.push_str(&format!("missing: {m}\n"));
    }
    out
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Average rank over ties (1-based).
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average-tie ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mx = rx.iter().sum::<f64>() / rx.len() as f64;
    let my = ry.iter().sum::<f64>() / ry.len() as f64;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..rx.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if dx == 0.0 || dy == 0.0 {
        0.0
    } else {
        num / (dx * dy).sqrt()
    }
}
