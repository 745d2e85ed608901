//! CSV and JSON emitters. Floats use Rust's shortest round-trip formatting,
//! so identical results always produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{json, Map, Value};

use super::{SeedRun, TargetSummary};
use crate::aggregation::StrategyTag;
use crate::engine::RoundRecord;

pub const ROUNDS_SCHEMA: &str = "# fedadp-rounds v1";
pub const COMPARE_SCHEMA: &str = "# fedadp-compare v1";
pub const REDUCTION_SCHEMA: &str = "# fedadp-reduction v1";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-round log for one run. Per-node cells are empty for nodes that did
/// not participate in a round.
pub fn rounds_csv(records: &[RoundRecord], strategy: StrategyTag, seed: u64, num_nodes: usize) -> String {
    let mut out = String::new();
    out.push_str(ROUNDS_SCHEMA);
    out.push('\n');
    out.push_str(
        "round,eta,strategy,seed,train_loss,test_accuracy,divergence,empirical_A,empirical_B,chebyshev_lhs,chebyshev_rhs",
    );
    for i in 0..num_nodes {
        let _ = write!(out, ",weight_{i},theta_{i},theta_smoothed_{i}");
    }
    out.push('\n');

    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.eta,
            strategy,
            seed,
            r.train_loss,
            r.test_accuracy,
            r.divergence,
            opt(r.empirical_a),
            opt(r.empirical_b),
            r.chebyshev_lhs,
            r.chebyshev_rhs,
        );
        let mut cells = vec![[String::new(), String::new(), String::new()]; num_nodes];
        for (k, &node) in r.participants.iter().enumerate() {
            cells[node] = [
                r.weights.weights[k].to_string(),
                r.instantaneous_angles[k].to_string(),
                r.smoothed_angles[k].to_string(),
            ];
        }
        for [w, t, s] in cells {
            let _ = write!(out, ",{w},{t},{s}");
        }
        out.push('\n');
    }
    out
}

/// FedAvg and FedAdp curves side by side, one row per `(seed, round)`.
pub fn compare_csv(runs: &[SeedRun]) -> String {
    let mut out = String::new();
    out.push_str(COMPARE_SCHEMA);
    out.push('\n');
    out.push_str(
        "seed,round,fedavg_test_accuracy,fedadp_test_accuracy,fedavg_train_loss,fedadp_train_loss,fedavg_test_loss,fedadp_test_loss,fedavg_divergence,fedadp_divergence\n",
    );
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let find = |strategy, seed| {
        runs.iter()
            .find(|r| r.result.strategy == strategy && r.seed == seed)
            .map(|r| r.result.records.as_slice())
            .unwrap_or(&[])
    };
    for seed in seeds {
        let avg = find(StrategyTag::FedAvg, seed);
        let adp = find(StrategyTag::FedAdp, seed);
        for (a, b) in avg.iter().zip(adp) {
            let _ = writeln!(
                out,
                "{seed},{},{},{},{},{},{},{},{},{}",
                a.round,
                a.test_accuracy,
                b.test_accuracy,
                a.train_loss,
                b.train_loss,
                a.test_loss,
                b.test_loss,
                a.divergence,
                b.divergence,
            );
        }
    }
    out
}

/// Table cell for a median round count, or `N/A (best%)` when the target
/// was not reached.
pub fn rounds_cell(median_rounds: Option<f64>, best_accuracy: f64) -> String {
    match median_rounds {
        Some(r) if r.fract() == 0.0 => format!("{r:.0}"),
        Some(r) => format!("{r:.1}"),
        None => format!("N/A ({:.2}%)", best_accuracy * 100.0),
    }
}

/// Rounds saved by FedAdp relative to FedAvg, e.g. `54.1%`.
pub fn reduction_cell(fedavg_rounds: Option<f64>, fedadp_rounds: Option<f64>) -> String {
    match (fedavg_rounds, fedadp_rounds) {
        (Some(avg), Some(adp)) if avg > 0.0 => format!("{:.1}%", (1.0 - adp / avg) * 100.0),
        _ => "N/A".to_string(),
    }
}

fn target_key(target: f64) -> String {
    target.to_string()
}

pub fn reduction_table(summary: &BTreeMap<StrategyTag, Vec<(f64, TargetSummary)>>) -> String {
    let mut out = String::new();
    out.push_str(REDUCTION_SCHEMA);
    out.push('\n');
    out.push_str("target,fedavg_rounds,fedadp_rounds,reduction\n");
    let empty = Vec::new();
    let avg = summary.get(&StrategyTag::FedAvg).unwrap_or(&empty);
    let adp = summary.get(&StrategyTag::FedAdp).unwrap_or(&empty);
    for ((target, a), (_, b)) in avg.iter().zip(adp) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            target_key(*target),
            rounds_cell(a.median_rounds, a.best_accuracy),
            rounds_cell(b.median_rounds, b.best_accuracy),
            reduction_cell(a.median_rounds, b.median_rounds),
        );
    }
    out
}

/// `{strategy: {target: {median_rounds, best_accuracy}}}`.
pub fn summary_json(summary: &BTreeMap<StrategyTag, Vec<(f64, TargetSummary)>>) -> String {
    let mut root = Map::new();
    for (strategy, targets) in summary {
        let mut per_target = Map::new();
        for (target, s) in targets {
            per_target.insert(
                target_key(*target),
                json!({
                    "median_rounds": s.median_rounds,
                    "best_accuracy": s.best_accuracy,
                }),
            );
        }
        root.insert(strategy.to_string(), Value::Object(per_target));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("serializable");
    text.push('\n');
    text
}
