//! Usage accounting per model.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::Price;
use crate::types::Usage;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelTotals {
    pub calls: u64,
    pub failures: u64,
    pub attempts: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub total_latency_s: f64,
}

impl ModelTotals {
    /// Mean latency of successful calls.
    pub fn avg_latency_s(&self) -> Option<f64> {
        let ok = self.calls - self.failures;
        (ok > 0).then(|| self.total_latency_s / ok as f64)
    }

    pub fn cost_usd(&self, price: &Price) -> f64 {
        (self.input_tokens as f64 * price.input_per_mtok + self.output_tokens as f64 * price.output_per_mtok) / 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    #[serde(flatten)]
    pub totals: ModelTotals,
    pub avg_latency_s: Option<f64>,
    /// None when the model has no price entry.
    pub cost_usd: Option<f64>,
}

#[derive(Debug, Default)]
pub struct UsageLedger {
    totals: Mutex<BTreeMap<String, ModelTotals>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_success(&self, model: &str, usage: Usage, latency_s: f64, attempts: u32) {
        let mut all = self.totals.lock().unwrap();
        let t = all.entry(model.to_string()).or_default();
        t.calls += 1;
        t.attempts += u64::from(attempts);
        t.input_tokens += usage.input_tokens;
        t.output_tokens += usage.output_tokens;
        t.total_latency_s += latency_s;
    }

    pub fn record_failure(&self, model: &str, attempts: u32) {
        let mut all = self.totals.lock().unwrap();
        let t = all.entry(model.to_string()).or_default();
        t.calls += 1;
        t.failures += 1;
        t.attempts += u64::from(attempts);
    }

    pub fn totals(&self, model: &str) -> Option<ModelTotals> {
        self.totals.lock().unwrap().get(model).cloned()
    }

    /// One row per model, sorted by model name.
    pub fn report(&self, prices: &BTreeMap<String, Price>) -> Vec<ModelReport> {
        self.totals
            .lock()
            .unwrap()
            .iter()
            .map(|(model, t)| ModelReport {
                model: model.clone(),
                avg_latency_s: t.avg_latency_s(),
                cost_usd: prices.get(model).map(|p| t.cost_usd(p)),
                totals: t.clone(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_cost() {
        let l = UsageLedger::new();
        let u = |i, o| Usage {
            input_tokens: i,
            output_tokens: o,
        };
        l.record_success("m", u(1_000, 200), 1.0, 1);
        l.record_success("m", u(3_000, 600), 3.0, 3);
        l.record_failure("m", 4);
        let t = l.totals("m").unwrap();
        assert_eq!((t.calls, t.failures, t.attempts), (3, 1, 8));
        assert_eq!((t.input_tokens, t.output_tokens), (4_000, 800));
        assert_eq!(t.avg_latency_s(), Some(2.0));
        let prices = BTreeMap::from([(
            "m".to_string(),
            Price {
                input_per_mtok: 2.5,
                output_per_mtok: 10.0,
            },
        )]);
        let r = l.report(&prices);
        assert!((r[0].cost_usd.unwrap() - 0.018).abs() < 1e-12);
        assert_eq!(l.report(&BTreeMap::new())[0].cost_usd, None);
    }
}
