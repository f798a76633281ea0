use std::fmt::{self, Display, Write as _};

use microhd::cost::ResourceReport;
use microhd::model::HdcConfig;
use microhd::optimizer::{OptTrace, RecordKind};

/// Ordered `key=value` lines.
#[derive(Debug, Default)]
pub struct KeyValues(Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn accuracy(&mut self, key: &str, acc: f64) -> &mut Self {
        self.push(key, format!("{acc:.6}"))
    }

    pub fn config(&mut self, prefix: &str, c: &HdcConfig) -> &mut Self {
        self.push(format!("{prefix}encoder"), c.encoder)
            .push(format!("{prefix}d"), c.dims)
            .push(format!("{prefix}l"), c.levels)
            .push(format!("{prefix}q"), c.bitwidth)
    }

    pub fn resources(&mut self, prefix: &str, c: &HdcConfig) -> &mut Self {
        let r = ResourceReport::of(c);
        self.push(format!("{prefix}memory_bits"), r.memory_bits)
            .push(format!("{prefix}memory_kib"), format!("{:.1}", r.kib()))
            .push(format!("{prefix}memory_kb"), format!("{:.1}", r.kb()))
            .push(format!("{prefix}encode_ops"), r.encode_ops)
            .push(format!("{prefix}inference_ops"), r.inference_ops)
            .push(format!("{prefix}train_ops"), r.train_ops)
    }
}

impl Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Renders a trace as a text table, an accepted-step summary and a CSV block.
pub struct TraceReport {
    pub text: String,
    pub csv: String,
    pub memory_factor: f64,
    pub compute_factor: f64,
}

pub fn trace_report(trace: &OptTrace) -> TraceReport {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>4}  {:<8}  {:>6}  {:>12}  {:>14}  {:>8}  {:>8}  {}",
        "iter", "kind", "step", "memory_bits", "compute_ops", "eval", "floor", "result"
    );
    for r in &trace.records {
        let step = match (r.param, r.value) {
            (Some(p), Some(v)) => format!("{p}={v}"),
            _ => "-".into(),
        };
        let kind = match r.kind {
            RecordKind::Baseline => "baseline",
            RecordKind::Probe => "probe",
        };
        let _ = writeln!(
            text,
            "{:>4}  {:<8}  {:>6}  {:>12}  {:>14}  {:>8.4}  {:>8.4}  {}",
            r.iteration,
            kind,
            step,
            r.memory_bits,
            r.compute_ops,
            r.eval_accuracy,
            r.accuracy_floor,
            if r.accepted { "accepted" } else { "rejected" }
        );
    }
    let accepted: Vec<String> = trace
        .accepted_steps()
        .map(|r| format!("{}={}", r.param.map_or("?".into(), |p| p.to_string()), r.value.unwrap_or(0)))
        .collect();
    let factors = trace.factors();
    let (memory_factor, compute_factor) = factors.map_or((1.0, 1.0), |s| (s.memory_ratio, s.compute_ratio));
    let _ = writeln!(text);
    let _ = writeln!(text, "probes={}", trace.probes());
    let _ = writeln!(text, "accepted_steps={}", if accepted.is_empty() { "none".into() } else { accepted.join(",") });
    if let Some(last) = trace.final_record() {
        let _ = writeln!(text, "final_config={}", last.config);
    }
    let _ = writeln!(text, "compression_factor={memory_factor:.4}");
    let _ = writeln!(text, "workload_reduction_factor={compute_factor:.4}");

    let mut csv = String::from("iteration,kind,param,value,d,l,q,memory_bits,compute_ops,eval_accuracy,accuracy_floor,accepted\n");
    for r in &trace.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{:.6},{:.6},{}",
            r.iteration,
            match r.kind {
                RecordKind::Baseline => "baseline",
                RecordKind::Probe => "probe",
            },
            r.param.map_or(String::new(), |p| p.to_string()),
            r.value.map_or(String::new(), |v| v.to_string()),
            r.config.dims,
            r.config.levels,
            r.config.bitwidth,
            r.memory_bits,
            r.compute_ops,
            r.eval_accuracy,
            r.accuracy_floor,
            r.accepted
        );
    }
    let _ = writeln!(csv);
    let _ = writeln!(csv, "metric,factor");
    let _ = writeln!(csv, "compression,{memory_factor:.6}");
    let _ = writeln!(csv, "workload_reduction,{compute_factor:.6}");
    TraceReport { text, csv, memory_factor, compute_factor }
}

#[cfg(test)]
mod tests {
    use super::*;
    use microhd::optimizer::{Param, TraceRecord};

    fn record(iteration: usize, dims: usize, accepted: bool) -> TraceRecord {
        let config = HdcConfig::id_level(10, 3, dims, 16, 8);
        let r = ResourceReport::of(&config);
        TraceRecord {
            iteration,
            kind: if iteration == 0 { RecordKind::Baseline } else { RecordKind::Probe },
            param: (iteration > 0).then_some(Param::D),
            value: (iteration > 0).then_some(dims),
            memory_ratio: 1.0,
            compute_ratio: 1.0,
            eval_accuracy: 0.9,
            accuracy_floor: 0.89,
            accepted,
            config,
            memory_bits: r.memory_bits,
            compute_ops: r.total_ops(),
        }
    }

    #[test]
    fn no_accepted_steps_means_unit_factors() {
        let t = OptTrace { records: vec![record(0, 1000, true), record(1, 500, false)] };
        let r = trace_report(&t);
        assert_eq!((r.memory_factor, r.compute_factor), (1.0, 1.0));
        assert!(r.text.contains("accepted_steps=none"));
    }

    #[test]
    fn one_halving_of_d() {
        let t = OptTrace { records: vec![record(0, 1000, true), record(1, 500, true)] };
        let r = trace_report(&t);
        assert_eq!(r.memory_factor, 2.0);
        assert_eq!(r.compute_factor, 2.0);
        assert!(r.csv.contains("compression,2.000000"));
        assert!(r.text.contains("accepted_steps=d=500"));
    }
}
