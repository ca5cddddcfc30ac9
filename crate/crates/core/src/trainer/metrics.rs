//! Per-step training records as tab-separated text with a header line.

use std::fmt::Write as _;

use crate::error::{EvpoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub method: String,
    pub per_group_ev: Vec<f64>,
    /// Pooled over every step of every group in the batch.
    pub batch_ev: f64,
    pub gate_critic_fraction: f64,
    pub train_success_rate: f64,
    pub actor_grad_norm: f64,
    pub critic_loss: f64,
    pub val_success_rate: Option<f64>,
    pub threshold: f64,
    /// Step-weighted within-group advantage variance of the baseline used.
    pub adv_var_chosen: f64,
    /// Same rollouts under the other baseline.
    pub adv_var_rejected: f64,
}

pub const FIELDS: [&str; 12] = [
    "step",
    "method",
    "per_group_ev",
    "batch_ev",
    "gate_critic_fraction",
    "train_success_rate",
    "actor_grad_norm",
    "critic_loss",
    "val_success_rate",
    "threshold",
    "adv_var_chosen",
    "adv_var_rejected",
];

impl MetricsRecord {
    pub fn header() -> String {
        FIELDS.join("\t")
    }

    /// One line, no trailing newline. Reals are written in their shortest
    /// exact form so equal runs give equal bytes.
    pub fn to_line(&self) -> String {
        let mut s = format!("{}\t{}\t", self.step, self.method);
        let evs: Vec<String> = self.per_group_ev.iter().map(f64::to_string).collect();
        s.push_str(&evs.join(";"));
        let _ = write!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.batch_ev,
            self.gate_critic_fraction,
            self.train_success_rate,
            self.actor_grad_norm,
            self.critic_loss,
            self.val_success_rate.map(|v| v.to_string()).unwrap_or_default(),
            self.threshold,
            self.adv_var_chosen,
            self.adv_var_rejected
        );
        s
    }

    /// Inverse of [`Self::to_line`]; `lineno` only feeds error messages.
    pub fn parse_line(line: &str, lineno: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |column: usize, message: String| EvpoError::Config { line: lineno, column, message };
        if fields.len() != FIELDS.len() {
            return Err(err(1, format!("expected {} fields, got {}", FIELDS.len(), fields.len())));
        }
        let real =
            |i: usize| -> Result<f64> { fields[i].parse().map_err(|e| err(i + 1, format!("{}: {e}", FIELDS[i]))) };
        let per_group_ev = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(';')
                .map(|x| x.parse().map_err(|e| err(3, format!("per_group_ev: {e}"))))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            step: fields[0].parse().map_err(|e| err(1, format!("step: {e}")))?,
            method: fields[1].to_string(),
            per_group_ev,
            batch_ev: real(3)?,
            gate_critic_fraction: real(4)?,
            train_success_rate: real(5)?,
            actor_grad_norm: real(6)?,
            critic_loss: real(7)?,
            val_success_rate: if fields[8].is_empty() { None } else { Some(real(8)?) },
            threshold: real(9)?,
            adv_var_chosen: real(10)?,
            adv_var_rejected: real(11)?,
        })
    }
}

/// Reads a whole metrics file, header included.
pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MetricsRecord::header() => {}
        _ => return Err(EvpoError::Config { line: 1, column: 1, message: "missing metrics header".into() }),
    }
    lines.enumerate().filter(|(_, l)| !l.is_empty()).map(|(i, l)| MetricsRecord::parse_line(l, i + 2)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> MetricsRecord {
        MetricsRecord {
            step: 3,
            method: "evpo".into(),
            per_group_ev: vec![0.1, -1.0 / 3.0, 0.0],
            batch_ev: 0.25,
            gate_critic_fraction: 1.0 / 3.0,
            train_success_rate: 0.5,
            actor_grad_norm: 1e-300,
            critic_loss: 0.2,
            val_success_rate: None,
            threshold: -0.1,
            adv_var_chosen: 0.1,
            adv_var_rejected: 0.3,
        }
    }

    #[test]
    fn line_round_trip() {
        let mut r = record();
        assert_eq!(MetricsRecord::parse_line(&r.to_line(), 2).unwrap(), r);
        r.val_success_rate = Some(0.75);
        r.per_group_ev.clear();
        assert_eq!(MetricsRecord::parse_line(&r.to_line(), 2).unwrap(), r);
    }

    #[test]
    fn malformed_lines_report_position() {
        let text = format!("{}\n{}\n3\tevpo\n", MetricsRecord::header(), record().to_line());
        let err = parse_metrics(&text).unwrap_err();
        assert!(matches!(err, EvpoError::Config { line: 3, .. }), "{err:?}");
        assert!(parse_metrics("step\n").is_err());
        let bad = record().to_line().replace("0.25", "x");
        assert!(MetricsRecord::parse_line(&bad, 9).unwrap_err().to_string().contains("batch_ev"));
    }
}
