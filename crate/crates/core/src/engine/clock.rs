use super::{DecodeEvent, DecodeResult, EventKind};
use crate::source::SourceSequence;
use crate::trace::Action;

/// Cost of one provider consultation in the simulated timeline.
#[derive(Debug, Clone, PartialEq)]
pub enum ComputeModel {
    Zero,
    /// Fixed milliseconds per consultation.
    Constant(f64),
    /// Use the durations measured during the decode.
    Measured,
    /// Explicit per-consultation durations, in consultation order.
    PerCall(Vec<f64>),
}

impl ComputeModel {
    fn cost(&self, index: usize, result: &DecodeResult) -> f64 {
        match self {
            ComputeModel::Zero => 0.0,
            ComputeModel::Constant(ms) => *ms,
            ComputeModel::Measured => result.step_compute_ms.get(index).copied().unwrap_or(0.0),
            ComputeModel::PerCall(costs) => costs.get(index).copied().unwrap_or(0.0),
        }
    }
}

/// Replays a decode against real-time source arrival.
///
/// Element `s` arrives at `s * segment_ms` (speech) or `s * text_interval_ms`
/// (text). Consultations run one at a time: each starts once its source
/// element has arrived and the previous one has finished, and an emission
/// lands when its consultation ends. Results without per-step diagnostics
/// are replayed as one consultation per emission.
pub fn simulate_clock(
    result: &DecodeResult,
    source: &SourceSequence,
    compute: &ComputeModel,
    text_interval_ms: f64,
) -> Vec<DecodeEvent> {
    let interval = source.segment_ms().map(f64::from).unwrap_or(text_interval_ms);
    let arrival = |read: usize| read as f64 * interval;

    // (step, read, is_write)
    let consultations: Vec<(usize, usize, bool)> = if result.trace.steps.is_empty() {
        result
            .trace
            .g
            .iter()
            .enumerate()
            .map(|(i, &g)| (i + 1, g, true))
            .collect()
    } else {
        result
            .trace
            .steps
            .iter()
            .map(|s| (s.step, s.read, s.action == Action::Write))
            .collect()
    };

    let mut events: Vec<DecodeEvent> = (1..=result.source_len)
        .map(|read| DecodeEvent {
            wall_time_ms: arrival(read),
            kind: EventKind::SourceArrival { read },
        })
        .collect();

    let mut busy_until = 0.0f64;
    for (index, &(step, read, is_write)) in consultations.iter().enumerate() {
        let cost = compute.cost(index, result).max(0.0);
        let start = arrival(read).max(busy_until);
        let end = start + cost;
        events.push(DecodeEvent {
            wall_time_ms: start,
            kind: EventKind::ProviderCall {
                read,
                prefix_len: step - 1,
                duration_ms: cost,
            },
        });
        if is_write {
            let token = result.tokens.get(step - 1).copied().unwrap_or(result.eos_id);
            events.push(DecodeEvent {
                wall_time_ms: end,
                kind: EventKind::Emission { step, token, read },
            });
        }
        busy_until = end;
    }

    events.sort_by(|a, b| a.wall_time_ms.total_cmp(&b.wall_time_ms));
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PolicyKind;
    use crate::trace::PolicyTrace;

    fn result_with_g(g: Vec<usize>, source_len: usize) -> DecodeResult {
        DecodeResult {
            policy: PolicyKind::Offline,
            tokens: (0..g.len()).collect(),
            trace: PolicyTrace { g, steps: vec![] },
            events: vec![],
            logprobs: vec![],
            source_len,
            eos_id: 99,
            truncated: false,
            step_compute_ms: vec![],
        }
    }

    fn emissions(events: &[DecodeEvent]) -> Vec<f64> {
        events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Emission { .. }))
            .map(|e| e.wall_time_ms)
            .collect()
    }

    #[test]
    fn zero_compute_follows_arrivals() {
        let src = SourceSequence::speech(["a", "b"], 640).unwrap();
        let ev = simulate_clock(&result_with_g(vec![1, 2], 2), &src, &ComputeModel::Zero, 0.0);
        assert_eq!(emissions(&ev), vec![640.0, 1280.0]);
    }

    #[test]
    fn constant_compute_chains() {
        let src = SourceSequence::speech(["a"], 640).unwrap();
        let ev = simulate_clock(&result_with_g(vec![1, 1], 1), &src, &ComputeModel::Constant(100.0), 0.0);
        // 640 + 100, then 740 + 100
        assert_eq!(emissions(&ev), vec![740.0, 840.0]);
    }

    #[test]
    fn slow_compute_dominates() {
        let src = SourceSequence::speech(["a", "b", "c"], 100).unwrap();
        let ev = simulate_clock(
            &result_with_g(vec![1, 2, 3], 3),
            &src,
            &ComputeModel::Constant(250.0),
            0.0,
        );
        let times = emissions(&ev);
        assert_eq!(times, vec![350.0, 600.0, 850.0]);
        assert!(ev.windows(2).all(|w| w[0].wall_time_ms <= w[1].wall_time_ms));
    }
}
