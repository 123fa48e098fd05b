//! Trace file ingestion: timestamped overrides for link delay, link
//! bandwidth and server processing delay.
//!
//! CSV format, one event per row, header `time_ms,target,field,value`.
//! A link target is written `SRC->DST` with the node names from the
//! configuration; a server target is the bare node name.

use std::fmt;
use std::io::Read;

use crate::netmodel::{NetworkGraph, NodeRole};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceField {
    Delay,
    Bandwidth,
    ProcessingDelay,
}

impl TraceField {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delay" => Some(TraceField::Delay),
            "bandwidth" => Some(TraceField::Bandwidth),
            "processing_delay" => Some(TraceField::ProcessingDelay),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TraceField::Delay => "delay",
            TraceField::Bandwidth => "bandwidth",
            TraceField::ProcessingDelay => "processing_delay",
        }
    }
}

impl fmt::Display for TraceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timed override. Times must be non-decreasing within a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub target: String,
    pub field: TraceField,
    pub value: f64,
}

/// Parses a trace CSV, reporting the offending line number on error.
pub fn parse_trace_csv<R: Read>(reader: R) -> Result<Vec<TraceEvent>, SimError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    {
        let headers = csv_reader.headers().map_err(|e| SimError::TraceParse {
            line: 1,
            message: e.to_string(),
        })?;
        let expected = ["time_ms", "target", "field", "value"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(SimError::TraceParse {
                line: 1,
                message: format!("header must be `{}`", expected.join(",")),
            });
        }
    }
    let mut events = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for record in csv_reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            SimError::TraceParse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fail = |message: String| SimError::TraceParse { line, message };
        if record.len() != 4 {
            return Err(fail(format!("expected 4 fields, got {}", record.len())));
        }
        let time: f64 = record[0]
            .parse()
            .map_err(|_| fail(format!("bad time `{}`", &record[0])))?;
        if !time.is_finite() || time < 0.0 {
            return Err(fail(format!("time {time} must be a non-negative number")));
        }
        if time < last_time {
            return Err(fail(format!(
                "time {time} goes backwards (previous event at {last_time})"
            )));
        }
        last_time = time;
        let field = TraceField::parse(&record[2]).ok_or_else(|| {
            fail(format!(
                "unknown field `{}` (expected delay, bandwidth or processing_delay)",
                &record[2]
            ))
        })?;
        let value: f64 = record[3]
            .parse()
            .map_err(|_| fail(format!("bad value `{}`", &record[3])))?;
        let positivity_ok = match field {
            TraceField::Bandwidth => value > 0.0,
            TraceField::Delay | TraceField::ProcessingDelay => value >= 0.0,
        };
        if !value.is_finite() || !positivity_ok {
            return Err(fail(format!("value {value} is out of range for {field}")));
        }
        events.push(TraceEvent {
            time,
            target: record[1].to_string(),
            field,
            value,
        });
    }
    Ok(events)
}

/// The resolved destination of an event target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResolvedTarget {
    Link(crate::netmodel::NodeId, crate::netmodel::NodeId),
    Server(crate::netmodel::NodeId),
}

/// Resolves targets against the graph and checks field applicability:
/// `delay`/`bandwidth` need a `SRC->DST` link, `processing_delay` a server
/// node.
pub fn resolve_target(
    graph: &NetworkGraph,
    event: &TraceEvent,
) -> Result<ResolvedTarget, SimError> {
    match event.field {
        TraceField::Delay | TraceField::Bandwidth => {
            let Some((src, dst)) = event.target.split_once("->") else {
                return Err(SimError::BadTarget {
                    target: event.target.clone(),
                    message: "link targets are written SRC->DST".to_string(),
                });
            };
            let src = graph.lookup(src.trim()).map_err(|e| SimError::BadTarget {
                target: event.target.clone(),
                message: e.to_string(),
            })?;
            let dst = graph.lookup(dst.trim()).map_err(|e| SimError::BadTarget {
                target: event.target.clone(),
                message: e.to_string(),
            })?;
            if graph.link(src, dst).is_none() {
                return Err(SimError::BadTarget {
                    target: event.target.clone(),
                    message: "no such link".to_string(),
                });
            }
            Ok(ResolvedTarget::Link(src, dst))
        }
        TraceField::ProcessingDelay => {
            let id = graph
                .lookup(&event.target)
                .map_err(|e| SimError::BadTarget {
                    target: event.target.clone(),
                    message: e.to_string(),
                })?;
            if graph.role(id) != NodeRole::Server {
                return Err(SimError::BadTarget {
                    target: event.target.clone(),
                    message: "processing_delay applies to servers".to_string(),
                });
            }
            Ok(ResolvedTarget::Server(id))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::canonical_graph;

    #[test]
    fn parses_well_formed_trace() {
        let input = "time_ms,target,field,value\n\
                     0,C->R1,delay,1.5\n\
                     10,S_A,processing_delay,2.0\n\
                     10,R1->R4,bandwidth,25\n";
        let events = parse_trace_csv(input.as_bytes()).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0].field, TraceField::Delay);
        assert_eq!(events[1].target, "S_A");
        assert_eq!(events[2].value, 25.0);
        let graph = canonical_graph();
        for e in &events {
            resolve_target(&graph, e).unwrap();
        }
    }

    #[test]
    fn reports_line_of_malformed_row() {
        let input = "time_ms,target,field,value\n\
                     0,C->R1,delay,1.5\n\
                     5,C->R1,delay,not_a_number\n";
        match parse_trace_csv(input.as_bytes()) {
            Err(SimError::TraceParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_backwards_time() {
        let input = "time_ms,target,field,value\n\
                     10,C->R1,delay,1.5\n\
                     5,C->R1,delay,2.0\n";
        assert!(matches!(
            parse_trace_csv(input.as_bytes()),
            Err(SimError::TraceParse { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_non_positive_bandwidth() {
        let input = "time_ms,target,field,value\n0,C->R1,bandwidth,0\n";
        assert!(matches!(
            parse_trace_csv(input.as_bytes()),
            Err(SimError::TraceParse { line: 2, .. })
        ));
    }

    #[test]
    fn resolve_rejects_unknown_link_and_role() {
        let graph = canonical_graph();
        let no_link = TraceEvent {
            time: 0.0,
            target: "C->R2".to_string(),
            field: TraceField::Delay,
            value: 1.0,
        };
        assert!(matches!(
            resolve_target(&graph, &no_link),
            Err(SimError::BadTarget { .. })
        ));
        let not_server = TraceEvent {
            time: 0.0,
            target: "R1".to_string(),
            field: TraceField::ProcessingDelay,
            value: 1.0,
        };
        assert!(matches!(
            resolve_target(&graph, &not_server),
            Err(SimError::BadTarget { .. })
        ));
    }
}
