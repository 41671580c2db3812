//! Plain-text protocol files.
//!
//! ```text
//! # thermoctl-protocol v1
//! 0,0.0            sample rows: t,E[,dE/dt]; interpolated linearly, or by
//! 0,1.5            cubic Hermite when every row of a run carries dE/dt
//! 2.0,3.5
//! segment,2.0,5.0,3.5   constant level on [t_start, t_end]
//! ```
//!
//! Consecutive rows at the same time with different energies encode a
//! quench. Lines starting with `#` after the header are comments.

use std::fmt::Write as _;

use thermoctl_core::{Protocol, Quench, Segment};

use crate::error::CliError;

pub const HEADER: &str = "# thermoctl-protocol v1";

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Point,
    Start(usize),
    End(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    e: f64,
    slope: Option<f64>,
    source: Source,
    line: usize,
}

fn parse_number(field: &str, line: usize, what: &str) -> Result<f64, CliError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| CliError::parse(line, format!("cannot read {what} from {:?}", field.trim())))?;
    if !v.is_finite() {
        return Err(CliError::parse(line, format!("{what} must be finite")));
    }
    Ok(v)
}

/// Parse a protocol file. `time_scale` and `energy_scale` multiply the file's
/// times and energies on the way in (1 for files already in scaled units).
pub fn parse(text: &str, time_scale: f64, energy_scale: f64) -> Result<Protocol, CliError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, l)) if l == HEADER => {}
        Some((n, _)) => return Err(CliError::parse(n, format!("expected header {HEADER:?}"))),
        None => return Err(CliError::parse(1, "empty protocol file".into())),
    }

    let mut events = Vec::new();
    let mut segment_count = 0;
    for (line, text) in lines {
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields[0].trim() == "segment" {
            if fields.len() != 4 {
                return Err(CliError::parse(line, "segment rows are segment,t_start,t_end,E".into()));
            }
            let t0 = parse_number(fields[1], line, "t_start")? * time_scale;
            let t1 = parse_number(fields[2], line, "t_end")? * time_scale;
            let e = parse_number(fields[3], line, "E")? * energy_scale;
            if !(t1 > t0) {
                return Err(CliError::parse(line, "segment must have t_end > t_start".into()));
            }
            events.push(Event { t: t0, e, slope: None, source: Source::Start(segment_count), line });
            events.push(Event { t: t1, e, slope: None, source: Source::End(segment_count), line });
            segment_count += 1;
        } else {
            if !(2..=3).contains(&fields.len()) {
                return Err(CliError::parse(line, "sample rows are t,E or t,E,dEdt".into()));
            }
            let t = parse_number(fields[0], line, "t")? * time_scale;
            let e = parse_number(fields[1], line, "E")? * energy_scale;
            let slope = match fields.get(2) {
                Some(f) => Some(parse_number(f, line, "dEdt")? * energy_scale / time_scale),
                None => None,
            };
            events.push(Event { t, e, slope, source: Source::Point, line });
        }
    }
    if events.is_empty() {
        return Err(CliError::parse(1, "protocol has no rows".into()));
    }

    let mut segments = Vec::new();
    let mut quenches = Vec::new();
    let mut run: Vec<Event> = Vec::new();
    let flush = |run: &mut Vec<Event>, segments: &mut Vec<Segment>| -> Result<(), CliError> {
        if run.len() >= 2 {
            let slopes = if run.iter().all(|e| e.slope.is_some()) {
                Some(run.iter().map(|e| e.slope.unwrap()).collect())
            } else if run.iter().any(|e| e.slope.is_some()) {
                return Err(CliError::parse(run[0].line, "dEdt must be given on every row of a sampled run or none".into()));
            } else {
                None
            };
            segments.push(Segment::Sampled {
                times: run.iter().map(|e| e.t).collect(),
                energies: run.iter().map(|e| e.e).collect(),
                slopes,
            });
        }
        run.clear();
        Ok(())
    };
    for pair in events.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.t < a.t {
            return Err(CliError::parse(b.line, format!("time {} precedes {}", b.t, a.t)));
        }
        if b.t == a.t {
            flush(&mut run, &mut segments)?;
            if b.e != a.e {
                quenches.push(Quench { time: a.t, before: a.e, after: b.e });
            }
            continue;
        }
        match (a.source, b.source) {
            (Source::Start(i), Source::End(j)) if i == j => {
                flush(&mut run, &mut segments)?;
                segments.push(Segment::Constant { t_start: a.t, t_end: b.t, energy: a.e });
            }
            (Source::Point, Source::Point) => {
                if run.is_empty() {
                    run.push(a);
                }
                run.push(b);
            }
            _ => return Err(CliError::parse(b.line, format!("gap in the protocol between t = {} and t = {}", a.t, b.t))),
        }
    }
    flush(&mut run, &mut segments)?;
    if segments.is_empty() {
        return Err(CliError::parse(events[0].line, "protocol has zero duration".into()));
    }
    Protocol::new(segments, quenches).map_err(|e| CliError::parse(events[0].line, e.to_string()))
}

/// Serialize `protocol` so that [`parse`] returns an identical protocol.
pub fn write(protocol: &Protocol) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    if let Some(q) = protocol.quench_at(0.0) {
        let _ = writeln!(out, "{:.16e},{:.16e}", 0.0, q.before);
    }
    for seg in protocol.segments() {
        match seg {
            Segment::Constant { t_start, t_end, energy } => {
                let _ = writeln!(out, "segment,{t_start:.16e},{t_end:.16e},{energy:.16e}");
            }
            Segment::Sampled { times, energies, slopes } => {
                for (i, (t, e)) in times.iter().zip(energies).enumerate() {
                    match slopes {
                        Some(d) => {
                            let _ = writeln!(out, "{t:.16e},{e:.16e},{:.16e}", d[i]);
                        }
                        None => {
                            let _ = writeln!(out, "{t:.16e},{e:.16e}");
                        }
                    }
                }
            }
        }
    }
    let tau = protocol.duration();
    if let Some(q) = protocol.quench_at(tau) {
        let _ = writeln!(out, "{tau:.16e},{:.16e}", q.after);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_constant_levels() {
        let p = Protocol::piecewise_constant(&[1.0, 2.0, 2.0, -0.5], 3.0, 0.0, 4.0).unwrap();
        let back = parse(&write(&p), 1.0, 1.0).unwrap();
        assert_eq!(back.quenches(), p.quenches());
        for t in [0.1, 0.8, 1.6, 2.9] {
            assert_eq!(back.energy_at(t), p.energy_at(t));
        }
    }

    #[test]
    fn round_trip_sampled_with_slopes() {
        let p = Protocol::new(
            vec![Segment::Sampled {
                times: vec![0.0, 0.5, 1.25],
                energies: vec![1.0, 2.0, 2.5],
                slopes: Some(vec![0.3, 1.0, -0.2]),
            }],
            vec![Quench { time: 0.0, before: -1.0, after: 1.0 }, Quench { time: 1.25, before: 2.5, after: 0.0 }],
        )
        .unwrap();
        assert_eq!(parse(&write(&p), 1.0, 1.0).unwrap(), p);
    }

    #[test]
    fn mixed_rows_and_quenches() {
        let text = "# thermoctl-protocol v1\n# comment\n0,0\n0,1\n1,2\nsegment,1,3,2\n3,2\n3,5\n";
        let p = parse(text, 1.0, 1.0).unwrap();
        assert_eq!(p.segments().len(), 2);
        assert_eq!(p.quenches().len(), 2);
        assert_eq!(p.duration(), 3.0);
        assert_eq!(p.energy_at(0.5), 1.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("t,E\n", 1),
            ("# thermoctl-protocol v1\n0,1\nx,2\n", 3),
            ("# thermoctl-protocol v1\n0,1\n1,2\n0.5,3\n", 4),
            ("# thermoctl-protocol v1\nsegment,0,1,2\nsegment,2,3,2\n", 3),
            ("# thermoctl-protocol v1\n0,1,2\n1,2\n", 2),
        ];
        for (text, line) in cases {
            match parse(text, 1.0, 1.0) {
                Err(CliError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn unit_scaling() {
        let p = parse("# thermoctl-protocol v1\nsegment,0,2,3\n", 0.5, 2.0).unwrap();
        assert_eq!(p.duration(), 1.0);
        assert_eq!(p.energy_at(0.5), 6.0);
    }
}
