//! CSV readers and writers.
//!
//! Output uses `,` separators, `.` decimals, a header row and LF line
//! endings. Floats are written with Rust's shortest round-trip formatting,
//! so identical inputs give byte-identical files.

use std::io::{Read, Write};

use csv::{ReaderBuilder, Terminator, WriterBuilder};
use serde::Deserialize;

use crate::detector::SolvedPolicy;
use crate::error::{Error, Result};
use crate::model::Action;
use crate::sim::{ReplayResult, Trajectory};
use crate::social::RegionRow;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `alpha,pi_double_star,pi_star,width`; absent boundaries are empty.
pub fn write_regions_csv<W: Write>(out: W, rows: &[RegionRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["alpha", "pi_double_star", "pi_star", "width"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            opt(r.pi_double_star),
            opt(r.pi_star),
            r.width.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `pi2,value,action` with action 1 = stop, 2 = continue.
pub fn write_policy_csv<W: Write>(out: W, policy: &SolvedPolicy) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["pi2", "value", "action"])?;
    for ((p, v), a) in policy.grid.iter().zip(&policy.values).zip(&policy.actions) {
        w.write_record([p.to_string(), v.to_string(), a.code().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,x,y,a,pi1,...,piX,u` with 1-based states, observations and codes.
/// Row `t = 0` holds the initial state and belief with empty `y`, `a`, `u`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = writer(out);
    let states = traj.pi0.len();
    let mut header = vec!["t".to_string(), "x".into(), "y".into(), "a".into()];
    header.extend((1..=states).map(|i| format!("pi{i}")));
    header.push("u".into());
    w.write_record(&header)?;

    let mut first = vec![
        "0".to_string(),
        (traj.x0 + 1).to_string(),
        String::new(),
        String::new(),
    ];
    first.extend(traj.pi0.as_slice().iter().map(|p| p.to_string()));
    first.push(String::new());
    w.write_record(&first)?;

    for s in &traj.steps {
        let mut row = vec![
            s.t.to_string(),
            (s.x + 1).to_string(),
            (s.y + 1).to_string(),
            s.a.code().to_string(),
        ];
        row.extend(s.pi.as_slice().iter().map(|p| p.to_string()));
        row.push(s.u.code().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,action,pi1,...,piX,u` for a replayed action sequence; row `t = 0`
/// holds the initial belief.
pub fn write_replay_csv<W: Write>(out: W, actions: &[Action], result: &ReplayResult) -> Result<()> {
    let mut w = writer(out);
    let states = result.beliefs[0].len();
    let mut header = vec!["t".to_string(), "action".into()];
    header.extend((1..=states).map(|i| format!("pi{i}")));
    header.push("u".into());
    w.write_record(&header)?;
    for (t, b) in result.beliefs.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.push(if t == 0 {
            String::new()
        } else {
            actions[t - 1].code().to_string()
        });
        row.extend(b.as_slice().iter().map(|p| p.to_string()));
        row.push(if t == 0 {
            String::new()
        } else {
            result.decisions[t - 1].code().to_string()
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ActionRecord {
    t: i64,
    action: String,
}

/// Reads a `t,action` CSV. Rows must have strictly increasing `t` and
/// actions 1 (buy) or 2 (sell).
pub fn read_actions_csv<R: Read>(input: R) -> Result<Vec<Action>> {
    let mut reader = ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "action"] {
        return Err(Error::config(
            "actions",
            format!(
                "expected header `t,action`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    let mut last_t: Option<i64> = None;
    for (i, rec) in reader.deserialize::<ActionRecord>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::config(format!("actions[{row}]"), e.to_string()))?;
        if let Some(prev) = last_t {
            if rec.t <= prev {
                return Err(Error::config(
                    format!("actions[{row}].t"),
                    format!("time {} does not follow {prev}", rec.t),
                ));
            }
        }
        last_t = Some(rec.t);
        let action = rec
            .action
            .parse::<u8>()
            .ok()
            .and_then(Action::from_code)
            .ok_or_else(|| {
                Error::config(
                    format!("actions[{row}].action"),
                    format!("expected 1 or 2, got `{}`", rec.action),
                )
            })?;
        out.push(action);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ObserverAction;
    use crate::model::Belief;

    #[test]
    fn regions_csv_format() {
        let rows = vec![
            RegionRow {
                alpha: 1.0,
                pi_double_star: Some(0.25),
                pi_star: Some(0.5),
                width: 0.25,
                crossings_low: vec![0.25],
                crossings_high: vec![0.5],
                non_monotone: false,
            },
            RegionRow {
                alpha: 0.1,
                pi_double_star: None,
                pi_star: None,
                width: 0.0,
                crossings_low: vec![],
                crossings_high: vec![],
                non_monotone: false,
            },
        ];
        let mut buf = Vec::new();
        write_regions_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "alpha,pi_double_star,pi_star,width\n1,0.25,0.5,0.25\n0.1,,,0\n"
        );
    }

    #[test]
    fn reads_actions() {
        let a = read_actions_csv("t,action\n1,1\n2,2\n5, 1\n".as_bytes()).unwrap();
        assert_eq!(a, vec![Action::Buy, Action::Sell, Action::Buy]);
    }

    #[test]
    fn rejects_bad_actions() {
        let e = read_actions_csv("t,action\n1,1\n2,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().starts_with("actions[2].action"), "{e}");
        let e = read_actions_csv("t,action\n2,1\n2,2\n".as_bytes()).unwrap_err();
        assert!(e.to_string().starts_with("actions[2].t"), "{e}");
        let e = read_actions_csv("time,a\n1,1\n".as_bytes()).unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn replay_csv_format() {
        let r = ReplayResult {
            beliefs: vec![Belief::from_pi2(0.5), Belief::from_pi2(0.25)],
            decisions: vec![ObserverAction::Stop],
            tau: Some(1),
        };
        let mut buf = Vec::new();
        write_replay_csv(&mut buf, &[Action::Sell], &r).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,action,pi1,pi2,u\n0,,0.5,0.5,\n1,2,0.75,0.25,1\n"
        );
    }
}
