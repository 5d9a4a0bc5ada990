//! Text format for event streams.
//!
//! ```text
//! # diffusim events v1
//! # sites 4 horizon 2 seed 17
//! 0.5 lambda 1 0
//! 0.7 death 3 3
//! ```
//!
//! Times use the shortest decimal that round-trips to the same `f64`. Site
//! events (`death`, `gamma`) repeat their site in both columns.

use super::{Event, EventKind, EventStream};
use crate::error::{Error, Result};
use crate::lattice::Site;

const MAGIC: &str = "# diffusim events v1";

pub(super) fn write(stream: &EventStream) -> String {
    let mut out = String::with_capacity(32 * stream.events.len() + 64);
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!(
        "# sites {} horizon {} seed {}\n",
        stream.sites, stream.horizon, stream.seed
    ));
    for e in &stream.events {
        let (name, (from, to)) = match e.kind {
            EventKind::Lambda { .. } => ("lambda", e.kind.endpoints()),
            EventKind::Alpha { .. } => ("alpha", e.kind.endpoints()),
            EventKind::Death { .. } => ("death", e.kind.endpoints()),
            EventKind::Gamma { .. } => ("gamma", e.kind.endpoints()),
        };
        out.push_str(&format!("{} {} {} {}\n", e.time, name, from.0, to.0));
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

pub(super) fn read(text: &str) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(parse_err(1, "missing header")),
    }
    let (_, meta) = lines.next().ok_or_else(|| parse_err(2, "missing metadata line"))?;
    let fields: Vec<&str> = meta.split_whitespace().collect();
    let (sites, horizon, seed) = match fields.as_slice() {
        ["#", "sites", n, "horizon", h, "seed", s] => (
            n.parse::<usize>().map_err(|e| parse_err(2, e.to_string()))?,
            h.parse::<f64>().map_err(|e| parse_err(2, e.to_string()))?,
            s.parse::<u64>().map_err(|e| parse_err(2, e.to_string()))?,
        ),
        _ => return Err(parse_err(2, "expected '# sites N horizon T seed S'")),
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let [time, kind, from, to] = f.as_slice() else {
            return Err(parse_err(line_no, "expected 'time kind from to'"));
        };
        let time: f64 = time.parse().map_err(|_| parse_err(line_no, "bad time"))?;
        let from = Site(from.parse().map_err(|_| parse_err(line_no, "bad site"))?);
        let to = Site(to.parse().map_err(|_| parse_err(line_no, "bad site"))?);
        let kind = match *kind {
            "lambda" => EventKind::Lambda { from, to },
            "alpha" => EventKind::Alpha { from, to },
            "death" | "gamma" if from != to => {
                return Err(parse_err(line_no, "site event with distinct endpoints"))
            }
            "death" => EventKind::Death { at: from },
            "gamma" => EventKind::Gamma { at: from },
            other => return Err(parse_err(line_no, format!("unknown event kind '{other}'"))),
        };
        events.push(Event { time, kind });
    }
    EventStream::new(sites, horizon, seed, events)
}

#[cfg(test)]
mod tests {
    use crate::dynamics::Params;
    use crate::harris::{generate_events, EventStream};
    use crate::lattice::{Boundary, Lattice};

    #[test]
    fn dump_round_trips() {
        let l = Lattice::new(2, &[3, 3], Boundary::Torus).unwrap();
        let p = Params::new(1.7, 0.9).unwrap().with_gamma(0.3).unwrap();
        let s = generate_events(&l, &p, 3.5, 2024).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("# diffusim events v1\n# sites 9 horizon 3.5 seed 2024\n"));
        assert_eq!(EventStream::from_text(&text).unwrap(), s);
    }

    #[test]
    fn rejects_garbage() {
        assert!(EventStream::from_text("nope").is_err());
        let head = "# diffusim events v1\n# sites 2 horizon 1 seed 0\n";
        assert!(EventStream::from_text(&format!("{head}0.5 teleport 0 1\n")).is_err());
        assert!(EventStream::from_text(&format!("{head}0.5 death 0 1\n")).is_err());
        assert!(EventStream::from_text(&format!("{head}0.5 lambda 0\n")).is_err());
        assert!(EventStream::from_text(&format!("{head}1.5 death 0 0\n")).is_err());
        assert!(EventStream::from_text(&format!("{head}0.5 death 0 0\n")).is_ok());
    }
}
