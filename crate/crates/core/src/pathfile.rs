//! Text format shared by guide-path dumps and solution files: one line per
//! agent, `agent_id: v0 v1 ... vn`, vertices as row-major cell indices.

use std::fmt::Write as _;

use crate::error::{ParseError, Result};
use crate::grid::Vertex;

pub fn write_paths<'a, I>(paths: I) -> String
where
    I: IntoIterator<Item = (usize, &'a [Vertex])>,
{
    let mut out = String::new();
    for (agent, path) in paths {
        let _ = write!(out, "{agent}:");
        for v in path {
            let _ = write!(out, " {}", v.0);
        }
        out.push('\n');
    }
    out
}

pub fn parse_paths(text: &str) -> Result<Vec<(usize, Vec<Vertex>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |msg: &str| ParseError::Malformed {
            line: i + 1,
            msg: msg.into(),
        };
        let (id, rest) = line
            .split_once(':')
            .ok_or_else(|| malformed("missing ':'"))?;
        let agent = id.trim().parse().map_err(|_| malformed("bad agent id"))?;
        let path = rest
            .split_whitespace()
            .map(|t| t.parse().map(Vertex))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| malformed("bad vertex index"))?;
        out.push((agent, path));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = vec![Vertex(0), Vertex(1), Vertex(2)];
        let b = vec![Vertex(7)];
        let text = write_paths([(0, a.as_slice()), (3, b.as_slice())]);
        assert_eq!(text, "0: 0 1 2\n3: 7\n");
        assert_eq!(parse_paths(&text).unwrap(), vec![(0, a), (3, b)]);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_paths("0 1 2\n").is_err());
        assert!(parse_paths("x: 1\n").is_err());
        assert!(parse_paths("0: 1 y\n").is_err());
    }
}
