//! Scenario text format: a `key=value` header followed by a cluster table.
//!
//! ```text
//! # pfloc scenario v1
//! N=16
//! ...
//! [clusters]
//! index,x_m,y_m,g0_re,g0_im,...
//! 0,3.5,-1.25,0.1,-0.7,...
//! ```
//!
//! Fields are not stored; they are rebuilt from the seed on load.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Cluster, Params, Scenario};
use crate::error::{Error, Result};
use crate::geometry::Point;

const MAGIC: &str = "# pfloc scenario v1";

impl Scenario {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        for (k, v) in self.params().to_pairs() {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "[clusters]");
        let mut header = String::from("index,x_m,y_m");
        for k in 0..self.params().subbands {
            let _ = write!(header, ",g{k}_re,g{k}_im");
        }
        let _ = writeln!(out, "{header}");
        for (i, c) in self.clusters().iter().enumerate() {
            let _ = write!(out, "{i},{},{}", c.position.x, c.position.y);
            for g in &c.gains {
                let _ = write!(out, ",{},{}", g.re, g.im);
            }
            let _ = writeln!(out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scenario> {
        let fail = |line: usize, msg: String| Error::ScenarioFormat(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(fail(1, format!("expected `{MAGIC}`"))),
        }
        let mut params = Params::default();
        let mut in_table = false;
        let mut header_seen = false;
        let mut clusters = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if !in_table {
                if line == "[clusters]" {
                    in_table = true;
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| fail(no, "expected key=value".into()))?;
                match params.set(k.trim(), v) {
                    Ok(true) => {}
                    Ok(false) => return Err(fail(no, format!("unknown key `{}`", k.trim()))),
                    Err(e) => return Err(fail(no, format!("`{}`: {e}", k.trim()))),
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                let cols = line.split(',').count();
                if cols != 3 + 2 * params.subbands {
                    return Err(fail(no, format!("expected {} columns", 3 + 2 * params.subbands)));
                }
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(no, e.to_string()))?;
            if vals.len() != 2 + 2 * params.subbands {
                return Err(fail(no, "wrong number of columns".into()));
            }
            let gains = vals[2..]
                .chunks(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            clusters.push(Cluster {
                position: Point::new(vals[0], vals[1]),
                gains,
            });
        }
        if clusters.len() != params.clusters {
            return Err(Error::ScenarioFormat(format!(
                "header says L={} but table has {} rows",
                params.clusters,
                clusters.len()
            )));
        }
        Scenario::with_clusters(params, clusters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::AlphaRegime;

    #[test]
    fn text_round_trip() {
        let p = Params {
            clusters: 5,
            subbands: 2,
            grid_x: 10,
            grid_y: 10,
            seed: 77,
            ..Params::default()
        };
        let s = Scenario::generate(p).unwrap();
        let back = Scenario::from_text(&s.to_text()).unwrap();
        assert_eq!(back.params(), s.params());
        assert_eq!(back.clusters(), s.clusters());
        assert_eq!(back.to_text(), s.to_text());
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let p = Params {
            clusters: 3,
            subbands: 1,
            alpha_regime: AlphaRegime::Redraw,
            ..Params::default()
        };
        let s = Scenario::generate(p).unwrap();
        let text = s.to_text();
        let truncated: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(Scenario::from_text(&truncated).is_err());
        assert!(Scenario::from_text("garbage").is_err());
        assert!(Scenario::from_text(&text.replace("R_m=", "Q_m=")).is_err());
    }
}
