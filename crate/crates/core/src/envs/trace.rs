use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One environment step in a debug trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub terminated: bool,
}

/// Writes traces as JSON lines, one step per line.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        let line = serde_json::to_string(rec).map_err(|e| crate::Error::Consistency(e.to_string()))?;
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_per_step() {
        let mut w = TraceWriter::new(Vec::new());
        for t in 0..3 {
            w.record(&TraceRecord {
                t,
                actions: vec![t, 0],
                reward: -5.0,
                terminated: t == 2,
            })
            .unwrap();
        }
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let back: TraceRecord = serde_json::from_str(lines[2]).unwrap();
        assert!(back.terminated && back.actions == vec![2, 0]);
    }
}
