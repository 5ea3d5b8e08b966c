//! Plain-text network checkpoints.
//!
//! ```text
//! modecast-network 1
//! cell lstm
//! layers 2
//! hidden 64
//! input_features 2
//! dropout_rate 0.2
//! seed 7
//! tensor 0 w_f 64 66
//! <one line per row, values separated by single spaces>
//! ...
//! tensor head w_hy 1 64
//! ...
//! tensor head b_y 1 1
//! ...
//! end
//! ```
//!
//! Tensors appear in the canonical parameter order. Values are written in
//! shortest round-trip form, so a save/load cycle is exact.

use std::fmt::Write as _;

use super::cell::CellParams;
use super::network::{Network, NetworkConfig, OutputHead, Params};
use super::NeuralError;

pub const CHECKPOINT_MAGIC: &str = "modecast-network";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_checkpoint_string(net: &Network) -> String {
    let c = net.config();
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(out, "cell {}", c.cell.name());
    let _ = writeln!(out, "layers {}", c.layers);
    let _ = writeln!(out, "hidden {}", c.hidden);
    let _ = writeln!(out, "input_features {}", c.input_features);
    let _ = writeln!(out, "dropout_rate {}", c.dropout_rate);
    let _ = writeln!(out, "seed {}", c.seed);
    let mut write_tensor = |tag: &str, name: &str, rows: usize, cols: usize, data: &[f64]| {
        let _ = writeln!(out, "tensor {tag} {name} {rows} {cols}");
        for row in data.chunks(cols.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    };
    let p = net.params();
    for (l, layer) in p.layers.iter().enumerate() {
        for ((name, rows, cols), data) in layer.layout().into_iter().zip(layer.tensors()) {
            write_tensor(&l.to_string(), name, rows, cols, data);
        }
    }
    write_tensor("head", "w_hy", 1, p.head.w_hy.len(), &p.head.w_hy);
    write_tensor("head", "b_y", 1, 1, &[p.head.b_y]);
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, NeuralError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> NeuralError {
        NeuralError::Checkpoint {
            line: self.line,
            message: msg.into(),
        }
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, NeuralError> {
        let l = self.next()?;
        let value = l
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key} <value>`, found {l:?}")))?;
        value
            .trim()
            .parse()
            .map_err(|_| self.err(format!("invalid value {value:?} for {key}")))
    }
}

pub fn from_checkpoint_str(text: &str) -> Result<Network, NeuralError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next()?;
    let version = header
        .strip_prefix(CHECKPOINT_MAGIC)
        .map(str::trim)
        .ok_or_else(|| lines.err("not a network checkpoint"))?;
    if version != CHECKPOINT_VERSION.to_string() {
        return Err(lines.err(format!("unsupported checkpoint version {version:?}")));
    }
    let cell_name: String = lines.field("cell")?;
    let cell = cell_name.parse().map_err(|_| lines.err(format!("unknown cell {cell_name:?}")))?;
    let config = NetworkConfig {
        cell,
        layers: lines.field("layers")?,
        hidden: lines.field("hidden")?,
        input_features: lines.field("input_features")?,
        dropout_rate: lines.field("dropout_rate")?,
        seed: lines.field("seed")?,
    };
    config.validate().map_err(|e| lines.err(e.to_string()))?;

    let mut read_tensor = |tag: &str, name: &str, rows: usize, cols: usize| -> Result<Vec<f64>, NeuralError> {
        let head = lines.next()?;
        let want = format!("tensor {tag} {name} {rows} {cols}");
        if head != want {
            return Err(lines.err(format!("expected `{want}`, found {head:?}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines.next()?;
            let before = data.len();
            for tok in row.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| lines.err(format!("invalid number {tok:?}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(lines.err(format!("expected {cols} values, found {}", data.len() - before)));
            }
        }
        Ok(data)
    };

    let mut layers = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let input = if l == 0 { config.input_features } else { config.hidden };
        let mut layer = CellParams::zeros(config.cell, config.hidden, input);
        let layout = layer.layout();
        for ((name, rows, cols), dst) in layout.into_iter().zip(layer.tensors_mut()) {
            dst.copy_from_slice(&read_tensor(&l.to_string(), name, rows, cols)?);
        }
        layers.push(layer);
    }
    let w_hy = read_tensor("head", "w_hy", 1, config.hidden)?;
    let b_y = read_tensor("head", "b_y", 1, 1)?[0];
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Network::from_params(
        config,
        Params {
            layers,
            head: OutputHead { w_hy, b_y },
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::CellKind;

    fn net(cell: CellKind) -> Network {
        Network::new(NetworkConfig {
            cell,
            layers: 2,
            hidden: 3,
            input_features: 2,
            dropout_rate: 0.1,
            seed: 8,
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        for cell in CellKind::ALL {
            let n = net(cell);
            let text = to_checkpoint_string(&n);
            assert_eq!(from_checkpoint_str(&text).unwrap(), n);
        }
    }

    #[test]
    fn header_is_documented_shape() {
        let text = to_checkpoint_string(&net(CellKind::Gru));
        let mut l = text.lines();
        assert_eq!(l.next(), Some("modecast-network 1"));
        assert_eq!(l.next(), Some("cell gru"));
        assert!(text.contains("tensor 0 w_z 3 5\n"));
        assert!(text.contains("tensor 1 w 3 6\n"));
        assert!(text.ends_with("\nend\n"));
    }

    #[test]
    fn corrupt_value_reports_line() {
        let text = to_checkpoint_string(&net(CellKind::Rnn));
        let broken = text.replacen("tensor 0 w_xh 3 2\n", "tensor 0 w_xh 3 2\nabc 1\n", 1);
        match from_checkpoint_str(&broken) {
            Err(NeuralError::Checkpoint { line, .. }) => {
                let expected = broken.lines().position(|l| l == "abc 1").unwrap() + 1;
                assert_eq!(line, expected);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_version() {
        let text = to_checkpoint_string(&net(CellKind::Rnn)).replacen("modecast-network 1", "modecast-network 9", 1);
        assert!(matches!(from_checkpoint_str(&text), Err(NeuralError::Checkpoint { line: 1, .. })));
    }

    #[test]
    fn truncated() {
        let text = to_checkpoint_string(&net(CellKind::Lstm));
        let cut = &text[..text.len() / 2];
        assert!(from_checkpoint_str(cut).is_err());
    }
}
