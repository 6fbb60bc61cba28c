//! Plain-text model checkpoints.
//!
//! ```text
//! mlp v1
//! input_dim <D>
//! output_dim <L>
//! leak <slope>
//! hidden <w1> <w2> ...
//! layer <fan_in> <fan_out>
//! weights <fan_in * fan_out values, row-major>
//! bias <fan_out values>
//! ...one layer/weights/bias triple per layer
//! ```
//!
//! Values are written in Rust's shortest round-trip decimal form, so reading
//! a checkpoint back reproduces every parameter bit for bit.

use ndarray::{Array1, Array2};

use super::{Dense, MlpArchitecture, MlpModel};
use crate::{Error, Result};

pub(crate) fn join_floats(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line cursor over a checkpoint with `key value...` lines.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line, which must start with `key`; returns the rest.
    pub(crate) fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
            if k != key {
                return Err(Error::parse(i + 1, format!("expected `{key}`, found `{k}`")));
            }
            return Ok((i + 1, rest.trim()));
        }
        Err(Error::parse(0, format!("unexpected end of file, expected `{key}`")))
    }

    pub(crate) fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, rest) = self.expect(key)?;
        rest.parse()
            .map_err(|_| Error::parse(line, format!("invalid value `{rest}` for `{key}`")))
    }

    pub(crate) fn floats(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let (line, rest) = self.expect(key)?;
        let values = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("invalid number `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != count {
            return Err(Error::parse(
                line,
                format!("`{key}` has {} values, expected {count}", values.len()),
            ));
        }
        Ok(values)
    }

    pub(crate) fn usizes(&mut self, key: &str) -> Result<Vec<usize>> {
        let (line, rest) = self.expect(key)?;
        rest.split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::parse(line, format!("invalid count `{t}`")))
            })
            .collect()
    }
}

pub fn write_mlp(model: &MlpModel) -> String {
    let arch = model.architecture();
    let mut out = String::from("mlp v1\n");
    out += &format!("input_dim {}\n", model.input_dim());
    out += &format!("output_dim {}\n", model.output_dim());
    out += &format!("leak {}\n", arch.leak);
    let hidden: Vec<String> = arch.hidden_sizes.iter().map(ToString::to_string).collect();
    out += &format!("hidden {}\n", hidden.join(" "));
    for layer in model.layers() {
        let (fan_in, fan_out) = layer.weights.dim();
        out += &format!("layer {fan_in} {fan_out}\n");
        out += &format!("weights {}\n", join_floats(layer.weights.iter().copied()));
        out += &format!("bias {}\n", join_floats(layer.bias.iter().copied()));
    }
    out
}

pub fn read_mlp(text: &str) -> Result<MlpModel> {
    let mut lines = Lines::new(text);
    let (line, version) = lines.expect("mlp")?;
    if version != "v1" {
        return Err(Error::parse(line, format!("unsupported checkpoint version `{version}`")));
    }
    let input_dim: usize = lines.value("input_dim")?;
    let output_dim: usize = lines.value("output_dim")?;
    let leak: f64 = lines.value("leak")?;
    let hidden = lines.usizes("hidden")?;
    let arch = MlpArchitecture::with_leak(hidden, leak)?;
    let n_layers = arch.hidden_sizes.len() + 1;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (line, dims) = lines.expect("layer")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .filter_map(|t| t.parse().ok())
            .collect();
        let [fan_in, fan_out] = dims[..] else {
            return Err(Error::parse(line, "layer needs `fan_in fan_out`"));
        };
        let weights = lines.floats("weights", fan_in * fan_out)?;
        let bias = lines.floats("bias", fan_out)?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((fan_in, fan_out), weights)
                .map_err(|e| Error::Shape(e.to_string()))?,
            bias: Array1::from(bias),
        });
    }
    let model = MlpModel::from_layers(arch, layers)?;
    if model.input_dim() != input_dim || model.output_dim() != output_dim {
        return Err(Error::Shape("checkpoint dimensions disagree with layers".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), d in 1usize..6, l in 1usize..4, h in prop::collection::vec(1usize..5, 0..3)) {
            let arch = MlpArchitecture::with_leak(h, 0.01).unwrap();
            let mut model = MlpModel::init(&arch, d, l, seed).unwrap();
            model.layers_mut()[0].bias.fill(1.0 / 3.0);
            let back = read_mlp(&write_mlp(&model)).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_truncated() {
        let model = MlpModel::init(&"[2]".parse().unwrap(), 3, 1, 0).unwrap();
        let text = write_mlp(&model);
        let cut: String = text.lines().take(7).collect::<Vec<_>>().join("\n");
        assert!(read_mlp(&cut).is_err());
        assert!(read_mlp(&text.replace("mlp v1", "mlp v9")).is_err());
    }
}
