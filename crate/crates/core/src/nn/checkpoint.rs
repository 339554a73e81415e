//! Plain-text parameter files.
//!
//! ```text
//! ponwatch-params 1
//! scalar f64
//! meta <key> <value>
//! param <name> <dim>x<dim> <little-endian hex>
//! ```
//!
//! Values are stored as raw bytes, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::Scalar;

const MAGIC: &str = "ponwatch-params 1";

pub fn encode_params<T: Scalar, P: ParamSet<T>>(params: &P, meta: &BTreeMap<String, String>) -> String {
    let mut out = format!("{MAGIC}\nscalar {}\n", T::NAME);
    for (k, v) in meta {
        out.push_str(&format!("meta {k} {v}\n"));
    }
    for (name, t) in params.params() {
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let mut bytes = Vec::with_capacity(t.len() * T::BYTES);
        for &v in t.data() {
            v.write_le(&mut bytes);
        }
        out.push_str(&format!("param {name} {} {}\n", shape.join("x"), hex::encode(bytes)));
    }
    out
}

/// Fill `params` from `text`; names and shapes must match exactly.
/// Returns the metadata block.
pub fn decode_params<T: Scalar, P: ParamSet<T>>(text: &str, params: &mut P) -> Result<BTreeMap<String, String>> {
    let bad = |m: String| Error::format("parameter file", m);
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header".into()));
    }
    match lines.next().and_then(|l| l.strip_prefix("scalar ")) {
        Some(s) if s == T::NAME => {}
        Some(s) => return Err(bad(format!("stored as {s}, loading as {}", T::NAME))),
        None => return Err(bad("missing scalar line".into())),
    }
    let expected: Vec<(String, Vec<usize>)> =
        params.params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
    let mut meta = BTreeMap::new();
    let mut values: Vec<Vec<T>> = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            meta.insert(k.to_string(), v.to_string());
            continue;
        }
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 4 || parts[0] != "param" {
            return Err(bad(format!("unrecognised line `{}`", truncate(line))));
        }
        let idx = values.len();
        let Some((name, shape)) = expected.get(idx) else {
            return Err(bad(format!("unexpected parameter {}", parts[1])));
        };
        let dims: Vec<usize> = parts[2].split('x').map(str::parse).collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("bad shape {}", parts[2])))?;
        if parts[1] != name || &dims != shape {
            return Err(bad(format!("expected {name} {shape:?}, found {} {dims:?}", parts[1])));
        }
        let bytes = hex::decode(parts[3]).map_err(|e| bad(format!("{name}: {e}")))?;
        let n: usize = shape.iter().product();
        if bytes.len() != n * T::BYTES {
            return Err(bad(format!("{name}: {} bytes for {n} values", bytes.len())));
        }
        let vals = bytes.chunks(T::BYTES).map(|c| T::read_le(c).expect("chunk width")).collect();
        values.push(vals);
    }
    if values.len() != expected.len() {
        return Err(bad(format!("{} of {} parameters present", values.len(), expected.len())));
    }
    for (t, v) in params.params_mut().into_iter().zip(values) {
        t.data_mut().copy_from_slice(&v);
    }
    params.check_finite()?;
    Ok(meta)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(60) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense, Gru};
    use crate::rng::stream_rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = stream_rng(3, 0);
        let g = Gru::<f64>::new(2, 3, 0.0, &mut rng);
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), "3".to_string());
        let text = encode_params(&g, &meta);
        let mut back = Gru::<f64>::zeros(2, 3);
        let m = decode_params(&text, &mut back).unwrap();
        assert_eq!(back, g);
        assert_eq!(m, meta);
        assert_eq!(encode_params(&back, &m), text);
    }

    #[test]
    fn shape_and_type_checked() {
        let mut rng = stream_rng(3, 0);
        let d = Dense::<f64>::new(2, 3, Activation::Relu, &mut rng);
        let text = encode_params(&d, &BTreeMap::new());
        let mut wrong = Dense::<f64>::new(3, 3, Activation::Relu, &mut rng);
        assert!(decode_params(&text, &mut wrong).is_err());
        let mut narrow = Dense::<f32>::new(2, 3, Activation::Relu, &mut rng);
        assert!(decode_params(&text, &mut narrow).is_err());
        let mut ok = Dense::<f64>::new(2, 3, Activation::Relu, &mut rng);
        assert!(decode_params(&text.replace("param bias", "param bia"), &mut ok).is_err());
        assert!(decode_params(&text[..text.len() - 3], &mut ok).is_err());
    }
}
