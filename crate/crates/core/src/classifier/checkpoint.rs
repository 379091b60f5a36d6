//! Model files: a UTF-8 manifest plus a little-endian float32 blob.
//!
//! Manifest lines are `key=value`:
//!
//! ```text
//! format_version=1
//! byte_order=little-endian
//! dtype=float32
//! input_shape=150x150x3
//! param_count=19034177
//! blob=model.weights.bin
//! layer_count=15
//! layer.0=conv2d filters=32 kernel=3 out=148x148x32 weight=3x3x3x32 bias=32
//! ...
//! config.epochs=20
//! ```
//!
//! The blob holds every parameter tensor in layer order, weight before
//! bias, row-major.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ClassifierError, TrainConfig};
use crate::nn::{LayerSpec, NetworkSpec, ParamSet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub params: ParamSet<f32>,
    pub config: TrainConfig,
}

fn fmt_shape(s: &[usize]) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn parse_shape(s: &str) -> Result<Vec<usize>, ClassifierError> {
    s.split('x')
        .map(|d| d.parse().map_err(|_| bad(format!("bad shape {s:?}"))))
        .collect()
}

fn bad(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::ModelFormat(msg.into())
}

fn blob_path(manifest: &Path) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    manifest.with_file_name(format!("{stem}.weights.bin"))
}

fn layer_line(layer: &LayerSpec, input: &[usize], output: &[usize]) -> String {
    let mut s = layer.name().to_string();
    match *layer {
        LayerSpec::Conv2D { filters, kernel } => {
            let _ = write!(s, " filters={filters} kernel={kernel}");
        }
        LayerSpec::MaxPool { pool } => {
            let _ = write!(s, " pool={pool}");
        }
        LayerSpec::Dense { units } => {
            let _ = write!(s, " units={units}");
        }
        LayerSpec::Dropout { rate } => {
            let _ = write!(s, " rate={rate}");
        }
        LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::Sigmoid => {}
    }
    let _ = write!(s, " out={}", fmt_shape(output));
    if let Some((w, b)) = layer.param_shapes(input) {
        let _ = write!(s, " weight={} bias={}", fmt_shape(&w), fmt_shape(&b));
    }
    s
}

fn parse_layer(line: &str) -> Result<(LayerSpec, BTreeMap<&str, &str>), ClassifierError> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().ok_or_else(|| bad("empty layer line"))?;
    let attrs: BTreeMap<&str, &str> = parts
        .map(|p| p.split_once('=').ok_or_else(|| bad(format!("bad layer attribute {p:?}"))))
        .collect::<Result<_, _>>()?;
    let get = |k: &str| -> Result<&str, ClassifierError> {
        attrs.get(k).copied().ok_or_else(|| bad(format!("{kind}: missing {k}")))
    };
    let int = |k: &str| -> Result<usize, ClassifierError> {
        get(k)?.parse().map_err(|_| bad(format!("{kind}: bad {k}")))
    };
    let layer = match kind {
        "conv2d" => LayerSpec::Conv2D {
            filters: int("filters")?,
            kernel: int("kernel")?,
        },
        "maxpool" => LayerSpec::MaxPool { pool: int("pool")? },
        "relu" => LayerSpec::Relu,
        "flatten" => LayerSpec::Flatten,
        "dense" => LayerSpec::Dense { units: int("units")? },
        "dropout" => LayerSpec::Dropout {
            rate: get("rate")?.parse().map_err(|_| bad("dropout: bad rate"))?,
        },
        "sigmoid" => LayerSpec::Sigmoid,
        other => return Err(bad(format!("unknown layer kind {other:?}"))),
    };
    Ok((layer, attrs))
}

pub fn save_model(ckpt: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    ckpt.params.check_against(&ckpt.spec)?;
    let report = ckpt.spec.shape_infer()?;
    let inputs = ckpt.spec.input_shapes()?;
    let blob = blob_path(path);

    let mut m = String::new();
    let _ = writeln!(m, "format_version={}", ckpt.format_version);
    let _ = writeln!(m, "byte_order=little-endian");
    let _ = writeln!(m, "dtype=float32");
    let _ = writeln!(m, "input_shape={}", fmt_shape(&ckpt.spec.input_shape));
    let _ = writeln!(m, "param_count={}", report.param_count);
    let _ = writeln!(
        m,
        "blob={}",
        blob.file_name().expect("has file name").to_string_lossy()
    );
    let _ = writeln!(m, "layer_count={}", ckpt.spec.layers.len());
    for (i, layer) in ckpt.spec.layers.iter().enumerate() {
        let _ = writeln!(m, "layer.{i}={}", layer_line(layer, &inputs[i], &report.output_shapes[i]));
    }
    for (k, v) in ckpt.config.pairs() {
        let _ = writeln!(m, "config.{k}={v}");
    }

    let mut bytes = Vec::with_capacity(report.param_count * 4);
    for t in ckpt.params.tensors() {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(&blob, bytes)?;
    std::fs::write(path, m)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelCheckpoint, ClassifierError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("manifest line {}: expected key=value", i + 1)))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("manifest missing {k}")));

    let version: u32 = get("format_version")?
        .parse()
        .map_err(|_| bad("bad format_version"))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format_version {version}")));
    }
    if get("byte_order")? != "little-endian" || get("dtype")? != "float32" {
        return Err(bad("only little-endian float32 blobs are supported"));
    }
    let input = parse_shape(get("input_shape")?)?;
    let input_shape: [usize; 3] = input
        .try_into()
        .map_err(|_| bad("input_shape must be HxWxC"))?;
    let layer_count: usize = get("layer_count")?.parse().map_err(|_| bad("bad layer_count"))?;
    let mut layers = Vec::with_capacity(layer_count);
    let mut declared = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let (layer, attrs) = parse_layer(get(&format!("layer.{i}"))?)?;
        layers.push(layer);
        declared.push((
            attrs.get("out").map(|s| s.to_string()),
            attrs.get("weight").map(|s| s.to_string()),
            attrs.get("bias").map(|s| s.to_string()),
        ));
    }
    let spec = NetworkSpec {
        input_shape,
        layers,
    };
    let report = spec.shape_infer().map_err(|e| bad(e.to_string()))?;
    let inputs = spec.input_shapes()?;
    for (i, (out, w, b)) in declared.iter().enumerate() {
        let expect_out = fmt_shape(&report.output_shapes[i]);
        let params = spec.layers[i].param_shapes(&inputs[i]);
        let ok = out.as_deref() == Some(expect_out.as_str())
            && w.as_deref() == params.as_ref().map(|(w, _)| fmt_shape(w)).as_deref()
            && b.as_deref() == params.as_ref().map(|(_, b)| fmt_shape(b)).as_deref();
        if !ok {
            return Err(bad(format!("layer {i}: declared shapes disagree with the layer list")));
        }
    }
    let param_count: usize = get("param_count")?.parse().map_err(|_| bad("bad param_count"))?;
    if param_count != report.param_count {
        return Err(bad(format!(
            "param_count {param_count} but layers imply {}",
            report.param_count
        )));
    }

    let config = TrainConfig::apply_pairs(
        kv.iter()
            .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k, *v))),
    )
    .map_err(|e| bad(format!("config: {e}")))?;

    let blob = path.with_file_name(get("blob")?);
    let bytes = std::fs::read(&blob)?;
    if bytes.len() != param_count * 4 {
        return Err(bad(format!(
            "blob has {} bytes, expected {}",
            bytes.len(),
            param_count * 4
        )));
    }
    let mut params = ParamSet::<f32>::zeros(&spec)?;
    let mut chunks = bytes.chunks_exact(4);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            let c = chunks.next().expect("length checked");
            *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
    }
    Ok(ModelCheckpoint {
        format_version: version,
        spec,
        params,
        config,
    })
}
