//! DNN layer manifests and their lowering to GEMM jobs.
//!
//! Manifest format, version 1. Line oriented, `#` starts a comment line, blank
//! lines are ignored:
//!
//! ```text
//! spoga-manifest v1
//! model <name>
//! conv name=<id> in_h=<u> in_w=<u> in_c=<u> out_c=<u> kernel_h=<u> kernel_w=<u> stride=<u> padding=<u> [groups=<u>]
//! fc name=<id> in_features=<u> out_features=<u>
//! ```
//!
//! The header must be the first content line and `model` must precede all layer
//! lines. Every field listed above is required except `groups` (default 1).
//! Values are unsigned decimal integers; names contain no whitespace. Unknown or
//! repeated fields are errors. Batch size is always 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mapper::{im2col, ConvLayer, GemmJob};

pub const MANIFEST_HEADER: &str = "spoga-manifest v1";

/// Models shipped with the crate, in the order reports list them.
pub const BUNDLED_MODELS: [&str; 4] = ["mobilenet_v2", "shufflenet_v2", "resnet50", "googlenet"];

fn bundled_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "resnet50" => include_str!("../data/models/resnet50.manifest"),
        "mobilenet_v2" => include_str!("../data/models/mobilenet_v2.manifest"),
        "shufflenet_v2" => include_str!("../data/models/shufflenet_v2.manifest"),
        "googlenet" => include_str!("../data/models/googlenet.manifest"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Conv(ConvLayer),
    Fc { in_features: usize, out_features: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    pub fn kind_str(&self) -> &'static str {
        match self.kind {
            LayerKind::Conv(_) => "conv",
            LayerKind::Fc { .. } => "fc",
        }
    }

    pub fn groups(&self) -> usize {
        match &self.kind {
            LayerKind::Conv(c) => c.groups,
            LayerKind::Fc { .. } => 1,
        }
    }

    /// One job per group for convolutions, a single `1 x in x out` job for FC layers.
    pub fn jobs(&self) -> Result<Vec<GemmJob>> {
        match &self.kind {
            LayerKind::Conv(c) => {
                let job = im2col(c).map_err(|e| match e {
                    Error::Geometry(msg) => Error::Geometry(format!("layer {}: {msg}", self.name)),
                    other => other,
                })?;
                Ok(vec![job; c.groups])
            }
            LayerKind::Fc { in_features, out_features } => Ok(vec![GemmJob::new(1, *in_features, *out_features)
                .map_err(|_| Error::Geometry(format!("layer {}: FC features must be positive", self.name)))?]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.jobs().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerManifest {
    pub model: String,
    pub layers: Vec<Layer>,
}

const CONV_FIELDS: [&str; 8] = ["in_h", "in_w", "in_c", "out_c", "kernel_h", "kernel_w", "stride", "padding"];
const FC_FIELDS: [&str; 2] = ["in_features", "out_features"];

fn parse_fields(line_no: usize, tokens: &[&str], allowed: &[&str]) -> Result<(String, BTreeMap<String, usize>)> {
    let err = |message: String| Error::Parse { line: line_no, message };
    let mut name = None;
    let mut fields = BTreeMap::new();
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {tok:?}")))?;
        if key == "name" {
            if value.is_empty() {
                return Err(err("field `name` is empty".into()));
            }
            if name.replace(value.to_string()).is_some() {
                return Err(err("field `name` repeated".into()));
            }
            continue;
        }
        if !allowed.contains(&key) {
            return Err(err(format!("unknown field `{key}`")));
        }
        if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err(format!("field `{key}` must be an unsigned integer, got {value:?}")));
        }
        let v: usize = value
            .parse()
            .map_err(|_| err(format!("field `{key}` value {value} does not fit")))?;
        if fields.insert(key.to_string(), v).is_some() {
            return Err(err(format!("field `{key}` repeated")));
        }
    }
    let name = name.ok_or_else(|| err("missing field `name`".into()))?;
    Ok((name, fields))
}

fn take(line_no: usize, fields: &BTreeMap<String, usize>, key: &str) -> Result<usize> {
    fields.get(key).copied().ok_or_else(|| Error::Parse {
        line: line_no,
        message: format!("missing field `{key}`"),
    })
}

impl LayerManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header_seen = false;
        let mut model: Option<String> = None;
        let mut layers = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            if !header_seen {
                if line != MANIFEST_HEADER {
                    return Err(err(format!("expected header `{MANIFEST_HEADER}`, got {line:?}")));
                }
                header_seen = true;
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "model" => {
                    if model.is_some() {
                        return Err(err("model declared twice".into()));
                    }
                    if tokens.len() != 2 {
                        return Err(err("expected `model <name>`".into()));
                    }
                    model = Some(tokens[1].to_string());
                }
                kind @ ("conv" | "fc") => {
                    if model.is_none() {
                        return Err(err("layer before `model` line".into()));
                    }
                    let layer = if kind == "conv" {
                        let mut allowed = CONV_FIELDS.to_vec();
                        allowed.push("groups");
                        let (name, f) = parse_fields(line_no, &tokens[1..], &allowed)?;
                        let mut vals = [0usize; 8];
                        for (slot, key) in vals.iter_mut().zip(CONV_FIELDS) {
                            *slot = take(line_no, &f, key)?;
                        }
                        let [in_h, in_w, in_c, out_c, kernel_h, kernel_w, stride, padding] = vals;
                        let groups = f.get("groups").copied().unwrap_or(1);
                        Layer {
                            name,
                            kind: LayerKind::Conv(ConvLayer {
                                in_h,
                                in_w,
                                in_c,
                                out_c,
                                kernel_h,
                                kernel_w,
                                stride,
                                padding,
                                groups,
                            }),
                        }
                    } else {
                        let (name, f) = parse_fields(line_no, &tokens[1..], &FC_FIELDS)?;
                        Layer {
                            name,
                            kind: LayerKind::Fc {
                                in_features: take(line_no, &f, "in_features")?,
                                out_features: take(line_no, &f, "out_features")?,
                            },
                        }
                    };
                    layer.validate().map_err(|e| match e {
                        Error::Geometry(msg) => Error::Geometry(format!("line {line_no}: {msg}")),
                        other => other,
                    })?;
                    layers.push(layer);
                }
                other => return Err(err(format!("unknown record type `{other}`"))),
            }
        }
        let end = last_line.max(1);
        if !header_seen {
            return Err(Error::Parse {
                line: end,
                message: "empty manifest: missing header".into(),
            });
        }
        let model = model.ok_or(Error::Parse {
            line: end,
            message: "missing `model` line".into(),
        })?;
        if layers.is_empty() {
            return Err(Error::Parse {
                line: end,
                message: "manifest has no layers".into(),
            });
        }
        Ok(LayerManifest { model, layers })
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let src = bundled_source(name).ok_or_else(|| {
            Error::Config(format!(
                "no bundled model {name:?}; bundled models: {}",
                BUNDLED_MODELS.join(", ")
            ))
        })?;
        Self::parse(src)
    }

    /// Serializes back to the v1 text format.
    pub fn to_manifest_string(&self) -> String {
        let mut s = format!("{MANIFEST_HEADER}\nmodel {}\n", self.model);
        for l in &self.layers {
            match &l.kind {
                LayerKind::Conv(c) => {
                    let _ = writeln!(
                        s,
                        "conv name={} in_h={} in_w={} in_c={} out_c={} kernel_h={} kernel_w={} stride={} padding={} groups={}",
                        l.name, c.in_h, c.in_w, c.in_c, c.out_c, c.kernel_h, c.kernel_w, c.stride, c.padding, c.groups
                    );
                }
                LayerKind::Fc { in_features, out_features } => {
                    let _ = writeln!(s, "fc name={} in_features={in_features} out_features={out_features}", l.name);
                }
            }
        }
        s
    }

    /// Jobs of every layer in order, flattened.
    pub fn to_jobs(&self) -> Result<Vec<GemmJob>> {
        let mut jobs = Vec::new();
        for l in &self.layers {
            jobs.extend(l.jobs()?);
        }
        Ok(jobs)
    }

    pub fn total_macs(&self) -> Result<u64> {
        Ok(self.to_jobs()?.iter().map(GemmJob::macs).sum())
    }
}

/// Reads a manifest from disk.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<LayerManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LayerManifest::parse(&text)
}

/// Resolves a bundled model name or a manifest path.
pub fn resolve_model(spec: &str) -> Result<LayerManifest> {
    if bundled_source(spec).is_some() {
        LayerManifest::bundled(spec)
    } else if Path::new(spec).exists() {
        load_manifest(spec)
    } else {
        Err(Error::Config(format!(
            "model {spec:?} is neither a bundled model ({}) nor an existing manifest file",
            BUNDLED_MODELS.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fc_lowers_to_single_row_gemm() {
        let m = LayerManifest::parse("spoga-manifest v1\nmodel x\nfc name=fc in_features=2048 out_features=1000\n").unwrap();
        let jobs = m.to_jobs().unwrap();
        assert_eq!(jobs.len(), 1);
        assert_eq!(jobs[0].dims(), (1, 2048, 1000));
    }

    #[test]
    fn single_conv_delegates_to_im2col() {
        let m = LayerManifest::parse(
            "spoga-manifest v1\nmodel x\nconv name=c in_h=28 in_w=28 in_c=256 out_c=64 kernel_h=1 kernel_w=1 stride=1 padding=0\n",
        )
        .unwrap();
        assert_eq!(m.to_jobs().unwrap()[0].dims(), (784, 256, 64));
    }

    #[test]
    fn order_is_preserved() {
        let m = LayerManifest::parse(
            "spoga-manifest v1\nmodel x\nfc name=a in_features=3 out_features=4\nfc name=b in_features=5 out_features=6\n",
        )
        .unwrap();
        let dims: Vec<_> = m.to_jobs().unwrap().iter().map(|j| j.dims()).collect();
        assert_eq!(dims, vec![(1, 3, 4), (1, 5, 6)]);
    }

    #[test]
    fn grouped_conv_yields_one_job_per_group() {
        let m = LayerManifest::parse(
            "spoga-manifest v1\nmodel x\nconv name=dw in_h=8 in_w=8 in_c=6 out_c=6 kernel_h=3 kernel_w=3 stride=1 padding=1 groups=6\n",
        )
        .unwrap();
        let jobs = m.to_jobs().unwrap();
        assert_eq!(jobs.len(), 6);
        assert!(jobs.iter().all(|j| j.dims() == (64, 9, 1)));
    }

    #[test]
    fn parse_errors() {
        let cases: &[(&str, usize, &str)] = &[
            ("", 1, "empty"),
            ("# only a comment\n\n", 2, "empty"),
            ("spoga-manifest v2\n", 1, "header"),
            ("spoga-manifest v1\nconv name=a in_h=1\n", 2, "before `model`"),
            ("spoga-manifest v1\nmodel m\n", 2, "no layers"),
            ("spoga-manifest v1\nmodel m\nfc name=a in_features=3\n", 3, "`out_features`"),
            ("spoga-manifest v1\nmodel m\nfc name=a in_features=3 out_features=-4\n", 3, "`out_features`"),
            ("spoga-manifest v1\nmodel m\nfc name=a in_features=3.5 out_features=4\n", 3, "`in_features`"),
            ("spoga-manifest v1\nmodel m\nfc name=a in_features=3 out_features=4 bias=1\n", 3, "`bias`"),
            ("spoga-manifest v1\nmodel m\nfc in_features=3 out_features=4\n", 3, "`name`"),
            ("spoga-manifest v1\nmodel m\nfc name=a in_features=3 in_features=3 out_features=4\n", 3, "repeated"),
            ("spoga-manifest v1\nmodel m\npool name=p\n", 3, "unknown record"),
        ];
        for (text, line, needle) in cases {
            match LayerManifest::parse(text) {
                Err(Error::Parse { line: l, message }) => {
                    assert_eq!(l, *line, "{text:?}: {message}");
                    assert!(message.contains(needle), "{text:?}: {message}");
                }
                other => panic!("{text:?}: expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn geometry_errors_name_the_layer() {
        let text = "spoga-manifest v1\nmodel m\nconv name=bad in_h=2 in_w=2 in_c=1 out_c=1 kernel_h=5 kernel_w=5 stride=1 padding=0\n";
        match LayerManifest::parse(text) {
            Err(Error::Geometry(msg)) => assert!(msg.contains("bad") && msg.contains("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bundled_models_parse() {
        for name in BUNDLED_MODELS {
            let m = LayerManifest::bundled(name).unwrap();
            assert_eq!(m.model, name);
        }
        assert!(LayerManifest::bundled("vgg16").is_err());
    }
}
