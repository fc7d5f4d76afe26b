//! Network-model and hardware-platform ingestion.
//!
//! Networks are described by a bespoke JSON schema (see `README.md`): a name,
//! an `input_shape` of `[channels, height, width]`, and an ordered `layers`
//! array. Only the first layer needs explicit input dimensions; the rest are
//! derived by chaining. Batch-norm / activation / bias are not standalone
//! layers — they ride along as `fused` tags on the major layer that absorbs
//! them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
    Fc,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Fc => "fc",
        }
    }

    /// Layers that perform MACs and therefore occupy DSPs.
    pub fn is_mac(&self) -> bool {
        matches!(self, LayerKind::Conv | LayerKind::Fc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusedOp {
    Bn,
    Relu,
    Bias,
}

/// One DNN layer with all shapes derived and validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    /// 1-based position in the network.
    pub index: usize,
    pub kind: LayerKind,
    pub h_in: u32,
    pub w_in: u32,
    pub ch_in: u32,
    pub ch_out: u32,
    /// Kernel height / width.
    pub r: u32,
    pub s: u32,
    pub stride: u32,
    pub pad: u32,
    pub h_out: u32,
    pub w_out: u32,
    /// Feature-map bit-width.
    pub dw: u8,
    /// Weight bit-width.
    pub ww: u8,
    #[serde(default)]
    pub fused_ops: Vec<FusedOp>,
}

impl LayerDescriptor {
    pub fn output_elems(&self) -> u64 {
        self.h_out as u64 * self.w_out as u64 * self.ch_out as u64
    }

    pub fn input_elems(&self) -> u64 {
        self.h_in as u64 * self.w_in as u64 * self.ch_in as u64
    }

    pub fn weight_elems(&self) -> u64 {
        match self.kind {
            LayerKind::Pool => 0,
            _ => self.r as u64 * self.s as u64 * self.ch_in as u64 * self.ch_out as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub name: String,
    /// (channels, height, width) of the network input.
    pub input_shape: (u32, u32, u32),
    pub layers: Vec<LayerDescriptor>,
}

impl NetworkModel {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Serialize back to the ingestion schema. Re-parsing the output yields
    /// an identical record.
    pub fn to_json(&self) -> String {
        let raw = RawNetwork {
            name: self.name.clone(),
            input_shape: [self.input_shape.0, self.input_shape.1, self.input_shape.2],
            data_width: None,
            weight_width: None,
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    kind: l.kind.as_str().to_string(),
                    out_channels: Some(l.ch_out),
                    kernel: Some(KernelSpec::Rect([l.r, l.s])),
                    stride: Some(l.stride),
                    pad: Some(PadSpec::Explicit(l.pad)),
                    dw: Some(l.dw),
                    ww: Some(l.ww),
                    fused: l
                        .fused_ops
                        .iter()
                        .map(|f| {
                            match f {
                                FusedOp::Bn => "bn",
                                FusedOp::Relu => "relu",
                                FusedOp::Bias => "bias",
                            }
                            .to_string()
                        })
                        .collect(),
                    in_channels: Some(l.ch_in),
                    h_in: Some(l.h_in),
                    w_in: Some(l.w_in),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("network serialization cannot fail")
    }
}

/// FPGA resource budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwarePlatform {
    pub name: String,
    /// DSP-slice count.
    pub dsp_total: u64,
    /// 18Kb block count.
    pub bram18k_total: u64,
    pub lut_total: u64,
    /// External memory bandwidth, bits/second.
    pub bw_bits_per_sec: f64,
    /// Clock frequency, Hz.
    pub freq_hz: f64,
}

impl HardwarePlatform {
    /// MACs one DSP executes per cycle at the given operand width.
    pub fn alpha(bitwidth: u8) -> Result<u64> {
        match bitwidth {
            16 => Ok(2),
            8 => Ok(4),
            other => Err(Error::Domain(format!(
                "alpha undefined for {other}-bit operands (supported: 8, 16)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawNetwork {
    name: String,
    input_shape: [u32; 3],
    /// File-level default feature-map bit-width (per-layer `dw` overrides).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_width: Option<u8>,
    /// File-level default weight bit-width (per-layer `ww` overrides).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight_width: Option<u8>,
    layers: Vec<RawLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLayer {
    kind: String,
    #[serde(default, alias = "out_features", skip_serializing_if = "Option::is_none")]
    out_channels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pad: Option<PadSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dw: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ww: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    fused: Vec<String>,
    // Explicit shapes; required only on the first layer when they cannot be
    // chained, checked for consistency elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_channels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h_in: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w_in: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum KernelSpec {
    Square(u32),
    Rect([u32; 2]),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PadSpec {
    Explicit(u32),
    Keyword(String),
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn json_err(e: &serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    }
}

/// Output spatial dim: floor((in + 2*pad - k) / stride) + 1.
pub fn out_dim(in_dim: u32, pad: u32, k: u32, stride: u32) -> Result<u32> {
    let padded = in_dim as u64 + 2 * pad as u64;
    if k as u64 > padded {
        return Err(Error::Validation(format!(
            "kernel {k} larger than padded input {padded}"
        )));
    }
    if stride == 0 {
        return Err(Error::Validation("stride must be positive".into()));
    }
    Ok(((padded - k as u64) / stride as u64 + 1) as u32)
}

fn check_bitwidth(bits: u8, field: &str, index: usize) -> Result<()> {
    if bits != 8 && bits != 16 {
        return Err(Error::Validation(format!(
            "layer {index}: {field} must be 8 or 16, got {bits}"
        )));
    }
    Ok(())
}

/// Parse and validate a network description.
pub fn parse_network(text: &str) -> Result<NetworkModel> {
    let raw: RawNetwork = serde_json::from_str(text).map_err(|e| json_err(&e))?;
    build_network(raw)
}

pub fn parse_network_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        column: e.valid_up_to(),
        msg: format!("input is not valid UTF-8: {e}"),
    })?;
    parse_network(text)
}

fn build_network(raw: RawNetwork) -> Result<NetworkModel> {
    if raw.layers.is_empty() {
        return Err(Error::Validation("network has no layers".into()));
    }
    let (in_ch, in_h, in_w) = (raw.input_shape[0], raw.input_shape[1], raw.input_shape[2]);
    if in_ch == 0 || in_h == 0 || in_w == 0 {
        return Err(Error::Validation("input_shape dims must be positive".into()));
    }
    let default_dw = raw.data_width.unwrap_or(16);
    let default_ww = raw.weight_width.unwrap_or(16);

    let mut layers = Vec::with_capacity(raw.layers.len());
    // (ch, h, w) produced by the previous layer.
    let mut prev = (in_ch, in_h, in_w);

    for (i, rl) in raw.layers.into_iter().enumerate() {
        let index = i + 1;
        let kind = match rl.kind.to_ascii_lowercase().as_str() {
            "conv" => LayerKind::Conv,
            "pool" => LayerKind::Pool,
            "fc" => LayerKind::Fc,
            other => {
                return Err(Error::Validation(format!(
                    "layer {index}: unsupported kind '{other}' (supported: conv, pool, fc)"
                )))
            }
        };

        let (r, s) = match (&rl.kernel, kind) {
            (Some(KernelSpec::Square(k)), _) => (*k, *k),
            (Some(KernelSpec::Rect([r, s])), _) => (*r, *s),
            (None, LayerKind::Fc) => (1, 1),
            (None, _) => {
                return Err(Error::Validation(format!(
                    "layer {index}: missing kernel"
                )))
            }
        };
        if r == 0 || s == 0 {
            return Err(Error::Validation(format!(
                "layer {index}: kernel dims must be positive"
            )));
        }

        let stride = match (rl.stride, kind) {
            (Some(0), _) => {
                return Err(Error::Validation(format!(
                    "layer {index}: stride must be positive"
                )))
            }
            (Some(st), _) => st,
            (None, _) => 1,
        };

        // FC layers flatten their input: ch_in = prev ch * h * w, spatial 1x1.
        let (ch_in, h_in, w_in) = if kind == LayerKind::Fc {
            let flat = prev.0 as u64 * prev.1 as u64 * prev.2 as u64;
            if flat > u32::MAX as u64 {
                return Err(Error::Validation(format!(
                    "layer {index}: flattened FC input exceeds supported size"
                )));
            }
            if let Some(c) = rl.in_channels {
                if c as u64 != flat {
                    return Err(Error::Validation(format!(
                        "layer {index}: in_channels {c} does not match flattened predecessor {flat}"
                    )));
                }
            }
            (flat as u32, 1, 1)
        } else {
            let ch_in = rl.in_channels.unwrap_or(prev.0);
            let h_in = rl.h_in.unwrap_or(prev.1);
            let w_in = rl.w_in.unwrap_or(prev.2);
            if (ch_in, h_in, w_in) != prev {
                return Err(Error::Validation(format!(
                    "layer {index}: input shape ({ch_in},{h_in},{w_in}) breaks the chain from \
                     predecessor output ({},{},{})",
                    prev.0, prev.1, prev.2
                )));
            }
            (ch_in, h_in, w_in)
        };

        let ch_out = match kind {
            LayerKind::Pool => {
                if let Some(c) = rl.out_channels {
                    if c != ch_in {
                        return Err(Error::Validation(format!(
                            "layer {index}: pool must keep channel count ({c} != {ch_in})"
                        )));
                    }
                }
                ch_in
            }
            _ => rl.out_channels.ok_or_else(|| {
                Error::Validation(format!("layer {index}: missing out_channels"))
            })?,
        };
        if ch_out == 0 {
            return Err(Error::Validation(format!(
                "layer {index}: out_channels must be positive"
            )));
        }

        // Padding: "same" for conv (exact for odd kernels at stride 1),
        // 0 for pool/fc, unless given explicitly.
        let pad = match rl.pad {
            Some(PadSpec::Explicit(p)) => p,
            Some(PadSpec::Keyword(kw)) => {
                if kw != "same" {
                    return Err(Error::Validation(format!(
                        "layer {index}: unknown pad keyword '{kw}' (use \"same\" or an integer)"
                    )));
                }
                (r - 1) / 2
            }
            None => match kind {
                LayerKind::Conv => (r - 1) / 2,
                _ => 0,
            },
        };

        let (h_out, w_out) = if kind == LayerKind::Fc {
            (1, 1)
        } else {
            (
                out_dim(h_in, pad, r, stride)
                    .map_err(|e| Error::Validation(format!("layer {index}: {e}")))?,
                out_dim(w_in, pad, s, stride)
                    .map_err(|e| Error::Validation(format!("layer {index}: {e}")))?,
            )
        };

        let dw = rl.dw.unwrap_or(default_dw);
        let ww = rl.ww.unwrap_or(default_ww);
        check_bitwidth(dw, "dw", index)?;
        check_bitwidth(ww, "ww", index)?;

        let mut fused_ops = Vec::new();
        for f in &rl.fused {
            match f.to_ascii_lowercase().as_str() {
                "bn" => fused_ops.push(FusedOp::Bn),
                "relu" => fused_ops.push(FusedOp::Relu),
                "bias" => fused_ops.push(FusedOp::Bias),
                other => {
                    return Err(Error::Validation(format!(
                        "layer {index}: unknown fused op '{other}'"
                    )))
                }
            }
        }

        let layer = LayerDescriptor {
            index,
            kind,
            h_in,
            w_in,
            ch_in,
            ch_out,
            r,
            s,
            stride,
            pad,
            h_out,
            w_out,
            dw,
            ww,
            fused_ops,
        };
        prev = (layer.ch_out, layer.h_out, layer.w_out);
        layers.push(layer);
    }

    Ok(NetworkModel {
        name: raw.name,
        input_shape: (in_ch, in_h, in_w),
        layers,
    })
}

/// Parse and validate a platform description.
pub fn parse_platform(text: &str) -> Result<HardwarePlatform> {
    let p: HardwarePlatform = serde_json::from_str(text).map_err(|e| json_err(&e))?;
    for (value, field) in [
        (p.dsp_total as f64, "dsp_total"),
        (p.bram18k_total as f64, "bram18k_total"),
        (p.lut_total as f64, "lut_total"),
        (p.bw_bits_per_sec, "bw_bits_per_sec"),
        (p.freq_hz, "freq_hz"),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Validation(format!("{field} must be positive")));
        }
    }
    Ok(p)
}
