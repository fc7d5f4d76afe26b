//! Per-layer workload analysis: operation counts, external-memory traffic,
//! and computation-to-communication (CTC) ratios. All counts use exact
//! integer arithmetic; floats appear only at ratio boundaries.
//!
//! Conventions: one MAC counts as 2 ops (multiply + accumulate). POOL layers
//! contribute comparison/add ops (R*S per output element) but no MACs.

use crate::error::Result;
use crate::model::{LayerDescriptor, LayerKind, NetworkModel};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct LayerWorkload {
    pub index: usize,
    pub kind: LayerKind,
    /// Total operations (1 MAC = 2 ops; POOL: 1 op per kernel element).
    pub ops: u64,
    /// MAC count (0 for POOL).
    pub macs: u64,
    pub weight_bits: u64,
    pub ifm_bits: u64,
    pub ofm_bits: u64,
    /// ops per byte of external traffic, all tensors counted once.
    pub ctc: f64,
}

impl LayerWorkload {
    pub fn traffic_bits(&self) -> u64 {
        self.weight_bits + self.ifm_bits + self.ofm_bits
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkloadProfile {
    pub per_layer: Vec<LayerWorkload>,
    pub total_ops: u64,
    pub total_macs: u64,
    /// Network total in Giga-ops.
    pub total_gop: f64,
}

/// Operation count of one layer. CONV/FC: 2*H_out*W_out*R*S*CHin*CHout.
/// POOL: H_out*W_out*R*S*CHin.
pub fn layer_ops(layer: &LayerDescriptor) -> u64 {
    let spatial = layer.h_out as u64 * layer.w_out as u64 * layer.r as u64 * layer.s as u64;
    match layer.kind {
        LayerKind::Pool => spatial * layer.ch_in as u64,
        _ => 2 * spatial * layer.ch_in as u64 * layer.ch_out as u64,
    }
}

pub fn layer_macs(layer: &LayerDescriptor) -> u64 {
    match layer.kind {
        LayerKind::Pool => 0,
        _ => layer_ops(layer) / 2,
    }
}

/// External traffic of one layer in bits, each tensor counted once
/// (minimum-traffic assumption; scheduling-induced re-fetch is modeled by
/// the group multipliers in the architecture models, not here).
pub fn layer_traffic(layer: &LayerDescriptor) -> (u64, u64, u64) {
    let weight_bits = layer.weight_elems() * layer.ww as u64;
    let ifm_bits = layer.input_elems() * layer.dw as u64;
    let ofm_bits = layer.output_elems() * layer.dw as u64;
    (weight_bits, ifm_bits, ofm_bits)
}

/// ops per byte of external traffic.
pub fn layer_ctc(layer: &LayerDescriptor) -> f64 {
    let (w, i, o) = layer_traffic(layer);
    let bytes = (w + i + o) as f64 / 8.0;
    layer_ops(layer) as f64 / bytes
}

/// Arithmetic intensity seen by a pipeline stage, where intermediate feature
/// maps stay on chip and only weights cross the external memory boundary.
/// POOL layers move no weights; their intensity is reported as infinite.
pub fn layer_weight_reuse_ctc(layer: &LayerDescriptor) -> f64 {
    let (w, _, _) = layer_traffic(layer);
    if w == 0 {
        return f64::INFINITY;
    }
    layer_ops(layer) as f64 / (w as f64 / 8.0)
}

pub fn profile_network(net: &NetworkModel) -> WorkloadProfile {
    let per_layer: Vec<LayerWorkload> = net
        .layers
        .iter()
        .map(|l| {
            let (weight_bits, ifm_bits, ofm_bits) = layer_traffic(l);
            LayerWorkload {
                index: l.index,
                kind: l.kind,
                ops: layer_ops(l),
                macs: layer_macs(l),
                weight_bits,
                ifm_bits,
                ofm_bits,
                ctc: layer_ctc(l),
            }
        })
        .collect();
    let total_ops: u64 = per_layer.iter().map(|w| w.ops).sum();
    let total_macs: u64 = per_layer.iter().map(|w| w.macs).sum();
    WorkloadProfile {
        per_layer,
        total_ops,
        total_macs,
        total_gop: total_ops as f64 / 1e9,
    }
}

impl WorkloadProfile {
    /// Normalized traffic over a 1-based inclusive layer range: the summed
    /// byte traffic sum(OP_i / CTC_i).
    pub fn traffic_bytes(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        let bits: u64 = self
            .per_layer
            .iter()
            .filter(|w| range.contains(&w.index))
            .map(|w| w.traffic_bits())
            .sum();
        bits as f64 / 8.0
    }

    pub fn ops_range(&self, range: std::ops::RangeInclusive<usize>) -> u64 {
        self.per_layer
            .iter()
            .filter(|w| range.contains(&w.index))
            .map(|w| w.ops)
            .sum()
    }

    pub fn macs_range(&self, range: std::ops::RangeInclusive<usize>) -> u64 {
        self.per_layer
            .iter()
            .filter(|w| range.contains(&w.index))
            .map(|w| w.macs)
            .sum()
    }
}

/// Median of a slice of (numerator, denominator) CTC rationals, returned as
/// f64. Exact integer ordering via cross-multiplication.
pub fn median_ctc(values: &mut [(u64, u64)]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| {
        // a.0/a.1 vs b.0/b.1
        (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
    });
    let mid = &values[values.len() / 2];
    mid.0 as f64 / mid.1 as f64
}

/// Emit the per-layer profile as CSV.
pub fn profile_csv(profile: &WorkloadProfile) -> String {
    let mut out = String::from("index,kind,ops,weight_bits,ifm_bits,ofm_bits,ctc\n");
    for w in &profile.per_layer {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.4}\n",
            w.index,
            w.kind.as_str(),
            w.ops,
            w.weight_bits,
            w.ifm_bits,
            w.ofm_bits,
            w.ctc
        ));
    }
    out
}

pub fn write_profile_csv(profile: &WorkloadProfile, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, profile_csv(profile)).map_err(|e| crate::error::Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;
    use approx::assert_relative_eq;

    fn conv_layer(
        h_in: u32,
        ch_in: u32,
        ch_out: u32,
        r: u32,
        stride: u32,
        pad: &str,
    ) -> LayerDescriptor {
        let net = parse_network(&format!(
            r#"{{"name":"t","input_shape":[{ch_in},{h_in},{h_in}],
                "layers":[{{"kind":"conv","out_channels":{ch_out},"kernel":{r},
                            "stride":{stride},"pad":{pad}}}]}}"#
        ))
        .unwrap();
        net.layers[0].clone()
    }

    /// Brute-force op counter: walks the full output loop nest.
    fn ops_by_enumeration(l: &LayerDescriptor) -> u64 {
        let mut count: u64 = 0;
        for _ in 0..l.h_out {
            for _ in 0..l.w_out {
                for _ in 0..l.r {
                    for _ in 0..l.s {
                        for _ in 0..l.ch_in {
                            count += match l.kind {
                                LayerKind::Pool => 1,
                                _ => 2 * l.ch_out as u64,
                            };
                        }
                    }
                }
            }
        }
        count
    }

    /// Brute-force traffic counter: enumerates tensor elements.
    fn traffic_by_enumeration(l: &LayerDescriptor) -> (u64, u64, u64) {
        let mut w = 0u64;
        if l.kind != LayerKind::Pool {
            for _ in 0..l.r {
                for _ in 0..l.s {
                    for _ in 0..l.ch_in {
                        w += l.ch_out as u64 * l.ww as u64;
                    }
                }
            }
        }
        let mut i = 0u64;
        for _ in 0..l.h_in {
            for _ in 0..l.w_in {
                i += l.ch_in as u64 * l.dw as u64;
            }
        }
        let mut o = 0u64;
        for _ in 0..l.h_out {
            for _ in 0..l.w_out {
                o += l.ch_out as u64 * l.dw as u64;
            }
        }
        (w, i, o)
    }

    #[test]
    fn conv_ops_match_enumeration_oracle() {
        let l = conv_layer(8, 16, 16, 3, 1, "\"same\"");
        assert_eq!(layer_ops(&l), 294_912);
        assert_eq!(layer_ops(&l), ops_by_enumeration(&l));
    }

    #[test]
    fn unit_conv_is_one_mac() {
        let l = conv_layer(1, 1, 1, 1, 1, "0");
        assert_eq!(layer_ops(&l), 2);
    }

    #[test]
    fn fc_ops_direct_count() {
        let net = parse_network(
            r#"{"name":"t","input_shape":[4096,1,1],
                "layers":[{"kind":"fc","out_features":1000}]}"#,
        )
        .unwrap();
        assert_eq!(layer_ops(&net.layers[0]), 8_192_000);
    }

    #[test]
    fn conv_traffic_example() {
        let l = conv_layer(8, 16, 16, 3, 1, "\"same\"");
        let (w, i, o) = layer_traffic(&l);
        assert_eq!((w, i, o), (36_864, 16_384, 16_384));
        assert_eq!((w, i, o), traffic_by_enumeration(&l));
    }

    #[test]
    fn one_by_one_conv_traffic() {
        let l = conv_layer(1, 1, 1, 1, 1, "0");
        assert_eq!(layer_traffic(&l), (16, 16, 16));
    }

    #[test]
    fn pool_traffic() {
        let net = parse_network(
            r#"{"name":"t","input_shape":[64,8,8],
                "layers":[{"kind":"pool","kernel":2,"stride":2}]}"#,
        )
        .unwrap();
        let (w, i, o) = layer_traffic(&net.layers[0]);
        assert_eq!((w, i, o), (0, 65_536, 16_384));
    }

    #[test]
    fn ctc_examples() {
        let l = conv_layer(8, 16, 16, 3, 1, "\"same\"");
        assert_relative_eq!(layer_ctc(&l), 33.88, max_relative = 1e-3);
        let tiny = conv_layer(1, 1, 1, 1, 1, "0");
        assert_relative_eq!(layer_ctc(&tiny), 2.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn ctc_formula_matches_enumeration_on_random_convs() {
        // ctc by formula must equal ops/bytes from element enumeration,
        // exactly, for a spread of conv shapes.
        for (h, cin, cout, r, st) in [
            (6u32, 3u32, 8u32, 3u32, 1u32),
            (9, 4, 4, 3, 2),
            (12, 8, 16, 5, 1),
            (7, 2, 6, 1, 1),
            (10, 16, 8, 3, 3),
        ] {
            let l = conv_layer(h, cin, cout, r, st, "\"same\"");
            let ops = ops_by_enumeration(&l);
            let (w, i, o) = traffic_by_enumeration(&l);
            let expect = ops as f64 / ((w + i + o) as f64 / 8.0);
            assert_relative_eq!(layer_ctc(&l), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn doubling_spatial_dims_at_least_doubles_weight_dominated_ctc() {
        // 512-channel 3x3 conv at 4x4: traffic is weight-dominated, so CTC
        // grows ~quadratically with the spatial dims.
        let small = conv_layer(4, 512, 512, 3, 1, "\"same\"");
        let big = conv_layer(8, 512, 512, 3, 1, "\"same\"");
        assert!(layer_ctc(&big) >= 2.0 * layer_ctc(&small));
    }

    #[test]
    fn vgg16_total_gop() {
        let net = crate::zoo::vgg16_conv(224, 224, 16);
        let p = profile_network(&net);
        assert!(p.total_gop > 30.6 && p.total_gop < 30.8, "got {}", p.total_gop);
        // Exact integer aggregate: totals must equal the per-layer sum.
        let sum: u64 = net.layers.iter().map(layer_ops).sum();
        assert_eq!(p.total_ops, sum);
    }

    #[test]
    fn single_layer_profile() {
        let net = parse_network(
            r#"{"name":"t","input_shape":[1,1,1],
                "layers":[{"kind":"conv","out_channels":1,"kernel":1,"pad":0}]}"#,
        )
        .unwrap();
        let p = profile_network(&net);
        assert_eq!(p.per_layer.len(), 1);
        assert_relative_eq!(p.total_gop, 2e-9, max_relative = 1e-12);
    }

    #[test]
    fn input_size_sweep_has_nondecreasing_median_ctc() {
        let mut last = 0.0;
        for (h, w) in crate::zoo::input_size_cases() {
            let net = crate::zoo::vgg16_conv(h, w, 16);
            let mut vals: Vec<(u64, u64)> = net
                .layers
                .iter()
                .filter(|l| l.kind == LayerKind::Conv)
                .map(|l| {
                    let (wb, ib, ob) = layer_traffic(l);
                    (layer_ops(l) * 8, wb + ib + ob)
                })
                .collect();
            let med = median_ctc(&mut vals);
            assert!(
                med >= last,
                "median CTC decreased at {h}x{w}: {med} < {last}"
            );
            last = med;
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let net = crate::zoo::vgg16_conv(32, 32, 16);
        let csv = profile_csv(&profile_network(&net));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,kind,ops,weight_bits,ifm_bits,ofm_bits,ctc");
        assert_eq!(lines.len(), 1 + net.layers.len());
    }
}
