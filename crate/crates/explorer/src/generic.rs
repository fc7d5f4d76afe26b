//! Reusable MAC-array architecture model: a CPF_g x KPF_g array processing
//! layers sequentially, with two on-chip buffer allocation strategies,
//! input-stationary / weight-stationary dataflows, and line-based feature-map
//! partitioning when buffers cannot hold a whole tensor.

use crate::error::{Error, Result};
use crate::model::{HardwarePlatform, LayerDescriptor, LayerKind, NetworkModel};
use crate::profile::{profile_network, LayerWorkload, WorkloadProfile};
use crate::resource::{ceil_div, dsp_for_macs, ResourceUsage, BRAM_BITS, LUT_RAM_BITS};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BufferStrategy {
    /// BRAM for feature-map and accumulation buffers, LUT-RAM for weights.
    A,
    /// BRAM for all three buffers.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dataflow {
    /// Input stationary: a feature-map group stays on chip, weights stream
    /// once per group.
    Is,
    /// Weight stationary: a weight group stays on chip, feature maps stream
    /// once per group.
    Ws,
}

impl Dataflow {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dataflow::Is => "IS",
            Dataflow::Ws => "WS",
        }
    }
}

/// Physical buffer capacities (ping-pong banks included) and their cost.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BufferCaps {
    pub strategy: BufferStrategy,
    pub cap_abuff_bits: u64,
    pub cap_fbuff_bits: u64,
    pub cap_wbuff_bits: u64,
    pub bram_blocks: u64,
    pub luts: u64,
}

/// Size the three buffers from a BRAM block budget. Strategy A spends a
/// quarter of the blocks on accumulation and the rest on feature maps,
/// keeping weights in LUT-RAM; strategy B gives weights half the blocks,
/// feature maps 3/8, accumulation 1/8.
pub fn size_buffers(strategy: BufferStrategy, bram_blocks: u64, lut_total: u64) -> BufferCaps {
    match strategy {
        BufferStrategy::A => {
            let abuff = bram_blocks / 4;
            let fbuff = bram_blocks - abuff;
            let luts = lut_total / 2;
            BufferCaps {
                strategy,
                cap_abuff_bits: abuff * BRAM_BITS,
                cap_fbuff_bits: fbuff * BRAM_BITS,
                cap_wbuff_bits: luts * LUT_RAM_BITS,
                bram_blocks: abuff + fbuff,
                luts,
            }
        }
        BufferStrategy::B => {
            let wbuff = bram_blocks / 2;
            let abuff = bram_blocks / 8;
            let fbuff = bram_blocks - wbuff - abuff;
            BufferCaps {
                strategy,
                cap_abuff_bits: abuff * BRAM_BITS,
                cap_fbuff_bits: fbuff * BRAM_BITS,
                cap_wbuff_bits: wbuff * BRAM_BITS,
                bram_blocks: wbuff + abuff + fbuff,
                luts: 0,
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericConfig {
    pub cpf_g: u64,
    pub kpf_g: u64,
    pub buffers: BufferCaps,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericLayerSchedule {
    pub layer_index: usize,
    pub dataflow: Dataflow,
    pub g_fm: u64,
    pub g_w: u64,
    pub l_comp: f64,
    pub l_w: f64,
    pub l_ifm: f64,
    pub l_ofm: f64,
    /// Per-batch latency of this layer under the chosen dataflow.
    pub l_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericDesign {
    pub config: GenericConfig,
    pub schedules: Vec<GenericLayerSchedule>,
    pub batch: u64,
    /// Time for one batch through all layers, seconds.
    pub total_latency: f64,
    pub frames_per_sec: f64,
    pub gops: f64,
    pub gops_mac: f64,
    pub resources: ResourceUsage,
}

/// Compute cycles of one layer on the array:
/// ceil(CHin/CPF_g) * ceil(CHout/KPF_g) * H_out * W_out * R * S.
/// POOL layers run on the functional module at the array's channel rate.
pub fn gen_compute_cycles(layer: &LayerDescriptor, cpf_g: u64, kpf_g: u64) -> u64 {
    let spatial =
        layer.h_out as u64 * layer.w_out as u64 * layer.r as u64 * layer.s as u64;
    match layer.kind {
        LayerKind::Pool => spatial * ceil_div(layer.ch_in as u64, cpf_g),
        _ => {
            spatial
                * ceil_div(layer.ch_in as u64, cpf_g)
                * ceil_div(layer.ch_out as u64, kpf_g)
        }
    }
}

pub fn gen_compute_latency(layer: &LayerDescriptor, cpf_g: u64, kpf_g: u64, freq_hz: f64) -> f64 {
    gen_compute_cycles(layer, cpf_g, kpf_g) as f64 / freq_hz
}

/// Memory latencies for a given three-way bandwidth split (bits/s each).
pub fn gen_memory_latencies(
    traffic_bits: (u64, u64, u64),
    bw_split: (f64, f64, f64),
) -> Result<(f64, f64, f64)> {
    let lat = |bits: u64, bw: f64, name: &str| -> Result<f64> {
        if bits == 0 {
            Ok(0.0)
        } else if bw <= 0.0 {
            Err(Error::Domain(format!(
                "zero {name} bandwidth with nonzero traffic"
            )))
        } else {
            Ok(bits as f64 / bw)
        }
    };
    Ok((
        lat(traffic_bits.0, bw_split.0, "weight")?,
        lat(traffic_bits.1, bw_split.1, "ifm")?,
        lat(traffic_bits.2, bw_split.2, "ofm")?,
    ))
}

/// Overall IS latency: weights are refetched once per feature-map group.
pub fn layer_latency_is(l_comp: f64, l_w: f64, l_ifm: f64, l_ofm: f64, g_fm: u64) -> f64 {
    l_comp.max(l_w * g_fm as f64).max(l_ifm).max(l_ofm)
}

/// Overall WS latency: feature maps are restreamed once per weight group.
pub fn layer_latency_ws(l_comp: f64, l_w: f64, l_ifm: f64, l_ofm: f64, g_w: u64) -> f64 {
    l_comp
        .max(l_w)
        .max(l_ifm * g_w as f64)
        .max(l_ofm * g_w as f64)
}

fn group_count(bits: u64, cap_bits: u64) -> Option<u64> {
    if bits == 0 {
        return Some(1);
    }
    let half = cap_bits / 2;
    if half == 0 {
        return None; // no buffer at all: layer cannot be scheduled
    }
    Some(ceil_div(bits, half).max(1))
}

/// Schedule one layer on the array. The generic structure's bandwidth
/// allotment `bw_g` is split across the three streams in proportion to
/// their group-inflated traffic, which equalizes the stream latencies.
/// Batch semantics: under WS a weight group loaded once serves all batch
/// frames; under IS each frame's feature-map groups refetch weights.
pub fn schedule_layer(
    layer: &LayerDescriptor,
    wl: &LayerWorkload,
    config: &GenericConfig,
    bw_g: f64,
    freq_hz: f64,
    batch: u64,
) -> GenericLayerSchedule {
    let l_comp = gen_compute_latency(layer, config.cpf_g, config.kpf_g, freq_hz);
    let b = batch as f64;
    let caps = &config.buffers;
    let (w, ifm, ofm) = (wl.weight_bits, wl.ifm_bits, wl.ofm_bits);

    let g_fm = group_count(ofm, caps.cap_abuff_bits);
    let g_w = group_count(w, caps.cap_wbuff_bits);

    let eval = |dataflow: Dataflow| -> Option<(f64, u64, u64, (f64, f64, f64))> {
        match dataflow {
            Dataflow::Is => {
                let g_fm = g_fm?;
                // Inflated per-frame traffic, proportional split.
                let t = (w * g_fm) as f64 + ifm as f64 + ofm as f64;
                if t == 0.0 {
                    return Some((b * l_comp, g_fm, g_w.unwrap_or(1), (0.0, 0.0, 0.0)));
                }
                let bw_w = bw_g * (w * g_fm) as f64 / t;
                let bw_ifm = bw_g * ifm as f64 / t;
                let bw_ofm = bw_g * ofm as f64 / t;
                let l_w = if w == 0 { 0.0 } else { w as f64 / bw_w };
                let l_ifm = if ifm == 0 { 0.0 } else { ifm as f64 / bw_ifm };
                let l_ofm = if ofm == 0 { 0.0 } else { ofm as f64 / bw_ofm };
                let per_frame = layer_latency_is(l_comp, l_w, l_ifm, l_ofm, g_fm);
                Some((b * per_frame, g_fm, g_w.unwrap_or(1), (l_w, l_ifm, l_ofm)))
            }
            Dataflow::Ws => {
                let g_w = g_w?;
                let t = w as f64 + (g_w * (ifm + ofm)) as f64;
                if t == 0.0 {
                    return Some((b * l_comp, g_fm.unwrap_or(1), g_w, (0.0, 0.0, 0.0)));
                }
                let bw_w = bw_g * w as f64 / t;
                let bw_ifm = bw_g * (g_w * ifm) as f64 / t;
                let bw_ofm = bw_g * (g_w * ofm) as f64 / t;
                let l_w = if w == 0 { 0.0 } else { w as f64 / bw_w };
                let l_ifm = if ifm == 0 { 0.0 } else { ifm as f64 / bw_ifm };
                let l_ofm = if ofm == 0 { 0.0 } else { ofm as f64 / bw_ofm };
                // Weights loaded once per batch; frames restream per group.
                let batched = (b * l_comp)
                    .max(l_w)
                    .max(b * l_ifm * g_w as f64)
                    .max(b * l_ofm * g_w as f64);
                Some((batched, g_fm.unwrap_or(1), g_w, (l_w, l_ifm, l_ofm)))
            }
        }
    };

    // Strategy A keeps only a streaming weight tile on chip, so it runs IS.
    let candidates: &[Dataflow] = match caps.strategy {
        BufferStrategy::A => &[Dataflow::Is],
        BufferStrategy::B => &[Dataflow::Is, Dataflow::Ws],
    };

    let mut best: Option<(Dataflow, (f64, u64, u64, (f64, f64, f64)))> = None;
    for &df in candidates {
        if let Some(res) = eval(df) {
            let better = match &best {
                None => true,
                Some((_, cur)) => res.0 < cur.0,
            };
            if better {
                best = Some((df, res));
            }
        }
    }

    match best {
        Some((dataflow, (l_total, g_fm, g_w, (l_w, l_ifm, l_ofm)))) => GenericLayerSchedule {
            layer_index: layer.index,
            dataflow,
            g_fm,
            g_w,
            l_comp,
            l_w,
            l_ifm,
            l_ofm,
            l_total,
        },
        None => GenericLayerSchedule {
            layer_index: layer.index,
            dataflow: Dataflow::Is,
            g_fm: 0,
            g_w: 0,
            l_comp,
            l_w: f64::INFINITY,
            l_ifm: f64::INFINITY,
            l_ofm: f64::INFINITY,
            l_total: f64::INFINITY,
        },
    }
}

/// Schedule a contiguous layer slice; returns per-layer schedules and the
/// summed per-batch latency.
pub fn schedule_layers(
    layers: &[LayerDescriptor],
    workloads: &[LayerWorkload],
    config: &GenericConfig,
    bw_g: f64,
    freq_hz: f64,
    batch: u64,
) -> (Vec<GenericLayerSchedule>, f64) {
    let schedules: Vec<GenericLayerSchedule> = layers
        .iter()
        .zip(workloads)
        .map(|(l, w)| schedule_layer(l, w, config, bw_g, freq_hz, batch))
        .collect();
    let total = schedules.iter().map(|s| s.l_total).sum();
    (schedules, total)
}

/// Resource usage of the array plus its buffers.
pub fn gen_resources(config: &GenericConfig, alpha: u64) -> ResourceUsage {
    ResourceUsage {
        dsp: dsp_for_macs(config.cpf_g * config.kpf_g, alpha),
        bram: config.buffers.bram_blocks,
        bw: 0.0,
        lut: config.buffers.luts,
    }
}

/// Resource budget for the generic structure.
#[derive(Debug, Clone, Copy)]
pub struct GenericBudget {
    pub dsp: u64,
    pub bram_blocks: u64,
    pub lut: u64,
    pub bw_bits_per_sec: f64,
}

const MAX_PAR_LOG2: u32 = 12;

/// Three-step DSE: enumerate feasible (CPF_g, KPF_g) pairs, pick the best
/// per-layer dataflow under each buffer strategy, and return the lowest
/// total latency. Ties break toward fewer DSPs, then smaller CPF_g, then
/// strategy A.
pub fn gen_dse(
    net: &NetworkModel,
    platform_freq_hz: f64,
    budget: GenericBudget,
    batch: u64,
) -> Result<GenericDesign> {
    let profile = profile_network(net);
    gen_dse_with_profile(net, &profile, platform_freq_hz, budget, batch)
}

pub fn gen_dse_with_profile(
    net: &NetworkModel,
    profile: &WorkloadProfile,
    freq_hz: f64,
    budget: GenericBudget,
    batch: u64,
) -> Result<GenericDesign> {
    if batch == 0 {
        return Err(Error::Domain("batch must be >= 1".into()));
    }
    let alpha = net
        .layers
        .iter()
        .filter(|l| l.kind.is_mac())
        .map(|l| HardwarePlatform::alpha(l.ww))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min()
        .unwrap_or(2);

    // STEP 1: hardware parameter choices that fit the budget.
    let mut pairs = Vec::new();
    for a in 0..=MAX_PAR_LOG2 {
        for b in 0..=MAX_PAR_LOG2 {
            let cpf = 1u64 << a;
            let kpf = 1u64 << b;
            if dsp_for_macs(cpf * kpf, alpha) <= budget.dsp {
                pairs.push((cpf, kpf));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Infeasible(
            "no MAC array fits the DSP budget".into(),
        ));
    }

    // STEP 2: best dataflow per layer for every (pair, strategy).
    // STEP 3: keep the lowest-latency solution.
    let mut best: Option<GenericDesign> = None;
    for strategy in [BufferStrategy::A, BufferStrategy::B] {
        let buffers = size_buffers(strategy, budget.bram_blocks, budget.lut);
        for &(cpf_g, kpf_g) in &pairs {
            let config = GenericConfig {
                cpf_g,
                kpf_g,
                buffers,
            };
            let (schedules, total) = schedule_layers(
                &net.layers,
                &profile.per_layer,
                &config,
                budget.bw_bits_per_sec,
                freq_hz,
                batch,
            );
            if !total.is_finite() {
                continue;
            }
            let resources = ResourceUsage {
                bw: budget.bw_bits_per_sec,
                ..gen_resources(&config, alpha)
            };
            let fps = batch as f64 / total;
            let candidate = GenericDesign {
                config,
                schedules,
                batch,
                total_latency: total,
                frames_per_sec: fps,
                gops: fps * profile.total_gop,
                gops_mac: fps * 2.0 * profile.total_macs as f64 / 1e9,
                resources,
            };
            let better = match &best {
                None => true,
                Some(cur) => {
                    let ka = (
                        candidate.total_latency,
                        candidate.resources.dsp,
                        candidate.config.cpf_g,
                        candidate.config.buffers.strategy as u8,
                    );
                    let kb = (
                        cur.total_latency,
                        cur.resources.dsp,
                        cur.config.cpf_g,
                        cur.config.buffers.strategy as u8,
                    );
                    ka.0 < kb.0
                        || (ka.0 == kb.0
                            && (ka.1 < kb.1
                                || (ka.1 == kb.1
                                    && (ka.2 < kb.2 || (ka.2 == kb.2 && ka.3 < kb.3)))))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible generic configuration".into()))
}

/// Per-layer schedule CSV: layer,dataflow,G_fm,G_w,L_comp,L_w,L_ifm,L_ofm,L_total.
pub fn generic_csv(design: &GenericDesign) -> String {
    let mut out = String::from("layer,dataflow,G_fm,G_w,L_comp,L_w,L_ifm,L_ofm,L_total\n");
    for s in &design.schedules {
        out.push_str(&format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            s.layer_index, s.dataflow.as_str(), s.g_fm, s.g_w, s.l_comp, s.l_w, s.l_ifm, s.l_ofm,
            s.l_total
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_network;
    use approx::assert_relative_eq;

    fn layer(json: &str) -> LayerDescriptor {
        parse_network(json).unwrap().layers[0].clone()
    }

    fn big_conv() -> LayerDescriptor {
        layer(
            r#"{"name":"t","input_shape":[128,112,112],
                "layers":[{"kind":"conv","out_channels":256,"kernel":3,"pad":"same"}]}"#,
        )
    }

    #[test]
    fn compute_cycles_example() {
        let l = big_conv();
        assert_eq!(gen_compute_cycles(&l, 16, 16), 14_450_688);
        assert_relative_eq!(
            gen_compute_latency(&l, 16, 16, 2e8),
            0.07225344,
            max_relative = 1e-12
        );
    }

    #[test]
    fn compute_cycles_unit() {
        let l = layer(
            r#"{"name":"t","input_shape":[1,1,1],
                "layers":[{"kind":"conv","out_channels":1,"kernel":1,"pad":0}]}"#,
        );
        assert_relative_eq!(gen_compute_latency(&l, 1, 1, 1.0), 1.0);
    }

    #[test]
    fn ceiling_waste_visible_for_small_channel_counts() {
        // CHin=3 on a 16-wide array behaves like CHin=16.
        let l = layer(
            r#"{"name":"t","input_shape":[3,8,8],
                "layers":[{"kind":"conv","out_channels":16,"kernel":3,"pad":"same"}]}"#,
        );
        let cycles = gen_compute_cycles(&l, 16, 16);
        let ideal = (3.0 / 16.0) * (16.0 / 16.0) * 64.0 * 9.0;
        assert_eq!(cycles, 576);
        assert_relative_eq!(cycles as f64 / ideal, 16.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn memory_latency_examples() {
        let (l_w, l_ifm, _l_ofm) =
            gen_memory_latencies((4_718_592, 25_690_112, 25_690_112), (1e9, 2e9, 2e9)).unwrap();
        assert_relative_eq!(l_w, 4.718592e-3, max_relative = 1e-12);
        assert_relative_eq!(l_ifm, 12.845056e-3, max_relative = 1e-12);
        // Zero-weight layer: L_w = 0 regardless of split.
        let (l_w0, _, _) = gen_memory_latencies((0, 100, 100), (0.0, 1.0, 1.0)).unwrap();
        assert_eq!(l_w0, 0.0);
        // Zero bandwidth with nonzero traffic is a domain error.
        assert!(gen_memory_latencies((8, 8, 8), (0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn group_count_example() {
        // ofm of 25,690,112 bits against an 8,388,608-bit accumulation
        // buffer (ping-pong halves it): ceil(25690112 / 4194304) = 7.
        assert_eq!(group_count(25_690_112, 8_388_608), Some(7));
    }

    #[test]
    fn everything_on_chip_makes_dataflows_coincide() {
        let l_is = layer_latency_is(1.0, 0.5, 0.3, 0.2, 1);
        let l_ws = layer_latency_ws(1.0, 0.5, 0.3, 0.2, 1);
        assert_eq!(l_is, l_ws);
        assert_eq!(l_is, 1.0);
    }

    #[test]
    fn weight_heavy_layer_prefers_ws() {
        // weights dominate: IS pays G_fm * L_w, WS pays L_w once.
        let l_is = layer_latency_is(0.1, 1.0, 0.05, 0.05, 4);
        let l_ws = layer_latency_ws(0.1, 1.0, 0.05, 0.05, 1);
        assert!(l_ws < l_is);
    }

    #[test]
    fn strategy_b_wbuff_block_charge() {
        // A 1024-block weight-buffer share holds 9,437,184 usable bits once
        // the ping-pong bank doubling is paid: blocks * 18432 / 2.
        let caps = size_buffers(BufferStrategy::B, 2048, 0);
        assert_eq!(caps.cap_wbuff_bits / 2, 9_437_184);
        let wbuff_blocks = caps.cap_wbuff_bits / BRAM_BITS;
        assert_eq!(wbuff_blocks, 1024);
    }

    #[test]
    fn strategy_a_weights_cost_no_bram() {
        let caps = size_buffers(BufferStrategy::A, 1000, 100_000);
        let config = GenericConfig {
            cpf_g: 16,
            kpf_g: 16,
            buffers: caps,
        };
        let r = gen_resources(&config, 2);
        assert_eq!(r.dsp, 256);
        assert_eq!(r.bram, caps.bram_blocks);
        assert!(caps.bram_blocks <= 1000);
        assert!(r.lut > 0);
        // Strategy B charges weight blocks instead.
        let caps_b = size_buffers(BufferStrategy::B, 1000, 100_000);
        assert_eq!(caps_b.luts, 0);
    }

    #[test]
    fn array_dsp_cost() {
        let config = GenericConfig {
            cpf_g: 16,
            kpf_g: 16,
            buffers: size_buffers(BufferStrategy::B, 100, 0),
        };
        assert_eq!(gen_resources(&config, 2).dsp, 256);
    }

    #[test]
    fn dse_prefers_bigger_array_when_compute_bound() {
        // Budget admits (8,8) and (16,8) among others up to 128 MACs; a
        // compute-dominated net wants the largest array.
        let net = crate::zoo::vgg16_conv(224, 224, 16);
        let budget = GenericBudget {
            dsp: 128,
            bram_blocks: 2000,
            lut: 100_000,
            bw_bits_per_sec: 1.536e11,
        };
        let d = gen_dse(&net, 2e8, budget, 1).unwrap();
        assert_eq!(d.config.cpf_g * d.config.kpf_g, 128);
    }

    #[test]
    fn dse_tie_breaks_toward_fewer_dsps() {
        // A single unit layer finishes in the same cycles on any array;
        // the 1x1 array must win.
        let net = parse_network(
            r#"{"name":"t","input_shape":[1,1,1],
                "layers":[{"kind":"conv","out_channels":1,"kernel":1,"pad":0}]}"#,
        )
        .unwrap();
        let budget = GenericBudget {
            dsp: 4096,
            bram_blocks: 1000,
            lut: 100_000,
            bw_bits_per_sec: 1e12,
        };
        let d = gen_dse(&net, 2e8, budget, 1).unwrap();
        assert_eq!((d.config.cpf_g, d.config.kpf_g), (1, 1));
    }

    #[test]
    fn dse_infeasible_without_dsps() {
        let net = crate::zoo::vgg16_conv(32, 32, 16);
        let budget = GenericBudget {
            dsp: 0,
            bram_blocks: 1000,
            lut: 100_000,
            bw_bits_per_sec: 1e11,
        };
        assert!(matches!(
            gen_dse(&net, 2e8, budget, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn deeper_nets_keep_stable_generic_gops() {
        let platform = crate::zoo::ku115();
        let budget = GenericBudget {
            dsp: platform.dsp_total,
            bram_blocks: platform.bram18k_total,
            lut: platform.lut_total,
            bw_bits_per_sec: platform.bw_bits_per_sec,
        };
        let mut gops = Vec::new();
        for extra in [0u32, 1, 3, 5] {
            let net = crate::zoo::vgg_like(extra, 224, 224, 16);
            let d = gen_dse(&net, platform.freq_hz, budget, 1).unwrap();
            gops.push(d.gops);
        }
        let max = gops.iter().cloned().fold(f64::MIN, f64::max);
        let min = gops.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            (max - min) / max < 0.10,
            "generic throughput varied more than 10%: {gops:?}"
        );
    }

    #[test]
    fn enlarging_accum_buffer_never_slows_is() {
        let l = big_conv();
        let wl = &profile_network(&parse_network(
            r#"{"name":"t","input_shape":[128,112,112],
                "layers":[{"kind":"conv","out_channels":256,"kernel":3,"pad":"same"}]}"#,
        )
        .unwrap())
        .per_layer[0]
            .clone();
        let mut last = f64::MAX;
        for blocks in [64u64, 128, 256, 512, 1024, 4096] {
            let caps = size_buffers(BufferStrategy::A, blocks, 100_000);
            let config = GenericConfig {
                cpf_g: 16,
                kpf_g: 16,
                buffers: caps,
            };
            let s = schedule_layer(&l, wl, &config, 1e10, 2e8, 1);
            assert!(s.l_total <= last * (1.0 + 1e-12));
            last = s.l_total;
        }
    }

    #[test]
    fn g_fm_one_makes_is_latency_cap_independent() {
        // Small ofm fits half the buffer at both sizes: latency identical.
        let net = parse_network(
            r#"{"name":"t","input_shape":[16,8,8],
                "layers":[{"kind":"conv","out_channels":16,"kernel":3,"pad":"same"}]}"#,
        )
        .unwrap();
        let wl = profile_network(&net).per_layer[0].clone();
        let mk = |blocks| GenericConfig {
            cpf_g: 4,
            kpf_g: 4,
            buffers: size_buffers(BufferStrategy::A, blocks, 100_000),
        };
        let s1 = schedule_layer(&net.layers[0], &wl, &mk(64), 1e9, 2e8, 1);
        let s2 = schedule_layer(&net.layers[0], &wl, &mk(4096), 1e9, 2e8, 1);
        assert_eq!(s1.g_fm, 1);
        assert_relative_eq!(s1.l_total, s2.l_total, max_relative = 1e-12);
    }
}
