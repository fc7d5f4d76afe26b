//! Layer-pipelined architecture model (one dedicated stage per DNN layer):
//! cycle-exact stage latencies, the DSP/BRAM cost model, the proportional
//! computation-resource allocator with greedy doubling, and the column-cache
//! bandwidth allocator.

use crate::error::{Error, Result};
use crate::model::{HardwarePlatform, LayerDescriptor, LayerKind, NetworkModel};
use crate::profile::{layer_macs, profile_network};
use crate::resource::{bram_cost, ceil_div, dsp_for_macs, pow2_ceil, pow2_floor, ResourceUsage};
use serde::Serialize;

/// Configuration and cost of one pipeline stage.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineStage {
    pub layer_index: usize,
    pub kind: LayerKind,
    /// Input-channel parallelism. For POOL stages this mirrors the
    /// preceding MAC stage (the pool engine consumes its output rate).
    pub cpf: u64,
    /// Kernel (output-channel) parallelism; 1 for POOL.
    pub kpf: u64,
    /// Cached input columns.
    pub col: u64,
    /// Input-buffer read-port width in bits.
    pub width_rd: u64,
    /// Input-buffer depth in entries.
    pub depth_rd: u64,
    /// Input-buffer write-port width in bits.
    pub width_wr: u64,
    /// Allocated external bandwidth, bits/s (weights).
    pub bw_alloc: f64,
    pub cycles: u64,
    pub latency: f64,
    pub dsp: u64,
    pub bram_weight: u64,
    pub bram_input: u64,
}

impl PipelineStage {
    pub fn pf(&self) -> u64 {
        if self.kind.is_mac() {
            self.cpf * self.kpf
        } else {
            0
        }
    }

    pub fn bram(&self) -> u64 {
        self.bram_weight + self.bram_input
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineDesign {
    pub stages: Vec<PipelineStage>,
    pub batch: u64,
    pub latencies: Vec<f64>,
    pub max_latency: f64,
    pub frames_per_sec: f64,
    /// Total ops of the covered layers, in GOP.
    pub covered_gop: f64,
    pub covered_gop_mac: f64,
    pub throughput_gops: f64,
    pub resources: ResourceUsage,
    /// Set when the bandwidth allocator exits with demand above budget.
    pub bandwidth_bound: bool,
}

/// Exact stage cycle count for a MAC layer at the given parallelism:
/// ceil(CHin/CPF) * ceil(CHout/KPF) * H_out * W_out * R * S.
///
/// The ceiling form penalizes non-dividing parallelism and reduces to the
/// ideal workload/(CPF*KPF) when both factors divide.
pub fn stage_cycles(layer: &LayerDescriptor, cpf: u64, kpf: u64) -> Result<u64> {
    if cpf == 0 || kpf == 0 {
        return Err(Error::Domain("stage parallelism must be >= 1".into()));
    }
    Ok(ceil_div(layer.ch_in as u64, cpf)
        * ceil_div(layer.ch_out as u64, kpf)
        * layer.h_out as u64
        * layer.w_out as u64
        * layer.r as u64
        * layer.s as u64)
}

/// POOL stage cycles, driven at the preceding stage's channel parallelism.
pub fn pool_stage_cycles(layer: &LayerDescriptor, cpf_prev: u64) -> Result<u64> {
    if cpf_prev == 0 {
        return Err(Error::Domain("stage parallelism must be >= 1".into()));
    }
    Ok(layer.h_out as u64
        * layer.w_out as u64
        * layer.r as u64
        * layer.s as u64
        * ceil_div(layer.ch_in as u64, cpf_prev))
}

/// Stage latency in seconds plus the exact cycle count.
pub fn stage_latency(
    layer: &LayerDescriptor,
    cpf: u64,
    kpf: u64,
    freq_hz: f64,
) -> Result<(u64, f64)> {
    let cycles = stage_cycles(layer, cpf, kpf)?;
    Ok((cycles, cycles as f64 / freq_hz))
}

/// Split a parallelism factor into (CPF, KPF): CPF = min(pow2_floor(sqrt(PF)),
/// pow2_floor(CHin)), KPF = PF/CPF clamped to CHout. The balanced split keeps
/// buffer ports regular; clamps drop parallelism a layer cannot use.
pub fn split_pf(pf: u64, ch_in: u32, ch_out: u32) -> (u64, u64) {
    debug_assert!(pf >= 1 && pf.is_power_of_two());
    let cpf = pow2_floor(pf.isqrt()).min(pow2_floor(ch_in.max(1) as u64));
    let kpf = (pf / cpf).min(pow2_floor(ch_out.max(1) as u64));
    (cpf, kpf)
}

fn weight_buffer_blocks(layer: &LayerDescriptor, cpf: u64, kpf: u64) -> u64 {
    if layer.kind == LayerKind::Pool {
        return 0;
    }
    // One kernel tile deep, double-buffered so loads overlap compute.
    let width = cpf * kpf * layer.ww as u64;
    let depth = layer.r as u64 * layer.s as u64 * ceil_div(layer.ch_in as u64, cpf);
    2 * bram_cost(width, depth)
}

fn initial_input_depth(layer: &LayerDescriptor, cpf: u64) -> u64 {
    // One cached column of the input feature map, channel-tiled by CPF.
    layer.h_in as u64 * ceil_div(layer.ch_in as u64, cpf)
}

/// Resource usage of one stage (DSPs from the MAC array, BRAM from the
/// input buffer geometry plus the double-buffered weight buffer).
pub fn stage_resources(stage: &PipelineStage, layer: &LayerDescriptor, alpha: u64) -> ResourceUsage {
    let dsp = if layer.kind.is_mac() {
        dsp_for_macs(stage.cpf * stage.kpf, alpha)
    } else {
        0
    };
    ResourceUsage {
        dsp,
        bram: bram_cost(stage.width_rd, stage.depth_rd) + weight_buffer_blocks(layer, stage.cpf, stage.kpf),
        bw: stage.bw_alloc,
        lut: 0,
    }
}

/// Throughput of a pipeline design: frames/s = batch / max stage latency,
/// GOP/s = frames/s * covered GOP.
pub fn pipeline_throughput(latencies: &[f64], batch: u64, covered_gop: f64) -> Result<(f64, f64)> {
    if latencies.is_empty() {
        return Err(Error::Domain("pipeline design has no stages".into()));
    }
    let max = latencies.iter().cloned().fold(f64::MIN, f64::max);
    let fps = batch as f64 / max;
    Ok((fps, fps * covered_gop))
}

/// Proportional computation-resource allocation with greedy doubling.
///
/// `macs` holds the MAC workload of each allocatable (CONV/FC) layer.
/// Initial PF_i is the power-of-two floor of the proportional share; the
/// layer with maximum C_j/R_j is then doubled while the doubled total still
/// fits, stopping at the first misfit. With `literal_double_count` the fit
/// test charges the doubling as +2*R_j instead of +R_j.
pub fn allocate_compute(
    macs: &[u64],
    caps: &[u64],
    r_total: u64,
    literal_double_count: bool,
) -> Result<Vec<u64>> {
    let n = macs.len() as u64;
    if n == 0 {
        return Err(Error::Domain("no MAC layers to allocate".into()));
    }
    if r_total < n {
        return Err(Error::Infeasible(format!(
            "parallelism budget {r_total} below layer count {n}"
        )));
    }
    let c_total: u128 = macs.iter().map(|&c| c as u128).sum();
    let mut pf: Vec<u64> = macs
        .iter()
        .map(|&c| {
            let share = (c as u128 * r_total as u128 / c_total.max(1)) as u64;
            pow2_floor(share.max(1))
        })
        .collect();

    // The max(1,...) floor can overshoot the budget when many tiny layers
    // round up; shave the largest assignments back down.
    while pf.iter().sum::<u64>() > r_total {
        let j = (0..pf.len())
            .filter(|&j| pf[j] > 1)
            .max_by_key(|&j| pf[j])
            .ok_or_else(|| {
                Error::Infeasible("budget cannot host one unit per layer".into())
            })?;
        pf[j] /= 2;
    }

    loop {
        let total: u64 = pf.iter().sum();
        if total > r_total {
            break;
        }
        // Most starved layer by C_j/R_j, skipping layers already at their
        // useful parallelism cap; exact rational comparison, ties to the
        // earliest layer.
        let j = (0..pf.len()).filter(|&j| pf[j] < caps[j]).fold(
            None,
            |best: Option<usize>, j| match best {
                None => Some(j),
                Some(b) => {
                    if macs[j] as u128 * pf[b] as u128 > macs[b] as u128 * pf[j] as u128 {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            },
        );
        let Some(j) = j else { break };
        let added = if literal_double_count { 2 * pf[j] } else { pf[j] };
        if total + added <= r_total {
            pf[j] *= 2;
        } else {
            break;
        }
    }
    Ok(pf)
}

/// Build the per-layer stage list for `layers` given PF assignments for its
/// MAC layers (in order). POOL stages inherit the preceding MAC stage's CPF.
pub fn build_stages(
    layers: &[LayerDescriptor],
    pf: &[u64],
    freq_hz: f64,
) -> Result<Vec<PipelineStage>> {
    let mut stages = Vec::with_capacity(layers.len());
    let mut mac_i = 0usize;
    let mut prev_cpf = 1u64;
    for layer in layers {
        let stage = if layer.kind.is_mac() {
            let (cpf, kpf) = split_pf(pf[mac_i], layer.ch_in, layer.ch_out);
            mac_i += 1;
            let (cycles, latency) = stage_latency(layer, cpf, kpf, freq_hz)?;
            prev_cpf = cpf;
            PipelineStage {
                layer_index: layer.index,
                kind: layer.kind,
                cpf,
                kpf,
                col: 1,
                width_rd: cpf * layer.dw as u64,
                depth_rd: initial_input_depth(layer, cpf),
                width_wr: kpf * layer.dw as u64,
                bw_alloc: 0.0,
                cycles,
                latency,
                dsp: 0,
                bram_weight: 0,
                bram_input: 0,
            }
        } else {
            // POOL is fused onto the producing stage's output path: it has
            // its own pipeline slot and latency but no buffers of its own.
            let cpf = prev_cpf;
            let cycles = pool_stage_cycles(layer, cpf)?;
            PipelineStage {
                layer_index: layer.index,
                kind: layer.kind,
                cpf,
                kpf: 1,
                col: 1,
                width_rd: 0,
                depth_rd: 0,
                width_wr: 0,
                bw_alloc: 0.0,
                cycles,
                latency: cycles as f64 / freq_hz,
                dsp: 0,
                bram_weight: 0,
                bram_input: 0,
            }
        };
        stages.push(stage);
    }
    // Fill cost fields.
    for (stage, layer) in stages.iter_mut().zip(layers) {
        let alpha = HardwarePlatform::alpha(layer.ww).unwrap_or(2);
        if layer.kind.is_mac() {
            stage.dsp = dsp_for_macs(stage.cpf * stage.kpf, alpha);
        }
        stage.bram_weight = weight_buffer_blocks(layer, stage.cpf, stage.kpf);
        stage.bram_input = bram_cost(stage.width_rd, stage.depth_rd);
    }
    Ok(stages)
}

/// DSP and BRAM cost of one MAC stage at the given PF (column cache at 1).
pub(crate) fn mac_stage_cost(layer: &LayerDescriptor, pf: u64, alpha: u64) -> (u64, u64) {
    let (cpf, kpf) = split_pf(pf, layer.ch_in, layer.ch_out);
    let dsp = dsp_for_macs(cpf * kpf, alpha);
    let bram = weight_buffer_blocks(layer, cpf, kpf)
        + bram_cost(cpf * layer.dw as u64, initial_input_depth(layer, cpf));
    (dsp, bram)
}

/// Halve the PF of MAC stage `mac_idx` (index into the MAC-layer order).
pub(crate) fn halve_stage(pf: &mut [u64], mac_idx: usize) -> bool {
    if pf[mac_idx] <= 1 {
        return false;
    }
    pf[mac_idx] /= 2;
    true
}

pub(crate) struct BandwidthOutcome {
    pub bandwidth_bound: bool,
    pub total_bw: f64,
}

/// Column-cache bandwidth allocation. Starts every stage at one cached
/// column and BW_i = PF_i * WW * FREQ / (H_out * Col); while total demand
/// exceeds `bw_total`, the hungriest CONV stage trades input-buffer depth
/// for one more cached column (scaling its demand by (Col-1)/Col), until
/// demand fits or `mem_total` input-buffer blocks would be exceeded.
pub(crate) fn allocate_bandwidth(
    stages: &mut [PipelineStage],
    layers: &[LayerDescriptor],
    bw_total: f64,
    mem_total: u64,
    freq_hz: f64,
) -> BandwidthOutcome {
    for (stage, layer) in stages.iter_mut().zip(layers) {
        stage.bw_alloc = if layer.kind.is_mac() && layer.weight_elems() > 0 {
            let bw_r = layer.ww as f64 * freq_hz;
            stage.pf() as f64 * bw_r / (layer.h_out as f64 * stage.col as f64)
        } else {
            0.0
        };
    }
    let mut bandwidth_bound = false;
    loop {
        let total: f64 = stages.iter().map(|s| s.bw_alloc).sum();
        if total <= bw_total {
            break;
        }
        // Growable: CONV stages that can still widen their column cache.
        let j = stages
            .iter()
            .enumerate()
            .filter(|(i, s)| s.kind == LayerKind::Conv && s.col < layers[*i].w_in as u64)
            .max_by(|(_, a), (_, b)| a.bw_alloc.total_cmp(&b.bw_alloc))
            .map(|(i, _)| i);
        let Some(j) = j else {
            bandwidth_bound = true;
            break;
        };
        let layer = &layers[j];
        let grow_j = ceil_div(
            layer.h_in as u64 * layer.ch_in as u64 * layer.stride as u64,
            stages[j].cpf,
        );
        // Deeper caching propagates to the next buffering (MAC) stage;
        // fused POOL slots own no buffer.
        let next = (j + 1..stages.len()).find(|&k| stages[k].kind.is_mac());
        let grow_next = next.map(|k| {
            ceil_div(layer.h_out as u64 * layer.ch_out as u64, stages[k].cpf)
        });
        stages[j].depth_rd += grow_j;
        if let (Some(k), Some(g)) = (next, grow_next) {
            stages[k].depth_rd += g;
        }
        let input_blocks: u64 = stages
            .iter()
            .map(|s| bram_cost(s.width_rd, s.depth_rd))
            .sum();
        if input_blocks <= mem_total {
            stages[j].col += 1;
            let col = stages[j].col as f64;
            stages[j].bw_alloc *= (col - 1.0) / col;
        } else {
            stages[j].depth_rd -= grow_j;
            if let (Some(k), Some(g)) = (next, grow_next) {
                stages[k].depth_rd -= g;
            }
            bandwidth_bound = true;
            break;
        }
    }
    for stage in stages.iter_mut() {
        stage.bram_input = bram_cost(stage.width_rd, stage.depth_rd);
    }
    let total_bw: f64 = stages.iter().map(|s| s.bw_alloc).sum();
    BandwidthOutcome {
        bandwidth_bound,
        total_bw,
    }
}

/// Optimize a dedicated-stage pipeline for the whole network.
pub fn optimize_pipeline(
    net: &NetworkModel,
    platform: &HardwarePlatform,
    batch: u64,
) -> Result<PipelineDesign> {
    if batch == 0 {
        return Err(Error::Domain("batch must be >= 1".into()));
    }
    let profile = profile_network(net);
    let mac_layers: Vec<&LayerDescriptor> =
        net.layers.iter().filter(|l| l.kind.is_mac()).collect();
    if mac_layers.is_empty() {
        return Err(Error::Validation("network has no CONV/FC layers".into()));
    }
    let alpha = mac_layers
        .iter()
        .map(|l| HardwarePlatform::alpha(l.ww))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min()
        .unwrap();
    let r_total = platform.dsp_total * alpha / 2 / batch;
    let macs: Vec<u64> = mac_layers.iter().map(|l| layer_macs(l)).collect();
    let caps: Vec<u64> = mac_layers
        .iter()
        .map(|l| pow2_ceil(l.ch_in as u64) * pow2_ceil(l.ch_out as u64))
        .collect();
    let mut pf = allocate_compute(&macs, &caps, r_total, false)?;

    let mut stages = build_stages(&net.layers, &pf, platform.freq_hz)?;

    // Shrink to the DSP/BRAM budgets. Halvings are scored by how much of
    // the violated resource they actually free (width halving can be
    // cancelled by the buffer growing a block row), preferring stages whose
    // doubled latency stays under the current bottleneck.
    loop {
        let dsp: u64 = stages.iter().map(|s| s.dsp).sum();
        let bram: u64 = stages.iter().map(|s| s.bram()).sum();
        let over_dsp = dsp * batch > platform.dsp_total;
        let over_bram = bram * batch > platform.bram18k_total;
        if !over_dsp && !over_bram {
            break;
        }
        let max_latency = stages.iter().map(|s| s.latency).fold(f64::MIN, f64::max);
        let mut candidates = Vec::new();
        let mut mac_idx = 0usize;
        for (i, stage) in stages.iter().enumerate() {
            if !stage.kind.is_mac() {
                continue;
            }
            let this_mac = mac_idx;
            mac_idx += 1;
            if pf[this_mac] <= 1 {
                continue;
            }
            let layer = &net.layers[i];
            let (hdsp, hbram) = mac_stage_cost(layer, pf[this_mac] / 2, alpha);
            let halved_cost = if over_bram { hbram } else { hdsp };
            let current_cost = if over_bram { stage.bram() } else { stage.dsp };
            let freed = current_cost.saturating_sub(halved_cost);
            let safe = 2.0 * stage.latency <= max_latency * (1.0 + 1e-12);
            candidates.push((this_mac, freed, safe));
        }
        if candidates.is_empty() {
            return Err(Error::Infeasible(format!(
                "pipeline cannot fit platform budgets even at unit parallelism \
                 (needs dsp {} bram {} of {} / {})",
                dsp * batch,
                bram * batch,
                platform.dsp_total,
                platform.bram18k_total
            )));
        }
        let pick = |list: &[(usize, u64, bool)]| -> Option<usize> {
            list.iter()
                .max_by_key(|&&(mi, freed, _)| (freed, std::cmp::Reverse(mi)))
                .map(|&(mi, _, _)| mi)
        };
        let safe_pos: Vec<_> = candidates
            .iter()
            .cloned()
            .filter(|&(_, freed, safe)| safe && freed > 0)
            .collect();
        let any_pos: Vec<_> = candidates
            .iter()
            .cloned()
            .filter(|&(_, freed, _)| freed > 0)
            .collect();
        let victim = pick(&safe_pos)
            .or_else(|| pick(&any_pos))
            .or_else(|| pick(&candidates))
            .unwrap();
        halve_stage(&mut pf, victim);
        stages = build_stages(&net.layers, &pf, platform.freq_hz)?;
    }

    let weight_blocks: u64 = stages.iter().map(|s| s.bram_weight).sum();
    let mem_total = (platform.bram18k_total / batch).saturating_sub(weight_blocks);
    let bw = allocate_bandwidth(
        &mut stages,
        &net.layers,
        platform.bw_bits_per_sec,
        mem_total,
        platform.freq_hz,
    );

    let latencies: Vec<f64> = stages.iter().map(|s| s.latency).collect();
    let covered_gop = profile.total_gop;
    let covered_gop_mac = 2.0 * profile.total_macs as f64 / 1e9;
    let (fps, gops) = pipeline_throughput(&latencies, batch, covered_gop)?;
    let max_latency = latencies.iter().cloned().fold(f64::MIN, f64::max);
    let resources = ResourceUsage {
        dsp: stages.iter().map(|s| s.dsp).sum::<u64>() * batch,
        bram: stages.iter().map(|s| s.bram()).sum::<u64>() * batch,
        bw: bw.total_bw,
        lut: 0,
    };
    debug_assert!(resources.dsp <= platform.dsp_total);
    debug_assert!(resources.bram <= platform.bram18k_total);

    Ok(PipelineDesign {
        stages,
        batch,
        latencies,
        max_latency,
        frames_per_sec: fps,
        covered_gop,
        covered_gop_mac,
        throughput_gops: gops,
        resources,
        bandwidth_bound: bw.bandwidth_bound,
    })
}

/// Per-stage CSV: layer,CPF,KPF,Col,cycles,bw_alloc,dsp,bram.
pub fn pipeline_csv(design: &PipelineDesign) -> String {
    let mut out = String::from("layer,CPF,KPF,Col,cycles,bw_alloc,dsp,bram\n");
    for s in &design.stages {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3e},{},{}\n",
            s.layer_index,
            s.cpf,
            s.kpf,
            s.col,
            s.cycles,
            s.bw_alloc,
            s.dsp,
            s.bram()
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

    #[test]
    fn stage_latency_vgg_first_layer() {
        let l = layer(
            r#"{"name":"t","input_shape":[3,224,224],
                "layers":[{"kind":"conv","out_channels":64,"kernel":3,"pad":"same"}]}"#,
        );
        let (cycles, secs) = stage_latency(&l, 4, 8, 2e8).unwrap();
        assert_eq!(cycles, 3_612_672);
        assert_relative_eq!(secs, 0.01806336, max_relative = 1e-12);
    }

    #[test]
    fn stage_latency_unit() {
        let l = layer(
            r#"{"name":"t","input_shape":[1,1,1],
                "layers":[{"kind":"conv","out_channels":1,"kernel":1,"pad":0}]}"#,
        );
        let (cycles, secs) = stage_latency(&l, 1, 1, 1.0).unwrap();
        assert_eq!(cycles, 1);
        assert_relative_eq!(secs, 1.0);
    }

    #[test]
    fn stage_latency_dividing_parallelism() {
        let l = layer(
            r#"{"name":"t","input_shape":[16,8,8],
                "layers":[{"kind":"conv","out_channels":16,"kernel":3,"pad":"same"}]}"#,
        );
        let (cycles, _) = stage_latency(&l, 4, 4, 2e8).unwrap();
        assert_eq!(cycles, 9_216);
    }

    #[test]
    fn zero_parallelism_is_domain_error() {
        let l = layer(
            r#"{"name":"t","input_shape":[1,1,1],
                "layers":[{"kind":"conv","out_channels":1,"kernel":1,"pad":0}]}"#,
        );
        assert!(stage_latency(&l, 0, 1, 1.0).is_err());
    }

    #[test]
    fn dsp_cost_by_bitwidth() {
        // 4x4 MAC lanes: 16 DSPs at 16-bit, 8 at 8-bit packing.
        assert_eq!(dsp_for_macs(16, 2), 16);
        assert_eq!(dsp_for_macs(16, 4), 8);
    }

    #[test]
    fn input_buffer_block_geometry() {
        assert_eq!(bram_cost(64, 1024), 4);
    }

    #[test]
    fn throughput_examples() {
        let (fps, _) = pipeline_throughput(&[0.010, 0.005], 1, 1.0).unwrap();
        assert_relative_eq!(fps, 100.0);
        let (fps4, _) = pipeline_throughput(&[0.010, 0.005], 4, 1.0).unwrap();
        assert_relative_eq!(fps4, 400.0);
        assert!(pipeline_throughput(&[], 1, 1.0).is_err());
    }

    /// Exhaustive reference: over all power-of-two vectors with sum <=
    /// r_total, maximize min(R_i/C_i); breaks ties toward the allocator's
    /// result shape by preferring larger totals then lexicographic order.
    fn exhaustive_best(macs: &[u64], r_total: u64) -> Vec<u64> {
        fn rec(
            macs: &[u64],
            r_total: u64,
            i: usize,
            cur: &mut Vec<u64>,
            best: &mut Option<(f64, u64, Vec<u64>)>,
        ) {
            if i == macs.len() {
                let used: u64 = cur.iter().sum();
                let score = cur
                    .iter()
                    .zip(macs)
                    .map(|(&r, &c)| r as f64 / c as f64)
                    .fold(f64::MAX, f64::min);
                let better = match best {
                    None => true,
                    Some((bs, bu, _)) => score > *bs || (score == *bs && used > *bu),
                };
                if better {
                    *best = Some((score, used, cur.clone()));
                }
                return;
            }
            let used: u64 = cur.iter().sum();
            let mut r = 1u64;
            while used + r <= r_total - (macs.len() as u64 - 1 - i as u64) {
                cur.push(r);
                rec(macs, r_total, i + 1, cur, best);
                cur.pop();
                r *= 2;
            }
        }
        let mut best = None;
        rec(macs, r_total, 0, &mut Vec::new(), &mut best);
        best.unwrap().2
    }

    #[test]
    fn allocate_compute_exact_proportional() {
        let macs = [8_000_000_000, 4_000_000_000, 2_000_000_000, 2_000_000_000];
        let caps = [u64::MAX; 4];
        let pf = allocate_compute(&macs, &caps, 16, false).unwrap();
        assert_eq!(pf, vec![8, 4, 2, 2]);
        // Independent oracle: maximize the worst-case R_i/C_i.
        let oracle = exhaustive_best(&macs, 16);
        let score = |v: &[u64]| {
            v.iter()
                .zip(&macs)
                .map(|(&r, &c)| r as f64 / c as f64)
                .fold(f64::MAX, f64::min)
        };
        assert_eq!(score(&pf), score(&oracle));
    }

    #[test]
    fn allocate_compute_break_on_misfit() {
        // Initial [4, 2]; doubling layer 1 would need 6 + 4 = 10 > 8.
        let pf = allocate_compute(&[6_000, 2_000], &[u64::MAX; 2], 8, false).unwrap();
        assert_eq!(pf, vec![4, 2]);
    }

    #[test]
    fn allocate_compute_single_layer_floor() {
        let pf = allocate_compute(&[1_000], &[u64::MAX], 7, false).unwrap();
        assert_eq!(pf, vec![4]);
    }

    #[test]
    fn allocate_compute_literal_double_count_flag() {
        // With the literal +2*R_j reading the same case refuses the first
        // doubling (2+2+2*2 > 6) that the +R_j reading accepts.
        let relaxed = allocate_compute(&[1_000, 1_000], &[u64::MAX; 2], 6, false).unwrap();
        let literal = allocate_compute(&[1_000, 1_000], &[u64::MAX; 2], 6, true).unwrap();
        assert_eq!(relaxed, vec![4, 2]);
        assert_eq!(literal, vec![2, 2]);
    }

    #[test]
    fn allocate_compute_infeasible() {
        assert!(matches!(
            allocate_compute(&[1, 1, 1], &[u64::MAX; 3], 2, false),
            Err(Error::Infeasible(_))
        ));
    }

    fn one_stage_fixture() -> (Vec<LayerDescriptor>, Vec<PipelineStage>) {
        // PF = 16 (cpf 4, kpf 4), H_out = 8, WW = 16.
        let net = parse_network(
            r#"{"name":"t","input_shape":[16,8,8],
                "layers":[{"kind":"conv","out_channels":16,"kernel":3,"pad":"same"}]}"#,
        )
        .unwrap();
        let stages = build_stages(&net.layers, &[16], 2e8).unwrap();
        (net.layers, stages)
    }

    #[test]
    fn bandwidth_col_growth() {
        let (layers, mut stages) = one_stage_fixture();
        let out = allocate_bandwidth(&mut stages, &layers, 4e9, 1_000_000, 2e8);
        // BW_1 = 16 * 3.2e9 / 8 = 6.4e9 > 4e9; one more column halves it.
        assert_eq!(stages[0].col, 2);
        assert_relative_eq!(stages[0].bw_alloc, 3.2e9, max_relative = 1e-12);
        assert!(!out.bandwidth_bound);
    }

    #[test]
    fn bandwidth_noop_when_it_fits() {
        let (layers, mut stages) = one_stage_fixture();
        let out = allocate_bandwidth(&mut stages, &layers, 1e10, 1_000_000, 2e8);
        assert_eq!(stages[0].col, 1);
        assert_relative_eq!(stages[0].bw_alloc, 6.4e9, max_relative = 1e-12);
        assert!(!out.bandwidth_bound);
    }

    #[test]
    fn bandwidth_memory_exhausted_restores_depths() {
        let (layers, mut stages) = one_stage_fixture();
        let depth_before = stages[0].depth_rd;
        let out = allocate_bandwidth(&mut stages, &layers, 4e9, 0, 2e8);
        assert_eq!(stages[0].col, 1);
        assert_eq!(stages[0].depth_rd, depth_before);
        assert!(out.bandwidth_bound);
    }

    #[test]
    fn col_demand_scaling_never_below_full_reuse() {
        let (layers, mut stages) = one_stage_fixture();
        // Huge memory, tiny bandwidth target: columns grow to W_in at most.
        allocate_bandwidth(&mut stages, &layers, 1.0, u64::MAX, 2e8);
        let l = &layers[0];
        assert!(stages[0].col <= l.w_in as u64);
        let floor = l.ww as f64 * 2e8 * stages[0].pf() as f64
            / (l.h_out as f64 * l.w_in as f64);
        assert!(stages[0].bw_alloc >= floor * (1.0 - 1e-9));
    }

    #[test]
    fn optimize_vgg16_on_ku115_is_feasible() {
        let net = crate::zoo::vgg16_conv(224, 224, 16);
        let platform = crate::zoo::ku115();
        let design = optimize_pipeline(&net, &platform, 1).unwrap();
        assert!(design.resources.dsp <= platform.dsp_total);
        assert!(design.resources.bram <= platform.bram18k_total);
        // All MAC-stage PFs are powers of two.
        for s in &design.stages {
            if s.kind.is_mac() {
                assert!(s.pf().is_power_of_two(), "stage {} pf {}", s.layer_index, s.pf());
            }
        }
        // The 13-layer baseline sustains the full-resource balanced rate.
        assert!(design.frames_per_sec > 40.0, "fps {}", design.frames_per_sec);
    }

    #[test]
    fn optimize_rejects_oversized_nets() {
        let net = crate::zoo::vgg16_conv(224, 224, 16);
        let mut platform = crate::zoo::ku115();
        platform.dsp_total = 8; // fewer than the 13 MAC layers
        assert!(matches!(
            optimize_pipeline(&net, &platform, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn doubling_bottleneck_pf_never_increases_max_latency() {
        let net = crate::zoo::vgg16_conv(64, 64, 16);
        let macs: Vec<u64> = net
            .layers
            .iter()
            .filter(|l| l.kind.is_mac())
            .map(crate::profile::layer_macs)
            .collect();
        let mut pf: Vec<u64> = vec![1; macs.len()];
        for _ in 0..14 {
            let stages = build_stages(&net.layers, &pf, 2e8).unwrap();
            let max_before = stages.iter().map(|s| s.latency).fold(f64::MIN, f64::max);
            // Double the bottleneck MAC stage.
            let (mac_idx, _) = stages
                .iter()
                .filter(|s| s.kind.is_mac())
                .enumerate()
                .max_by(|a, b| a.1.latency.total_cmp(&b.1.latency))
                .unwrap();
            pf[mac_idx] *= 2;
            let stages_after = build_stages(&net.layers, &pf, 2e8).unwrap();
            let max_after = stages_after
                .iter()
                .map(|s| s.latency)
                .fold(f64::MIN, f64::max);
            assert!(max_after <= max_before * (1.0 + 1e-12));
        }
    }

    #[test]
    fn split_pf_respects_clamps() {
        let (cpf, kpf) = split_pf(512, 512, 512);
        assert_eq!((cpf, kpf), (16, 32));
        let (cpf, kpf) = split_pf(32, 3, 64);
        assert_eq!((cpf, kpf), (2, 16));
        let (cpf, kpf) = split_pf(512, 512, 8);
        assert!(cpf.is_power_of_two() && kpf.is_power_of_two());
        assert!(kpf <= 8);
    }
}
