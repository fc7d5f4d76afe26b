//! Split-point exploration: the first SP layers run on a dedicated pipeline
//! structure and the rest on a reusable generic structure, with budgets
//! partitioned by a resource-allocation vector RAV = [SP, Batch, DSP_p,
//! BRAM_p, BW_p]. A particle-swarm global optimizer searches RAVs; two
//! local optimizers size each structure for a given RAV.

use crate::error::{Error, Result};
use crate::generic::{
    gen_resources, schedule_layers, size_buffers, BufferStrategy, GenericConfig,
    GenericLayerSchedule,
};
use crate::model::{HardwarePlatform, LayerDescriptor, NetworkModel};
use crate::pipeline::{build_stages, PipelineStage};
use crate::profile::{profile_network, WorkloadProfile};
use crate::resource::{pow2_ceil, pow2_floor, ResourceUsage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Resource-allocation vector: task split plus the pipeline structure's
/// share of each budget (the generic structure receives the complements).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rav {
    /// Layers 1..=sp map to the pipeline structure; sp <= n-1.
    pub sp: u32,
    pub batch: u64,
    pub dsp_frac: f64,
    pub bram_frac: f64,
    pub bw_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalvingMode {
    /// Halve every stage each pass (default).
    Uniform,
    /// Halve only the costliest stage each pass.
    Costliest,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DseFlags {
    pub halving: HalvingMode,
    /// Charge a doubling as +2*R_j in the computation allocator's fit test.
    pub literal_double_count: bool,
}

impl Default for DseFlags {
    fn default() -> Self {
        DseFlags {
            halving: HalvingMode::Uniform,
            literal_double_count: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PsoParams {
    pub population: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub seed: u64,
    /// Stop after this many consecutive non-improving iterations.
    pub stall_limit: usize,
    pub batch_max: u64,
    /// Upper bound for SP; defaults to n-1.
    pub sp_max: Option<u32>,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            population: 20,
            iterations: 20,
            inertia: 0.7,
            c1: 1.5,
            c2: 1.5,
            seed: 42,
            stall_limit: 2,
            batch_max: 32,
            sp_max: None,
        }
    }
}

/// Sized pipeline structure for the prefix of one RAV.
#[derive(Debug, Clone, Serialize)]
pub struct PipelinePart {
    pub stages: Vec<PipelineStage>,
    /// PF per MAC layer of the prefix, in layer order.
    pub pf: Vec<u64>,
    pub l_p_max: f64,
    /// Per-replica sums.
    pub dsp: u64,
    pub bram: u64,
    /// Weight-stream bandwidth demand at one cached column.
    pub bw_demand: f64,
    /// Materialized budgets.
    pub dsp_budget: u64,
    pub bram_budget: u64,
    pub bw_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridDesign {
    pub rav: Rav,
    pub pipeline: PipelinePart,
    pub generic: GenericConfig,
    pub schedules: Vec<GenericLayerSchedule>,
    /// Per-batch latency of the generic structure.
    pub l_g_total: f64,
    pub frames_per_sec: f64,
    pub gops: f64,
    pub gops_mac: f64,
    pub resources: ResourceUsage,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_gops: f64,
    pub best_sp: u32,
    pub best_batch: u64,
}

fn prefix_mac_layers<'a>(layers: &'a [LayerDescriptor]) -> Vec<&'a LayerDescriptor> {
    layers.iter().filter(|l| l.kind.is_mac()).collect()
}

fn rebuild_part(
    layers: &[LayerDescriptor],
    pf: &[u64],
    freq_hz: f64,
    dsp_budget: u64,
    bram_budget: u64,
    bw_p: f64,
) -> Result<PipelinePart> {
    let stages = build_stages(layers, pf, freq_hz)?;
    let l_p_max = stages.iter().map(|s| s.latency).fold(0.0f64, f64::max);
    let dsp = stages.iter().map(|s| s.dsp).sum();
    let bram = stages.iter().map(|s| s.bram()).sum();
    let bw_demand = stages
        .iter()
        .zip(layers)
        .filter(|(_, l)| l.kind.is_mac() && l.weight_elems() > 0)
        .map(|(s, l)| s.pf() as f64 * l.ww as f64 * freq_hz / l.h_out as f64)
        .sum();
    Ok(PipelinePart {
        stages,
        pf: pf.to_vec(),
        l_p_max,
        dsp,
        bram,
        bw_demand,
        dsp_budget,
        bram_budget,
        bw_p,
    })
}

/// Size the pipeline prefix for one RAV: each MAC layer's PF starts at the
/// parallelism needed to sustain the frame rate the bandwidth share can
/// feed (rounded up, then floored to a power of two), then stages are
/// halved until the structure fits [DSP_p, BRAM_p].
pub fn local_optimize_pipeline(
    rav: &Rav,
    net: &NetworkModel,
    profile: &WorkloadProfile,
    platform: &HardwarePlatform,
    flags: &DseFlags,
) -> Result<PipelinePart> {
    let sp = rav.sp as usize;
    if sp < 1 || sp > net.layers.len() {
        return Err(Error::Domain(format!("split point {sp} out of range")));
    }
    let prefix = &net.layers[..sp];
    let macs = prefix_mac_layers(prefix);

    let bw_p = rav.bw_frac * platform.bw_bits_per_sec;
    let bytes_norm = profile.traffic_bytes(1..=sp);
    let fps_bw = (bw_p / 8.0) / bytes_norm.max(1.0);

    let pf: Vec<u64> = macs
        .iter()
        .map(|l| {
            let wl = &profile.per_layer[l.index - 1];
            let raw = (wl.macs as f64 * fps_bw / platform.freq_hz).ceil().max(1.0);
            let cap = pow2_ceil(l.ch_in as u64) * pow2_ceil(l.ch_out as u64);
            pow2_floor((raw as u64).max(1)).min(cap)
        })
        .collect();

    // Per-replica budgets: the RAV fractions buy the whole batch-replicated
    // structure.
    let dsp_budget = ((rav.dsp_frac * platform.dsp_total as f64) as u64) / rav.batch.max(1);
    let bram_budget = ((rav.bram_frac * platform.bram18k_total as f64) as u64) / rav.batch.max(1);

    let mut pf = pf;
    let mut part = rebuild_part(prefix, &pf, platform.freq_hz, dsp_budget, bram_budget, bw_p)?;
    loop {
        if part.dsp <= dsp_budget && part.bram <= bram_budget {
            break;
        }
        if pf.iter().all(|&v| v <= 1) {
            // Degenerate budgets: unit parallelism everywhere is the floor.
            break;
        }
        let any = match flags.halving {
            HalvingMode::Uniform => {
                let mut any = false;
                for v in pf.iter_mut() {
                    if *v > 1 {
                        *v /= 2;
                        any = true;
                    }
                }
                any
            }
            HalvingMode::Costliest => {
                let over_bram = part.bram > bram_budget;
                let mac_stages: Vec<usize> = part
                    .stages
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.kind.is_mac())
                    .map(|(i, _)| i)
                    .collect();
                let victim = mac_stages
                    .iter()
                    .enumerate()
                    .filter(|(mi, _)| pf[*mi] > 1)
                    .max_by_key(|(_, &si)| {
                        if over_bram {
                            part.stages[si].bram()
                        } else {
                            part.stages[si].dsp
                        }
                    })
                    .map(|(mi, _)| mi);
                match victim {
                    Some(mi) => {
                        pf[mi] /= 2;
                        true
                    }
                    None => false,
                }
            }
        };
        if !any {
            break;
        }
        part = rebuild_part(prefix, &pf, platform.freq_hz, dsp_budget, bram_budget, bw_p)?;
    }

    // Refinement: the bandwidth-derived seeds can undershoot the budgets
    // (small BW_p starves every stage), so grow the most loaded stage while
    // the shares still fit, mirroring the paradigm-1 doubling rule.
    let mac_layers: Vec<&LayerDescriptor> = prefix.iter().filter(|l| l.kind.is_mac()).collect();
    let mut cur_dsp = part.dsp;
    let mut cur_bram = part.bram;
    loop {
        let mut best: Option<(usize, u64, u64)> = None;
        for (j, layer) in mac_layers.iter().enumerate() {
            let cap = pow2_ceil(layer.ch_in as u64) * pow2_ceil(layer.ch_out as u64);
            if pf[j] >= cap {
                continue;
            }
            let wl = &profile.per_layer[layer.index - 1];
            let (old_dsp, old_bram) = stage_cost(layer, pf[j]);
            let (new_dsp, new_bram) = stage_cost(layer, pf[j] * 2);
            let dsp_after = cur_dsp + new_dsp - old_dsp;
            let bram_after = cur_bram + new_bram - old_bram;
            if dsp_after > dsp_budget || bram_after > bram_budget {
                continue;
            }
            // Most starved: max macs/pf, exact rational, ties to earliest.
            let better = match best {
                None => true,
                Some((b, _, _)) => {
                    let wb = &profile.per_layer[mac_layers[b].index - 1];
                    wl.macs as u128 * pf[b] as u128 > wb.macs as u128 * pf[j] as u128
                }
            };
            if better {
                best = Some((j, dsp_after, bram_after));
            }
        }
        match best {
            Some((j, dsp_after, bram_after)) => {
                pf[j] *= 2;
                cur_dsp = dsp_after;
                cur_bram = bram_after;
            }
            None => break,
        }
    }
    part = rebuild_part(prefix, &pf, platform.freq_hz, dsp_budget, bram_budget, bw_p)?;
    Ok(part)
}

fn stage_cost(layer: &LayerDescriptor, pf: u64) -> (u64, u64) {
    let alpha = HardwarePlatform::alpha(layer.ww).unwrap_or(2);
    crate::pipeline::mac_stage_cost(layer, pf, alpha)
}

/// Result of balancing the generic structure against a pipeline part.
#[derive(Debug, Clone)]
pub struct BalancedHybrid {
    pub pipeline: PipelinePart,
    pub config: GenericConfig,
    pub schedules: Vec<GenericLayerSchedule>,
    pub l_g_total: f64,
    pub gen_resources: ResourceUsage,
}

fn balanced_pow2_split(pf: u64) -> (u64, u64) {
    let cpf = pow2_floor(pf.isqrt().max(1));
    (cpf, pf / cpf)
}

/// Grow the generic structure until its per-batch latency matches the
/// pipeline bottleneck, rolling the pipeline back (halving its stages) when
/// global resources cannot host both structures at the requested batch.
pub fn local_optimize_generic(
    rav: &Rav,
    pipeline: &PipelinePart,
    net: &NetworkModel,
    profile: &WorkloadProfile,
    platform: &HardwarePlatform,
    strategy: BufferStrategy,
) -> Option<BalancedHybrid> {
    let sp = rav.sp as usize;
    let tail = &net.layers[sp..];
    let tail_wl = &profile.per_layer[sp..];
    if tail.is_empty() {
        return None;
    }
    let alpha = tail
        .iter()
        .filter(|l| l.kind.is_mac())
        .filter_map(|l| HardwarePlatform::alpha(l.ww).ok())
        .min()
        .unwrap_or(2);
    let bw_g = (platform.bw_bits_per_sec - pipeline.bw_p).max(0.0);
    if bw_g <= 0.0 {
        return None;
    }
    let batch = rav.batch.max(1);

    let mut pipeline = pipeline.clone();
    loop {
        let l_p_max = pipeline.l_p_max;
        let pipe_dsp = pipeline.dsp * batch;
        let pipe_bram = pipeline.bram * batch;
        let bram_left = platform.bram18k_total.saturating_sub(pipe_bram);
        let buffers = size_buffers(strategy, bram_left, platform.lut_total);

        let mut pf_g = 1u64;
        let (mut config, mut schedules, mut l_g);
        loop {
            let (cpf_g, kpf_g) = balanced_pow2_split(pf_g);
            let cand = GenericConfig {
                cpf_g,
                kpf_g,
                buffers,
            };
            let (s, total) = schedule_layers(
                tail,
                tail_wl,
                &cand,
                bw_g,
                platform.freq_hz,
                batch,
            );
            config = cand;
            schedules = s;
            l_g = total;
            let r_g = gen_resources(&config, alpha);
            let within = r_g.dsp + pipe_dsp < platform.dsp_total;
            if l_g > l_p_max && within && pf_g < (1u64 << 24) {
                pf_g *= 2;
            } else {
                break;
            }
        }

        let r_g = gen_resources(&config, alpha);
        let batch_p_dsp = if pipeline.dsp == 0 {
            u64::MAX
        } else {
            platform.dsp_total.saturating_sub(r_g.dsp) / pipeline.dsp
        };
        let batch_p_bram = if pipeline.bram == 0 {
            u64::MAX
        } else {
            platform.bram18k_total.saturating_sub(r_g.bram) / pipeline.bram
        };
        let batch_p = batch_p_dsp.min(batch_p_bram);

        if l_g > l_p_max || batch > batch_p {
            // Roll back: shrink the pipeline to free global resources.
            if pipeline.pf.iter().all(|&v| v <= 1) {
                return None;
            }
            let mut pf = pipeline.pf.clone();
            for v in pf.iter_mut() {
                if *v > 1 {
                    *v /= 2;
                }
            }
            let prefix = &net.layers[..sp];
            pipeline = rebuild_part(
                prefix,
                &pf,
                platform.freq_hz,
                pipeline.dsp_budget,
                pipeline.bram_budget,
                pipeline.bw_p,
            )
            .ok()?;
            continue;
        }

        let gen_res = ResourceUsage { bw: bw_g, ..r_g };
        return Some(BalancedHybrid {
            pipeline,
            config,
            schedules,
            l_g_total: l_g,
            gen_resources: gen_res,
        });
    }
}

/// Evaluate one RAV end to end. Returns the design; infeasible RAVs yield
/// `None` and score zero in the search.
pub fn fitness_score(
    rav: &Rav,
    net: &NetworkModel,
    profile: &WorkloadProfile,
    platform: &HardwarePlatform,
    flags: &DseFlags,
) -> Option<HybridDesign> {
    if rav.sp as usize >= net.layers.len() || rav.sp < 1 || rav.batch < 1 {
        return None;
    }
    let part = local_optimize_pipeline(rav, net, profile, platform, flags).ok()?;

    let mut best: Option<(BalancedHybrid, f64)> = None;
    for strategy in [BufferStrategy::A, BufferStrategy::B] {
        if let Some(core) = local_optimize_generic(rav, &part, net, profile, platform, strategy)
        {
            let fps = rav.batch as f64 / core.pipeline.l_p_max.max(core.l_g_total);
            let better = match &best {
                None => true,
                Some((cur, cur_fps)) => {
                    fps > *cur_fps
                        || (fps == *cur_fps
                            && core.gen_resources.dsp < cur.gen_resources.dsp)
                }
            };
            if better {
                best = Some((core, fps));
            }
        }
    }
    let (core, fps) = best?;

    let batch = rav.batch;
    let mut warnings = Vec::new();
    if core.pipeline.bw_demand > core.pipeline.bw_p {
        warnings.push(format!(
            "pipeline structure is bandwidth-bound: demands {:.3e} of {:.3e} bits/s",
            core.pipeline.bw_demand, core.pipeline.bw_p
        ));
    }
    let resources = ResourceUsage {
        dsp: core.pipeline.dsp * batch + core.gen_resources.dsp,
        bram: core.pipeline.bram * batch + core.gen_resources.bram,
        bw: platform.bw_bits_per_sec,
        lut: core.gen_resources.lut,
    };
    assert!(
        resources.dsp <= platform.dsp_total && resources.bram <= platform.bram18k_total,
        "balanced design exceeded platform budgets"
    );
    let gops = fps * profile.total_gop;
    let gops_mac = fps * 2.0 * profile.total_macs as f64 / 1e9;
    Some(HybridDesign {
        rav: *rav,
        l_g_total: core.l_g_total,
        frames_per_sec: fps,
        gops,
        gops_mac,
        resources,
        warnings,
        pipeline: core.pipeline,
        generic: core.config,
        schedules: core.schedules,
    })
}

struct Particle {
    pos: [f64; 5],
    vel: [f64; 5],
    best_fitness: f64,
    best_pos: [f64; 5],
    best_design: Option<HybridDesign>,
}

fn round_rav(pos: &[f64; 5]) -> Rav {
    Rav {
        sp: pos[0].round() as u32,
        batch: pos[1].round() as u64,
        dsp_frac: pos[2],
        bram_frac: pos[3],
        bw_frac: pos[4],
    }
}

fn clamp(pos: &mut [f64; 5], sp_max: u32, batch_max: u64) {
    pos[0] = pos[0].clamp(1.0, sp_max as f64);
    pos[1] = pos[1].clamp(1.0, batch_max as f64);
    for p in pos.iter_mut().skip(2) {
        *p = p.clamp(0.05, 0.95);
    }
}

fn better_candidate(
    fitness: f64,
    design: &Option<HybridDesign>,
    cur_fitness: f64,
    cur: &Option<HybridDesign>,
) -> bool {
    if fitness != cur_fitness {
        return fitness > cur_fitness;
    }
    // Equal throughput: prefer fewer DSPs, then a lower split point.
    let key = |d: &Option<HybridDesign>| match d {
        Some(d) => (d.resources.dsp, d.rav.sp),
        None => (u64::MAX, u32::MAX),
    };
    key(design) < key(cur)
}

/// PSO over the RAV box with early termination on stalled global best.
/// Deterministic for a fixed seed: particles update in index order from a
/// single seeded stream, and the global best moves only at iteration
/// barriers.
pub fn pso_search(
    net: &NetworkModel,
    platform: &HardwarePlatform,
    params: &PsoParams,
    flags: &DseFlags,
) -> Result<(HybridDesign, Vec<TracePoint>)> {
    let n = net.layers.len();
    if n < 2 {
        return Err(Error::Infeasible(
            "hybrid exploration needs at least 2 layers".into(),
        ));
    }
    let profile = profile_network(net);
    let sp_max = params
        .sp_max
        .unwrap_or((n - 1) as u32)
        .clamp(1, (n - 1) as u32);
    let batch_max = params.batch_max.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Latin-hypercube start: each dimension's samples are stratified across
    // the population (uniform marginals, full-range coverage even for small
    // swarms), with an independent shuffle per dimension.
    let m = params.population.max(1);
    let bounds = [
        (1.0, sp_max as f64),
        (1.0, batch_max as f64),
        (0.05, 0.95),
        (0.05, 0.95),
        (0.05, 0.95),
    ];
    let mut strata: Vec<[f64; 5]> = vec![[0.0; 5]; m];
    for d in 0..5 {
        let mut order: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let (lo, hi) = bounds[d];
        for (i, &slot) in order.iter().enumerate() {
            let u: f64 = rng.gen();
            strata[i][d] = lo + (slot as f64 + u) / m as f64 * (hi - lo);
        }
    }
    let mut particles: Vec<Particle> = strata
        .into_iter()
        .map(|mut pos| {
            clamp(&mut pos, sp_max, batch_max);
            Particle {
                pos,
                vel: [0.0; 5],
                best_fitness: -1.0,
                best_pos: pos,
                best_design: None,
            }
        })
        .collect();

    let evaluate = |pos: &[f64; 5]| -> (f64, Option<HybridDesign>) {
        let rav = round_rav(pos);
        match fitness_score(&rav, net, &profile, platform, flags) {
            Some(d) => (d.gops, Some(d)),
            None => (0.0, None),
        }
    };

    let mut g_fitness = -1.0f64;
    let mut g_pos = particles[0].pos;
    let mut g_design: Option<HybridDesign> = None;

    for p in particles.iter_mut() {
        let (fit, design) = evaluate(&p.pos);
        p.best_fitness = fit;
        p.best_pos = p.pos;
        p.best_design = design;
    }
    for p in &particles {
        if better_candidate(p.best_fitness, &p.best_design, g_fitness, &g_design) {
            g_fitness = p.best_fitness;
            g_pos = p.best_pos;
            g_design = p.best_design.clone();
        }
    }

    let mut trace = Vec::with_capacity(params.iterations + 1);
    let push_point = |trace: &mut Vec<TracePoint>, iter, fit: f64, d: &Option<HybridDesign>| {
        let (sp, batch) = d
            .as_ref()
            .map(|d| (d.rav.sp, d.rav.batch))
            .unwrap_or((0, 0));
        trace.push(TracePoint {
            iteration: iter,
            best_gops: fit.max(0.0),
            best_sp: sp,
            best_batch: batch,
        });
    };
    push_point(&mut trace, 0, g_fitness, &g_design);

    let mut stall = 0usize;
    for iter in 1..=params.iterations {
        let barrier_pos = g_pos;
        let mut any_local_progress = false;
        for p in particles.iter_mut() {
            let mut r1 = [0.0f64; 5];
            let mut r2 = [0.0f64; 5];
            for d in 0..5 {
                r1[d] = rng.gen::<f64>();
            }
            for d in 0..5 {
                r2[d] = rng.gen::<f64>();
            }
            for d in 0..5 {
                p.vel[d] = params.inertia * p.vel[d]
                    + params.c1 * r1[d] * (p.best_pos[d] - p.pos[d])
                    + params.c2 * r2[d] * (barrier_pos[d] - p.pos[d]);
                p.pos[d] += p.vel[d];
            }
            clamp(&mut p.pos, sp_max, batch_max);
            let (fit, design) = evaluate(&p.pos);
            if better_candidate(fit, &design, p.best_fitness, &p.best_design) {
                any_local_progress = true;
                p.best_fitness = fit;
                p.best_pos = p.pos;
                p.best_design = design;
            }
        }
        // Barrier: fold local bests into the global best. Any replacement
        // counts as progress, including equal-throughput designs that win
        // the resource tie-break.
        let mut improved = false;
        for p in &particles {
            if better_candidate(p.best_fitness, &p.best_design, g_fitness, &g_design) {
                improved = true;
                g_fitness = p.best_fitness;
                g_pos = p.best_pos;
                g_design = p.best_design.clone();
            }
        }
        push_point(&mut trace, iter, g_fitness, &g_design);
        // An iteration counts as stalled only when the whole swarm stopped
        // making progress (no local or global best was replaced).
        if improved || any_local_progress {
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_limit {
                break;
            }
        }
    }

    match g_design {
        Some(d) => Ok((d, trace)),
        None => Err(Error::Infeasible(
            "no feasible RAV found in the search box".into(),
        )),
    }
}

/// Search-trace CSV: iteration,best_gops,best_SP,best_Batch.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("iteration,best_gops,best_SP,best_Batch\n");
    for t in trace {
        out.push_str(&format!(
            "{},{:.4},{},{}\n",
            t.iteration, t.best_gops, t.best_sp, t.best_batch
        ));
    }
    out
}
