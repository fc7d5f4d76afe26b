//! Benchmark orchestration and report emission. Field order in report.json
//! is fixed by struct declaration order and documented in the README so
//! reports diff cleanly.

use crate::error::{Error, Result};
use crate::generic::{gen_dse_with_profile, generic_csv, GenericBudget, GenericDesign};
use crate::hybrid::{pso_search, trace_csv, DseFlags, HybridDesign, PsoParams, TracePoint};
use crate::model::{HardwarePlatform, NetworkModel};
use crate::pipeline::{optimize_pipeline, pipeline_csv, PipelineDesign};
use crate::profile::profile_network;
use crate::resource::ResourceUsage;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Pipeline,
    Generic,
    Hybrid,
}

impl std::str::FromStr for Paradigm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pipeline" => Ok(Paradigm::Pipeline),
            "generic" => Ok(Paradigm::Generic),
            "hybrid" => Ok(Paradigm::Hybrid),
            other => Err(Error::Validation(format!(
                "unknown paradigm '{other}' (pipeline, generic, hybrid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchInfo {
    pub seed: u64,
    pub iterations_run: usize,
    pub wall_time_s: f64,
}

/// One benchmark result. `gops` counts every operation the network performs
/// (POOL comparisons included); `gops_mac` counts MAC work only and is the
/// numerator of `dsp_efficiency` so POOL ops cannot inflate utilization.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub model: String,
    pub platform: String,
    pub paradigm: Paradigm,
    pub batch: u64,
    pub gops: f64,
    pub gops_mac: f64,
    pub frames_per_sec: f64,
    pub dsp_efficiency: f64,
    pub resources: ResourceUsage,
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchInfo>,
}

/// DSP efficiency: achieved GOP/s over the allocated DSPs' peak GOP/s.
pub fn dsp_efficiency(gops: f64, alpha: u64, dsp_allocated: u64, freq_hz: f64) -> Result<f64> {
    let denom = alpha as f64 * dsp_allocated as f64 * (freq_hz / 1e9);
    if denom <= 0.0 {
        return Err(Error::Domain(
            "dsp_efficiency denominator must be positive".into(),
        ));
    }
    Ok(gops / denom)
}

fn net_alpha(net: &NetworkModel) -> Result<u64> {
    net.layers
        .iter()
        .filter(|l| l.kind.is_mac())
        .map(|l| HardwarePlatform::alpha(l.ww))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().min().unwrap_or(2))
}

fn check_efficiency(eff: f64) -> f64 {
    // Efficiency above 1 would mean the model credited more MACs than the
    // allocated DSPs can execute.
    assert!(
        eff > 0.0 && eff <= 1.0 + 1e-9,
        "dsp_efficiency out of (0,1]: {eff}"
    );
    eff.min(1.0)
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkOptions {
    pub batch: u64,
    pub seed: Option<u64>,
    pub pso: Option<PsoParams>,
    pub flags: DseFlags,
}

pub enum ParadigmDesign {
    Pipeline(PipelineDesign),
    Generic(GenericDesign),
    Hybrid(Box<HybridDesign>, Vec<TracePoint>),
}

pub fn benchmark(
    net: &NetworkModel,
    platform: &HardwarePlatform,
    paradigm: Paradigm,
    opts: &BenchmarkOptions,
) -> Result<(BenchmarkReport, ParadigmDesign)> {
    let batch = opts.batch.max(1);
    let alpha = net_alpha(net)?;
    let profile = profile_network(net);
    let mut warnings = Vec::new();
    if net.name.starts_with("resnet") {
        warnings.push(
            "residual topology modeled as its linear layer sequence; skip paths ignored".into(),
        );
    }

    match paradigm {
        Paradigm::Pipeline => {
            let d = optimize_pipeline(net, platform, batch)?;
            if d.bandwidth_bound {
                warnings.push("bandwidth-bound: weight streams exceed the external budget".into());
            }
            let eff = check_efficiency(dsp_efficiency(
                d.frames_per_sec * d.covered_gop_mac,
                alpha,
                d.resources.dsp,
                platform.freq_hz,
            )?);
            let report = BenchmarkReport {
                model: net.name.clone(),
                platform: platform.name.clone(),
                paradigm,
                batch,
                gops: d.throughput_gops,
                gops_mac: d.frames_per_sec * d.covered_gop_mac,
                frames_per_sec: d.frames_per_sec,
                dsp_efficiency: eff,
                resources: d.resources,
                config: serde_json::json!({
                    "stages": d.stages.len(),
                    "max_stage_latency_s": d.max_latency,
                }),
                warnings,
                search: None,
            };
            Ok((report, ParadigmDesign::Pipeline(d)))
        }
        Paradigm::Generic => {
            let budget = GenericBudget {
                dsp: platform.dsp_total,
                bram_blocks: platform.bram18k_total,
                lut: platform.lut_total,
                bw_bits_per_sec: platform.bw_bits_per_sec,
            };
            let d = gen_dse_with_profile(net, &profile, platform.freq_hz, budget, batch)?;
            let eff = check_efficiency(dsp_efficiency(
                d.gops_mac,
                alpha,
                d.resources.dsp,
                platform.freq_hz,
            )?);
            let report = BenchmarkReport {
                model: net.name.clone(),
                platform: platform.name.clone(),
                paradigm,
                batch,
                gops: d.gops,
                gops_mac: d.gops_mac,
                frames_per_sec: d.frames_per_sec,
                dsp_efficiency: eff,
                resources: d.resources,
                config: serde_json::json!({
                    "cpf_g": d.config.cpf_g,
                    "kpf_g": d.config.kpf_g,
                    "buffer_strategy": d.config.buffers.strategy,
                    "total_latency_s": d.total_latency,
                }),
                warnings,
                search: None,
            };
            Ok((report, ParadigmDesign::Generic(d)))
        }
        Paradigm::Hybrid => {
            let mut params = opts.pso.clone().unwrap_or_default();
            params.batch_max = params.batch_max.max(batch);
            if let Some(seed) = opts.seed {
                params.seed = seed;
            }
            let started = Instant::now();
            let (d, trace) = pso_search(net, platform, &params, &opts.flags)?;
            let wall = started.elapsed().as_secs_f64();
            warnings.extend(d.warnings.iter().cloned());
            let eff = check_efficiency(dsp_efficiency(
                d.gops_mac,
                alpha,
                d.resources.dsp,
                platform.freq_hz,
            )?);
            let report = BenchmarkReport {
                model: net.name.clone(),
                platform: platform.name.clone(),
                paradigm,
                batch: d.rav.batch,
                gops: d.gops,
                gops_mac: d.gops_mac,
                frames_per_sec: d.frames_per_sec,
                dsp_efficiency: eff,
                resources: d.resources,
                config: serde_json::json!({
                    "sp": d.rav.sp,
                    "batch": d.rav.batch,
                    "dsp_frac": d.rav.dsp_frac,
                    "bram_frac": d.rav.bram_frac,
                    "bw_frac": d.rav.bw_frac,
                    "cpf_g": d.generic.cpf_g,
                    "kpf_g": d.generic.kpf_g,
                    "buffer_strategy": d.generic.buffers.strategy,
                }),
                warnings,
                search: Some(SearchInfo {
                    seed: params.seed,
                    iterations_run: trace.len().saturating_sub(1),
                    wall_time_s: wall,
                }),
            };
            Ok((report, ParadigmDesign::Hybrid(Box::new(d), trace)))
        }
    }
}

fn write(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Write report.json, summary.csv, and the paradigm-specific CSVs into
/// `out_dir`; returns the created paths.
pub fn emit_report(
    report: &BenchmarkReport,
    design: &ParadigmDesign,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if out_dir.as_os_str().is_empty() {
        return Err(Error::Validation("output directory path is empty".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    let report_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    write(&report_path, &json)?;
    files.push(report_path);

    let summary_path = out_dir.join("summary.csv");
    let summary = format!(
        "model,platform,paradigm,batch,gops,frames_per_sec,dsp_efficiency,dsp,bram\n{},{},{},{},{:.4},{:.4},{:.4},{},{}\n",
        report.model,
        report.platform,
        serde_json::to_value(report.paradigm).unwrap().as_str().unwrap(),
        report.batch,
        report.gops,
        report.frames_per_sec,
        report.dsp_efficiency,
        report.resources.dsp,
        report.resources.bram,
    );
    write(&summary_path, &summary)?;
    files.push(summary_path);

    match design {
        ParadigmDesign::Pipeline(d) => {
            let p = out_dir.join("stages.csv");
            write(&p, &pipeline_csv(d))?;
            files.push(p);
        }
        ParadigmDesign::Generic(d) => {
            let p = out_dir.join("schedule.csv");
            write(&p, &generic_csv(d))?;
            files.push(p);
        }
        ParadigmDesign::Hybrid(d, trace) => {
            let p = out_dir.join("trace.csv");
            write(&p, &trace_csv(trace))?;
            files.push(p);
            let split = out_dir.join("resource_split.csv");
            let pipe_dsp = d.pipeline.dsp * d.rav.batch;
            let pipe_bram = d.pipeline.bram * d.rav.batch;
            let content = format!(
                "structure,dsp,bram,bw_bits_per_sec\npipeline,{},{},{:.4e}\ngeneric,{},{},{:.4e}\n",
                pipe_dsp,
                pipe_bram,
                d.pipeline.bw_p,
                d.resources.dsp - pipe_dsp,
                d.resources.bram - pipe_bram,
                d.resources.bw - d.pipeline.bw_p,
            );
            write(&split, &content)?;
            files.push(split);
            let stages = out_dir.join("stages.csv");
            let mut stage_csv = String::from("layer,CPF,KPF,Col,cycles,bw_alloc,dsp,bram\n");
            for s in &d.pipeline.stages {
                stage_csv.push_str(&format!(
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
            write(&stages, &stage_csv)?;
            files.push(stages);
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub case_index: usize,
    pub label: String,
    pub paradigm: Paradigm,
    pub gops: f64,
    pub frames_per_sec: f64,
    pub dsp_efficiency: f64,
    pub dsp: u64,
    pub bram: u64,
    pub sp: Option<u32>,
}

/// Run one (model, paradigm) sweep case.
pub fn sweep_case(
    net: &NetworkModel,
    platform: &HardwarePlatform,
    paradigm: Paradigm,
    case_index: usize,
    opts: &BenchmarkOptions,
) -> Result<SweepRow> {
    let (report, design) = benchmark(net, platform, paradigm, opts)?;
    let sp = match &design {
        ParadigmDesign::Hybrid(d, _) => Some(d.rav.sp),
        _ => None,
    };
    Ok(SweepRow {
        case_index,
        label: net.name.clone(),
        paradigm,
        gops: report.gops,
        frames_per_sec: report.frames_per_sec,
        dsp_efficiency: report.dsp_efficiency,
        dsp: report.resources.dsp,
        bram: report.resources.bram,
        sp,
    })
}

pub fn sweep_rows_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("case,label,paradigm,gops,frames_per_sec,dsp_efficiency,dsp,bram,sp\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{},{},{}\n",
            r.case_index,
            r.label,
            serde_json::to_value(r.paradigm).unwrap().as_str().unwrap(),
            r.gops,
            r.frames_per_sec,
            r.dsp_efficiency,
            r.dsp,
            r.bram,
            r.sp.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn efficiency_case4_reference() {
        let eff = dsp_efficiency(1702.3, 2, 4444, 2e8).unwrap();
        assert_relative_eq!(eff, 0.958, max_relative = 1e-3);
    }

    #[test]
    fn efficiency_peak_is_one() {
        let eff = dsp_efficiency(2.0 * 100.0 * 0.2, 2, 100, 2e8).unwrap();
        assert_relative_eq!(eff, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn efficiency_direct_arithmetic() {
        let eff = dsp_efficiency(100.0, 4, 250, 2e8).unwrap();
        assert_relative_eq!(eff, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn efficiency_zero_denominator_is_domain_error() {
        assert!(dsp_efficiency(1.0, 2, 0, 2e8).is_err());
    }

    #[test]
    fn report_round_trips_and_gops_identity() {
        let net = crate::zoo::vgg16_conv(64, 64, 16);
        let platform = crate::zoo::ku115();
        let opts = BenchmarkOptions {
            batch: 1,
            ..Default::default()
        };
        let (report, design) = benchmark(&net, &platform, Paradigm::Pipeline, &opts).unwrap();
        // gops = frames/s * model GOP, exactly.
        let gop = crate::profile::profile_network(&net).total_gop;
        assert_relative_eq!(
            report.gops,
            report.frames_per_sec * gop,
            max_relative = 1e-9
        );
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, &design, dir.path()).unwrap();
        assert!(files.iter().any(|f| f.ends_with("report.json")));
        let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["model"], net.name.as_str());
        assert_relative_eq!(
            parsed["gops"].as_f64().unwrap(),
            report.gops,
            max_relative = 1e-12
        );
    }

    #[test]
    fn empty_out_dir_is_usage_error() {
        let net = crate::zoo::vgg16_conv(32, 32, 16);
        let platform = crate::zoo::ku115();
        let opts = BenchmarkOptions {
            batch: 1,
            ..Default::default()
        };
        let (report, design) = benchmark(&net, &platform, Paradigm::Pipeline, &opts).unwrap();
        assert!(emit_report(&report, &design, Path::new("")).is_err());
    }
}
