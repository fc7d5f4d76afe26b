//! Programmatic model and platform generators for benchmarking sweeps, so
//! runs need no hand-written model files.

use crate::model::{HardwarePlatform, NetworkModel};

fn conv(out: u32, k: u32, stride: u32, pad: &str) -> serde_json::Value {
    serde_json::json!({"kind": "conv", "out_channels": out, "kernel": k,
                       "stride": stride, "pad": pad_value(pad)})
}

fn pool(k: u32, stride: u32) -> serde_json::Value {
    serde_json::json!({"kind": "pool", "kernel": k, "stride": stride})
}

fn pool_padded(k: u32, stride: u32, pad: u32) -> serde_json::Value {
    serde_json::json!({"kind": "pool", "kernel": k, "stride": stride, "pad": pad})
}

fn fc(out: u32) -> serde_json::Value {
    serde_json::json!({"kind": "fc", "out_features": out})
}

fn pad_value(pad: &str) -> serde_json::Value {
    match pad.parse::<u32>() {
        Ok(n) => serde_json::json!(n),
        Err(_) => serde_json::json!(pad),
    }
}

fn build(name: &str, input: (u32, u32, u32), bits: u8, layers: Vec<serde_json::Value>) -> NetworkModel {
    let doc = serde_json::json!({
        "name": name,
        "input_shape": [input.0, input.1, input.2],
        "data_width": bits,
        "weight_width": bits,
        "layers": layers,
    });
    crate::model::parse_network(&doc.to_string()).expect("generated model must validate")
}

/// VGG16 with the three FC layers removed: 13 CONV + 5 POOL layers in five
/// groups of 2/2/3/3/3 convs, each group closed by a 2x2/2 max pool.
pub fn vgg16_conv(h: u32, w: u32, bits: u8) -> NetworkModel {
    vgg_like(0, h, w, bits)
}

/// VGG16-conv with `extra` additional CONV layers appended to each of the
/// five groups (same configuration as the group), giving 13 + 5*extra CONV
/// layers: extra = 1 -> 18, 3 -> 28, 5 -> 38.
pub fn vgg_like(extra: u32, h: u32, w: u32, bits: u8) -> NetworkModel {
    let groups: [(u32, u32); 5] = [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)];
    let mut layers = Vec::new();
    for (ch, n) in groups {
        for _ in 0..n + extra {
            layers.push(conv(ch, 3, 1, "same"));
        }
        layers.push(pool(2, 2));
    }
    let n_conv = 13 + 5 * extra;
    build(
        &format!("vgg{n_conv}_conv_{h}x{w}"),
        (3, h, w),
        bits,
        layers,
    )
}

/// The 12 input resolutions used for the VGG input-size sweep.
pub fn input_size_cases() -> [(u32, u32); 12] {
    [
        (32, 32),
        (64, 64),
        (128, 128),
        (224, 224),
        (320, 320),
        (384, 384),
        (320, 480),
        (448, 448),
        (512, 512),
        (480, 800),
        (512, 1382),
        (720, 1280),
    ]
}

/// CONV-layer counts for the depth-scalability family.
pub fn depth_cases() -> [(u32, u32); 4] {
    // (extra convs per group, resulting CONV count)
    [(0, 13), (1, 18), (3, 28), (5, 38)]
}

fn residual_group(layers: &mut Vec<serde_json::Value>, ch: u32, convs: u32, downsample: bool) {
    for i in 0..convs {
        let stride = if downsample && i == 0 { 2 } else { 1 };
        layers.push(conv(ch, 3, stride, "1"));
    }
}

/// ResNet-18 linearized to its main-path layer sequence (skip connections
/// and their 1x1 projections are not modeled; reports flag this).
pub fn resnet18(bits: u8) -> NetworkModel {
    let mut layers = vec![conv(64, 7, 2, "3"), pool_padded(3, 2, 1)];
    residual_group(&mut layers, 64, 4, false);
    residual_group(&mut layers, 128, 4, true);
    residual_group(&mut layers, 256, 4, true);
    residual_group(&mut layers, 512, 4, true);
    layers.push(pool(7, 7));
    layers.push(fc(1000));
    build("resnet18", (3, 224, 224), bits, layers)
}

/// ResNet-34 linearized like `resnet18` (basic blocks 3/4/6/3).
pub fn resnet34(bits: u8) -> NetworkModel {
    let mut layers = vec![conv(64, 7, 2, "3"), pool_padded(3, 2, 1)];
    residual_group(&mut layers, 64, 6, false);
    residual_group(&mut layers, 128, 8, true);
    residual_group(&mut layers, 256, 12, true);
    residual_group(&mut layers, 512, 6, true);
    layers.push(pool(7, 7));
    layers.push(fc(1000));
    build("resnet34", (3, 224, 224), bits, layers)
}

pub fn alexnet(bits: u8) -> NetworkModel {
    let layers = vec![
        conv(64, 11, 4, "2"),
        pool(3, 2),
        conv(192, 5, 1, "2"),
        pool(3, 2),
        conv(384, 3, 1, "1"),
        conv(256, 3, 1, "1"),
        conv(256, 3, 1, "1"),
        pool(3, 2),
        fc(4096),
        fc(4096),
        fc(1000),
    ];
    build("alexnet", (3, 224, 224), bits, layers)
}

/// Xilinx KU115 sample budgets (bandwidth is this artifact's shipped
/// default of 19.2 GB/s).
pub fn ku115() -> HardwarePlatform {
    HardwarePlatform {
        name: "ku115".into(),
        dsp_total: 5520,
        bram18k_total: 4320,
        lut_total: 663_360,
        bw_bits_per_sec: 1.536e11,
        freq_hz: 2e8,
    }
}

/// Xilinx ZC706 sample budgets (12.8 GB/s shipped default bandwidth).
pub fn zc706() -> HardwarePlatform {
    HardwarePlatform {
        name: "zc706".into(),
        dsp_total: 900,
        bram18k_total: 1090,
        lut_total: 218_600,
        bw_bits_per_sec: 1.024e11,
        freq_hz: 2e8,
    }
}
