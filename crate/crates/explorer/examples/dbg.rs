use accel_explorer::hybrid::*;
use accel_explorer::zoo;

fn main() {
    let platform = zoo::ku115();
    let net = zoo::vgg16_conv(224, 224, 16);
    let flags = DseFlags::default();
    let mut ok = 0;
    for seed in 0..24u64 {
        let params = PsoParams { batch_max: 1, seed, ..Default::default() };
        let (d, trace) = pso_search(&net, &platform, &params, &flags).unwrap();
        let eff = d.gops_mac / (2.0 * d.resources.dsp as f64 * 0.2);
        let pass = d.gops >= 1532.0 && d.gops <= 1872.5 && eff >= 0.90 && (10..=14).contains(&d.rav.sp);
        if pass { ok += 1; }
        println!("seed={seed:2} gops={:7.1} sp={:2} dsp={} eff={:.3} iters={:2} {}",
            d.gops, d.rav.sp, d.resources.dsp, eff, trace.len()-1, if pass {"PASS"} else {"fail"});
    }
    println!("pass rate: {ok}/24");
}
