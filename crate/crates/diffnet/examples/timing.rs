//! Rough per-sample cost of the desk-scale forward/backward pass.

use diffnet::data::{encode, EncodingSpec, LabeledImage};
use diffnet::notation::parse_notation;
use diffnet::system::{instantiate, GeometryConfig};
use std::time::Instant;

fn main() {
    let spec = parse_notation("D([10,0],[1,5,10k])", 10).unwrap();
    let geom = GeometryConfig::default();
    let system = instantiate(&spec, &geom, 1).unwrap();
    let img = LabeledImage {
        pixels: (0..784).map(|i| (i % 255) as f32 / 255.0).collect(),
        width: 28,
        height: 28,
        label: 3,
    };
    let field = encode(&img, &EncodingSpec::amplitude(), 100, 0.5).unwrap();
    let _ = system.loss_and_gradients(&field, 3, 0.1).unwrap();
    let n = 20;
    let t0 = Instant::now();
    for _ in 0..n {
        let _ = system.loss_and_gradients(&field, 3, 0.1).unwrap();
    }
    println!(
        "fwd+bwd: {:.1} ms/sample",
        t0.elapsed().as_secs_f64() * 1e3 / n as f64
    );
    let t1 = Instant::now();
    for _ in 0..n {
        let _ = system.forward(&field, 0.1).unwrap();
    }
    println!(
        "fwd only: {:.1} ms/sample",
        t1.elapsed().as_secs_f64() * 1e3 / n as f64
    );
}
