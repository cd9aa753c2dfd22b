use jump::nn::{MlpConfig, MlpModel, OutputHead};
use jump::rngdist::RngStream;
use std::time::Instant;

fn main() {
    for &(rows, h, e, d) in &[(256usize, 128usize, 64usize, 1usize), (2000, 128, 64, 1), (256, 128, 128, 1), (256, 128, 64, 8)] {
        let cfg = MlpConfig {
            input_dim: d, output_dim: d, hidden: h, time_embed_dim: e,
            head: OutputHead::Softplus, input_scaling: jump::nn::InputScaling::ByLambda,
        };
        let model = MlpModel::init(cfg, 10.9, &mut RngStream::new(1, 0)).unwrap();
        let ctx = model.time_context(7);
        let features = vec![0.73f64; rows * d];
        // warm up
        let _ = model.forward_shared(&features, &ctx, rows).unwrap();
        let reps = (400_000 / rows).max(4);
        let t0 = Instant::now();
        let mut sink = 0.0;
        for _ in 0..reps {
            sink += model.forward_shared(&features, &ctx, rows).unwrap()[0];
        }
        let dt = t0.elapsed().as_secs_f64();
        let per = dt / (reps * rows) as f64 * 1e6;
        let flops = if d == 1 { 131_000.0 + 3_000.0 } else { 2.0*(d as f64*h as f64*2.0 + 4.0*h as f64*h as f64)/2.0 };
        println!("rows {rows:5} h {h} e {e} d {d}: {per:.2} us/example-forward  (~{:.2} GF, sink {sink:.1})", flops / per / 1e3);
    }
}
