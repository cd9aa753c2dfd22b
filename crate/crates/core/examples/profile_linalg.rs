use jump::nn::linalg::{input_grad, linear_forward, weight_grad_acc};
use std::time::Instant;

fn main() {
    let batch = 256; let h = 128;
    let x = vec![0.5f64; batch * h];
    let w = vec![0.01f64; h * h];
    let bias = vec![0.1f64; h];
    let mut out = vec![0.0f64; batch * h];
    let reps = 1000;
    linear_forward(&mut out, &x, &w, &bias, batch, h, h);
    let t0 = Instant::now();
    for _ in 0..reps {
        linear_forward(&mut out, &x, &w, &bias, batch, h, h);
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("linear_forward:  {:.2} GF (sink {})", (2.0 * (batch * h * h * reps) as f64) / dt / 1e9, out[7]);

    let dy = vec![0.3f64; batch * h];
    let mut dx = vec![0.0f64; batch * h];
    input_grad(&mut dx, &dy, &w, batch, h, h);
    let t0 = Instant::now();
    for _ in 0..reps {
        input_grad(&mut dx, &dy, &w, batch, h, h);
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("input_grad:      {:.2} GF (sink {})", (2.0 * (batch * h * h * reps) as f64) / dt / 1e9, dx[7]);

    let mut dw = vec![0.0f64; h * h];
    let t0 = Instant::now();
    for _ in 0..reps {
        weight_grad_acc(&mut dw, &dy, &x, batch, h, h);
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("weight_grad_acc: {:.2} GF (sink {})", (2.0 * (batch * h * h * reps) as f64) / dt / 1e9, dw[7]);
}
