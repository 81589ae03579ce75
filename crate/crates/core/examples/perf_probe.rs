use groove::numerics::matrix::Matrix;
use groove::numerics::rng::RngStream;
use std::time::Instant;

fn main() {
    let mut rng = RngStream::new(1);
    for (m, k, n) in [(100usize, 1000usize, 512usize), (250, 1000, 512), (250, 512, 256), (200, 200, 200)] {
        let a = Matrix::from_fn(m, k, |_, _| rng.normal());
        let b = Matrix::from_fn(k, n, |_, _| rng.normal());
        let reps = (2e9 / (2.0 * m as f64 * k as f64 * n as f64)).ceil() as usize;
        let t = Instant::now();
        for _ in 0..reps {
            let c = a.matmul(&b).unwrap();
            std::hint::black_box(&c);
        }
        let secs = t.elapsed().as_secs_f64();
        let gflops = 2.0 * (m * k * n * reps) as f64 / secs / 1e9;
        println!("{m}x{k}x{n}: {gflops:.2} GFLOP/s ({reps} reps, {secs:.2}s)");
    }
}
