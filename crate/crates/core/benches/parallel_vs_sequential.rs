use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use red_lwsgs::denoise::{
    extract_patches, verify_red_conditions_with, Denoiser, RedCheckOptions, SymmetricConv,
};
use red_lwsgs::kernel::Kernel;
use red_lwsgs::operator::{circular_convolve_with, degrade, DegradationOp, NoiseModel};
use red_lwsgs::par::Execution;
use red_lwsgs::rng::RngStream;
use red_lwsgs::samplers::{run_chains, Method, Problem, RunOptions, SamplerConfig};
use red_lwsgs::synthetic::phantom;
use red_lwsgs::Shape;

const MODES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn convolution(c: &mut Criterion) {
    let x = phantom(Shape::new(128, 128, 3), 1).unwrap();
    let k = Kernel::gaussian(9, 1.6).unwrap();
    let mut g = c.benchmark_group("circular_convolve");
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| circular_convolve_with(&x, &k, exec)));
    }
    g.finish();
}

fn red_conditions(c: &mut Criterion) {
    let img = phantom(Shape::gray(64, 64), 2).unwrap();
    let patches = extract_patches(&img, 8, 16, &mut RngStream::new(3)).unwrap();
    let d = Denoiser::SymmetricConv(
        SymmetricConv::new(Kernel::gaussian(5, 1.0).unwrap(), 0.05).unwrap(),
    );
    let mut g = c.benchmark_group("verify_red_conditions");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = RedCheckOptions {
            exec,
            ..RedCheckOptions::new(1e-3)
        };
        g.bench_function(name, |b| {
            b.iter(|| verify_red_conditions_with(&d, &patches, &opts).unwrap())
        });
    }
    g.finish();
}

fn chains(c: &mut Criterion) {
    let shape = Shape::gray(32, 32);
    let truth = phantom(shape, 4).unwrap();
    let op = DegradationOp::Circulant(Kernel::gaussian(5, 1.0).unwrap());
    let noise = NoiseModel::new(0.02).unwrap();
    let y = degrade(&truth, &op, noise, &mut RngStream::new(5)).unwrap();
    let p = Problem::new(y, op, noise, shape).unwrap();
    let d = Denoiser::SymmetricConv(
        SymmetricConv::new(Kernel::gaussian(3, 1.0).unwrap(), 0.05).unwrap(),
    );
    let cfg = SamplerConfig::new(1.0, 0.01, 400, 100).unwrap();
    let mut g = c.benchmark_group("run_chains_lwsgs");
    g.sample_size(10);
    for n_chains in [1, 4, 8] {
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n_chains), &n_chains, |b, &n| {
                b.iter(|| {
                    run_chains(Method::Lwsgs, &cfg, &p, &d, &RunOptions::default(), n, exec)
                        .unwrap()
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, convolution, red_conditions, chains);
criterion_main!(benches);
