#![allow(dead_code)]

use red_lwsgs::denoise::{Denoiser, SymmetricConv};
use red_lwsgs::kernel::Kernel;
use red_lwsgs::operator::{degrade, DegradationOp, NoiseModel};
use red_lwsgs::oracle::{dense_denoiser, split_precision, DenseProblem};
use red_lwsgs::rng::RngStream;
use red_lwsgs::samplers::Problem;
use red_lwsgs::synthetic::phantom;
use red_lwsgs::{ImageField, Shape};

pub struct Setup {
    pub problem: Problem,
    pub dense: DenseProblem,
    pub denoiser: Denoiser,
    pub w: nalgebra::DMatrix<f64>,
    pub m_g: f64,
    pub big_m_g: f64,
}

impl Setup {
    pub fn q_inv_norm(&self, rho2: f64) -> f64 {
        let e = nalgebra::SymmetricEigen::new(split_precision(&self.dense, rho2));
        1.0 / e.eigenvalues.min()
    }
}

/// Periodic Gaussian-blur problem with a shrunk Gaussian-smoothing denoiser.
pub fn deblur(side: usize, blur: usize, sigma: f64, seed: u64) -> Setup {
    let shape = Shape::gray(side, side);
    let op = DegradationOp::Circulant(Kernel::gaussian(blur, 1.0).unwrap());
    let truth = phantom(shape, seed).unwrap();
    let noise = NoiseModel::new(sigma).unwrap();
    let y = degrade(&truth, &op, noise, &mut RngStream::new(seed)).unwrap();
    build(Problem::new(y, op, noise, shape).unwrap())
}

pub fn build(problem: Problem) -> Setup {
    let denoiser = Denoiser::SymmetricConv(
        SymmetricConv::new(Kernel::gaussian(3, 1.0).unwrap(), 0.05).unwrap(),
    );
    let dense =
        DenseProblem::from_operator(&problem.op, problem.domain, &problem.y, problem.sigma())
            .unwrap();
    let w = dense_denoiser(&denoiser, problem.domain).unwrap();
    let curv = denoiser.curvature(problem.domain).unwrap().unwrap();
    Setup {
        problem,
        dense,
        denoiser,
        w,
        m_g: curv.m_g,
        big_m_g: curv.big_m_g,
    }
}

pub fn random_image(shape: Shape, seed: u64) -> ImageField {
    let mut rng = RngStream::new(seed);
    ImageField::from_fn(shape, |_, _, _| rng.standard_normal()).unwrap()
}
