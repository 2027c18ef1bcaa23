#![allow(dead_code)]

use coxclaims::{DelayModel, ModelSpec, StateDistribution, TransitionMatrix};
use rand::Rng;

/// Two-state reference model on a unit grid with unit exposures, started
/// from its stationary law.
pub fn reference(k: usize) -> ModelSpec {
    ModelSpec::new(
        TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
        StateDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
        vec![1, 3],
        0.5,
        (0..=k).map(|i| i as f64).collect(),
        vec![1.0; k],
    )
    .unwrap()
}

pub fn ammeter(g: usize, theta: f64, k: usize) -> ModelSpec {
    let row: Vec<f64> = (0..g).map(|i| (i + 1) as f64).collect();
    let s: f64 = row.iter().sum();
    let row: Vec<f64> = row.iter().map(|x| x / s).collect();
    ModelSpec::new(
        TransitionMatrix::from_rows(&vec![row.clone(); g]).unwrap(),
        StateDistribution::new(row).unwrap(),
        (1..=g as u32).map(|m| 2 * m - 1).collect(),
        theta,
        (0..=k).map(|i| i as f64).collect(),
        vec![1.0; k],
    )
    .unwrap()
}

pub fn random_distribution<R: Rng>(rng: &mut R, g: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..g).map(|_| floor + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Random ergodic model: strictly positive transition rows, shapes in 1..=5,
/// random grid lengths and exposures.
pub fn random_spec<R: Rng>(rng: &mut R, g: usize, k: usize, normalized: bool) -> ModelSpec {
    let rows: Vec<Vec<f64>> = (0..g).map(|_| random_distribution(rng, g, 0.05)).collect();
    let pi = random_distribution(rng, g, 0.0);
    let shapes: Vec<u32> = (0..g).map(|_| rng.random_range(1..=5)).collect();
    let theta = rng.random_range(0.1..3.0);
    let mut grid = vec![0.0];
    let mut exposures = Vec::new();
    for _ in 0..k {
        let len: f64 = if normalized { 1.0 } else { rng.random_range(0.3..2.0) };
        grid.push(grid.last().unwrap() + len);
        exposures.push(if normalized { 1.0 / len } else { rng.random_range(0.3..2.0) });
    }
    ModelSpec::new(
        TransitionMatrix::from_rows(&rows).unwrap(),
        StateDistribution::new(pi).unwrap(),
        shapes,
        theta,
        grid,
        exposures,
    )
    .unwrap()
}

pub fn random_delay<R: Rng>(rng: &mut R) -> DelayModel {
    match rng.random_range(0..5) {
        0 => DelayModel::Degenerate {
            at: rng.random_range(0.0..3.0),
        },
        1 => DelayModel::Exponential {
            rate: rng.random_range(0.1..5.0),
        },
        2 => DelayModel::Uniform {
            upper: rng.random_range(0.1..4.0),
        },
        3 => DelayModel::Weibull {
            shape: rng.random_range(0.5..3.0),
            scale: rng.random_range(0.2..3.0),
        },
        _ => {
            let n = rng.random_range(2..6);
            let mut knots = vec![rng.random_range(0.0..0.5)];
            for _ in 1..n {
                knots.push(knots.last().unwrap() + rng.random_range(0.1..1.5));
            }
            let mut cdf = vec![rng.random_range(0.0..0.3)];
            for _ in 1..n - 1 {
                let last = *cdf.last().unwrap();
                cdf.push(last + (1.0 - last) * rng.random_range(0.1..0.9));
            }
            cdf.push(1.0);
            DelayModel::PiecewiseEmpirical { knots, cdf }
        }
    }
}
