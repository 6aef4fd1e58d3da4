#![allow(dead_code)]

use rand::Rng;
use wvaml::rng::CellRng;
use wvaml::transport::Distribution;
use wvaml::MetricSpace;

/// Random space of `n` points: a line, a circle or a plane cloud.
pub fn random_space(rng: &mut CellRng, n: usize) -> MetricSpace {
    match rng.gen_range(0..3) {
        0 => MetricSpace::line((0..n).map(|_| rng.gen_range(0.0..10.0)).collect()).unwrap(),
        1 => MetricSpace::circle((0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()).unwrap(),
        _ => MetricSpace::plane((0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect()).unwrap(),
    }
}

/// Random distribution; with `sparse`, roughly a third of the entries are zero.
pub fn random_distribution(rng: &mut CellRng, n: usize, sparse: bool) -> Distribution {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.gen_bool(0.33) { 0.0 } else { rng.gen_range(0.0..1.0) })
            .collect();
        if w.iter().any(|&x| x > 0.0) {
            return Distribution::normalized(w).unwrap();
        }
    }
}

/// Strictly positive random distribution.
pub fn positive_distribution(rng: &mut CellRng, n: usize) -> Distribution {
    Distribution::normalized((0..n).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap()
}

/// One-dimensional W1 oracle: the integral of the CDF gap on sorted points.
pub fn line_w1(coords: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..coords.len()).collect();
    idx.sort_by(|&a, &b| coords[a].total_cmp(&coords[b]));
    let (mut cdf, mut total) = (0.0, 0.0);
    for w in idx.windows(2) {
        cdf += p[w[0]] - q[w[0]];
        total += cdf.abs() * (coords[w[1]] - coords[w[0]]);
    }
    total
}
