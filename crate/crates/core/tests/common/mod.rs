//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use metaglmm::{FamilyKind, Size, StudyRecord};

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)`, by Newton iteration on the orthonormal recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Un-centred aggregate log-kernel of a record at linear predictor `theta`,
/// written out per family from the exponential-family densities.
pub fn raw_kernel(kind: FamilyKind, r: &StudyRecord, theta: f64) -> f64 {
    let y = r.ybar;
    match kind {
        FamilyKind::Binomial => {
            let n = r.size.value();
            n * (y * theta - (1.0 + theta.exp()).ln())
        }
        FamilyKind::Poisson => {
            let t = r.size.value();
            t * (y * theta - theta.exp())
        }
        FamilyKind::Gamma => {
            let n = r.size.value();
            let phi = r.phi_hat.unwrap();
            let eta = -(-theta).exp();
            n * (y * eta + (-eta).ln()) / phi
        }
        FamilyKind::Normal => {
            let n = r.size.value();
            let phi = r.phi_hat.unwrap();
            n * (y * theta - 0.5 * theta * theta) / phi
        }
    }
}

/// `log E[exp(kernel(lin + V))]`, `V ~ N(0, tau2)`, by adaptive
/// Gauss-Hermite quadrature centred at the mode of the integrand.
pub fn adaptive_gh(kind: FamilyKind, r: &StudyRecord, lin: f64, tau2: f64, n: usize) -> f64 {
    adaptive_gh_with(|theta| raw_kernel(kind, r, theta), lin, tau2, n)
}

/// As [`adaptive_gh`] for an arbitrary log-kernel in the linear predictor.
pub fn adaptive_gh_with(kernel: impl Fn(f64) -> f64, lin: f64, tau2: f64, n: usize) -> f64 {
    if tau2 == 0.0 {
        return kernel(lin);
    }
    let h = |v: f64| kernel(lin + v) - 0.5 * v * v / tau2;
    // Newton on h' with numerical derivatives, started at 0.
    let mut m = 0.0f64;
    for _ in 0..200 {
        let e = 1e-5 * (1.0 + m.abs());
        let d1 = (h(m + e) - h(m - e)) / (2.0 * e);
        let d2 = (h(m + e) - 2.0 * h(m) + h(m - e)) / (e * e);
        let step = if d2 < 0.0 { -d1 / d2 } else { d1.signum() * 0.1 };
        let step = step.clamp(-1.0, 1.0);
        m += step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    let e = 1e-4 * (1.0 + m.abs());
    let d2 = (h(m + e) - 2.0 * h(m) + h(m - e)) / (e * e);
    let s = (-1.0 / d2).sqrt();
    let (x, w) = gauss_hermite(n);
    let hm = h(m);
    let sum: f64 = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let v = m + std::f64::consts::SQRT_2 * s * xi;
            wi * (h(v) - hm + xi * xi).exp()
        })
        .sum();
    hm + (sum * std::f64::consts::SQRT_2 * s / ((2.0 * std::f64::consts::PI).sqrt() * tau2.sqrt())).ln()
}

/// Normal-normal log-likelihood of estimates `y` with variances `v`.
pub fn nn_loglik(y: &[f64], v: &[f64], mean: &[f64], tau2: f64) -> f64 {
    y.iter()
        .zip(v)
        .zip(mean)
        .map(|((y, v), m)| {
            let s = v + tau2;
            -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (y - m).powi(2) / s)
        })
        .sum()
}

/// Weighted mean `sum w y / sum w`, `w = 1 / (v + tau2)`.
pub fn weighted_mean(y: &[f64], v: &[f64], tau2: f64) -> f64 {
    let (mut a, mut b) = (0.0, 0.0);
    for (y, v) in y.iter().zip(v) {
        let w = 1.0 / (v + tau2);
        a += w * y;
        b += w;
    }
    a / b
}

/// Star discrepancy of a one-dimensional point set.
pub fn star_discrepancy(points: &[f64]) -> f64 {
    let mut x = points.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| ((i as f64 + 1.0) / n - xi).max(xi - i as f64 / n))
        .fold(0.0, f64::max)
}

pub fn record(kind: FamilyKind, n: f64, ybar: f64, s2: Option<f64>) -> StudyRecord {
    let (size, phi) = match kind {
        FamilyKind::Binomial => (Size::Subjects(n as u64), Some(1.0)),
        FamilyKind::Poisson => (Size::PersonTime(n), Some(1.0)),
        FamilyKind::Gamma => (Size::Subjects(n as u64), s2.map(|s| s / (ybar * ybar))),
        FamilyKind::Normal => (Size::Subjects(n as u64), s2),
    };
    StudyRecord {
        study_id: "s".into(),
        record_id: "s".into(),
        arm: None,
        x: vec![1.0],
        size,
        ybar,
        s2,
        phi_hat: phi,
    }
}

/// Normal-family dataset of link-scale estimates `y` with variances `v`.
pub fn normal_dataset(y: &[f64], v: &[f64], x: Option<&[Vec<f64>]>) -> metaglmm::Dataset {
    let records = y
        .iter()
        .zip(v)
        .enumerate()
        .map(|(i, (&y, &v))| StudyRecord {
            study_id: format!("s{i}"),
            record_id: format!("s{i}"),
            arm: None,
            x: x.map_or(vec![1.0], |x| x[i].clone()),
            size: Size::Subjects(1),
            ybar: y,
            s2: Some(v),
            phi_hat: Some(v),
        })
        .collect();
    let p = x.map_or(1, |x| x[0].len());
    let names = (0..p).map(|i| if i == 0 { "(Intercept)".to_string() } else { format!("x{i}") }).collect();
    metaglmm::Dataset::new(metaglmm::FamilySpec::normal(), records, names).unwrap()
}
