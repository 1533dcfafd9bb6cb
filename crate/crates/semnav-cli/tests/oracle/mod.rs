//! Brute-force reimplementations used as independent oracles by the
//! acceptance suite. Everything here is written from the definitions
//! with plain loops; nothing calls into the library under test.

/// Mean and sample SD (n−1) the long way.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|c| c / n).collect()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let d = 1.0 - dot / (norm(a) * norm(b));
    d.clamp(0.0, 2.0)
}

/// Distance-to-next series (None where an endpoint is missing) and its
/// mean over defined steps.
pub fn dist_next(points: &[Option<Vec<f64>>]) -> (Vec<Option<f64>>, Option<f64>) {
    let mut series = Vec::new();
    for t in 0..points.len() - 1 {
        series.push(match (&points[t], &points[t + 1]) {
            (Some(a), Some(b)) => Some(cosine_distance(&normalized(a), &normalized(b))),
            _ => None,
        });
    }
    let mean = masked_mean(&series);
    (series, mean)
}

pub fn masked_mean(series: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = series.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Median-binarized Shannon entropy from the definitions.
pub fn entropy(series: &[Option<f64>]) -> Option<f64> {
    let mut values: Vec<f64> = series.iter().flatten().copied().collect();
    if values.len() < 3 {
        return None;
    }
    let n = values.len();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let theta = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let ones = series
        .iter()
        .flatten()
        .filter(|v| **v >= theta)
        .count();
    let p = ones as f64 / n as f64;
    if ones == 0 || ones == n {
        return Some(0.0);
    }
    Some(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Magnitudes of first (order 1) or second (order 2) differences, masked
/// where any participating point is missing.
pub fn diff_magnitudes(points: &[Option<Vec<f64>>], order: usize) -> Vec<Option<f64>> {
    let n = points.len();
    let mut out = Vec::new();
    match order {
        1 => {
            for t in 0..n - 1 {
                out.push(match (&points[t], &points[t + 1]) {
                    (Some(a), Some(b)) => {
                        let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
                        Some(norm(&d))
                    }
                    _ => None,
                });
            }
        }
        2 => {
            for t in 0..n - 2 {
                out.push(match (&points[t], &points[t + 1], &points[t + 2]) {
                    (Some(a), Some(b), Some(c)) => {
                        let d: Vec<f64> = (0..a.len())
                            .map(|i| c[i] - 2.0 * b[i] + a[i])
                            .collect();
                        Some(norm(&d))
                    }
                    _ => None,
                });
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Distance-to-centroid per item: centroid over unit-normalized first
/// embedded occurrences of each unique label.
pub fn dist_centroid(points: &[Option<Vec<f64>>], labels: &[String]) -> Vec<Option<f64>> {
    let mut used: Vec<&String> = Vec::new();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for (label, point) in labels.iter().zip(points) {
        if used.contains(&label) {
            continue;
        }
        if let Some(v) = point {
            used.push(label);
            unique.push(normalized(v));
        }
    }
    let dim = unique[0].len();
    let mut centroid = vec![0.0; dim];
    for u in &unique {
        for (acc, c) in centroid.iter_mut().zip(u) {
            *acc += c;
        }
    }
    for c in centroid.iter_mut() {
        *c /= unique.len() as f64;
    }
    points
        .iter()
        .map(|p| {
            p.as_ref()
                .map(|v| cosine_distance(&normalized(v), &centroid))
        })
        .collect()
}

pub fn assert_masked_close(values: &[f64], valid: &[bool], oracle: &[Option<f64>], tol: f64) {
    assert_eq!(values.len(), oracle.len(), "length mismatch vs oracle");
    for ((value, ok), expected) in values.iter().zip(valid).zip(oracle) {
        match expected {
            Some(e) => {
                assert!(*ok, "step should be valid");
                assert!((value - e).abs() < tol, "{value} vs oracle {e}");
            }
            None => assert!(!*ok, "step should be masked"),
        }
    }
}

pub fn assert_opt_close(ours: Option<f64>, oracle: Option<f64>, tol: f64) {
    match (ours, oracle) {
        (Some(a), Some(b)) => assert!((a - b).abs() < tol, "{a} vs oracle {b}"),
        (a, b) => assert_eq!(a.is_some(), b.is_some(), "{a:?} vs oracle {b:?}"),
    }
}

// ---- statistics ------------------------------------------------------

/// Welch t statistic and Welch–Satterthwaite df from the formulas.
pub fn welch(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let t = (ma - mb) / (va + vb).sqrt();
    let df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    (t, df)
}

pub fn cohens_d(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled =
        (((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0)).sqrt();
    (ma - mb) / pooled
}

/// Naive Holm step-down.
pub fn holm(ps: &[f64]) -> Vec<f64> {
    let m = ps.len();
    let mut indexed: Vec<(usize, f64)> = ps.iter().copied().enumerate().collect();
    indexed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut out = vec![0.0; m];
    let mut best = 0.0f64;
    for (rank, (original, p)) in indexed.into_iter().enumerate() {
        let candidate = ((m - rank) as f64 * p).min(1.0);
        best = best.max(candidate);
        out[original] = best;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..x.len() {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    cov / (vx * vy).sqrt()
}

// ---- Student t tail via Lanczos log-gamma and the continued-fraction
// incomplete beta (independent of the statrs implementation) ----------

fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * z).sin().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail P(|T| >= |t|) = I_{df/(df+t²)}(df/2, 1/2).
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}
