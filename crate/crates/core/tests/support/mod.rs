//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written from textbook formulas with plain loops and
//! `Vec`s so that it shares no code path with the library.

#![allow(dead_code)]

pub mod criteria;

use metrology::dataset::{MetricDataset, MetricName};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// α = k/(k−1) · (1 − Σ var(item) / var(total)); rows are entities.
pub fn alpha_oracle(rows: &Matrix) -> f64 {
    let k = rows[0].len();
    let mut item_vars = 0.0;
    for j in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        item_vars += sample_variance(&col);
    }
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let kf = k as f64;
    kf / (kf - 1.0) * (1.0 - item_vars / sample_variance(&totals))
}

/// Matching rater pairs over all co-rated rater pairs (raters a < b).
pub fn percent_agreement_oracle(units: &[Vec<Option<f64>>]) -> f64 {
    let (mut hits, mut pairs) = (0usize, 0usize);
    for unit in units {
        for a in 0..unit.len() {
            for b in a + 1..unit.len() {
                if let (Some(x), Some(y)) = (unit[a], unit[b]) {
                    pairs += 1;
                    hits += usize::from(x == y);
                }
            }
        }
    }
    hits as f64 / pairs as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleLevel {
    Nominal,
    Ordinal,
    Interval,
    Ratio,
}

/// Krippendorff's alpha from value pairs directly, without a coincidence
/// matrix: D_o averages δ² over ordered pairs within units (weighted by
/// 1/(m_u − 1)), D_e over all ordered pairs of pairable values.
pub fn krippendorff_oracle(units: &[Vec<Option<f64>>], level: OracleLevel) -> f64 {
    let pairable: Vec<Vec<f64>> = units
        .iter()
        .map(|u| u.iter().flatten().copied().collect::<Vec<f64>>())
        .filter(|v| v.len() >= 2)
        .collect();
    let pooled: Vec<f64> = pairable.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let freq = |v: f64| pooled.iter().filter(|&&x| x == v).count() as f64;
    let delta2 = |c: f64, k: f64| -> f64 {
        match level {
            OracleLevel::Nominal => {
                if c == k {
                    0.0
                } else {
                    1.0
                }
            }
            OracleLevel::Interval => (c - k) * (c - k),
            OracleLevel::Ratio => {
                if c + k == 0.0 {
                    0.0
                } else {
                    ((c - k) / (c + k)).powi(2)
                }
            }
            OracleLevel::Ordinal => {
                if c == k {
                    return 0.0;
                }
                let (lo, hi) = if c < k { (c, k) } else { (k, c) };
                let mut distinct: Vec<f64> = pooled.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let between: f64 = distinct.iter().map(|&g| freq(g)).sum();
                (between - (freq(lo) + freq(hi)) / 2.0).powi(2)
            }
        }
    };
    let mut d_o = 0.0;
    for unit in &pairable {
        let m = unit.len() as f64;
        let mut s = 0.0;
        for i in 0..unit.len() {
            for j in 0..unit.len() {
                if i != j {
                    s += delta2(unit[i], unit[j]);
                }
            }
        }
        d_o += s / (m - 1.0);
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..pooled.len() {
        for j in 0..pooled.len() {
            if i != j {
                d_e += delta2(pooled[i], pooled[j]);
            }
        }
    }
    d_e /= n * (n - 1.0);
    1.0 - d_o / d_e
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    let n = m.len();
    let mut a: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// ln|det M| by LU decomposition with partial pivoting, with the sign.
pub fn lu_log_det(m: &Matrix) -> (f64, f64) {
    let n = m.len();
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut log = 0.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        if pivot != col {
            a.swap(col, pivot);
            sign = -sign;
        }
        let d = a[col][col];
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
        for row in col + 1..n {
            let f = a[row][col] / d;
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    (sign, log)
}

/// Overall KMO and per-variable MSA from explicit partial correlations.
pub fn kmo_oracle(r: &Matrix) -> (f64, Vec<f64>) {
    let p = r.len();
    let inv = gauss_jordan_inverse(r);
    let partial = |i: usize, j: usize| -inv[i][j] / (inv[i][i] * inv[j][j]).sqrt();
    let (mut num, mut den) = (0.0, 0.0);
    let mut msa = Vec::new();
    for i in 0..p {
        let (mut ri, mut qi) = (0.0, 0.0);
        for j in 0..p {
            if i != j {
                ri += r[i][j] * r[i][j];
                qi += partial(i, j) * partial(i, j);
            }
        }
        num += ri;
        den += ri + qi;
        msa.push(ri / (ri + qi));
    }
    (num / den, msa)
}

/// Bartlett's sphericity statistic, df and upper-tail p-value.
pub fn bartlett_oracle(r: &Matrix, n: usize) -> (f64, usize, f64) {
    let p = r.len();
    let (_, log_det) = lu_log_det(r);
    let chi2 = (-((n as f64 - 1.0) - (2.0 * p as f64 + 5.0) / 6.0) * log_det).max(0.0);
    let df = p * (p - 1) / 2;
    (chi2, df, chi_square_sf(chi2, df as f64))
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x): series below a + 1,
/// Lentz continued fraction above.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - sum * log_prefix.exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        log_prefix.exp() * h
    }
}

pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

/// Standard normal CDF via erfc(x) = Q(1/2, x²) for x ≥ 0.
pub fn normal_cdf(z: f64) -> f64 {
    let tail = 0.5 * gamma_q(0.5, z * z / 2.0);
    if z < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn correlation_oracle(rows: &Matrix) -> Matrix {
    let p = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    (0..p)
        .map(|a| (0..p).map(|b| if a == b { 1.0 } else { pearson(&cols[a], &cols[b]) }).collect())
        .collect()
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller keeps this independent of the library's samplers.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rows of correlated data: a random mixing of independent normals.
pub fn random_rows(seed: u64, n: usize, p: usize) -> Matrix {
    let mut rng = rng(seed);
    let mix: Matrix = (0..p).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| standard_normal(&mut rng)).collect();
            (0..p).map(|j| (0..p).map(|i| mix[j][i] * z[i]).sum::<f64>() + 0.5 * z[j]).collect()
        })
        .collect()
}

pub fn dataset_from_rows(rows: &Matrix, names: &[String]) -> MetricDataset {
    let columns = names
        .iter()
        .enumerate()
        .map(|(j, name)| (MetricName::parse(name).unwrap(), rows.iter().map(|r| r[j]).collect()))
        .collect();
    MetricDataset::from_columns(columns).unwrap()
}

pub fn names(prefix: &str, p: usize) -> Vec<String> {
    (0..p).map(|j| format!("{prefix}.m{j}")).collect()
}

pub fn to_rows(m: &nalgebra::DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Random rating table: `units` × `raters`, values 1..=`categories`, with
/// roughly `missing` of the cells absent.
pub fn random_ratings(seed: u64, units: usize, raters: usize, categories: u32, missing: f64) -> Vec<Vec<Option<f64>>> {
    let mut rng = rng(seed);
    (0..units)
        .map(|_| {
            let truth = rng.gen_range(1..=categories);
            (0..raters)
                .map(|_| {
                    if rng.gen_bool(missing) {
                        None
                    } else if rng.gen_bool(0.7) {
                        Some(truth as f64)
                    } else {
                        Some(rng.gen_range(1..=categories) as f64)
                    }
                })
                .collect()
        })
        .collect()
}

/// Tucker congruence by plain loops.
pub fn congruence_oracle(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    ab / (aa * bb).sqrt()
}

/// Path of the optional Maven metrics table used by the golden tests.
pub fn maven_dataset() -> Option<MetricDataset> {
    let path = std::env::var_os("METROLOGY_MAVEN_DATA")?;
    let text = std::fs::read_to_string(path).ok()?;
    let delimiter = if text.lines().next().is_some_and(|l| l.contains('\t')) { b'\t' } else { b',' };
    MetricDataset::load_str(&text, metrology::dataset::ParseOptions { delimiter, strict: false }).ok()
}
