//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, StudentsT};
use statrs::function::gamma::ln_gamma;

use volstudy::event_study::PanelRow;
use volstudy::market_data::MinuteBar;
use volstudy::msgarch::{MsGarchParams, RegimeParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bias-corrected realized-variance radicand by plain indexed loops.
pub fn rv_radicand(r: &[f64]) -> f64 {
    let n = r.len();
    let mut sq = 0.0;
    for k in 0..n {
        sq += r[k] * r[k];
    }
    let mut cross = 0.0;
    for k in 0..n - 1 {
        cross += r[k] * r[k + 1];
    }
    sq + 2.0 * (n as f64 / (n as f64 - 1.0)) * cross
}

/// Garman-Klass radicand, summing `½(ln H − ln L)² − (2 ln 2 − 1)(ln C − ln O)²`.
pub fn gk_radicand(bars: &[MinuteBar]) -> f64 {
    let c = 2.0 * std::f64::consts::LN_2 - 1.0;
    bars.iter()
        .map(|b| {
            let hl = b.high.ln() - b.low.ln();
            let co = b.close.ln() - b.open.ln();
            0.5 * hl * hl - c * co * co
        })
        .sum()
}

/// Random but valid OHLC minute bars around a random walk.
pub fn random_bars(rng: &mut ChaCha8Rng, n: usize) -> Vec<MinuteBar> {
    let mut price: f64 = rng.random_range(10.0..10_000.0);
    (0..n)
        .map(|k| {
            let open = price;
            let close = open * (rng.random_range(-0.01..0.01f64)).exp();
            price = close;
            let high = open.max(close) * (rng.random_range(0.0..0.005f64)).exp();
            let low = open.min(close) * (-rng.random_range(0.0..0.005f64)).exp();
            MinuteBar {
                timestamp: 60 * k as i64,
                open,
                high,
                low,
                close,
            }
        })
        .collect()
}

/// `C(w)` for `w = 1..=(N−1)/2` by evaluating `cos`/`sin` of the full angle.
pub fn naive_amplitudes(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let nf = n as f64;
    (1..=(n - 1) / 2)
        .map(|w| {
            let (mut a, mut b) = (0.0, 0.0);
            for (i, &x) in p.iter().enumerate() {
                let k = (i + 1) as f64;
                let angle = 2.0 * std::f64::consts::PI * w as f64 * k / nf;
                a += x * angle.cos();
                b += x * angle.sin();
            }
            (2.0 / nf) * (a * a + b * b).sqrt()
        })
        .collect()
}

pub fn population_variance(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let m = p.iter().sum::<f64>() / n;
    p.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// OLS by forming `XᵀX`, `Xᵀy` and Gaussian elimination with partial pivoting.
pub fn ols_normal_equations(rows: &[PanelRow]) -> [f64; 4] {
    let mut a = [[0.0f64; 5]; 4];
    for r in rows {
        let x = [
            1.0,
            r.period_dummy as f64,
            r.treatment_dummy as f64,
            r.interaction as f64,
        ];
        for i in 0..4 {
            for j in 0..4 {
                a[i][j] += x[i] * x[j];
            }
            a[i][4] += x[i] * r.log_sigma;
        }
    }
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..4 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    [0, 1, 2, 3].map(|i| a[i][4] / a[i][i])
}

/// Cell mean of `log σ` for (post, treated).
pub fn cell_mean(rows: &[PanelRow], post: u8, treated: u8) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.period_dummy == post && r.treatment_dummy == treated)
        .map(|r| r.log_sigma)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(α, β1, β2, β3)` of the saturated two-by-two design from cell means.
pub fn closed_form_dd(rows: &[PanelRow]) -> [f64; 4] {
    let cb = cell_mean(rows, 0, 0);
    let cp = cell_mean(rows, 1, 0);
    let tb = cell_mean(rows, 0, 1);
    let tp = cell_mean(rows, 1, 1);
    [cb, cp - cb, tb - cb, (tp - tb) - (cp - cb)]
}

/// A random panel with every cell populated.
pub fn random_panel(rng: &mut ChaCha8Rng) -> Vec<PanelRow> {
    let mut rows = Vec::new();
    for post in [false, true] {
        for treated in [false, true] {
            let n = rng.random_range(2..40);
            let centre: f64 = rng.random_range(-5.0..-1.0);
            for _ in 0..n {
                rows.push(PanelRow::new(centre + rng.random_range(-0.5..0.5), post, treated));
            }
        }
    }
    // Interleave so the order carries no structure.
    for i in (1..rows.len()).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
    }
    rows
}

/// Standardized Fernandez–Steel skewed Student-t density, built on the
/// unit-variance Student-t from `statrs`.
pub fn skewed_t_pdf(z: f64, nu: f64, xi: f64) -> f64 {
    let unit_t = StudentsT::new(0.0, ((nu - 2.0) / nu).sqrt(), nu).unwrap();
    let m1 = 2.0 * (nu - 2.0).sqrt() * (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
        / (std::f64::consts::PI.sqrt() * (nu - 1.0));
    let mu = m1 * (xi - 1.0 / xi);
    let sigma = ((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0).sqrt();
    let x = mu + sigma * z;
    let y = if x >= 0.0 { x / xi } else { x * xi };
    sigma * 2.0 / (xi + 1.0 / xi) * unit_t.pdf(y)
}

/// Unit-variance symmetric Student-t density.
pub fn unit_t_pdf(z: f64, nu: f64) -> f64 {
    StudentsT::new(0.0, ((nu - 2.0) / nu).sqrt(), nu).unwrap().pdf(z)
}

/// One adaptive Simpson refinement on `[a, b]`, with `f` already evaluated at
/// both ends and the midpoint.
fn simpson_step<F: Fn(f64) -> f64>(f: &F, (a, b): (f64, f64), (fa, fm, fb): (f64, f64, f64), whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson_step(f, (a, m), (fa, flm, fm), left, tol / 2.0, depth - 1)
        + simpson_step(f, (m, b), (fm, frm, fb), right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, (a, b), (fa, fm, fb), whole, tol, 50)
}

/// `∫ g(z) dz` over the whole real line, split at `z0`, via `z = z0 ± tan θ`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(g: F, z0: f64, tol: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let g = &g;
    let mapped = |sign: f64| {
        move |t: f64| {
            if t >= half {
                return 0.0;
            }
            let (s, c) = t.sin_cos();
            let z = z0 + sign * s / c;
            g(z) / (c * c)
        }
    };
    integrate(mapped(1.0), 0.0, half, tol) + integrate(mapped(-1.0), 0.0, half, tol)
}

/// Per-regime GJR variance paths; they do not depend on the regime path.
pub fn variance_paths(r: &[f64], params: &MsGarchParams, h1: f64) -> [Vec<f64>; 2] {
    params.regimes.map(|p: RegimeParams| {
        let mut h = vec![h1; r.len()];
        for t in 1..r.len() {
            let a = if r[t - 1] < 0.0 { p.alpha + p.gamma } else { p.alpha };
            h[t] = p.omega + a * r[t - 1] * r[t - 1] + p.beta * h[t - 1];
        }
        h
    })
}

/// Log-likelihood and smoothed regime marginals by summing over all `2^T` paths.
pub fn enumerate_paths(r: &[f64], params: &MsGarchParams, h1: f64) -> (f64, Vec<[f64; 2]>) {
    let t_len = r.len();
    let h = variance_paths(r, params, h1);
    let dens: Vec<[f64; 2]> = (0..t_len)
        .map(|t| {
            [0, 1].map(|j| {
                let p = &params.regimes[j];
                skewed_t_pdf(r[t] / h[j][t].sqrt(), p.nu, p.xi) / h[j][t].sqrt()
            })
        })
        .collect();
    let trans = [[params.p11, 1.0 - params.p11], [1.0 - params.p22, params.p22]];
    let pi1 = (1.0 - params.p22) / (2.0 - params.p11 - params.p22);
    let init = [pi1, 1.0 - pi1];
    let mut total = 0.0;
    let mut marg = vec![[0.0; 2]; t_len];
    for path in 0..(1usize << t_len) {
        let s = |t: usize| (path >> t) & 1;
        let mut w = init[s(0)] * dens[0][s(0)];
        for t in 1..t_len {
            w *= trans[s(t - 1)][s(t)] * dens[t][s(t)];
        }
        total += w;
        for (t, m) in marg.iter_mut().enumerate() {
            m[s(t)] += w;
        }
    }
    for m in marg.iter_mut() {
        m[0] /= total;
        m[1] /= total;
    }
    (total.ln(), marg)
}

/// Random admissible two-regime parameters.
pub fn random_params(rng: &mut ChaCha8Rng) -> MsGarchParams {
    let mut regime = || {
        let alpha: f64 = rng.random_range(0.0..0.3);
        let gamma: f64 = rng.random_range(-alpha..0.3);
        let beta: f64 = rng.random_range(0.0..(0.95 - alpha - 0.5 * gamma).max(0.01));
        RegimeParams {
            omega: rng.random_range(0.05..2.0),
            alpha,
            gamma,
            beta,
            nu: rng.random_range(2.5..30.0),
            xi: rng.random_range(0.6..1.6),
        }
    };
    let regimes = [regime(), regime()];
    MsGarchParams {
        regimes,
        p11: rng.random_range(0.05..0.99),
        p22: rng.random_range(0.05..0.99),
    }
}
