//! Numerical quadrature: adaptive Gauss-Kronrod (7/15) and Gauss-Legendre rules.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel. Returns the Kronrod estimate and |K - G|.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Recursive bisection until each panel's error estimate is below its share
/// of `tol`. Returns `(value, estimated error)`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, f64) {
    let (v, e) = gk15(f, a, b);
    if e <= tol || max_depth == 0 {
        return (v, e);
    }
    let m = 0.5 * (a + b);
    let (v1, e1) = adaptive(f, a, m, 0.5 * tol, max_depth - 1);
    let (v2, e2) = adaptive(f, m, b, 0.5 * tol, max_depth - 1);
    (v1 + v2, e1 + e2)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]` split at the given interior
/// breakpoints (which must be increasing). Returns absolute nodes and weights.
pub fn composite_rule(breaks: &[f64], nodes_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(nodes_per_panel);
    let mut xs = Vec::with_capacity(breaks.len() * nodes_per_panel);
    let mut ws = Vec::with_capacity(breaks.len() * nodes_per_panel);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(c + h * x);
            ws.push(h * w);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_exact_for_polynomials_and_smooth() {
        let (v, e) = gk15(&|x: f64| x.powi(10), 0.0, 1.0);
        assert!((v - 1.0 / 11.0).abs() < 1e-15 && e < 1e-6);
        let (v, _) = adaptive(&|x: f64| x.sin(), 0.0, 30.0, 1e-12, 40);
        assert!((v - (1.0 - 30f64.cos())).abs() < 1e-11);
        let (v, _) = adaptive(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 40);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn legendre_rules() {
        for n in [1usize, 2, 5, 16, 33, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
        let (x, w) = composite_rule(&[0.0, 0.5, 2.0], 8);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((q - (1.0 - (-2f64).exp())).abs() < 1e-14);
    }
}
