//! Integer-order Bessel functions `J_n`, `I_n` and the clamped circular
//! plate frequency equation.

use crate::num::Scalar;

/// `J_0(x) ..= J_nmax(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 * sum J_2k = 1`. Stable for all `x >= 0`.
pub fn bessel_j_all<T: Scalar>(nmax: usize, x: T) -> Vec<T> {
    let mut out = vec![T::zero(); nmax + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let x = x.abs();
    let xs = x.to_f64().unwrap_or(0.0) as usize;
    let top = nmax.max(xs) + 20 + (40.0 * (nmax.max(xs) as f64 + 1.0)).sqrt() as usize;
    let start = top + (top % 2);
    let rescale = T::lit(1e10);
    let two_over_x = T::lit(2.0) / x;
    let (mut next, mut cur) = (T::zero(), T::lit(1e-30));
    let mut norm = T::zero();
    for k in (1..=start).rev() {
        let prev = T::from_usize_lossy(k) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds the unnormalized J_{k-1}
        let order = k - 1;
        if order <= nmax {
            out[order] = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm = norm + T::lit(2.0) * cur;
        }
        if cur.abs() > rescale {
            let s = T::one() / rescale;
            cur = cur * s;
            next = next * s;
            norm = norm * s;
            for v in out.iter_mut() {
                *v = *v * s;
            }
        }
    }
    norm = norm + cur;
    for v in out.iter_mut() {
        *v = *v / norm;
    }
    out
}

pub fn bessel_j<T: Scalar>(n: usize, x: T) -> T {
    bessel_j_all(n, x)[n]
}

/// Modified Bessel function `I_n(x)` by its power series (all terms positive).
pub fn bessel_i<T: Scalar>(n: usize, x: T) -> T {
    let half = x / T::lit(2.0);
    let mut term = T::one();
    for k in 1..=n {
        term = term * half / T::from_usize_lossy(k);
    }
    let q = half * half;
    let mut sum = term;
    for k in 1..500 {
        term = term * q / (T::from_usize_lossy(k) * T::from_usize_lossy(k + n));
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    sum
}

fn j_and_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let j = bessel_j_all(n + 1, x);
    let d = if n == 0 {
        -j[1]
    } else {
        (j[n - 1] - j[n + 1]) / T::lit(2.0)
    };
    (j[n], d)
}

fn i_and_derivative<T: Scalar>(n: usize, x: T) -> (T, T) {
    let i_n = bessel_i(n, x);
    let d = if n == 0 {
        bessel_i(1, x)
    } else {
        (bessel_i(n - 1, x) + bessel_i(n + 1, x)) / T::lit(2.0)
    };
    (i_n, d)
}

/// `J_n(x) I_n'(x) - I_n(x) J_n'(x)`; its positive roots are the clamped
/// circular plate eigenvalues `lambda_nm`.
pub fn clamped_plate_characteristic<T: Scalar>(n: usize, x: T) -> T {
    let (j, dj) = j_and_derivative(n, x);
    let (i, di) = i_and_derivative(n, x);
    j * di - i * dj
}

/// First `count` positive roots of the clamped-plate frequency equation for
/// azimuthal order `n`, bracketed by a coarse scan and refined by bisection.
pub fn clamped_plate_roots<T: Scalar>(n: usize, count: usize) -> Vec<T> {
    let step = T::lit(0.05);
    let mut roots = Vec::with_capacity(count);
    let mut a = T::lit(0.1);
    let mut fa = clamped_plate_characteristic(n, a);
    while roots.len() < count {
        let b = a + step;
        let fb = clamped_plate_characteristic(n, b);
        if fa == T::zero() {
            roots.push(a);
        } else if fa.signum() != fb.signum() {
            roots.push(bisect(n, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    roots
}

fn bisect<T: Scalar>(n: usize, mut lo: T, mut hi: T, mut flo: T) -> T {
    let two = T::lit(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = clamped_plate_characteristic(n, mid);
        if fm == T::zero() {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Radial shape `J_n(lambda r/a) - J_n(lambda)/I_n(lambda) I_n(lambda r/a)`.
pub fn clamped_mode_shape<T: Scalar>(n: usize, lambda: T, rho: T) -> T {
    let ratio = bessel_j(n, lambda) / bessel_i(n, lambda);
    bessel_j(n, lambda * rho) - ratio * bessel_i(n, lambda * rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent library implementation.
    #[test]
    fn j_values() {
        let cases: [(usize, f64, f64); 6] = [
            (0, 1.0, 0.765_197_686_557_966_6),
            (1, 2.5, 0.497_094_102_464_274_1),
            (3, 10.0, 0.058_379_379_305_186_66),
            (0, 15.0, -0.014_224_472_826_780_745),
            (2, 0.3, 0.011_165_861_949_063_964),
            (5, 1.0, 2.497_577_302_112_344e-4),
        ];
        for (n, x, want) in cases {
            let got = bessel_j(n, x);
            assert!(
                (got - want).abs() < 1e-13 * want.abs().max(1e-2),
                "J_{n}({x}) = {got}, want {want}"
            );
        }
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(2, 0.0), 0.0);
    }

    #[test]
    fn i_values() {
        let cases: [(usize, f64, f64); 4] = [
            (0, 1.0, 1.266_065_877_752_008_4),
            (2, 5.0, 17.505_614_966_624_236),
            (1, 10.0, 2_670.988_303_701_254_6),
            (3, 0.5, 2.645_111_968_990_286e-3),
        ];
        for (n, x, want) in cases {
            let got = bessel_i(n, x);
            assert!((got - want).abs() < 1e-13 * want, "I_{n}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn clamped_roots_squared() {
        // lambda^2 for (n, m), standard clamped circular plate table
        let table: [(usize, [f64; 3]); 4] = [
            (0, [10.2158, 39.7711, 89.1041]),
            (1, [21.2604, 60.8287, 120.0792]),
            (2, [34.8770, 84.5826, 153.8151]),
            (3, [51.0300, 111.0214, 190.3038]),
        ];
        for (n, want) in table {
            let roots = clamped_plate_roots::<f64>(n, 3);
            for (r, w) in roots.iter().zip(want) {
                assert!((r * r - w).abs() < 1e-4, "n={n}: {} vs {w}", r * r);
            }
        }
    }

    #[test]
    fn f32_roots() {
        let r = clamped_plate_roots::<f32>(0, 1)[0];
        assert!(((r * r) as f64 - 10.2158).abs() < 1e-3);
    }

    #[test]
    fn mode_shape_clamped_edge() {
        for n in 0..4 {
            let lam = clamped_plate_roots::<f64>(n, 1)[0];
            assert!(clamped_mode_shape(n, lam, 1.0).abs() < 1e-12);
        }
    }
}
