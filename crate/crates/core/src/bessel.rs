//! Integer-order Bessel functions of the first kind.
//!
//! Values are produced by Miller's downward recurrence normalised with the
//! Neumann sum `J_0 + 2 * sum_k J_2k = 1`, which is stable for every order
//! and argument and yields the whole ladder `J_0 ..= J_n` in one sweep.

/// Rescaling threshold for the unnormalised downward sweep.
const BIG: f64 = 1.0e250;

/// `J_0(x) ..= J_nmax(x)` for real `x`.
pub fn bessel_j_ladder(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let top = (nmax as f64).max(ax);
    let mut start = (top + 30.0 + 2.0 * (40.0 * top).sqrt()) as usize;
    start += start % 2;

    let mut ladder = vec![0.0; start + 2];
    ladder[start] = 1.0;
    let two_over_x = 2.0 / ax;
    for k in (1..=start).rev() {
        let next = k as f64 * two_over_x * ladder[k] - ladder[k + 1];
        ladder[k - 1] = next;
        if next.abs() > BIG {
            for v in ladder[k - 1..].iter_mut() {
                *v /= BIG;
            }
        }
    }

    let mut norm = ladder[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * ladder[k];
    }

    for (n, slot) in out.iter_mut().enumerate() {
        let v = ladder[n] / norm;
        // J_n(-x) = (-1)^n J_n(x)
        *slot = if x < 0.0 && n % 2 == 1 { -v } else { v };
    }
    out
}

/// `J_n(x)` for any integer order.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let order = n.unsigned_abs() as usize;
    let v = bessel_j_ladder(order, x)[order];
    if n < 0 && order % 2 == 1 {
        -v
    } else {
        v
    }
}

/// `J'_n(x) = (J_{n-1}(x) - J_{n+1}(x)) / 2`.
pub fn bessel_j_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

/// `J_n(x) / x`, continued to its limit at `x = 0`.
pub fn bessel_j_over_x(n: i32, x: f64) -> f64 {
    if x.abs() < 1e-300 {
        return match n {
            1 => 0.5,
            -1 => -0.5,
            _ => 0.0,
        };
    }
    bessel_j(n, x) / x
}
