//! Branch-free `sin`/`cos` for the activation hot loop.
//!
//! Three-part Cody-Waite reduction by pi/2 followed by the fdlibm kernel
//! polynomials on [-pi/4, pi/4]. Accurate to about one ulp for |x| < 2^20,
//! which covers every pre-activation a sane network produces; larger inputs
//! fall back to the libm routines.

const INV_PIO2: f64 = 6.36619772367581382433e-01;
const PIO2_1: f64 = 1.57079632673412561417e+00;
const PIO2_2: f64 = 6.07710050630396597660e-11;
const PIO2_3: f64 = 2.02226624871116645580e-21;

const S1: f64 = -1.66666666666666324348e-01;
const S2: f64 = 8.33333333332248946124e-03;
const S3: f64 = -1.98412698298579493134e-04;
const S4: f64 = 2.75573137070700676789e-06;
const S5: f64 = -2.50507602534068634195e-08;
const S6: f64 = 1.58969099521155010221e-10;

const C1: f64 = 4.16666666666666019037e-02;
const C2: f64 = -1.38888888888741095749e-03;
const C3: f64 = 2.48015872894767294178e-05;
const C4: f64 = -2.75573143513906633035e-07;
const C5: f64 = 2.08757232129817482790e-09;
const C6: f64 = -1.13596475577881948265e-11;

const REDUCTION_LIMIT: f64 = 1048576.0;
/// 1.5 * 2^52: adding and subtracting rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6755399441055744.0;
const SIGN: u64 = 1 << 63;

/// sin and cos for |x| < `REDUCTION_LIMIT`, with no data-dependent branches.
#[inline(always)]
fn sin_cos_reduced(x: f64) -> (f64, f64) {
    let shifted = x * INV_PIO2 + ROUND_MAGIC;
    let q = shifted.to_bits();
    let k = shifted - ROUND_MAGIC;
    let r = ((x - k * PIO2_1) - k * PIO2_2) - k * PIO2_3;
    let z = r * r;

    let v = z * r;
    let rs = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    let sin_r = r + v * (S1 + z * rs);

    let rc = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let cos_r = w + (((1.0 - w) - hz) + z * rc);

    // quadrants: 0 -> (s, c), 1 -> (c, -s), 2 -> (-s, -c), 3 -> (-c, s)
    let swap = (q & 1).wrapping_neg();
    let (sb, cb) = (sin_r.to_bits(), cos_r.to_bits());
    let sin = (sb & !swap) | (cb & swap);
    let cos = (cb & !swap) | (sb & swap);
    let sin_sign = (q << 62) & SIGN;
    let cos_sign = (q.wrapping_add(1) << 62) & SIGN;
    (f64::from_bits(sin ^ sin_sign), f64::from_bits(cos ^ cos_sign))
}

#[inline]
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() < REDUCTION_LIMIT {
        sin_cos_reduced(x)
    } else {
        x.sin_cos()
    }
}

/// `out[i] = sin(scale * z[i])`, `slope[i] = scale * cos(scale * z[i])`.
pub fn sine_with_slope(z: &mut [f64], slope: &mut [f64], scale: f64) {
    let peak = z.iter().fold(0.0f64, |m, a| m.max(a.abs())) * scale.abs();
    if peak < REDUCTION_LIMIT {
        for (a, d) in z.iter_mut().zip(slope.iter_mut()) {
            let (s, c) = sin_cos_reduced(scale * *a);
            *a = s;
            *d = scale * c;
        }
    } else {
        // NaN lands here too and propagates through libm.
        for (a, d) in z.iter_mut().zip(slope.iter_mut()) {
            let (s, c) = (scale * *a).sin_cos();
            *a = s;
            *d = scale * c;
        }
    }
}
