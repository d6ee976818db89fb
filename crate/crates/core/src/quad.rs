//! Adaptive Simpson quadrature for complex-valued integrands on a finite interval.

use num_complex::Complex;

use crate::Real;

const MAX_DEPTH: u32 = 48;

/// ∫ₐᵇ f(t) dt to absolute tolerance `tol`.
///
/// The interval is first cut into `pieces` panels so oscillatory integrands are resolved
/// before the adaptive refinement starts.
pub fn integrate<T: Real, F>(f: F, a: T, b: T, tol: T, pieces: usize) -> Complex<T>
where
    F: Fn(T) -> Complex<T>,
{
    if b <= a {
        return Complex::new(T::zero(), T::zero());
    }
    let pieces = pieces.max(1);
    let width = (b - a) / T::from_usize(pieces).unwrap();
    let panel_tol = tol / T::from_usize(pieces).unwrap();
    let half = T::lit(0.5);
    (0..pieces).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
        let lo = a + width * T::from_usize(k).unwrap();
        let hi = if k + 1 == pieces { b } else { lo + width };
        let mid = (lo + hi) * half;
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        acc + refine(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH)
    })
}

fn simpson<T: Real>(a: T, b: T, fa: Complex<T>, fm: Complex<T>, fb: Complex<T>) -> Complex<T> {
    (fa + fm * T::lit(4.0) + fb) * ((b - a) / T::lit(6.0))
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F>(
    f: &F,
    a: T,
    b: T,
    fa: Complex<T>,
    fm: Complex<T>,
    fb: Complex<T>,
    whole: Complex<T>,
    tol: T,
    depth: u32,
) -> Complex<T>
where
    F: Fn(T) -> Complex<T>,
{
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let (lm, rm) = ((a + m) * half, (m + b) * half);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    refine(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
}
