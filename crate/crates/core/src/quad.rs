//! Quadrature rules on sampled data.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sum::Kahan;

/// Composite Simpson on uniformly spaced samples. An even sample count
/// closes with a 3/8 rule on the last three panels.
pub fn simpson<T: Real>(f: &[T], h: T) -> Result<T> {
    let n = f.len();
    match n {
        0 | 1 => return Ok(T::zero()),
        2 => return Ok(h * (f[0] + f[1]) * T::lit(0.5)),
        3 => return Ok(h / T::lit(3.0) * (f[0] + T::lit(4.0) * f[1] + f[2])),
        _ => {}
    }
    let (simp_end, tail) = if n % 2 == 1 {
        (n - 1, T::zero())
    } else {
        (n - 4, three_eighths(&f[n - 4..], h))
    };
    let mut acc = Kahan::new();
    for i in (0..simp_end).step_by(2) {
        acc.add(h / T::lit(3.0) * (f[i] + T::lit(4.0) * f[i + 1] + f[i + 2]));
    }
    acc.add(tail);
    Ok(acc.value())
}

fn three_eighths<T: Real>(f: &[T], h: T) -> T {
    T::lit(3.0) * h / T::lit(8.0) * (f[0] + T::lit(3.0) * (f[1] + f[2]) + f[3])
}

/// Trapezoid rule on uniform samples.
pub fn trapezoid<T: Real>(f: &[T], h: T) -> T {
    if f.len() < 2 {
        return T::zero();
    }
    let mut acc = Kahan::new();
    acc.add((f[0] + f[f.len() - 1]) * T::lit(0.5));
    for &v in &f[1..f.len() - 1] {
        acc.add(v);
    }
    acc.value() * h
}

/// Resumable cumulative Simpson integration on uniform samples.
///
/// Even indices take whole Simpson pairs summed with compensation; an odd
/// index `i` adds the half-pair `∫_{i−1}^{i}` from the three samples ending
/// at `i` (the first one uses samples 0..=2). The value at index `i` thus
/// depends only on samples up to `max(i, 2)`, and the running state at any
/// even index fully determines everything after it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumulativeSimpson<T> {
    h: T,
    /// Compensated integral up to `even`.
    acc: Kahan<T>,
    even: usize,
}

impl<T: Real> CumulativeSimpson<T> {
    pub fn new(h: T) -> Self {
        Self {
            h,
            acc: Kahan::new(),
            even: 0,
        }
    }

    /// Resume from a stored even-index state.
    pub fn resume(h: T, even: usize, acc: Kahan<T>) -> Result<Self> {
        if even % 2 != 0 {
            return Err(Error::Precondition(format!(
                "resume index {even} is not even"
            )));
        }
        Ok(Self { h, acc, even })
    }

    pub fn index(&self) -> usize {
        self.even
    }

    pub fn state(&self) -> Kahan<T> {
        self.acc
    }

    /// Integral up to the current even index.
    pub fn value(&self) -> T {
        self.acc.value()
    }

    fn odd_piece(&self, f: &[T], i: usize) -> T {
        let h12 = self.h / T::lit(12.0);
        let (near, mid, far) = if i == 1 { (f[0], f[1], f[2]) } else { (f[i], f[i - 1], f[i - 2]) };
        let piece = h12 * (T::lit(5.0) * near + T::lit(8.0) * mid - far);
        // a nonnegative integrand must not produce a negative half panel
        if near >= T::zero() && mid >= T::zero() && far >= T::zero() && piece < T::zero() {
            T::zero()
        } else {
            piece
        }
    }

    /// Extends the integral through `f[..end]` (absolute indices), pushing
    /// the cumulative value at every index in `(current, end)` to `out`.
    /// Ends positioned at the last even index `< end`.
    pub fn advance(&mut self, f: &[T], end: usize, out: &mut Vec<T>) -> Result<()> {
        if end > f.len() {
            return Err(Error::Range(format!(
                "advance to {end} beyond {} samples",
                f.len()
            )));
        }
        if end >= 2 && end < 3 && f.len() < 3 {
            return Err(Error::Precondition(
                "cumulative Simpson needs at least 3 samples".into(),
            ));
        }
        let h3 = self.h / T::lit(3.0);
        let mut i = self.even + 1;
        while i < end {
            if i % 2 == 1 {
                let piece = self.odd_piece(f, i);
                out.push(self.acc.value() + piece);
            } else {
                self.acc
                    .add(h3 * (f[i - 2] + T::lit(4.0) * f[i - 1] + f[i]));
                self.even = i;
                out.push(self.acc.value());
            }
            i += 1;
        }
        Ok(())
    }
}

/// Cumulative integral `∫_{x_0}^{x_i} f` at every sample; `out[0] = 0`.
pub fn cumulative_simpson<T: Real>(f: &[T], h: T) -> Result<Vec<T>> {
    if f.len() == 2 {
        return Ok(vec![T::zero(), h * (f[0] + f[1]) * T::lit(0.5)]);
    }
    let mut out = Vec::with_capacity(f.len());
    if f.is_empty() {
        return Ok(out);
    }
    out.push(T::zero());
    CumulativeSimpson::new(h).advance(f, f.len(), &mut out)?;
    Ok(out)
}

/// One quadratic Filon panel on nodes `u1 + a < u1 < u1 + b`.
#[derive(Clone, Copy, Debug)]
struct Panel {
    mid: f64,
    a: f64,
    b: f64,
    c: [f64; 3],
}

/// Filon-type rule for `∫ g(u) e^{−iωu} du` on (possibly nonuniform) nodes.
/// `g` is interpolated by a parabola on each pair of intervals and the
/// oscillatory factor is integrated exactly, so the rule stays accurate when
/// `ω` times the spacing is large.
#[derive(Clone, Debug)]
pub struct FilonRule {
    panels: Vec<Panel>,
}

impl FilonRule {
    /// Needs an odd number (>= 3) of strictly increasing nodes.
    pub fn new(u: &[f64], g: &[f64]) -> Result<Self> {
        if u.len() != g.len() || u.len() < 3 || u.len() % 2 == 0 {
            return Err(Error::Precondition(format!(
                "Filon rule needs an odd number >= 3 of nodes, got {} nodes / {} values",
                u.len(),
                g.len()
            )));
        }
        let mut panels = Vec::with_capacity(u.len() / 2);
        for j in (0..u.len() - 1).step_by(2) {
            let (u0, u1, u2) = (u[j], u[j + 1], u[j + 2]);
            if !(u0 < u1 && u1 < u2) {
                return Err(Error::Precondition(format!("nodes not increasing at {j}")));
            }
            let a = u0 - u1;
            let b = u2 - u1;
            // g(u1 + v) = g1 + c1 v + c2 v^2 through the three nodes
            let d0 = (g[j] - g[j + 1]) / a;
            let d2 = (g[j + 2] - g[j + 1]) / b;
            let c2 = (d2 - d0) / (b - a);
            let c1 = d0 - c2 * a;
            panels.push(Panel {
                mid: u1,
                a,
                b,
                c: [g[j + 1], c1, c2],
            });
        }
        Ok(Self { panels })
    }

    pub fn integrate(&self, omega: f64) -> Complex64 {
        let mut re = Kahan::<f64>::new();
        let mut im = Kahan::<f64>::new();
        let Some(first) = self.panels.first() else {
            return Complex64::new(0.0, 0.0);
        };
        let mut e_left = Complex64::from_polar(1.0, -omega * (first.mid + first.a));
        for p in &self.panels {
            let e_mid = Complex64::from_polar(1.0, -omega * p.mid);
            let e_right = Complex64::from_polar(1.0, -omega * (p.mid + p.b));
            let v = if omega.abs() * p.a.abs().max(p.b) < 1.0 {
                let j = moments_series(p.a, p.b, omega);
                e_mid * (j[0] * p.c[0] + j[1] * p.c[1] + j[2] * p.c[2])
            } else {
                // closed-form moments with the panel phase folded in
                let i_over = Complex64::new(0.0, 1.0 / omega);
                let j0 = i_over * (e_right - e_left);
                let j1 = i_over * (e_right * p.b - e_left * p.a - j0);
                let j2 = i_over * (e_right * (p.b * p.b) - e_left * (p.a * p.a) - j1 * 2.0);
                j0 * p.c[0] + j1 * p.c[1] + j2 * p.c[2]
            };
            re.add(v.re);
            im.add(v.im);
            e_left = e_right;
        }
        Complex64::new(re.value(), im.value())
    }
}

/// `J_m = ∫_a^b v^m e^{−iωv} dv` for `m = 0, 1, 2`, by power series in `(−iωv)`.
fn moments_series(a: f64, b: f64, omega: f64) -> [Complex64; 3] {
    let mut out = [Complex64::new(0.0, 0.0); 3];
    let mut coef = Complex64::new(1.0, 0.0);
    for n in 0..40 {
        let mut small = true;
        for (m, o) in out.iter_mut().enumerate() {
            let e = (m + n + 1) as i32;
            let term = coef * ((b.powi(e) - a.powi(e)) / e as f64);
            *o += term;
            if term.norm() > 1e-18 * o.norm().max(1e-300) {
                small = false;
            }
        }
        if small {
            break;
        }
        coef = coef * Complex64::new(0.0, -omega) / (n + 1) as f64;
    }
    out
}

#[cfg(test)]
fn moments_closed(a: f64, b: f64, omega: f64) -> [Complex64; 3] {
    let i_over = Complex64::new(0.0, 1.0 / omega);
    let ea = Complex64::from_polar(1.0, -omega * a);
    let eb = Complex64::from_polar(1.0, -omega * b);
    let j0 = i_over * (eb - ea);
    let j1 = i_over * (eb * b - ea * a - j0);
    let j2 = i_over * (eb * (b * b) - ea * (a * a) - j1 * 2.0);
    [j0, j1, j2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simpson_exact_for_cubics() {
        let h = 0.1;
        for n in [5usize, 6, 11, 12] {
            let f: Vec<f64> = (0..n)
                .map(|i| (i as f64 * h).powi(3) - 2.0 * (i as f64 * h))
                .collect();
            let x = (n - 1) as f64 * h;
            let want = x.powi(4) / 4.0 - x * x;
            assert!((simpson(&f, h).unwrap() - want).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let h = 0.01;
        let f: Vec<f64> = (0..1001).map(|i| (i as f64 * h).sin()).collect();
        let c = cumulative_simpson(&f, h).unwrap();
        for (i, v) in c.iter().enumerate() {
            let want = 1.0 - (i as f64 * h).cos();
            assert!((v - want).abs() < 1e-9, "i={i}");
        }
    }

    #[test]
    fn cumulative_resume_is_bitwise() {
        let h = 0.05;
        let f: Vec<f64> = (0..2001)
            .map(|i| (i as f64 * h * 1.3).cos() * (1.0 + i as f64 * 1e-3))
            .collect();
        let full = cumulative_simpson(&f, h).unwrap();
        let mut first = CumulativeSimpson::new(h);
        let mut out = vec![0.0];
        first.advance(&f, 801, &mut out).unwrap();
        assert_eq!(first.index(), 800);
        let mut resumed = CumulativeSimpson::resume(h, 800, first.state()).unwrap();
        resumed.advance(&f, f.len(), &mut out).unwrap();
        assert_eq!(out.len(), full.len());
        for (a, b) in out.iter().zip(&full) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn prefix_values_do_not_depend_on_later_samples() {
        let h = 0.1;
        let f: Vec<f64> = (0..101).map(|i| (i as f64 * h).exp().sin()).collect();
        let long = cumulative_simpson(&f, h).unwrap();
        let short = cumulative_simpson(&f[..58], h).unwrap();
        for (a, b) in short.iter().zip(&long) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn trapezoid_linear() {
        let f = [1.0f32, 2.0, 3.0];
        assert_eq!(trapezoid(&f, 0.5f32), 2.0);
    }

    #[test]
    fn filon_constant_and_exponential() {
        // nonuniform nodes u = log x, x uniform
        let xs: Vec<f64> = (0..401).map(|i| 1.0 + i as f64 * 0.05).collect();
        let u: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let (ua, ub) = (u[0], u[400]);
        for omega in [0.0, 0.3, 5.0, 300.0] {
            let ones = vec![1.0; u.len()];
            let got = FilonRule::new(&u, &ones).unwrap().integrate(omega);
            let want = if omega == 0.0 {
                Complex64::new(ub - ua, 0.0)
            } else {
                (Complex64::from_polar(1.0, -omega * ub) - Complex64::from_polar(1.0, -omega * ua))
                    / Complex64::new(0.0, -omega)
            };
            assert!((got - want).norm() < 1e-13, "omega={omega}");
            // g = e^{-u}: ∫ e^{-(1+iω)u} du
            let g: Vec<f64> = u.iter().map(|v| (-v).exp()).collect();
            let got = FilonRule::new(&u, &g).unwrap().integrate(omega);
            let s = Complex64::new(1.0, omega);
            let want = ((-s * ua).exp() - (-s * ub).exp()) / s;
            assert!((got - want).norm() < 1e-6, "omega={omega}: {got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn filon_moment_branches_agree(a in -0.5f64..-0.01, b in 0.01f64..0.5, r in 0.5f64..2.0) {
            let w = r / a.abs().max(b.abs());
            let s = moments_series(a, b, w);
            let c = moments_closed(a, b, w);
            let scale = (b - a).powi(3);
            for m in 0..3 {
                prop_assert!((s[m] - c[m]).norm() < 1e-13 * scale.max(1e-6) + 1e-15 * s[0].norm());
            }
        }

        #[test]
        fn simpson_linear_in_data(c in -5.0f64..5.0, n in 3usize..40) {
            let f: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64).collect();
            let g: Vec<f64> = f.iter().map(|v| c * v).collect();
            let a = simpson(&f, 0.1).unwrap();
            let b = simpson(&g, 0.1).unwrap();
            prop_assert!((c * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }
}
