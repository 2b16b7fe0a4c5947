//! Double-double arithmetic and the few dense kernels the oracle needs in
//! extended precision: products, LU inversion and eigenvalues of a general
//! real matrix (balancing, Hessenberg reduction, shifted QR).

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{Complex, DMatrix};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub const EPS: f64 = 4.930380657631324e-32; // 2^-104

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::new(self.hi.sqrt());
        x + (self - x * x) / (x * Dd::new(2.0))
    }

    /// `|self|` carrying the sign of `sign`.
    pub fn with_sign_of(self, sign: Dd) -> Self {
        if sign.hi >= 0.0 {
            self.abs()
        } else {
            -self.abs()
        }
    }

    pub fn scale(self, f: f64) -> Self {
        self * Dd::new(f)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

macro_rules! assign_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Dd {
            fn $f(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

/// Dense row-major double-double matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DdMat {
    nrows: usize,
    ncols: usize,
    data: Vec<Dd>,
}

impl DdMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![Dd::ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Dd::ONE;
        }
        m
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = Dd::new(m[(i, j)]);
            }
        }
        out
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)].to_f64())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn submatrix(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        let mut out = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &DdMat) {
        for i in 0..b.nrows {
            for j in 0..b.ncols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn matmul(&self, b: &DdMat) -> DdMat {
        assert_eq!(self.ncols, b.nrows);
        let mut out = DdMat::zeros(self.nrows, b.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let brow = &b.data[k * b.ncols..(k + 1) * b.ncols];
                let orow = &mut out.data[i * b.ncols..(i + 1) * b.ncols];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += a * bv;
                }
            }
        }
        out
    }

    pub fn add(&self, b: &DdMat, alpha: f64) -> DdMat {
        assert_eq!((self.nrows, self.ncols), (b.nrows, b.ncols));
        let al = Dd::new(alpha);
        DdMat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&b.data).map(|(&x, &y)| x + al * y).collect(),
        }
    }

    /// Largest entry magnitude, rounded to f64.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.to_f64().abs()))
    }

    pub fn negate(&self) -> DdMat {
        DdMat {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|&x| -x).collect(),
        }
    }

    /// Inverse by LU with partial pivoting; `None` if a pivot vanishes.
    pub fn inverse(&self) -> Option<DdMat> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut a = self.clone();
        let mut inv = DdMat::identity(n);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| {
                a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap_or(Ordering::Equal)
            })?;
            if a[(p, k)].is_zero() {
                return None;
            }
            if p != k {
                a.swap_rows(p, k);
                inv.swap_rows(p, k);
            }
            let piv = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / piv;
                if f.is_zero() {
                    continue;
                }
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
                for j in 0..n {
                    let v = inv[(k, j)];
                    inv[(i, j)] -= f * v;
                }
            }
        }
        for k in (0..n).rev() {
            let piv = a[(k, k)];
            for j in 0..n {
                let mut s = inv[(k, j)];
                for t in k + 1..n {
                    s -= a[(k, t)] * inv[(t, j)];
                }
                inv[(k, j)] = s / piv;
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.ncols {
            self.data.swap(a * self.ncols + j, b * self.ncols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        for i in 0..self.nrows {
            self.data.swap(i * self.ncols + a, i * self.ncols + b);
        }
    }

    /// Eigenvalues (rounded to `f64`); `None` if the QR iteration stalls.
    pub fn eigenvalues(&self) -> Option<Vec<Complex<f64>>> {
        assert_eq!(self.nrows, self.ncols);
        let mut a = self.clone();
        a.balance();
        a.to_hessenberg();
        a.hessenberg_qr()
    }

    fn balance(&mut self) {
        let n = self.nrows;
        let mut done = false;
        while !done {
            done = true;
            for i in 0..n {
                let (mut r, mut c) = (Dd::ZERO, Dd::ZERO);
                for j in 0..n {
                    if j != i {
                        c += self[(j, i)].abs();
                        r += self[(i, j)].abs();
                    }
                }
                if c.is_zero() || r.is_zero() {
                    continue;
                }
                let s = c + r;
                let mut f = 1.0;
                let mut g = r.scale(0.5);
                while c < g {
                    f *= 2.0;
                    c = c.scale(4.0);
                }
                g = r.scale(2.0);
                while c > g {
                    f /= 2.0;
                    c = c.scale(0.25);
                }
                if (c + r).scale(1.0 / f) < s.scale(0.95) {
                    done = false;
                    for j in 0..n {
                        self[(i, j)] = self[(i, j)].scale(1.0 / f);
                        self[(j, i)] = self[(j, i)].scale(f);
                    }
                }
            }
        }
    }

    /// Reduction to upper Hessenberg form by stabilized elementary
    /// similarity transformations; entries below the subdiagonal are zeroed.
    fn to_hessenberg(&mut self) {
        let n = self.nrows;
        for m in 1..n.saturating_sub(1) {
            let mut x = Dd::ZERO;
            let mut piv = m;
            for j in m..n {
                if self[(j, m - 1)].abs() > x.abs() {
                    x = self[(j, m - 1)];
                    piv = j;
                }
            }
            if piv != m {
                self.swap_rows(piv, m);
                self.swap_cols(piv, m);
            }
            if x.is_zero() {
                continue;
            }
            for i in m + 1..n {
                let mut y = self[(i, m - 1)];
                if y.is_zero() {
                    continue;
                }
                y /= x;
                self[(i, m - 1)] = y;
                for j in m..n {
                    let v = self[(m, j)];
                    self[(i, j)] -= y * v;
                }
                for j in 0..n {
                    let v = self[(j, i)];
                    self[(j, m)] += y * v;
                }
            }
        }
        for i in 2..n {
            for j in 0..i - 1 {
                self[(i, j)] = Dd::ZERO;
            }
        }
    }

    /// Francis double-shift QR on an upper Hessenberg matrix.
    fn hessenberg_qr(mut self) -> Option<Vec<Complex<f64>>> {
        let n = self.nrows;
        let mut wr = vec![Complex::new(0.0, 0.0); n];
        if n == 0 {
            return Some(wr);
        }
        let a = &mut self;
        let mut anorm = Dd::ZERO;
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                anorm += a[(i, j)].abs();
            }
        }
        let eps = Dd::new(EPS);
        let mut nn = n as isize - 1;
        let mut t = Dd::ZERO;
        while nn >= 0 {
            let mut its = 0;
            loop {
                let nu = nn as usize;
                let mut l = 0usize;
                for ll in (1..=nu).rev() {
                    let mut s = a[(ll - 1, ll - 1)].abs() + a[(ll, ll)].abs();
                    if s.is_zero() {
                        s = anorm;
                    }
                    if a[(ll, ll - 1)].abs() <= eps * s {
                        a[(ll, ll - 1)] = Dd::ZERO;
                        l = ll;
                        break;
                    }
                }
                let mut x = a[(nu, nu)];
                if l == nu {
                    wr[nu] = Complex::new((x + t).to_f64(), 0.0);
                    nn -= 1;
                    break;
                }
                let mut y = a[(nu - 1, nu - 1)];
                let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
                if l == nu - 1 {
                    let p = (y - x).scale(0.5);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q.hi >= 0.0 {
                        z = p + z.with_sign_of(p);
                        let first = x + z;
                        let second = if z.is_zero() { first } else { x - w / z };
                        wr[nu - 1] = Complex::new(first.to_f64(), 0.0);
                        wr[nu] = Complex::new(second.to_f64(), 0.0);
                    } else {
                        wr[nu] = Complex::new((x + p).to_f64(), -z.to_f64());
                        wr[nu - 1] = Complex::new((x + p).to_f64(), z.to_f64());
                    }
                    nn -= 2;
                    break;
                }
                if its == 60 {
                    return None;
                }
                if its % 10 == 0 && its > 0 {
                    t += x;
                    for i in 0..=nu {
                        a[(i, i)] -= x;
                    }
                    let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                    x = s.scale(0.75);
                    y = x;
                    w = (s * s).scale(-0.4375);
                }
                its += 1;
                let (mut p, mut q, mut r);
                let mut m = nu - 2;
                loop {
                    let z = a[(m, m)];
                    let rr = x - z;
                    let ss = y - z;
                    p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                    q = a[(m + 1, m + 1)] - z - rr - ss;
                    r = a[(m + 2, m + 1)];
                    let s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                    let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                    if u <= eps * v {
                        break;
                    }
                    m -= 1;
                }
                for i in m..nu - 1 {
                    a[(i + 2, i)] = Dd::ZERO;
                    if i != m {
                        a[(i + 2, i - 1)] = Dd::ZERO;
                    }
                }
                for k in m..nu {
                    if k != m {
                        p = a[(k, k - 1)];
                        q = a[(k + 1, k - 1)];
                        r = Dd::ZERO;
                        if k + 1 != nu {
                            r = a[(k + 2, k - 1)];
                        }
                        x = p.abs() + q.abs() + r.abs();
                        if !x.is_zero() {
                            p /= x;
                            q /= x;
                            r /= x;
                        }
                    }
                    let s = (p * p + q * q + r * r).sqrt().with_sign_of(p);
                    if s.is_zero() {
                        continue;
                    }
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -(s * x);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = nu.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                if l + 1 >= nu {
                    break;
                }
            }
        }
        Some(wr)
    }
}

impl std::ops::Index<(usize, usize)> for DdMat {
    type Output = Dd;
    fn index(&self, (i, j): (usize, usize)) -> &Dd {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DdMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Dd {
        &mut self.data[i * self.ncols + j]
    }
}
