//! Gauss-type quadrature on the reference segment `[0, 1]` and the reference
//! triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.

/// Legendre polynomial `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(n, t);
            let dp = n as f64 * (t * p - pm1) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm1) = legendre_pair(n, t);
        let dp = n as f64 * (t * p - pm1) / (t * t - 1.0);
        x[n - 1 - i] = t;
        w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Gauss–Lobatto nodes on `[-1, 1]` (endpoints included), ascending.
pub fn gauss_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1;
    let mut x: Vec<f64> = (0..n)
        .map(|i| -(std::f64::consts::PI * i as f64 / m as f64).cos())
        .collect();
    for xi in x.iter_mut().take(m).skip(1) {
        let mut t = *xi;
        for _ in 0..100 {
            let (p, pm1) = legendre_pair(m, t);
            let dp = m as f64 * (t * p - pm1) / (t * t - 1.0);
            let ddp = (2.0 * t * dp - (m * (m + 1)) as f64 * p) / (1.0 - t * t);
            let dt = dp / ddp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        *xi = t;
    }
    x[0] = -1.0;
    x[m] = 1.0;
    x
}

#[derive(Debug, Clone)]
pub struct SegmentRule {
    /// Points in `[0, 1]`.
    pub points: Vec<f64>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl SegmentRule {
    /// Gauss rule exact for polynomials of degree `degree`.
    pub fn new(degree: usize) -> Self {
        let n = degree / 2 + 1;
        let (x, w) = gauss_legendre(n);
        Self {
            points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|w| 0.5 * w).collect(),
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Collapsed (Duffy) tensor Gauss rule exact for total degree `degree`.
    pub fn new(degree: usize) -> Self {
        let n = (degree + 2).div_ceil(2);
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xa, wa) in x.iter().zip(&w) {
            let xi = 0.5 * (xa + 1.0);
            for (xb, wb) in x.iter().zip(&w) {
                let eta = 0.5 * (xb + 1.0);
                points.push([xi * (1.0 - eta), eta]);
                weights.push(0.25 * wa * wb * (1.0 - eta));
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
