//! Nemenman–Shafee–Bialek entropy estimator.
//!
//! The NSB prior is a mixture of symmetric Dirichlet priors whose
//! concentration β is weighted so that the a-priori expected entropy
//! ξ(β) = ψ(Kβ + 1) − ψ(β + 1) is uniform on [0, ln K]. The estimate is the
//! posterior mean
//!
//! ```text
//! S = ∫ dξ  P(n | β(ξ)) · E[S | n, β(ξ)]  /  ∫ dξ  P(n | β(ξ))
//! ```
//!
//! integrated over ξ by adaptive Simpson quadrature seeded with a uniform
//! 32-node grid. Internally the grid runs over the entropy deficit
//! D = ln K − ξ, which is the same measure but keeps full precision near the
//! uniform end where β → ∞.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const GRID_NODES: usize = 32;
const REL_TOL: f64 = 1e-6;
const MAX_DEPTH: u32 = 48;
const MAX_EVALS: usize = 400_000;
const LN_BETA_MIN: f64 = -27.631_021_115_928_547; // ln 1e-12
const LN_BETA_MAX: f64 = 27.631_021_115_928_547; // ln 1e12
const EULER_ZETA: [f64; 6] = [
    1.644_934_066_848_226_4, // ζ(2)
    1.202_056_903_159_594_3, // ζ(3)
    1.082_323_233_711_138_2, // ζ(4)
    1.036_927_755_143_37, // ζ(5)
    1.017_343_061_984_449, // ζ(6)
    1.008_349_277_381_922_8, // ζ(7)
];

/// NSB posterior-mean entropy (nats) of a histogram with any number of bins.
/// Entries may be non-integer (pageview mass).
pub fn nsb_entropy(h: &[f64]) -> Result<f64> {
    if h.len() < 2 {
        return Err(Error::invalid("NSB needs at least two bins"));
    }
    if h.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("histogram entries must be finite and nonnegative"));
    }
    let n: f64 = h.iter().sum();
    if n <= 0.0 {
        return Err(Error::EmptyProfile);
    }
    let model = Model::new(h, n);
    let value = model.integrate()?;
    Ok(value.clamp(0.0, model.ln_k))
}

struct Model {
    occupied: Vec<f64>,
    empty_bins: f64,
    k: f64,
    n: f64,
    ln_k: f64,
    map_u: f64,
    log_ref: f64,
}

#[derive(Clone, Copy)]
struct Node {
    d: f64,
    u: f64,
    w: f64,
    ws: f64,
}

#[derive(Default)]
struct Tally {
    evals: usize,
    residual: f64,
    failed: bool,
}

impl Model {
    fn new(h: &[f64], n: f64) -> Self {
        let occupied: Vec<f64> = h.iter().copied().filter(|&x| x > 0.0).collect();
        let k = h.len() as f64;
        let mut m = Model {
            empty_bins: k - occupied.len() as f64,
            occupied,
            k,
            n,
            ln_k: k.ln(),
            map_u: 0.0,
            log_ref: 0.0,
        };
        m.map_u = m.map_log_beta();
        m.log_ref = m.log_evidence(m.map_u);
        m
    }

    /// log P(n | β) up to a β-independent constant.
    fn log_evidence(&self, u: f64) -> f64 {
        let beta = u.exp();
        let mut l = -ln_gamma_ratio(self.k * beta, self.n);
        for &x in &self.occupied {
            l += ln_gamma_ratio(beta, x);
        }
        l
    }

    /// E[S | n, β] for the Dirichlet(β) posterior.
    fn posterior_entropy(&self, u: f64) -> f64 {
        let beta = u.exp();
        let a = self.n + self.k * beta;
        let mut s = digamma(a + 1.0);
        for &x in &self.occupied {
            s -= (x + beta) / a * digamma(x + beta + 1.0);
        }
        if self.empty_bins > 0.0 {
            s -= self.empty_bins * beta / a * digamma(beta + 1.0);
        }
        s
    }

    /// ln β maximising the evidence, by golden-section search on ln β.
    fn map_log_beta(&self) -> f64 {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (LN_BETA_MIN, LN_BETA_MAX);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = self.log_evidence(c);
        let mut fd = self.log_evidence(d);
        while b - a > 1e-6 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.log_evidence(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.log_evidence(d);
            }
        }
        let mid = 0.5 * (a + b);
        [LN_BETA_MIN, mid, LN_BETA_MAX]
            .into_iter()
            .max_by(|x, y| self.log_evidence(*x).total_cmp(&self.log_evidence(*y)))
            .unwrap()
    }

    fn node_at_u(&self, u: f64) -> Node {
        let (_, d) = prior_entropy(self.k, u.exp());
        let w = (self.log_evidence(u) - self.log_ref).exp();
        let ws = if w > 0.0 { w * self.posterior_entropy(u) } else { 0.0 };
        Node { d, u, w, ws }
    }

    fn node_at_d(&self, d: f64, lo: f64, hi: f64) -> Node {
        let u = invert_deficit(self.k, self.ln_k, d, lo, hi);
        let w = (self.log_evidence(u) - self.log_ref).exp();
        let ws = if w > 0.0 { w * self.posterior_entropy(u) } else { 0.0 };
        Node { d, u, w, ws }
    }

    fn integrate(&self) -> Result<f64> {
        let top = self.node_at_u(LN_BETA_MIN);
        let bottom = self.node_at_u(LN_BETA_MAX);
        let peak = self.node_at_u(self.map_u);

        // grid over the deficit, ascending in D (descending in β)
        let mut nodes = Vec::with_capacity(GRID_NODES + 1);
        nodes.push(bottom);
        let step = (top.d - bottom.d) / (GRID_NODES - 1) as f64;
        let mut prev_u = LN_BETA_MAX;
        for i in 1..GRID_NODES - 1 {
            let node = self.node_at_d(bottom.d + step * i as f64, LN_BETA_MIN, prev_u);
            prev_u = node.u;
            nodes.push(node);
        }
        nodes.push(top);
        if peak.d > bottom.d && peak.d < top.d {
            let pos = nodes.partition_point(|x| x.d < peak.d);
            if nodes[pos].d != peak.d {
                nodes.insert(pos, peak);
            }
        }

        // coarse pass fixes the absolute tolerance
        let mut panels = Vec::with_capacity(nodes.len() - 1);
        let mut coarse = 0.0;
        for pair in nodes.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let m = self.node_at_d(0.5 * (a.d + b.d), b.u, a.u);
            coarse += (b.d - a.d) / 6.0 * (a.w + 4.0 * m.w + b.w);
            panels.push((a, m, b));
        }
        if !(coarse > 0.0) || !coarse.is_finite() {
            return Err(Error::NsbNonConvergence { residual: f64::NAN });
        }
        let width = top.d - bottom.d;
        let mut tally = Tally::default();
        let (mut z, mut zs) = (0.0, 0.0);
        for (a, m, b) in panels {
            let share = (b.d - a.d) / width;
            let tol = (REL_TOL * coarse * share, REL_TOL * coarse * self.ln_k * share);
            let whole = simpson(&a, &m, &b);
            let (pz, pzs) = self.adapt(a, m, b, whole, tol, MAX_DEPTH, &mut tally);
            z += pz;
            zs += pzs;
        }
        if tally.failed {
            return Err(Error::NsbNonConvergence {
                residual: tally.residual,
            });
        }
        Ok(zs / z)
    }

    #[allow(clippy::too_many_arguments)]
    fn adapt(
        &self,
        a: Node,
        m: Node,
        b: Node,
        whole: (f64, f64),
        tol: (f64, f64),
        depth: u32,
        tally: &mut Tally,
    ) -> (f64, f64) {
        let lm = self.node_at_d(0.5 * (a.d + m.d), m.u, a.u);
        let rm = self.node_at_d(0.5 * (m.d + b.d), b.u, m.u);
        tally.evals += 2;
        let left = simpson(&a, &lm, &m);
        let right = simpson(&m, &rm, &b);
        let delta = (left.0 + right.0 - whole.0, left.1 + right.1 - whole.1);
        let ok = delta.0.abs() <= 15.0 * tol.0 && delta.1.abs() <= 15.0 * tol.1;
        if ok || depth == 0 || tally.evals >= MAX_EVALS {
            if !ok {
                tally.failed = true;
                tally.residual = tally.residual.max(delta.0.abs().max(delta.1.abs()));
            }
            return (
                left.0 + right.0 + delta.0 / 15.0,
                left.1 + right.1 + delta.1 / 15.0,
            );
        }
        let half = (0.5 * tol.0, 0.5 * tol.1);
        let l = self.adapt(a, lm, m, left, half, depth - 1, tally);
        let r = self.adapt(m, rm, b, right, half, depth - 1, tally);
        (l.0 + r.0, l.1 + r.1)
    }
}

fn simpson(a: &Node, m: &Node, b: &Node) -> (f64, f64) {
    let h = (b.d - a.d) / 6.0;
    (
        h * (a.w + 4.0 * m.w + b.w),
        h * (a.ws + 4.0 * m.ws + b.ws),
    )
}

/// ln Γ(x + n) − ln Γ(x) for x > 0, n ≥ 0, stable for large x.
pub(crate) fn ln_gamma_ratio(x: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    if x < 1e4 {
        return ln_gamma(x + n) - ln_gamma(x);
    }
    let y = x + n;
    (x - 0.5) * (n / x).ln_1p() + n * y.ln() - n + stirling_tail(y) - stirling_tail(x)
}

fn stirling_tail(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * z2)) / z2) / z
}

/// Prior expected entropy ξ(β) and its deficit ln K − ξ(β), both computed
/// without cancellation at the extremes of β.
pub(crate) fn prior_entropy(k: f64, beta: f64) -> (f64, f64) {
    let ln_k = k.ln();
    if beta < 1e-4 {
        // ψ(1 + x) = −γ + Σ_{m≥1} (−1)^{m+1} ζ(m+1) x^m
        let mut xi = 0.0;
        let (mut kb, mut b) = (1.0, 1.0);
        for (m, zeta) in EULER_ZETA.iter().enumerate() {
            kb *= k * beta;
            b *= beta;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            xi += sign * zeta * (kb - b);
        }
        (xi, ln_k - xi)
    } else if beta > 1e3 {
        let k2 = k * k;
        let d = (k - 1.0) / (2.0 * k * beta) - (k2 - 1.0) / (12.0 * k2 * beta * beta)
            + (1.0 - 1.0 / (k2 * k2)) / (120.0 * beta.powi(4));
        (ln_k - d, d)
    } else {
        let xi = digamma(k * beta + 1.0) - digamma(beta + 1.0);
        (xi, ln_k - xi)
    }
}

/// ln β with deficit `d`, searched inside [lo, hi] (ln β bounds).
///
/// Works on h(u) = ln ξ − ln D, which is monotone and close to linear in
/// u = ln β at both ends, so regula falsi (Illinois variant) converges fast.
fn invert_deficit(k: f64, ln_k: f64, d: f64, lo: f64, hi: f64) -> f64 {
    let target = (ln_k - d).ln() - d.ln();
    let h = |u: f64| {
        let (xi, def) = prior_entropy(k, u.exp());
        xi.ln() - def.ln() - target
    };
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, mut fb) = (h(a), h(b));
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = h(c);
        if fc == 0.0 || (b - a) < 1e-14 * (1.0 + c.abs()) {
            return c;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    0.5 * (a + b)
}
