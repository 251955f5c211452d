//! Euler–Maruyama and Milstein integrators for scalar and multidimensional
//! Itô SDEs driven by a [`WienerSegment`].

use std::sync::Arc;

use crate::error::{config, Result, SimError};
use crate::iterint::{diagonal_exact, levy_fourier, subdivision_i21, DoubleIntegralMethod, IntegralPair};
use crate::rng::{NormalStream, SeedPath, AUX_CHANNEL_BASE};
use crate::wiener::{TimeGrid, WienerSegment};

/// `dX = a(t, X) dt + b(t, X) dW` with `milstein_term = b ∂b/∂x`.
pub trait ScalarSde: Send + Sync {
    fn drift(&self, t: f64, x: f64) -> f64;
    fn diffusion(&self, t: f64, x: f64) -> f64;
    fn milstein_term(&self, t: f64, x: f64) -> f64;

    /// Closed-form `X_t` given `W_t - W_{t0}`, when known.
    fn exact_solution(&self, _t: f64, _w: f64, _x0: f64) -> Option<f64> {
        None
    }
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A [`ScalarSde`] assembled from closures.
#[derive(Clone)]
pub struct ScalarFns {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub milstein_term: ScalarFn,
}

impl ScalarFns {
    pub fn new(
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        milstein_term: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            milstein_term: Arc::new(milstein_term),
        }
    }
}

impl ScalarSde for ScalarFns {
    fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }
    fn diffusion(&self, t: f64, x: f64) -> f64 {
        (self.diffusion)(t, x)
    }
    fn milstein_term(&self, t: f64, x: f64) -> f64 {
        (self.milstein_term)(t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseStructure {
    General,
    /// `L^{j1} b^{i,j2} = L^{j2} b^{i,j1}` for all `i, j1, j2`.
    Commutative,
    /// `d = m`, `b^{i,j} = 0` for `i != j`, and `b^{i,i}` depends on `x^i` only.
    Diagonal,
    /// `b` does not depend on the state.
    Additive,
}

/// `dX^i = a^i dt + Σ_j b^{i,j} dW^j`, `i < d`, `j < m`.
///
/// Buffers are row-major: `diffusion` writes `b^{i,j}` to `out[i * m + j]`
/// and `milstein_coeffs` writes `L^{j1} b^{i,j2}` to
/// `out[(i * m + j1) * m + j2]`. Coefficients must be supplied analytically.
pub trait MultiSde: Send + Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    fn noise_structure(&self) -> NoiseStructure {
        NoiseStructure::General
    }

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn milstein_coeffs(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Whether a model safeguard modifies the coefficients at this state.
    fn clamped(&self, _t: f64, _x: &[f64]) -> bool {
        false
    }
}

/// States on every grid node plus per-step safeguard events.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub grid: TimeGrid,
    /// `steps + 1` rows of `d` values; row 0 is the initial state.
    pub states: Vec<Vec<f64>>,
    /// Steps at whose start a model safeguard was active.
    pub clamped_steps: Vec<usize>,
}

impl PathResult {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("path has at least the initial row")
    }
}

fn require_channels(seg: &WienerSegment, m: usize) -> Result<()> {
    if seg.channels() != m {
        return config(format!("segment has {} channels, SDE needs {m}", seg.channels()));
    }
    Ok(())
}

fn scalar_path(
    sde: &(impl ScalarSde + ?Sized),
    x0: f64,
    seg: &WienerSegment,
    milstein: bool,
) -> Result<PathResult> {
    require_channels(seg, 1)?;
    let grid = *seg.grid();
    let dt = grid.dt();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(vec![x0]);
    let mut x = x0;
    for (n, &dw) in seg.channel(0).iter().enumerate() {
        let t = grid.node(n);
        let mut next = x + sde.drift(t, x) * dt;
        next += sde.diffusion(t, x) * dw;
        if milstein {
            next += sde.milstein_term(t, x) * diagonal_exact(dw, dt);
        }
        if !next.is_finite() {
            return Err(SimError::Divergence { step: n });
        }
        x = next;
        states.push(vec![x]);
    }
    Ok(PathResult {
        grid,
        states,
        clamped_steps: Vec::new(),
    })
}

/// `X_{n+1} = X_n + aΔ + bΔW`.
pub fn euler_scalar(sde: &(impl ScalarSde + ?Sized), x0: f64, seg: &WienerSegment) -> Result<PathResult> {
    scalar_path(sde, x0, seg, false)
}

/// `X_{n+1} = X_n + aΔ + bΔW + ½ b b′ ((ΔW)² − Δ)`.
pub fn milstein_scalar(sde: &(impl ScalarSde + ?Sized), x0: f64, seg: &WienerSegment) -> Result<PathResult> {
    scalar_path(sde, x0, seg, true)
}

/// Per-step coefficient buffers for the multidimensional steppers.
struct Workspace {
    d: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lb: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            a: vec![0.0; d],
            b: vec![0.0; d * m],
            lb: vec![0.0; d * m * m],
        }
    }

    fn lb(&self, i: usize, j1: usize, j2: usize) -> f64 {
        self.lb[(i * self.m + j1) * self.m + j2]
    }

    /// `x + aΔ + Σ_j b^{i,j} ΔW^j` into `out`.
    fn euler_part(&self, x: &[f64], dw: &[f64], dt: f64, out: &mut [f64]) {
        for i in 0..self.d {
            let mut v = x[i] + self.a[i] * dt;
            for j in 0..self.m {
                v += self.b[i * self.m + j] * dw[j];
            }
            out[i] = v;
        }
    }
}

fn check_dims(sde: &(impl MultiSde + ?Sized), x0: &[f64], seg: &WienerSegment) -> Result<()> {
    if x0.len() != sde.dim() {
        return config(format!("initial state has {} components, SDE has {}", x0.len(), sde.dim()));
    }
    require_channels(seg, sde.noise_dim())
}

fn finish_step(n: usize, next: &[f64]) -> Result<()> {
    if next.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SimError::Divergence { step: n })
    }
}

/// Componentwise `X^i_{n+1} = X^i_n + a^i Δ + Σ_j b^{i,j} ΔW^j`.
pub fn euler_md(sde: &(impl MultiSde + ?Sized), x0: &[f64], seg: &WienerSegment) -> Result<PathResult> {
    check_dims(sde, x0, seg)?;
    let (d, m) = (sde.dim(), sde.noise_dim());
    let grid = *seg.grid();
    let dt = grid.dt();
    let mut ws = Workspace::new(d, m);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut clamped_steps = Vec::new();
    states.push(x0.to_vec());
    let mut dw = vec![0.0; m];
    for n in 0..grid.steps() {
        let t = grid.node(n);
        let x = &states[n];
        if sde.clamped(t, x) {
            clamped_steps.push(n);
        }
        for (j, w) in dw.iter_mut().enumerate() {
            *w = seg.increment(j, n);
        }
        sde.drift(t, x, &mut ws.a);
        sde.diffusion(t, x, &mut ws.b);
        let mut next = vec![0.0; d];
        ws.euler_part(x, &dw, dt, &mut next);
        finish_step(n, &next)?;
        states.push(next);
    }
    Ok(PathResult {
        grid,
        states,
        clamped_steps,
    })
}

/// Unordered channel pairs `(a, b)`, `a < b`, in lexicographic order.
pub(crate) fn channel_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect()
}

/// Evaluates the mixed-integral pair `(I_(a,b), I_(b,a))` for step `n`.
///
/// `w_start_b` is `W^b_{t_n}`, used only by the Kloeden start. Lévy–Fourier
/// draws its auxiliary normals from the stream keyed by channel
/// `AUX_CHANNEL_BASE + pair_index`, node `n`, at the segment's tree level.
pub(crate) fn mixed_pair(
    method: &DoubleIntegralMethod,
    seg: &WienerSegment,
    n: usize,
    (a, b): (usize, usize),
    pair_index: usize,
    w_start_b: f64,
) -> Result<IntegralPair> {
    let dwa = seg.increment(a, n);
    let dwb = seg.increment(b, n);
    match *method {
        DoubleIntegralMethod::LevyFourier { p } => {
            let link = seg.link().ok_or_else(|| {
                SimError::Config("Lévy–Fourier needs a segment with seed lineage".into())
            })?;
            let seed = SeedPath::root(link.tree.master(), link.tree.replicate())
                .with_channel(AUX_CHANNEL_BASE + pair_index as u32)
                .with_level(link.level as u32)
                .with_node(n as u64);
            let mut stream = NormalStream::at(&seed, 2 * (2 * p + 1));
            let sq = seg.grid().dt().sqrt();
            levy_fourier((dwa / sq, dwb / sq), seg.grid().dt(), p, &mut stream)
        }
        _ => {
            let subs = seg.sub_increments(n, method.resolution(), &[a, b])?;
            let i21 = subdivision_i21(method, &subs[0], &subs[1], w_start_b)?;
            Ok(IntegralPair::from_i21(i21, dwa, dwb))
        }
    }
}

fn add_corrections(ws: &Workspace, dw: &[f64], dt: f64, pairs: &[(usize, usize, IntegralPair)], out: &mut [f64]) {
    let m = ws.m;
    for (i, o) in out.iter_mut().enumerate() {
        let mut v = *o;
        for j1 in 0..m {
            for j2 in 0..m {
                let c = ws.lb(i, j1, j2);
                if c == 0.0 {
                    continue;
                }
                let integral = if j1 == j2 {
                    diagonal_exact(dw[j1], dt)
                } else {
                    let &(a, _, p) = pairs
                        .iter()
                        .find(|&&(a, b, _)| (a, b) == (j1.min(j2), j1.max(j2)))
                        .expect("pair table covers every off-diagonal combination in use");
                    if j1 == a {
                        p.i12
                    } else {
                        p.i21
                    }
                };
                v += c * integral;
            }
        }
        *o = v;
    }
}

fn pair_in_use(ws: &Workspace, a: usize, b: usize) -> bool {
    (0..ws.d).any(|i| ws.lb(i, a, b) != 0.0 || ws.lb(i, b, a) != 0.0)
}

/// One commutative-noise Milstein step: mixed integrals enter only through
/// `I_(j1,j2) + I_(j2,j1) = ΔW^{j1} ΔW^{j2}`.
pub fn milstein_commutative_step(
    sde: &(impl MultiSde + ?Sized),
    t: f64,
    x: &[f64],
    dw: &[f64],
    dt: f64,
    out: &mut [f64],
) -> Result<()> {
    if sde.noise_structure() != NoiseStructure::Commutative {
        return config("commutative step requires commutative noise");
    }
    let mut ws = Workspace::new(sde.dim(), sde.noise_dim());
    commutative_step(sde, &mut ws, t, x, dw, dt, out);
    Ok(())
}

fn commutative_step(
    sde: &(impl MultiSde + ?Sized),
    ws: &mut Workspace,
    t: f64,
    x: &[f64],
    dw: &[f64],
    dt: f64,
    out: &mut [f64],
) {
    sde.drift(t, x, &mut ws.a);
    sde.diffusion(t, x, &mut ws.b);
    sde.milstein_coeffs(t, x, &mut ws.lb);
    ws.euler_part(x, dw, dt, out);
    let pairs: Vec<_> = channel_pairs(ws.m)
        .into_iter()
        .map(|(a, b)| {
            let half = 0.5 * dw[a] * dw[b];
            (a, b, IntegralPair::new(half, half))
        })
        .collect();
    add_corrections(ws, dw, dt, &pairs, out);
}

/// One diagonal-noise Milstein step; each component uses only its own channel.
pub fn milstein_diagonal_step(
    sde: &(impl MultiSde + ?Sized),
    t: f64,
    x: &[f64],
    dw: &[f64],
    dt: f64,
    out: &mut [f64],
) -> Result<()> {
    if sde.noise_structure() != NoiseStructure::Diagonal || sde.dim() != sde.noise_dim() {
        return config("diagonal step requires diagonal noise with d = m");
    }
    let mut ws = Workspace::new(sde.dim(), sde.noise_dim());
    diagonal_step(sde, &mut ws, t, x, dw, dt, out);
    Ok(())
}

fn diagonal_step(
    sde: &(impl MultiSde + ?Sized),
    ws: &mut Workspace,
    t: f64,
    x: &[f64],
    dw: &[f64],
    dt: f64,
    out: &mut [f64],
) {
    sde.drift(t, x, &mut ws.a);
    sde.diffusion(t, x, &mut ws.b);
    sde.milstein_coeffs(t, x, &mut ws.lb);
    for i in 0..ws.d {
        let mut v = x[i] + ws.a[i] * dt;
        v += ws.b[i * ws.m + i] * dw[i];
        v += ws.lb(i, i, i) * diagonal_exact(dw[i], dt);
        out[i] = v;
    }
}

/// Multidimensional Milstein: Euler terms plus `Σ L^{j1} b^{i,j2} I_(j1,j2)`.
///
/// Diagonal integrals are exact. Mixed integrals come from `method` for
/// general noise; commutative and additive structures use closed forms
/// and ignore `method`. Diagonal noise uses the decoupled update.
pub fn milstein_md(
    sde: &(impl MultiSde + ?Sized),
    x0: &[f64],
    seg: &WienerSegment,
    method: Option<&DoubleIntegralMethod>,
) -> Result<PathResult> {
    check_dims(sde, x0, seg)?;
    let structure = sde.noise_structure();
    if structure == NoiseStructure::Additive {
        return euler_md(sde, x0, seg);
    }
    if structure == NoiseStructure::Diagonal && sde.dim() != sde.noise_dim() {
        return config("diagonal noise requires d = m");
    }
    let (d, m) = (sde.dim(), sde.noise_dim());
    if let Some(meth) = method {
        meth.validate()?;
    } else if structure == NoiseStructure::General && m > 1 {
        return config("general noise with m > 1 needs a double-integral method");
    }
    let grid = *seg.grid();
    let dt = grid.dt();
    let mut ws = Workspace::new(d, m);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut clamped_steps = Vec::new();
    states.push(x0.to_vec());
    let all_pairs = channel_pairs(m);
    let needs_running_w = matches!(method, Some(DoubleIntegralMethod::EmKloeden { .. }));
    let mut w_running = vec![0.0; m];
    let mut dw = vec![0.0; m];
    for n in 0..grid.steps() {
        let t = grid.node(n);
        let x = &states[n];
        if sde.clamped(t, x) {
            clamped_steps.push(n);
        }
        for (j, w) in dw.iter_mut().enumerate() {
            *w = seg.increment(j, n);
        }
        let mut next = vec![0.0; d];
        match structure {
            NoiseStructure::Commutative => commutative_step(sde, &mut ws, t, x, &dw, dt, &mut next),
            NoiseStructure::Diagonal => diagonal_step(sde, &mut ws, t, x, &dw, dt, &mut next),
            _ => {
                sde.drift(t, x, &mut ws.a);
                sde.diffusion(t, x, &mut ws.b);
                sde.milstein_coeffs(t, x, &mut ws.lb);
                ws.euler_part(x, &dw, dt, &mut next);
                let mut pairs = Vec::with_capacity(all_pairs.len());
                for (idx, &(a, b)) in all_pairs.iter().enumerate() {
                    if pair_in_use(&ws, a, b) {
                        let meth = method.expect("checked above for m > 1");
                        let p = mixed_pair(meth, seg, n, (a, b), idx, w_running[b])?;
                        pairs.push((a, b, p));
                    }
                }
                add_corrections(&ws, &dw, dt, &pairs, &mut next);
            }
        }
        finish_step(n, &next)?;
        if needs_running_w {
            for (w, d) in w_running.iter_mut().zip(&dw) {
                *w += d;
            }
        }
        states.push(next);
    }
    Ok(PathResult {
        grid,
        states,
        clamped_steps,
    })
}
