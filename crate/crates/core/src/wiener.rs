//! Multi-channel Wiener increments on uniform grids.
//!
//! All resolutions used by a study are views of one Wiener path per
//! replicate. The path is described by a [`WienerTree`]: level 0 holds the
//! increments of the base grid, and level `l + 1` is obtained by splitting
//! every level-`l` increment into `factor(l)` sub-increments drawn from the
//! Brownian-bridge law conditional on their sum. The draws for a split are
//! keyed by `(master, replicate, channel, level + 1, parent index)`, so any
//! node can be recomputed on demand from its parent's value without
//! materializing the rest of the level.

use std::io::Write;
use std::sync::Arc;

use crate::error::{config, Result, SimError};
use crate::rng::{NormalStream, SeedPath};

/// Uniform time grid `t_n = t0 + n * dt`, `dt = (t_end - t0) / steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return config("time grid needs at least one step");
        }
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return config(format!("time grid needs t_end > t0 (got {t0}..{t_end})"));
        }
        Ok(Self { t0, t_end, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    /// Grid node `t_n`; the last node is `t_end` exactly.
    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.t_end
        } else {
            self.t0 + n as f64 * self.dt()
        }
    }

    pub fn refined(&self, k: usize) -> Self {
        Self {
            steps: self.steps * k,
            ..*self
        }
    }

    pub fn coarsened(&self, k: usize) -> Result<Self> {
        if k == 0 || !self.steps.is_multiple_of(k) {
            return Err(SimError::GridMismatch(format!(
                "factor {k} does not divide {} steps",
                self.steps
            )));
        }
        Ok(Self {
            steps: self.steps / k,
            ..*self
        })
    }
}

/// Where a segment sits inside a [`WienerTree`], so finer subdivisions of
/// its steps can be recomputed consistently.
#[derive(Debug, Clone)]
pub struct TreeLink {
    pub tree: Arc<WienerTree>,
    pub level: usize,
}

/// Increments of an m-channel Wiener process on a uniform grid.
#[derive(Debug, Clone)]
pub struct WienerSegment {
    grid: TimeGrid,
    increments: Vec<Vec<f64>>,
    link: Option<TreeLink>,
}

impl WienerSegment {
    /// Builds a segment from explicit per-channel increments.
    pub fn from_increments(grid: TimeGrid, increments: Vec<Vec<f64>>) -> Result<Self> {
        if increments.is_empty() {
            return config("segment needs at least one channel");
        }
        if let Some(bad) = increments.iter().find(|c| c.len() != grid.steps()) {
            return Err(SimError::GridMismatch(format!(
                "channel has {} increments, grid has {} steps",
                bad.len(),
                grid.steps()
            )));
        }
        Ok(Self {
            grid,
            increments,
            link: None,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.increments.len()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.increments[c]
    }

    pub fn increment(&self, c: usize, n: usize) -> f64 {
        self.increments[c][n]
    }

    pub fn link(&self) -> Option<&TreeLink> {
        self.link.as_ref()
    }

    /// Running values `W_{t_n}` for one channel, `W_{t0} = 0`, summed left to right.
    pub fn cumulative(&self, c: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut w = 0.0;
        out.push(w);
        for &d in &self.increments[c] {
            w += d;
            out.push(w);
        }
        out
    }

    /// `W_T - W_{t0}` for one channel.
    pub fn total(&self, c: usize) -> f64 {
        self.increments[c].iter().fold(0.0, |acc, &d| acc + d)
    }

    /// Sub-increments of step `n` at `n_k` subdivisions, for each of the
    /// requested channels, taken from the segment's tree.
    pub fn sub_increments(&self, n: usize, n_k: usize, channels: &[usize]) -> Result<Vec<Vec<f64>>> {
        if n_k == 0 {
            return config("subdivision count must be at least 1");
        }
        let link = self.link.as_ref().ok_or_else(|| {
            SimError::Config("segment has no tree lineage; cannot subdivide steps".into())
        })?;
        let depth = link.tree.depth_for(link.level, n_k)?;
        Ok(channels
            .iter()
            .map(|&c| link.tree.descend(c, link.level, n as u64, self.increments[c][n], depth))
            .collect())
    }

    /// Writes `channel,step,increment` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "channel,step,increment")?;
        for (c, incs) in self.increments.iter().enumerate() {
            for (n, d) in incs.iter().enumerate() {
                writeln!(w, "{c},{n},{}", crate::fmt_f64(*d))?;
            }
        }
        Ok(())
    }
}

/// Fresh i.i.d. `N(0, dt)` increments, channel `c` drawn from
/// `seed.with_channel(c)`.
pub fn generate_segment(seed: SeedPath, channels: usize, grid: TimeGrid) -> Result<WienerSegment> {
    if channels == 0 {
        return config("need at least one channel");
    }
    let sd = grid.dt().sqrt();
    let increments = (0..channels)
        .map(|c| {
            let mut stream = NormalStream::at(&seed.with_channel(c as u32), grid.steps());
            let mut v = vec![0.0; grid.steps()];
            stream.node_normals(&mut v);
            v.iter_mut().for_each(|z| *z *= sd);
            v
        })
        .collect();
    WienerSegment::from_increments(grid, increments)
}

/// Sums each run of `k` consecutive increments, left to right.
pub fn coarsen(seg: &WienerSegment, k: usize) -> Result<WienerSegment> {
    if k == 0 {
        return Err(SimError::GridMismatch("coarsening factor must be positive".into()));
    }
    let grid = seg.grid.coarsened(k)?;
    let increments = seg
        .increments
        .iter()
        .map(|incs| {
            incs.chunks_exact(k)
                .map(|block| block.iter().fold(0.0, |acc, &d| acc + d))
                .collect()
        })
        .collect();
    let link = seg.link.as_ref().and_then(|l| {
        (l.level > 0 && l.tree.factor(l.level - 1) == k).then(|| TreeLink {
            tree: l.tree.clone(),
            level: l.level - 1,
        })
    });
    Ok(WienerSegment {
        grid,
        increments,
        link,
    })
}

/// Splits `value` into `k` pieces whose conditional law given their sum is
/// the Brownian bridge with child step `child_dt`.
fn bridge_split(value: f64, k: usize, child_dt: f64, stream: &mut NormalStream, out: &mut Vec<f64>) {
    if k == 1 {
        out.push(value);
        return;
    }
    let start = out.len();
    out.resize(start + k, 0.0);
    let children = &mut out[start..];
    stream.node_normals(children);
    let sd = child_dt.sqrt();
    let mut sum = 0.0;
    for z in children.iter_mut() {
        *z *= sd;
        sum += *z;
    }
    let shift = (sum - value) / k as f64;
    for z in children.iter_mut() {
        *z -= shift;
    }
}

/// Splits every increment into `k` bridge-conditioned sub-increments. Step
/// `n` of channel `c` uses `seeds.with_channel(c).with_node(n)` at
/// `seeds.level`.
pub fn refine_bridge(seg: &WienerSegment, k: usize, seeds: SeedPath) -> Result<WienerSegment> {
    if k == 0 {
        return config("refinement factor must be positive");
    }
    if k == 1 {
        return Ok(seg.clone());
    }
    let grid = seg.grid.refined(k);
    let child_dt = grid.dt();
    let increments = seg
        .increments
        .iter()
        .enumerate()
        .map(|(c, incs)| {
            let mut stream = NormalStream::at(&seeds.with_channel(c as u32).with_node(0), k);
            let mut out = Vec::with_capacity(incs.len() * k);
            for &v in incs {
                bridge_split(v, k, child_dt, &mut stream, &mut out);
            }
            out
        })
        .collect();
    Ok(WienerSegment {
        grid,
        increments,
        link: None,
    })
}

/// Splits one step's increments (one value per channel) into `n_k`
/// sub-increments of size `delta` that sum back to each value. Channel `c`
/// draws from `seeds.with_channel(c)`.
pub fn subdivide_interval(dw: &[f64], n_k: usize, delta: f64, seeds: SeedPath) -> Result<Vec<Vec<f64>>> {
    if n_k == 0 {
        return config("subdivision count must be at least 1");
    }
    if !(delta > 0.0) {
        return config("subdivision step must be positive");
    }
    Ok(dw
        .iter()
        .enumerate()
        .map(|(c, &v)| {
            let mut stream = NormalStream::at(&seeds.with_channel(c as u32), n_k);
            let mut out = Vec::with_capacity(n_k);
            bridge_split(v, n_k, delta, &mut stream, &mut out);
            out
        })
        .collect())
}

/// Hierarchical description of one replicate's Wiener path.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerTree {
    master: u64,
    replicate: u64,
    channels: usize,
    base: TimeGrid,
    factors: Vec<usize>,
}

impl WienerTree {
    /// `factors[l]` refines level `l` into level `l + 1`; the last factor
    /// repeats for all deeper levels.
    pub fn new(master: u64, replicate: u64, channels: usize, base: TimeGrid, factors: Vec<usize>) -> Result<Self> {
        if channels == 0 {
            return config("need at least one channel");
        }
        if factors.is_empty() || factors.iter().any(|&f| f < 2) {
            return config("tree refinement factors must all be >= 2");
        }
        Ok(Self {
            master,
            replicate,
            channels,
            base,
            factors,
        })
    }

    pub fn uniform(master: u64, replicate: u64, channels: usize, base: TimeGrid, k: usize) -> Result<Self> {
        Self::new(master, replicate, channels, base, vec![k])
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn factor(&self, level: usize) -> usize {
        self.factors[level.min(self.factors.len() - 1)]
    }

    /// Product of the factors from `level` to `level + depth`.
    pub fn span(&self, level: usize, depth: usize) -> usize {
        (level..level + depth).map(|l| self.factor(l)).product()
    }

    /// Depth below `level` at which each step splits into exactly `n_k` pieces.
    pub fn depth_for(&self, level: usize, n_k: usize) -> Result<usize> {
        let mut depth = 0;
        let mut span = 1usize;
        while span < n_k {
            span = span.saturating_mul(self.factor(level + depth));
            depth += 1;
        }
        if span == n_k {
            Ok(depth)
        } else {
            Err(SimError::GridMismatch(format!(
                "{n_k} subdivisions is not reachable from tree level {level} (factors {:?})",
                self.factors
            )))
        }
    }

    pub fn grid_at(&self, level: usize) -> TimeGrid {
        self.base.refined(self.span(0, level))
    }

    fn seed(&self, channel: usize, level: usize) -> SeedPath {
        SeedPath::root(self.master, self.replicate)
            .with_channel(channel as u32)
            .with_level(level as u32)
    }

    /// Level-0 increments.
    pub fn root(self: &Arc<Self>) -> WienerSegment {
        let mut seg = generate_segment(self.seed(0, 0), self.channels, self.base)
            .expect("tree invariants guarantee a valid root");
        seg.link = Some(TreeLink {
            tree: self.clone(),
            level: 0,
        });
        seg
    }

    /// Materializes level `level` by successive bridge refinement of the root.
    pub fn segment(self: &Arc<Self>, level: usize) -> WienerSegment {
        let mut levels = self.segments_through(level);
        levels.pop().expect("at least the root level")
    }

    /// Levels `0..=level`, each refined from the previous one.
    pub fn segments_through(self: &Arc<Self>, level: usize) -> Vec<WienerSegment> {
        let mut out = vec![self.root()];
        for l in 0..level {
            let parent = &out[l];
            let k = self.factor(l);
            let grid = parent.grid.refined(k);
            let child_dt = grid.dt();
            let increments = parent
                .increments
                .iter()
                .enumerate()
                .map(|(c, incs)| {
                    let mut stream = NormalStream::at(&self.seed(c, l + 1), k);
                    let mut children = Vec::with_capacity(incs.len() * k);
                    for &v in incs {
                        bridge_split(v, k, child_dt, &mut stream, &mut children);
                    }
                    children
                })
                .collect();
            out.push(WienerSegment {
                grid,
                increments,
                link: Some(TreeLink {
                    tree: self.clone(),
                    level: l + 1,
                }),
            });
        }
        out
    }

    /// Descendants `depth` levels below node `index` of `level`, given that
    /// node's value. Equal to the corresponding slice of
    /// `segment(level + depth)` when `value` is the tree's own node value.
    pub fn descend(&self, channel: usize, level: usize, index: u64, value: f64, depth: usize) -> Vec<f64> {
        let mut current = vec![value];
        let mut first = index;
        let mut dt = self.grid_at(level).dt();
        for d in 0..depth {
            let l = level + d;
            let k = self.factor(l);
            dt /= k as f64;
            let mut stream = NormalStream::at(&self.seed(channel, l + 1).with_node(first), k);
            let mut next = Vec::with_capacity(current.len() * k);
            for &v in &current {
                bridge_split(v, k, dt, &mut stream, &mut next);
            }
            current = next;
            first *= k as u64;
        }
        current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0.5, 4).is_err());
        let g = TimeGrid::new(0.5, 1.5, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.node(0), 0.5);
        assert_eq!(g.node(2), 1.0);
        assert_eq!(g.node(4), 1.5);
    }

    #[test]
    fn generation_is_deterministic() {
        let seed = SeedPath::root(99, 4);
        let a = generate_segment(seed, 2, grid(4)).unwrap();
        let b = generate_segment(seed, 2, grid(4)).unwrap();
        assert_eq!(a.increments, b.increments);
        assert_ne!(a.channel(0), a.channel(1));
        assert!(generate_segment(seed, 0, grid(4)).is_err());
    }

    #[test]
    fn coarsen_sums_blocks() {
        let seg = WienerSegment::from_increments(grid(4), vec![vec![0.1, 0.3, -0.2, 0.5]]).unwrap();
        let c = coarsen(&seg, 2).unwrap();
        assert_eq!(c.channel(0), &[0.1 + 0.3, -0.2 + 0.5]);
        assert_eq!(c.steps(), 2);
        assert!(matches!(coarsen(&seg, 3), Err(SimError::GridMismatch(_))));
    }

    #[test]
    fn coarsen_preserves_endpoint() {
        let seg = generate_segment(SeedPath::root(1, 0), 1, grid(64)).unwrap();
        let c = coarsen(&seg, 8).unwrap();
        assert!((c.total(0) - seg.total(0)).abs() < 1e-14);
        let cum = seg.cumulative(0);
        assert_eq!(cum.len(), 65);
        assert_eq!(cum[0], 0.0);
    }

    #[test]
    fn refine_identity_and_sum() {
        let seg = WienerSegment::from_increments(grid(1), vec![vec![0.6]]).unwrap();
        let same = refine_bridge(&seg, 1, SeedPath::root(1, 0)).unwrap();
        assert_eq!(same.channel(0), &[0.6]);
        let three = refine_bridge(&seg, 3, SeedPath::root(1, 0)).unwrap();
        assert_eq!(three.steps(), 3);
        let s: f64 = three.channel(0).iter().sum();
        assert!((s - 0.6).abs() < 1e-12);
    }

    #[test]
    fn subdivide_edge_cases() {
        let seeds = SeedPath::root(5, 0);
        assert_eq!(subdivide_interval(&[0.3], 1, 0.1, seeds).unwrap(), vec![vec![0.3]]);
        let parts = subdivide_interval(&[0.0], 4, 0.25, seeds).unwrap();
        assert!(parts[0].iter().sum::<f64>().abs() < 1e-14);
        assert!(subdivide_interval(&[0.0], 0, 0.25, seeds).is_err());
    }

    #[test]
    fn descend_matches_materialized_level() {
        let tree = Arc::new(WienerTree::new(3, 1, 2, grid(4), vec![2, 4, 2]).unwrap());
        let levels = tree.segments_through(3);
        assert_eq!(levels[3].steps(), 4 * 2 * 4 * 2);
        for c in 0..2 {
            let sub = tree.descend(c, 1, 5, levels[1].increment(c, 5), 2);
            assert_eq!(sub.as_slice(), &levels[3].channel(c)[40..48]);
        }
        let via_seg = levels[1].sub_increments(5, 8, &[0, 1]).unwrap();
        assert_eq!(via_seg[1].as_slice(), &levels[3].channel(1)[40..48]);
        assert!(levels[1].sub_increments(5, 3, &[0]).is_err());
    }

    #[test]
    fn tree_levels_aggregate() {
        let tree = Arc::new(WienerTree::uniform(8, 0, 1, grid(8), 2).unwrap());
        let levels = tree.segments_through(4);
        for l in 1..=4 {
            let back = coarsen(&levels[l], 2).unwrap();
            for (a, b) in back.channel(0).iter().zip(levels[l - 1].channel(0)) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(back.link().unwrap().level, l - 1);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let seg = generate_segment(SeedPath::root(1, 0), 2, grid(3)).unwrap();
        let mut buf = Vec::new();
        seg.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "channel,step,increment");
        assert_eq!(lines.len(), 7);
        assert!(lines[4].starts_with("1,0,"));
    }
}
