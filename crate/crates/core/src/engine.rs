//! Batched Monte-Carlo kernel with common random numbers.
//!
//! Every strategy in a batch ("lane") is driven by the same sampled return
//! path, so parameter sweeps compare strategies on identical scenarios. Paths
//! are processed in fixed-size chunks whose partial results are merged in
//! chunk order; the output therefore does not depend on the thread count.
//!
//! Wealth is tracked in units of the running peak. With `w = V / V_max`, both
//! feedback laws share one update,
//!
//! ```text
//! w' = w + g x (w - f)
//! ```
//!
//! where `(g, f) = (K, 0)` for proportional betting and
//! `(g, f) = (gamma, 1 - d_max)` for the modulated law, since
//! `gamma M(k) V(k) = gamma (w - (1 - d_max)) V_max`. A new peak rescales
//! `V_max` by `w'` and resets `w` to 1, so the drawdown is simply `1 - w`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::return_model::{path_stream, ReturnDistribution};
use crate::stats::Moments;
use crate::strategy::{require_admissible, Strategy};

/// Paths per work item. Changing it changes the floating-point merge order.
pub const CHUNK_PATHS: u64 = 512;

const LANE_BLOCK: usize = 128;

/// Receives per-path terminal statistics of every lane.
pub trait PathAccumulator: Send {
    /// `growth[j] = V(N) / V(0)` and `max_drawdown[j] = d*` for lane `j`.
    fn observe(&mut self, growth: &[f64], max_drawdown: &[f64]);

    /// Folds in the accumulator of the chunk that follows this one.
    fn merge(&mut self, later: Self);
}

#[derive(Debug, Clone, Copy)]
struct Lane {
    gain: f64,
    floor: f64,
}

impl From<&Strategy> for Lane {
    fn from(s: &Strategy) -> Self {
        match s {
            Strategy::Markowitz(m) => Lane {
                gain: m.gain,
                floor: 0.0,
            },
            Strategy::Modulated(m) => Lane {
                gain: m.gamma,
                floor: 1.0 - m.d_max,
            },
        }
    }
}

/// Simulates `paths` paths of horizon `n` for all `strategies` at once.
///
/// Strategies must already be admissible for `dist`; a path that still drives
/// wealth below zero aborts the run with [`Error::Bankruptcy`].
pub fn simulate<A, F>(
    strategies: &[Strategy],
    dist: &ReturnDistribution,
    n: usize,
    paths: u64,
    seed: u64,
    make_accumulator: F,
) -> Result<A>
where
    A: PathAccumulator,
    F: Fn() -> A + Sync,
{
    if n == 0 {
        return Err(Error::EmptyHorizon);
    }
    if paths == 0 {
        return Err(Error::NoPaths);
    }
    // The kernel clamps ruin to zero, so an out-of-bounds gain must be caught here.
    for s in strategies {
        require_admissible(s, dist)?;
    }
    let gains: Vec<f64> = strategies.iter().map(|s| Lane::from(s).gain).collect();
    let floors: Vec<f64> = strategies.iter().map(|s| Lane::from(s).floor).collect();
    let chunks = paths.div_ceil(CHUNK_PATHS);

    let partials: Vec<Result<A>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK_PATHS;
            let end = (start + CHUNK_PATHS).min(paths);
            run_chunk(
                &gains,
                &floors,
                dist,
                n,
                seed,
                start..end,
                make_accumulator(),
            )
        })
        .collect();

    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("at least one chunk")?;
    for part in iter {
        total.merge(part?);
    }
    Ok(total)
}

fn run_chunk<A: PathAccumulator>(
    gains: &[f64],
    floors: &[f64],
    dist: &ReturnDistribution,
    n: usize,
    seed: u64,
    range: std::ops::Range<u64>,
    mut acc: A,
) -> Result<A> {
    let lanes = gains.len();
    let mut returns = vec![0.0; n];
    let mut w = vec![1.0; lanes];
    let mut scale = vec![1.0; lanes];
    let mut trough = vec![1.0; lanes];
    let mut max_dd = vec![0.0; lanes];

    for path in range {
        let mut rng = path_stream(seed, path);
        for r in returns.iter_mut() {
            *r = dist.sample(&mut rng);
        }
        w.fill(1.0);
        scale.fill(1.0);
        trough.fill(1.0);

        // Lane blocks small enough that their state stays in L1 across the path.
        for start in (0..lanes).step_by(LANE_BLOCK) {
            let end = (start + LANE_BLOCK).min(lanes);
            advance(
                &returns,
                &gains[start..end],
                &floors[start..end],
                Block {
                    w: &mut w[start..end],
                    scale: &mut scale[start..end],
                    trough: &mut trough[start..end],
                },
            );
        }

        for j in 0..lanes {
            w[j] *= scale[j];
            max_dd[j] = 1.0 - trough[j];
        }
        acc.observe(&w, &max_dd);
    }
    Ok(acc)
}

/// Lane state in peak-normalized units: `w = V / V_max`, `scale = V_max / V(0)`,
/// `trough = min_k w(k)` so that `d* = 1 - trough`.
struct Block<'a> {
    w: &'a mut [f64],
    scale: &'a mut [f64],
    trough: &'a mut [f64],
}

fn advance(returns: &[f64], gains: &[f64], floors: &[f64], block: Block<'_>) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { advance_avx2(returns, gains, floors, block) };
            return;
        }
    }
    advance_generic(returns, gains, floors, block);
}

// Only widens the vector registers; no FMA contraction, so results are
// bit-identical to the generic path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn advance_avx2(returns: &[f64], gains: &[f64], floors: &[f64], block: Block<'_>) {
    advance_generic(returns, gains, floors, block);
}

#[inline(always)]
fn advance_generic(returns: &[f64], gains: &[f64], floors: &[f64], block: Block<'_>) {
    let Block { w, scale, trough } = block;
    for &x in returns {
        let state = w.iter_mut().zip(scale.iter_mut()).zip(trough.iter_mut());
        for (((wj, sj), lo), (&g, &f)) in state.zip(gains.iter().zip(floors)) {
            let t = *wj + g * x * (*wj - f);
            // exact ruin can round a hair below zero
            let t = if t < 0.0 { 0.0 } else { t };
            let peak = if t > 1.0 { t } else { 1.0 };
            let wn = if t > 1.0 { 1.0 } else { t };
            *sj *= peak;
            *wj = wn;
            *lo = if wn < *lo { wn } else { *lo };
        }
    }
}

/// Per-lane moments of the overall return, max drawdown and (optionally)
/// log growth.
#[derive(Debug, Clone)]
pub struct LaneMoments {
    pub overall_return: Vec<Moments>,
    pub max_drawdown: Vec<Moments>,
    pub log_growth: Option<Vec<Moments>>,
    pub ruined_paths: Vec<u64>,
}

impl LaneMoments {
    pub fn new(lanes: usize, track_log_growth: bool) -> Self {
        LaneMoments {
            overall_return: vec![Moments::default(); lanes],
            max_drawdown: vec![Moments::default(); lanes],
            log_growth: track_log_growth.then(|| vec![Moments::default(); lanes]),
            ruined_paths: vec![0; lanes],
        }
    }
}

impl PathAccumulator for LaneMoments {
    fn observe(&mut self, growth: &[f64], max_drawdown: &[f64]) {
        for (m, &g) in self.overall_return.iter_mut().zip(growth) {
            m.push(g - 1.0);
        }
        for (m, &d) in self.max_drawdown.iter_mut().zip(max_drawdown) {
            m.push(d);
        }
        for (count, &g) in self.ruined_paths.iter_mut().zip(growth) {
            *count += u64::from(g == 0.0);
        }
        if let Some(logs) = self.log_growth.as_mut() {
            for (m, &g) in logs.iter_mut().zip(growth) {
                if g > 0.0 {
                    m.push(g.ln());
                }
            }
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.overall_return.iter_mut().zip(&later.overall_return) {
            a.merge(b);
        }
        for (a, b) in self.max_drawdown.iter_mut().zip(&later.max_drawdown) {
            a.merge(b);
        }
        for (a, b) in self.ruined_paths.iter_mut().zip(&later.ruined_paths) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.log_growth.as_mut(), later.log_growth.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }
}

/// Moments of per-path differences `lane a - lane b` for a list of lane pairs.
#[derive(Debug, Clone)]
pub struct PairedDifferences {
    pairs: Vec<(usize, usize)>,
    pub return_diff: Vec<Moments>,
    pub drawdown_diff: Vec<Moments>,
}

impl PairedDifferences {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        let k = pairs.len();
        PairedDifferences {
            pairs,
            return_diff: vec![Moments::default(); k],
            drawdown_diff: vec![Moments::default(); k],
        }
    }
}

impl PathAccumulator for PairedDifferences {
    fn observe(&mut self, growth: &[f64], max_drawdown: &[f64]) {
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            self.return_diff[i].push(growth[a] - growth[b]);
            self.drawdown_diff[i].push(max_drawdown[a] - max_drawdown[b]);
        }
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.return_diff.iter_mut().zip(&later.return_diff) {
            a.merge(b);
        }
        for (a, b) in self.drawdown_diff.iter_mut().zip(&later.drawdown_diff) {
            a.merge(b);
        }
    }
}
