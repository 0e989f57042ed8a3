//! Sample paths of `X` on a fine grid with an explicit jump ledger.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, stream)`, so paths
//! can be generated in any order and in parallel with identical results.
//! The jump times and sizes are drawn first; the Gaussian part is then drawn
//! interval by interval over the grid refined by the jump times, which gives
//! the exact pre-jump value `X_{ρ-}` at every jump.

use std::io::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::scheme::SimulationScheme;
use crate::error::{Error, Result};

/// A simulated jump: time, size of `ΔX` and the pre-jump value `X_{t-}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub x_before: f64,
}

/// Simulated log-price path.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub grid: Arc<[f64]>,
    /// `X` at the grid times (right-continuous values).
    pub log_x: Vec<f64>,
    /// Jumps with `|x| > δ`, sorted by time.
    pub jumps: Vec<JumpRecord>,
    pub seed: u64,
    pub stream: u64,
    /// Standard deviation per unit time of the substituted small jumps.
    pub small_jump_sigma: f64,
}

impl SamplePath {
    pub fn maturity(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    /// Index of the grid point closest to `t`.
    pub fn grid_index(&self, t: f64) -> usize {
        grid_index(&self.grid, t)
    }

    /// `X_{t-}` for a grid time `t` (differs from `X_t` only if a jump
    /// happens exactly at `t`).
    pub fn left_limit_at(&self, i: usize) -> f64 {
        let t = self.grid[i];
        let lo = self.jumps.partition_point(|j| j.time < t);
        match self.jumps[lo..].iter().take_while(|j| j.time == t).next() {
            Some(j) => j.x_before,
            None => self.log_x[i],
        }
    }

    /// Jumps in `(t_{i}, t_{i+1}]` between two grid indices.
    pub fn jumps_between(&self, i: usize, j: usize) -> &[JumpRecord] {
        let (a, b) = (self.grid[i], self.grid[j]);
        let lo = self.jumps.partition_point(|r| r.time <= a);
        let hi = self.jumps.partition_point(|r| r.time <= b);
        &self.jumps[lo..hi]
    }

    /// Writes the path as little-endian `f64` columns: a header with the
    /// grid length and jump count (`u64`), then grid, values and the jump
    /// ledger as (time, size, pre-jump value) triples.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.grid.len() as u64).to_le_bytes())?;
        w.write_all(&(self.jumps.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        for v in self.grid.iter().chain(self.log_x.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        for j in &self.jumps {
            for v in [j.time, j.size, j.x_before] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Inverse of [`SamplePath::write_binary`].
    pub fn read_binary(bytes: &[u8], small_jump_sigma: f64) -> Result<Self> {
        let mut words = bytes.chunks_exact(8).map(|c| {
            let mut b = [0u8; 8];
            b.copy_from_slice(c);
            b
        });
        let mut next = || words.next().ok_or_else(|| Error::invalid("truncated path dump"));
        let n = u64::from_le_bytes(next()?) as usize;
        let k = u64::from_le_bytes(next()?) as usize;
        let seed = u64::from_le_bytes(next()?);
        let stream = u64::from_le_bytes(next()?);
        let mut grid = Vec::with_capacity(n);
        for _ in 0..n {
            grid.push(f64::from_le_bytes(next()?));
        }
        let mut log_x = Vec::with_capacity(n);
        for _ in 0..n {
            log_x.push(f64::from_le_bytes(next()?));
        }
        let mut jumps = Vec::with_capacity(k);
        for _ in 0..k {
            let (time, size, x_before) = (
                f64::from_le_bytes(next()?),
                f64::from_le_bytes(next()?),
                f64::from_le_bytes(next()?),
            );
            jumps.push(JumpRecord { time, size, x_before });
        }
        Ok(SamplePath {
            grid: grid.into(),
            log_x,
            jumps,
            seed,
            stream,
            small_jump_sigma,
        })
    }
}

/// Index of the grid point closest to `t`.
pub fn grid_index(grid: &[f64], t: f64) -> usize {
    let i = grid.partition_point(|g| *g < t);
    if i == 0 {
        0
    } else if i == grid.len() {
        grid.len() - 1
    } else if (grid[i] - t).abs() <= (t - grid[i - 1]).abs() {
        i
    } else {
        i - 1
    }
}

/// RNG of path `stream` under master `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Incremental generator of one path, advancing grid interval by grid
/// interval.  Used directly by the batch engine; [`sample_path`] runs it to
/// the end.
#[derive(Debug, Clone)]
pub struct PathCursor {
    rng: ChaCha8Rng,
    /// Pending jumps (time, size), sorted by time.
    pending: Vec<(f64, f64)>,
    next: usize,
    t: f64,
    x: f64,
    drift: f64,
    diffusion: f64,
}

impl PathCursor {
    pub fn new(scheme: &SimulationScheme, maturity: f64, x0: f64, seed: u64, stream: u64) -> Self {
        let mut rng = path_rng(seed, stream);
        let n = scheme.sample_count(maturity, &mut rng);
        let mut pending: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                // (0, T]: 1 - U with U ∈ [0, 1)
                let t = maturity * (1.0 - rng.random::<f64>());
                (t, scheme.sample_jump(&mut rng))
            })
            .collect();
        pending.sort_by(|a, b| a.0.total_cmp(&b.0));
        PathCursor {
            rng,
            pending,
            next: 0,
            t: 0.0,
            x: x0,
            drift: scheme.drift,
            diffusion: scheme.diffusion(),
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn value(&self) -> f64 {
        self.x
    }

    fn diffuse(&mut self, dt: f64) {
        if dt > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.x += self.drift * dt + self.diffusion * dt.sqrt() * z;
        }
    }

    /// Advances to `t_next`, appending the jumps in `(t, t_next]` to `out`.
    pub fn advance(&mut self, t_next: f64, out: &mut Vec<JumpRecord>) -> f64 {
        while self.next < self.pending.len() && self.pending[self.next].0 <= t_next {
            let (tj, size) = self.pending[self.next];
            self.diffuse(tj - self.t);
            out.push(JumpRecord {
                time: tj,
                size,
                x_before: self.x,
            });
            self.x += size;
            self.t = tj;
            self.next += 1;
        }
        self.diffuse(t_next - self.t);
        self.t = t_next;
        self.x
    }
}

/// Simulates one path on `grid` starting from `X_0 = x0`.
pub fn sample_path(
    scheme: &SimulationScheme,
    grid: &Arc<[f64]>,
    x0: f64,
    seed: u64,
    stream: u64,
) -> SamplePath {
    let maturity = *grid.last().expect("nonempty grid");
    let mut cursor = PathCursor::new(scheme, maturity, x0, seed, stream);
    let mut log_x = Vec::with_capacity(grid.len());
    let mut jumps = Vec::new();
    log_x.push(x0);
    for &t in &grid[1..] {
        log_x.push(cursor.advance(t, &mut jumps));
    }
    SamplePath {
        grid: grid.clone(),
        log_x,
        jumps,
        seed,
        stream,
        small_jump_sigma: scheme.small_jump_sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyMeasure, LevyTriplet};

    fn grid(n: usize) -> Arc<[f64]> {
        (0..=n).map(|i| 2.0 * i as f64 / n as f64).collect::<Vec<_>>().into()
    }

    #[test]
    fn deterministic_drift() {
        let t = LevyTriplet::new(1.0, 0.0, LevyMeasure::Zero).unwrap();
        let s = SimulationScheme::new(&t).unwrap();
        let p = sample_path(&s, &grid(10), 0.0, 1, 0);
        assert!((p.log_x[10] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reproducible_and_binary_round_trip() {
        let t = LevyTriplet::new(
            0.0,
            0.2,
            LevyMeasure::Merton {
                lambda: 3.0,
                mu_j: 0.0,
                sigma_j: 0.2,
            },
        )
        .unwrap();
        let s = SimulationScheme::new(&t).unwrap();
        let a = sample_path(&s, &grid(50), 0.0, 9, 4);
        let b = sample_path(&s, &grid(50), 0.0, 9, 4);
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(SamplePath::read_binary(&buf, a.small_jump_sigma).unwrap(), a);
        for j in &a.jumps {
            assert!(j.time > 0.0 && j.time <= 2.0);
        }
    }
}
