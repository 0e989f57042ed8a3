//! Rebalancing time nets and the fine simulation grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rebalancing times `0 = t_0 < t_1 < … < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeNet {
    pub knots: Vec<f64>,
    /// `θ` of an adapted net.
    pub theta_tag: Option<f64>,
}

impl TimeNet {
    /// Net from explicit knots; they must increase strictly from `0`.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 0.0 {
            return Err(Error::invalid("a time net needs knots 0 = t_0 < … < t_n = T"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time-net knots must increase strictly"));
        }
        Ok(TimeNet {
            knots,
            theta_tag: None,
        })
    }

    pub fn maturity(&self) -> f64 {
        *self.knots.last().expect("nonempty net")
    }

    /// Number of intervals `n`.
    pub fn len(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index `i` with `t ∈ (t_{i-1}, t_i]`, for `t ∈ (0, T]`.
    pub fn interval_of(&self, t: f64) -> usize {
        self.knots.partition_point(|k| *k < t).clamp(1, self.len())
    }
}

/// `t_i = T(1 - (1 - i/n)^{1/θ})`, `i = 0, …, n`.
pub fn adapted_time_net(n: usize, theta: f64, maturity: f64) -> Result<TimeNet> {
    if n == 0 {
        return Err(Error::invalid("a time net needs n ≥ 1"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::invalid("θ must lie in (0, 1]"));
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::invalid("maturity must be positive"));
    }
    let mut knots: Vec<f64> = (0..=n)
        .map(|i| {
            let s = 1.0 - i as f64 / n as f64;
            maturity * (1.0 - s.powf(1.0 / theta))
        })
        .collect();
    knots[0] = 0.0;
    knots[n] = maturity;
    Ok(TimeNet {
        knots,
        theta_tag: Some(theta),
    })
}

/// `‖τ‖_θ = max_i (t_i - t_{i-1}) / (T - t_{i-1})^{1-θ}`.
///
/// For adapted nets the remaining times `T - t_i = T(1 - i/n)^{1/θ}` are
/// taken from the defining formula: near maturity they fall below the
/// resolution of `T` and subtracting rounded knots would lose them.
pub fn mesh_size(net: &TimeNet, theta: f64) -> f64 {
    let t = net.maturity();
    let remaining: Vec<f64> = match net.theta_tag {
        Some(tag) => {
            let n = net.len() as f64;
            (0..net.knots.len())
                .map(|i| t * (1.0 - i as f64 / n).powf(1.0 / tag))
                .collect()
        }
        None => net.knots.iter().map(|k| t - k).collect(),
    };
    remaining
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].powf(1.0 - theta))
        .fold(0.0, f64::max)
}

/// Default number of fine-grid points.
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;

/// Fine simulation grid on `[0, T]` with `m` base points: three quarters
/// uniform on `[0, 0.95T]`, one quarter geometric towards `T` down to a last
/// step of `0.05T / (m/4)`; `extra` times (e.g. net knots) are merged in.
pub fn fine_grid(m: usize, maturity: f64, extra: &[f64]) -> Result<Vec<f64>> {
    if m < 8 {
        return Err(Error::invalid("the fine grid needs at least 8 points"));
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::invalid("maturity must be positive"));
    }
    let m_u = 3 * m / 4;
    let m_g = m - m_u;
    let split = 0.95 * maturity;
    let mut g: Vec<f64> = (0..m_u).map(|i| split * i as f64 / m_u as f64).collect();
    // remaining times to maturity 0.05T · q^j, j = 0..m_g, ending at τ_min
    let head = maturity - split;
    let tau_min = head / m_g as f64;
    let q = (tau_min / head).powf(1.0 / (m_g as f64 - 1.0).max(1.0));
    for j in 0..m_g {
        g.push(maturity - head * q.powi(j as i32));
    }
    g.push(maturity);
    g.extend(extra.iter().copied().filter(|t| *t >= 0.0 && *t <= maturity));
    g.sort_by(|a, b| a.total_cmp(b));
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * maturity);
    // the merge may have replaced an endpoint by a value within rounding
    g[0] = 0.0;
    *g.last_mut().expect("nonempty grid") = maturity;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let u = adapted_time_net(4, 1.0, 1.0).unwrap();
        assert_eq!(u.knots, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let h = adapted_time_net(2, 0.5, 1.0).unwrap();
        assert_eq!(h.knots, vec![0.0, 0.75, 1.0]);
        assert!((mesh_size(&h, 0.5) - 0.75).abs() < 1e-15);
        assert!((mesh_size(&u, 1.0) - 0.25).abs() < 1e-15);
        let one = TimeNet::new(vec![0.0, 2.0]).unwrap();
        assert!((mesh_size(&one, 0.3) - 2f64.powf(0.3)).abs() < 1e-15);
    }

    #[test]
    fn grid_contains_knots_and_is_increasing() {
        let net = adapted_time_net(64, 0.3, 1.0).unwrap();
        let g = fine_grid(256, 1.0, &net.knots).unwrap();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        for k in &net.knots {
            assert!(g.iter().any(|x| (x - k).abs() <= 1e-14), "{k}");
        }
        assert_eq!((g[0], *g.last().unwrap()), (0.0, 1.0));
    }

    #[test]
    fn interval_lookup() {
        let u = adapted_time_net(4, 1.0, 1.0).unwrap();
        assert_eq!(u.interval_of(0.25), 1);
        assert_eq!(u.interval_of(0.26), 2);
        assert_eq!(u.interval_of(1.0), 4);
    }
}
