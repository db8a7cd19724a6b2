use super::GraphError;

/// Ball volumes `f(0), f(1), ..., f(n_max)` of a growing graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthTable {
    values: Vec<u64>,
}

impl GrowthTable {
    pub fn new(values: Vec<u64>) -> Result<Self, GraphError> {
        if values.is_empty() || values[0] == 0 {
            return Err(GraphError::InvalidGrowth("f(0) must be at least 1".into()));
        }
        if let Some(r) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(GraphError::InvalidGrowth(format!("f decreases at r = {}", r + 1)));
        }
        Ok(Self { values })
    }

    pub fn from_fn(n_max: usize, f: impl Fn(u64) -> u64) -> Result<Self, GraphError> {
        Self::new((0..=n_max as u64).map(f).collect())
    }

    /// `(2r + 1)^2`, the box volumes of Z^2.
    pub fn square_lattice_boxes(n_max: usize) -> Self {
        Self::from_fn(n_max, |r| (2 * r + 1) * (2 * r + 1)).expect("box volumes are monotone")
    }

    /// `2r^2 + 2r + 1`, graph-distance balls of Z^2.
    pub fn square_lattice_balls(n_max: usize) -> Self {
        Self::from_fn(n_max, |r| 2 * r * r + 2 * r + 1).expect("ball volumes are monotone")
    }

    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, r: usize) -> u64 {
        self.values[r]
    }

    /// Relative growth `(f(m) - f(m-1)) / f(m-1)` for `m >= 1`.
    pub fn relative_growth(&self, m: usize) -> f64 {
        let prev = self.values[m - 1] as f64;
        (self.values[m] as f64 - prev) / prev
    }

    /// Tail supremum of the relative growth from `start` on. The supremum is
    /// only taken over the indices the table actually holds.
    pub fn tail_sup(&self, start: usize) -> f64 {
        (start.max(1)..=self.max_index())
            .map(|m| self.relative_growth(m))
            .fold(0.0, f64::max)
    }
}

/// Inner-ball margin `g(n) = min(floor(n/2), floor(M(floor(n/2))^(-1/2)))`
/// with `M` the tail supremum of the relative growth.
///
/// Clamped below at 1 so the result is always positive: early in fast
/// growing tables `M` can exceed one and the second term would vanish.
pub fn boundary_margin_g(growth: &GrowthTable, n: usize) -> Result<usize, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidGrowth(format!("g(n) needs n >= 2, got {n}")));
    }
    if growth.max_index() < n {
        return Err(GraphError::TableTooShort {
            needed: n,
            available: growth.max_index(),
        });
    }
    let half = n / 2;
    let m = growth.tail_sup(half);
    let root_bound = if m > 0.0 {
        let v = m.powf(-0.5).floor();
        if v >= half as f64 {
            half
        } else {
            v as usize
        }
    } else {
        half
    };
    Ok(half.min(root_bound).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_growth_hand_value() {
        let t = GrowthTable::from_fn(100, |r| r + 1).unwrap();
        assert!((t.tail_sup(50) - 1.0 / 50.0).abs() < 1e-15);
        assert_eq!(boundary_margin_g(&t, 100).unwrap(), 7);
    }

    #[test]
    fn n_two_gives_one() {
        for t in [
            GrowthTable::square_lattice_boxes(10),
            GrowthTable::from_fn(10, |r| r + 1).unwrap(),
            GrowthTable::new(vec![1; 11]).unwrap(),
        ] {
            assert_eq!(boundary_margin_g(&t, 2).unwrap(), 1);
        }
    }

    #[test]
    fn constant_table_uses_half() {
        let t = GrowthTable::new(vec![5; 41]).unwrap();
        assert_eq!(boundary_margin_g(&t, 40).unwrap(), 20);
    }

    #[test]
    fn errors() {
        let t = GrowthTable::square_lattice_boxes(10);
        assert!(matches!(
            boundary_margin_g(&t, 11),
            Err(GraphError::TableTooShort { needed: 11, available: 10 })
        ));
        assert!(boundary_margin_g(&t, 1).is_err());
        assert!(GrowthTable::new(vec![0, 1]).is_err());
        assert!(GrowthTable::new(vec![3, 2]).is_err());
    }
}
