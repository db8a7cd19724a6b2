use std::collections::VecDeque;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::GraphError;

/// Inter-type neighbour counts of a quasi-transitive family together with the
/// type proportions they force.
///
/// `counts[i][j]` is the number of type-`j` neighbours of any type-`i` vertex.
/// Proportions are derived from the edge double-counting relation
/// `p_i * counts[i][j] == p_j * counts[j][i]` and are kept as exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeBlueprint {
    counts: Vec<Vec<u32>>,
    proportions: Vec<Ratio<i128>>,
}

/// On-disk form of a blueprint: `{"n_types": int, "counts": [[int]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlueprintFile {
    pub n_types: usize,
    pub counts: Vec<Vec<u32>>,
}

impl TypeBlueprint {
    /// Validates a neighbour-count matrix and solves for the proportions.
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self, GraphError> {
        validate_blueprint(counts)
    }

    pub fn n_types(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    /// n_i(j).
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i][j]
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.counts[i].iter().sum()
    }

    pub fn degrees(&self) -> Vec<u32> {
        (0..self.n_types()).map(|i| self.degree(i)).collect()
    }

    pub fn proportions_exact(&self) -> &[Ratio<i128>] {
        &self.proportions
    }

    pub fn proportion(&self, i: usize) -> f64 {
        ratio_to_f64(self.proportions[i])
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.proportions.iter().map(|r| ratio_to_f64(*r)).collect()
    }

    /// The mean-field coupling `n_k(j) / p_j`.
    pub fn coupling(&self, k: usize, j: usize) -> f64 {
        f64::from(self.counts[k][j]) / self.proportion(j)
    }

    pub fn to_file(&self) -> BlueprintFile {
        BlueprintFile {
            n_types: self.n_types(),
            counts: self.counts.clone(),
        }
    }

    pub fn from_file(file: BlueprintFile) -> Result<Self, GraphError> {
        if file.counts.len() != file.n_types {
            return Err(GraphError::NotSquare {
                rows: file.counts.len(),
                row: 0,
                len: file.n_types,
            });
        }
        validate_blueprint(file.counts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("blueprint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: BlueprintFile =
            serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        Self::from_file(file)
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Checks a neighbour-count matrix and derives the type proportions.
///
/// Proportions are propagated along a BFS tree of the type graph using
/// `p_j = p_i * n_i(j) / n_j(i)`; every non-tree edge is then a cycle whose
/// product of ratios must be one, which is checked exactly.
pub fn validate_blueprint(counts: Vec<Vec<u32>>) -> Result<TypeBlueprint, GraphError> {
    let n = counts.len();
    if n == 0 {
        return Err(GraphError::EmptyBlueprint);
    }
    for (row, r) in counts.iter().enumerate() {
        if r.len() != n {
            return Err(GraphError::NotSquare {
                rows: n,
                row,
                len: r.len(),
            });
        }
    }
    for (i, r) in counts.iter().enumerate() {
        if r.iter().all(|&c| c == 0) {
            return Err(GraphError::ZeroDegreeType { ty: i });
        }
    }
    for i in 0..n {
        for j in 0..n {
            if (counts[i][j] == 0) != (counts[j][i] == 0) {
                return Err(GraphError::InconsistentCounts { i, j });
            }
        }
    }

    let mut weight: Vec<Option<Ratio<i128>>> = vec![None; n];
    weight[0] = Some(Ratio::from_integer(1));
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let wi = weight[i].expect("queued types carry a weight");
        for j in 0..n {
            if j == i || counts[i][j] == 0 {
                continue;
            }
            let wj = wi * Ratio::new(i128::from(counts[i][j]), i128::from(counts[j][i]));
            match weight[j] {
                None => {
                    weight[j] = Some(wj);
                    queue.push_back(j);
                }
                Some(existing) if existing != wj => {
                    return Err(GraphError::InconsistentCounts { i, j });
                }
                Some(_) => {}
            }
        }
    }
    if let Some(ty) = weight.iter().position(Option::is_none) {
        return Err(GraphError::DisconnectedTypes { unreachable: ty });
    }
    let weight: Vec<Ratio<i128>> = weight.into_iter().map(Option::unwrap).collect();
    let total = weight
        .iter()
        .fold(Ratio::from_integer(0), |acc: Ratio<i128>, w| acc + w);
    let proportions = weight.into_iter().map(|w| w / total).collect();
    Ok(TypeBlueprint {
        counts,
        proportions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Ratio<i128> {
        Ratio::new(n, d)
    }

    #[test]
    fn bipartite_two_four() {
        let bp = validate_blueprint(vec![vec![0, 2], vec![4, 0]]).unwrap();
        assert_eq!(bp.proportions_exact(), &[r(2, 3), r(1, 3)]);
        assert_eq!(bp.degrees(), vec![2, 4]);
    }

    #[test]
    fn decorated_grid() {
        let bp = validate_blueprint(vec![
            vec![0, 2, 2, 1],
            vec![2, 0, 0, 2],
            vec![2, 0, 2, 2],
            vec![1, 2, 2, 0],
        ])
        .unwrap();
        assert_eq!(bp.proportions_exact(), &[r(1, 4); 4]);
        assert_eq!(bp.degrees(), vec![5, 4, 6, 5]);
    }

    #[test]
    fn single_type() {
        let bp = validate_blueprint(vec![vec![2]]).unwrap();
        assert_eq!(bp.proportions_exact(), &[r(1, 1)]);
    }

    #[test]
    fn five_orbit() {
        let bp = validate_blueprint(vec![
            vec![0, 24, 2, 0, 3],
            vec![24, 0, 2, 0, 1],
            vec![2, 2, 0, 4, 0],
            vec![0, 0, 4, 0, 0],
            vec![3, 1, 0, 0, 0],
        ])
        .unwrap();
        assert_eq!(bp.proportions_exact(), &[r(1, 5); 5]);
        assert_eq!(bp.degrees(), vec![29, 27, 8, 4, 4]);
    }

    #[test]
    fn cycle_product_mismatch() {
        // 0->1 gives p1 = p0, 1->2 gives p2 = p1, but 0->2 demands p2 = 2 p0.
        let err = validate_blueprint(vec![vec![0, 1, 2], vec![1, 0, 1], vec![1, 1, 0]]);
        assert!(matches!(err, Err(GraphError::InconsistentCounts { .. })));
    }

    #[test]
    fn one_sided_support() {
        let err = validate_blueprint(vec![vec![1, 1], vec![0, 2]]);
        assert!(matches!(
            err,
            Err(GraphError::InconsistentCounts { i: 0, j: 1 })
        ));
    }

    #[test]
    fn disconnected_and_zero_degree() {
        let err = validate_blueprint(vec![vec![2, 0], vec![0, 3]]);
        assert!(matches!(
            err,
            Err(GraphError::DisconnectedTypes { unreachable: 1 })
        ));
        let err = validate_blueprint(vec![vec![0, 0], vec![0, 3]]);
        assert!(matches!(err, Err(GraphError::ZeroDegreeType { ty: 0 })));
    }

    #[test]
    fn ragged_matrix() {
        assert!(matches!(
            validate_blueprint(vec![vec![0, 1], vec![1]]),
            Err(GraphError::NotSquare { row: 1, .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let bp = validate_blueprint(vec![vec![0, 2], vec![4, 0]]).unwrap();
        let back = TypeBlueprint::from_json(&bp.to_json()).unwrap();
        assert_eq!(bp, back);
        let parsed = TypeBlueprint::from_json(r#"{"n_types": 1, "counts": [[4]]}"#).unwrap();
        assert_eq!(parsed.degree(0), 4);
        assert!(TypeBlueprint::from_json(r#"{"n_types": 2, "counts": [[4]]}"#).is_err());
    }
}
