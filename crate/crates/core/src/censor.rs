//! The interest-set projection algebra: message censoring between agents,
//! lifting low-dimensional estimates into the full field space, restriction
//! back down, and the censored Laplacian coupling the lifted network state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::sensing::InterestSet;

/// Diagonal 0/1 selector for one agent's interest components.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    diag: Vec<f64>,
}

impl Projector {
    pub fn from_interest(interest: &InterestSet) -> Self {
        let mut diag = vec![0.0; interest.field_dim()];
        for &i in interest.indices() {
            diag[i] = 1.0;
        }
        Self { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(z.len(), z.iter().zip(&self.diag).map(|(x, d)| x * d))
    }
}

/// Apply the stacked block-diagonal projector diag(P_1, ..., P_N) to an
/// N^2-dimensional vector.
pub fn project_stacked(interests: &[InterestSet], stacked: &DVector<f64>) -> DVector<f64> {
    let n = interests.len();
    let mut out = DVector::zeros(n * n);
    for (agent, interest) in interests.iter().enumerate() {
        for &c in interest.indices() {
            out[agent * n + c] = stacked[agent * n + c];
        }
    }
    out
}

/// Norm of the part of `stacked` outside the interest subspace.
pub fn subspace_residual(interests: &[InterestSet], stacked: &DVector<f64>) -> f64 {
    let n = interests.len();
    let mut sum = 0.0;
    for (agent, interest) in interests.iter().enumerate() {
        for c in 0..n {
            if !interest.contains(c) {
                let v = stacked[agent * n + c];
                sum += v * v;
            }
        }
    }
    sum.sqrt()
}

/// Censor a neighbor's message for local processing: entry j of the result
/// is the neighbor's estimate of the receiver's j-th interest component when
/// the neighbor shares it, else zero.
pub fn censor_received(
    x_sender: &DVector<f64>,
    sender: &InterestSet,
    receiver: &InterestSet,
) -> Result<DVector<f64>> {
    if x_sender.len() != sender.len() {
        return Err(Error::DimensionMismatch {
            context: "censor_received",
            expected: sender.len(),
            actual: x_sender.len(),
        });
    }
    Ok(DVector::from_iterator(
        receiver.len(),
        (0..receiver.len()).map(|j| {
            sender
                .position(receiver.component(j))
                .map_or(0.0, |p| x_sender[p])
        }),
    ))
}

/// The receiver's own estimate masked to the components it shares with a
/// neighbor, aligned with `censor_received` so the two can be differenced.
pub fn censor_self(
    x_own: &DVector<f64>,
    own: &InterestSet,
    neighbor: &InterestSet,
) -> Result<DVector<f64>> {
    if x_own.len() != own.len() {
        return Err(Error::DimensionMismatch {
            context: "censor_self",
            expected: own.len(),
            actual: x_own.len(),
        });
    }
    Ok(DVector::from_iterator(
        own.len(),
        (0..own.len()).map(|j| {
            if neighbor.contains(own.component(j)) {
                x_own[j]
            } else {
                0.0
            }
        }),
    ))
}

/// Embed a |I|-dimensional estimate into the full field space, zero outside
/// the interest set.
pub fn lift(z: &DVector<f64>, interest: &InterestSet, field_dim: usize) -> Result<DVector<f64>> {
    if z.len() != interest.len() {
        return Err(Error::DimensionMismatch {
            context: "lift",
            expected: interest.len(),
            actual: z.len(),
        });
    }
    if field_dim != interest.field_dim() {
        return Err(Error::DimensionMismatch {
            context: "lift field dimension",
            expected: interest.field_dim(),
            actual: field_dim,
        });
    }
    let mut out = DVector::zeros(field_dim);
    for (j, &c) in interest.indices().iter().enumerate() {
        out[c] = z[j];
    }
    Ok(out)
}

/// Extract the interest components of a full field vector.
pub fn restrict(z: &DVector<f64>, interest: &InterestSet) -> DVector<f64> {
    assert_eq!(
        z.len(),
        interest.field_dim(),
        "restrict expects a full field vector"
    );
    DVector::from_iterator(
        interest.len(),
        interest.indices().iter().map(|&c| z[c]),
    )
}

/// Block matrix coupling the lifted network state in the compact update.
/// Every block is diagonal (a product of 0/1 selectors scaled by a Laplacian
/// entry), so blocks are stored as component-indexed weight vectors rather
/// than dense matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredLaplacian {
    n: usize,
    /// diag_blocks[n][c]: entry (c, c) of block (n, n).
    diag_blocks: Vec<Vec<f64>>,
    /// (n, l, weights) for n < l with a nonzero Laplacian entry; weights[c]
    /// is entry (c, c) of block (n, l) (= block (l, n) by symmetry).
    off_blocks: Vec<(usize, usize, Vec<f64>)>,
}

/// Assemble the censored Laplacian for one communication topology:
/// off-diagonal block (n, l) = L_nl * P_l * P_n, and diagonal block
/// (n, n) = -P_n * sum_{r != n} L_nr * P_r.
pub fn build_censored_laplacian(
    laplacian: &Laplacian,
    interests: &[InterestSet],
) -> Result<CensoredLaplacian> {
    let n = laplacian.node_count();
    if interests.len() != n {
        return Err(Error::DimensionMismatch {
            context: "censored laplacian interest count",
            expected: n,
            actual: interests.len(),
        });
    }
    let m = laplacian.matrix();
    let mut diag_blocks = vec![vec![0.0; n]; n];
    let mut off_blocks = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let w = m[(a, b)];
            if w == 0.0 {
                continue;
            }
            let mut weights = vec![0.0; n];
            for &c in interests[a].indices() {
                if interests[b].contains(c) {
                    weights[c] = w;
                    diag_blocks[a][c] -= w;
                    diag_blocks[b][c] -= w;
                }
            }
            off_blocks.push((a, b, weights));
        }
    }
    Ok(CensoredLaplacian {
        n,
        diag_blocks,
        off_blocks,
    })
}

impl CensoredLaplacian {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// y = L_P x for a stacked N^2 vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n * self.n);
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let n = self.n;
        y.fill(0.0);
        for (agent, diag) in self.diag_blocks.iter().enumerate() {
            for (c, &w) in diag.iter().enumerate() {
                if w != 0.0 {
                    y[agent * n + c] += w * x[agent * n + c];
                }
            }
        }
        for &(a, b, ref weights) in &self.off_blocks {
            for (c, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    y[a * n + c] += w * x[b * n + c];
                    y[b * n + c] += w * x[a * n + c];
                }
            }
        }
    }

    /// Dense N^2 x N^2 materialization, for verification at small sizes.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n * n, n * n);
        for (agent, diag) in self.diag_blocks.iter().enumerate() {
            for (c, &w) in diag.iter().enumerate() {
                m[(agent * n + c, agent * n + c)] = w;
            }
        }
        for &(a, b, ref weights) in &self.off_blocks {
            for (c, &w) in weights.iter().enumerate() {
                m[(a * n + c, b * n + c)] = w;
                m[(b * n + c, a * n + c)] = w;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn fig1_interests() -> Vec<InterestSet> {
        // Five agents on a line; agent 3 couples to {2,3,4}, the rest to
        // themselves only.
        vec![
            InterestSet::from_one_based(&[1], 5).unwrap(),
            InterestSet::from_one_based(&[2], 5).unwrap(),
            InterestSet::from_one_based(&[2, 3, 4], 5).unwrap(),
            InterestSet::from_one_based(&[4], 5).unwrap(),
            InterestSet::from_one_based(&[5], 5).unwrap(),
        ]
    }

    #[test]
    fn censoring_matches_worked_example() {
        let interests = fig1_interests();
        // Agent 3 (index 2) receives agent 2's scalar estimate.
        let x2 = dvector![0.7];
        let recv = censor_received(&x2, &interests[1], &interests[2]).unwrap();
        assert_eq!(recv, dvector![0.7, 0.0, 0.0]);

        let x3 = dvector![0.1, 0.2, 0.3];
        let own = censor_self(&x3, &interests[2], &interests[1]).unwrap();
        assert_eq!(own, dvector![0.1, 0.0, 0.0]);

        // Reverse direction: agent 2 receives from agent 3.
        let recv23 = censor_received(&x3, &interests[2], &interests[1]).unwrap();
        assert_eq!(recv23, dvector![0.1]);
        let own23 = censor_self(&x2, &interests[1], &interests[2]).unwrap();
        assert_eq!(own23, dvector![0.7]);
    }

    #[test]
    fn identical_interest_sets_censor_to_identity() {
        let i = InterestSet::from_one_based(&[2, 5, 6], 8).unwrap();
        let x = dvector![1.0, -2.0, 3.0];
        assert_eq!(censor_received(&x, &i, &i).unwrap(), x);
        assert_eq!(censor_self(&x, &i, &i).unwrap(), x);
    }

    #[test]
    fn lift_matches_worked_example_and_round_trips() {
        let interests = fig1_interests();
        let x3 = dvector![0.1, 0.2, 0.3];
        let lifted = lift(&x3, &interests[2], 5).unwrap();
        assert_eq!(lifted, dvector![0.0, 0.1, 0.2, 0.3, 0.0]);
        assert_eq!(restrict(&lifted, &interests[2]), x3);

        let full = InterestSet::full(4);
        let z = dvector![1.0, 2.0, 3.0, 4.0];
        assert_eq!(lift(&z, &full, 4).unwrap(), z);
    }

    #[test]
    fn restriction_of_field_values() {
        let theta = dvector![1.2, 1.3, 1.4, 0.8, 0.7, 1.1, 0.9, 1.0, 1.8, 0.6];
        let i1 = InterestSet::from_one_based(&[9, 10, 1, 2, 3], 10).unwrap();
        assert_eq!(restrict(&theta, &i1), dvector![1.2, 1.3, 1.4, 1.8, 0.6]);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let i = InterestSet::from_one_based(&[1, 2], 4).unwrap();
        let wrong = dvector![1.0, 2.0, 3.0];
        assert!(censor_received(&wrong, &i, &i).is_err());
        assert!(censor_self(&wrong, &i, &i).is_err());
        assert!(lift(&wrong, &i, 4).is_err());
    }

    #[test]
    fn full_interest_censored_laplacian_is_kronecker_with_identity() {
        let g = Graph::ring(4).unwrap();
        let l = g.laplacian();
        let interests = vec![InterestSet::full(4); 4];
        let lp = build_censored_laplacian(&l, &interests).unwrap();
        let dense = lp.to_dense();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let expected = if c == d { l.matrix()[(a, b)] } else { 0.0 };
                        assert_eq!(dense[(a * 4 + c, b * 4 + d)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn censored_laplacian_annihilates_lifted_consensus() {
        use rand::Rng;
        let mut rng = crate::stream::stream_rng(11, 0);
        let g = Graph::path(5).unwrap();
        let l = g.laplacian();
        let interests = fig1_interests();
        let lp = build_censored_laplacian(&l, &interests).unwrap();
        for _ in 0..100 {
            let a = DVector::from_iterator(5, (0..5).map(|_| rng.gen_range(-3.0..3.0)));
            let mut stacked = DVector::zeros(25);
            for (agent, interest) in interests.iter().enumerate() {
                for &c in interest.indices() {
                    stacked[agent * 5 + c] = a[c];
                }
            }
            let out = lp.apply(&stacked);
            assert_abs_diff_eq!(out.norm(), 0.0, epsilon = 1e-12 * (1.0 + stacked.norm()));
        }
    }

    #[test]
    fn dense_form_is_symmetric_and_projector_invariant() {
        let g = Graph::path(5).unwrap();
        let interests = fig1_interests();
        let lp = build_censored_laplacian(&g.laplacian(), &interests).unwrap();
        let dense = lp.to_dense();
        assert_eq!(dense.transpose(), dense);
        // Applying the stacked projector leaves L_P unchanged.
        for row in 0..25 {
            let agent = row / 5;
            let comp = row % 5;
            if !interests[agent].contains(comp) {
                for col in 0..25 {
                    assert_eq!(dense[(row, col)], 0.0);
                }
            }
        }
    }
}
