//! Directed effect networks over commodities and their summary statistics.
//!
//! An edge `i -> j` exists in the network of class `k` exactly when the sum
//! over lags of the fitted coefficients of series `i` in the equation of
//! series `j` is non-zero. Since the proximal steps produce exact zeros, the
//! edge indicator is an exact comparison, not a threshold.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::MultiClassVarFit;
use crate::panel::SeriesInfo;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    /// Sum over lags of the source-on-target coefficients.
    pub weight: f64,
}

impl Edge {
    pub fn sign(&self) -> i8 {
        if self.weight > 0.0 {
            1
        } else if self.weight < 0.0 {
            -1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectNetwork {
    pub class_id: String,
    pub nodes: Vec<SeriesInfo>,
    /// Cross-commodity edges only (no self-loops), source-major order.
    pub edges: Vec<Edge>,
    /// Ordered pairs whose per-lag coefficients are not all zero but sum to
    /// an exact zero, so no edge is drawn. Only possible for P > 1.
    pub cancelled: Vec<(usize, usize)>,
}

/// Per-node connectedness: degrees and their standardized scores. Scores
/// divide by the class maximum; when a maximum is zero all scores of that
/// measure are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectedness {
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    pub total_degree: Vec<usize>,
    pub in_score: Vec<f64>,
    pub out_score: Vec<f64>,
    pub total_score: Vec<f64>,
}

/// Within/spillover proportions over commodity types. Entry `(a, b)` is
/// `None` when no ordered pair of distinct nodes connects the two types
/// (a single-node type on the diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct TypeEffects {
    pub types: Vec<String>,
    pub matrix: Vec<Vec<Option<f64>>>,
}

/// Extracts the directed signed network of one class from a fit.
pub fn build_network(fit: &MultiClassVarFit, class: usize) -> Result<EffectNetwork> {
    if class >= fit.n_classes() {
        return Err(Error::ClassOutOfRange {
            class,
            count: fit.n_classes(),
        });
    }
    let j = fit.n_series();
    let b = &fit.b[class];
    let mut edges = Vec::new();
    let mut cancelled = Vec::new();
    for source in 0..j {
        for target in 0..j {
            if source == target {
                continue;
            }
            let mut weight = 0.0;
            let mut any_nonzero = false;
            for lag in 0..fit.p {
                let v = b[(target, lag * j + source)];
                weight += v;
                any_nonzero |= v != 0.0;
            }
            if weight != 0.0 {
                edges.push(Edge {
                    source,
                    target,
                    weight,
                });
            } else if any_nonzero {
                cancelled.push((source, target));
            }
        }
    }
    Ok(EffectNetwork {
        class_id: fit.classes[class].clone(),
        nodes: fit.series.clone(),
        edges,
        cancelled,
    })
}

/// In-going, out-going and total connectedness, standardized by the class
/// maximum.
pub fn connectedness(net: &EffectNetwork) -> Connectedness {
    let j = net.nodes.len();
    let mut in_degree = vec![0usize; j];
    let mut out_degree = vec![0usize; j];
    for e in &net.edges {
        out_degree[e.source] += 1;
        in_degree[e.target] += 1;
    }
    let total_degree: Vec<usize> = in_degree
        .iter()
        .zip(&out_degree)
        .map(|(a, b)| a + b)
        .collect();
    let score = |degrees: &[usize]| -> Vec<f64> {
        let max = degrees.iter().copied().max().unwrap_or(0);
        if max == 0 {
            vec![0.0; degrees.len()]
        } else {
            degrees.iter().map(|&d| d as f64 / max as f64).collect()
        }
    };
    Connectedness {
        in_score: score(&in_degree),
        out_score: score(&out_degree),
        total_score: score(&total_degree),
        in_degree,
        out_degree,
        total_degree,
    }
}

/// Proportion of the row class's edges also present in the column class.
/// Rows of empty networks are `None` (reported as NA, not zero); the
/// diagonal is exactly 1 for non-empty networks.
pub fn shared_effects(networks: &[EffectNetwork]) -> Result<Vec<Vec<Option<f64>>>> {
    let k_n = networks.len();
    for net in networks.iter().skip(1) {
        if net.nodes.len() != networks[0].nodes.len()
            || net
                .nodes
                .iter()
                .zip(&networks[0].nodes)
                .any(|(a, b)| a.id != b.id)
        {
            return Err(Error::MismatchedNodes);
        }
    }
    let supports: Vec<BTreeSet<(usize, usize)>> = networks
        .iter()
        .map(|n| n.edges.iter().map(|e| (e.source, e.target)).collect())
        .collect();
    let mut out = vec![vec![None; k_n]; k_n];
    for row in 0..k_n {
        if supports[row].is_empty() {
            continue;
        }
        for col in 0..k_n {
            let common = supports[row].intersection(&supports[col]).count();
            out[row][col] = Some(common as f64 / supports[row].len() as f64);
        }
    }
    Ok(out)
}

/// Within-type (diagonal) and spillover (off-diagonal) effect proportions:
/// realized edges between the type groups divided by the number of possible
/// ordered cross-node pairs. Types appear in order of first appearance in
/// the node list.
pub fn type_effects(net: &EffectNetwork) -> Result<TypeEffects> {
    let mut types: Vec<String> = Vec::new();
    let mut type_of = Vec::with_capacity(net.nodes.len());
    for node in &net.nodes {
        if node.kind.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "series {} has no type label",
                node.id
            )));
        }
        let idx = match types.iter().position(|t| *t == node.kind) {
            Some(i) => i,
            None => {
                types.push(node.kind.clone());
                types.len() - 1
            }
        };
        type_of.push(idx);
    }
    let n_types = types.len();
    let mut members = vec![0usize; n_types];
    for &t in &type_of {
        members[t] += 1;
    }
    let mut counts = vec![vec![0usize; n_types]; n_types];
    for e in &net.edges {
        counts[type_of[e.source]][type_of[e.target]] += 1;
    }
    let mut matrix = vec![vec![None; n_types]; n_types];
    for a in 0..n_types {
        for b in 0..n_types {
            let possible = if a == b {
                members[a] * (members[a] - 1)
            } else {
                members[a] * members[b]
            };
            if possible > 0 {
                matrix[a][b] = Some(counts[a][b] as f64 / possible as f64);
            }
        }
    }
    Ok(TypeEffects { types, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;
    use crate::model::{FitDiagnostics, PenaltyConfig};
    use alloc::borrow::ToOwned;
    use alloc::string::ToString;

    fn fit_with_b(b: Vec<Mat>, p: usize, kinds: &[&str]) -> MultiClassVarFit {
        let j = b[0].rows();
        MultiClassVarFit {
            classes: (0..b.len()).map(|k| format!("c{}", k + 1)).collect(),
            series: (0..j)
                .map(|s| SeriesInfo {
                    id: format!("s{:02}", s + 1),
                    kind: kinds[s].to_owned(),
                })
                .collect(),
            p,
            omega: vec![Mat::eye(j); b.len()],
            b,
            penalty: PenaltyConfig::zero(),
            diagnostics: FitDiagnostics::default(),
        }
    }

    fn network_from_edges(j: usize, kinds: &[&str], edges: &[(usize, usize)]) -> EffectNetwork {
        EffectNetwork {
            class_id: "c1".to_string(),
            nodes: (0..j)
                .map(|s| SeriesInfo {
                    id: format!("s{:02}", s + 1),
                    kind: kinds[s].to_owned(),
                })
                .collect(),
            edges: edges
                .iter()
                .map(|&(s, t)| Edge {
                    source: s,
                    target: t,
                    weight: 1.0,
                })
                .collect(),
            cancelled: Vec::new(),
        }
    }

    #[test]
    fn single_coefficient_produces_one_edge() {
        // effect of series 1 on series 2 (one-based): row 2, column 1
        let mut b = Mat::zeros(3, 3);
        b[(1, 0)] = 0.5;
        let fit = fit_with_b(vec![b], 1, &["metal", "metal", "metal"]);
        let net = build_network(&fit, 0).unwrap();
        assert_eq!(
            net.edges,
            vec![Edge {
                source: 0,
                target: 1,
                weight: 0.5
            }]
        );
        assert_eq!(net.edges[0].sign(), 1);
        assert!(net.cancelled.is_empty());
    }

    #[test]
    fn diagonal_coefficients_yield_no_edges() {
        let mut b = Mat::zeros(3, 3);
        b[(0, 0)] = 0.9;
        b[(1, 1)] = -0.4;
        b[(2, 2)] = 0.2;
        let fit = fit_with_b(vec![b], 1, &["metal", "metal", "metal"]);
        let net = build_network(&fit, 0).unwrap();
        assert!(net.edges.is_empty());
    }

    #[test]
    fn opposing_lags_cancel_to_no_edge() {
        // P = 2: lag-1 effect 0.3 and lag-2 effect -0.3 of series 1 on 2
        let mut b = Mat::zeros(2, 4);
        b[(1, 0)] = 0.3;
        b[(1, 2)] = -0.3;
        let fit = fit_with_b(vec![b], 2, &["metal", "metal"]);
        let net = build_network(&fit, 0).unwrap();
        assert!(net.edges.is_empty());
        assert_eq!(net.cancelled, vec![(0, 1)]);
    }

    #[test]
    fn class_out_of_range() {
        let fit = fit_with_b(vec![Mat::zeros(2, 2)], 1, &["metal", "metal"]);
        assert!(matches!(
            build_network(&fit, 1),
            Err(Error::ClassOutOfRange { .. })
        ));
    }

    #[test]
    fn star_graph_connectedness() {
        let kinds = ["metal"; 4];
        let net = network_from_edges(4, &kinds, &[(0, 1), (0, 2), (0, 3)]);
        let c = connectedness(&net);
        assert_eq!(c.out_score, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.in_score, vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(c.total_score[0], 1.0);
        for i in 1..4 {
            assert!((c.total_score[i] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_network_scores_zero() {
        let net = network_from_edges(3, &["metal"; 3], &[]);
        let c = connectedness(&net);
        assert_eq!(c.in_score, vec![0.0; 3]);
        assert_eq!(c.out_score, vec![0.0; 3]);
        assert_eq!(c.total_score, vec![0.0; 3]);
    }

    #[test]
    fn some_node_attains_the_maximum_in_each_measure() {
        let net = network_from_edges(4, &["metal"; 4], &[(0, 1), (2, 1), (3, 0)]);
        let c = connectedness(&net);
        for scores in [&c.in_score, &c.out_score, &c.total_score] {
            assert!(scores.contains(&1.0));
        }
    }

    #[test]
    fn connectedness_is_permutation_equivariant() {
        let edges = [(0usize, 1usize), (1, 2), (3, 1), (2, 0)];
        let net = network_from_edges(4, &["metal"; 4], &edges);
        let c = connectedness(&net);
        // relabel nodes through the permutation 0->2, 1->0, 2->3, 3->1
        let perm = [2usize, 0, 3, 1];
        let permuted_edges: Vec<(usize, usize)> =
            edges.iter().map(|&(s, t)| (perm[s], perm[t])).collect();
        let pnet = network_from_edges(4, &["metal"; 4], &permuted_edges);
        let pc = connectedness(&pnet);
        for (i, &to) in perm.iter().enumerate() {
            assert_eq!(c.in_score[i], pc.in_score[to]);
            assert_eq!(c.out_score[i], pc.out_score[to]);
            assert_eq!(c.total_score[i], pc.total_score[to]);
        }
    }

    #[test]
    fn shared_effects_counts_common_support() {
        let kinds = ["metal"; 4];
        let a = network_from_edges(4, &kinds, &[(0, 1), (1, 2)]);
        let b = network_from_edges(4, &kinds, &[(1, 2), (2, 3), (3, 0)]);
        let m = shared_effects(&[a, b]).unwrap();
        assert_eq!(m[0][0], Some(1.0));
        assert_eq!(m[1][1], Some(1.0));
        assert_eq!(m[0][1], Some(0.5));
        assert!((m[1][0].unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shared_effects_identical_networks_are_fully_shared() {
        let kinds = ["metal"; 3];
        let a = network_from_edges(3, &kinds, &[(0, 1), (2, 1)]);
        let b = network_from_edges(3, &kinds, &[(0, 1), (2, 1)]);
        let m = shared_effects(&[a, b]).unwrap();
        for row in &m {
            for cell in row {
                assert_eq!(*cell, Some(1.0));
            }
        }
    }

    #[test]
    fn shared_effects_empty_row_is_na() {
        let kinds = ["metal"; 3];
        let a = network_from_edges(3, &kinds, &[]);
        let b = network_from_edges(3, &kinds, &[(0, 1)]);
        let m = shared_effects(&[a, b]).unwrap();
        assert_eq!(m[0][0], None);
        assert_eq!(m[0][1], None);
        assert_eq!(m[1][1], Some(1.0));
        assert_eq!(m[1][0], Some(0.0));
    }

    #[test]
    fn shared_effects_rejects_mismatched_nodes() {
        let a = network_from_edges(3, &["metal"; 3], &[]);
        let mut b = network_from_edges(3, &["metal"; 3], &[]);
        b.nodes[1].id = "other".to_string();
        assert!(matches!(
            shared_effects(&[a, b]),
            Err(Error::MismatchedNodes)
        ));
    }

    #[test]
    fn within_agriculture_share_matches_worked_example() {
        // five agricultural nodes, four within-type edges: 4/20 = 0.20
        let kinds = ["agriculture"; 5];
        let net = network_from_edges(5, &kinds, &[(0, 1), (1, 2), (3, 4), (4, 0)]);
        let te = type_effects(&net).unwrap();
        assert_eq!(te.types, vec!["agriculture".to_string()]);
        assert_eq!(te.matrix[0][0], Some(0.20));
    }

    #[test]
    fn energy_to_agriculture_spillover_matches_worked_example() {
        // two energy and five agricultural nodes, one energy->agriculture
        // edge: 1/10 = 0.10
        let kinds = [
            "energy",
            "energy",
            "agriculture",
            "agriculture",
            "agriculture",
            "agriculture",
            "agriculture",
        ];
        let net = network_from_edges(7, &kinds, &[(0, 3)]);
        let te = type_effects(&net).unwrap();
        assert_eq!(
            te.types,
            vec!["energy".to_string(), "agriculture".to_string()]
        );
        assert_eq!(te.matrix[0][1], Some(0.10));
        assert_eq!(te.matrix[0][0], Some(0.0));
        assert_eq!(te.matrix[1][0], Some(0.0));
    }

    #[test]
    fn complete_graph_saturates_all_cells() {
        let kinds = ["energy", "metal", "metal", "agriculture"];
        let mut edges = Vec::new();
        for s in 0..4 {
            for t in 0..4 {
                if s != t {
                    edges.push((s, t));
                }
            }
        }
        let net = network_from_edges(4, &kinds, &edges);
        let te = type_effects(&net).unwrap();
        for (a, row) in te.matrix.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                if a == b && te.types[a] != "metal" {
                    // single-node type: no possible within pair
                    assert_eq!(*cell, None);
                } else {
                    assert_eq!(*cell, Some(1.0));
                }
            }
        }
    }

    #[test]
    fn type_effect_numerators_partition_the_edge_count() {
        let kinds = ["energy", "metal", "metal", "agriculture", "agriculture"];
        let edges = [(0, 1), (1, 2), (2, 4), (3, 4), (4, 0), (1, 0)];
        let net = network_from_edges(5, &kinds, &edges);
        let te = type_effects(&net).unwrap();
        let members = [1.0, 2.0, 2.0];
        let mut reconstructed = 0.0;
        for (a, row) in te.matrix.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    let possible = if a == b {
                        members[a] * (members[a] - 1.0)
                    } else {
                        members[a] * members[b]
                    };
                    reconstructed += v * possible;
                }
            }
        }
        assert!((reconstructed - edges.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn untyped_node_rejected() {
        let mut net = network_from_edges(2, &["metal", "metal"], &[]);
        net.nodes[0].kind = String::new();
        assert!(type_effects(&net).is_err());
    }
}
