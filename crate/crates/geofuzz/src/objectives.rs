//! The phenotype map from execution paths to the scalar a campaign
//! maximizes.
//!
//! A campaign fixes one objective kind. Each kind assigns a potential to
//! every vertex (a notion of distance from the program entry, a drawing
//! depth, or a constant for pure coverage), and a path scores the maximum
//! potential among its vertices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::MetricMatrix;
use crate::toylang::Cfg;

/// Arguments to `exp` are capped here so potentials stay finite.
const EXP_ARG_CAP: f64 = 700.0;

/// The objective family. The `Exp` variants compose the base potential with
/// `exp(x) - 1`, which preserves the ranking but stretches the scale.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
pub enum ObjectiveKind {
    #[serde(rename = "hitprob")]
    #[value(name = "hitprob")]
    HitProbFromEntry,
    #[serde(rename = "exp-hitprob")]
    #[value(name = "exp-hitprob")]
    ExpHitProbFromEntry,
    #[serde(rename = "hop")]
    #[value(name = "hop")]
    HopFromEntry,
    #[serde(rename = "exp-hop")]
    #[value(name = "exp-hop")]
    ExpHopFromEntry,
    #[serde(rename = "depth")]
    #[value(name = "depth")]
    DrawingDepth,
    #[serde(rename = "exp-depth")]
    #[value(name = "exp-depth")]
    ExpDrawingDepth,
    #[serde(rename = "constant")]
    #[value(name = "constant")]
    Constant,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 7] = [
        ObjectiveKind::HitProbFromEntry,
        ObjectiveKind::ExpHitProbFromEntry,
        ObjectiveKind::HopFromEntry,
        ObjectiveKind::ExpHopFromEntry,
        ObjectiveKind::DrawingDepth,
        ObjectiveKind::ExpDrawingDepth,
        ObjectiveKind::Constant,
    ];

    /// Short letter used in plots and logs, `a` through `g`.
    pub fn letter(self) -> char {
        (b'a' + Self::ALL.iter().position(|k| *k == self).unwrap() as u8) as char
    }

    /// Name used on the command line and in grid files.
    pub fn cli_name(self) -> &'static str {
        match self {
            ObjectiveKind::HitProbFromEntry => "hitprob",
            ObjectiveKind::ExpHitProbFromEntry => "exp-hitprob",
            ObjectiveKind::HopFromEntry => "hop",
            ObjectiveKind::ExpHopFromEntry => "exp-hop",
            ObjectiveKind::DrawingDepth => "depth",
            ObjectiveKind::ExpDrawingDepth => "exp-depth",
            ObjectiveKind::Constant => "constant",
        }
    }

    /// Inverse of `cli_name`.
    pub fn from_cli_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.cli_name() == name)
    }

    /// True when the kind needs a vertex metric to compute potentials.
    pub fn needs_metric(self) -> bool {
        matches!(
            self,
            ObjectiveKind::HitProbFromEntry | ObjectiveKind::ExpHitProbFromEntry
        )
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Geometry pieces an objective may draw on. A kind that needs a missing
/// piece raises a state error.
#[derive(Debug, Clone, Copy, Default)]
pub struct ObjectiveGeometry<'a> {
    pub metric: Option<&'a MetricMatrix>,
    pub entry_hops: Option<&'a [u32]>,
    pub depth_layers: Option<&'a [u32]>,
}

/// Layer index of every vertex in a hierarchical drawing of the CFG.
///
/// Back edges found by a depth-first search from the entry (the structural
/// exit-to-entry edge among them) are dropped, and each vertex gets the
/// length of the longest remaining path from the entry.
pub fn drawing_depth_layers(cfg: &Cfg) -> Vec<u32> {
    let n = cfg.len();
    // Three-color depth-first search in successor order; an edge into a
    // vertex still on the stack is a back edge.
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let mut color = vec![Color::White; n];
    let mut kept_edges: Vec<(u32, u32)> = Vec::new();
    let mut stack: Vec<(u32, usize)> = vec![(cfg.entry(), 0)];
    color[cfg.entry() as usize] = Color::Gray;
    while let Some(&mut (v, ref mut next)) = stack.last_mut() {
        let succs = cfg.successors(v);
        if *next < succs.len() {
            let w = succs[*next];
            *next += 1;
            match color[w as usize] {
                Color::Gray => {} // back edge, dropped
                Color::Black => kept_edges.push((v, w)),
                Color::White => {
                    kept_edges.push((v, w));
                    color[w as usize] = Color::Gray;
                    stack.push((w, 0));
                }
            }
        } else {
            color[v as usize] = Color::Black;
            stack.pop();
        }
    }

    // Longest-path layering over the remaining acyclic edges.
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(u, w) in &kept_edges {
        out[u as usize].push(w);
        indeg[w as usize] += 1;
    }
    let mut layer = vec![0u32; n];
    let mut ready: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
    while let Some(v) = ready.pop() {
        for &w in &out[v as usize] {
            layer[w as usize] = layer[w as usize].max(layer[v as usize] + 1);
            indeg[w as usize] -= 1;
            if indeg[w as usize] == 0 {
                ready.push(w);
            }
        }
    }
    layer
}

fn stretched(x: f64) -> f64 {
    x.min(EXP_ARG_CAP).exp() - 1.0
}

/// Potential of every vertex under the given objective kind.
pub fn vertex_potential(
    kind: ObjectiveKind,
    n: usize,
    entry: u32,
    geometry: &ObjectiveGeometry,
) -> Result<Vec<f64>> {
    let metric = || {
        geometry
            .metric
            .filter(|m| m.len() == n)
            .ok_or_else(|| Error::State("vertex metric missing or stale".into()))
    };
    let hops = || {
        geometry
            .entry_hops
            .filter(|h| h.len() == n)
            .ok_or_else(|| Error::State("entry hop distances missing or stale".into()))
    };
    let layers = || {
        geometry
            .depth_layers
            .filter(|l| l.len() == n)
            .ok_or_else(|| Error::State("depth layers missing or stale".into()))
    };
    let base: Vec<f64> = match kind {
        ObjectiveKind::HitProbFromEntry | ObjectiveKind::ExpHitProbFromEntry => {
            let m = metric()?;
            (0..n as u32).map(|v| m.get(entry, v)).collect()
        }
        ObjectiveKind::HopFromEntry | ObjectiveKind::ExpHopFromEntry => {
            hops()?.iter().map(|&h| h as f64).collect()
        }
        ObjectiveKind::DrawingDepth | ObjectiveKind::ExpDrawingDepth => {
            layers()?.iter().map(|&l| l as f64).collect()
        }
        ObjectiveKind::Constant => vec![0.0; n],
    };
    Ok(match kind {
        ObjectiveKind::ExpHitProbFromEntry
        | ObjectiveKind::ExpHopFromEntry
        | ObjectiveKind::ExpDrawingDepth => base.into_iter().map(stretched).collect(),
        _ => base,
    })
}

/// Score of a path: the maximum potential among its vertices. Campaigns
/// maximize this value.
pub fn path_objective(vertices: &[u32], potentials: &[f64]) -> f64 {
    vertices
        .iter()
        .map(|&v| potentials[v as usize])
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{entry_hop_distances, estimate_chain, hitting_prob_metric, EdgeCounts};
    use crate::toylang::{Stmt, ToyProgram};

    fn straight_line() -> ToyProgram {
        ToyProgram::from_statements(vec![Stmt::assign(), Stmt::assign()], 8).unwrap()
    }

    fn hitprob_metric(p: &ToyProgram) -> MetricMatrix {
        let counts = EdgeCounts::new(p.cfg.len());
        let chain = estimate_chain(&counts, &p.cfg.adjacency_matrix(), 0.5).unwrap();
        hitting_prob_metric(&chain, 0.5).unwrap()
    }

    #[test]
    fn hop_potentials_count_steps_from_entry() {
        let p = straight_line();
        let hops = entry_hop_distances(&p.cfg);
        let geom = ObjectiveGeometry {
            entry_hops: Some(&hops),
            ..Default::default()
        };
        let pot = vertex_potential(ObjectiveKind::HopFromEntry, p.cfg.len(), 0, &geom).unwrap();
        assert_eq!(pot, vec![0.0, 1.0, 2.0, 3.0]);
        let exp = vertex_potential(ObjectiveKind::ExpHopFromEntry, p.cfg.len(), 0, &geom).unwrap();
        assert!((exp[2] - (2.0f64.exp() - 1.0)).abs() < 1e-12);
        assert_eq!(exp[0], 0.0);
    }

    #[test]
    fn entry_potential_is_zero_for_every_kind() {
        let p = straight_line();
        let metric = hitprob_metric(&p);
        let hops = entry_hop_distances(&p.cfg);
        let layers = drawing_depth_layers(&p.cfg);
        let geom = ObjectiveGeometry {
            metric: Some(&metric),
            entry_hops: Some(&hops),
            depth_layers: Some(&layers),
        };
        for kind in ObjectiveKind::ALL {
            let pot = vertex_potential(kind, p.cfg.len(), 0, &geom).unwrap();
            assert_eq!(pot[0], 0.0, "{kind}");
            assert!(pot.iter().all(|&v| v >= 0.0), "{kind}");
        }
    }

    #[test]
    fn constant_kind_needs_no_geometry() {
        let pot =
            vertex_potential(ObjectiveKind::Constant, 5, 0, &ObjectiveGeometry::default())
                .unwrap();
        assert_eq!(pot, vec![0.0; 5]);
    }

    #[test]
    fn missing_geometry_is_a_state_error() {
        let geom = ObjectiveGeometry::default();
        for kind in [
            ObjectiveKind::HitProbFromEntry,
            ObjectiveKind::HopFromEntry,
            ObjectiveKind::DrawingDepth,
        ] {
            assert!(matches!(
                vertex_potential(kind, 3, 0, &geom),
                Err(Error::State(_))
            ));
        }
    }

    #[test]
    fn branch_layers_follow_the_longest_path() {
        let p = ToyProgram::from_statements(vec![Stmt::if_eq(1, vec![], vec![])], 8).unwrap();
        // entry, branch, two arms, join, exit
        assert_eq!(drawing_depth_layers(&p.cfg), vec![0, 1, 2, 2, 3, 4]);
    }

    #[test]
    fn loop_layers_ignore_back_edges() {
        let p =
            ToyProgram::from_statements(vec![Stmt::while_neq(vec![])], 8).unwrap();
        // entry, loop header, increment block, exit
        assert_eq!(drawing_depth_layers(&p.cfg), vec![0, 1, 2, 2]);
    }

    #[test]
    fn paths_score_their_deepest_vertex() {
        let potentials = [0.0, 1.0, 5.0, 2.0];
        assert_eq!(path_objective(&[0, 1, 3], &potentials), 2.0);
        assert_eq!(path_objective(&[0, 1, 2, 1, 3], &potentials), 5.0);
        assert_eq!(path_objective(&[0], &potentials), 0.0);
    }

    #[test]
    fn superset_paths_never_score_lower() {
        let potentials = [0.0, 3.0, 1.0, 4.0];
        let small = path_objective(&[0, 2], &potentials);
        let big = path_objective(&[0, 2, 1], &potentials);
        assert!(big >= small);
    }

    #[test]
    fn exponential_stretch_preserves_the_argmax() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let hops: Vec<u32> = (0..12).map(|_| rng.random_range(0..40)).collect();
        let geom = ObjectiveGeometry {
            entry_hops: Some(&hops),
            ..Default::default()
        };
        let base = vertex_potential(ObjectiveKind::HopFromEntry, 12, 0, &geom).unwrap();
        let exp = vertex_potential(ObjectiveKind::ExpHopFromEntry, 12, 0, &geom).unwrap();
        for _ in 0..20 {
            let len = rng.random_range(1..6);
            let path: Vec<u32> = (0..len).map(|_| rng.random_range(0..12)).collect();
            let phi_base = path_objective(&path, &base);
            let phi_exp = path_objective(&path, &exp);
            assert_eq!(phi_exp, stretched(phi_base));
        }
    }

    #[test]
    fn huge_potentials_stay_finite() {
        assert!(stretched(1400.0).is_finite());
        assert_eq!(stretched(0.0), 0.0);
    }

    #[test]
    fn letters_and_names_stay_aligned() {
        assert_eq!(ObjectiveKind::HitProbFromEntry.letter(), 'a');
        assert_eq!(ObjectiveKind::Constant.letter(), 'g');
        assert_eq!(ObjectiveKind::ExpHitProbFromEntry.cli_name(), "exp-hitprob");
        let parsed: ObjectiveKind = serde_json::from_str("\"exp-depth\"").unwrap();
        assert_eq!(parsed, ObjectiveKind::ExpDrawingDepth);
        assert_eq!(
            serde_json::to_string(&ObjectiveKind::HopFromEntry).unwrap(),
            "\"hop\""
        );
    }
}
