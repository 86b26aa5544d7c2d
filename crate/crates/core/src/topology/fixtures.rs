//! Reference layouts for the shift analysis and the scenario shifts applied
//! to them.

use serde_json::json;

use super::config::{Component, Edge, MaskComponentConfig, MaskKindName, MediatorConfig, SourceDef, Topology};
use super::shift::Shift;
use crate::cost::{Architecture, Scenario};
use crate::wrapper::{AdapterConfig, AdapterKind};

#[derive(Debug, Clone)]
pub struct AnalysisFixture {
    pub arch: Architecture,
    pub topology: Topology,
    /// One shift per scenario, in scenario order.
    pub shifts: Vec<Shift>,
}

impl AnalysisFixture {
    pub fn shift(&self, scenario: Scenario) -> &Shift {
        &self.shifts[scenario.number() as usize - 1]
    }
}

fn seeded_source(k: usize) -> SourceDef {
    SourceDef {
        id: format!("s{k}"),
        adapter: AdapterConfig {
            kind: AdapterKind::Mem,
            path: None,
            seed: Some(json!({
                "tables": [{
                    "name": "items",
                    "attributes": [
                        {"name": "id", "type": "integer"},
                        {"name": "label", "type": "string", "nullable": true}
                    ],
                    "rows": [[k, format!("item-{k}")]]
                }]
            })),
        },
    }
}

/// `wrappers` wrappers `w1..`, one lower mediator `me1..` per entry of
/// `mediations` (1-based wrapper numbers), plus the representation layer the
/// architecture calls for.
fn baseline(arch: Architecture, wrappers: usize, mediations: &[Vec<usize>]) -> Topology {
    let mut t = Topology::default();
    for k in 1..=wrappers {
        t.sources.push(seeded_source(k));
        t.components.push(Component::wrapper(format!("w{k}")));
        t.edges.push(Edge::new(format!("w{k}"), format!("s{k}")));
    }
    let representing = |arch: Architecture| MediatorConfig {
        representation: (arch == Architecture::OneLayer).then(|| "http".to_string()),
        ..MediatorConfig::default()
    };
    for (i, ws) in mediations.iter().enumerate() {
        let id = format!("me{}", i + 1);
        t.components.push(Component::mediator(&id, representing(arch)));
        for w in ws {
            t.edges.push(Edge::new(&id, format!("w{w}")));
        }
    }
    let m = mediations.len();
    for i in 1..=m {
        match arch {
            Architecture::OneLayer => {}
            Architecture::TwoLayer => {
                let id = format!("me{}", m + i);
                let config = MediatorConfig {
                    representation: Some("http".into()),
                    ..MediatorConfig::default()
                };
                t.components.push(Component::mediator(&id, config));
                t.edges.push(Edge::new(&id, format!("me{i}")));
            }
            Architecture::Mmw => {
                let id = format!("ma{i}");
                t.components
                    .push(Component::mask(&id, MaskComponentConfig::new(MaskKindName::Http)));
                t.edges.push(Edge::new(&id, format!("me{i}")));
            }
        }
    }
    t
}

fn shifts(s3_wrappers: Vec<String>) -> Vec<Shift> {
    vec![
        Shift::AddRepresentationType {
            over: "me3".into(),
            kind: "tabular".into(),
        },
        Shift::AddRepresentation {
            over: "me2".into(),
            kind: None,
        },
        Shift::AddMediation {
            wrappers: s3_wrappers,
            kind: None,
        },
        Shift::AddWrapper {
            mediator: "me3".into(),
            source: None,
        },
    ]
}

/// The four-wrapper analysis layout: `me1` over `w1`, `me2` over `w1, w2`,
/// `me3` over `w2..w4`.
pub fn analysis(arch: Architecture) -> AnalysisFixture {
    AnalysisFixture {
        arch,
        topology: baseline(arch, 4, &[vec![1], vec![1, 2], vec![2, 3, 4]]),
        shifts: shifts(vec!["w2".into(), "w3".into()]),
    }
}

/// Same shape with every shifted mediation spanning `n` wrappers:
/// `me2` over `w1..wn`, `me3` over `w2..w(n+1)`.
pub fn scaled(arch: Architecture, n: usize) -> AnalysisFixture {
    assert!(n >= 1, "a mediation spans at least one wrapper");
    let mediations = [vec![1], (1..=n).collect(), (2..=n + 1).collect()];
    AnalysisFixture {
        arch,
        topology: baseline(arch, n + 1, &mediations),
        shifts: shifts((2..=n + 1).map(|k| format!("w{k}")).collect()),
    }
}

/// File name of a shipped analysis fixture, relative to `fixtures/`.
pub fn analysis_file(arch: Architecture) -> String {
    format!("analysis-{}.json", arch.as_str().to_ascii_lowercase())
}
