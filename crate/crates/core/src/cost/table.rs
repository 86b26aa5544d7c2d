use std::fmt::Write;

use serde::Serialize;

use super::{scenario_cost, Architecture, CostParams, Scenario, ShiftCost};

#[derive(Debug, Clone, Serialize)]
pub struct CostCell {
    pub arch: Architecture,
    #[serde(flatten)]
    pub cost: ShiftCost,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostRow {
    pub scenario: Scenario,
    pub cells: Vec<CostCell>,
    /// Architectures from cheapest to dearest, e.g. `MMW < 2LMW < 1LMW`.
    pub ordering: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostGrid {
    pub n: u32,
    pub rows: Vec<CostRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostTable {
    pub params: CostParams,
    pub grids: Vec<CostGrid>,
}

fn ordering(cells: &[CostCell]) -> String {
    let mut sorted: Vec<&CostCell> = cells.iter().collect();
    sorted.sort_by(|a, b| a.cost.numeric.cmp(&b.cost.numeric).then(a.arch.cmp(&b.arch)));
    let mut out = String::new();
    for (i, c) in sorted.iter().enumerate() {
        if i > 0 {
            out += if sorted[i - 1].cost.numeric == c.cost.numeric {
                " = "
            } else {
                " < "
            };
        }
        out += c.arch.as_str();
    }
    out
}

/// The scenario by architecture grid for every `N` in `ns`.
pub fn compare_table(params: &CostParams, ns: &[u32]) -> CostTable {
    compare_selected(params, ns, &Scenario::ALL, &Architecture::ALL)
}

pub(crate) fn compare_selected(
    params: &CostParams,
    ns: &[u32],
    scenarios: &[Scenario],
    archs: &[Architecture],
) -> CostTable {
    let grids = ns
        .iter()
        .map(|&n| CostGrid {
            n,
            rows: scenarios
                .iter()
                .map(|&scenario| {
                    let cells: Vec<CostCell> = archs
                        .iter()
                        .map(|&arch| CostCell {
                            arch,
                            cost: scenario_cost(arch, scenario, n, params),
                        })
                        .collect();
                    CostRow {
                        scenario,
                        ordering: ordering(&cells),
                        cells,
                    }
                })
                .collect(),
        })
        .collect();
    CostTable { params: *params, grids }
}

impl CostTable {
    pub fn select(params: &CostParams, ns: &[u32], scenarios: &[Scenario], archs: &[Architecture]) -> Self {
        compare_selected(params, ns, scenarios, archs)
    }

    /// Aligned text, one block per `N`.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for grid in &self.grids {
            let Some(first) = grid.rows.first() else { continue };
            let mut header = vec!["Sc.".to_string()];
            header.extend(first.cells.iter().map(|c| c.arch.to_string()));
            header.push("ordering".into());
            let mut lines = vec![header];
            for row in &grid.rows {
                let mut line = vec![row.scenario.number().to_string()];
                line.extend(
                    row.cells
                        .iter()
                        .map(|c| format!("{} = {}", c.cost.symbolic, super::format_rational(&c.cost.numeric))),
                );
                line.push(row.ordering.clone());
                lines.push(line);
            }
            let widths: Vec<usize> = (0..lines[0].len())
                .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
                .collect();
            let _ = writeln!(out, "N = {}", grid.n);
            for line in &lines {
                let cells: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            }
            out.push('\n');
        }
        out
    }
}
