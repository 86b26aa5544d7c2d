use mmw_core::cost::{format_rational, overhead_cost, validate_params, Architecture, CostParams, CostTable, Scenario};
use serde_json::json;

use crate::{inline_or_file, Failure, Format, Outcome};

pub const SAMPLE_LABEL: &str = "arbitrary sample values";

/// Parses `--params`, falling back to the sample binding. Returns whether
/// the sample was used.
pub fn load_params(arg: Option<&str>) -> Result<(CostParams, bool), Failure> {
    let Some(arg) = arg else {
        return Ok((CostParams::sample(), true));
    };
    let text = inline_or_file(arg)?;
    let params: CostParams =
        serde_json::from_str(&text).map_err(|e| Failure::Rejected(format!("bad cost parameters: {e}")))?;
    let violations = validate_params(&params);
    if !violations.is_empty() {
        let lines: Vec<String> = violations
            .iter()
            .map(|v| format!("[{}] {}", v.rule, v.detail))
            .collect();
        return Err(Failure::Rejected(format!(
            "cost parameters rejected:\n  {}",
            lines.join("\n  ")
        )));
    }
    Ok((params, false))
}

fn scenarios(arg: &str) -> Result<Vec<Scenario>, Failure> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(Scenario::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<u8>()
                .ok()
                .and_then(|n| Scenario::try_from(n).ok())
                .ok_or_else(|| Failure::Rejected(format!("invalid-scenario: `{s}`")))
        })
        .collect()
}

fn archs(arg: &str) -> Result<Vec<Architecture>, Failure> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(Architecture::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Failure::Rejected(format!("unknown architecture `{s}`")))
        })
        .collect()
}

/// `3`, `1..5` (inclusive), `1..=5`, `1-5` or a comma list of those.
pub fn widths(arg: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::Rejected(format!("bad --n `{arg}`"));
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad());
    let mut out = Vec::new();
    for part in arg.split(',') {
        let range = part
            .split_once("..=")
            .or_else(|| part.split_once(".."))
            .or_else(|| part.split_once('-'));
        match range {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(bad());
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(part)?),
        }
    }
    if out.contains(&0) {
        return Err(Failure::Rejected("N counts wrappers and must be at least 1".into()));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn cost(params: Option<&str>, scenario: &str, arch: &str, n: &str, format: Format) -> Outcome {
    let (params, sample) = load_params(params)?;
    let mut scenarios = scenarios(scenario)?;
    scenarios.sort();
    scenarios.dedup();
    let mut archs = archs(arch)?;
    archs.sort();
    archs.dedup();
    let ns = widths(n)?;
    let table = CostTable::select(&params, &ns, &scenarios, &archs);
    let layered: Vec<Architecture> = archs.iter().copied().filter(|a| *a != Architecture::OneLayer).collect();
    let source = if sample { SAMPLE_LABEL } else { "given" };

    match format {
        Format::Json => {
            let overheads: Vec<_> = layered
                .iter()
                .map(|&a| json!({"arch": a, "cost": overhead_cost(a, ns[0], &params)}))
                .collect();
            let doc = json!({
                "params_source": source,
                "params": table.params,
                "grids": table.grids,
                "overhead": overheads,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        Format::Text => {
            let binding: Vec<String> = mmw_core::cost::Term::ALL
                .iter()
                .map(|t| format!("{}={}", t.name(), format_rational(&params.get(*t))))
                .collect();
            println!("params ({source}): {}", binding.join(" "));
            println!();
            print!("{}", table.render_text());
            if !layered.is_empty() {
                println!("overhead over 1LMW when adding a mediation:");
                for a in &layered {
                    let c = overhead_cost(*a, ns[0], &params);
                    println!("  {a}: {} = {}", c.symbolic, format_rational(&c.numeric));
                }
            }
        }
    }
    Ok(())
}
