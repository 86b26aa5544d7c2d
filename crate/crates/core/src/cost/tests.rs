use num_rational::Rational64;

use super::*;
use crate::topology::{Edit, EditLog};

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn rules(p: &CostParams) -> Vec<&'static str> {
    validate_params(p).into_iter().map(|v| v.rule).collect()
}

#[test]
fn sample_params_are_valid() {
    assert!(validate_params(&CostParams::sample()).is_empty());
}

#[test]
fn equal_mediator_and_mask_deployment_is_rejected() {
    let mut p = CostParams::sample();
    p.ma_depl = p.me_depl;
    assert!(rules(&p).contains(&"me-depl-over-ma"));
}

#[test]
fn all_zero_params_break_every_strict_inequality() {
    assert_eq!(
        rules(&CostParams::zero()),
        vec![
            "me-impl-over-me-prime",
            "me-depl-over-me-prime",
            "me-depl-over-ma",
            "me-impl-over-ma"
        ]
    );
}

#[test]
fn negative_costs_are_reported() {
    let mut p = CostParams::sample();
    p.w_depl = r(-1);
    assert_eq!(rules(&p), vec!["non-negative"]);
}

#[test]
fn term_order_is_name_order() {
    let names: Vec<&str> = Term::ALL.iter().map(Term::name).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for t in Term::ALL {
        assert_eq!(Term::from_name(t.name()), Some(t));
    }
}

#[test]
fn sample_scenario_values() {
    let p = CostParams::sample();
    use Architecture::*;
    use Scenario::*;
    assert_eq!(scenario_cost(OneLayer, RepresentationType, 3, &p).numeric, r(21));
    assert_eq!(scenario_cost(Mmw, RepresentationType, 3, &p).numeric, r(10));
    for arch in Architecture::ALL {
        for n in [1, 3, 9] {
            assert_eq!(scenario_cost(arch, Wrapper, n, &p).numeric, r(4));
        }
    }
}

#[test]
fn canonical_forms() {
    use Architecture::*;
    use Scenario::*;
    let cases = [
        (OneLayer, RepresentationType, "N*C_Conn_set + C_Me_depl + C_Me_impl"),
        (TwoLayer, RepresentationType, "C_Conn_set + C_Me_depl + C_Me_impl"),
        (Mmw, RepresentationType, "C_Conn_set + C_Ma_depl + C_Ma_impl"),
        (TwoLayer, Mediation, "(N+1)*C_Conn_set + 2*C_Me_depl"),
        (Mmw, Mediation, "(N+1)*C_Conn_set + C_Ma_depl + C_MePrime_depl"),
        (Mmw, Wrapper, "C_Conn_set + C_W_depl"),
    ];
    for (arch, scenario, text) in cases {
        assert_eq!(scenario_expr(arch, scenario).canonical(), text, "{arch} {scenario:?}");
    }
    assert_eq!(
        overhead_expr(Mmw).canonical(),
        "C_Conn_set + C_Ma_depl + C_MePrime_depl - C_Me_depl"
    );
    assert_eq!(Expr::zero().canonical(), "0");
}

#[test]
fn coefficient_display() {
    let c = |constant, per_n| Coefficient { constant, per_n }.to_string();
    assert_eq!(c(1, 0), "");
    assert_eq!(c(3, 0), "3");
    assert_eq!(c(0, 1), "N");
    assert_eq!(c(0, 2), "2N");
    assert_eq!(c(1, 1), "(N+1)");
    assert_eq!(c(-1, 2), "(2N-1)");
}

#[test]
fn overheads_under_sample_params() {
    let p = CostParams::sample();
    assert_eq!(overhead_cost(Architecture::TwoLayer, 3, &p).numeric, r(9));
    assert_eq!(overhead_cost(Architecture::Mmw, 3, &p).numeric, r(2));
}

#[test]
fn overhead_is_the_mediation_difference() {
    let p = CostParams::sample();
    for arch in Architecture::ALL {
        let diff =
            scenario_expr(arch, Scenario::Mediation) - scenario_expr(Architecture::OneLayer, Scenario::Mediation);
        assert_eq!(diff, overhead_expr(arch), "{arch}");
        for n in 1..=10 {
            let numeric = scenario_cost(arch, Scenario::Mediation, n, &p).numeric
                - scenario_cost(Architecture::OneLayer, Scenario::Mediation, n, &p).numeric;
            assert_eq!(overhead_cost(arch, n, &p).numeric, numeric);
        }
    }
}

#[test]
fn table_rows_and_orderings() {
    let table = compare_table(&CostParams::sample(), &[1, 3]);
    let g3 = &table.grids[1];
    assert_eq!(g3.n, 3);
    let row1: Vec<Rational64> = g3.rows[0].cells.iter().map(|c| c.cost.numeric).collect();
    assert_eq!(row1, vec![r(21), r(19), r(10)]);
    assert_eq!(g3.rows[0].ordering, "MMW < 2LMW < 1LMW");
    assert_eq!(g3.rows[3].ordering, "1LMW = 2LMW = MMW");

    let g1 = &table.grids[0];
    let one = g1.rows[0].cells[0].cost.symbolic.clone();
    let two = g1.rows[0].cells[1].cost.symbolic.clone();
    let diff = one - two;
    assert_eq!(diff.terms().map(|(t, _)| t).collect::<Vec<_>>(), vec![Term::ConnSet]);
    assert_eq!(g1.rows[0].ordering, "MMW < 1LMW = 2LMW");
}

#[test]
fn text_table_is_aligned() {
    let text = compare_table(&CostParams::sample(), &[3]).render_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N = 3");
    assert!(lines[1].starts_with("Sc. | 1LMW"));
    let bars = |l: &str| l.match_indices(" | ").map(|(i, _)| i).collect::<Vec<_>>();
    assert_eq!(bars(lines[2]), bars(lines[3]));
    assert!(lines[2].contains("N*C_Conn_set + C_Me_depl + C_Me_impl = 21"));
}

fn edit(action: Action, ty: &str) -> Edit {
    Edit {
        action,
        component_type: ty.into(),
        component: "x".into(),
        peer: None,
    }
}

#[test]
fn pricing_logs() {
    let p = CostParams::sample();
    assert_eq!(price_editlog(&EditLog::default(), &p).unwrap().numeric, r(0));
    let log = EditLog {
        edits: vec![
            edit(Action::Implement, "Ma"),
            edit(Action::Deploy, "Ma"),
            edit(Action::Connect, "Ma"),
        ],
    };
    let cost = price_editlog(&log, &p).unwrap();
    assert_eq!(
        cost.symbolic,
        scenario_expr(Architecture::Mmw, Scenario::RepresentationType)
    );
    assert_eq!(cost.numeric, r(10));

    let unknown = EditLog {
        edits: vec![edit(Action::Deploy, "Gateway")],
    };
    assert_eq!(
        price_editlog(&unknown, &p).unwrap_err().code(),
        "unknown-component-type"
    );
    let unpriced = EditLog {
        edits: vec![edit(Action::Implement, "W")],
    };
    assert_eq!(price_editlog(&unpriced, &p).unwrap_err().code(), "unpriced-action");
}

#[test]
fn rationals_parse_exactly() {
    assert_eq!(parse_rational("3"), Some(r(3)));
    assert_eq!(parse_rational("3/2"), Some(Rational64::new(3, 2)));
    assert_eq!(parse_rational("2.5"), Some(Rational64::new(5, 2)));
    assert_eq!(parse_rational("0.1"), Some(Rational64::new(1, 10)));
    assert_eq!(parse_rational("-.25"), Some(Rational64::new(-1, 4)));
    assert_eq!(parse_rational("x"), None);
    assert_eq!(parse_rational("."), None);
}

#[test]
fn params_json_round_trip() {
    let text = r#"{"C_Me_impl":10,"C_MePrime_impl":"6","C_Ma_impl":5,"C_Me_depl":8.5,
        "C_MePrime_depl":"5/2","C_Ma_depl":4,"C_W_depl":3,"C_Conn_set":0.1}"#;
    let p: CostParams = serde_json::from_str(text).unwrap();
    assert_eq!(p.me_depl, Rational64::new(17, 2));
    assert_eq!(p.conn_set, Rational64::new(1, 10));
    let back: CostParams = serde_json::from_value(serde_json::to_value(p).unwrap()).unwrap();
    assert_eq!(back, p);
    assert!(serde_json::from_str::<CostParams>(r#"{"C_Me_impl":1}"#).is_err());
}

#[test]
fn scenarios_from_numbers() {
    assert_eq!(Scenario::try_from(3).unwrap(), Scenario::Mediation);
    assert_eq!(Scenario::try_from(5).unwrap_err().code(), "invalid-scenario");
    assert_eq!("mmw".parse::<Architecture>().unwrap(), Architecture::Mmw);
}
