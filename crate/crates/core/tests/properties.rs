mod common;

use std::collections::{BTreeMap, BTreeSet};

use finrep_core::audit::CompanyAudit;
use finrep_core::guardrail::{
    apply_decision, evaluate_response, CheckName, Decision, VerifierRequest, VerifierResponse, PROTOCOL_VERSION,
};
use finrep_core::mapping::{
    assemble_bundle, map_to_canonical, BundleMetadata, FieldStatus, MappingInput, StatementBundle,
};
use finrep_core::metrics::percent;
use finrep_core::ontology::{Aggregation, Jurisdiction, OntologyCatalog};
use finrep_core::table::{normalize_number, NumericCell, UnitScale};
use finrep_core::xbrl::select_fact;
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::sample::select;
use rust_decimal::{Decimal, RoundingStrategy};

use common::{context_pool, fact, fact_key, fiscal_year, oracle_select, render_figure, NEGATIVE_STYLES};

const CONTEXT_IDS: [&str; 10] = ["c0", "c0s", "c1", "c1s", "c2", "c2s", "c3", "c3s", "c4", "c4s"];

fn fact_strategy() -> impl Strategy<Value = (usize, i32, i64, usize)> {
    (0..CONTEXT_IDS.len(), -6i32..=0, -5i64..=5, 0usize..2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_recovers_rendered_figures(
        mantissa in -999_999_999_999i64..=999_999_999_999,
        frac in 0u32..=3,
        exponent in select(vec![0u32, 3, 4, 6, 8]),
        separator in select(vec![None, Some(','), Some('，'), Some('\u{2009}')]),
        full_width in any::<bool>(),
        style in select(NEGATIVE_STYLES.to_vec()),
    ) {
        let text = render_figure(mantissa, frac, separator, full_width, style);
        let scale = UnitScale::from_exponent(exponent).unwrap();
        let expected = Decimal::new(mantissa, frac) * Decimal::from(10i64.pow(exponent));
        prop_assert_eq!(normalize_number(&text, scale), NumericCell::Value(expected), "{}", text);
    }

    #[test]
    fn select_fact_matches_oracle_and_ignores_order(
        specs in prop::collection::vec(fact_strategy(), 0..8),
        point in any::<bool>(),
        require_consolidated in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let contexts = context_pool();
        let facts: Vec<_> = specs
            .iter()
            .map(|(c, d, v, t)| fact(["t:A", "t:B"][*t], CONTEXT_IDS[*c], *d, *v * 1000))
            .collect();
        let catalog = OntologyCatalog::default_catalog();
        let concept = catalog.concept(if point { "total_assets" } else { "revenue" }).unwrap();
        let aggregation = if point { Aggregation::Point } else { Aggregation::Flow };
        let fy = fiscal_year();

        let selected = select_fact(&facts, &contexts, concept, fy, require_consolidated);
        let refs: Vec<_> = facts.iter().collect();
        let (expected, tied) = oracle_select(&refs, &contexts, aggregation, fy, require_consolidated);
        prop_assert_eq!(selected.fact.map(fact_key), expected.map(fact_key));
        let duplicates = selected
            .anomalies
            .iter()
            .filter(|a| a.kind == finrep_core::anomaly::AnomalyKind::DuplicateFact)
            .count();
        prop_assert_eq!(duplicates, usize::from(tied > 1));

        let mut shuffled = facts.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            let j = (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize;
            shuffled.swap(i, j);
        }
        let again = select_fact(&shuffled, &contexts, concept, fy, require_consolidated);
        prop_assert_eq!(again.fact.map(fact_key), selected.fact.map(fact_key));
        prop_assert_eq!(again.anomalies.len(), selected.anomalies.len());
    }

    #[test]
    fn identity_checks_are_scale_covariant(
        current in 1i64..1_000_000,
        noncurrent in 1i64..1_000_000,
        liabilities_share in 0u32..=100,
        skew in -50i64..=50,
        exponent in 0u32..=8,
    ) {
        let catalog = OntologyCatalog::default_catalog();
        let assets = current + noncurrent;
        let liabilities = assets * i64::from(liabilities_share) / 100;
        let equity = assets - liabilities + skew;
        let scale = Decimal::from(10i64.pow(exponent));
        let values: BTreeMap<String, Decimal> = [
            ("total_assets", assets),
            ("current_assets", current),
            ("noncurrent_assets", noncurrent),
            ("total_liabilities", liabilities),
            ("total_equity", equity),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), Decimal::from(v) * scale))
        .collect();

        let report = catalog.check_identities(&values);
        let residual = Decimal::from(-skew) * scale;
        let threshold = Decimal::new(1, 4) * (Decimal::from(assets) * scale).max(Decimal::ONE);
        let violated: Vec<_> = report.violations.iter().map(|v| v.rule_id.as_str()).collect();
        if residual.abs() > threshold {
            prop_assert_eq!(violated, vec!["balance_sheet"]);
            prop_assert_eq!(report.violations[0].residual, residual);
        } else {
            prop_assert!(violated.is_empty());
        }
        prop_assert!(report.satisfied.contains(&"asset_rollup".to_string()));
    }

    #[test]
    fn mapping_is_total(
        picks in prop::collection::vec((0usize..64, -1_000_000i64..1_000_000, any::<bool>()), 0..40),
        na in prop::collection::btree_set(0usize..18, 0..4),
        market in select(vec![Jurisdiction::US, Jurisdiction::JP, Jurisdiction::CN]),
    ) {
        let catalog = OntologyCatalog::default_catalog();
        let ids: Vec<String> = catalog.concepts.iter().map(|c| c.concept_id.clone()).collect();
        let labels: Vec<String> = catalog
            .aliases
            .iter()
            .filter(|a| a.jurisdiction == market)
            .map(|a| a.pattern.clone())
            .chain(["Unrelated line".to_string(), "其他".to_string()])
            .collect();
        let items: Vec<MappingInput> = picks
            .iter()
            .map(|(i, v, parses)| MappingInput {
                raw_label: labels[i % labels.len()].clone(),
                raw_value: Some(v.to_string()),
                value: if *parses { NumericCell::Value(Decimal::from(*v)) } else { NumericCell::ParseError },
                currency: None,
                evidence: None,
            })
            .collect();
        let not_applicable: BTreeSet<String> = na.iter().map(|i| ids[*i].clone()).collect();
        let outcome = map_to_canonical(&items, &catalog, market, &not_applicable, "XXX");

        prop_assert_eq!(outcome.fields.len(), ids.len());
        let seen: BTreeSet<&str> = outcome.fields.iter().map(|f| f.concept_id.as_str()).collect();
        prop_assert_eq!(seen.len(), ids.len());
        for f in &outcome.fields {
            prop_assert!(f.is_coherent(), "{:?}", f);
            if not_applicable.contains(&f.concept_id) {
                prop_assert_eq!(f.status, FieldStatus::NotApplicable);
            }
        }
        let mapped = items
            .iter()
            .filter(|i| catalog.lookup_by_alias(market, &finrep_core::mapping::normalize_label(&i.raw_label)).is_some())
            .count();
        prop_assert_eq!(outcome.extras.len(), items.len() - mapped);
    }

    #[test]
    fn adversarial_responses_never_bypass_checks(
        status in select(FieldStatus::ALL.to_vec()),
        claimed in select(vec![Decision::Keep, Decision::Repair, Decision::NeedReview]),
        value in prop::option::of(-100_000i64..100_000),
        quote in prop::option::of(prop_oneof![
            Just("营业收入 1,234".to_string()),
            Just("净利润 (12)".to_string()),
            Just("  营业收入\t1,234  ".to_string()),
            Just(String::new()),
            "[0-9,()△ 营业收入]{0,12}",
        ]),
        exponent in select(vec![0u32, 4]),
    ) {
        let catalog = OntologyCatalog::default_catalog();
        let mut bundle = single_field_bundle(&catalog, "revenue", status);
        let field = bundle.field("revenue").unwrap().clone();
        let request = VerifierRequest {
            protocol: PROTOCOL_VERSION.into(),
            market: Jurisdiction::CN,
            company_id: "600001".into(),
            field: field.clone(),
            concept: catalog.concept("revenue").unwrap().clone(),
            excerpt: "#STATEMENT IS\n项目\t2023年\n营业收入\t1,234\n净利润\t(12)\n".into(),
            unit_scale: UnitScale::from_exponent(exponent).unwrap(),
        };
        let response = VerifierResponse {
            claimed_decision: claimed,
            proposed_value: value.map(Decimal::from),
            evidence_quote: quote,
            rationale: String::new(),
        };
        let result = evaluate_response(&field, &response, &request);

        match claimed {
            Decision::Repair => {
                let failed: Vec<CheckName> = result.failed_checks().map(|c| c.name).collect();
                if result.final_decision == Decision::Repair {
                    prop_assert!(failed.is_empty());
                    prop_assert_eq!(result.checks.len(), 3);
                    prop_assert_eq!(result.applied_value, response.proposed_value);
                } else {
                    prop_assert_eq!(result.final_decision, Decision::NeedReview);
                    prop_assert!(!failed.is_empty());
                    prop_assert_eq!(result.applied_value, None);
                }
            }
            other => {
                prop_assert_eq!(result.final_decision, other);
                prop_assert_eq!(result.applied_value, None);
            }
        }

        let mut audit = CompanyAudit::new(Jurisdiction::CN, "600001");
        apply_decision(&mut bundle, "revenue", &result, Some(&request.excerpt), &mut audit).unwrap();
        let after = bundle.field("revenue").unwrap();
        prop_assert!(after.is_coherent());
        if result.final_decision != Decision::Repair {
            prop_assert_eq!((after.status, after.value), (field.status, field.value));
        }
        prop_assert_eq!(audit.queue.len(), usize::from(result.final_decision == Decision::NeedReview));
        prop_assert_eq!(audit.trail.len(), 1);
    }

    #[test]
    fn percent_rounds_half_up(n in 1u64..=100_000, k_frac in 0.0f64..=1.0) {
        let k = ((n as f64) * k_frac) as u64;
        let exact = Decimal::from(k) * Decimal::from(100) / Decimal::from(n);
        let expected = exact.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
        prop_assert_eq!(percent(Ratio::new(k, n)), expected);
    }
}

fn single_field_bundle(catalog: &OntologyCatalog, concept_id: &str, status: FieldStatus) -> StatementBundle {
    let na: BTreeSet<String> = if status == FieldStatus::NotApplicable {
        [concept_id.to_string()].into()
    } else {
        BTreeSet::new()
    };
    let items = match status {
        FieldStatus::Ok => vec![input("营业收入", NumericCell::Value(Decimal::from(1234)))],
        FieldStatus::ParseError => vec![input("营业收入", NumericCell::ParseError)],
        _ => Vec::new(),
    };
    let outcome = map_to_canonical(&items, catalog, Jurisdiction::CN, &na, "CNY");
    let metadata = BundleMetadata {
        market: Jurisdiction::CN,
        company_id: "600001".into(),
        entity_name: String::new(),
        fiscal_year: 2023,
        fiscal_year_start: common::date(2023, 1, 1),
        fiscal_year_end: common::date(2023, 12, 31),
        currency: "CNY".into(),
        accounting_standard: "CAS".into(),
        filing_date: None,
        document_locator: "CN/600001/tables.txt".into(),
    };
    let bundle = assemble_bundle(outcome.fields, outcome.extras, metadata, catalog).unwrap();
    assert_eq!(bundle.field(concept_id).unwrap().status, status);
    bundle
}

fn input(label: &str, value: NumericCell) -> MappingInput {
    MappingInput {
        raw_label: label.into(),
        raw_value: Some("1,234".into()),
        value,
        currency: None,
        evidence: None,
    }
}
