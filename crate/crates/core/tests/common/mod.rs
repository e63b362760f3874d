#![allow(dead_code)]

use std::path::{Path, PathBuf};

use finrep_core::pipeline::{run_pipeline, PipelineConfig, RunOutcome};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// The fixture run config, redirected into `out`.
pub fn fixture_config(out: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::load(&fixtures().join("run.toml")).expect("fixture config loads");
    config.output_dir = out.to_path_buf();
    config
}

pub fn run_fixtures(out: &Path) -> RunOutcome {
    run_pipeline(&fixture_config(out)).expect("fixture run succeeds")
}

use chrono::NaiveDate;
use finrep_core::ontology::Aggregation;
use finrep_core::package::TextSpan;
use finrep_core::xbrl::{ContextMap, FiscalPeriod, Period, ReportingContext, TaggedFact};
use rust_decimal::Decimal;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn fiscal_year() -> FiscalPeriod {
    FiscalPeriod {
        start: date(2023, 4, 1),
        end: date(2024, 3, 31),
    }
}

/// Contexts mixing instants and durations, on and off the fiscal year,
/// consolidated and separate.
pub fn context_pool() -> ContextMap {
    let periods = [
        Period::Instant {
            date: date(2024, 3, 31),
        },
        Period::Instant {
            date: date(2023, 3, 31),
        },
        Period::Duration {
            start: date(2023, 4, 1),
            end: date(2024, 3, 31),
        },
        Period::Duration {
            start: date(2023, 4, 2),
            end: date(2024, 3, 31),
        },
        Period::Duration {
            start: date(2022, 4, 1),
            end: date(2023, 3, 31),
        },
    ];
    let mut map = ContextMap::new();
    for (i, period) in periods.iter().enumerate() {
        for consolidated in [true, false] {
            let id = format!("c{}{}", i, if consolidated { "" } else { "s" });
            map.insert(
                id.clone(),
                ReportingContext {
                    context_id: id,
                    entity_id: "E00001".into(),
                    period: *period,
                    consolidated,
                },
            );
        }
    }
    map
}

pub fn fact(tag: &str, context_id: &str, decimals: i32, value: i64) -> TaggedFact {
    TaggedFact {
        tag: tag.into(),
        context_id: context_id.into(),
        unit: "JPY".into(),
        scale_decimals: decimals,
        value: Decimal::from(value),
        span: TextSpan::new(0, 0),
    }
}

/// Brute-force selection: the eligible fact that no other eligible fact
/// beats on (precision desc, context id, tag, value).
pub fn oracle_select<'a>(
    facts: &[&'a TaggedFact],
    contexts: &ContextMap,
    aggregation: Aggregation,
    fy: FiscalPeriod,
    require_consolidated: bool,
) -> (Option<&'a TaggedFact>, usize) {
    let expected = match aggregation {
        Aggregation::Point => Period::Instant { date: fy.end },
        Aggregation::Flow => Period::Duration {
            start: fy.start,
            end: fy.end,
        },
    };
    let eligible: Vec<&TaggedFact> = facts
        .iter()
        .copied()
        .filter(|f| {
            contexts
                .get(&f.context_id)
                .is_some_and(|c| c.consolidated == require_consolidated && c.period == expected)
        })
        .collect();
    let beats = |g: &TaggedFact, f: &TaggedFact| {
        (std::cmp::Reverse(g.scale_decimals), &g.context_id, &g.tag, g.value)
            < (std::cmp::Reverse(f.scale_decimals), &f.context_id, &f.tag, f.value)
    };
    let winner = eligible.iter().copied().find(|f| eligible.iter().all(|g| !beats(g, f)));
    let tied = winner.map_or(0, |w| {
        eligible.iter().filter(|g| g.scale_decimals == w.scale_decimals).count()
    });
    (winner, tied)
}

/// Identity of a fact by content, ignoring its span.
pub fn fact_key(f: &TaggedFact) -> (String, String, i32, Decimal) {
    (f.tag.clone(), f.context_id.clone(), f.scale_decimals, f.value)
}

/// Negative notations a rendered figure may use.
#[derive(Debug, Clone, Copy)]
pub enum NegativeStyle {
    Parens,
    FullWidthParens,
    Minus,
    Triangle,
    MathMinus,
}

pub const NEGATIVE_STYLES: [NegativeStyle; 5] = [
    NegativeStyle::Parens,
    NegativeStyle::FullWidthParens,
    NegativeStyle::Minus,
    NegativeStyle::Triangle,
    NegativeStyle::MathMinus,
];

/// Renders `mantissa / 10^frac` the way a statement cell might show it.
pub fn render_figure(
    mantissa: i64,
    frac: u32,
    separator: Option<char>,
    full_width: bool,
    style: NegativeStyle,
) -> String {
    let digits = mantissa.unsigned_abs().to_string();
    let frac = frac as usize;
    let padded = format!("{digits:0>width$}", width = frac + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - frac);

    let mut grouped = String::new();
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            if let Some(sep) = separator {
                grouped.push(sep);
            }
        }
        grouped.push(c);
    }
    let mut body = grouped;
    if frac > 0 {
        body.push(if full_width { '．' } else { '.' });
        body.push_str(frac_part);
    }
    if full_width {
        body = body
            .chars()
            .map(|c| match c {
                '0'..='9' => char::from_u32(c as u32 - '0' as u32 + '０' as u32).unwrap(),
                other => other,
            })
            .collect();
    }
    if mantissa >= 0 {
        return body;
    }
    match style {
        NegativeStyle::Parens => format!("({body})"),
        NegativeStyle::FullWidthParens => format!("（{body}）"),
        NegativeStyle::Minus => format!("-{body}"),
        NegativeStyle::Triangle => format!("△{body}"),
        NegativeStyle::MathMinus => format!("−{body}"),
    }
}
