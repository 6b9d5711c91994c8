//! Reduced-grid specifications.
//!
//! Either a comma-separated list of model codes (`M0_48_PDQ110,M7_96_PDQ111`)
//! or a filter over the full grid. Filters use the query predicate syntax
//! (`group<=1 & w=48`) or the shorthand `group=0,3;w=48,96;d=1`, where `;`
//! separates clauses and a comma list means "one of".

use adafore_core::model_zoo::{enumerate_models, ModelSpec};
use adafore_core::ModelPredicate;

use crate::error::{CliError, CliResult};

pub fn parse_reduced_grid(text: &str) -> CliResult<Vec<ModelSpec>> {
    let text = text.trim();
    if text.starts_with('M') {
        let mut specs = text
            .split(',')
            .map(|c| c.trim().parse::<ModelSpec>().map_err(|e| CliError::Validation(e.to_string())))
            .collect::<CliResult<Vec<_>>>()?;
        if let Some(s) = specs.iter().find(|s| !s.in_grid()) {
            return Err(CliError::Validation(format!("{} is not part of the model grid", s.code())));
        }
        specs.sort();
        specs.dedup();
        return Ok(specs);
    }
    let pred = filter_predicate(text)?;
    let specs: Vec<ModelSpec> = enumerate_models().into_iter().filter(|s| pred.matches(s)).collect();
    if specs.is_empty() {
        return Err(CliError::Validation(format!("reduced grid {text:?} matches no model")));
    }
    Ok(specs)
}

fn filter_predicate(text: &str) -> CliResult<ModelPredicate> {
    let clauses: Vec<String> = text
        .split([';', '&'])
        .map(|c| {
            let c = c.trim();
            match c.split_once('=') {
                Some((field, values)) if values.contains(',') && !values.contains('{') && !field.ends_with(['<', '>', '!']) => {
                    format!("{field}={{{values}}}")
                }
                _ => c.to_string(),
            }
        })
        .collect();
    clauses.join(" & ").parse().map_err(|e: adafore_core::Error| CliError::Validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let s = parse_reduced_grid("M7_96_PDQ111, M0_48_PDQ110,M0_48_PDQ110").unwrap();
        assert_eq!(s.iter().map(|s| s.code()).collect::<Vec<_>>(), ["M0_48_PDQ110", "M7_96_PDQ111"]);
        assert!(parse_reduced_grid("M0_50_PDQ110").is_err());
        assert!(parse_reduced_grid("M0_48_PDQ1").is_err());
    }

    #[test]
    fn shorthand_filter() {
        let s = parse_reduced_grid("group=0,3;w=48,96;d=1").unwrap();
        assert_eq!(s.len(), 2 * 2 * 3 * 3);
        assert!(s.iter().all(|m| (m.group == 0 || m.group == 3) && m.d == 1));
    }

    #[test]
    fn predicate_filter() {
        let s = parse_reduced_grid("group>=7 & q=0").unwrap();
        assert_eq!(s.len(), 24);
        assert!(parse_reduced_grid("group=40").is_err());
        assert!(parse_reduced_grid("colour=1").is_err());
    }
}
