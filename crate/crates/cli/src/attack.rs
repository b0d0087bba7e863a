//! Explanation linkage attack: an adversary who knows someone's
//! quasi-identifiers matches them against a released explanation. If exactly
//! one training row fits, that person's private attributes leak.

use cfk_core::{Dataset, GeneralizedInstance, Record};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    /// Training rows whose quasi-identifiers the explanation covers.
    pub matches: Vec<Record>,
    /// Private attribute (name, value) pairs, disclosed only on a unique match.
    pub disclosed: Option<Vec<(String, String)>>,
}

impl AttackOutcome {
    pub fn anonymity_set(&self) -> usize {
        self.matches.len()
    }

    pub fn successful(&self) -> bool {
        self.disclosed.is_some()
    }

    pub fn render(&self) -> String {
        match &self.disclosed {
            Some(pairs) => {
                let leaked: Vec<String> =
                    pairs.iter().map(|(name, value)| format!("{name}={value}")).collect();
                format!(
                    "attack SUCCEEDED: unique match (row {}), disclosed {}",
                    self.matches[0].row_id,
                    leaked.join(", ")
                )
            }
            None => format!(
                "attack failed: anonymity set of {} row(s)",
                self.matches.len()
            ),
        }
    }
}

/// Matches the explanation's quasi-identifiers against every training row.
pub fn linkage_attack(explanation: &GeneralizedInstance, train: &Dataset) -> AttackOutcome {
    let schema = train.schema();
    let matches: Vec<Record> = train
        .records()
        .iter()
        .filter(|r| explanation.covers(schema, r))
        .cloned()
        .collect();
    let disclosed = match matches.as_slice() {
        [only] => Some(
            schema
                .private_indices
                .iter()
                .map(|&i| (schema.attributes[i].name.clone(), only.values[i].render()))
                .collect(),
        ),
        _ => None,
    };
    AttackOutcome { matches, disclosed }
}
