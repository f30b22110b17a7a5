//! Canonical forms by iterative partition refinement with individualization
//! on ties. Chosen for simplicity at desk scale over optimal labeling.
//!
//! The form is invariant under renaming of agent and site identifiers. An
//! optional marking (extra colors on agents and sites) lets callers
//! canonicalize graphs-with-structure, e.g. extensions of a rule's left-hand
//! side, where the image of the base must be preserved by isomorphisms.

use std::collections::BTreeMap;

use super::{AgentId, ContactMap, SiteId};

/// Extra colors distinguishing marked agents/sites under isomorphism.
#[derive(Clone, Debug, Default)]
pub struct Marking {
    pub agents: BTreeMap<AgentId, u64>,
    pub sites: BTreeMap<SiteId, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm(pub String);

pub fn canonical_form(cm: &ContactMap, marking: Option<&Marking>) -> CanonicalForm {
    CanonicalForm(canonicalize(cm, marking).0)
}

/// Agents in canonical order (the order used by the canonical string).
pub fn canonical_order(cm: &ContactMap, marking: Option<&Marking>) -> Vec<AgentId> {
    canonicalize(cm, marking).1
}

pub fn isomorphic(a: &ContactMap, b: &ContactMap) -> bool {
    canonical_form(a, None) == canonical_form(b, None)
}

fn canonicalize(cm: &ContactMap, marking: Option<&Marking>) -> (String, Vec<AgentId>) {
    let agents: Vec<AgentId> = cm.agents().collect();
    if agents.is_empty() {
        return (String::new(), Vec::new());
    }
    let default = Marking::default();
    let marking = marking.unwrap_or(&default);
    search(cm, marking, &BTreeMap::new(), &agents)
}

/// Local invariant of one agent: everything visible without looking at
/// neighbour identities.
fn local_sig(cm: &ContactMap, marking: &Marking, a: AgentId) -> Vec<u64> {
    let mut sig = vec![
        cm.agent_type(a).0 as u64,
        marking.agents.get(&a).copied().unwrap_or(u64::MAX),
    ];
    let mut site_rows: Vec<Vec<u64>> = Vec::new();
    for s in cm.graph().sites_of(a) {
        let mut row = vec![
            cm.site_type(s).0 as u64,
            cm.state_of(s).map_or(u64::MAX, |st| st.0 as u64),
            marking.sites.get(&s).copied().unwrap_or(u64::MAX),
        ];
        match cm.graph().partner(s) {
            None => row.push(0),
            Some(p) => {
                row.push(cm.site_type(p).0 as u64 + 1);
                if cm.graph().owner(p).is_none() {
                    // Binding type: fold the dangling partner's mark in here,
                    // since dangling sites are not emitted on their own.
                    row.push(1 + marking.sites.get(&p).copied().unwrap_or(u64::MAX - 1));
                } else {
                    row.push(0);
                }
            }
        }
        site_rows.push(row);
    }
    site_rows.sort();
    for r in site_rows {
        sig.extend(r);
    }
    sig
}

fn refine(
    cm: &ContactMap,
    marking: &Marking,
    individualized: &BTreeMap<AgentId, u64>,
    agents: &[AgentId],
) -> BTreeMap<AgentId, usize> {
    let initial: BTreeMap<AgentId, Vec<u64>> = agents
        .iter()
        .map(|&a| {
            let mut s = local_sig(cm, marking, a);
            s.push(individualized.get(&a).copied().unwrap_or(u64::MAX));
            (a, s)
        })
        .collect();
    let mut colors = rank(agents, &initial);
    loop {
        // New signature: own color plus the colors seen across each bond.
        // Same old color is position 0, so classes only ever split.
        let mut sigs: BTreeMap<AgentId, Vec<u64>> = BTreeMap::new();
        for &a in agents {
            let mut sig = vec![colors[&a] as u64];
            let mut rows: Vec<[u64; 3]> = Vec::new();
            for s in cm.graph().sites_of(a) {
                if let Some(p) = cm.graph().partner(s) {
                    if let Some(owner) = cm.graph().owner(p) {
                        rows.push([
                            cm.site_type(s).0 as u64,
                            cm.site_type(p).0 as u64,
                            colors[&owner] as u64,
                        ]);
                    }
                }
            }
            rows.sort();
            for r in rows {
                sig.extend(r);
            }
            sigs.insert(a, sig);
        }
        let next = rank(agents, &sigs);
        let n_old = colors.values().collect::<std::collections::BTreeSet<_>>().len();
        let n_new = next.values().collect::<std::collections::BTreeSet<_>>().len();
        if n_new == n_old {
            return next;
        }
        colors = next;
    }
}

fn rank(agents: &[AgentId], sigs: &BTreeMap<AgentId, Vec<u64>>) -> BTreeMap<AgentId, usize> {
    let mut distinct: Vec<&Vec<u64>> = sigs.values().collect();
    distinct.sort();
    distinct.dedup();
    agents
        .iter()
        .map(|&a| {
            let pos = distinct.binary_search(&&sigs[&a]).unwrap();
            (a, pos)
        })
        .collect()
}

fn search(
    cm: &ContactMap,
    marking: &Marking,
    individualized: &BTreeMap<AgentId, u64>,
    agents: &[AgentId],
) -> (String, Vec<AgentId>) {
    let colors = refine(cm, marking, individualized, agents);
    let mut classes: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for &a in agents {
        classes.entry(colors[&a]).or_default().push(a);
    }
    if let Some((_, members)) = classes.iter().find(|(_, m)| m.len() > 1) {
        // Tie: individualize each member in turn, keep the least string.
        let depth = individualized.len() as u64;
        let mut best: Option<(String, Vec<AgentId>)> = None;
        for &a in members {
            let mut ind = individualized.clone();
            ind.insert(a, depth);
            let candidate = search(cm, marking, &ind, agents);
            if best.as_ref().is_none_or(|b| candidate.0 < b.0) {
                best = Some(candidate);
            }
        }
        return best.unwrap();
    }
    let mut order: Vec<AgentId> = agents.to_vec();
    order.sort_by_key(|a| colors[a]);
    (emit(cm, marking, &order), order)
}

fn emit(cm: &ContactMap, marking: &Marking, order: &[AgentId]) -> String {
    use std::fmt::Write;
    let index: BTreeMap<AgentId, usize> = order.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut out = String::new();
    for &a in order {
        write!(out, "A{}", cm.agent_type(a).0).unwrap();
        if let Some(m) = marking.agents.get(&a) {
            write!(out, "@{m}").unwrap();
        }
        let mut sites = cm.graph().sites_of(a);
        sites.sort_by_key(|&s| cm.site_type(s));
        for s in sites {
            write!(out, "|s{}", cm.site_type(s).0).unwrap();
            if let Some(st) = cm.state_of(s) {
                write!(out, "~{}", st.0).unwrap();
            }
            if let Some(m) = marking.sites.get(&s) {
                write!(out, "@{m}").unwrap();
            }
            match cm.graph().partner(s) {
                None => out.push('.'),
                Some(p) => match cm.graph().owner(p) {
                    None => {
                        write!(out, "^{}", cm.site_type(p).0).unwrap();
                        if let Some(m) = marking.sites.get(&p) {
                            write!(out, "@{m}").unwrap();
                        }
                    }
                    Some(owner) => {
                        write!(out, "!{}:{}", index[&owner], cm.site_type(p).0).unwrap();
                    }
                },
            }
        }
        out.push(';');
    }
    out
}
