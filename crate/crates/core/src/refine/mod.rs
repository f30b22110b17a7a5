//! Rule refinement under the absorb-or-avoid growth policy.
//!
//! Given a reversible generator rule and a set of connected energy patterns,
//! the policy computes, for every extension of the rule's left side, which
//! sites each agent is asked to carry:
//!
//! - every site already present in the rule's own image is requested;
//! - for every rewind of the extension (every way the extension factors
//!   through a smaller one) and every *relevant* minimal gluing of a pattern
//!   with the rewound codomain — one whose overlap touches a site the rule
//!   modifies — the sites carried by the glued image's agents are requested.
//!
//! An extension is mature when its agents carry exactly the requested sites
//! and the embedding is an epi. Mature and balanced extensions are emitted;
//! mature extensions that a pattern gluing still enters through a half edge
//! are expanded by embodying the implicated dangling sites as fresh agents
//! (separately, or merged when a single pattern agent claims several), after
//! which requests propagate to the new agents. The emitted family refines
//! the generator exhaustively and uniquely, each member carrying a
//! context-independent balance vector.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::gluing::relevant_gluings;
use crate::rules::{is_epi, mirror_extension, Extension, Rule, RuleSide};
use crate::sitegraph::{
    canonical_form, count_embeddings, enumerate_embeddings, AgentId, CAgentId, CSiteId, ContactMap,
    ContactMapBuilder, Embedding, Marking, SiteId,
};

/// Per-agent set of requested site types (the values of the growth policy at
/// one extension).
pub type SiteRequestMap = BTreeMap<AgentId, BTreeSet<CSiteId>>;

/// Maturity of an extension with respect to its site requests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaturityStatus {
    /// Some requested site is absent (or the embedding is not yet an epi).
    Immature { missing: Vec<(AgentId, CSiteId)> },
    Mature,
    /// Some carried site was never requested.
    Overgrown { extra: Vec<(AgentId, CSiteId)> },
}

/// Per-pattern integer change of embedding counts caused by any application
/// of a refined rule.
pub type BalanceVector = Vec<i64>;

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error(
        "refinement of '{rule}' exceeded the diameter bound {bound} (extension of diameter {got}); \
         energy patterns may not be local enough"
    )]
    DiameterExceeded {
        rule: String,
        bound: usize,
        got: usize,
    },
    #[error("extension is not balanced: {0}")]
    NotBalanced(String),
    #[error("energy pattern {0} is not connected")]
    DisconnectedPattern(usize),
    #[error("decomposition not unique/absent: {0} factorizations found")]
    BadFactorization(usize),
    #[error("internal refinement invariant violated: {0}")]
    Internal(String),
}

/// A mature, balanced extension together with its balance vector and the
/// growth moves that produced it.
#[derive(Clone, Debug)]
pub struct MatureExtension {
    pub ext: Extension,
    pub balance: BalanceVector,
    pub provenance: Vec<String>,
}

/// One generator's refinement paired with rates later: the refined rule, its
/// orientation relative to the declared generator, and its inverse partner.
#[derive(Clone, Debug)]
pub struct RefinedRule {
    pub name: String,
    pub rule: Rule,
    /// Index into the generator list.
    pub generator: usize,
    /// True when oriented like the declared generator.
    pub forward: bool,
    pub balance: BalanceVector,
    pub provenance: Vec<String>,
    /// Index of the inverse refined rule in the set.
    pub inverse: usize,
    /// The extension of the matching generator side whose codomain is this
    /// rule's left side.
    pub extension: Extension,
}

/// The compiled rule set: closed under inversion by construction.
#[derive(Clone, Debug)]
pub struct RefinedRuleSet {
    pub generators: Vec<Rule>,
    pub rules: Vec<RefinedRule>,
}

impl RefinedRuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// All balance vectors, one row per refined rule.
    pub fn balance_matrix(&self) -> Vec<Vec<i64>> {
        self.rules.iter().map(|r| r.balance.clone()).collect()
    }
}

/// Image marking that identifies an extension up to isomorphism over the
/// generator's left side.
fn extension_marking(base: &ContactMap, phi: &Embedding) -> Marking {
    let mut marking = Marking::default();
    for (k, a) in base.agents().enumerate() {
        marking.agents.insert(phi.agent(a), k as u64);
    }
    for (k, s) in base.sites().enumerate() {
        marking.sites.insert(phi.site(s), k as u64);
    }
    marking
}

/// Enumerates the rewinds of an extension codomain: restrictions of `t` that
/// keep the whole image (identifiers preserved), each a valid smaller
/// extension. Bound sites are kept or dropped together with their partners;
/// kept free sites keep their owners; no half edge may lose both owners.
///
/// Rewinds are restricted to epis — every component of the rewound codomain
/// must meet the rule's image. Without this, a rewind that retains an agent
/// but severs its bond to the image admits wrap-around gluings that request
/// the far sites of every embodied neighbour, which both contradicts the
/// worked refinements this policy must reproduce and would require
/// cycle-closing growth moves to stay exhaustive.
fn rewinds(t: &ContactMap, image_agents: &BTreeSet<AgentId>, image_sites: &BTreeSet<SiteId>) -> Vec<ContactMap> {
    let optional_agents: Vec<AgentId> = t
        .agents()
        .filter(|a| !image_agents.contains(a))
        .collect();
    // Optional site units: a free non-image site alone, or a bound non-image
    // pair taken together. Image sites (and their partners, which are image
    // sites too whenever the base rule binds them) are always kept.
    let mut units: Vec<Vec<SiteId>> = Vec::new();
    let mut seen = BTreeSet::new();
    for s in t.sites() {
        if image_sites.contains(&s) || seen.contains(&s) {
            continue;
        }
        match t.graph().partner(s) {
            None => {
                units.push(vec![s]);
                seen.insert(s);
            }
            Some(p) => {
                if image_sites.contains(&p) {
                    // Partner is pinned, so this site is pinned too: dropping
                    // it would leave the image site free.
                    seen.insert(s);
                    continue;
                }
                units.push(vec![s, p]);
                seen.insert(s);
                seen.insert(p);
            }
        }
    }
    let mut pinned: BTreeSet<SiteId> = image_sites.clone();
    for s in t.sites() {
        if image_sites.contains(&s) {
            if let Some(p) = t.graph().partner(s) {
                pinned.insert(p);
            }
        }
    }
    let mut out = Vec::new();
    for agent_bits in 0..(1u32 << optional_agents.len()) {
        let mut a1: BTreeSet<AgentId> = image_agents.clone();
        for (i, &a) in optional_agents.iter().enumerate() {
            if agent_bits & (1 << i) != 0 {
                a1.insert(a);
            }
        }
        'unit: for unit_bits in 0..(1u32 << units.len()) {
            let mut s1: BTreeSet<SiteId> = pinned.clone();
            for (i, unit) in units.iter().enumerate() {
                if unit_bits & (1 << i) != 0 {
                    s1.extend(unit.iter().copied());
                }
            }
            // Validity: kept free sites need kept owners; kept edges need at
            // least one kept owner.
            for &s in &s1 {
                let owned = t.graph().owner(s).is_some_and(|o| a1.contains(&o));
                match t.graph().partner(s) {
                    None => {
                        if !owned {
                            continue 'unit;
                        }
                    }
                    Some(p) => {
                        if !s1.contains(&p) {
                            continue 'unit;
                        }
                        let p_owned = t.graph().owner(p).is_some_and(|o| a1.contains(&o));
                        if !owned && !p_owned {
                            continue 'unit;
                        }
                    }
                }
            }
            match t.restrict(&a1, &s1) {
                Ok(t1) => {
                    let epi = t1
                        .connected_components()
                        .iter()
                        .all(|comp| comp.iter().any(|a| image_agents.contains(a)));
                    if epi {
                        out.push(t1);
                    }
                }
                Err(_) => continue 'unit,
            }
        }
    }
    out
}

/// The growth policy at one extension: clause (i) requests the image sites;
/// clause (ii) adds, for every rewind on either side, the sites carried by
/// glued-image agents of every relevant minimal gluing.
pub fn compute_requests(ext: &Extension, patterns: &[ContactMap]) -> SiteRequestMap {
    let mut requests: SiteRequestMap = BTreeMap::new();
    let base = ext.rule.lhs();
    for a in base.agents() {
        requests.entry(ext.phi.agent(a)).or_default();
    }
    for s in base.sites() {
        if let Some(owner) = base.graph().owner(s) {
            requests
                .entry(ext.phi.agent(owner))
                .or_default()
                .insert(base.site_type(s));
        }
    }
    let image_agents: BTreeSet<AgentId> = ext.phi.agents.values().copied().collect();
    let image_sites: BTreeSet<SiteId> = ext.phi.sites.values().copied().collect();
    let modified = ext.modified_in_t();
    for side in [&ext.t, &ext.t_star] {
        for t1 in rewinds(side, &image_agents, &image_sites) {
            for c in patterns {
                for mg in relevant_gluings(c, &t1, &modified) {
                    for u1 in t1.agents() {
                        let glued_agent = mg.right.agent(u1);
                        let entry = requests.entry(u1).or_default();
                        for s in mg.glued.graph().sites_of(glued_agent) {
                            entry.insert(mg.glued.site_type(s));
                        }
                    }
                }
            }
        }
    }
    requests
}

/// Maturity of `ext` under `requests`.
pub fn classify(ext: &Extension, requests: &SiteRequestMap) -> MaturityStatus {
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    let empty = BTreeSet::new();
    for u in ext.t.agents() {
        let wanted = requests.get(&u).unwrap_or(&empty);
        let carried: BTreeSet<CSiteId> = ext
            .t
            .graph()
            .sites_of(u)
            .into_iter()
            .map(|s| ext.t.site_type(s))
            .collect();
        for &ty in wanted.difference(&carried) {
            missing.push((u, ty));
        }
        for &ty in carried.difference(wanted) {
            extra.push((u, ty));
        }
    }
    if !extra.is_empty() {
        MaturityStatus::Overgrown { extra }
    } else if !missing.is_empty() || !is_epi(&ext.phi, &ext.t) {
        MaturityStatus::Immature { missing }
    } else {
        MaturityStatus::Mature
    }
}

/// A relevant gluing that blocks balance: some pattern still enters the
/// extension through identified dangling sites.
#[derive(Clone, Debug)]
struct BalanceOffender {
    /// Dangling sites of the extension side, grouped by the pattern agent
    /// their identified partner sites belong to.
    groups: Vec<(CAgentId, Vec<SiteId>)>,
    #[allow(dead_code)]
    side: RuleSide,
}

/// Finds the first relevant minimal gluing (sides in order, patterns in
/// order) whose pattern is not wholly absorbed. `None` means balanced.
fn find_unbalanced(ext: &Extension, patterns: &[ContactMap]) -> Option<BalanceOffender> {
    let modified = ext.modified_in_t();
    for (side_sel, side) in [(RuleSide::Left, &ext.t), (RuleSide::Right, &ext.t_star)] {
        for c in patterns {
            for mg in relevant_gluings(c, side, &modified) {
                if mg.absorbs_left(c) {
                    continue;
                }
                let mut by_agent: BTreeMap<AgentId, Vec<SiteId>> = BTreeMap::new();
                for &(s_c, s_t) in &mg.site_pairs {
                    if side.graph().is_dangling(s_t) {
                        if let Some(w) = c.graph().owner(s_c) {
                            by_agent.entry(w).or_default().push(s_t);
                        }
                    }
                }
                let groups: Vec<(CAgentId, Vec<SiteId>)> = by_agent
                    .into_iter()
                    .map(|(w, sites)| (c.agent_type(w), sites))
                    .collect();
                return Some(BalanceOffender {
                    groups,
                    side: side_sel,
                });
            }
        }
    }
    None
}

/// Balance vector of a balanced extension: per-pattern embedding count on
/// the right side minus the left side. Errors when the extension is not
/// balanced (the mixture-level delta would be context dependent).
pub fn balance_vector(ext: &Extension, patterns: &[ContactMap]) -> Result<BalanceVector, RefineError> {
    if find_unbalanced(ext, patterns).is_some() {
        return Err(RefineError::NotBalanced(format!(
            "extension of '{}' admits a relevant gluing with an unabsorbed pattern",
            ext.rule.name
        )));
    }
    Ok(balance_vector_unchecked(ext, patterns))
}

fn balance_vector_unchecked(ext: &Extension, patterns: &[ContactMap]) -> BalanceVector {
    patterns
        .iter()
        .map(|c| {
            count_embeddings(c, &ext.t_star) as i64 - count_embeddings(c, &ext.t) as i64
        })
        .collect()
}

/// Greatest pattern diameter plus the diameter of the generator's left side
/// plus one: requests can never reach farther, so any extension growing past
/// this is a policy bug or a non-local pattern set.
fn diameter_bound(g: &Rule, patterns: &[ContactMap]) -> usize {
    let pat = patterns.iter().map(|c| c.diameter()).max().unwrap_or(0);
    pat + g.lhs().diameter() + 1
}

struct WorkItem {
    ext: Extension,
    provenance: Vec<String>,
    depth: usize,
}

/// Enumerates the mature balanced extensions of `g` under the absorb-or-avoid
/// policy for `patterns`. Deterministic: breadth-first by growth moves, with
/// canonical deduplication of extensions.
pub fn enumerate_mature(g: &Rule, patterns: &[ContactMap]) -> Result<Vec<MatureExtension>, RefineError> {
    for (i, c) in patterns.iter().enumerate() {
        if c.connected_components().len() > 1 {
            return Err(RefineError::DisconnectedPattern(i));
        }
    }
    let bound = diameter_bound(g, patterns);
    let identity = mirror_extension(g, &Embedding::identity(g.lhs()), g.lhs())
        .map_err(|e| RefineError::Internal(format!("identity extension rejected: {e}")))?;
    let mut seen: BTreeSet<String> = BTreeSet::new();
    seen.insert(canonical_form(&identity.t, Some(&extension_marking(g.lhs(), &identity.phi))).0);
    let mut queue: VecDeque<WorkItem> = VecDeque::new();
    queue.push_back(WorkItem {
        ext: identity,
        provenance: Vec::new(),
        depth: 0,
    });
    let mut emitted: Vec<MatureExtension> = Vec::new();
    let mut steps = 0usize;
    while let Some(item) = queue.pop_front() {
        steps += 1;
        if steps > 100_000 {
            return Err(RefineError::Internal(
                "refinement work list did not converge".into(),
            ));
        }
        let got = item.ext.t.diameter();
        if got > bound {
            return Err(RefineError::DiameterExceeded {
                rule: g.name.clone(),
                bound,
                got,
            });
        }
        let requests = compute_requests(&item.ext, patterns);
        match classify(&item.ext, &requests) {
            MaturityStatus::Overgrown { extra } => {
                return Err(RefineError::Internal(format!(
                    "growth produced an overgrown extension (extra {extra:?}); \
                     requests must be faithful"
                )));
            }
            MaturityStatus::Immature { missing } => {
                let (agent, ty) = *missing.first().ok_or_else(|| {
                    RefineError::Internal("immature without missing sites".into())
                })?;
                for child in grow_at(&item, agent, ty, g, patterns) {
                    push_child(child, g, &mut seen, &mut queue);
                }
            }
            MaturityStatus::Mature => match find_unbalanced(&item.ext, patterns) {
                None => {
                    let balance = balance_vector_unchecked(&item.ext, patterns);
                    emitted.push(MatureExtension {
                        ext: item.ext,
                        balance,
                        provenance: item.provenance,
                    });
                }
                Some(offender) => {
                    if offender.groups.is_empty() {
                        return Err(RefineError::Internal(
                            "unbalanced mature extension without dangling identifications".into(),
                        ));
                    }
                    for child in embody(&item, &offender) {
                        push_child(child, g, &mut seen, &mut queue);
                    }
                }
            },
        }
    }
    Ok(emitted)
}

fn push_child(
    child: WorkItem,
    g: &Rule,
    seen: &mut BTreeSet<String>,
    queue: &mut VecDeque<WorkItem>,
) {
    let key = canonical_form(
        &child.ext.t,
        Some(&extension_marking(g.lhs(), &child.ext.phi)),
    )
    .0;
    if seen.insert(key) {
        queue.push_back(child);
    }
}

/// Growth moves at a missing request (agent, site type): reveal the site
/// free, or bound through a half edge of each admissible partner type; where
/// the site carries constrained states, one branch per state value.
fn grow_at(
    item: &WorkItem,
    agent: AgentId,
    ty: CSiteId,
    g: &Rule,
    patterns: &[ContactMap],
) -> Vec<WorkItem> {
    let cg = item.ext.t.contact_graph().clone();
    let states: Vec<Option<crate::sitegraph::StateId>> =
        if !cg.states_of(ty).is_empty() && state_constrained(ty, g, patterns) {
            (0..cg.states_of(ty).len())
                .map(|i| Some(crate::sitegraph::StateId(i as u32)))
                .collect()
        } else {
            vec![None]
        };
    let agent_label = format!("{}#{}", cg.agent_name(item.ext.t.agent_type(agent)), agent.0);
    let mut out = Vec::new();
    for &state in &states {
        let state_note = state.map_or(String::new(), |s| {
            format!(" ~{}", cg.states_of(ty)[s.0 as usize])
        });
        // Free variant.
        {
            let mut b = ContactMapBuilder::from_map(&item.ext.t);
            b.add_site(Some(agent), ty, state);
            if let Ok(t) = b.build() {
                out.push(make_item(
                    item,
                    t,
                    format!(
                        "reveal {}@{} free{}",
                        cg.site_name(ty),
                        agent_label,
                        state_note
                    ),
                ));
            }
        }
        // One bound variant per admissible binding type.
        for pty in cg.partners_of_type(ty) {
            let mut b = ContactMapBuilder::from_map(&item.ext.t);
            let s = b.add_site(Some(agent), ty, state);
            let d = b.add_site(None, pty, None);
            b.add_edge(s, d).unwrap();
            if let Ok(t) = b.build() {
                out.push(make_item(
                    item,
                    t,
                    format!(
                        "reveal {}@{} bound ^{}.{}{}",
                        cg.site_name(ty),
                        agent_label,
                        cg.site_name(pty),
                        cg.agent_name(cg.site_owner_type(pty)),
                        state_note
                    ),
                ));
            }
        }
    }
    out.into_iter().flatten().collect()
}

/// Whether any pattern or the rule itself constrains the internal state of
/// sites of this type.
fn state_constrained(ty: CSiteId, g: &Rule, patterns: &[ContactMap]) -> bool {
    let mentions = |cm: &ContactMap| {
        cm.sites()
            .any(|s| cm.site_type(s) == ty && cm.state_of(s).is_some())
    };
    patterns.iter().any(mentions) || mentions(g.lhs()) || mentions(g.rhs())
}

fn make_item(parent: &WorkItem, t: ContactMap, note: String) -> Option<WorkItem> {
    let ext = mirror_extension(&parent.ext.rule, &parent.ext.phi, &t).ok()?;
    let mut provenance = parent.provenance.clone();
    provenance.push(note);
    Some(WorkItem {
        ext,
        provenance,
        depth: parent.depth + 1,
    })
}

/// Embodies the dangling sites implicated by an offending gluing: every way
/// of partitioning each pattern agent's group into fresh agents (singletons
/// keep the half edges on separate new agents; larger blocks merge them into
/// one, which is how a wrap-around closes a cycle). Groups claimed by
/// different pattern agents are embodied independently.
fn embody(item: &WorkItem, offender: &BalanceOffender) -> Vec<WorkItem> {
    let cg = item.ext.t.contact_graph().clone();
    // Partition choices per group, then take the cross product.
    let mut per_group: Vec<Vec<Vec<Vec<SiteId>>>> = Vec::new();
    for (_, sites) in &offender.groups {
        per_group.push(set_partitions(sites));
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; per_group.len()];
    loop {
        let mut b = ContactMapBuilder::from_map(&item.ext.t);
        let mut notes = Vec::new();
        for (gi, (aty, _)) in offender.groups.iter().enumerate() {
            let blocks = &per_group[gi][choice[gi]];
            for block in blocks {
                let fresh = b.add_agent(*aty);
                let mut claimed = Vec::new();
                for &d in block {
                    b.claim_site(d, fresh);
                    claimed.push(format!(
                        "^{}.{}",
                        cg.site_name(item.ext.t.site_type(d)),
                        cg.agent_name(*aty)
                    ));
                }
                notes.push(format!(
                    "embody {} as {}#{}",
                    claimed.join(" "),
                    cg.agent_name(*aty),
                    fresh.0
                ));
            }
        }
        if let Ok(t) = b.build() {
            if let Some(mut w) = make_item(item, t, notes.join("; ")) {
                w.depth = item.depth + 1;
                out.push(w);
            }
        }
        // Advance the mixed-radix counter over partition choices.
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                return out;
            }
            choice[pos] += 1;
            if choice[pos] < per_group[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// All set partitions of `items`, deterministic, coarsest-last. Groups here
/// are tiny (half edges claimed by one pattern agent), so the growth is
/// irrelevant.
fn set_partitions(items: &[SiteId]) -> Vec<Vec<Vec<SiteId>>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let rest = set_partitions(&items[1..]);
    let mut out = Vec::new();
    for partition in rest {
        // First as its own block.
        let mut own = partition.clone();
        own.insert(0, vec![first]);
        out.push(own);
        // First joined into each existing block.
        for i in 0..partition.len() {
            let mut joined = partition.clone();
            joined[i].insert(0, first);
            out.push(joined);
        }
    }
    out
}

/// Factors an embedding of the generator's left side into a mixture through
/// the emitted family: exactly one (extension index, residual embedding).
pub fn unique_factor(
    family: &[MatureExtension],
    psi: &Embedding,
    h: &ContactMap,
) -> Result<(usize, Embedding), RefineError> {
    let mut found: Vec<(usize, Embedding)> = Vec::new();
    for (i, me) in family.iter().enumerate() {
        for gamma in enumerate_embeddings(&me.ext.t, h) {
            if me.ext.phi.then(&gamma) == *psi {
                found.push((i, gamma));
            }
        }
    }
    if found.len() == 1 {
        Ok(found.into_iter().next().unwrap())
    } else {
        Err(RefineError::BadFactorization(found.len()))
    }
}

/// Refines every generator and assembles the rule set, closed under
/// inversion: each mature extension contributes its forward refined rule and
/// the mirrored reverse one with the negated balance vector.
pub fn refine_generators(
    generators: &[Rule],
    patterns: &[ContactMap],
) -> Result<RefinedRuleSet, RefineError> {
    let mut rules = Vec::new();
    for (gi, g) in generators.iter().enumerate() {
        let family = enumerate_mature(g, patterns)?;
        for (k, me) in family.into_iter().enumerate() {
            let fwd_name = format!("{}.{}", g.name, k);
            let rev_name = format!("{}.{}*", g.name, k);
            let fwd_rule = me.ext.refined_rule(&fwd_name);
            let rev_rule = fwd_rule.invert();
            let fwd_idx = rules.len();
            let rev_idx = fwd_idx + 1;
            let rev_extension = Extension {
                rule: g.invert(),
                phi: me.ext.phi.clone(),
                t: me.ext.t_star.clone(),
                t_star: me.ext.t.clone(),
            };
            rules.push(RefinedRule {
                name: fwd_name,
                rule: fwd_rule,
                generator: gi,
                forward: true,
                balance: me.balance.clone(),
                provenance: me.provenance.clone(),
                inverse: rev_idx,
                extension: me.ext,
            });
            rules.push(RefinedRule {
                name: rev_name,
                rule: rev_rule,
                generator: gi,
                forward: false,
                balance: me.balance.iter().map(|x| -x).collect(),
                provenance: me.provenance,
                inverse: fwd_idx,
                extension: rev_extension,
            });
        }
    }
    Ok(RefinedRuleSet {
        generators: generators.to_vec(),
        rules,
    })
}

#[cfg(test)]
mod tests;
