//! Reversible rules over a contact graph, rule application, inversion, and
//! extensions of a rule's left-hand side with their mirrored right-hand
//! sides.
//!
//! A rule is a pair of contact maps sharing agents, sites, ownership and
//! typing; only edges and internal states differ. Because of this, applying
//! a rule is a matter of replaying its delta inside the host graph — no
//! double-pushout machinery is required — and the delta replay also carries
//! extensions of the left side over to the right side (the two extension
//! categories are isomorphic).

use std::collections::{BTreeMap, BTreeSet};

use crate::sitegraph::{AgentId, ContactMap, Embedding, SiteId, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleSide {
    Left,
    Right,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule sides must share agents, sites, ownership and typing: {0}")]
    SideMismatch(String),
    #[error("modified edge endpoint {0:?} is dangling; half-edge actions are not expressible")]
    DanglingAction(SiteId),
    #[error("target is not a mixture")]
    NotAMixture,
    #[error("embedding is not valid: {0}")]
    BadEmbedding(String),
    #[error("extension is not a prefix of an epi")]
    NotPrefixOfEpi,
}

/// The replayable difference between the two sides of a rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleDelta {
    pub removed_edges: BTreeSet<(SiteId, SiteId)>,
    pub added_edges: BTreeSet<(SiteId, SiteId)>,
    /// site -> (state on the left, state on the right)
    pub state_changes: BTreeMap<SiteId, (Option<StateId>, Option<StateId>)>,
}

/// A reversible rewrite rule: two contact maps differing only in edges and
/// site states.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub name: String,
    lhs: ContactMap,
    rhs: ContactMap,
    delta: RuleDelta,
    /// Number of connected components of the left side; bounds the number of
    /// embeddings into a mixture by |agents|^d.
    d: usize,
}

impl Rule {
    pub fn new(
        name: impl Into<String>,
        lhs: ContactMap,
        rhs: ContactMap,
    ) -> Result<Self, RuleError> {
        let same_agents = lhs.agents().collect::<Vec<_>>() == rhs.agents().collect::<Vec<_>>()
            && lhs.agents().all(|a| lhs.agent_type(a) == rhs.agent_type(a));
        let same_sites = lhs.sites().collect::<Vec<_>>() == rhs.sites().collect::<Vec<_>>()
            && lhs.sites().all(|s| {
                lhs.site_type(s) == rhs.site_type(s) && lhs.graph().owner(s) == rhs.graph().owner(s)
            });
        if !same_agents || !same_sites {
            return Err(RuleError::SideMismatch(
                "agent/site sets or their typing differ".into(),
            ));
        }
        let left_edges: BTreeSet<(SiteId, SiteId)> = lhs.graph().edges().collect();
        let right_edges: BTreeSet<(SiteId, SiteId)> = rhs.graph().edges().collect();
        let removed_edges: BTreeSet<_> = left_edges.difference(&right_edges).copied().collect();
        let added_edges: BTreeSet<_> = right_edges.difference(&left_edges).copied().collect();
        for &(s, t) in removed_edges.iter().chain(added_edges.iter()) {
            for x in [s, t] {
                if lhs.graph().is_dangling(x) {
                    return Err(RuleError::DanglingAction(x));
                }
            }
        }
        let mut state_changes = BTreeMap::new();
        for s in lhs.sites() {
            let (a, b) = (lhs.state_of(s), rhs.state_of(s));
            if a != b {
                state_changes.insert(s, (a, b));
            }
        }
        let d = lhs.connected_components().len();
        Ok(Rule {
            name: name.into(),
            lhs,
            rhs,
            delta: RuleDelta {
                removed_edges,
                added_edges,
                state_changes,
            },
            d,
        })
    }

    pub fn lhs(&self) -> &ContactMap {
        &self.lhs
    }

    pub fn rhs(&self) -> &ContactMap {
        &self.rhs
    }

    pub fn side(&self, side: RuleSide) -> &ContactMap {
        match side {
            RuleSide::Left => &self.lhs,
            RuleSide::Right => &self.rhs,
        }
    }

    pub fn delta(&self) -> &RuleDelta {
        &self.delta
    }

    /// Component count of the left side.
    pub fn component_count(&self) -> usize {
        self.d
    }

    /// Sites whose edge membership or internal state the rule changes.
    pub fn modified_sites(&self) -> BTreeSet<SiteId> {
        let mut out = BTreeSet::new();
        for &(s, t) in self
            .delta
            .removed_edges
            .iter()
            .chain(self.delta.added_edges.iter())
        {
            out.insert(s);
            out.insert(t);
        }
        out.extend(self.delta.state_changes.keys().copied());
        out
    }

    /// The inverse rule (r_R, r_L). Inverting twice restores the name.
    pub fn invert(&self) -> Rule {
        let name = match self.name.strip_suffix('*') {
            Some(base) => base.to_string(),
            None => format!("{}*", self.name),
        };
        Rule::new(name, self.rhs.clone(), self.lhs.clone()).expect("sides already checked")
    }

    /// Rewrites the mixture `h` at the match `psi` by replaying the delta
    /// inside it. Everything outside the image is untouched; the returned
    /// embedding is the co-match of the right side into the new mixture.
    pub fn apply(&self, psi: &Embedding, h: &ContactMap) -> Result<RewriteResult, RuleError> {
        if !h.is_mixture() {
            return Err(RuleError::NotAMixture);
        }
        psi.validate(&self.lhs, h).map_err(RuleError::BadEmbedding)?;
        let mut edges: BTreeSet<(SiteId, SiteId)> = h.graph().edges().collect();
        for &(s, t) in &self.delta.removed_edges {
            let (si, ti) = (psi.site(s), psi.site(t));
            edges.remove(&(si.min(ti), si.max(ti)));
        }
        for &(s, t) in &self.delta.added_edges {
            let (si, ti) = (psi.site(s), psi.site(t));
            edges.insert((si.min(ti), si.max(ti)));
        }
        let mut states: BTreeMap<SiteId, StateId> = h
            .sites()
            .filter_map(|s| h.state_of(s).map(|st| (s, st)))
            .collect();
        for (&s, &(_, to)) in &self.delta.state_changes {
            match to {
                Some(st) => {
                    states.insert(psi.site(s), st);
                }
                None => {
                    states.remove(&psi.site(s));
                }
            }
        }
        let mixture = h.with_edges_and_states(edges, states);
        Ok(RewriteResult {
            mixture,
            embedding: psi.clone(),
        })
    }
}

/// Outcome of one rewrite: the new mixture (same agents and sites) and the
/// embedding of the rule's right side into it.
#[derive(Clone, Debug)]
pub struct RewriteResult {
    pub mixture: ContactMap,
    pub embedding: Embedding,
}

/// True iff every connected component of the codomain contains at least one
/// agent in the image of `phi`.
pub fn is_epi(phi: &Embedding, codomain: &ContactMap) -> bool {
    let image: BTreeSet<AgentId> = phi.agents.values().copied().collect();
    codomain
        .connected_components()
        .iter()
        .all(|comp| comp.iter().any(|a| image.contains(a)))
}

/// True iff some further extension of `phi` is an epi: every component
/// missed by the image must still be openable (a free, absent or half-bound
/// attachment point through which a later extension can reach it).
pub fn is_prefix_of_epi(phi: &Embedding, codomain: &ContactMap) -> bool {
    let image: BTreeSet<AgentId> = phi.agents.values().copied().collect();
    'comp: for comp in codomain.connected_components() {
        if comp.iter().any(|a| image.contains(a)) {
            continue;
        }
        for &a in &comp {
            let ty = codomain.agent_type(a);
            for &sty in codomain.contact_graph().sites_of_type(ty) {
                match codomain.site_of(a, sty) {
                    None => continue 'comp, // absent site: can be added bound
                    Some(s) => {
                        if codomain.graph().is_free(s) {
                            continue 'comp;
                        }
                        if let Some(p) = codomain.graph().partner(s) {
                            if codomain.graph().is_dangling(p) {
                                continue 'comp; // half edge can reach a new agent
                            }
                        }
                    }
                }
            }
        }
        return false; // saturated untouched component
    }
    true
}

/// An extension of a rule: an embedding of the left side into `t`, together
/// with the mirrored embedding of the right side into `t*` obtained by
/// replaying the rule's delta inside `t`.
#[derive(Clone, Debug)]
pub struct Extension {
    pub rule: Rule,
    pub phi: Embedding,
    pub t: ContactMap,
    pub t_star: ContactMap,
}

impl Extension {
    /// The refined rule (t, t*) induced by this extension.
    pub fn refined_rule(&self, name: impl Into<String>) -> Rule {
        Rule::new(name, self.t.clone(), self.t_star.clone())
            .expect("mirror replay preserves the shared skeleton")
    }

    /// Modified sites expressed in `t`'s identifiers.
    pub fn modified_in_t(&self) -> BTreeSet<SiteId> {
        self.rule
            .modified_sites()
            .into_iter()
            .map(|s| self.phi.site(s))
            .collect()
    }
}

/// Builds the extension of `rule` along `phi: lhs -> t`, mirroring it to the
/// right side. Rejects embeddings that are not prefixes of epis.
pub fn mirror_extension(
    rule: &Rule,
    phi: &Embedding,
    t: &ContactMap,
) -> Result<Extension, RuleError> {
    phi.validate(rule.lhs(), t).map_err(RuleError::BadEmbedding)?;
    if !is_prefix_of_epi(phi, t) {
        return Err(RuleError::NotPrefixOfEpi);
    }
    let mut edges: BTreeSet<(SiteId, SiteId)> = t.graph().edges().collect();
    for &(s, u) in &rule.delta().removed_edges {
        let (si, ui) = (phi.site(s), phi.site(u));
        edges.remove(&(si.min(ui), si.max(ui)));
    }
    for &(s, u) in &rule.delta().added_edges {
        let (si, ui) = (phi.site(s), phi.site(u));
        edges.insert((si.min(ui), si.max(ui)));
    }
    let mut states: BTreeMap<SiteId, StateId> = t
        .sites()
        .filter_map(|s| t.state_of(s).map(|st| (s, st)))
        .collect();
    for (&s, &(_, to)) in &rule.delta().state_changes {
        match to {
            Some(st) => {
                states.insert(phi.site(s), st);
            }
            None => {
                states.remove(&phi.site(s));
            }
        }
    }
    let t_star = t.with_edges_and_states(edges, states);
    Ok(Extension {
        rule: rule.clone(),
        phi: phi.clone(),
        t: t.clone(),
        t_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sitegraph::{canonical_form, enumerate_embeddings, isomorphic};
    use crate::testkit::{triangle_cg, word};

    /// The unbinding generator ?12? -> ?1 + 2?.
    pub(crate) fn g12(cg: &std::sync::Arc<crate::sitegraph::ContactGraph>) -> Rule {
        let lhs = word(cg, "?12?");
        let rhs = lhs.with_edges_and_states(BTreeSet::new(), BTreeMap::new());
        Rule::new("g12", lhs, rhs).unwrap()
    }

    #[test]
    fn unbind_the_triangle_gives_the_open_chain() {
        let cg = triangle_cg();
        let rule = g12(&cg);
        let tri = word(&cg, "cyc(123)");
        let psi = enumerate_embeddings(rule.lhs(), &tri).pop().unwrap();
        let out = rule.apply(&psi, &tri).unwrap();
        assert!(isomorphic(&out.mixture, &word(&cg, "231")));
        // Applying the inverse through the returned embedding restores the
        // original mixture exactly.
        let back = rule.invert().apply(&out.embedding, &out.mixture).unwrap();
        assert_eq!(back.mixture, tri);
        assert_eq!(
            canonical_form(&back.mixture, None),
            canonical_form(&tri, None)
        );
    }

    #[test]
    fn inversion_is_an_involution() {
        let cg = triangle_cg();
        let rule = g12(&cg);
        let back = rule.invert().invert();
        assert_eq!(back.name, rule.name);
        assert_eq!(back.lhs(), rule.lhs());
        assert_eq!(back.rhs(), rule.rhs());
    }

    #[test]
    fn rejects_bad_applications() {
        let cg = triangle_cg();
        let rule = g12(&cg);
        let not_mixture = word(&cg, "?12?");
        let psi = Embedding::identity(rule.lhs());
        assert!(matches!(
            rule.apply(&psi, &not_mixture),
            Err(RuleError::NotAMixture)
        ));
        let other = word(&cg, "12");
        assert!(matches!(
            rule.apply(&psi, &other),
            Err(RuleError::BadEmbedding(_))
        ));
    }

    #[test]
    fn frame_property_outside_image() {
        let cg = triangle_cg();
        let rule = g12(&cg);
        let h = word(&cg, "12 + cyc(123)");
        for psi in enumerate_embeddings(rule.lhs(), &h) {
            let out = rule.apply(&psi, &h).unwrap();
            let touched: BTreeSet<SiteId> = rule
                .modified_sites()
                .into_iter()
                .map(|s| psi.site(s))
                .collect();
            for s in h.sites() {
                if !touched.contains(&s) {
                    let before = h.graph().partner(s).filter(|p| !touched.contains(p));
                    let after = out
                        .mixture
                        .graph()
                        .partner(s)
                        .filter(|p| !touched.contains(p));
                    assert_eq!(before, after, "untouched site {s:?} changed");
                    assert_eq!(h.state_of(s), out.mixture.state_of(s));
                }
            }
        }
    }

    #[test]
    fn epi_detection() {
        let cg = triangle_cg();
        let pat = word(&cg, "?12?");
        // ?12? -> ?3123?: single component, touched.
        let big = word(&cg, "?3123?");
        let phi = enumerate_embeddings(&pat, &big).pop().unwrap();
        assert!(is_epi(&phi, &big));
        // ?12? -> ?12? + triangle: the triangle component is untouched and
        // saturated, so this is not even a prefix of an epi.
        let with_tri = word(&cg, "?12? + cyc(123)");
        let phi2 = enumerate_embeddings(&pat, &with_tri)
            .into_iter()
            .next()
            .unwrap();
        assert!(!is_epi(&phi2, &with_tri));
        assert!(!is_prefix_of_epi(&phi2, &with_tri));
        // ?12? + open dimer: not epi, but the dimer can still be reached.
        let with_open = word(&cg, "?12? + 23");
        let phi3 = enumerate_embeddings(&pat, &with_open)
            .into_iter()
            .next()
            .unwrap();
        assert!(!is_epi(&phi3, &with_open));
        assert!(is_prefix_of_epi(&phi3, &with_open));
        // Identity is an epi.
        let id = Embedding::identity(&pat);
        assert!(is_epi(&id, &pat));
    }

    #[test]
    fn mirror_replays_the_delta() {
        let cg = triangle_cg();
        let rule = g12(&cg);
        // Identity extension: t* is the two open ends.
        let id = Embedding::identity(rule.lhs());
        let ext = mirror_extension(&rule, &id, rule.lhs()).unwrap();
        assert_eq!(ext.t_star.connected_components().len(), 2);
        // Extension into the triangle: refined rule T -> 231.
        let tri = word(&cg, "cyc(123)");
        let phi = enumerate_embeddings(rule.lhs(), &tri).pop().unwrap();
        let ext = mirror_extension(&rule, &phi, &tri).unwrap();
        assert!(isomorphic(&ext.t_star, &word(&cg, "231")));
        // Bind direction: closing the 1-2 edge inside the ?3123? context.
        let bind = rule.invert();
        let closed = word(&cg, "?3123?");
        let open = {
            let middle = closed
                .graph()
                .edges()
                .find(|&(s, t)| {
                    let mut tys = [closed.site_type(s).0, closed.site_type(t).0];
                    tys.sort();
                    tys == [1, 2] // r of kind 1 is CSiteId 1, l of kind 2 is CSiteId 2
                })
                .unwrap();
            let mut edges: BTreeSet<(SiteId, SiteId)> = closed.graph().edges().collect();
            edges.remove(&middle);
            closed.with_edges_and_states(
                edges,
                closed
                    .sites()
                    .filter_map(|s| closed.state_of(s).map(|st| (s, st)))
                    .collect(),
            )
        };
        let phi = enumerate_embeddings(bind.lhs(), &open).pop().unwrap();
        let ext = mirror_extension(&bind, &phi, &open).unwrap();
        assert!(isomorphic(&ext.t_star, &closed));
    }

    #[test]
    fn lemma_epi_prefix_preserved_by_mirror() {
        // Prefix-of-epi status carries over to the mirrored side.
        let cg = triangle_cg();
        let rule = g12(&cg);
        for ctx in ["?12?", "12", "^312^3", "?3123?", "cyc(123)", "31231"] {
            let t = word(&cg, ctx);
            for phi in enumerate_embeddings(rule.lhs(), &t) {
                let left_status = is_prefix_of_epi(&phi, &t);
                if let Ok(ext) = mirror_extension(&rule, &phi, &t) {
                    let right_status = is_prefix_of_epi(&ext.phi, &ext.t_star);
                    assert_eq!(left_status, right_status, "context {ctx}");
                } else {
                    assert!(!left_status);
                }
            }
        }
    }
}
