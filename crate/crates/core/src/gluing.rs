//! Minimal gluings (multi-sums), pullbacks and pushouts of contact maps.
//!
//! A gluing of `a` and `b` is a cospan a -> h <- b of embeddings with `h`
//! realizable and jointly covered by the two images. Any cospan over the same
//! contact graph factors uniquely through exactly one *minimal* gluing, so
//! the family enumerates all minimal ways the two graphs can overlap.
//!
//! The enumeration works on *correspondences*: partial injective, type- and
//! structure-compatible matchings between the items of `a` and `b`, closed
//! under the consequences of realizability — identified agents identify their
//! common site types, identified bound sites identify their unique edge
//! partners, identified owned sites identify their owners. Every closed
//! consistent correspondence determines one minimal gluing (its pushout) and
//! distinct correspondences give non-isomorphic cospans, so deduplication is
//! by the correspondence itself.

use std::collections::{BTreeMap, BTreeSet};

use crate::rules::{Rule, RuleSide};
use crate::sitegraph::{AgentId, ContactMap, ContactMapBuilder, Embedding, SiteId};

/// A span of embeddings out of a shared apex.
#[derive(Clone, Debug)]
pub struct Span {
    pub apex: ContactMap,
    /// apex -> a
    pub left: Embedding,
    /// apex -> b
    pub right: Embedding,
}

/// One minimal gluing: the cospan into `glued` plus its overlap span.
#[derive(Clone, Debug)]
pub struct MinimalGluing {
    pub glued: ContactMap,
    /// a -> glued
    pub left: Embedding,
    /// b -> glued
    pub right: Embedding,
    pub overlap: Span,
    /// Matched agents (a-side, b-side).
    pub agent_pairs: BTreeSet<(AgentId, AgentId)>,
    /// Matched sites (a-side, b-side).
    pub site_pairs: BTreeSet<(SiteId, SiteId)>,
}

impl MinimalGluing {
    /// True when the left source is wholly absorbed by the right one: every
    /// agent and site of `a` is matched, so the right leg b -> glued is an
    /// isomorphism.
    pub fn absorbs_left(&self, a: &ContactMap) -> bool {
        self.agent_pairs.len() == a.graph().n_agents()
            && self.site_pairs.len() == a.graph().n_sites()
    }
}

/// Relevance of a minimal gluing with respect to a rule side: the two images
/// must share at least one site the rule modifies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevanceTag {
    pub relevant: bool,
    /// Sites of `glued` lying in both images and modified by the rule.
    pub witness_sites: BTreeSet<SiteId>,
}

#[derive(Debug, thiserror::Error)]
pub enum GluingError {
    #[error("neither leg of the gluing has the requested rule side as source")]
    SideMismatch,
    #[error("push-out would not be realizable: {0}")]
    NotRealizable(String),
}

/// All minimal gluings of `a` and `b`, in a deterministic order starting with
/// the disjoint sum (empty overlap).
pub fn minimal_gluings(a: &ContactMap, b: &ContactMap) -> Vec<MinimalGluing> {
    enumerate_correspondences(a, b)
        .into_iter()
        .map(|c| c.into_gluing())
        .collect()
}

/// Minimal gluings of pattern `c` against `t` that are *relevant*: some
/// matched site pair lands on a modified site of `t`. Used by the growth
/// policy; `modified` is expressed in `t`'s identifiers.
pub fn relevant_gluings(
    c: &ContactMap,
    t: &ContactMap,
    modified: &BTreeSet<SiteId>,
) -> Vec<MinimalGluing> {
    enumerate_correspondences(c, t)
        .into_iter()
        .filter(|corr| corr.a2b_sites.values().any(|s| modified.contains(s)))
        .map(|corr| corr.into_gluing())
        .collect()
}

/// Classifies one gluing against a rule side. `left_source` and
/// `right_source` are the two graphs the gluing was enumerated from; one of
/// them must be the rule's chosen side.
pub fn classify_relevance(
    mg: &MinimalGluing,
    left_source: &ContactMap,
    right_source: &ContactMap,
    rule: &Rule,
    side: RuleSide,
) -> Result<RelevanceTag, GluingError> {
    let side_map = rule.side(side);
    let (pairs_site_in_side, leg): (Vec<SiteId>, &Embedding) = if right_source == side_map {
        (mg.site_pairs.iter().map(|&(_, y)| y).collect(), &mg.right)
    } else if left_source == side_map {
        (mg.site_pairs.iter().map(|&(x, _)| x).collect(), &mg.left)
    } else {
        return Err(GluingError::SideMismatch);
    };
    let modified = rule.modified_sites();
    let mut witness = BTreeSet::new();
    for s_side in pairs_site_in_side {
        if modified.contains(&s_side) {
            witness.insert(leg.site(s_side));
        }
    }
    Ok(RelevanceTag {
        relevant: !witness.is_empty(),
        witness_sites: witness,
    })
}

/// Pullback of a cospan f: a -> h <- b :g, as pairs of items with equal
/// images. Edge pairs whose two endpoints would both be dangling in the apex
/// (interlocking half edges) are dropped together with their sites so the
/// apex stays realizable; this loses nothing for the gluings arising in the
/// compiler, where energy patterns carry no binding types.
pub fn pullback(a: &ContactMap, b: &ContactMap, f: &Embedding, g: &Embedding) -> Span {
    let mut agent_pairs = BTreeSet::new();
    for x in a.agents() {
        for y in b.agents() {
            if f.agent(x) == g.agent(y) {
                agent_pairs.insert((x, y));
            }
        }
    }
    let mut site_pairs = BTreeSet::new();
    for s in a.sites() {
        for u in b.sites() {
            if f.site(s) == g.site(u) {
                site_pairs.insert((s, u));
            }
        }
    }
    build_span(a, b, &agent_pairs, &site_pairs)
}

/// Pushout of a span: glues `a` and `b` along the identifications induced by
/// the two legs, closed under the consequences of realizability. Fails when
/// the closure is inconsistent, i.e. no realizable gluing exists.
pub fn pushout<'a>(
    span: &Span,
    a: &'a ContactMap,
    b: &'a ContactMap,
) -> Result<MinimalGluing, GluingError> {
    let mut corr = Correspondence::new(a, b);
    let mut ok = true;
    for x in span.apex.agents() {
        ok &= corr.merge_agents(span.left.agent(x), span.right.agent(x));
    }
    for s in span.apex.sites() {
        ok &= corr.merge_sites(span.left.site(s), span.right.site(s));
    }
    if !ok {
        return Err(GluingError::NotRealizable(
            "identifications force an inconsistent merge".into(),
        ));
    }
    Ok(corr.into_gluing())
}

type CorrKey = (Vec<(AgentId, AgentId)>, Vec<(SiteId, SiteId)>);

/// A partial injective matching between the items of two contact maps,
/// maintained closed under the edge/owner/site-type forcing rules.
struct Correspondence<'a> {
    a: &'a ContactMap,
    b: &'a ContactMap,
    a2b_agents: BTreeMap<AgentId, AgentId>,
    b2a_agents: BTreeMap<AgentId, AgentId>,
    a2b_sites: BTreeMap<SiteId, SiteId>,
    b2a_sites: BTreeMap<SiteId, SiteId>,
}

impl<'a> Correspondence<'a> {
    fn new(a: &'a ContactMap, b: &'a ContactMap) -> Self {
        Correspondence {
            a,
            b,
            a2b_agents: BTreeMap::new(),
            b2a_agents: BTreeMap::new(),
            a2b_sites: BTreeMap::new(),
            b2a_sites: BTreeMap::new(),
        }
    }

    /// Returns false if the merge (with its closure) is inconsistent. On
    /// failure the correspondence is left in a dirty state; callers restore
    /// from a snapshot.
    fn merge_agents(&mut self, u: AgentId, v: AgentId) -> bool {
        match (self.a2b_agents.get(&u), self.b2a_agents.get(&v)) {
            (Some(&v0), _) if v0 == v => return true,
            (Some(_), _) | (_, Some(_)) => return false, // injectivity
            _ => {}
        }
        if self.a.agent_type(u) != self.b.agent_type(v) {
            return false;
        }
        self.a2b_agents.insert(u, v);
        self.b2a_agents.insert(v, u);
        // Local injectivity in the glued graph forces common site types to
        // merge.
        for &ty in self.a.contact_graph().sites_of_type(self.a.agent_type(u)) {
            if let (Some(s), Some(t)) = (self.a.site_of(u, ty), self.b.site_of(v, ty)) {
                if !self.merge_sites(s, t) {
                    return false;
                }
            }
        }
        true
    }

    fn merge_sites(&mut self, s: SiteId, t: SiteId) -> bool {
        match (self.a2b_sites.get(&s), self.b2a_sites.get(&t)) {
            (Some(&t0), _) if t0 == t => return true,
            (Some(_), _) | (_, Some(_)) => return false,
            _ => {}
        }
        if self.a.site_type(s) != self.b.site_type(t) {
            return false;
        }
        // A site free on one side and bound on the other cannot merge: the
        // free side's leg would map a free site to a bound one.
        let pa = self.a.graph().partner(s);
        let pb = self.b.graph().partner(t);
        if pa.is_some() != pb.is_some() {
            return false;
        }
        // Conflicting internal states cannot merge.
        if let (Some(x), Some(y)) = (self.a.state_of(s), self.b.state_of(t)) {
            if x != y {
                return false;
            }
        }
        self.a2b_sites.insert(s, t);
        self.b2a_sites.insert(t, s);
        if let (Some(pa), Some(pb)) = (pa, pb) {
            if !self.merge_sites(pa, pb) {
                return false;
            }
        }
        if let (Some(oa), Some(ob)) = (self.a.graph().owner(s), self.b.graph().owner(t)) {
            if !self.merge_agents(oa, ob) {
                return false;
            }
        }
        true
    }

    fn key(&self) -> CorrKey {
        (
            self.a2b_agents.iter().map(|(&x, &y)| (x, y)).collect(),
            self.a2b_sites.iter().map(|(&x, &y)| (x, y)).collect(),
        )
    }

    fn from_key(a: &'a ContactMap, b: &'a ContactMap, key: &CorrKey) -> Self {
        let mut c = Correspondence::new(a, b);
        let mut ok = true;
        for &(u, v) in &key.0 {
            ok &= c.merge_agents(u, v);
        }
        for &(s, t) in &key.1 {
            ok &= c.merge_sites(s, t);
        }
        debug_assert!(ok, "keys always come from consistent correspondences");
        c
    }

    /// Quotient of the disjoint union by the correspondence, together with
    /// its legs and overlap.
    fn into_gluing(self) -> MinimalGluing {
        let (a, b) = (self.a, self.b);
        let mut builder = ContactMapBuilder::new(a.contact_graph().clone());
        let mut left = Embedding {
            agents: BTreeMap::new(),
            sites: BTreeMap::new(),
        };
        let mut right = Embedding {
            agents: BTreeMap::new(),
            sites: BTreeMap::new(),
        };
        for u in a.agents() {
            let id = builder.add_agent(a.agent_type(u));
            left.agents.insert(u, id);
        }
        for v in b.agents() {
            let id = match self.b2a_agents.get(&v) {
                Some(u) => left.agents[u],
                None => builder.add_agent(b.agent_type(v)),
            };
            right.agents.insert(v, id);
        }
        for s in a.sites() {
            let owner = a.graph().owner(s).map(|u| left.agents[&u]);
            let state = a
                .state_of(s)
                .or_else(|| self.a2b_sites.get(&s).and_then(|t| b.state_of(*t)));
            let id = builder.add_site(owner, a.site_type(s), state);
            left.sites.insert(s, id);
        }
        for t in b.sites() {
            let id = match self.b2a_sites.get(&t) {
                Some(s) => {
                    let id = left.sites[s];
                    // Ownership may come from the b side only (a dangling
                    // a-site merged with an owned b-site).
                    if a.graph().owner(*s).is_none() {
                        if let Some(vb) = b.graph().owner(t) {
                            builder.claim_site(id, right.agents[&vb]);
                        }
                    }
                    id
                }
                None => builder.add_site(
                    b.graph().owner(t).map(|v| right.agents[&v]),
                    b.site_type(t),
                    b.state_of(t),
                ),
            };
            right.sites.insert(t, id);
        }
        for (s, t) in a.graph().edges() {
            builder
                .add_edge(left.sites[&s], left.sites[&t])
                .expect("edge endpoints placed");
        }
        for (s, t) in b.graph().edges() {
            builder
                .add_edge(right.sites[&s], right.sites[&t])
                .expect("edge endpoints placed");
        }
        let glued = builder
            .build()
            .expect("closed correspondence yields a realizable gluing");
        let agent_pairs: BTreeSet<(AgentId, AgentId)> =
            self.a2b_agents.iter().map(|(&x, &y)| (x, y)).collect();
        let site_pairs: BTreeSet<(SiteId, SiteId)> =
            self.a2b_sites.iter().map(|(&x, &y)| (x, y)).collect();
        let overlap = build_span(a, b, &agent_pairs, &site_pairs);
        MinimalGluing {
            glued,
            left,
            right,
            overlap,
            agent_pairs,
            site_pairs,
        }
    }
}

/// Apex of a correspondence: the shared part, with ownership kept only where
/// both sides own, and edges kept only where both sides have them. Site
/// pairs that would end up as free or interlocking dangling sites are
/// dropped (see [`pullback`]).
fn build_span(
    a: &ContactMap,
    b: &ContactMap,
    agent_pairs: &BTreeSet<(AgentId, AgentId)>,
    site_pairs: &BTreeSet<(SiteId, SiteId)>,
) -> Span {
    let mut builder = ContactMapBuilder::new(a.contact_graph().clone());
    let mut left = Embedding {
        agents: BTreeMap::new(),
        sites: BTreeMap::new(),
    };
    let mut right = Embedding {
        agents: BTreeMap::new(),
        sites: BTreeMap::new(),
    };
    let owned_in_apex = |&(s, t): &(SiteId, SiteId)| -> bool {
        match (a.graph().owner(s), b.graph().owner(t)) {
            (Some(u), Some(v)) => agent_pairs.contains(&(u, v)),
            _ => false,
        }
    };
    // Iteratively drop apex-dangling site pairs that have no apex edge to an
    // apex-owned endpoint: they would be free dangling sites or half edges
    // joining two dangling ends.
    let mut kept: BTreeSet<(SiteId, SiteId)> = site_pairs.clone();
    loop {
        let mut drop: Vec<(SiteId, SiteId)> = Vec::new();
        for &(s, t) in &kept {
            if owned_in_apex(&(s, t)) {
                continue;
            }
            let ok = match (a.graph().partner(s), b.graph().partner(t)) {
                (Some(pa), Some(pb)) => {
                    kept.contains(&(pa, pb)) && owned_in_apex(&(pa, pb))
                }
                _ => false,
            };
            if !ok {
                drop.push((s, t));
            }
        }
        if drop.is_empty() {
            break;
        }
        for d in drop {
            kept.remove(&d);
        }
    }
    let mut agent_of_pair: BTreeMap<(AgentId, AgentId), AgentId> = BTreeMap::new();
    for &(u, v) in agent_pairs {
        let id = builder.add_agent(a.agent_type(u));
        agent_of_pair.insert((u, v), id);
        left.agents.insert(id, u);
        right.agents.insert(id, v);
    }
    let mut site_of_pair: BTreeMap<(SiteId, SiteId), SiteId> = BTreeMap::new();
    for &(s, t) in &kept {
        let owner = match (a.graph().owner(s), b.graph().owner(t)) {
            (Some(u), Some(v)) if agent_pairs.contains(&(u, v)) => Some(agent_of_pair[&(u, v)]),
            _ => None,
        };
        let state = match (a.state_of(s), b.state_of(t)) {
            (Some(x), Some(y)) if x == y && owner.is_some() => Some(x),
            _ => None,
        };
        let id = builder.add_site(owner, a.site_type(s), state);
        site_of_pair.insert((s, t), id);
        left.sites.insert(id, s);
        right.sites.insert(id, t);
    }
    for (&(s, t), &id) in &site_of_pair {
        if let (Some(pa), Some(pb)) = (a.graph().partner(s), b.graph().partner(t)) {
            if let Some(&pid) = site_of_pair.get(&(pa, pb)) {
                if pid > id {
                    builder.add_edge(id, pid).unwrap();
                }
            }
        }
    }
    let apex = builder
        .build()
        .expect("apex of a correspondence is realizable");
    Span { apex, left, right }
}

#[derive(Clone, Copy)]
enum Generator {
    Agents(AgentId, AgentId),
    Sites(SiteId, SiteId),
}

impl Generator {
    fn apply(&self, c: &mut Correspondence) -> bool {
        match *self {
            Generator::Agents(u, v) => c.merge_agents(u, v),
            Generator::Sites(s, t) => c.merge_sites(s, t),
        }
    }
}

/// Depth-first enumeration of all closed consistent correspondences, seeded
/// by agent pairings and dangling-to-bound site identifications.
fn enumerate_correspondences<'a>(
    a: &'a ContactMap,
    b: &'a ContactMap,
) -> Vec<Correspondence<'a>> {
    let mut gens: Vec<Generator> = Vec::new();
    for u in a.agents() {
        for v in b.agents() {
            if a.agent_type(u) == b.agent_type(v) {
                gens.push(Generator::Agents(u, v));
            }
        }
    }
    for d in a.dangling_sites() {
        for t in b.sites() {
            if a.site_type(d) == b.site_type(t) && !b.graph().is_free(t) {
                gens.push(Generator::Sites(d, t));
            }
        }
    }
    for d in b.dangling_sites() {
        for s in a.sites() {
            if a.site_type(s) == b.site_type(d) && !a.graph().is_free(s) && !a.graph().is_dangling(s)
        {
                gens.push(Generator::Sites(s, d));
            }
        }
    }
    fn grow(
        a: &ContactMap,
        b: &ContactMap,
        base: &CorrKey,
        gens: &[Generator],
        from: usize,
        seen: &mut BTreeSet<CorrKey>,
        keys: &mut Vec<CorrKey>,
    ) {
        for (i, g) in gens.iter().enumerate().skip(from) {
            let mut c = Correspondence::from_key(a, b, base);
            if g.apply(&mut c) {
                let key = c.key();
                if seen.insert(key.clone()) {
                    keys.push(key.clone());
                    grow(a, b, &key, gens, i + 1, seen, keys);
                }
            }
        }
    }
    let empty_key: CorrKey = (Vec::new(), Vec::new());
    let mut seen = BTreeSet::new();
    seen.insert(empty_key.clone());
    let mut keys = vec![empty_key.clone()];
    grow(a, b, &empty_key, &gens, 0, &mut seen, &mut keys);
    keys.iter()
        .map(|k| Correspondence::from_key(a, b, k))
        .collect()
}

/// Factorizations of a cospan through a minimal-gluing family: the indices of
/// members the cospan factors through, each with its mediating embedding.
/// The multi-sum property says there is exactly one.
pub fn factorizations(
    family: &[MinimalGluing],
    a: &ContactMap,
    b: &ContactMap,
    f: &Embedding,
    g: &Embedding,
    h: &ContactMap,
) -> Vec<(usize, Embedding)> {
    let mut out = Vec::new();
    'next: for (i, mg) in family.iter().enumerate() {
        // The mediating map is forced: every item of glued comes from a or b.
        let mut agents: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        let mut sites: BTreeMap<SiteId, SiteId> = BTreeMap::new();
        for u in a.agents() {
            agents.insert(mg.left.agent(u), f.agent(u));
        }
        for s in a.sites() {
            sites.insert(mg.left.site(s), f.site(s));
        }
        for v in b.agents() {
            let gl = mg.right.agent(v);
            let img = g.agent(v);
            if let Some(&prev) = agents.get(&gl) {
                if prev != img {
                    continue 'next;
                }
            }
            agents.insert(gl, img);
        }
        for t in b.sites() {
            let gl = mg.right.site(t);
            let img = g.site(t);
            if let Some(&prev) = sites.get(&gl) {
                if prev != img {
                    continue 'next;
                }
            }
            sites.insert(gl, img);
        }
        let m = Embedding { agents, sites };
        if m.validate(&mg.glued, h).is_ok() {
            out.push((i, m));
        }
    }
    out
}
