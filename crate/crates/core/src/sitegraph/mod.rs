//! Site graphs, contact maps and embeddings.
//!
//! A site graph has agents (nodes) carrying sites (connection slots); edges
//! join sites. Sites with no owning agent are *dangling* and stand for
//! half-edges: paired with a type they act as binding types ("bound to a site
//! of this kind"). Everything is typed against a fixed contact graph which
//! declares the agent types, their sites, the allowed edge types, and the
//! internal states a site may take.
//!
//! All values here are immutable after construction; operations are pure.

mod canon;
mod embed;

pub use canon::{canonical_form, canonical_order, isomorphic, CanonicalForm, Marking};
pub use embed::{count_embeddings, enumerate_embeddings, Embedding};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Identifier of a concrete agent inside one site graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize)]
pub struct AgentId(pub u32);

/// Identifier of a concrete site inside one site graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize)]
pub struct SiteId(pub u32);

/// An agent type of the contact graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize)]
pub struct CAgentId(pub u32);

/// A site type of the contact graph (global across agent types).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize)]
pub struct CSiteId(pub u32);

/// Index into the state list of a site type.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize)]
pub struct StateId(pub u32);

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge endpoints must be distinct sites")]
    SelfEdge,
    #[error("unknown identifier referenced: {0}")]
    UnknownId(String),
    #[error("graph is not realizable: {0:?}")]
    NotRealizable(Vec<Violation>),
    #[error("typing is not a homomorphism into the contact graph: {0}")]
    BadTyping(String),
    #[error("local injectivity violated: agent {0:?} carries two copies of site type {1:?}")]
    LocalInjectivity(AgentId, CSiteId),
    #[error("state {0:?} is not declared for site type {1:?}")]
    BadState(StateId, CSiteId),
    #[error("{0}")]
    Other(String),
}

/// An untyped site graph: agents, sites, a partial ownership map and a
/// symmetric irreflexive edge relation.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SiteGraph {
    agents: BTreeSet<AgentId>,
    sites: BTreeSet<SiteId>,
    owner: BTreeMap<SiteId, AgentId>,
    /// Stored once per edge as (min, max).
    edges: BTreeSet<(SiteId, SiteId)>,
}

/// One realizability violation, per the three conditions on site graphs.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub sites: Vec<SiteId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ViolationKind {
    /// A site with more than one incident edge.
    MultiEdgeSite,
    /// A dangling site with no incident edge.
    FreeDangling,
    /// An edge both of whose endpoints are dangling.
    TwoDanglingEndpoints,
}

/// Result of [`check_realizable`].
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RealizabilityReport {
    pub is_realizable: bool,
    pub violations: Vec<Violation>,
}

impl SiteGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_agent(&mut self, id: AgentId) {
        self.agents.insert(id);
    }

    pub fn add_site(&mut self, id: SiteId, owner: Option<AgentId>) -> Result<(), GraphError> {
        if let Some(a) = owner {
            if !self.agents.contains(&a) {
                return Err(GraphError::UnknownId(format!("agent {a:?}")));
            }
            self.owner.insert(id, a);
        }
        self.sites.insert(id);
        Ok(())
    }

    pub fn add_edge(&mut self, s: SiteId, t: SiteId) -> Result<(), GraphError> {
        if s == t {
            return Err(GraphError::SelfEdge);
        }
        if !self.sites.contains(&s) || !self.sites.contains(&t) {
            return Err(GraphError::UnknownId(format!("site {s:?} or {t:?}")));
        }
        self.edges.insert((s.min(t), s.max(t)));
        Ok(())
    }

    pub fn remove_edge(&mut self, s: SiteId, t: SiteId) {
        self.edges.remove(&(s.min(t), s.max(t)));
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().copied()
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.sites.iter().copied()
    }

    pub fn has_agent(&self, a: AgentId) -> bool {
        self.agents.contains(&a)
    }

    pub fn has_site(&self, s: SiteId) -> bool {
        self.sites.contains(&s)
    }

    pub fn owner(&self, s: SiteId) -> Option<AgentId> {
        self.owner.get(&s).copied()
    }

    pub fn is_dangling(&self, s: SiteId) -> bool {
        self.sites.contains(&s) && !self.owner.contains_key(&s)
    }

    pub fn edges(&self) -> impl Iterator<Item = (SiteId, SiteId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// All edge partners of a site (more than one only in non-realizable graphs).
    pub fn partners(&self, s: SiteId) -> Vec<SiteId> {
        let mut out = Vec::new();
        for &(x, y) in &self.edges {
            if x == s {
                out.push(y);
            } else if y == s {
                out.push(x);
            }
        }
        out
    }

    /// The unique partner of a site in a realizable graph, `None` when free.
    pub fn partner(&self, s: SiteId) -> Option<SiteId> {
        self.partners(s).into_iter().next()
    }

    pub fn is_free(&self, s: SiteId) -> bool {
        self.partners(s).is_empty()
    }

    /// Sites owned by an agent, ascending.
    pub fn sites_of(&self, a: AgentId) -> Vec<SiteId> {
        self.owner
            .iter()
            .filter(|&(_, &o)| o == a)
            .map(|(&s, _)| s)
            .collect()
    }
}

/// Checks conditions (i)-(iii): at most one edge per site, no free dangling
/// site, at most one dangling endpoint per edge.
pub fn check_realizable(g: &SiteGraph) -> RealizabilityReport {
    let mut violations = Vec::new();
    for s in g.sites() {
        let partners = g.partners(s);
        if partners.len() > 1 {
            let mut sites = vec![s];
            sites.extend(partners.iter().copied());
            violations.push(Violation {
                kind: ViolationKind::MultiEdgeSite,
                sites,
            });
        }
        if g.is_dangling(s) && partners.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::FreeDangling,
                sites: vec![s],
            });
        }
    }
    for (s, t) in g.edges() {
        if g.is_dangling(s) && g.is_dangling(t) {
            violations.push(Violation {
                kind: ViolationKind::TwoDanglingEndpoints,
                sites: vec![s, t],
            });
        }
    }
    RealizabilityReport {
        is_realizable: violations.is_empty(),
        violations,
    }
}

/// The fixed type graph: agent types with named sites, per-site state
/// alphabets, and the set of allowed edge types.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactGraph {
    agent_names: Vec<String>,
    site_names: Vec<String>,
    site_owner: Vec<CAgentId>,
    sites_per_agent: Vec<Vec<CSiteId>>,
    states: Vec<Vec<String>>,
    edge_types: BTreeSet<(CSiteId, CSiteId)>,
}

impl ContactGraph {
    pub fn new() -> Self {
        ContactGraph {
            agent_names: Vec::new(),
            site_names: Vec::new(),
            site_owner: Vec::new(),
            sites_per_agent: Vec::new(),
            states: Vec::new(),
            edge_types: BTreeSet::new(),
        }
    }

    pub fn add_agent_type(&mut self, name: &str) -> CAgentId {
        let id = CAgentId(self.agent_names.len() as u32);
        self.agent_names.push(name.to_string());
        self.sites_per_agent.push(Vec::new());
        id
    }

    pub fn add_site_type(&mut self, owner: CAgentId, name: &str, states: Vec<String>) -> CSiteId {
        let id = CSiteId(self.site_names.len() as u32);
        self.site_names.push(name.to_string());
        self.site_owner.push(owner);
        self.states.push(states);
        self.sites_per_agent[owner.0 as usize].push(id);
        id
    }

    pub fn add_edge_type(&mut self, s: CSiteId, t: CSiteId) {
        self.edge_types.insert((s.min(t), s.max(t)));
    }

    pub fn n_agent_types(&self) -> usize {
        self.agent_names.len()
    }

    pub fn agent_name(&self, a: CAgentId) -> &str {
        &self.agent_names[a.0 as usize]
    }

    pub fn site_name(&self, s: CSiteId) -> &str {
        &self.site_names[s.0 as usize]
    }

    pub fn site_owner_type(&self, s: CSiteId) -> CAgentId {
        self.site_owner[s.0 as usize]
    }

    pub fn sites_of_type(&self, a: CAgentId) -> &[CSiteId] {
        &self.sites_per_agent[a.0 as usize]
    }

    pub fn states_of(&self, s: CSiteId) -> &[String] {
        &self.states[s.0 as usize]
    }

    pub fn agent_type_by_name(&self, name: &str) -> Option<CAgentId> {
        self.agent_names
            .iter()
            .position(|n| n == name)
            .map(|i| CAgentId(i as u32))
    }

    pub fn site_by_name(&self, a: CAgentId, name: &str) -> Option<CSiteId> {
        self.sites_of_type(a)
            .iter()
            .copied()
            .find(|&s| self.site_name(s) == name)
    }

    pub fn state_by_name(&self, s: CSiteId, name: &str) -> Option<StateId> {
        self.states_of(s)
            .iter()
            .position(|n| n == name)
            .map(|i| StateId(i as u32))
    }

    pub fn is_edge_type(&self, s: CSiteId, t: CSiteId) -> bool {
        self.edge_types.contains(&(s.min(t), s.max(t)))
    }

    /// Site types a given site type may bind, ascending.
    pub fn partners_of_type(&self, s: CSiteId) -> Vec<CSiteId> {
        let mut out = Vec::new();
        for &(x, y) in &self.edge_types {
            if x == s {
                out.push(y);
            } else if y == s {
                out.push(x);
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn edge_types(&self) -> impl Iterator<Item = (CSiteId, CSiteId)> + '_ {
        self.edge_types.iter().copied()
    }
}

impl Default for ContactGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// A realizable site graph together with its typing into the contact graph
/// and the (partial) internal states of its owned sites.
#[derive(Clone, Debug)]
pub struct ContactMap {
    cg: Arc<ContactGraph>,
    graph: SiteGraph,
    agent_ty: BTreeMap<AgentId, CAgentId>,
    site_ty: BTreeMap<SiteId, CSiteId>,
    state: BTreeMap<SiteId, StateId>,
    /// (agent, site type) -> concrete site, for the owned sites.
    by_type: BTreeMap<(AgentId, CSiteId), SiteId>,
}

impl PartialEq for ContactMap {
    fn eq(&self, other: &Self) -> bool {
        self.graph == other.graph
            && self.agent_ty == other.agent_ty
            && self.site_ty == other.site_ty
            && self.state == other.state
    }
}
impl Eq for ContactMap {}

impl ContactMap {
    /// Validates realizability, homomorphism conditions, local injectivity
    /// and state well-formedness.
    pub fn new(
        cg: Arc<ContactGraph>,
        graph: SiteGraph,
        agent_ty: BTreeMap<AgentId, CAgentId>,
        site_ty: BTreeMap<SiteId, CSiteId>,
        state: BTreeMap<SiteId, StateId>,
    ) -> Result<Self, GraphError> {
        let report = check_realizable(&graph);
        if !report.is_realizable {
            return Err(GraphError::NotRealizable(report.violations));
        }
        for a in graph.agents() {
            if !agent_ty.contains_key(&a) {
                return Err(GraphError::BadTyping(format!("agent {a:?} untyped")));
            }
        }
        let mut by_type = BTreeMap::new();
        for s in graph.sites() {
            let &ty = site_ty
                .get(&s)
                .ok_or_else(|| GraphError::BadTyping(format!("site {s:?} untyped")))?;
            if let Some(a) = graph.owner(s) {
                if cg.site_owner_type(ty) != agent_ty[&a] {
                    return Err(GraphError::BadTyping(format!(
                        "site {s:?} of type {ty:?} owned by agent of wrong type"
                    )));
                }
                if by_type.insert((a, ty), s).is_some() {
                    return Err(GraphError::LocalInjectivity(a, ty));
                }
            }
        }
        for (s, t) in graph.edges() {
            if !cg.is_edge_type(site_ty[&s], site_ty[&t]) {
                return Err(GraphError::BadTyping(format!(
                    "edge ({s:?},{t:?}) has no contact-graph counterpart"
                )));
            }
        }
        for (&s, &st) in &state {
            if graph.owner(s).is_none() {
                return Err(GraphError::BadTyping(format!(
                    "dangling site {s:?} cannot carry a state"
                )));
            }
            let ty = site_ty[&s];
            if st.0 as usize >= cg.states_of(ty).len() {
                return Err(GraphError::BadState(st, ty));
            }
        }
        Ok(ContactMap {
            cg,
            graph,
            agent_ty,
            site_ty,
            state,
            by_type,
        })
    }

    pub fn empty(cg: Arc<ContactGraph>) -> Self {
        ContactMap::new(
            cg,
            SiteGraph::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .expect("empty graph is realizable")
    }

    pub fn contact_graph(&self) -> &Arc<ContactGraph> {
        &self.cg
    }

    pub fn graph(&self) -> &SiteGraph {
        &self.graph
    }

    pub fn agent_type(&self, a: AgentId) -> CAgentId {
        self.agent_ty[&a]
    }

    pub fn site_type(&self, s: SiteId) -> CSiteId {
        self.site_ty[&s]
    }

    pub fn state_of(&self, s: SiteId) -> Option<StateId> {
        self.state.get(&s).copied()
    }

    /// The concrete site of `a` with site type `ty`, if present.
    pub fn site_of(&self, a: AgentId, ty: CSiteId) -> Option<SiteId> {
        self.by_type.get(&(a, ty)).copied()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.graph.agents()
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.graph.sites()
    }

    pub fn dangling_sites(&self) -> Vec<SiteId> {
        self.graph
            .sites()
            .filter(|&s| self.graph.is_dangling(s))
            .collect()
    }

    /// Agents adjacent to `a` through an edge between their sites.
    pub fn neighbours(&self, a: AgentId) -> BTreeSet<AgentId> {
        let mut out = BTreeSet::new();
        for s in self.graph.sites_of(a) {
            if let Some(p) = self.graph.partner(s) {
                if let Some(b) = self.graph.owner(p) {
                    out.insert(b);
                }
            }
        }
        out
    }

    /// Partition of the agents into connected components, each sorted, the
    /// list sorted by its least member.
    pub fn connected_components(&self) -> Vec<Vec<AgentId>> {
        let mut seen = BTreeSet::new();
        let mut comps = Vec::new();
        for root in self.graph.agents() {
            if seen.contains(&root) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![root];
            seen.insert(root);
            while let Some(a) = stack.pop() {
                comp.push(a);
                for b in self.neighbours(a) {
                    if seen.insert(b) {
                        stack.push(b);
                    }
                }
            }
            comp.sort();
            comps.push(comp);
        }
        comps
    }

    /// A mixture is fully specified: no dangling sites, every agent carries
    /// every site of its type, and every site with a declared state alphabet
    /// has a state.
    pub fn is_mixture(&self) -> bool {
        for s in self.graph.sites() {
            if self.graph.is_dangling(s) {
                return false;
            }
        }
        for a in self.graph.agents() {
            for &ty in self.cg.sites_of_type(self.agent_ty[&a]) {
                match self.site_of(a, ty) {
                    None => return false,
                    Some(s) => {
                        if !self.cg.states_of(ty).is_empty() && !self.state.contains_key(&s) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Greatest agent distance within a component (0 for a single agent),
    /// maximized over components. Empty graphs have diameter 0.
    pub fn diameter(&self) -> usize {
        let mut best = 0;
        for a in self.graph.agents() {
            // BFS from every agent; graphs are tiny.
            let mut dist = BTreeMap::new();
            dist.insert(a, 0usize);
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(a);
            while let Some(x) = queue.pop_front() {
                let d = dist[&x];
                best = best.max(d);
                for y in self.neighbours(x) {
                    if !dist.contains_key(&y) {
                        dist.insert(y, d + 1);
                        queue.push_back(y);
                    }
                }
            }
        }
        best
    }

    /// Restriction to a subset of agents and sites, keeping identifiers.
    /// Sites whose owner is dropped become dangling; all edges inside the
    /// kept site set are retained. Fails if the result is not realizable.
    pub fn restrict(
        &self,
        agents: &BTreeSet<AgentId>,
        sites: &BTreeSet<SiteId>,
    ) -> Result<ContactMap, GraphError> {
        let mut g = SiteGraph::new();
        for &a in agents {
            g.add_agent(a);
        }
        for &s in sites {
            let owner = self.graph.owner(s).filter(|o| agents.contains(o));
            g.add_site(s, owner)?;
        }
        for (s, t) in self.graph.edges() {
            if sites.contains(&s) && sites.contains(&t) {
                g.add_edge(s, t)?;
            }
        }
        let agent_ty = agents.iter().map(|&a| (a, self.agent_ty[&a])).collect();
        let site_ty = sites.iter().map(|&s| (s, self.site_ty[&s])).collect();
        let state = self
            .state
            .iter()
            .filter(|(s, _)| sites.contains(s) && g.owner(**s).is_some())
            .map(|(&s, &v)| (s, v))
            .collect();
        ContactMap::new(self.cg.clone(), g, agent_ty, site_ty, state)
    }

    /// Internal constructor for rewriting: replaces edges and states without
    /// re-running full validation (callers guarantee well-formedness).
    pub(crate) fn with_edges_and_states(
        &self,
        edges: BTreeSet<(SiteId, SiteId)>,
        state: BTreeMap<SiteId, StateId>,
    ) -> ContactMap {
        let mut graph = self.graph.clone();
        graph.edges = edges
            .into_iter()
            .map(|(s, t)| (s.min(t), s.max(t)))
            .collect();
        debug_assert!(check_realizable(&graph).is_realizable);
        ContactMap {
            cg: self.cg.clone(),
            graph,
            agent_ty: self.agent_ty.clone(),
            site_ty: self.site_ty.clone(),
            state,
            by_type: self.by_type.clone(),
        }
    }

    pub fn fresh_agent_id(&self) -> AgentId {
        AgentId(self.graph.agents.iter().next_back().map_or(0, |a| a.0 + 1))
    }

    pub fn fresh_site_id(&self) -> SiteId {
        SiteId(self.graph.sites.iter().next_back().map_or(0, |s| s.0 + 1))
    }
}

/// Convenience builder used by the parser, the gluing construction and the
/// refinement engine.
#[derive(Clone, Debug)]
pub struct ContactMapBuilder {
    cg: Arc<ContactGraph>,
    graph: SiteGraph,
    agent_ty: BTreeMap<AgentId, CAgentId>,
    site_ty: BTreeMap<SiteId, CSiteId>,
    state: BTreeMap<SiteId, StateId>,
    next_agent: u32,
    next_site: u32,
}

impl ContactMapBuilder {
    pub fn new(cg: Arc<ContactGraph>) -> Self {
        ContactMapBuilder {
            cg,
            graph: SiteGraph::new(),
            agent_ty: BTreeMap::new(),
            site_ty: BTreeMap::new(),
            state: BTreeMap::new(),
            next_agent: 0,
            next_site: 0,
        }
    }

    pub fn from_map(cm: &ContactMap) -> Self {
        ContactMapBuilder {
            cg: cm.cg.clone(),
            graph: cm.graph.clone(),
            agent_ty: cm.agent_ty.clone(),
            site_ty: cm.site_ty.clone(),
            state: cm.state.clone(),
            next_agent: cm.fresh_agent_id().0,
            next_site: cm.fresh_site_id().0,
        }
    }

    pub fn contact_graph(&self) -> &Arc<ContactGraph> {
        &self.cg
    }

    pub fn add_agent(&mut self, ty: CAgentId) -> AgentId {
        let id = AgentId(self.next_agent);
        self.next_agent += 1;
        self.graph.add_agent(id);
        self.agent_ty.insert(id, ty);
        id
    }

    pub fn add_site(
        &mut self,
        owner: Option<AgentId>,
        ty: CSiteId,
        state: Option<StateId>,
    ) -> SiteId {
        let id = SiteId(self.next_site);
        self.next_site += 1;
        self.graph.add_site(id, owner).expect("owner exists");
        self.site_ty.insert(id, ty);
        if let Some(st) = state {
            self.state.insert(id, st);
        }
        id
    }

    /// Turns an existing dangling site into a site owned by `agent`.
    pub fn claim_site(&mut self, site: SiteId, agent: AgentId) {
        debug_assert!(self.graph.is_dangling(site));
        self.graph.owner.insert(site, agent);
    }

    pub fn set_state(&mut self, site: SiteId, state: StateId) {
        self.state.insert(site, state);
    }

    pub fn add_edge(&mut self, s: SiteId, t: SiteId) -> Result<(), GraphError> {
        self.graph.add_edge(s, t)
    }

    pub fn build(self) -> Result<ContactMap, GraphError> {
        ContactMap::new(self.cg, self.graph, self.agent_ty, self.site_ty, self.state)
    }
}

impl fmt::Display for ContactMap {
    /// Debug-oriented rendering; the model module owns the external syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for a in self.graph.agents() {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{}#{}(", self.cg.agent_name(self.agent_ty[&a]), a.0)?;
            let mut sfirst = true;
            for s in self.graph.sites_of(a) {
                if !sfirst {
                    write!(f, " ")?;
                }
                sfirst = false;
                write!(f, "{}", self.cg.site_name(self.site_ty[&s]))?;
                if let Some(st) = self.state_of(s) {
                    write!(f, "~{}", self.cg.states_of(self.site_ty[&s])[st.0 as usize])?;
                }
                match self.graph.partner(s) {
                    None => {}
                    Some(p) => {
                        if let Some(b) = self.graph.owner(p) {
                            write!(f, "!{}#{}", self.cg.site_name(self.site_ty[&p]), b.0)?;
                        } else {
                            write!(
                                f,
                                "!{}.{}",
                                self.cg.site_name(self.site_ty[&p]),
                                self.cg
                                    .agent_name(self.cg.site_owner_type(self.site_ty[&p]))
                            )?;
                        }
                    }
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}
