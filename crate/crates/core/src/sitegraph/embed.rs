//! Embedding enumeration between contact maps.
//!
//! An embedding is a typing-preserving homomorphism that is injective on both
//! agents and sites, sends free sites to free sites, and preserves internal
//! states where the source specifies one. Dangling sites may land on any site
//! of the right type, owned or not — this is what lets them act as binding
//! types during matching.

use std::collections::{BTreeMap, BTreeSet};

use super::{AgentId, ContactMap, SiteId};

/// A pair of injections (on agents and on sites) between two contact maps.
/// The maps are stored standalone; validity is always relative to a source
/// and target passed alongside.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Embedding {
    pub agents: BTreeMap<AgentId, AgentId>,
    pub sites: BTreeMap<SiteId, SiteId>,
}

impl Embedding {
    pub fn identity(cm: &ContactMap) -> Self {
        Embedding {
            agents: cm.agents().map(|a| (a, a)).collect(),
            sites: cm.sites().map(|s| (s, s)).collect(),
        }
    }

    pub fn agent(&self, a: AgentId) -> AgentId {
        self.agents[&a]
    }

    pub fn site(&self, s: SiteId) -> SiteId {
        self.sites[&s]
    }

    /// `other` after `self` (self: a -> b, other: b -> c).
    pub fn then(&self, other: &Embedding) -> Embedding {
        Embedding {
            agents: self
                .agents
                .iter()
                .map(|(&x, &y)| (x, other.agents[&y]))
                .collect(),
            sites: self
                .sites
                .iter()
                .map(|(&x, &y)| (x, other.sites[&y]))
                .collect(),
        }
    }

    /// Full validity check against a source and target; used by tests and by
    /// operations that accept embeddings from callers.
    pub fn validate(&self, src: &ContactMap, dst: &ContactMap) -> Result<(), String> {
        let mut seen_agents = BTreeSet::new();
        let mut seen_sites = BTreeSet::new();
        for a in src.agents() {
            let &img = self
                .agents
                .get(&a)
                .ok_or_else(|| format!("agent {a:?} unmapped"))?;
            if !dst.graph().has_agent(img) {
                return Err(format!("agent image {img:?} not in target"));
            }
            if !seen_agents.insert(img) {
                return Err("agent map not injective".into());
            }
            if src.agent_type(a) != dst.agent_type(img) {
                return Err(format!("agent {a:?} changes type"));
            }
        }
        for s in src.sites() {
            let &img = self
                .sites
                .get(&s)
                .ok_or_else(|| format!("site {s:?} unmapped"))?;
            if !dst.graph().has_site(img) {
                return Err(format!("site image {img:?} not in target"));
            }
            if !seen_sites.insert(img) {
                return Err("site map not injective".into());
            }
            if src.site_type(s) != dst.site_type(img) {
                return Err(format!("site {s:?} changes type"));
            }
            if let Some(owner) = src.graph().owner(s) {
                if dst.graph().owner(img) != Some(self.agents[&owner]) {
                    return Err(format!("ownership of {s:?} not preserved"));
                }
            }
            if src.graph().is_free(s) && !dst.graph().is_free(img) {
                return Err(format!("free site {s:?} mapped to bound site"));
            }
            if let Some(st) = src.state_of(s) {
                if dst.state_of(img) != Some(st) {
                    return Err(format!("state of {s:?} not preserved"));
                }
            }
        }
        for (s, t) in src.graph().edges() {
            let (si, ti) = (self.sites[&s], self.sites[&t]);
            if !dst
                .graph()
                .edges()
                .any(|(x, y)| (x, y) == (si.min(ti), si.max(ti)))
            {
                return Err(format!("edge ({s:?},{t:?}) not preserved"));
            }
        }
        Ok(())
    }
}

/// Enumerates the embedding set Υ(pattern, target), deterministically ordered.
/// Automorphic images count separately.
pub fn enumerate_embeddings(pattern: &ContactMap, target: &ContactMap) -> Vec<Embedding> {
    let pattern_agents: Vec<AgentId> = placement_order(pattern);
    let mut out = Vec::new();
    let mut m = Matcher {
        pattern,
        target,
        agents: BTreeMap::new(),
        sites: BTreeMap::new(),
        used_agents: BTreeSet::new(),
        used_sites: BTreeSet::new(),
    };
    m.go(&pattern_agents, 0, &mut out);
    out
}

pub fn count_embeddings(pattern: &ContactMap, target: &ContactMap) -> usize {
    enumerate_embeddings(pattern, target).len()
}

/// Agents component by component, each component in BFS order from its least
/// agent, so that every non-root agent is adjacent to an earlier one.
fn placement_order(pattern: &ContactMap) -> Vec<AgentId> {
    let mut order = Vec::new();
    for comp in pattern.connected_components() {
        let root = comp[0];
        let mut queue = std::collections::VecDeque::new();
        let mut seen = BTreeSet::new();
        queue.push_back(root);
        seen.insert(root);
        while let Some(a) = queue.pop_front() {
            order.push(a);
            for b in pattern.neighbours(a) {
                if seen.insert(b) {
                    queue.push_back(b);
                }
            }
        }
    }
    order
}

struct Matcher<'a> {
    pattern: &'a ContactMap,
    target: &'a ContactMap,
    agents: BTreeMap<AgentId, AgentId>,
    sites: BTreeMap<SiteId, SiteId>,
    used_agents: BTreeSet<AgentId>,
    used_sites: BTreeSet<SiteId>,
}

impl<'a> Matcher<'a> {
    fn go(&mut self, order: &[AgentId], idx: usize, out: &mut Vec<Embedding>) {
        if idx == order.len() {
            out.push(Embedding {
                agents: self.agents.clone(),
                sites: self.sites.clone(),
            });
            return;
        }
        let u = order[idx];
        // An agent adjacent to an already-placed one has a forced image.
        let forced = self.forced_candidate(u);
        let candidates: Vec<AgentId> = match forced {
            Some(Some(v)) => vec![v],
            Some(None) => return, // forced but inconsistent
            None => self
                .target
                .agents()
                .filter(|&v| {
                    self.target.agent_type(v) == self.pattern.agent_type(u)
                        && !self.used_agents.contains(&v)
                })
                .collect(),
        };
        for v in candidates {
            if let Some(checkpoint) = self.try_place(u, v) {
                self.go(order, idx + 1, out);
                self.rollback(checkpoint);
            }
        }
    }

    /// If `u` touches a placed agent through an edge, the image is determined.
    /// Returns None when unconstrained, Some(None) when determined-but-invalid.
    fn forced_candidate(&self, u: AgentId) -> Option<Option<AgentId>> {
        for s in self.pattern.graph().sites_of(u) {
            if let Some(p) = self.pattern.graph().partner(s) {
                if let Some(&p_img) = self.sites.get(&p) {
                    // The image of s must be the partner of p's image.
                    let s_img = match self.target.graph().partner(p_img) {
                        Some(x) => x,
                        None => return Some(None),
                    };
                    return Some(self.target.graph().owner(s_img).filter(|&v| {
                        self.target.agent_type(v) == self.pattern.agent_type(u)
                            && !self.used_agents.contains(&v)
                    }));
                }
            }
        }
        None
    }

    /// Attempts to map `u` to `v` together with all of `u`'s sites and any
    /// dangling sites they reach. Returns a rollback checkpoint on success.
    fn try_place(&mut self, u: AgentId, v: AgentId) -> Option<(Vec<AgentId>, Vec<SiteId>)> {
        if self.used_agents.contains(&v) || self.pattern.agent_type(u) != self.target.agent_type(v)
        {
            return None;
        }
        let mut new_agents = vec![u];
        let mut new_sites = Vec::new();
        self.agents.insert(u, v);
        self.used_agents.insert(v);
        let ok = self.place_sites(u, v, &mut new_sites);
        if ok {
            Some((new_agents, new_sites))
        } else {
            new_agents = vec![u];
            self.rollback((new_agents, new_sites));
            None
        }
    }

    fn place_sites(&mut self, u: AgentId, v: AgentId, new_sites: &mut Vec<SiteId>) -> bool {
        for s in self.pattern.graph().sites_of(u) {
            let ty = self.pattern.site_type(s);
            let t_site = match self.target.site_of(v, ty) {
                Some(x) => x,
                None => return false,
            };
            if !self.bind_site(s, t_site, new_sites) {
                return false;
            }
            if let Some(st) = self.pattern.state_of(s) {
                if self.target.state_of(t_site) != Some(st) {
                    return false;
                }
            }
            match self.pattern.graph().partner(s) {
                None => {
                    if !self.target.graph().is_free(t_site) {
                        return false;
                    }
                }
                Some(p) => {
                    let t_partner = match self.target.graph().partner(t_site) {
                        Some(x) => x,
                        None => return false,
                    };
                    if self.target.site_type(t_partner) != self.pattern.site_type(p) {
                        return false;
                    }
                    // Owned partners are checked when their agent places; the
                    // image of the partner site itself is forced either way.
                    match self.pattern.graph().owner(p) {
                        Some(w) => {
                            if let Some(&w_img) = self.agents.get(&w) {
                                if self.target.graph().owner(t_partner) != Some(w_img) {
                                    return false;
                                }
                            } else if self.target.graph().owner(t_partner).is_none() {
                                // An owned pattern site cannot land on a
                                // dangling target site.
                                return false;
                            }
                            if !self.bind_site(p, t_partner, new_sites) {
                                return false;
                            }
                        }
                        None => {
                            if !self.bind_site(p, t_partner, new_sites) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    fn bind_site(&mut self, s: SiteId, img: SiteId, new_sites: &mut Vec<SiteId>) -> bool {
        match self.sites.get(&s) {
            Some(&existing) => existing == img,
            None => {
                if self.used_sites.contains(&img) {
                    return false;
                }
                self.sites.insert(s, img);
                self.used_sites.insert(img);
                new_sites.push(s);
                true
            }
        }
    }

    fn rollback(&mut self, (agents, sites): (Vec<AgentId>, Vec<SiteId>)) {
        for a in agents {
            if let Some(img) = self.agents.remove(&a) {
                self.used_agents.remove(&img);
            }
        }
        for s in sites {
            if let Some(img) = self.sites.remove(&s) {
                self.used_sites.remove(&img);
            }
        }
    }
}
