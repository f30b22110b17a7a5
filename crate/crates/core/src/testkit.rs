//! Construction helpers and independent oracles used by the test suites.
//!
//! The compact word notation here mirrors the shorthand used throughout the
//! triangle walk-throughs: digits are agents, adjacency means a bond between
//! the right site of the left agent and the left site of the right agent,
//! `?` at an end means the end site is absent, `^k` at an end is a binding
//! type to the complementary site of agent kind `k`, and `cyc(...)` closes
//! the word into a cycle. Components are separated by `+`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::sitegraph::{
    AgentId, CAgentId, CSiteId, ContactGraph, ContactMap, ContactMapBuilder, Embedding, SiteId,
    StateId,
};

/// Three agent kinds A, B, C (written 1, 2, 3) with sites l, r and the cyclic
/// edge types r_A-l_B, r_B-l_C, r_C-l_A.
pub fn triangle_cg() -> Arc<ContactGraph> {
    let mut cg = ContactGraph::new();
    let names = ["A", "B", "C"];
    let mut ls = Vec::new();
    let mut rs = Vec::new();
    for n in names {
        let a = cg.add_agent_type(n);
        ls.push(cg.add_site_type(a, "l", vec![]));
        rs.push(cg.add_site_type(a, "r", vec![]));
    }
    for i in 0..3 {
        cg.add_edge_type(rs[i], ls[(i + 1) % 3]);
    }
    Arc::new(cg)
}

/// Ring-engine types: P(x, y, f~0~1, s) and Y(s~u~p), with ring bonds x-y
/// and the signal bond P.s-Y.s.
pub fn ring_cg() -> Arc<ContactGraph> {
    let mut cg = ContactGraph::new();
    let p = cg.add_agent_type("P");
    let px = cg.add_site_type(p, "x", vec![]);
    let py = cg.add_site_type(p, "y", vec![]);
    let _pf = cg.add_site_type(p, "f", vec!["0".into(), "1".into()]);
    let ps = cg.add_site_type(p, "s", vec![]);
    let y = cg.add_agent_type("Y");
    let ys = cg.add_site_type(y, "s", vec!["u".into(), "p".into()]);
    cg.add_edge_type(px, py);
    cg.add_edge_type(ps, ys);
    Arc::new(cg)
}

/// One divalent agent kind X(a, b) with the single edge type a-b; chains and
/// cycles only.
pub fn divalent_cg() -> Arc<ContactGraph> {
    let mut cg = ContactGraph::new();
    let x = cg.add_agent_type("X");
    let a = cg.add_site_type(x, "a", vec![]);
    let b = cg.add_site_type(x, "b", vec![]);
    cg.add_edge_type(a, b);
    Arc::new(cg)
}

fn left_site(cg: &ContactGraph, ty: CAgentId) -> CSiteId {
    cg.sites_of_type(ty)[0]
}

fn right_site(cg: &ContactGraph, ty: CAgentId) -> CSiteId {
    cg.sites_of_type(ty)[1]
}

/// Builds a contact map over [`triangle_cg`] (or any two-site-per-agent
/// contact graph) from word notation. See the module docs for the grammar.
pub fn word(cg: &Arc<ContactGraph>, spec: &str) -> ContactMap {
    let mut b = ContactMapBuilder::new(cg.clone());
    for part in spec.split('+') {
        word_component(cg, &mut b, part.trim());
    }
    b.build().unwrap()
}

fn word_component(cg: &Arc<ContactGraph>, b: &mut ContactMapBuilder, part: &str) {
    let (cyclic, body) = match part.strip_prefix("cyc(") {
        Some(rest) => (true, rest.strip_suffix(')').expect("unclosed cyc(")),
        None => (false, part),
    };
    let mut chars = body.chars().peekable();
    enum End {
        Absent,
        Free,
        BindingType(u32),
    }
    let mut left_end = End::Free;
    if cyclic {
        left_end = End::Absent; // cycle closure adds the sites itself
    } else if chars.peek() == Some(&'?') {
        chars.next();
        left_end = End::Absent;
    } else if chars.peek() == Some(&'^') {
        chars.next();
        let k = chars.next().unwrap().to_digit(10).unwrap() - 1;
        left_end = End::BindingType(k);
    }
    let mut digits = Vec::new();
    let mut right_end = End::Free;
    while let Some(c) = chars.next() {
        match c {
            '1'..='9' => digits.push(c.to_digit(10).unwrap() - 1),
            '?' => {
                right_end = End::Absent;
                assert!(chars.peek().is_none(), "trailing characters in word");
            }
            '^' => {
                let k = chars.next().unwrap().to_digit(10).unwrap() - 1;
                right_end = End::BindingType(k);
                assert!(chars.peek().is_none(), "trailing characters in word");
            }
            _ => panic!("bad word character {c:?}"),
        }
    }
    if cyclic {
        right_end = End::Absent;
    }
    assert!(!digits.is_empty(), "empty word component");
    // Interior agents carry both sites; ends per the markers.
    let agents: Vec<AgentId> = digits.iter().map(|&d| b.add_agent(CAgentId(d))).collect();
    let mut lefts: Vec<Option<SiteId>> = Vec::new();
    let mut rights: Vec<Option<SiteId>> = Vec::new();
    for (i, (&d, &a)) in digits.iter().zip(&agents).enumerate() {
        let ty = CAgentId(d);
        let l_needed = i > 0 || cyclic || !matches!(left_end, End::Absent);
        let r_needed = i + 1 < digits.len() || cyclic || !matches!(right_end, End::Absent);
        lefts.push(l_needed.then(|| b.add_site(Some(a), left_site(cg, ty), None)));
        rights.push(r_needed.then(|| b.add_site(Some(a), right_site(cg, ty), None)));
    }
    for i in 0..digits.len().saturating_sub(1) {
        b.add_edge(rights[i].unwrap(), lefts[i + 1].unwrap()).unwrap();
    }
    if cyclic {
        b.add_edge(rights[digits.len() - 1].unwrap(), lefts[0].unwrap())
            .unwrap();
    } else {
        if let End::BindingType(k) = left_end {
            let d = b.add_site(None, right_site(cg, CAgentId(k)), None);
            b.add_edge(lefts[0].unwrap(), d).unwrap();
        }
        if let End::BindingType(k) = right_end {
            let d = b.add_site(None, left_site(cg, CAgentId(k)), None);
            b.add_edge(rights[digits.len() - 1].unwrap(), d).unwrap();
        }
    }
}

/// Independent brute-force matcher: tries every injective type-preserving
/// agent assignment and every injective assignment of dangling sites, then
/// filters by the embedding conditions stated directly. Kept free of any
/// shared logic with the production matcher.
pub fn oracle_embeddings(pattern: &ContactMap, target: &ContactMap) -> Vec<Embedding> {
    let p_agents: Vec<AgentId> = pattern.agents().collect();
    let t_agents: Vec<AgentId> = target.agents().collect();
    let mut results = Vec::new();
    let mut assignment: Vec<AgentId> = Vec::new();
    assign_agents(
        pattern,
        target,
        &p_agents,
        &t_agents,
        &mut assignment,
        &mut results,
    );
    results
}

fn assign_agents(
    pattern: &ContactMap,
    target: &ContactMap,
    p_agents: &[AgentId],
    t_agents: &[AgentId],
    assignment: &mut Vec<AgentId>,
    results: &mut Vec<Embedding>,
) {
    if assignment.len() == p_agents.len() {
        complete_with_sites(pattern, target, p_agents, assignment, results);
        return;
    }
    let u = p_agents[assignment.len()];
    for &v in t_agents {
        if assignment.contains(&v) || pattern.agent_type(u) != target.agent_type(v) {
            continue;
        }
        assignment.push(v);
        assign_agents(pattern, target, p_agents, t_agents, assignment, results);
        assignment.pop();
    }
}

fn complete_with_sites(
    pattern: &ContactMap,
    target: &ContactMap,
    p_agents: &[AgentId],
    assignment: &[AgentId],
    results: &mut Vec<Embedding>,
) {
    let agent_map: BTreeMap<AgentId, AgentId> = p_agents
        .iter()
        .copied()
        .zip(assignment.iter().copied())
        .collect();
    // Owned sites are forced by typing; dangling sites range over all
    // candidate target sites.
    let mut site_map: BTreeMap<SiteId, SiteId> = BTreeMap::new();
    for s in pattern.sites() {
        if let Some(a) = pattern.graph().owner(s) {
            match target.site_of(agent_map[&a], pattern.site_type(s)) {
                Some(img) => {
                    site_map.insert(s, img);
                }
                None => return,
            }
        }
    }
    let danglings: Vec<SiteId> = pattern.dangling_sites();
    let t_sites: Vec<SiteId> = target.sites().collect();
    let mut choice: Vec<SiteId> = Vec::new();
    assign_danglings(
        pattern, target, &agent_map, &site_map, &danglings, &t_sites, &mut choice, results,
    );
}

#[allow(clippy::too_many_arguments)]
fn assign_danglings(
    pattern: &ContactMap,
    target: &ContactMap,
    agent_map: &BTreeMap<AgentId, AgentId>,
    site_map: &BTreeMap<SiteId, SiteId>,
    danglings: &[SiteId],
    t_sites: &[SiteId],
    choice: &mut Vec<SiteId>,
    results: &mut Vec<Embedding>,
) {
    if choice.len() == danglings.len() {
        let mut full = site_map.clone();
        for (&d, &img) in danglings.iter().zip(choice.iter()) {
            full.insert(d, img);
        }
        let emb = Embedding {
            agents: agent_map.clone(),
            sites: full,
        };
        if check_embedding(pattern, target, &emb) {
            results.push(emb);
        }
        return;
    }
    let d = danglings[choice.len()];
    for &cand in t_sites {
        if pattern.site_type(d) != target.site_type(cand) {
            continue;
        }
        if choice.contains(&cand) || site_map.values().any(|&x| x == cand) {
            continue;
        }
        choice.push(cand);
        assign_danglings(
            pattern, target, agent_map, site_map, danglings, t_sites, choice, results,
        );
        choice.pop();
    }
}

/// The embedding conditions, re-stated literally.
fn check_embedding(pattern: &ContactMap, target: &ContactMap, emb: &Embedding) -> bool {
    // Injectivity on sites (agents injective by construction).
    let mut imgs: Vec<SiteId> = emb.sites.values().copied().collect();
    imgs.sort();
    let n = imgs.len();
    imgs.dedup();
    if imgs.len() != n {
        return false;
    }
    for s in pattern.sites() {
        let img = emb.sites[&s];
        if let Some(a) = pattern.graph().owner(s) {
            if target.graph().owner(img) != Some(emb.agents[&a]) {
                return false;
            }
        }
        if pattern.graph().is_free(s) && !target.graph().is_free(img) {
            return false;
        }
        if let Some(st) = pattern.state_of(s) {
            if target.state_of(img) != Some(st) {
                return false;
            }
        }
    }
    for (s, t) in pattern.graph().edges() {
        let (si, ti) = (emb.sites[&s], emb.sites[&t]);
        let normalized = (si.min(ti), si.max(ti));
        if !target.graph().edges().any(|e| e == normalized) {
            return false;
        }
    }
    true
}

/// The three binding generators of the chains-and-cycles model, declared in
/// the bind direction: ?1 + 2? <-> ?12? and its two rotations.
pub fn triangle_generators(cg: &Arc<ContactGraph>) -> Vec<crate::rules::Rule> {
    let names = ["ab", "bc", "ca"];
    (0..3)
        .map(|i| {
            let (u_ty, v_ty) = (CAgentId(i as u32), CAgentId(((i + 1) % 3) as u32));
            let mut b = ContactMapBuilder::new(cg.clone());
            let u = b.add_agent(u_ty);
            let su = b.add_site(Some(u), right_site(cg, u_ty), None);
            let v = b.add_agent(v_ty);
            let sv = b.add_site(Some(v), left_site(cg, v_ty), None);
            let lhs = b.build().unwrap();
            let mut edges = std::collections::BTreeSet::new();
            edges.insert((su.min(sv), su.max(sv)));
            let rhs = lhs.with_edges_and_states(edges, BTreeMap::new());
            crate::rules::Rule::new(names[i], lhs, rhs).unwrap()
        })
        .collect()
}

/// The four triangle-model energy patterns, in cost order ab, bc, ca, t.
pub fn triangle_patterns(cg: &Arc<ContactGraph>) -> Vec<ContactMap> {
    vec![
        word(cg, "?12?"),
        word(cg, "?23?"),
        word(cg, "?31?"),
        word(cg, "cyc(123)"),
    ]
}

/// The ring model's generators: b (bind an active Y) and f (flip a P).
pub fn ring_generators(cg: &Arc<ContactGraph>) -> Vec<crate::rules::Rule> {
    let p = cg.agent_type_by_name("P").unwrap();
    let y = cg.agent_type_by_name("Y").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    let ps = cg.site_by_name(p, "s").unwrap();
    let ys = cg.site_by_name(y, "s").unwrap();
    let b_rule = {
        let mut b = ContactMapBuilder::new(cg.clone());
        let ap = b.add_agent(p);
        let sp = b.add_site(Some(ap), ps, None);
        let ay = b.add_agent(y);
        let sy = b.add_site(Some(ay), ys, Some(StateId(1))); // active
        let lhs = b.build().unwrap();
        let mut edges = std::collections::BTreeSet::new();
        edges.insert((sp.min(sy), sp.max(sy)));
        let states: BTreeMap<SiteId, StateId> = lhs
            .sites()
            .filter_map(|s| lhs.state_of(s).map(|st| (s, st)))
            .collect();
        let rhs = lhs.with_edges_and_states(edges, states);
        crate::rules::Rule::new("b", lhs, rhs).unwrap()
    };
    let f_rule = {
        let mut b = ContactMapBuilder::new(cg.clone());
        let ap = b.add_agent(p);
        let sf = b.add_site(Some(ap), pf, Some(StateId(0)));
        let lhs = b.build().unwrap();
        let mut states = BTreeMap::new();
        states.insert(sf, StateId(1));
        let rhs = lhs.with_edges_and_states(lhs.graph().edges().collect(), states);
        crate::rules::Rule::new("f", lhs, rhs).unwrap()
    };
    vec![b_rule, f_rule]
}

/// The eight ring-model energy patterns in the order
/// pp00, pp01, pp10, pp11, p0, p1, py0, py1, where pp_uv is the bond
/// pattern P(f~u, x!1), P(y!1, f~v), p_i is P(f~i), and py_i is
/// P(f~i, s!1), Y(s!1).
pub fn ring_patterns(cg: &Arc<ContactGraph>) -> Vec<ContactMap> {
    let p = cg.agent_type_by_name("P").unwrap();
    let y = cg.agent_type_by_name("Y").unwrap();
    let px = cg.site_by_name(p, "x").unwrap();
    let py_site = cg.site_by_name(p, "y").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    let ps = cg.site_by_name(p, "s").unwrap();
    let ys = cg.site_by_name(y, "s").unwrap();
    let mut out = Vec::new();
    for u in 0..2u32 {
        for v in 0..2u32 {
            let mut b = ContactMapBuilder::new(cg.clone());
            let first = b.add_agent(p);
            b.add_site(Some(first), pf, Some(StateId(u)));
            let sx = b.add_site(Some(first), px, None);
            let second = b.add_agent(p);
            let sy = b.add_site(Some(second), py_site, None);
            b.add_site(Some(second), pf, Some(StateId(v)));
            b.add_edge(sx, sy).unwrap();
            out.push(b.build().unwrap());
        }
    }
    for i in 0..2u32 {
        let mut b = ContactMapBuilder::new(cg.clone());
        let a = b.add_agent(p);
        b.add_site(Some(a), pf, Some(StateId(i)));
        out.push(b.build().unwrap());
    }
    for i in 0..2u32 {
        let mut b = ContactMapBuilder::new(cg.clone());
        let a = b.add_agent(p);
        b.add_site(Some(a), pf, Some(StateId(i)));
        let sp = b.add_site(Some(a), ps, None);
        let ay = b.add_agent(y);
        let sy = b.add_site(Some(ay), ys, None);
        b.add_edge(sp, sy).unwrap();
        out.push(b.build().unwrap());
    }
    out
}

/// The divalent-agent model behind the quadratic-energy example: one
/// generator binding a to b, and the 3-cycle as the sole energy pattern.
pub fn divalent_generator(cg: &Arc<ContactGraph>) -> crate::rules::Rule {
    let x = cg.agent_type_by_name("X").unwrap();
    let sa = cg.site_by_name(x, "a").unwrap();
    let sb = cg.site_by_name(x, "b").unwrap();
    let mut b = ContactMapBuilder::new(cg.clone());
    let u = b.add_agent(x);
    let su = b.add_site(Some(u), sa, None);
    let v = b.add_agent(x);
    let sv = b.add_site(Some(v), sb, None);
    let lhs = b.build().unwrap();
    let mut edges = std::collections::BTreeSet::new();
    edges.insert((su.min(sv), su.max(sv)));
    let rhs = lhs.with_edges_and_states(edges, BTreeMap::new());
    crate::rules::Rule::new("g", lhs, rhs).unwrap()
}

/// The 3-cycle of divalent agents.
pub fn divalent_triangle(cg: &Arc<ContactGraph>) -> ContactMap {
    let x = cg.agent_type_by_name("X").unwrap();
    let sa = cg.site_by_name(x, "a").unwrap();
    let sb = cg.site_by_name(x, "b").unwrap();
    let mut b = ContactMapBuilder::new(cg.clone());
    let agents: Vec<AgentId> = (0..3).map(|_| b.add_agent(x)).collect();
    let sas: Vec<SiteId> = agents.iter().map(|&u| b.add_site(Some(u), sa, None)).collect();
    let sbs: Vec<SiteId> = agents.iter().map(|&u| b.add_site(Some(u), sb, None)).collect();
    for i in 0..3 {
        b.add_edge(sas[i], sbs[(i + 1) % 3]).unwrap();
    }
    b.build().unwrap()
}

/// Mixture over the triangle contact graph with `n` free agents of each kind.
pub fn triangle_soup(cg: &Arc<ContactGraph>, n: usize) -> ContactMap {
    let mut b = ContactMapBuilder::new(cg.clone());
    for ty in 0..3 {
        for _ in 0..n {
            let a = b.add_agent(CAgentId(ty));
            b.add_site(Some(a), left_site(cg, CAgentId(ty)), None);
            b.add_site(Some(a), right_site(cg, CAgentId(ty)), None);
        }
    }
    b.build().unwrap()
}

/// A ring of `n` P agents (all in conformation 0, s free) plus `n_y` inactive
/// free Y agents, as a mixture over [`ring_cg`].
pub fn ring_mixture(cg: &Arc<ContactGraph>, n: usize, n_y: usize) -> ContactMap {
    let p = cg.agent_type_by_name("P").unwrap();
    let y = cg.agent_type_by_name("Y").unwrap();
    let px = cg.site_by_name(p, "x").unwrap();
    let py = cg.site_by_name(p, "y").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    let ps = cg.site_by_name(p, "s").unwrap();
    let ys = cg.site_by_name(y, "s").unwrap();
    let mut b = ContactMapBuilder::new(cg.clone());
    let mut xs = Vec::new();
    let mut ys_sites = Vec::new();
    for _ in 0..n {
        let a = b.add_agent(p);
        xs.push(b.add_site(Some(a), px, None));
        ys_sites.push(b.add_site(Some(a), py, None));
        b.add_site(Some(a), pf, Some(StateId(0)));
        b.add_site(Some(a), ps, None);
    }
    for i in 0..n {
        b.add_edge(xs[i], ys_sites[(i + 1) % n]).unwrap();
    }
    for _ in 0..n_y {
        let a = b.add_agent(y);
        b.add_site(Some(a), ys, Some(StateId(0)));
    }
    b.build().unwrap()
}
