use super::*;
use crate::rules::Rule;
use crate::sitegraph::{isomorphic, ContactGraph, StateId};
use crate::testkit::{
    ring_cg, ring_generators, ring_patterns, triangle_cg, triangle_generators, triangle_patterns,
    triangle_soup, word,
};
use std::sync::Arc;

fn g12_unbind(cg: &Arc<ContactGraph>) -> Rule {
    triangle_generators(cg)[0].invert()
}

fn identity_ext(g: &Rule) -> Extension {
    mirror_extension(g, &Embedding::identity(g.lhs()), g.lhs()).unwrap()
}

fn request_types(
    cg: &Arc<ContactGraph>,
    ext: &Extension,
    requests: &SiteRequestMap,
) -> BTreeMap<String, BTreeSet<String>> {
    requests
        .iter()
        .map(|(a, tys)| {
            (
                format!("{}{}", cg.agent_name(ext.t.agent_type(*a)), a.0),
                tys.iter().map(|t| cg.site_name(*t).to_string()).collect(),
            )
        })
        .collect()
}

#[test]
fn identity_requests_reveal_both_hidden_sites() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let ext = identity_ext(&g);
    let requests = compute_requests(&ext, &patterns);
    // The triangle wraps the 12 edge, so both agents must reveal l and r.
    for (_, tys) in request_types(&cg, &ext, &requests) {
        assert_eq!(
            tys,
            BTreeSet::from(["l".to_string(), "r".to_string()]),
            "both sites requested at each agent"
        );
    }
    assert!(matches!(
        classify(&ext, &requests),
        MaturityStatus::Immature { .. }
    ));
}

#[test]
fn no_patterns_means_clause_one_only() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let ext = identity_ext(&g);
    let requests = compute_requests(&ext, &[]);
    let types = request_types(&cg, &ext, &requests);
    for (_, tys) in types {
        assert_eq!(tys.len(), 1, "only the rule's own site is requested");
    }
    assert!(matches!(classify(&ext, &requests), MaturityStatus::Mature));
}

#[test]
fn concrete_neighbour_gets_requests_through_the_rewind() {
    // phi: ?12? -> ?312?: the wrap rewind requests the hidden site of the
    // left-hand 3 agent.
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let t = word(&cg, "?312?");
    let phi = crate::sitegraph::enumerate_embeddings(g.lhs(), &t)
        .pop()
        .unwrap();
    let ext = mirror_extension(&g, &phi, &t).unwrap();
    let requests = compute_requests(&ext, &patterns);
    let types = request_types(&cg, &ext, &requests);
    let three = types
        .iter()
        .find(|(k, _)| k.starts_with('C'))
        .expect("agent of kind 3 present");
    assert_eq!(
        *three.1,
        BTreeSet::from(["l".to_string(), "r".to_string()]),
        "both sites of the left-hand 3 requested"
    );
}

#[test]
fn partial_reveal_is_immature_full_reveal_is_mature() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    for (spec, mature) in [("12?", false), ("12", true), ("?3123?", false)] {
        let t = word(&cg, spec);
        let phi = crate::sitegraph::enumerate_embeddings(g.lhs(), &t)
            .pop()
            .unwrap();
        let ext = mirror_extension(&g, &phi, &t).unwrap();
        let requests = compute_requests(&ext, &patterns);
        let status = classify(&ext, &requests);
        if mature {
            assert_eq!(status, MaturityStatus::Mature, "{spec}");
        } else {
            assert!(
                matches!(status, MaturityStatus::Immature { .. }),
                "{spec} should be immature, got {status:?}"
            );
        }
    }
}

#[test]
fn triangle_refinement_golden() {
    // The final refinement of the unbinding rule consists of exactly these
    // eight extensions, up to isomorphism.
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let family = enumerate_mature(&g, &patterns).unwrap();
    let expected = [
        "12", "^312", "12^3", "cyc(123)", "3123", "^23123", "3123^1", "^23123^1",
    ];
    assert_eq!(family.len(), expected.len());
    for spec in expected {
        let target = word(&cg, spec);
        assert!(
            family.iter().any(|me| isomorphic(&me.ext.t, &target)),
            "missing extension {spec}"
        );
    }
    // Symmetric output for the other two generators by kind rotation.
    for g in triangle_generators(&cg).iter().skip(1) {
        let family = enumerate_mature(&g.invert(), &patterns).unwrap();
        assert_eq!(family.len(), 8);
    }
}

#[test]
fn balance_vectors_of_the_golden_family() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let family = enumerate_mature(&g, &patterns).unwrap();
    // Pattern order: ab, bc, ca, t.
    for me in &family {
        if isomorphic(&me.ext.t, &word(&cg, "cyc(123)")) {
            assert_eq!(me.balance, vec![-1, 0, 0, -1]);
        } else {
            assert_eq!(me.balance, vec![-1, 0, 0, 0], "{}", me.ext.t);
        }
        // The inverse extension has the negated vector.
        let rev = Extension {
            rule: me.ext.rule.invert(),
            phi: me.ext.phi.clone(),
            t: me.ext.t_star.clone(),
            t_star: me.ext.t.clone(),
        };
        let neg = balance_vector(&rev, &patterns).unwrap();
        assert_eq!(
            neg,
            me.balance.iter().map(|x| -x).collect::<Vec<_>>()
        );
    }
}

#[test]
fn unbalanced_extension_is_rejected_by_balance_vector() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let t = word(&cg, "^312^3");
    let phi = crate::sitegraph::enumerate_embeddings(g.lhs(), &t)
        .pop()
        .unwrap();
    let ext = mirror_extension(&g, &phi, &t).unwrap();
    assert!(matches!(
        balance_vector(&ext, &patterns),
        Err(RefineError::NotBalanced(_))
    ));
}

#[test]
fn refinement_closed_under_inversion() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let fwd = enumerate_mature(&g, &patterns).unwrap();
    let rev = enumerate_mature(&g.invert(), &patterns).unwrap();
    assert_eq!(fwd.len(), rev.len());
    // Mirrored codomains appear on the other side.
    for me in &fwd {
        assert!(
            rev.iter().any(|other| isomorphic(&other.ext.t, &me.ext.t_star)),
            "mirror of {} missing",
            me.ext.t
        );
    }
}

#[test]
fn no_emitted_extension_prefixes_another() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let family = enumerate_mature(&g, &patterns).unwrap();
    for (i, a) in family.iter().enumerate() {
        for (j, b) in family.iter().enumerate() {
            if i == j {
                continue;
            }
            // A factorization b.t -> a.t compatible with the two phis would
            // make b a prefix of a.
            for theta in crate::sitegraph::enumerate_embeddings(&b.ext.t, &a.ext.t) {
                assert_ne!(
                    b.ext.phi.then(&theta),
                    a.ext.phi,
                    "{} is a prefix of {}",
                    b.ext.t,
                    a.ext.t
                );
            }
        }
    }
}

#[test]
fn unique_factorization_examples() {
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let family = enumerate_mature(&g, &patterns).unwrap();
    // Into a lone triangle: factors through the cyc(123) extension.
    let tri = word(&cg, "cyc(123)");
    let psi = crate::sitegraph::enumerate_embeddings(g.lhs(), &tri)
        .pop()
        .unwrap();
    let (idx, _) = unique_factor(&family, &psi, &tri).unwrap();
    assert!(isomorphic(&family[idx].ext.t, &tri));
    // Into the middle of the chain 31231: exactly one of the 3123 variants.
    let chain = word(&cg, "31231");
    for psi in crate::sitegraph::enumerate_embeddings(g.lhs(), &chain) {
        let (idx, gamma) = unique_factor(&family, &psi, &chain).unwrap();
        assert_eq!(family[idx].ext.phi.then(&gamma), psi);
    }
    // Into the isolated dimer: the fully free extension.
    let dimer = word(&cg, "12");
    let psi = crate::sitegraph::enumerate_embeddings(g.lhs(), &dimer)
        .pop()
        .unwrap();
    let (idx, _) = unique_factor(&family, &psi, &dimer).unwrap();
    assert!(isomorphic(&family[idx].ext.t, &dimer));
}

#[test]
fn exhaustive_unique_decomposition_on_reachable_mixtures() {
    // Every embedding of the generator's left side into a soup-reachable
    // mixture factors through exactly one member.
    let cg = triangle_cg();
    let g = g12_unbind(&cg);
    let patterns = triangle_patterns(&cg);
    let family = enumerate_mature(&g, &patterns).unwrap();
    let mixtures = [
        word(&cg, "cyc(123) + 12 + 3"),
        word(&cg, "31231 + 2"),
        word(&cg, "cyc(123123)"),
        word(&cg, "123123"),
        triangle_soup(&cg, 2),
    ];
    let mut checked = 0;
    for h in &mixtures {
        for psi in crate::sitegraph::enumerate_embeddings(g.lhs(), h) {
            unique_factor(&family, &psi, h).unwrap();
            checked += 1;
        }
    }
    assert!(checked > 4, "embedding sample too small: {checked}");
}

#[test]
fn ring_binding_generator_refines_into_two_rules() {
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[0], &patterns).unwrap();
    assert_eq!(family.len(), 2, "b refines into b_0 and b_1");
    // Each reveals f on the P side with a definite state.
    let p = cg.agent_type_by_name("P").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    let mut states = BTreeSet::new();
    for me in &family {
        let p_agent = me
            .ext
            .t
            .agents()
            .find(|&a| me.ext.t.agent_type(a) == p)
            .unwrap();
        let f_site = me.ext.t.site_of(p_agent, pf).expect("f revealed");
        states.insert(me.ext.t.state_of(f_site).expect("f constrained"));
    }
    assert_eq!(states.len(), 2);
}

#[test]
fn ring_flip_generator_refines_into_the_full_family() {
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[1], &patterns).unwrap();
    // x in {free, neighbour(0), neighbour(1)} x y likewise x s in {free,
    // bound to Y} = 18 refinements; the 8 with both neighbours concrete are
    // the ring rules.
    assert_eq!(family.len(), 18);
    let p = cg.agent_type_by_name("P").unwrap();
    let ring_rules: Vec<&MatureExtension> = family
        .iter()
        .filter(|me| {
            me.ext
                .t
                .agents()
                .filter(|&a| me.ext.t.agent_type(a) == p)
                .count()
                == 3
        })
        .collect();
    assert_eq!(ring_rules.len(), 8);
}

#[test]
fn ring_rule_balance_vectors_match_the_displayed_formulas() {
    // Pattern order: pp00, pp01, pp10, pp11, p0, p1, py0, py1. For the rule
    // flipping the middle P with x-side neighbour in state a and y-side
    // neighbour in state b, the balance is
    //   -pp_{0a} + pp_{1a} - pp_{b0} + pp_{b1} - p0 + p1,
    // plus -py0 + py1 when s is bound to a Y.
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[1], &patterns).unwrap();
    let p = cg.agent_type_by_name("P").unwrap();
    let y = cg.agent_type_by_name("Y").unwrap();
    let px = cg.site_by_name(p, "x").unwrap();
    let py_site = cg.site_by_name(p, "y").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    let ps = cg.site_by_name(p, "s").unwrap();
    let mut seen = 0;
    for me in &family {
        let t = &me.ext.t;
        let middle = me.ext.phi.agents.values().next().copied().unwrap();
        let x_site = t.site_of(middle, px).expect("x revealed");
        let y_site = t.site_of(middle, py_site).expect("y revealed");
        let s_site = t.site_of(middle, ps).expect("s revealed");
        let neighbour_state = |site| -> Option<u32> {
            let partner = t.graph().partner(site)?;
            let owner = t.graph().owner(partner)?;
            let f = t.site_of(owner, pf)?;
            Some(t.state_of(f).unwrap().0)
        };
        let (a, b) = match (neighbour_state(x_site), neighbour_state(y_site)) {
            (Some(a), Some(b)) => (a as usize, b as usize),
            _ => continue, // open-chain variant
        };
        let s_bound = !t.graph().is_free(s_site);
        if s_bound {
            // Bound to a concrete Y agent.
            let partner = t.graph().partner(s_site).unwrap();
            assert_eq!(t.agent_type(t.graph().owner(partner).unwrap()), y);
        }
        let mut want = vec![0i64; 8];
        let pp = |u: usize, v: usize| u * 2 + v;
        want[pp(0, a)] -= 1;
        want[pp(1, a)] += 1;
        want[pp(b, 0)] -= 1;
        want[pp(b, 1)] += 1;
        want[4] -= 1;
        want[5] += 1;
        if s_bound {
            want[6] -= 1;
            want[7] += 1;
        }
        assert_eq!(me.balance, want, "rule with neighbours ({a},{b}), s bound: {s_bound}");
        seen += 1;
    }
    assert_eq!(seen, 8, "eight ring rules with both neighbours concrete");
}

#[test]
fn ring_unique_decomposition_on_the_ring() {
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let mixture = crate::testkit::ring_mixture(&cg, 6, 2);
    for g in &gens {
        let family = enumerate_mature(g, &patterns).unwrap();
        for psi in crate::sitegraph::enumerate_embeddings(g.lhs(), &mixture) {
            unique_factor(&family, &psi, &mixture).unwrap();
        }
    }
}

#[test]
fn finiteness_guard_does_not_fire_on_bundled_models() {
    let tri = triangle_cg();
    for g in triangle_generators(&tri) {
        enumerate_mature(&g, &triangle_patterns(&tri)).unwrap();
    }
    let ring = ring_cg();
    for g in ring_generators(&ring) {
        enumerate_mature(&g, &ring_patterns(&ring)).unwrap();
    }
}

#[test]
fn balance_invariance_under_application() {
    // Applying a refined rule anywhere changes pattern counts by exactly the
    // stored vector.
    let cg = triangle_cg();
    let patterns = triangle_patterns(&cg);
    let gens = triangle_generators(&cg);
    let set = refine_generators(&gens, &patterns).unwrap();
    let host = word(&cg, "cyc(123) + 12 + 31 + 2 + 3");
    for rr in &set.rules {
        for psi in crate::sitegraph::enumerate_embeddings(rr.rule.lhs(), &host) {
            let out = rr.rule.apply(&psi, &host).unwrap();
            for (k, c) in patterns.iter().enumerate() {
                let before = count_embeddings(c, &host) as i64;
                let after = count_embeddings(c, &out.mixture) as i64;
                assert_eq!(after - before, rr.balance[k], "rule {}", rr.name);
            }
        }
    }
}

#[test]
fn refined_set_is_paired_with_inverses() {
    let cg = ring_cg();
    let set = refine_generators(&ring_generators(&cg), &ring_patterns(&cg)).unwrap();
    assert_eq!(set.rules.len(), 2 * (2 + 18));
    for (i, rr) in set.rules.iter().enumerate() {
        let inv = &set.rules[rr.inverse];
        assert_eq!(inv.inverse, i);
        assert_eq!(inv.forward, !rr.forward);
        assert_eq!(
            inv.balance,
            rr.balance.iter().map(|x| -x).collect::<Vec<_>>()
        );
        assert_eq!(rr.rule.lhs(), inv.rule.rhs());
    }
}

#[test]
fn quadratic_example_extension_is_balanced_with_unit_delta() {
    // The divalent chain-closing refinement produces exactly one new
    // 3-cycle, whatever the context.
    let cg = crate::testkit::divalent_cg();
    let g = crate::testkit::divalent_generator(&cg);
    let patterns = vec![crate::testkit::divalent_triangle(&cg)];
    let family = enumerate_mature(&g, &patterns).unwrap();
    let closing: Vec<&MatureExtension> = family
        .iter()
        .filter(|me| me.balance == vec![1])
        .collect();
    assert!(!closing.is_empty(), "a cycle-closing refinement exists");
    for me in &family {
        assert!(me.balance == vec![0] || me.balance == vec![1]);
    }
}

#[test]
fn state_reveal_uses_generator_side_constraints() {
    // The flip rule's own sides constrain f, so revealing f on a neighbour
    // branches on both values rather than staying unconstrained.
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[1], &patterns).unwrap();
    let p = cg.agent_type_by_name("P").unwrap();
    let pf = cg.site_by_name(p, "f").unwrap();
    for me in &family {
        for a in me.ext.t.agents() {
            if me.ext.t.agent_type(a) == p {
                if let Some(f) = me.ext.t.site_of(a, pf) {
                    assert!(
                        me.ext.t.state_of(f).is_some(),
                        "revealed f sites always carry a state"
                    );
                }
            }
        }
    }
}

#[test]
fn y_state_stays_unconstrained_in_flip_refinements() {
    // No pattern constrains the state of Y's site, so the embodied Y keeps
    // it unconstrained.
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[1], &patterns).unwrap();
    let y = cg.agent_type_by_name("Y").unwrap();
    let mut found_y = false;
    for me in &family {
        for a in me.ext.t.agents() {
            if me.ext.t.agent_type(a) == y {
                found_y = true;
                for s in me.ext.t.graph().sites_of(a) {
                    assert_eq!(me.ext.t.state_of(s), None);
                }
            }
        }
    }
    assert!(found_y);
}

#[test]
fn b_refinements_match_the_paper_rules() {
    // b_i = P(f_i, s), Y(s~p) <-> P(f_i, s!1), Y(s~p!1).
    let cg = ring_cg();
    let gens = ring_generators(&cg);
    let patterns = ring_patterns(&cg);
    let family = enumerate_mature(&gens[0], &patterns).unwrap();
    for (i, me) in family.iter().enumerate() {
        // Balance: creates one py instance of the matching conformation.
        let mut want = vec![0i64; 8];
        let state = me
            .ext
            .t
            .sites()
            .find_map(|s| {
                (cg.site_name(me.ext.t.site_type(s)) == "f").then(|| me.ext.t.state_of(s))
            })
            .flatten()
            .unwrap();
        want[6 + state.0 as usize] = 1;
        assert_eq!(me.balance, want, "b refinement {i}");
    }
}
