//! Matching and contingency updates against direct predicate evaluation.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentinel_core::{
    AttributeSet, AudienceCircle, ConsequenceLevel, IncidentReport, KnowledgeBase, MatchMode,
    PostId, SurveillanceAttribute, UnwantedIncident,
};
use SurveillanceAttribute::*;

const POOL: [SurveillanceAttribute; 6] = [
    WorkLocation,
    EmploymentStatus,
    Negative,
    HomeLocation,
    SupportedReligion,
    DrugUse,
];
const AUDIENCES: [&str; 2] = ["Work colleagues", "Public"];
const INCIDENTS: [&str; 3] = ["Job loss", "Harassment", "Reputation damage"];

fn random_sas(rng: &mut impl Rng) -> AttributeSet {
    loop {
        let set: AttributeSet = POOL
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.4))
            .collect();
        if !set.is_empty() {
            return set;
        }
    }
}

fn report(uin: &str, audience: &str, level: ConsequenceLevel) -> IncidentReport {
    IncidentReport::regretted(
        PostId::from("p"),
        UnwantedIncident::custom(uin).unwrap(),
        AudienceCircle::custom(audience).unwrap(),
        level,
    )
}

/// The three rules written out as independent predicates.
fn oracle_mode(
    ph: &sentinel_core::PrivacyHeuristic,
    sas: &AttributeSet,
    audience: &str,
    uin: &str,
) -> Option<MatchMode> {
    let ph_sas: BTreeSet<_> = ph.sas.iter().collect();
    let post_sas: BTreeSet<_> = sas.iter().collect();
    let same_audience = ph.audience.as_str() == audience;
    let has_uin = ph.uins.iter().any(|u| u.as_str() == uin);
    let m1 = ph_sas == post_sas && same_audience && has_uin;
    let m2 = ph_sas == post_sas && same_audience && !has_uin;
    let m3 = ph_sas.is_subset(&post_sas) && ph_sas != post_sas && same_audience && has_uin;
    assert!(
        [m1, m2, m3].iter().filter(|b| **b).count() <= 1,
        "rules overlap"
    );
    if m1 {
        Some(MatchMode::Exact)
    } else if m2 {
        Some(MatchMode::NewIncident)
    } else if m3 {
        Some(MatchMode::Absorbing)
    } else {
        None
    }
}

fn random_kb(rng: &mut impl Rng) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let size = rng.random_range(0..=20);
    for _ in 0..size * 2 {
        if kb.db().len() >= size {
            break;
        }
        let sas = random_sas(rng);
        let audience = *AUDIENCES.choose(rng).unwrap();
        let uin = *INCIDENTS.choose(rng).unwrap();
        let aud = AudienceCircle::custom(audience).unwrap().id;
        if kb.db().find(&sas, &aud).is_none() {
            kb.add_heuristic(sas, &aud, &UnwantedIncident::custom(uin).unwrap().id)
                .unwrap();
        }
    }
    kb
}

#[test]
fn matching_agrees_with_predicates_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let kb = random_kb(&mut rng);
        let sas = random_sas(&mut rng);
        let audience = AudienceCircle::custom(AUDIENCES.choose(&mut rng).unwrap()).unwrap();
        let uin = UnwantedIncident::custom(INCIDENTS.choose(&mut rng).unwrap()).unwrap();

        let got = kb.match_heuristics(&sas, &audience.id, &uin.id).unwrap();
        let mut expected: Vec<_> = kb
            .db()
            .heuristics()
            .filter_map(|ph| {
                oracle_mode(ph, &sas, audience.id.as_str(), uin.id.as_str())
                    .map(|m| (m, ph.id.clone()))
            })
            .collect();
        expected.sort();
        let got_pairs: Vec<_> = got
            .iter()
            .map(|m| (m.mode, m.heuristic.id.clone()))
            .collect();
        assert_eq!(got_pairs, expected);
    }
}

#[test]
fn recording_increments_exactly_the_matched_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let mut kb = random_kb(&mut rng);
        let sas = random_sas(&mut rng);
        let audience = *AUDIENCES.choose(&mut rng).unwrap();
        let uin = *INCIDENTS.choose(&mut rng).unwrap();
        let level = ConsequenceLevel::ALL[rng.random_range(0..5)];
        let before = kb.clone();
        let uin_id = UnwantedIncident::custom(uin).unwrap().id;
        let aud_id = AudienceCircle::custom(audience).unwrap().id;

        let predicted: BTreeSet<_> = before
            .db()
            .heuristics()
            .filter(|ph| oracle_mode(ph, &sas, aud_id.as_str(), uin_id.as_str()).is_some())
            .map(|ph| ph.id.clone())
            .collect();

        let applied = kb
            .record_incident(&report(uin, audience, level), &sas)
            .unwrap();
        assert!(!applied.is_empty());
        assert_eq!(
            kb.table().grand_total(),
            before.table().grand_total() + applied.len() as u64
        );

        if predicted.is_empty() {
            assert_eq!(applied.len(), 1);
            assert!(applied[0].created);
            assert_eq!(kb.db().len(), before.db().len() + 1);
        } else {
            let ids: BTreeSet<_> = applied.iter().map(|m| m.heuristic.id.clone()).collect();
            assert_eq!(ids, predicted);
            for id in &ids {
                let old = before.table().cell(id, &uin_id).count(level);
                assert_eq!(kb.table().cell(id, &uin_id).count(level), old + 1);
            }
        }

        // the scenario is now represented: exactly, unless it was only absorbed
        let again = kb.match_heuristics(&sas, &aud_id, &uin_id).unwrap();
        assert!(!again.is_empty());
        let only_absorbed = applied.iter().all(|m| m.mode == MatchMode::Absorbing);
        if !only_absorbed {
            assert_eq!(again[0].mode, MatchMode::Exact);
        }

        // every non-zero cell's incident is listed by its heuristic
        for (ph, uin, freq) in kb.table().cells() {
            if !freq.is_zero() {
                assert!(kb.db().get(ph).unwrap().uins.contains(uin));
            }
        }
    }
}

#[test]
fn exact_and_absorbing_heuristics_both_receive_the_report() {
    let mut kb = KnowledgeBase::new();
    let colleagues = AudienceCircle::custom("Work colleagues").unwrap().id;
    let job_loss = UnwantedIncident::custom("Job loss").unwrap().id;
    let fig2 = AttributeSet::from([WorkLocation, EmploymentStatus, Negative]);
    let exact = kb
        .add_heuristic(fig2.clone(), &colleagues, &job_loss)
        .unwrap();
    let sub = kb
        .add_heuristic(
            AttributeSet::from([WorkLocation, Negative]),
            &colleagues,
            &job_loss,
        )
        .unwrap();
    let total = kb.table().grand_total();

    let applied = kb
        .record_incident(
            &report("Job loss", "Work colleagues", ConsequenceLevel::Major),
            &fig2,
        )
        .unwrap();
    let modes: Vec<_> = applied
        .iter()
        .map(|m| (m.mode, m.heuristic.id.clone()))
        .collect();
    assert_eq!(
        modes,
        vec![(MatchMode::Exact, exact.id), (MatchMode::Absorbing, sub.id)]
    );
    assert_eq!(kb.table().grand_total(), total + 2);
}

#[test]
fn matching_never_mutates() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let kb = random_kb(&mut rng);
    let before = kb.snapshot_bytes();
    for _ in 0..50 {
        let sas = random_sas(&mut rng);
        let _ = kb.match_heuristics(
            &sas,
            &AudienceCircle::custom("Public").unwrap().id,
            &UnwantedIncident::custom("Harassment").unwrap().id,
        );
        let _ = kb.applicable_heuristics(&sas);
    }
    assert_eq!(kb.snapshot_bytes(), before);
}
