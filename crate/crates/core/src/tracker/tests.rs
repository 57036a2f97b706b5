use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{Predicate, PredicateKind};
use crate::sim::{
    simulate, ActionScript, Detection, EntitySpec, HumanAction, NoiseConfig, Scenario, WorldSpec,
};

fn det(x: f64, y: f64, z: f64, class: &str, color: &str) -> Detection {
    Detection {
        center: Pose::new(x, y, z),
        class_scores: BTreeMap::from([(class.to_string(), 1.0)]),
        attr_scores: BTreeMap::from([("color".to_string(), BTreeMap::from([(color.to_string(), 1.0)]))]),
    }
}

fn frame(tick: u64, detections: Vec<Detection>) -> DetectionFrame {
    DetectionFrame { tick, detections }
}

fn unary_query(hmm: Option<&str>) -> EventQuery {
    EventQuery {
        participants: vec![Participant::tracked("x", Constraints::class("block"))],
        predicates: hmm
            .map(|h| vec![PredicateUse {
                hmm: h.to_string(),
                args: vec![0],
            }])
            .unwrap_or_default(),
        window: None,
    }
}

fn exact_cfg() -> TrackerConfig {
    TrackerConfig {
        min_candidate_score: 0.0,
        ..TrackerConfig::default()
    }
}

#[test]
fn track_score_examples() {
    let cfg = TrackerConfig::default();
    let frames: Vec<_> = (0..3).map(|t| frame(t, vec![det(0.5, 0.5, 0.0, "block", "red")])).collect();
    let c = Constraints::class("block");
    assert_eq!(track_score(&[Some(0), Some(0), Some(0)], &frames, &c, &cfg), 0.0);
    assert_eq!(track_score(&[Some(0), None, Some(0)], &frames, &c, &cfg), -5.0);

    let pts = [(0.5, 0.5, 0.0), (0.52, 0.49, 0.01), (0.47, 0.5, 0.0)];
    let frames: Vec<_> = pts
        .iter()
        .enumerate()
        .map(|(t, &(x, y, z))| {
            let mut d = det(x, y, z, "block", "red");
            d.class_scores = BTreeMap::from([("block".into(), 0.8), ("cup".into(), 0.2)]);
            frame(t as u64, vec![d])
        })
        .collect();
    let mut expected = 3.0 * 0.8f64.ln();
    for w in pts.windows(2) {
        let d2 = (w[0].0 - w[1].0).powi(2) + (w[0].1 - w[1].1).powi(2) + (w[0].2 - w[1].2).powi(2);
        expected -= 50.0 * d2;
    }
    let got = track_score(&[Some(0), Some(0), Some(0)], &frames, &c, &cfg);
    assert!((got - expected).abs() < 1e-12);
}

fn two_state_height_hmm(rng: &mut impl Rng) -> PredicateHmm {
    let mut dist = |n: usize| {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = v.iter().sum();
        v.into_iter().map(|x| x / z).collect::<Vec<_>>()
    };
    let prior = dist(2);
    let trans = vec![dist(2), dist(2)];
    let emit = vec![dist(3), dist(3)];
    PredicateHmm::from_probs(
        Predicate::new("H", 1, PredicateKind::Region),
        Alphabet::Height,
        &prior,
        &trans,
        &emit,
        vec![],
    )
    .unwrap()
}

/// Independent scorer for one (assignment, state path) configuration.
fn brute_score(
    assignment: &[Option<usize>],
    path: Option<&[usize]>,
    frames: &[DetectionFrame],
    hmm: Option<&PredicateHmm>,
    cfg: &TrackerConfig,
) -> f64 {
    let mut total = 0.0;
    for (t, a) in assignment.iter().enumerate() {
        match a {
            Some(i) => {
                let d = &frames[t].detections[*i];
                total += d.class_score("block").max(1e-6).ln();
                if t > 0 {
                    if let Some(j) = assignment[t - 1] {
                        let p = frames[t - 1].detections[j].center;
                        total -= 50.0 * p.dist_sq(&d.center);
                    }
                }
            }
            None => total -= 5.0,
        }
    }
    if let (Some(h), Some(path)) = (hmm, path) {
        total += h.log_prior[path[0]];
        for w in path.windows(2) {
            total += h.log_transition[w[0]][w[1]];
        }
        for (t, (&s, a)) in path.iter().zip(assignment).enumerate() {
            if let Some(i) = a {
                let z = frames[t].detections[*i].center.z;
                let bin = if z < cfg.features.table_z {
                    0
                } else if z > cfg.features.high_z {
                    2
                } else {
                    1
                };
                total += h.log_emission[s][bin];
            }
        }
    }
    total
}

fn exhaustive(frames: &[DetectionFrame], hmm: Option<&PredicateHmm>, skips: bool, cfg: &TrackerConfig) -> f64 {
    let per: Vec<Vec<Option<usize>>> = frames
        .iter()
        .map(|f| {
            let mut v: Vec<Option<usize>> = (0..f.detections.len()).map(Some).collect();
            if skips || v.is_empty() {
                v.push(None);
            }
            v
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut assign = vec![None; frames.len()];
    fn rec(
        t: usize,
        per: &[Vec<Option<usize>>],
        assign: &mut Vec<Option<usize>>,
        f: &mut dyn FnMut(&[Option<usize>]),
    ) {
        if t == per.len() {
            f(assign);
            return;
        }
        for &c in &per[t] {
            assign[t] = c;
            rec(t + 1, per, assign, f);
        }
    }
    let n = frames.len();
    rec(0, &per, &mut assign, &mut |a| {
        match hmm {
            None => best = best.max(brute_score(a, None, frames, None, cfg)),
            Some(h) => {
                for code in 0..(1usize << n) {
                    let path: Vec<usize> = (0..n).map(|t| (code >> (n - 1 - t)) & 1).collect();
                    best = best.max(brute_score(a, Some(&path), frames, Some(h), cfg));
                }
            }
        }
    });
    best
}

fn random_frames(rng: &mut impl Rng, n: usize, max_det: usize) -> Vec<DetectionFrame> {
    (0..n as u64)
        .map(|t| {
            let k = rng.random_range(0..=max_det);
            let dets = (0..k)
                .map(|_| {
                    let mut d = det(
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..0.8),
                        rng.random_range(0.0..0.25),
                        "block",
                        "red",
                    );
                    let s = rng.random_range(0.0..1.0);
                    d.class_scores = BTreeMap::from([("block".into(), s), ("cup".into(), 1.0 - s)]);
                    d
                })
                .collect();
            frame(t, dets)
        })
        .collect()
}

#[test]
fn sixteen_combination_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = TrackerConfig {
        allow_skip: false,
        ..exact_cfg()
    };
    for _ in 0..20 {
        let mut set = HmmSet::default();
        set.insert("H", two_state_height_hmm(&mut rng));
        let frames: Vec<DetectionFrame> = random_frames(&mut rng, 2, 2)
            .into_iter()
            .map(|mut f| {
                while f.detections.len() < 2 {
                    f.detections.push(det(0.1, 0.1, 0.1, "block", "red"));
                }
                f
            })
            .collect();
        let r = joint_viterbi(&unary_query(Some("H")), &frames, &set, &cfg).unwrap();
        let oracle = exhaustive(&frames, set.get("H"), false, &cfg);
        assert!((r.score - oracle).abs() < 1e-9, "{} vs {}", r.score, oracle);
    }
}

#[test]
fn randomized_oracle_with_skips() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = exact_cfg();
    for i in 0..100 {
        let mut set = HmmSet::default();
        set.insert("H", two_state_height_hmm(&mut rng));
        let n = rng.random_range(1..=3);
        let frames = random_frames(&mut rng, n, 3);
        let with = i % 2 == 0;
        let q = unary_query(with.then_some("H"));
        let r = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
        let oracle = exhaustive(&frames, if with { set.get("H") } else { None }, true, &cfg);
        assert!((r.score - oracle).abs() < 1e-9, "instance {i}: {} vs {}", r.score, oracle);
        let recomputed = brute_score(
            &r.tracks[0].assignment,
            r.state_paths.first().map(|p| p.as_slice()),
            &frames,
            set.get("H").filter(|_| with),
            &cfg,
        );
        assert!((recomputed - r.score).abs() < 1e-9);
    }
}

#[test]
fn empty_window_and_detectionless_frames() {
    let set = HmmSet::initial();
    let cfg = TrackerConfig::default();
    let q = unary_query(None);
    assert!(matches!(joint_viterbi(&q, &[], &set, &cfg), Err(TrackerError::EmptyWindow)));
    let frames: Vec<_> = (0..4).map(|t| frame(t, vec![])).collect();
    let r = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
    assert_eq!(r.score, -20.0);
    assert!(r.tracks[0].assignment.iter().all(Option::is_none));
    let windowed = EventQuery {
        window: Some((10, 12)),
        ..q
    };
    assert!(matches!(
        joint_viterbi(&windowed, &frames, &set, &cfg),
        Err(TrackerError::EmptyWindow)
    ));
}

fn pair_query(hmm: &str) -> EventQuery {
    EventQuery {
        participants: vec![
            Participant::tracked("agent", Constraints::class("hand")),
            Participant::tracked("patient", Constraints::class("block")),
        ],
        predicates: vec![PredicateUse {
            hmm: hmm.to_string(),
            args: vec![0, 1],
        }],
        window: None,
    }
}

#[test]
fn closing_distance_prefers_forward_time() {
    let set = HmmSet::initial();
    let cfg = TrackerConfig::default();
    let n = 20;
    let forward: Vec<DetectionFrame> = (0..n)
        .map(|t| {
            let d = 0.6 - 0.55 * t as f64 / (n - 1) as f64;
            frame(
                t,
                vec![det(0.2 + d, 0.4, 0.0, "hand", "red"), det(0.2, 0.4, 0.0, "block", "red")],
            )
        })
        .collect();
    let mut backward = forward.clone();
    backward.reverse();
    for (t, f) in backward.iter_mut().enumerate() {
        f.tick = t as u64;
    }
    let q = pair_query("MoveToward");
    let f = joint_viterbi(&q, &forward, &set, &cfg).unwrap().score;
    let b = joint_viterbi(&q, &backward, &set, &cfg).unwrap().score;
    assert!(f > b, "{f} vs {b}");
}

fn human() -> EntitySpec {
    EntitySpec {
        id: "human".into(),
        class: "human".into(),
        color: None,
        size: None,
        pose: Pose::new(0.5, 0.9, 0.1),
        kind: None,
    }
}

fn object(id: &str, class: &str, color: &str, pose: Pose) -> EntitySpec {
    EntitySpec {
        id: id.into(),
        class: class.into(),
        color: Some(color.into()),
        size: Some("small".into()),
        pose,
        kind: None,
    }
}

fn clip_scenario(action: HumanAction, noise: NoiseConfig, seed: u64) -> Scenario {
    Scenario {
        world: WorldSpec {
            entities: vec![
                object("box1", "box", "red", Pose::new(0.3, 0.3, 0.0)),
                object("box2", "box", "green", Pose::new(0.7, 0.3, 0.0)),
                human(),
            ],
        },
        scripts: vec![ActionScript {
            action,
            actor: "human".into(),
            patient: "box1".into(),
            start_tick: 5,
            end_tick: 20,
            offset: (action == HumanAction::Slide).then_some((0.25, 0.0)),
        }],
        utterances: vec![],
        gold: None,
        noise,
        seed,
        horizon: Some(30),
    }
}

fn frames_of(s: &Scenario) -> Vec<DetectionFrame> {
    simulate(s).unwrap().into_iter().map(|f| f.detections).collect()
}

fn entity_query(world: &WorldModel, hmm: &str, patient: &str) -> EventQuery {
    EventQuery {
        participants: vec![
            Participant::tracked("agent", Constraints::for_entity(world, "human").unwrap()),
            Participant::tracked("patient", Constraints::for_entity(world, patient).unwrap()),
        ],
        predicates: vec![PredicateUse {
            hmm: hmm.into(),
            args: vec![0, 1],
        }],
        window: None,
    }
}

#[test]
fn pickup_clip_prefers_pickup_over_putdown() {
    let set = HmmSet::initial();
    let cfg = TrackerConfig::default();
    let s = clip_scenario(HumanAction::PickUp, NoiseConfig::ZERO, 1);
    let world = s.world_model().unwrap();
    let frames = frames_of(&s);
    let up = joint_viterbi(&entity_query(&world, "PickUp", "box1"), &frames, &set, &cfg).unwrap();
    let down = joint_viterbi(&entity_query(&world, "PutDown", "box1"), &frames, &set, &cfg).unwrap();
    assert!(up.score > down.score, "{} vs {}", up.score, down.score);
}

#[test]
fn adding_a_predicate_never_raises_the_score() {
    let set = HmmSet::initial();
    let cfg = TrackerConfig::default();
    for (i, a) in HumanAction::ALL.iter().enumerate() {
        let s = clip_scenario(*a, NoiseConfig::default(), i as u64);
        let world = s.world_model().unwrap();
        let frames = frames_of(&s);
        let q = entity_query(&world, a.predicate_name(), "box1");
        let base = joint_viterbi(&q.without_predicates(), &frames, &set, &cfg).unwrap().score;
        let with = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
        assert!(with.score <= base + 1e-12);
        let mut two = q.clone();
        two.predicates.push(PredicateUse {
            hmm: BACKGROUND.into(),
            args: vec![0, 1],
        });
        assert!(joint_viterbi(&two, &frames, &set, &cfg).unwrap().score <= with.score + 1e-12);
        assert_eq!(with, joint_viterbi(&q, &frames, &set, &cfg).unwrap());
    }
}

#[test]
fn binding_picks_the_consistent_entity() {
    let cfg = TrackerConfig::default();
    let set = HmmSet::initial();
    let s = Scenario {
        world: WorldSpec {
            entities: vec![
                object("b1", "block", "green", Pose::new(0.2, 0.2, 0.0)),
                object("b2", "block", "red", Pose::new(0.6, 0.2, 0.0)),
            ],
        },
        scripts: vec![],
        utterances: vec![],
        gold: None,
        noise: NoiseConfig::ZERO,
        seed: 0,
        horizon: Some(5),
    };
    let world = s.world_model().unwrap();
    let frames = frames_of(&s);
    let q = EventQuery {
        participants: vec![Participant::tracked(
            "x",
            Constraints {
                color: Some("red".into()),
                ..Constraints::class("block")
            },
        )],
        predicates: vec![],
        window: None,
    };
    let r = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
    let b = best_participant_binding(&q, &r, &frames, &world, &cfg);
    assert_eq!(b["x"].entity, "b2");
    assert!(b["x"].weight > 0.99);
}

#[test]
fn identical_entities_tie_by_id() {
    let cfg = TrackerConfig::default();
    let set = HmmSet::initial();
    let s = Scenario {
        world: WorldSpec {
            entities: vec![
                object("b2", "block", "red", Pose::new(0.6, 0.2, 0.0)),
                object("b1", "block", "red", Pose::new(0.2, 0.2, 0.0)),
            ],
        },
        scripts: vec![],
        utterances: vec![],
        gold: None,
        noise: NoiseConfig::ZERO,
        seed: 0,
        horizon: Some(5),
    };
    let world = s.world_model().unwrap();
    let frames = frames_of(&s);
    let q = unary_query(None);
    let r = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
    let b = best_participant_binding(&q, &r, &frames, &world, &cfg);
    assert_eq!(b["x"].entity, "b1");
    assert!((b["x"].weight - 0.5).abs() < 1e-9);
}

#[test]
fn event_disambiguates_the_manipulated_box() {
    let cfg = TrackerConfig::default();
    let set = HmmSet::initial();
    let s = clip_scenario(HumanAction::PutDown, NoiseConfig::default(), 4);
    let world = s.world_model().unwrap();
    let frames = frames_of(&s);
    let mut q = pair_query("PutDown");
    q.participants[1].constraints = Constraints::class("box");
    let r = joint_viterbi(&q, &frames, &set, &cfg).unwrap();
    let b = best_participant_binding(&q, &r, &frames, &world, &cfg);
    assert_eq!(b["patient"].entity, "box1");
    assert_eq!(b["agent"].entity, "human");
}

fn approach_clips(n: usize) -> Vec<Clip> {
    (0..n as u64)
        .map(|seed| {
            let s = clip_scenario(HumanAction::MoveToward, NoiseConfig::default(), 100 + seed);
            let world = s.world_model().unwrap();
            Clip {
                frames: frames_of(&s),
                query: entity_query(&world, "MoveToward", "box1"),
            }
        })
        .collect()
}

#[test]
fn em_is_monotone_and_learns_near_final_state() {
    let cfg = TrackerConfig::default();
    let clips = approach_clips(15);
    let (set, report) = em_train(&HmmSet::initial(), &clips, 20, &cfg).unwrap();
    assert_eq!(report.objective.len(), 21);
    for w in report.objective.windows(2) {
        assert!(w[1] >= w[0] - 1e-7, "{w:?}");
    }
    let h = set.get("MoveToward").unwrap();
    h.validate().unwrap();
    let near = h.emission_mass(2, |i| ActionSymbol::decode(i).dist == ActionSymbol::NEAR);
    assert!(near >= 0.6, "near mass {near}");
    assert_eq!(set.get("PickUp"), HmmSet::initial().get("PickUp"));
}

#[test]
fn em_fixed_point_is_stable() {
    let cfg = TrackerConfig::default();
    let clips = approach_clips(4);
    let (converged, _) = em_train(&HmmSet::initial(), &clips, 30, &cfg).unwrap();
    let (again, _) = em_train(&converged, &clips, 1, &cfg).unwrap();
    let a = converged.get("MoveToward").unwrap();
    let b = again.get("MoveToward").unwrap();
    for (r1, r2) in a.log_emission.iter().zip(&b.log_emission) {
        for (x, y) in r1.iter().zip(r2) {
            assert!((x.exp() - y.exp()).abs() < 1e-9);
        }
    }
}

#[test]
fn em_rejects_unknown_models() {
    let mut clips = approach_clips(1);
    clips[0].query.predicates[0].hmm = "Nope".into();
    assert!(matches!(
        em_train(&HmmSet::initial(), &clips, 1, &TrackerConfig::default()),
        Err(TrackerError::UnknownHmm(_))
    ));
}
