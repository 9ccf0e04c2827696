//! Adult-style census rows and a directed follower graph for desk-scale
//! runs and tests. Category weights approximate the marginals of the UCI
//! Adult training file; the graph is a seeded preferential-attachment
//! digraph with reciprocity.

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;

use super::{CensusProfile, SocialGraph, UserId};
use crate::rng::{self, SimRng};

const WORKCLASS: &[(&str, f64)] = &[
    ("Private", 69.7),
    ("Self-emp-not-inc", 7.8),
    ("Local-gov", 6.4),
    ("?", 5.6),
    ("State-gov", 4.0),
    ("Self-emp-inc", 3.4),
    ("Federal-gov", 2.9),
    ("Without-pay", 0.05),
    ("Never-worked", 0.02),
];

const EDUCATION: &[(&str, f64)] = &[
    ("HS-grad", 32.3),
    ("Some-college", 22.4),
    ("Bachelors", 16.4),
    ("Masters", 5.3),
    ("Assoc-voc", 4.2),
    ("11th", 3.6),
    ("Assoc-acdm", 3.3),
    ("10th", 2.9),
    ("7th-8th", 2.0),
    ("Prof-school", 1.8),
    ("9th", 1.6),
    ("12th", 1.3),
    ("Doctorate", 1.3),
    ("5th-6th", 1.0),
    ("1st-4th", 0.5),
    ("Preschool", 0.2),
];

const OCCUPATION: &[(&str, f64)] = &[
    ("Prof-specialty", 12.7),
    ("Craft-repair", 12.6),
    ("Exec-managerial", 12.5),
    ("Adm-clerical", 11.6),
    ("Sales", 11.2),
    ("Other-service", 10.1),
    ("Machine-op-inspct", 6.1),
    ("?", 5.7),
    ("Transport-moving", 4.9),
    ("Handlers-cleaners", 4.2),
    ("Farming-fishing", 3.1),
    ("Tech-support", 2.8),
    ("Protective-serv", 2.0),
    ("Priv-house-serv", 0.5),
    ("Armed-Forces", 0.03),
];

const RACE: &[(&str, f64)] = &[
    ("White", 85.4),
    ("Black", 9.6),
    ("Asian-Pac-Islander", 3.2),
    ("Amer-Indian-Eskimo", 1.0),
    ("Other", 0.8),
];

const COUNTRY: &[(&str, f64)] = &[
    ("United-States", 89.6),
    ("Mexico", 2.0),
    ("?", 1.8),
    ("Philippines", 0.6),
    ("Germany", 0.4),
    ("Canada", 0.4),
    ("Puerto-Rico", 0.35),
    ("El-Salvador", 0.3),
    ("India", 0.3),
    ("Cuba", 0.3),
    ("England", 0.3),
    ("Jamaica", 0.25),
    ("South", 0.25),
    ("China", 0.25),
    ("Italy", 0.2),
    ("Dominican-Republic", 0.2),
    ("Vietnam", 0.2),
    ("Guatemala", 0.2),
    ("Japan", 0.2),
    ("Poland", 0.2),
    ("Columbia", 0.2),
];

/// (lower age, upper age inclusive, weight). Age 17 is ~1.1% of rows.
const AGE_BANDS: &[(u32, u32, f64)] = &[
    (17, 17, 1.1),
    (18, 24, 16.9),
    (25, 34, 26.0),
    (35, 44, 25.5),
    (45, 54, 17.5),
    (55, 64, 9.0),
    (65, 90, 4.0),
];

fn pick<'a>(rng: &mut SimRng, table: &[(&'a str, f64)]) -> &'a str {
    let dist = WeightedIndex::new(table.iter().map(|(_, w)| *w)).expect("weights are positive");
    table[dist.sample(rng)].0
}

/// One synthetic profile; `user_id` is the row index.
pub fn synthetic_profile(rng: &mut SimRng, user_id: UserId) -> CensusProfile {
    let band = WeightedIndex::new(AGE_BANDS.iter().map(|b| b.2)).expect("weights are positive").sample(rng);
    let (lo, hi, _) = AGE_BANDS[band];
    let age = rng.gen_range(lo..=hi);
    let sex = if rng.gen_bool(0.67) { "Male" } else { "Female" };

    let education = if age < 18 {
        ["10th", "11th", "12th"][rng.gen_range(0..3)]
    } else {
        pick(rng, EDUCATION)
    };
    let marital = if age < 20 {
        "Never-married"
    } else {
        let married = (0.15 + (age.min(60) - 20) as f64 * 0.012).min(0.62);
        let u: f64 = rng.gen();
        if u < married {
            "Married-civ-spouse"
        } else if u < married + (0.55 - married).max(0.08) {
            "Never-married"
        } else {
            ["Divorced", "Divorced", "Divorced", "Separated", "Widowed", "Married-spouse-absent"][rng.gen_range(0..6)]
        }
    };
    let relationship = match marital {
        "Married-civ-spouse" => {
            if sex == "Male" {
                "Husband"
            } else {
                "Wife"
            }
        }
        _ if age < 25 && rng.gen_bool(0.6) => "Own-child",
        _ => ["Not-in-family", "Not-in-family", "Unmarried", "Other-relative"][rng.gen_range(0..4)],
    };
    let hours_per_week = match rng.gen_range(0..100) {
        0..=9 => rng.gen_range(5..30),
        10..=59 => 40,
        60..=79 => rng.gen_range(30..50),
        80..=94 => rng.gen_range(50..61),
        _ => rng.gen_range(61..=99),
    };
    CensusProfile {
        user_id,
        age,
        workclass: pick(rng, WORKCLASS).to_string(),
        education: education.to_string(),
        marital_status: marital.to_string(),
        occupation: pick(rng, OCCUPATION).to_string(),
        relationship: relationship.to_string(),
        race: pick(rng, RACE).to_string(),
        sex: sex.to_string(),
        hours_per_week,
        native_country: pick(rng, COUNTRY).to_string(),
    }
}

pub fn synthetic_profiles(n: usize, seed: u64) -> Vec<CensusProfile> {
    let mut rng = rng::keyed(seed, &[0xADu64]);
    (0..n).map(|i| synthetic_profile(&mut rng, i as UserId)).collect()
}

/// Renders profiles as headerless raw Adult rows (15 columns).
pub fn to_adult_csv(profiles: &[CensusProfile]) -> String {
    let mut out = String::new();
    for p in profiles {
        let edu_num = super::catalog::EDUCATIONS.iter().position(|e| *e == p.education).unwrap_or(0) + 1;
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}, {}, {}, {}, {}, 0, 0, {}, {}, <=50K\n",
            p.age,
            p.workclass,
            100_000 + p.user_id * 37 % 200_000,
            p.education,
            edu_num,
            p.marital_status,
            p.occupation,
            p.relationship,
            p.race,
            p.sex,
            p.hours_per_week,
            p.native_country
        ));
    }
    out
}

/// Directed preferential-attachment graph: each new node follows
/// `out_degree` existing nodes chosen proportionally to in-degree + 1, and
/// each followed node follows back with probability `reciprocity`.
pub fn synthetic_follow_graph(n: usize, out_degree: usize, reciprocity: f64, seed: u64) -> SocialGraph {
    let mut rng = rng::keyed(seed, &[0x6Au64]);
    let mut g = SocialGraph::default();
    // Each node appears once, plus once per incoming edge.
    let mut urn: Vec<UserId> = Vec::new();
    for v in 0..n as UserId {
        g.ensure_node(v);
        if v > 0 {
            let want = out_degree.min(v as usize);
            let mut tries = 0;
            let mut added = 0;
            while added < want && tries < want * 20 {
                tries += 1;
                let target = urn[rng.gen_range(0..urn.len())];
                if g.follow(v, target) {
                    added += 1;
                    urn.push(target);
                    if rng.gen_bool(reciprocity) && g.follow(target, v) {
                        urn.push(v);
                    }
                }
            }
        }
        urn.push(v);
    }
    g
}

pub fn to_edge_list(graph: &SocialGraph) -> String {
    let mut out = String::from("# follower followee\n");
    for (a, b) in graph.edges() {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

/// A fully built mock population of `n` users over a synthetic graph.
pub fn synthetic_population(n: usize, seed: u64) -> super::Population {
    let profiles = synthetic_profiles(n, rng::mix(seed, &[1]));
    let graph = synthetic_follow_graph(n, 6, 0.3, rng::mix(seed, &[2]));
    let matched = super::match_profiles_to_nodes(&profiles, &graph, None, seed).expect("sizes match");
    let backend = crate::agent::MockBackend::new(seed);
    let builder = super::PopulationBuilder {
        backend: &backend,
        stance_seed: rng::mix(seed, &[rng::tag::STANCE]),
        bootstrap_seed: rng::mix(seed, &[rng::tag::BOOTSTRAP]),
        candidate_sample: 20,
        stance_via_backend: false,
    };
    builder.build(matched).expect("synthetic populations are large enough")
}
