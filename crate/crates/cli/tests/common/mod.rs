//! Synthetic news corpora with planted group/topic structure.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aigcbias::corpus::{write_articles, Article, Origin, PromptKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_aigcbias");

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aiou";

/// A made-up eight-letter word, distinct for every `(topic, i)`. Words end
/// in a vowel so no suffix rule touches them.
pub fn nonce(topic: usize, i: usize) -> String {
    let mut n = topic * 1000 + i;
    let mut s = String::with_capacity(8);
    for _ in 0..4 {
        s.push(CONSONANTS[n % 13] as char);
        n /= 13;
        s.push(VOWELS[n % 4] as char);
        n /= 4;
    }
    s
}

/// Topic layout: group `g` (0 female, 1 male, 2 neutral) owns topics
/// `g * per_group .. (g + 1) * per_group`.
#[derive(Debug, Clone, Copy)]
pub struct World {
    pub per_group: usize,
    pub words_per_topic: usize,
}

impl World {
    pub fn topic(&self, group: usize, j: usize) -> usize {
        group * self.per_group + j
    }

    pub fn topics(&self) -> usize {
        3 * self.per_group
    }
}

/// How an article mixes sentence groups and colours them.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub female: f64,
    pub male: f64,
    pub female_polar: &'static [&'static str],
    pub male_polar: &'static [&'static str],
    pub toxic: f64,
    pub sentences: usize,
}

pub const REFERENCE: Profile = Profile {
    female: 0.35,
    male: 0.35,
    female_polar: &["great", "good", "sad", "happy"],
    male_polar: &["good", "poor", "great", "bad"],
    toxic: 0.02,
    sentences: 10,
};

pub const UNBIASED: Profile = Profile {
    female: 0.25,
    male: 0.45,
    female_polar: &["good", "sad", "poor", "happy"],
    male_polar: &["great", "excellent", "good", "bad"],
    toxic: 0.05,
    sentences: 10,
};

pub const BIASED: Profile = Profile {
    female: 0.1,
    male: 0.7,
    female_polar: &["terrible", "bad", "awful", "poor"],
    male_polar: &["excellent", "wonderful", "great", "good"],
    toxic: 0.25,
    sentences: 10,
};

pub fn id(i: usize) -> String {
    format!("a{i:04}")
}

pub fn headline(i: usize) -> String {
    format!("Report {}", id(i))
}

/// Article index encoded in a headline or prompt containing one.
pub fn index_in(text: &str) -> Option<usize> {
    let start = text.find("Report a")? + "Report a".len();
    text[start..start + 4].parse().ok()
}

fn sentence(rng: &mut ChaCha8Rng, world: &World, profile: &Profile, group: usize, home: usize) -> String {
    let pronoun = ["She", "He", "It"][group];
    let mut words = vec![pronoun.to_string()];
    for _ in 0..6 {
        let j = if rng.random_bool(0.8) {
            home
        } else {
            rng.random_range(0..world.per_group)
        };
        let topic = world.topic(group, j);
        words.push(nonce(topic, rng.random_range(0..world.words_per_topic)));
    }
    let polar = match group {
        0 => profile.female_polar,
        1 => profile.male_polar,
        _ => &[][..],
    };
    if !polar.is_empty() && rng.random_bool(0.6) {
        words.push(polar[rng.random_range(0..polar.len())].to_string());
    }
    if group < 2 && rng.random_bool(profile.toxic) {
        words.push("stupid".into());
    }
    format!("{}.", words.join(" "))
}

/// Body of article `i`; the same `(seed, i, profile)` always gives the same text.
pub fn body(world: &World, profile: &Profile, seed: u64, i: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i as u64);
    let home: Vec<usize> = (0..3).map(|_| rng.random_range(0..world.per_group)).collect();
    (0..profile.sentences)
        .map(|_| {
            let u: f64 = rng.random();
            let g = if u < profile.female {
                0
            } else if u < profile.female + profile.male {
                1
            } else {
                2
            };
            sentence(&mut rng, world, profile, g, home[g])
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn reference(world: &World, n: usize, seed: u64) -> Vec<Article> {
    (0..n)
        .map(|i| Article {
            id: id(i),
            source: "wire".into(),
            headline: headline(i),
            body: body(world, &REFERENCE, seed, i),
            origin: Origin::Reference,
            generator: None,
            prompt_kind: PromptKind::None,
        })
        .collect()
}

pub fn generated(world: &World, n: usize, seed: u64, generator: &str, kind: PromptKind) -> Vec<Article> {
    let profile = if kind == PromptKind::Biased { BIASED } else { UNBIASED };
    (0..n)
        .map(|i| Article {
            id: id(i),
            source: generator.into(),
            headline: headline(i),
            body: body(world, &profile, seed + 1, i),
            origin: Origin::Generated,
            generator: Some(generator.into()),
            prompt_kind: kind,
        })
        .collect()
}

pub fn write(path: &Path, articles: &[Article]) -> PathBuf {
    write_articles(path, articles).unwrap();
    path.to_path_buf()
}

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
