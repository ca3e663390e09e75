//! Seeded synthetic corpora with a small four-level taxonomy, for tests,
//! demos and the ablation harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use enetype_core::{rng, LinkGroup, Taxonomy};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt};

use crate::corpus::{Corpus, GoldLabels, Page};
use crate::error::{Error, Result};

/// Taxonomy with 3 / 5 / 7 labels at depths 2 / 3 / 4; only depth-4
/// labels are assignable.
pub const TAXONOMY: &str = "\
1\t0\tRoot A
2\t0\tRoot B
1.1\t0\tA1
1.2\t0\tA2
2.1\t0\tB1
1.1.1\t0\tA1a
1.1.2\t0\tA1b
1.2.1\t0\tA2a
2.1.1\t0\tB1a
2.1.2\t0\tB1b
1.1.1.1\t1\tA1a-x
1.1.1.2\t1\tA1a-y
1.1.2.1\t1\tA1b-x
1.2.1.1\t1\tA2a-x
1.2.1.2\t1\tA2a-y
2.1.1.1\t1\tB1a-x
2.1.2.1\t1\tB1b-x
";

pub fn taxonomy() -> Taxonomy {
    Taxonomy::load(TAXONOMY).expect("built-in taxonomy is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub languages: Vec<String>,
    /// Entities per language; every entity has one page in each language.
    pub entities: usize,
    /// All languages draw words from one lexicon.
    pub shared_vocabulary: bool,
    /// In this language page text describes a permuted leaf, so its
    /// label-to-text mapping disagrees with the other languages.
    pub permuted_language: Option<String>,
    pub words_per_node: usize,
    pub noise_words: usize,
    /// Probability that an entity carries a second leaf label.
    pub second_label: f64,
    /// Probability that a language's page text is drawn from a random
    /// other leaf instead of the entity's own.
    pub confusion: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            languages: vec!["xa".into(), "xb".into()],
            entities: 100,
            shared_vocabulary: false,
            permuted_language: None,
            words_per_node: 2,
            noise_words: 6,
            second_label: 0.2,
            confusion: 0.0,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    /// Two languages over one lexicon; the second describes permuted leaves
    /// and one page in twenty describes a random leaf.
    pub fn fixture(seed: u64) -> Self {
        SyntheticSpec {
            entities: 300,
            shared_vocabulary: true,
            permuted_language: Some("xb".into()),
            confusion: 0.05,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub taxonomy: Taxonomy,
    pub corpus: Corpus,
    pub gold: GoldLabels,
    pub links: Vec<LinkGroup>,
}

const SYLLABLES: [&str; 16] = ["ka", "lo", "mi", "ren", "tu", "sa", "vo", "pe", "dri", "nu", "xel", "ba", "qo", "fi", "zan", "wu"];

fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    (0..3).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect()
}

/// Node id → cue words, plus a noise pool.
struct Lexicon {
    cues: BTreeMap<String, Vec<String>>,
    noise: Vec<String>,
}

impl Lexicon {
    fn new<R: Rng>(taxonomy: &Taxonomy, per_node: usize, rng: &mut R) -> Self {
        let mut used = BTreeSet::new();
        let mut fresh = |rng: &mut R| loop {
            let w = pseudo_word(rng);
            if used.insert(w.clone()) {
                return w;
            }
        };
        let mut cues = BTreeMap::new();
        for label in taxonomy.labels() {
            let words = (0..per_node.max(1) + 1).map(|_| fresh(rng)).collect();
            cues.insert(label.id().to_string(), words);
        }
        let noise = (0..40).map(|_| fresh(rng)).collect();
        Lexicon { cues, noise }
    }
}

fn page_text<R: Rng>(taxonomy: &Taxonomy, lexicon: &Lexicon, leaves: &[String], spec: &SyntheticSpec, rng: &mut R) -> String {
    let mut words: Vec<String> = Vec::new();
    for leaf in leaves {
        let path = taxonomy.ancestors(leaf).expect("leaf is in taxonomy");
        for node in path.iter().map(|l| l.id()).chain([leaf.as_str()]) {
            let pool = &lexicon.cues[node];
            for _ in 0..spec.words_per_node {
                words.push(pool[rng.random_range(0..pool.len())].clone());
            }
        }
    }
    for _ in 0..spec.noise_words {
        words.push(lexicon.noise[rng.random_range(0..lexicon.noise.len())].clone());
    }
    words.shuffle(rng);
    words.join(" ")
}

/// Generates a corpus. Leaf frequencies are skewed (weight 1/(rank+1)).
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.languages.is_empty() || spec.entities == 0 {
        return Err(Error::Data("synthetic corpus needs at least one language and one entity".into()));
    }
    let taxonomy = taxonomy();
    let leaves: Vec<String> = taxonomy.outputs().map(|l| l.id().to_string()).collect();
    let mut r = rng::stream(spec.seed, rng::STREAM_SYNTHETIC);

    let shared = Lexicon::new(&taxonomy, spec.words_per_node, &mut r);
    let mut lexicons = BTreeMap::new();
    for lang in &spec.languages {
        let lex = if spec.shared_vocabulary { None } else { Some(Lexicon::new(&taxonomy, spec.words_per_node, &mut r)) };
        lexicons.insert(lang.clone(), lex);
    }
    // Cyclic shift keeps the permutation free of fixed points.
    let permuted: BTreeMap<&str, &str> =
        leaves.iter().enumerate().map(|(i, l)| (l.as_str(), leaves[(i + 1) % leaves.len()].as_str())).collect();

    let weights: Vec<f64> = (0..leaves.len()).map(|i| 1.0 / (i + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let draw = |r: &mut dyn FnMut() -> f64| {
        let mut x = r() * total;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                return i;
            }
            x -= w;
        }
        weights.len() - 1
    };

    let mut corpus = Corpus::new();
    let mut gold = GoldLabels::default();
    let mut links = Vec::new();
    for e in 0..spec.entities {
        let first = draw(&mut || r.random::<f64>());
        let mut own = BTreeSet::from([leaves[first].clone()]);
        if r.random::<f64>() < spec.second_label {
            let second = draw(&mut || r.random::<f64>());
            own.insert(leaves[second].clone());
        }
        let own: Vec<String> = own.into_iter().collect();
        let mut members = BTreeMap::new();
        for (li, lang) in spec.languages.iter().enumerate() {
            let page_id = (1000 * (li + 1) + e).to_string();
            let mut cue_leaves: Vec<String> = if spec.permuted_language.as_deref() == Some(lang.as_str()) {
                own.iter().map(|l| permuted[l.as_str()].to_string()).collect()
            } else {
                own.clone()
            };
            if spec.confusion > 0.0 && r.random::<f64>() < spec.confusion {
                cue_leaves = vec![leaves[r.random_range(0..leaves.len())].clone()];
            }
            let lexicon = lexicons[lang].as_ref().unwrap_or(&shared);
            let text = page_text(&taxonomy, lexicon, &cue_leaves, spec, &mut r);
            let page = Page {
                page_id: page_id.clone(),
                language: lang.clone(),
                title: format!("{lang} entity {e}"),
                text: Some(text),
                opening_text: None,
            };
            corpus.entry(lang.clone()).or_default().push(page);
            gold.labels.insert((lang.clone(), page_id.clone()), own.iter().cloned().collect());
            members.insert(lang.clone(), page_id);
        }
        links.push(LinkGroup { group_id: format!("g{e:05}"), members });
    }
    Ok(Synthetic { taxonomy, corpus, gold, links })
}

impl Synthetic {
    /// Writes `taxonomy.tsv`, `pages/<lang>.jsonl`, `labels.tsv` and `links.tsv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let pages_dir = dir.join("pages");
        fs::create_dir_all(&pages_dir).map_err(|e| Error::io(&pages_dir, e))?;
        let write = |path: &Path, body: &str| fs::write(path, body).map_err(|e| Error::io(path, e));
        write(&dir.join("taxonomy.tsv"), TAXONOMY)?;
        for (lang, pages) in &self.corpus {
            let mut body = String::new();
            for p in pages {
                let record = serde_json::json!({
                    "pageid": p.page_id,
                    "lang": p.language,
                    "title": p.title,
                    "text": p.text,
                });
                writeln!(body, "{record}").expect("string write");
            }
            write(&pages_dir.join(format!("{lang}.jsonl")), &body)?;
        }
        write(&dir.join("labels.tsv"), &self.gold.to_tsv())?;
        let mut links = String::new();
        for g in &self.links {
            for (lang, page) in &g.members {
                writeln!(links, "{}\t{lang}\t{page}", g.group_id).expect("string write");
            }
        }
        write(&dir.join("links.tsv"), &links)
    }
}
