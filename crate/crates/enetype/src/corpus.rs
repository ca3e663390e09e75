//! Page dumps, interlanguage link groups and gold labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use enetype_core::{EneLabel, LinkGroup, PageKey};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One encyclopedia article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    pub language: String,
    pub title: String,
    pub text: Option<String>,
    pub opening_text: Option<String>,
}

/// Which fields make up a page's main content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContentRule {
    /// `text`, or the title when the text is missing or empty.
    #[default]
    Text,
    /// `opening_text` followed by `text`, with the same title fallback.
    OpeningAndText,
}

fn non_empty(s: &Option<String>) -> Option<&str> {
    s.as_deref().filter(|s| !s.trim().is_empty())
}

impl Page {
    pub fn key(&self) -> PageKey {
        (self.language.clone(), self.page_id.clone())
    }

    pub fn main_content(&self) -> &str {
        non_empty(&self.text).unwrap_or(&self.title)
    }

    pub fn content(&self, rule: ContentRule) -> String {
        match (rule, non_empty(&self.opening_text), non_empty(&self.text)) {
            (ContentRule::OpeningAndText, Some(opening), Some(text)) => format!("{opening}\n{text}"),
            (ContentRule::OpeningAndText, Some(opening), None) => opening.to_string(),
            _ => self.main_content().to_string(),
        }
    }
}

/// Behaviour on malformed input lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    #[default]
    Strict,
    /// Skip bad lines and count them.
    Skip,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub pages: usize,
    /// Records with neither text nor title.
    pub skipped_empty: usize,
    pub skipped_malformed: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdField {
    Text(String),
    Number(u64),
}

impl IdField {
    fn into_string(self) -> String {
        match self {
            IdField::Text(s) => s,
            IdField::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct PageRecord {
    pageid: IdField,
    lang: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    opening_text: Option<String>,
}

/// Streams pages from newline-delimited JSON records.
pub struct PageReader<R> {
    lines: std::io::Lines<R>,
    language: String,
    source: String,
    line_no: usize,
    mode: ReadMode,
    stats: ReadStats,
}

pub fn read_pages<R: BufRead>(reader: R, language: &str, source: &str, mode: ReadMode) -> PageReader<R> {
    PageReader {
        lines: reader.lines(),
        language: language.to_string(),
        source: source.to_string(),
        line_no: 0,
        mode,
        stats: ReadStats::default(),
    }
}

impl<R: BufRead> PageReader<R> {
    pub fn stats(&self) -> ReadStats {
        self.stats
    }

    fn parse_line(&self, line: &str) -> std::result::Result<Option<Page>, String> {
        let record: PageRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let page_id = record.pageid.into_string();
        if page_id.is_empty() {
            return Err("empty pageid".into());
        }
        if let Some(lang) = &record.lang {
            if lang != &self.language {
                return Err(format!("record language {lang:?} in a {:?} stream", self.language));
            }
        }
        let text = record.text.filter(|t| !t.is_empty());
        let title = record.title.unwrap_or_default();
        if title.trim().is_empty() && non_empty(&text).is_none() {
            return Ok(None);
        }
        // The main content always falls back to a non-empty title.
        let title = if title.trim().is_empty() { page_id.clone() } else { title };
        Ok(Some(Page {
            page_id,
            language: self.language.clone(),
            title,
            text,
            opening_text: record.opening_text.filter(|t| !t.is_empty()),
        }))
    }
}

impl<R: BufRead> Iterator for PageReader<R> {
    type Item = Result<Page>;

    fn next(&mut self) -> Option<Result<Page>> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::io(&self.source, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Ok(Some(page)) => {
                    self.stats.pages += 1;
                    return Some(Ok(page));
                }
                Ok(None) => {
                    self.stats.skipped_empty += 1;
                    log::warn!("{}:{}: record has neither text nor title; skipped", self.source, self.line_no);
                }
                Err(message) => match self.mode {
                    ReadMode::Strict => return Some(Err(Error::parse(&self.source, self.line_no, message))),
                    ReadMode::Skip => {
                        self.stats.skipped_malformed += 1;
                        log::warn!("{}:{}: {message}; skipped", self.source, self.line_no);
                    }
                },
            }
        }
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Language codes of the `<lang>.jsonl` files in a directory, sorted.
pub fn languages_in_dir(dir: &Path) -> Result<Vec<String>> {
    let mut langs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                langs.push(stem.to_string());
            }
        }
    }
    langs.sort();
    Ok(langs)
}

/// Pages grouped by language, each list in file order.
pub type Corpus = BTreeMap<String, Vec<Page>>;

/// Loads `<dir>/<lang>.jsonl` for every language (or only `languages`).
pub fn load_corpus(dir: &Path, languages: Option<&[String]>, mode: ReadMode) -> Result<Corpus> {
    let langs = match languages {
        Some(l) => l.to_vec(),
        None => languages_in_dir(dir)?,
    };
    let mut corpus = Corpus::new();
    for lang in langs {
        let path = dir.join(format!("{lang}.jsonl"));
        let source = path.display().to_string();
        let mut reader = read_pages(open(&path)?, &lang, &source, mode);
        let pages = reader.by_ref().collect::<Result<Vec<_>>>()?;
        let stats = reader.stats();
        if stats.skipped_empty + stats.skipped_malformed > 0 {
            log::warn!(
                "{source}: skipped {} empty and {} malformed records",
                stats.skipped_empty,
                stats.skipped_malformed
            );
        }
        corpus.insert(lang, pages);
    }
    Ok(corpus)
}

fn tsv_lines<'a, R: BufRead + 'a>(reader: R, source: &'a str) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Err(e) => Some(Err(Error::io(source, e))),
        Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
        Ok(l) => Some(Ok((i + 1, l.trim_end_matches('\r').to_string()))),
    })
}

/// Reads `group_id<TAB>lang<TAB>pageid` rows into groups (sorted by id).
pub fn load_links<R: BufRead>(reader: R, source: &str) -> Result<Vec<LinkGroup>> {
    let mut groups: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for row in tsv_lines(reader, source) {
        let (n, line) = row?;
        let fields: Vec<&str> = line.split('\t').collect();
        let [group, lang, page] = fields[..] else {
            return Err(Error::parse(source, n, format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        if group.is_empty() || lang.is_empty() || page.is_empty() {
            return Err(Error::parse(source, n, "empty field"));
        }
        let members = groups.entry(group.to_string()).or_default();
        if members.insert(lang.to_string(), page.to_string()).is_some() {
            return Err(Error::parse(source, n, format!("group {group} already has a {lang} member")));
        }
    }
    Ok(groups.into_iter().map(|(group_id, members)| LinkGroup { group_id, members }).collect())
}

/// Gold label sets per page.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldLabels {
    pub labels: BTreeMap<PageKey, BTreeSet<String>>,
}

impl GoldLabels {
    /// Reads `lang<TAB>pageid<TAB>id,id,...`. Every id must parse.
    pub fn load<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut labels: BTreeMap<PageKey, BTreeSet<String>> = BTreeMap::new();
        for row in tsv_lines(reader, source) {
            let (n, line) = row?;
            let fields: Vec<&str> = line.split('\t').collect();
            let [lang, page, ids] = fields[..] else {
                return Err(Error::parse(source, n, format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let set = labels.entry((lang.to_string(), page.to_string())).or_default();
            for id in ids.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                EneLabel::parse(id).map_err(|e| Error::parse(source, n, e.to_string()))?;
                set.insert(id.to_string());
            }
        }
        Ok(GoldLabels { labels })
    }

    pub fn get(&self, key: &PageKey) -> Option<&BTreeSet<String>> {
        self.labels.get(key)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn for_language(&self, lang: &str) -> GoldLabels {
        GoldLabels {
            labels: self.labels.iter().filter(|((l, _), _)| l == lang).map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for ((lang, page), ids) in &self.labels {
            let joined: Vec<&str> = ids.iter().map(String::as_str).collect();
            out.push_str(&format!("{lang}\t{page}\t{}\n", joined.join(",")));
        }
        out
    }
}

/// One row of the corpus statistics table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsRow {
    pub language: String,
    pub pages: u64,
    pub linked: u64,
}

impl StatsRow {
    /// `100 * linked / pages` in tenths of a percent, rounded half up.
    pub fn ratio_tenths(&self) -> u64 {
        if self.pages == 0 {
            return 0;
        }
        let scaled = u128::from(self.linked) * 2000 + u128::from(self.pages);
        (scaled / (2 * u128::from(self.pages))) as u64
    }

    pub fn ratio_display(&self) -> String {
        let t = self.ratio_tenths();
        format!("{}.{}", t / 10, t % 10)
    }
}

/// Pages that belong to a link group with at least one other member.
pub fn linked_pages(links: &[LinkGroup]) -> BTreeSet<PageKey> {
    links
        .iter()
        .filter(|g| g.members.len() > 1)
        .flat_map(|g| g.members.iter().map(|(l, p)| (l.clone(), p.clone())))
        .collect()
}

/// Page and linked-page counts per language.
pub fn corpus_stats<'a, I>(pages: I, links: &[LinkGroup]) -> Vec<StatsRow>
where
    I: IntoIterator<Item = &'a Page>,
{
    let linked = linked_pages(links);
    let mut rows: BTreeMap<&str, StatsRow> = BTreeMap::new();
    for page in pages {
        let row = rows.entry(page.language.as_str()).or_insert_with(|| StatsRow {
            language: page.language.clone(),
            pages: 0,
            linked: 0,
        });
        row.pages += 1;
        if linked.contains(&page.key()) {
            row.linked += 1;
        }
    }
    rows.into_values().collect()
}
