//! Text and TSV renderings of statistics, histograms and scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use enetype_core::Metrics;

use crate::corpus::StatsRow;

/// Digits grouped in threes: 5790377 → "5,790,377".
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn align(rows: &[Vec<String>], right: &[bool]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| if right[c] { format!("{cell:>w$}", w = widths[c]) } else { format!("{cell:<w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn stats_text(rows: &[StatsRow]) -> String {
    let mut table = vec![vec!["lang".to_string(), "pages".into(), "linked".into(), "ratio(%)".into()]];
    for r in rows {
        table.push(vec![r.language.clone(), group_thousands(r.pages), group_thousands(r.linked), r.ratio_display()]);
    }
    align(&table, &[false, true, true, true])
}

pub fn stats_tsv(rows: &[StatsRow]) -> String {
    let mut out = String::from("lang\tpages\tlinked\tratio\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}", r.language, r.pages, r.linked, r.ratio_display()).expect("string write");
    }
    out
}

pub fn histogram_text(entries: &[(String, u64)]) -> String {
    let mut table = vec![vec!["label".to_string(), "count".into()]];
    table.extend(entries.iter().map(|(l, c)| vec![l.clone(), group_thousands(*c)]));
    align(&table, &[false, true])
}

pub fn histogram_tsv(entries: &[(String, u64)]) -> String {
    let mut out = String::from("label\tcount\n");
    for (l, c) in entries {
        writeln!(out, "{l}\t{c}").expect("string write");
    }
    out
}

/// `config<TAB>lang<TAB>precision<TAB>recall<TAB>f1` rows, one per language
/// plus an `all` row pooling the counts.
pub fn metrics_tsv(config: &str, per_language: &BTreeMap<String, Metrics>) -> String {
    let mut out = String::from("config\tlang\tprecision\trecall\tf1\n");
    let mut pooled = Metrics::default();
    for (lang, m) in per_language {
        writeln!(out, "{config}\t{lang}\t{:.6}\t{:.6}\t{:.6}", m.precision, m.recall, m.f1).expect("string write");
        pooled = pooled.merge(m);
    }
    writeln!(out, "{config}\tall\t{:.6}\t{:.6}\t{:.6}", pooled.precision, pooled.recall, pooled.f1).expect("string write");
    out
}

pub fn metrics_text(per_language: &BTreeMap<String, Metrics>) -> String {
    let mut table = vec![["lang", "tp", "fp", "fn", "P", "R", "F1"].map(String::from).to_vec()];
    let mut pooled = Metrics::default();
    let row = |lang: &str, m: &Metrics| {
        vec![
            lang.to_string(),
            m.true_pos.to_string(),
            m.false_pos.to_string(),
            m.false_neg.to_string(),
            format!("{:.2}", m.precision * 100.0),
            format!("{:.2}", m.recall * 100.0),
            format!("{:.2}", m.f1 * 100.0),
        ]
    };
    for (lang, m) in per_language {
        table.push(row(lang, m));
        pooled = pooled.merge(m);
    }
    table.push(row("all", &pooled));
    align(&table, &[false, true, true, true, true, true, true])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(999), "999");
        assert_eq!(group_thousands(1000), "1,000");
        assert_eq!(group_thousands(5_790_377), "5,790,377");
    }

    #[test]
    fn stats_rows() {
        let rows = vec![
            StatsRow { language: "en".into(), pages: 5_790_377, linked: 439_354 },
            StatsRow { language: "tr".into(), pages: 321_937, linked: 111_592 },
        ];
        let text = stats_text(&rows);
        assert!(text.contains("5,790,377") && text.contains("439,354") && text.contains("7.6"));
        assert!(text.lines().nth(2).unwrap().ends_with("34.7"));
        assert_eq!(stats_tsv(&rows).lines().nth(1), Some("en\t5790377\t439354\t7.6"));
    }

    #[test]
    fn empty_stats_is_header_only() {
        assert_eq!(stats_text(&[]).lines().count(), 1);
        assert_eq!(stats_tsv(&[]), "lang\tpages\tlinked\tratio\n");
    }

    #[test]
    fn metrics_rows_pool() {
        let mut per = BTreeMap::new();
        per.insert("a".to_string(), Metrics::from_counts(2, 1, 1));
        per.insert("b".to_string(), Metrics::from_counts(1, 0, 0));
        let tsv = metrics_tsv("x", &per);
        assert_eq!(tsv.lines().last(), Some("x\tall\t0.750000\t0.750000\t0.750000"));
    }
}
