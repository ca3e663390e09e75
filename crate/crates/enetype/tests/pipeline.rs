use enetype::ablation::{run_ablation, Dataset, VoteSettings};
use enetype::corpus::{Page, ReadMode};
use enetype::parallel::Threaded;
use enetype::pipeline::{finetune, init_model, labeled_split, train_multilingual, Features, PipelineConfig, Predictor};
use enetype::synthetic::{generate, SyntheticSpec};
use enetype_core::train::evaluate;
use enetype_core::{Sequential, Taxonomy, VoteMode, VoteRule};

fn config(seed: u64) -> PipelineConfig {
    PipelineConfig { epochs: 15, finetune_epochs: 5, ..PipelineConfig::synthetic(seed) }
}

#[test]
fn stage_one_lowers_held_out_loss() {
    let data = generate(&SyntheticSpec { entities: 80, ..Default::default() }).unwrap();
    let config = config(1);
    let features = Features::text(&config).unwrap();
    let split = labeled_split(&data.corpus, &data.gold, &data.taxonomy, &features, &config, None).unwrap();
    let holdout: Vec<_> = split.holdout.iter().map(|(_, e)| e.clone()).collect();
    assert!(!holdout.is_empty());
    let out = train_multilingual(&data.corpus, &data.gold, &data.taxonomy, &features, &config, &Sequential).unwrap();
    let initial = init_model(&data.taxonomy, &features, &config).unwrap();
    let (before, _) = evaluate(&initial, &holdout, &out.weights, 0.5, &Sequential).unwrap();
    let (after, _) = evaluate(&out.checkpoint.model, &holdout, &out.weights, 0.5, &Sequential).unwrap();
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn split_is_shared_between_stages() {
    let data = generate(&SyntheticSpec { entities: 40, ..Default::default() }).unwrap();
    let config = config(2);
    let features = Features::text(&config).unwrap();
    let all = labeled_split(&data.corpus, &data.gold, &data.taxonomy, &features, &config, None).unwrap();
    let xb = labeled_split(&data.corpus, &data.gold, &data.taxonomy, &features, &config, Some("xb")).unwrap();
    let from_all: Vec<_> = all.holdout_keys().filter(|k| k.0 == "xb").cloned().collect();
    let alone: Vec<_> = xb.holdout_keys().cloned().collect();
    assert_eq!(from_all, alone);
    assert_eq!(alone.len(), 8);
}

#[test]
fn missing_gold_pages_are_dropped() {
    let mut data = generate(&SyntheticSpec { entities: 10, ..Default::default() }).unwrap();
    data.gold.labels.insert(("xa".into(), "424242".into()), ["1.1.1.1".to_string()].into());
    let config = config(3);
    let features = Features::text(&config).unwrap();
    let split = labeled_split(&data.corpus, &data.gold, &data.taxonomy, &features, &config, None).unwrap();
    assert_eq!(split.missing_pages, 1);
    assert_eq!(split.train.len() + split.holdout.len(), 20);
}

#[test]
fn unknown_gold_label_fails() {
    let mut data = generate(&SyntheticSpec { entities: 5, ..Default::default() }).unwrap();
    data.gold.labels.insert(("xa".into(), "1000".into()), ["7.7".to_string()].into());
    let config = config(3);
    let features = Features::text(&config).unwrap();
    assert!(train_multilingual(&data.corpus, &data.gold, &data.taxonomy, &features, &config, &Sequential).is_err());
}

#[test]
fn finetune_checks_language_and_taxonomy() {
    let data = generate(&SyntheticSpec { entities: 20, ..Default::default() }).unwrap();
    let config = config(4);
    let features = Features::text(&config).unwrap();
    let base = train_multilingual(&data.corpus, &data.gold, &data.taxonomy, &features, &config, &Sequential).unwrap();
    let err = finetune(&base.checkpoint, &data.corpus, &data.gold, &data.taxonomy, &features, "zz", &config, &Sequential);
    assert!(err.unwrap_err().to_string().contains("zz"));
    let other = Taxonomy::load(&enetype::synthetic::TAXONOMY.replace("2.1.2.1\t1", "2.1.2.1\t0")).unwrap();
    assert!(finetune(&base.checkpoint, &data.corpus, &data.gold, &other, &features, "xa", &config, &Sequential).is_err());
    let ft = finetune(&base.checkpoint, &data.corpus, &data.gold, &data.taxonomy, &features, "xa", &config, &Sequential).unwrap();
    assert!(ft.split.train.iter().all(|(k, _)| k.0 == "xa"));
    // fresh optimizer: its step count covers only this stage
    assert_eq!(ft.checkpoint.optimizer.as_ref().map(|o| o.step), Some(ft.report.steps));
}

#[test]
fn empty_pages_fail_or_are_skipped() {
    let data = generate(&SyntheticSpec { entities: 5, ..Default::default() }).unwrap();
    let config = config(5);
    let features = Features::text(&config).unwrap();
    let model = init_model(&data.taxonomy, &features, &config).unwrap();
    let predictor = Predictor::new(&model, &data.taxonomy, &features, 0.5).unwrap();
    let mut pages = data.corpus["xa"].clone();
    pages.insert(2, Page { page_id: "x".into(), language: "xa".into(), title: " ".into(), text: None, opening_text: None });
    assert!(predictor.predict_batch(&pages, &Sequential, ReadMode::Strict).is_err());
    let (preds, skipped) = predictor.predict_batch(&pages, &Threaded::new(3), ReadMode::Skip).unwrap();
    assert_eq!((preds.len(), skipped), (5, 1));
    assert!(preds.iter().all(|p| !p.labels.is_empty()));
    assert!(Predictor::new(&model, &data.taxonomy, &features, 1.0).is_err());
}

#[test]
fn zero_epoch_ablation_rows_match() {
    let data = generate(&SyntheticSpec { entities: 20, ..SyntheticSpec::fixture(6) }).unwrap();
    let config = PipelineConfig { epochs: 0, finetune_epochs: 0, ..config(6) };
    let features = Features::text(&config).unwrap();
    let ds = Dataset { taxonomy: &data.taxonomy, corpus: &data.corpus, gold: &data.gold, links: &data.links };
    let vote = VoteSettings { mode: VoteMode::Overwrite, rule: VoteRule::AtLeastMean };
    let report = run_ablation(&ds, &features, &config, vote, &Sequential);
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.error.is_none()));
    // untrained: weighting changes nothing, only voting aggregates
    assert_eq!(report.rows[1].languages, report.rows[2].languages);
    let tsv = report.to_tsv();
    assert_eq!(tsv.lines().count(), 1 + 4 * 3);
}

#[test]
fn failed_rows_are_marked() {
    let data = generate(&SyntheticSpec { entities: 5, ..Default::default() }).unwrap();
    let config = PipelineConfig { learning_rate: f64::NAN, ..config(7) };
    let features = Features::text(&config).unwrap();
    let ds = Dataset { taxonomy: &data.taxonomy, corpus: &data.corpus, gold: &data.gold, links: &data.links };
    let vote = VoteSettings { mode: VoteMode::Advisory, rule: VoteRule::AboveMean };
    let report = run_ablation(&ds, &features, &config, vote, &Sequential);
    assert!(report.rows.iter().all(|r| r.error.is_some()));
    assert!(report.to_text().contains("failed"));
}
