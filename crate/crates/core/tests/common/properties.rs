//! Randomized invariant checks, 500 cases each. Shared by the `properties`
//! test target and the acceptance report.

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use mambai_core::aligner::{align_path, filter_pairs, lexical_score, split_corpus, AlignConfig, Lexicon, SentencePair};
use mambai_core::analysis::{mean_pairwise_similarity, Aggregation, Method};
use mambai_core::corpus_extract::{
    denormalize_translations, is_section_delimiter, parse_dictionary, segment_bilingual_sections, split_sentences, DictionaryEntry, Run,
    RunDocument, DEFAULT_POS_PATTERN,
};
use mambai_core::exec::{self, Execution};
use mambai_core::llm::{parse_translation, Gateway, LlmRequest, MockGateway, ResponseCache, Scenario};
use mambai_core::metrics::{bleu, chrf, MetricConfig};
use mambai_core::prompting::{build_prompt, PromptSpec};
use mambai_core::retrieval::{
    lookup_dictionary, merge_examples, retrieve_semantic, retrieve_tfidf, tokenize, EmbeddingStore, ExampleSelector, HashedTrigramProvider,
    TfidfIndex,
};
use mambai_core::runner::{prompt_for, run_cell, DataPaths, Dataset, Decoding, ExperimentConfig, RunOptions};

use super::oracles::brute_force_alignment_cost;

pub const CASES: u32 = 500;

pub type Property = (&'static str, fn() -> Result<(), String>);

pub const ALL: &[Property] = &[
    ("corpus_extract: dictionary JSON round-trip", dictionary_round_trip),
    ("corpus_extract: denormalization idempotence", denormalize_idempotent),
    ("corpus_extract: headword order preservation", headword_order),
    ("corpus_extract: segmentation totality", segmentation_totality),
    ("corpus_extract: sentence splitting keeps every character", split_keeps_text),
    ("aligner: DP optimality vs exhaustive search", dp_optimality),
    ("aligner: monotone non-crossing beads", beads_monotone),
    ("aligner: filter_pairs nested by threshold", filter_nested),
    ("aligner: lexical score bounds and inversion symmetry", lexical_bounds),
    ("aligner: split determinism and partition", split_deterministic),
    ("retrieval: rankings sorted and deterministic", rankings_sorted),
    ("retrieval: top-k prefix property", topk_prefix),
    ("retrieval: merge has no duplicates", merge_no_duplicates),
    ("retrieval: dictionary lookup subset", lookup_subset),
    ("retrieval: TF-IDF scale invariance", tfidf_scale_invariant),
    ("prompting: injective on inputs", prompt_injective),
    ("prompting: fixed suffix", prompt_suffix),
    ("prompting: English-line count", prompt_english_count),
    ("prompting: newline-only line endings", prompt_line_endings),
    ("llm: parse_translation idempotence", parse_idempotent),
    ("llm: mock determinism and request immutability", mock_deterministic),
    ("llm: cache key separates requests", cache_key_distinct),
    ("llm: bounded fan-out keeps input order", bounded_order),
    ("metrics: permutation invariance", metric_permutation),
    ("metrics: scores within [0, 100]", metric_bounds),
    ("metrics: ChrF monotone under corrections", chrf_monotone),
    ("metrics: ChrF++ with word order 0 equals ChrF", chrf_pp_identity),
    ("analysis: symmetry", analysis_symmetric),
    ("analysis: bounds", analysis_bounds),
    ("analysis: dilution by an orthogonal sentence", analysis_dilution),
    ("runner: determinism under mock", runner_deterministic),
    ("runner: one record per test sentence", runner_record_count),
    ("runner: prompt contents follow the cell flags", runner_prompt_flags),
];

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn word() -> impl Strategy<Value = String> {
    "[a-f]{1,4}"
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..7).prop_map(|w| w.join(" "))
}

fn sentences(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(sentence(), 1..=max)
}

fn pairs(max: usize) -> impl Strategy<Value = Vec<SentencePair>> {
    prop::collection::vec((sentence(), sentence()), 1..=max)
        .prop_map(|v| v.into_iter().map(|(e, m)| SentencePair::new(e, m)).collect())
}

fn dictionary() -> impl Strategy<Value = Vec<DictionaryEntry>> {
    prop::collection::vec((word(), word()), 0..8).prop_map(|v| v.into_iter().map(|(e, m)| DictionaryEntry::new(e, m)).collect())
}

fn nonempty_text() -> impl Strategy<Value = String> {
    "[A-Za-z'. ]{0,40}[a-z]"
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn dictionary_round_trip() -> Result<(), String> {
    let entry = ("[a-zé' ]{1,12}", "[a-zé'(),; ]{1,20}", prop::option::of("(n|v|adj)\\."));
    check(prop::collection::vec(entry, 0..10), |v| {
        let entries: Vec<DictionaryEntry> =
            v.into_iter().map(|(e, t, p)| DictionaryEntry { entry: e, translation: t, part_of_speech: p }).collect();
        let json = serde_json::to_string(&entries).unwrap();
        let back: Vec<DictionaryEntry> = serde_json::from_str(&json).unwrap();
        ensure(back == entries, || json.clone())
    })
}

pub fn denormalize_idempotent() -> Result<(), String> {
    let entry = ("[a-z]{1,6}", "[a-z(),; ]{0,24}");
    check(prop::collection::vec(entry, 0..8), |v| {
        let entries: Vec<DictionaryEntry> = v.into_iter().map(|(e, t)| DictionaryEntry::new(e, t)).collect();
        let once = denormalize_translations(entries);
        let twice = denormalize_translations(once.clone());
        ensure(once == twice, || format!("{once:?} vs {twice:?}"))
    })
}

pub fn headword_order() -> Result<(), String> {
    let item = ("[a-z]{1,8}", "(n\\. |v\\. )?[a-z]{1,8}(, [a-z]{1,6})?");
    check(prop::collection::vec(item, 1..10), |v| {
        let runs = v.iter().flat_map(|(h, b)| [Run::bold(h.clone()), Run::normal(b.clone())]);
        let parsed = parse_dictionary(&RunDocument::new(runs), DEFAULT_POS_PATTERN).unwrap();
        let mut heads: Vec<&str> = parsed.entries.iter().map(|e| e.entry.as_str()).collect();
        heads.dedup();
        let expected: Vec<&str> = v.iter().map(|(h, _)| h.as_str()).collect();
        let mut exp = expected.clone();
        exp.dedup();
        ensure(heads == exp, || format!("{heads:?} vs {exp:?}"))
    })
}

fn run_strategy() -> impl Strategy<Value = Run> {
    prop_oneof![
        "[A-Z]{2,8}( [A-Z]{2,6})?".prop_map(Run::normal),
        ("[A-Za-z' ]{1,10}[a-z][.!?]( [A-Z][a-z ]{1,10}[.?])?", any::<bool>()).prop_map(|(t, b)| Run { text: t, bold: b }),
    ]
}

pub fn segmentation_totality() -> Result<(), String> {
    check(prop::collection::vec(run_strategy(), 0..12), |runs| {
        let doc = RunDocument::new(runs);
        let sections = segment_bilingual_sections(&doc);
        let mut want_m = Vec::new();
        let mut want_e = Vec::new();
        for r in doc.runs().iter().filter(|r| !is_section_delimiter(&r.text)) {
            let target = if r.bold { &mut want_m } else { &mut want_e };
            target.extend(split_sentences(&r.text));
        }
        let got_m: Vec<String> = sections.iter().flat_map(|s| s.mambai_sentences.clone()).collect();
        let got_e: Vec<String> = sections.iter().flat_map(|s| s.english_sentences.clone()).collect();
        let delimiters = doc.runs().iter().filter(|r| is_section_delimiter(&r.text)).count();
        let titled = sections.iter().filter(|s| !s.title.is_empty()).count();
        ensure(got_m == want_m && got_e == want_e && titled == delimiters, || format!("{sections:?}"))
    })
}

pub fn split_keeps_text() -> Result<(), String> {
    check("[A-Za-z()'\"!?., ]{0,60}", |text| {
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let joined: String = split_sentences(&text).iter().map(|s| squash(s)).collect();
        ensure(joined == squash(&text), || format!("{text:?} -> {:?}", split_sentences(&text)))
    })
}

fn section_sentences() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    let s = "[a-z]{1,40}";
    (prop::collection::vec(s, 1..=5), prop::collection::vec(s, 1..=5))
}

pub fn dp_optimality() -> Result<(), String> {
    let cfg = AlignConfig::default();
    check(section_sentences(), |(e, m)| {
        let dp = align_path(&e, &m, &cfg).unwrap().cost;
        let brute = brute_force_alignment_cost(&e, &m, &cfg);
        ensure((dp - brute).abs() <= 1e-9 * brute.abs().max(1.0), || format!("dp {dp} brute {brute}"))
    })
}

pub fn beads_monotone() -> Result<(), String> {
    let cfg = AlignConfig::default();
    let s = "[a-z ]{0,30}[a-z]";
    check((prop::collection::vec(s, 1..12), prop::collection::vec(s, 1..12)), |(e, m)| {
        let path = align_path(&e, &m, &cfg).unwrap();
        let (mut i, mut j) = (0, 0);
        for b in &path.beads {
            ensure(b.english.start == i && b.mambai.start == j, || format!("{path:?}"))?;
            ensure(b.english.end > i || b.mambai.end > j, || "empty bead".into())?;
            i = b.english.end;
            j = b.mambai.end;
        }
        ensure(i == e.len() && j == m.len(), || "path does not cover both sides".into())
    })
}

pub fn filter_nested() -> Result<(), String> {
    let scored = prop::collection::vec((sentence(), 0.0f64..1.2), 0..20);
    check((scored, 0.0f64..1.2, 0.0f64..1.2), |(v, a, b)| {
        let ps: Vec<SentencePair> = v.into_iter().map(|(s, sc)| SentencePair { score: sc, ..SentencePair::new(s.clone(), s) }).collect();
        let (t1, t2) = (a.min(b), a.max(b));
        let loose = filter_pairs(&ps, t1);
        let strict = filter_pairs(&ps, t2);
        ensure(strict.iter().all(|p| loose.contains(p)) && strict.len() <= loose.len(), || "not nested".into())
    })
}

pub fn lexical_bounds() -> Result<(), String> {
    check((sentence(), sentence(), dictionary(), prop::collection::vec(word(), 0..8)), |(e, m, dict, ids)| {
        let s = lexical_score(&e, &m, &dict);
        ensure((0.0..=1.0).contains(&s), || format!("score {s}"))?;
        let identity: Vec<DictionaryEntry> = ids.iter().map(|w| DictionaryEntry::new(w.clone(), w.clone())).collect();
        let inverted: Vec<DictionaryEntry> = identity.iter().map(DictionaryEntry::inverted).collect();
        let a = lexical_score(&e, &m, &identity);
        let b = lexical_score(&e, &m, &inverted);
        ensure(a == b && a == Lexicon::new(&identity).score(&e, &m), || format!("{a} vs {b}"))
    })
}

pub fn split_deterministic() -> Result<(), String> {
    check((pairs(30), 0.05f64..0.95, any::<u64>()), |(ps, frac, seed)| {
        if ps.len() < 2 {
            return Ok(());
        }
        let a = split_corpus(&ps, frac, seed).unwrap();
        let b = split_corpus(&ps, frac, seed).unwrap();
        ensure(a == b, || "split differs between runs".into())?;
        ensure(a.test.len() == (frac * ps.len() as f64).round() as usize, || "test size".into())?;
        let mut all: Vec<String> = a.train.iter().chain(&a.test).map(|p| format!("{}|{}", p.english, p.mambai)).collect();
        let mut orig: Vec<String> = ps.iter().map(|p| format!("{}|{}", p.english, p.mambai)).collect();
        all.sort();
        orig.sort();
        ensure(all == orig, || "split is not a partition".into())
    })
}

pub fn rankings_sorted() -> Result<(), String> {
    let provider = HashedTrigramProvider::default();
    check((pairs(20), sentence(), 0usize..25), |(train, q, k)| {
        let index = TfidfIndex::build(&train).unwrap();
        let store = EmbeddingStore::build(&train, &provider).unwrap();
        for hits in [retrieve_tfidf(&index, &q, k), retrieve_semantic(&store, &provider, &q, k).unwrap()] {
            ensure(hits.windows(2).all(|w| w[0].similarity >= w[1].similarity), || "unsorted".into())?;
            ensure(hits.len() == k.min(train.len()), || "wrong length".into())?;
        }
        ensure(retrieve_tfidf(&index, &q, k) == retrieve_tfidf(&index, &q, k), || "nondeterministic".into())
    })
}

pub fn topk_prefix() -> Result<(), String> {
    let provider = HashedTrigramProvider::default();
    check((pairs(20), sentence(), 0usize..22, 0usize..22), |(train, q, a, b)| {
        let (k1, k2) = (a.min(b), a.max(b));
        let index = TfidfIndex::build(&train).unwrap();
        let store = EmbeddingStore::build(&train, &provider).unwrap();
        let t1 = retrieve_tfidf(&index, &q, k1);
        let t2 = retrieve_tfidf(&index, &q, k2);
        let s1 = retrieve_semantic(&store, &provider, &q, k1).unwrap();
        let s2 = retrieve_semantic(&store, &provider, &q, k2).unwrap();
        ensure(t2[..t1.len()] == t1[..] && s2[..s1.len()] == s1[..], || "not a prefix".into())
    })
}

pub fn merge_no_duplicates() -> Result<(), String> {
    let provider = HashedTrigramProvider::default();
    check((pairs(15), sentence(), 0usize..8, 0usize..8), |(train, q, nt, ne)| {
        let index = TfidfIndex::build(&train).unwrap();
        let store = EmbeddingStore::build(&train, &provider).unwrap();
        let a = retrieve_tfidf(&index, &q, 2 * nt);
        let b = retrieve_semantic(&store, &provider, &q, 2 * ne).unwrap();
        let merged = merge_examples(&a, &b, nt, ne);
        let keys: HashSet<(&str, &str)> = merged.iter().map(|x| (x.pair.english.as_str(), x.pair.mambai.as_str())).collect();
        ensure(keys.len() == merged.len(), || "duplicate example".into())?;
        ensure(merged.len() <= a.len() + b.len() && merged.len() <= nt + ne, || "too many examples".into())
    })
}

pub fn lookup_subset() -> Result<(), String> {
    let entry = ("[a-f]{1,3}( [a-f]{1,3})?", word());
    check((sentence(), prop::collection::vec(entry, 0..10)), |(input, v)| {
        let dict: Vec<DictionaryEntry> = v.into_iter().map(|(e, m)| DictionaryEntry::new(e, m)).collect();
        let found = lookup_dictionary(&input, &dict);
        let toks = tokenize(&input);
        for e in &found {
            ensure(dict.contains(e), || format!("{e:?} not in dictionary"))?;
            let head = tokenize(&e.entry);
            ensure(toks.windows(head.len()).any(|w| w == &head[..]), || format!("{e:?} not in {input:?}"))?;
        }
        Ok(())
    })
}

pub fn tfidf_scale_invariant() -> Result<(), String> {
    check((pairs(20), sentence()), |(train, q)| {
        let doubled: Vec<SentencePair> =
            train.iter().map(|p| SentencePair::new(format!("{} {}", p.english, p.english), p.mambai.clone())).collect();
        let a: Vec<usize> = retrieve_tfidf(&TfidfIndex::build(&train).unwrap(), &q, train.len()).iter().map(|h| h.train_index).collect();
        let b: Vec<usize> = retrieve_tfidf(&TfidfIndex::build(&doubled).unwrap(), &q, train.len()).iter().map(|h| h.train_index).collect();
        ensure(a == b, || format!("{a:?} vs {b:?}"))
    })
}

fn spec_parts() -> impl Strategy<Value = (Vec<(String, String)>, Vec<(String, String)>)> {
    (prop::collection::vec((sentence(), sentence()), 0..11), prop::collection::vec((word(), word()), 0..6))
}

pub fn prompt_injective() -> Result<(), String> {
    check((spec_parts(), nonempty_text(), nonempty_text()), |((ex, de), a, b)| {
        let pa = build_prompt(&PromptSpec { examples: ex.clone(), dict_entries: de.clone(), input: a.clone() }).unwrap();
        let pb = build_prompt(&PromptSpec { examples: ex, dict_entries: de, input: b.clone() }).unwrap();
        ensure((a == b) == (pa == pb), || format!("{a:?} / {b:?}"))
    })
}

pub fn prompt_suffix() -> Result<(), String> {
    check((spec_parts(), nonempty_text()), |((ex, de), input)| {
        let p = build_prompt(&PromptSpec { examples: ex, dict_entries: de, input }).unwrap();
        ensure(p.ends_with("\nMambai:"), || p.clone())
    })
}

pub fn prompt_english_count() -> Result<(), String> {
    check((spec_parts(), nonempty_text()), |((ex, de), input)| {
        let want = ex.len() + de.len() + 1;
        let p = build_prompt(&PromptSpec { examples: ex, dict_entries: de, input }).unwrap();
        ensure(p.matches("English: ").count() == want, || p.clone())
    })
}

pub fn prompt_line_endings() -> Result<(), String> {
    check((spec_parts(), nonempty_text()), |((ex, de), input)| {
        let p = build_prompt(&PromptSpec { examples: ex, dict_entries: de, input }).unwrap();
        ensure(!p.contains('\r'), || "carriage return in prompt".into())
    })
}

pub fn parse_idempotent() -> Result<(), String> {
    let raw = "[ \\n\"'“”‘’]{0,3}((M|m)ambai: ?)?[\"'“”]?[A-Za-z' .\\n]{0,20}[\"'“”]?[ \\n]{0,2}";
    check(raw, |r| {
        if let Ok(once) = parse_translation(&r) {
            let twice = parse_translation(&once).map_err(|e| TestCaseError::fail(format!("{r:?} -> {once:?}: {e}")))?;
            ensure(once == twice, || format!("{r:?}: {once:?} -> {twice:?}"))?;
        }
        Ok(())
    })
}

pub fn mock_deterministic() -> Result<(), String> {
    check((nonempty_text(), "[a-z0-9-]{1,10}", 0.0f64..=2.0), |(input, model, temp)| {
        let prompt = build_prompt(&PromptSpec { input: input.clone(), ..Default::default() }).unwrap();
        let req = LlmRequest { temperature: temp, ..LlmRequest::new(model, prompt) };
        let before = req.clone();
        let gw = MockGateway::echo(Default::default());
        let a = gw.complete(&req).unwrap().raw_text;
        let b = gw.complete(&req).unwrap().raw_text;
        ensure(a == b && req == before && a == input, || format!("{a:?} {b:?}"))
    })
}

pub fn cache_key_distinct() -> Result<(), String> {
    let req = ("[a-z]{1,4}", "[a-z ]{1,12}", prop_oneof![Just(0.0), Just(0.7), Just(1.0)]);
    check((req.clone(), req), |((m1, p1, t1), (m2, p2, t2))| {
        let a = LlmRequest { temperature: t1, ..LlmRequest::new(m1, p1) };
        let b = LlmRequest { temperature: t2, ..LlmRequest::new(m2, p2) };
        let same = a.model == b.model && a.prompt == b.prompt && a.temperature == b.temperature;
        ensure((a.cache_key() == b.cache_key()) == same, || format!("{a:?} {b:?}"))?;
        let cache = ResponseCache::in_memory();
        cache.put(&a, "x").unwrap();
        ensure(cache.get(&b).is_some() == same, || "cache lookup mismatch".into())
    })
}

pub fn bounded_order() -> Result<(), String> {
    check((prop::collection::vec(any::<u32>(), 0..40), 1usize..6), |(xs, c)| {
        let got = exec::map_bounded(&xs, Execution::Parallel, c, |i, x| (i, *x));
        let want: Vec<(usize, u32)> = xs.iter().copied().enumerate().collect();
        ensure(got == want, || "order changed".into())
    })
}

fn mt_word() -> impl Strategy<Value = String> {
    prop_oneof![Just("ha'u".to_string()), Just("bá".to_string()), Just("merkadu".to_string()), Just("ó".into()), "[a-d]{1,3}", "[.,!?]"]
}

fn mt_sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(mt_word(), 0..9).prop_map(|w| w.join(" "))
}

fn mt_corpus() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec((mt_sentence(), mt_sentence()), 1..8)
}

fn split(c: &[(String, String)]) -> (Vec<String>, Vec<String>) {
    c.iter().cloned().unzip()
}

pub fn metric_permutation() -> Result<(), String> {
    check((mt_corpus(), any::<u64>()), |(c, seed)| {
        let mut shuffled = c.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let (h1, r1) = split(&c);
        let (h2, r2) = split(&shuffled);
        for cfg in [MetricConfig::default(), MetricConfig::chrf_plus_plus()] {
            let b = (bleu(&h1, &r1, &cfg).unwrap(), bleu(&h2, &r2, &cfg).unwrap());
            let f = (chrf(&h1, &r1, &cfg).unwrap(), chrf(&h2, &r2, &cfg).unwrap());
            ensure((b.0 - b.1).abs() < 1e-9 && (f.0 - f.1).abs() < 1e-9, || format!("{b:?} {f:?}"))?;
        }
        Ok(())
    })
}

pub fn metric_bounds() -> Result<(), String> {
    check(mt_corpus(), |c| {
        let (h, r) = split(&c);
        for cfg in [MetricConfig::default(), MetricConfig::chrf_plus_plus()] {
            let b = bleu(&h, &r, &cfg).unwrap();
            let f = chrf(&h, &r, &cfg).unwrap();
            ensure((0.0..=100.0).contains(&b) && (0.0..=100.0).contains(&f), || format!("{b} {f}"))?;
        }
        Ok(())
    })
}

pub fn chrf_monotone() -> Result<(), String> {
    check((mt_corpus(), any::<prop::sample::Index>()), |(c, idx)| {
        let (h, r) = split(&c);
        let i = idx.index(h.len());
        let mut fixed = h.clone();
        fixed[i] = r[i].clone();
        let cfg = MetricConfig::default();
        let before = chrf(&h, &r, &cfg).unwrap();
        let after = chrf(&fixed, &r, &cfg).unwrap();
        ensure(after >= before - 1e-9, || format!("{before} -> {after} for {c:?}, fixed {i}"))
    })
}

pub fn chrf_pp_identity() -> Result<(), String> {
    check(mt_corpus(), |c| {
        let (h, r) = split(&c);
        let zero = MetricConfig { chrf_word_order: 0, ..MetricConfig::chrf_plus_plus() };
        let a = chrf(&h, &r, &zero).unwrap();
        let b = chrf(&h, &r, &MetricConfig::default()).unwrap();
        ensure(a == b, || format!("{a} vs {b}"))
    })
}

pub fn analysis_symmetric() -> Result<(), String> {
    let provider = HashedTrigramProvider::default();
    check((sentences(8), sentences(8)), |(a, b)| {
        for method in [Method::Tfidf, Method::Semantic] {
            let ab = mean_pairwise_similarity(&a, &b, method, Some(&provider), Aggregation::MeanAll, Execution::Parallel).unwrap();
            let ba = mean_pairwise_similarity(&b, &a, method, Some(&provider), Aggregation::MeanAll, Execution::Sequential).unwrap();
            ensure((ab - ba).abs() <= 1e-12, || format!("{method:?}: {ab} vs {ba}"))?;
        }
        Ok(())
    })
}

pub fn analysis_bounds() -> Result<(), String> {
    let provider = HashedTrigramProvider::default();
    check((sentences(8), sentences(8), prop_oneof![Just(Aggregation::MeanAll), Just(Aggregation::MeanMax)]), |(a, b, agg)| {
        let t = mean_pairwise_similarity(&a, &b, Method::Tfidf, None, agg, Execution::Parallel).unwrap();
        let s = mean_pairwise_similarity(&a, &b, Method::Semantic, Some(&provider), agg, Execution::Parallel).unwrap();
        ensure((-1e-12..=1.0 + 1e-12).contains(&t) && (-1.0 - 1e-12..=1.0 + 1e-12).contains(&s), || format!("{t} {s}"))
    })
}

pub fn analysis_dilution() -> Result<(), String> {
    check((sentences(8), sentences(8)), |(a, b)| {
        let before = mean_pairwise_similarity(&a, &b, Method::Tfidf, None, Aggregation::MeanAll, Execution::Sequential).unwrap();
        if before <= 0.0 {
            return Ok(());
        }
        // tokens outside the [a-f] alphabet never occur in either set
        let mut diluted = b.clone();
        diluted.push("zzz yyy".into());
        let after = mean_pairwise_similarity(&a, &diluted, Method::Tfidf, None, Aggregation::MeanAll, Execution::Sequential).unwrap();
        ensure(after < before, || format!("{before} -> {after} for {a:?} / {b:?}"))
    })
}

fn cell(n_tfidf: usize, n_embed: usize, use_dict: bool) -> ExperimentConfig {
    ExperimentConfig {
        model: "gpt-4-turbo".into(),
        n_tfidf,
        n_embed,
        use_dict,
        seed: 0,
        decoding: Decoding::default(),
        paths: DataPaths::default(),
    }
}

fn small_dataset() -> impl Strategy<Value = Dataset> {
    (pairs(12), pairs(5), dictionary()).prop_map(|(train, test, dict)| Dataset { train, test, dict })
}

fn cell_flags() -> impl Strategy<Value = (usize, usize, bool)> {
    (prop_oneof![Just(0usize), Just(5), Just(10)], prop_oneof![Just(0usize), Just(5), Just(10)], any::<bool>())
}

pub fn runner_deterministic() -> Result<(), String> {
    check((small_dataset(), cell_flags(), 1usize..5), |(data, (t, e, d), conc)| {
        let selector = ExampleSelector::new(&data.train, Some(Arc::new(HashedTrigramProvider::default()))).unwrap();
        let cfg = cell(t, e, d);
        let render = |exec| {
            let gw = MockGateway::new(Scenario::echo());
            let out = run_cell(&cfg, &data, &selector, &gw, RunOptions { concurrency: conc, exec }).unwrap();
            let lines: Vec<String> = out.records.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
            (lines.join("\n"), serde_json::to_string(&out.report).unwrap())
        };
        let a = render(Execution::Parallel);
        let b = render(Execution::Parallel);
        let c = render(Execution::Sequential);
        ensure(a == b && a == c, || "outputs differ between runs".into())
    })
}

pub fn runner_record_count() -> Result<(), String> {
    let steps = prop::collection::vec((prop_oneof![Just(200u16), Just(200), Just(429), Just(400)], "[a-z ]{0,6}"), 1..4);
    check((small_dataset(), cell_flags(), steps), |(data, (t, e, d), steps)| {
        let selector = ExampleSelector::new(&data.train, Some(Arc::new(HashedTrigramProvider::default()))).unwrap();
        let scenario = Scenario::from_steps(
            steps.into_iter().map(|(status, body)| mambai_core::llm::ScenarioStep { status, body, delay_ms: 0, raw: false }).collect(),
        );
        let gw = MockGateway::new(scenario);
        let out = run_cell(&cell(t, e, d), &data, &selector, &gw, RunOptions::default()).unwrap();
        ensure(out.records.len() == data.test.len() && out.report.n_sentences == data.test.len(), || "record count".into())?;
        let ordered = out.records.iter().zip(&data.test).all(|(r, p)| r.input_english == p.english);
        let consistent = out.records.iter().all(|r| r.error.is_some() == r.hypothesis_mambai.is_empty());
        ensure(ordered && consistent && gw.calls() == data.test.len(), || "records out of order".into())
    })
}

pub fn runner_prompt_flags() -> Result<(), String> {
    check((small_dataset(), cell_flags(), sentence()), |(data, (t, e, d), input)| {
        let selector = ExampleSelector::new(&data.train, Some(Arc::new(HashedTrigramProvider::default()))).unwrap();
        let (prompt, used, n_dict) = prompt_for(&cell(t, e, d), &input, &selector, &data.dict).unwrap();
        let examples_block = prompt.split("# Example sentences\n\n").nth(1).unwrap().split("# Dictionary entries").next().unwrap();
        let dict_block = prompt.split("# Dictionary entries\n\n").nth(1).unwrap().split("Please provide").next().unwrap();
        if !d {
            ensure(dict_block.is_empty() && n_dict == 0, || prompt.clone())?;
        }
        if t == 0 && e == 0 {
            ensure(examples_block.is_empty() && used.is_empty(), || prompt.clone())?;
        }
        ensure(used.len() <= t + e, || "too many examples".into())
    })
}
