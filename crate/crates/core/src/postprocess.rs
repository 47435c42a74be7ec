//! Dictionary correction of recognized words and merging of recognitions
//! into index entries.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Rect;
use crate::recognize::Recognition;

pub const DEFAULT_MAX_DISTANCE: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dictionary {
    words: BTreeSet<String>,
    pub max_distance: usize,
}

impl Dictionary {
    pub fn new<I, S>(words: I, max_distance: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for w in words {
            let w = w.into();
            if w.is_empty() || w.chars().any(|c| c.is_whitespace() || c.is_lowercase()) {
                return Err(Error::Config(format!("bad dictionary word {w:?}")));
            }
            set.insert(w);
        }
        Ok(Dictionary {
            words: set,
            max_distance,
        })
    }

    /// One word per line; `#` starts a comment. Words are uppercased.
    pub fn parse(text: &str, max_distance: usize) -> Result<Self> {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_uppercase);
        Dictionary::new(words, max_distance)
    }

    pub fn load(path: &Path, max_distance: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Dictionary::parse(&text, max_distance)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Unit-cost edit distance over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Nearest dictionary word within the dictionary's max distance, the
/// lexicographically smallest on ties; otherwise `word` itself.
pub fn correct_word(word: &str, dict: &Dictionary) -> String {
    let len = word.chars().count();
    let mut best: Option<(usize, &str)> = None;
    for w in dict.words() {
        if w.chars().count().abs_diff(len) > dict.max_distance {
            continue;
        }
        let d = levenshtein(word, w);
        if d <= dict.max_distance && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, w));
            if d == 0 {
                break;
            }
        }
    }
    best.map_or_else(|| word.to_string(), |(_, w)| w.to_string())
}

/// Corrects each space-separated token. Tokens with digits are left alone.
pub fn correct_line(line: &str, dict: &Dictionary) -> String {
    line.split(' ')
        .map(|tok| {
            if tok.is_empty() || tok.chars().any(|c| c.is_ascii_digit()) {
                tok.to_string()
            } else {
                correct_word(tok, dict)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// One line of the index file. Field order is the serialized key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub text: String,
    pub raw: String,
    pub track: u32,
    pub first_frame: u32,
    pub last_frame: u32,
    pub rect: Rect,
    pub confidence: f64,
}

/// A recognition together with the reference rectangle of its track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackText {
    pub recognition: Recognition,
    pub rect: Rect,
}

/// Corrects every recognition and merges tracks with equal corrected text
/// whose frame spans overlap or touch. A merged entry keeps the raw text,
/// track id and rect of its earliest member and averages all character
/// confidences. Entries come out sorted by (first frame, track).
pub fn build_index(items: &[TrackText], dict: Option<&Dictionary>) -> Vec<IndexEntry> {
    let mut groups: BTreeMap<String, Vec<(&TrackText, String)>> = BTreeMap::new();
    for it in items {
        let r = &it.recognition;
        let text = match dict {
            Some(d) => correct_line(&r.text, d),
            None => r.text.clone(),
        };
        if text.trim().is_empty() {
            log::info!("track {}: no text recognized, dropped", r.span.track);
            continue;
        }
        groups.entry(text.clone()).or_default().push((it, text));
    }

    let mut entries = Vec::new();
    for (_, mut members) in groups {
        members.sort_by_key(|(t, _)| (t.recognition.span.first_frame, t.recognition.span.track));
        let mut run: Vec<&TrackText> = Vec::new();
        let mut run_last = 0;
        for (t, text) in &members {
            let span = t.recognition.span;
            if !run.is_empty() && span.first_frame > run_last + 1 {
                entries.push(merge(&run, text));
                run.clear();
            }
            run_last = if run.is_empty() { span.last_frame } else { run_last.max(span.last_frame) };
            run.push(t);
        }
        if let Some((_, text)) = members.first() {
            entries.push(merge(&run, text));
        }
    }
    entries.sort_by_key(|e| (e.first_frame, e.track));
    entries
}

fn merge(run: &[&TrackText], text: &str) -> IndexEntry {
    let head = run[0];
    let confs: Vec<f64> = run
        .iter()
        .flat_map(|t| t.recognition.confidences.iter().copied())
        .collect();
    let confidence = if confs.is_empty() {
        0.0
    } else {
        confs.iter().sum::<f64>() / confs.len() as f64
    };
    IndexEntry {
        text: text.to_string(),
        raw: head.recognition.text.clone(),
        track: head.recognition.span.track,
        first_frame: run.iter().map(|t| t.recognition.span.first_frame).min().unwrap(),
        last_frame: run.iter().map(|t| t.recognition.span.last_frame).max().unwrap(),
        rect: head.rect,
        confidence,
    }
}

/// JSON Lines, LF-terminated.
pub fn encode_index(entries: &[IndexEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut out, e).expect("index entries serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_index(path: &Path, entries: &[IndexEntry]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_index(entries)).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format("index", e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recognize::{Engine, TrackSpan};
    use proptest::prelude::*;

    fn brute(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((ca, ra)), Some((cb, rb))) => {
                let sub = brute(ra, rb) + usize::from(ca != cb);
                sub.min(brute(ra, b) + 1).min(brute(a, rb) + 1)
            }
        }
    }

    fn words_upto(n: usize, alphabet: &[char]) -> Vec<String> {
        let mut all = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..n {
            layer = layer
                .iter()
                .flat_map(|w| alphabet.iter().map(move |c| format!("{w}{c}")))
                .collect();
            all.extend(layer.iter().cloned());
        }
        all
    }

    #[test]
    fn levenshtein_matches_recursion_on_short_words() {
        let words = words_upto(3, &['A', 'B', 'C']);
        for a in &words {
            let ac: Vec<char> = a.chars().collect();
            for b in &words {
                let bc: Vec<char> = b.chars().collect();
                assert_eq!(levenshtein(a, b), brute(&ac, &bc), "{a:?} {b:?}");
            }
        }
    }

    fn dict(words: &[&str], max: usize) -> Dictionary {
        Dictionary::new(words.iter().copied(), max).unwrap()
    }

    #[test]
    fn corrects_words() {
        let ac = |s: &str| s.chars().collect::<Vec<_>>();
        assert_eq!(brute(&ac("NEWZ"), &ac("NEWS")), 1);
        assert_eq!(brute(&ac("NEWZ"), &ac("NETS")), 2);
        let d = dict(&["NEWS", "NETS"], 2);
        assert_eq!(correct_word("NEWZ", &d), "NEWS");
        assert_eq!(correct_word("NETS", &d), "NETS");

        let small = dict(&["NEWS", "AT", "SPORT"], 1);
        for w in small.words() {
            assert!(brute(&ac("QQQQQ"), &ac(w)) > 1);
        }
        assert_eq!(correct_word("QQQQQ", &small), "QQQQQ");
        // equal distance: lexicographic order decides
        assert_eq!(correct_word("CAT", &dict(&["HAT", "BAT"], 1)), "BAT");
    }

    #[test]
    fn corrects_lines() {
        let d = dict(&["NEWS", "NETS", "AT"], 2);
        assert_eq!(correct_line("NEWS AT 9", &d), "NEWS AT 9");
        assert_eq!(correct_line("NEWZ AT 9", &d), "NEWS AT 9");
        assert_eq!(correct_line("", &d), "");
        assert_eq!(correct_line("NEWZ 1O", &d), "NEWS 1O");
    }

    #[test]
    fn dictionary_file() {
        let d = Dictionary::parse("# header\nnews\n  weather # trailing\n\nAT\n", 2).unwrap();
        assert_eq!(d.words().collect::<Vec<_>>(), vec!["AT", "NEWS", "WEATHER"]);
        assert!(Dictionary::new(["news"], 2).is_err());
        assert!(Dictionary::new([""], 2).is_err());
    }

    fn item(text: &str, track: u32, first: u32, last: u32) -> TrackText {
        TrackText {
            recognition: Recognition {
                text: text.into(),
                confidences: vec![1.0; text.chars().count()],
                engine: Engine::Builtin,
                span: TrackSpan { track, first_frame: first, last_frame: last },
            },
            rect: Rect::new(track as usize, 0, 10, 10),
        }
    }

    #[test]
    fn index_merging() {
        let one = build_index(&[item("NEWS", 0, 0, 10)], None);
        assert_eq!(one.len(), 1);
        assert_eq!((one[0].first_frame, one[0].last_frame), (0, 10));

        let adj = build_index(&[item("NEWS", 1, 11, 20), item("NEWS", 0, 0, 10)], None);
        assert_eq!(adj.len(), 1);
        assert_eq!((adj[0].track, adj[0].first_frame, adj[0].last_frame), (0, 0, 20));

        let apart = build_index(&[item("NEWS", 0, 0, 10), item("NEWS", 1, 15, 20)], None);
        assert_eq!(apart.len(), 2);

        let dropped = build_index(&[item("", 0, 0, 3), item("AT", 1, 0, 3)], None);
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].text, "AT");

        let d = dict(&["NEWS"], 2);
        let fixed = build_index(&[item("NEWZ", 0, 0, 4), item("NEWS", 1, 5, 9)], Some(&d));
        assert_eq!(fixed.len(), 1);
        assert_eq!((fixed[0].text.as_str(), fixed[0].raw.as_str()), ("NEWS", "NEWZ"));
    }

    #[test]
    fn jsonl_key_order() {
        let e = build_index(&[item("AT", 2, 1, 4)], None);
        let line = String::from_utf8(encode_index(&e)).unwrap();
        assert_eq!(
            line,
            "{\"text\":\"AT\",\"raw\":\"AT\",\"track\":2,\"first_frame\":1,\"last_frame\":4,\
             \"rect\":{\"x\":2,\"y\":0,\"w\":10,\"h\":10},\"confidence\":1.0}\n"
        );
    }

    fn word() -> impl Strategy<Value = String> {
        "[ABCNEWST]{1,7}"
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn correct_word_is_idempotent(
            w in word(),
            words in prop::collection::vec(word(), 1..12),
            max in 0usize..3,
        ) {
            let d = Dictionary::new(words, max).unwrap();
            let once = correct_word(&w, &d);
            prop_assert_eq!(correct_word(&once, &d), once.clone());
            prop_assert!(once == w || levenshtein(&once, &w) <= max);
        }

        #[test]
        fn merge_is_order_independent(
            spec in prop::collection::vec((0usize..3, 0u32..30, 0u32..8), 1..10),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let texts = ["NEWS", "AT", "SPORT"];
            let items: Vec<TrackText> = spec
                .iter()
                .enumerate()
                .map(|(i, &(t, first, len))| item(texts[t], i as u32, first, first + len))
                .collect();
            let mut shuffled = items.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build_index(&items, None), build_index(&shuffled, None));
        }
    }
}
