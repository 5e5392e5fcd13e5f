use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index::sample;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::moments::seeded_rng;
use crate::tensor::OneHotTriple;

/// How a document longer than three words becomes a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriplePolicy {
    /// The first three in-vocabulary tokens.
    #[default]
    First3,
    /// Three in-vocabulary token positions drawn without replacement.
    Rand3,
}

impl std::str::FromStr for TriplePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first3" => Ok(TriplePolicy::First3),
            "rand3" => Ok(TriplePolicy::Rand3),
            other => Err(Error::InvalidInput(format!("unknown policy `{other}` (expected first3 or rand3)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub token: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Vocabulary in index order: most frequent first, ties by token.
    pub vocab: Vec<VocabEntry>,
    pub docs: Vec<OneHotTriple>,
    /// Documents with fewer than three in-vocabulary tokens.
    pub skipped: usize,
    pub lines: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn lines(path: &Path) -> Result<impl Iterator<Item = Result<String>> + '_> {
    Ok(open(path)?.lines().map(move |l| l.map_err(|e| Error::io(path, e))))
}

/// Reads one whitespace-tokenised document per line, keeps the `d` most
/// frequent tokens, and reduces each document to a triple.
pub fn load_corpus(path: &Path, d: usize, policy: TriplePolicy, seed: u64) -> Result<Corpus> {
    if d == 0 {
        return Err(Error::InvalidInput("vocabulary size must be positive".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut n_lines = 0usize;
    for line in lines(path)? {
        n_lines += 1;
        for tok in line?.split_whitespace() {
            *counts.entry(tok.to_owned()).or_default() += 1;
        }
    }
    let mut vocab: Vec<VocabEntry> = counts.into_iter().map(|(token, count)| VocabEntry { token, count }).collect();
    vocab.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.token.cmp(&b.token)));
    vocab.truncate(d);
    if vocab.is_empty() {
        return Err(Error::Corpus {
            path: path.into(),
            reason: format!("no tokens in {n_lines} lines"),
        });
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, v)| (v.token.as_str(), i)).collect();
    let size = vocab.len();

    let mut rng = seeded_rng(seed);
    let mut docs = Vec::new();
    let mut skipped = 0usize;
    for line in lines(path)? {
        let line = line?;
        let ids: Vec<usize> = line.split_whitespace().filter_map(|t| index.get(t).copied()).collect();
        if ids.len() < 3 {
            skipped += 1;
            continue;
        }
        let w = match policy {
            TriplePolicy::First3 => [ids[0], ids[1], ids[2]],
            TriplePolicy::Rand3 => {
                let pos = sample(&mut rng, ids.len(), 3);
                [ids[pos.index(0)], ids[pos.index(1)], ids[pos.index(2)]]
            }
        };
        docs.push(OneHotTriple::new(w[0], w[1], w[2], size)?);
    }
    log::info!(
        "{}: {} lines, {} documents, {} skipped, vocabulary {}",
        path.display(),
        n_lines,
        docs.len(),
        skipped,
        size
    );
    if docs.is_empty() {
        return Err(Error::Corpus {
            path: path.into(),
            reason: format!("all {n_lines} documents have fewer than three in-vocabulary tokens"),
        });
    }
    Ok(Corpus {
        vocab,
        docs,
        skipped,
        lines: n_lines,
    })
}

/// Writes `index<TAB>token<TAB>count` lines.
pub fn write_vocab_manifest(path: &Path, vocab: &[VocabEntry]) -> Result<()> {
    let mut out = String::new();
    for (i, v) in vocab.iter().enumerate() {
        out.push_str(&format!("{i}\t{}\t{}\n", v.token, v.count));
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn corpus_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn first_three_tokens() {
        let f = corpus_file("a b c\n");
        let c = load_corpus(f.path(), 3, TriplePolicy::First3, 0).unwrap();
        let tokens: Vec<&str> = c.vocab.iter().map(|v| v.token.as_str()).collect();
        assert_eq!(tokens, ["a", "b", "c"]);
        assert_eq!(c.docs, vec![OneHotTriple::new(0, 1, 2, 3).unwrap()]);
    }

    #[test]
    fn short_documents_are_skipped() {
        let f = corpus_file("a a\nb a c d\n\n");
        let c = load_corpus(f.path(), 10, TriplePolicy::First3, 0).unwrap();
        assert_eq!(c.skipped, 2);
        assert_eq!(c.lines, 3);
        assert_eq!(c.docs.len(), 1);
    }

    #[test]
    fn vocabulary_is_truncated_by_frequency_then_token() {
        let f = corpus_file("z z z y y x w\nw x y z\n");
        let c = load_corpus(f.path(), 3, TriplePolicy::First3, 0).unwrap();
        let tokens: Vec<(&str, u64)> = c.vocab.iter().map(|v| (v.token.as_str(), v.count)).collect();
        assert_eq!(tokens, [("z", 4), ("y", 3), ("w", 2)]);
        // Line 1 in-vocabulary tokens: z z z y y w.
        assert_eq!(c.docs[0].words(), [0, 0, 0]);
        // Line 2: w y z.
        assert_eq!(c.docs[1].words(), [2, 1, 0]);
    }

    #[test]
    fn random_policy_is_seeded() {
        let text = "a b c d e f g\nd e f a b c\ng f e d c b a\n";
        let f = corpus_file(text);
        let a = load_corpus(f.path(), 7, TriplePolicy::Rand3, 5).unwrap();
        let b = load_corpus(f.path(), 7, TriplePolicy::Rand3, 5).unwrap();
        assert_eq!(a, b);
        for x in &a.docs {
            let w = x.words();
            assert!(w[0] != w[1] && w[1] != w[2] && w[0] != w[2]);
        }
    }

    #[test]
    fn manifest_round_trip() {
        let f = corpus_file("b a c a\n");
        let c = load_corpus(f.path(), 3, TriplePolicy::First3, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        write_vocab_manifest(&path, &c.vocab).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "0\ta\t2\n1\tb\t1\n2\tc\t1\n");
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            load_corpus(Path::new("/nonexistent/corpus.txt"), 3, TriplePolicy::First3, 0),
            Err(Error::Io { .. })
        ));
        let empty = corpus_file("\n\n");
        assert!(matches!(load_corpus(empty.path(), 3, TriplePolicy::First3, 0), Err(Error::Corpus { .. })));
        assert!("rand3".parse::<TriplePolicy>().is_ok());
        assert!("all".parse::<TriplePolicy>().is_err());
    }
}
