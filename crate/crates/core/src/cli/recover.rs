use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::atomic::write_atomic;
use crate::data::{load_corpus, write_vocab_manifest, TriplePolicy};
use crate::error::Result;
use crate::spectral::{offline_recover, PowerMethodConfig, TopicParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverArgs {
    pub corpus: PathBuf,
    pub vocab_size: usize,
    pub topics: usize,
    pub policy: TriplePolicy,
    pub seed: u64,
    pub output: PathBuf,
}

/// Offline spectral recovery over a whole corpus. Writes `omega.txt` (one
/// weight per line), `topics.txt` (one tab-separated row per vocabulary
/// index) and `vocab.tsv` into the output directory.
pub fn recover(args: &RecoverArgs) -> Result<TopicParams> {
    let corpus = load_corpus(&args.corpus, args.vocab_size, args.policy, args.seed)?;
    let params = offline_recover(
        &corpus.docs,
        corpus.vocab.len(),
        args.topics,
        &PowerMethodConfig::default(),
        args.seed,
    )?;
    write_params(&args.output, &params)?;
    write_vocab_manifest(&args.output.join("vocab.tsv"), &corpus.vocab)?;
    Ok(params)
}

pub fn write_params(dir: &Path, params: &TopicParams) -> Result<()> {
    let mut omega = String::new();
    for w in params.omega() {
        let _ = writeln!(omega, "{w}");
    }
    let mut topics = String::new();
    for i in 0..params.vocab() {
        let row: Vec<String> = (0..params.k()).map(|c| params.word_prob(i, c).to_string()).collect();
        let _ = writeln!(topics, "{}", row.join("\t"));
    }
    write_atomic(&dir.join("omega.txt"), omega.as_bytes())?;
    write_atomic(&dir.join("topics.txt"), topics.as_bytes())
}
