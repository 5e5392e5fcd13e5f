use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::data::{StreamConfig, StreamKind, TriplePolicy};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::spectral::PowerMethodConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmKind {
    Spectral {
        reservoir: usize,
        power: PowerMethodConfig,
        incremental_m2: bool,
    },
    Em {
        alpha: f64,
        minibatch: usize,
    },
    /// The noise-free learner fed exact running moments.
    Oracle { power: PowerMethodConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub label: String,
    pub kind: AlgorithmKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub stream: StreamConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub exec: Execution,
    /// Seed for the offline recovery that defines a corpus run's reference.
    pub reference_seed: u64,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    arg: Option<String>,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        field: field.to_owned(),
        reason: reason.into(),
    }
}

fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(header) = s.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, s, "section header must end with `]`"))?;
            let mut parts = header.split_whitespace();
            let name = parts.next().ok_or_else(|| config_err(line, s, "empty section name"))?;
            let arg = parts.next().map(str::to_owned);
            if parts.next().is_some() {
                return Err(config_err(line, s, "section header takes at most one argument"));
            }
            let name = name.to_owned();
            match (name.as_str(), &arg) {
                ("stream" | "run", None) => {
                    if sections.iter().any(|sec| sec.name == name) {
                        return Err(config_err(line, &name, "section repeated"));
                    }
                }
                ("algorithm", Some(_)) => {}
                ("algorithm", None) => {
                    return Err(config_err(line, s, "expected `[algorithm spectral|em|oracle]`"));
                }
                _ => return Err(config_err(line, s, "unknown section")),
            }
            sections.push(Section {
                name,
                arg,
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| config_err(line, s, "expected `key = value` or `[section]`"))?;
        let key = key.trim();
        let section = sections
            .last_mut()
            .ok_or_else(|| config_err(line, key, "key outside of any section"))?;
        let entry = Entry {
            value: value.trim().to_owned(),
            line,
        };
        if section.entries.insert(key.to_owned(), entry).is_some() {
            return Err(config_err(line, key, "key repeated in section"));
        }
    }
    Ok(sections)
}

/// Applies `section.key=value` or `algorithm.<kind>.key=value` overrides.
fn apply_override(sections: &mut Vec<Section>, spec: &str) -> Result<()> {
    let bad = |reason: &str| config_err(0, spec, reason);
    let (path, value) = spec.split_once('=').ok_or_else(|| bad("override must be `section.key=value`"))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    let entry = Entry {
        value: value.trim().to_owned(),
        line: 0,
    };
    match parts.as_slice() {
        [section @ ("stream" | "run"), key] => {
            let idx = match sections.iter().position(|s| s.name == *section) {
                Some(i) => i,
                None => {
                    sections.push(Section {
                        name: (*section).to_owned(),
                        arg: None,
                        line: 0,
                        entries: BTreeMap::new(),
                    });
                    sections.len() - 1
                }
            };
            sections[idx].entries.insert((*key).to_owned(), entry);
        }
        ["algorithm", kind, key] => {
            let mut hit = false;
            for s in sections.iter_mut().filter(|s| s.name == "algorithm" && s.arg.as_deref() == Some(*kind)) {
                s.entries.insert((*key).to_owned(), entry.clone());
                hit = true;
            }
            if !hit {
                return Err(bad("no algorithm section of that kind"));
            }
        }
        _ => return Err(bad("override must be `stream.key`, `run.key` or `algorithm.<kind>.key`")),
    }
    Ok(())
}

struct Fields<'a> {
    section: &'a Section,
    used: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(section: &'a Section) -> Self {
        Fields { section, used: Vec::new() }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Entry> {
        self.used.push(key);
        self.section.entries.get(key)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &'a str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|err| config_err(e.line, key, format!("`{}`: {err}", e.value))),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &'a str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|v| {
                let v = v.trim();
                v.parse().map_err(|err| config_err(e.line, key, format!("`{v}`: {err}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn finish(self) -> Result<()> {
        for (key, e) in &self.section.entries {
            if !self.used.contains(&key.as_str()) {
                return Err(config_err(e.line, key, format!("unknown key in [{}]", self.section.name)));
            }
        }
        Ok(())
    }
}

fn parse_seeds(e: &Entry) -> Result<Vec<u64>> {
    let err = |reason: String| config_err(e.line, "seeds", reason);
    if let Some((lo, hi)) = e.value.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|x| err(format!("`{lo}`: {x}")))?;
        let hi: u64 = hi.trim().parse().map_err(|x| err(format!("`{hi}`: {x}")))?;
        return Ok((lo..hi).collect());
    }
    e.value
        .split(',')
        .map(|v| v.trim().parse().map_err(|x| err(format!("`{v}`: {x}"))))
        .collect()
}

fn power_config(f: &mut Fields<'_>, exec: Execution) -> Result<PowerMethodConfig> {
    let d = PowerMethodConfig::default();
    Ok(PowerMethodConfig {
        restarts: f.get("restarts", d.restarts)?,
        iterations: f.get("iterations", d.iterations)?,
        tol: f.get("tol", d.tol)?,
        exec,
    })
}

fn stream_config(sec: Option<&Section>) -> Result<StreamConfig> {
    let d = StreamConfig::default();
    let Some(sec) = sec else {
        return Ok(d);
    };
    let mut f = Fields::new(sec);
    let cfg = StreamConfig {
        kind: f.get("kind", d.kind)?,
        topics: f.get("topics", d.topics)?,
        vocab: f.get("vocab", d.vocab)?,
        n: f.get("n", d.n)?,
        p: f.get("p", d.p)?,
        prior: f.list("prior")?.unwrap_or(d.prior),
        schedule: f.list("schedule")?.unwrap_or(d.schedule),
        seed: 0,
        corpus: f.raw("corpus").map(|e| PathBuf::from(&e.value)),
        policy: f.get::<TriplePolicy>("policy", d.policy)?,
    };
    f.finish()?;
    cfg.validate().map_err(|e| config_err(sec.line, "stream", e.to_string()))?;
    if cfg.kind != StreamKind::Corpus {
        cfg.model().map_err(|e| config_err(sec.line, "stream", e.to_string()))?;
    }
    Ok(cfg)
}

fn algorithms(sec: &Section, n: usize, exec: Execution) -> Result<Vec<AlgorithmSpec>> {
    let mut f = Fields::new(sec);
    let label: Option<String> = f.raw("label").map(|e| e.value.clone());
    let out = match sec.arg.as_deref() {
        Some("spectral") => {
            let reservoir = f.get("reservoir", n)?;
            let power = power_config(&mut f, exec)?;
            let incremental_m2 = f.get("incremental_m2", false)?;
            vec![AlgorithmSpec {
                label: label.unwrap_or_else(|| format!("spectral-m{reservoir}")),
                kind: AlgorithmKind::Spectral {
                    reservoir,
                    power,
                    incremental_m2,
                },
            }]
        }
        Some("em") => {
            let alphas: Vec<f64> = f.list("alpha")?.unwrap_or_else(|| vec![0.5]);
            let minibatch = f.get("minibatch", 1usize)?;
            if label.is_some() && alphas.len() > 1 {
                return Err(config_err(sec.line, "label", "a label needs a single alpha"));
            }
            alphas
                .into_iter()
                .map(|alpha| AlgorithmSpec {
                    label: label.clone().unwrap_or_else(|| format!("em-a{alpha}-b{minibatch}")),
                    kind: AlgorithmKind::Em { alpha, minibatch },
                })
                .collect()
        }
        Some("oracle") => {
            let power = power_config(&mut f, exec)?;
            vec![AlgorithmSpec {
                label: label.unwrap_or_else(|| "oracle".into()),
                kind: AlgorithmKind::Oracle { power },
            }]
        }
        other => {
            return Err(config_err(
                sec.line,
                other.unwrap_or(""),
                "algorithm must be spectral, em or oracle",
            ))
        }
    };
    f.finish()?;
    for a in &out {
        let bad = |reason: String| config_err(sec.line, &a.label, reason);
        match &a.kind {
            AlgorithmKind::Spectral { reservoir, power, .. } => {
                if *reservoir == 0 {
                    return Err(bad("reservoir must be positive".into()));
                }
                power.validate().map_err(|e| bad(e.to_string()))?;
            }
            AlgorithmKind::Em { alpha, minibatch } => {
                if !(0.5..=1.0).contains(alpha) || *minibatch == 0 {
                    return Err(bad(format!("need alpha in [0.5, 1] and minibatch > 0, got {alpha}, {minibatch}")));
                }
            }
            AlgorithmKind::Oracle { power } => power.validate().map_err(|e| bad(e.to_string()))?,
        }
        if a.label.is_empty() || a.label.contains(['/', '\\', ',']) {
            return Err(bad("label must be non-empty without `/`, `\\` or `,`".into()));
        }
    }
    Ok(out)
}

/// Parses an experiment description, applying `overrides` on top.
pub fn parse_spec(text: &str, overrides: &[String]) -> Result<ExperimentSpec> {
    let mut sections = parse_sections(text)?;
    for o in overrides {
        apply_override(&mut sections, o)?;
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let stream = stream_config(find("stream"))?;

    let (seeds, output, exec, reference_seed) = match find("run") {
        Some(sec) => {
            let mut f = Fields::new(sec);
            let seeds = match f.raw("seeds") {
                Some(e) => parse_seeds(e)?,
                None => vec![0],
            };
            let output = PathBuf::from(f.get("output", "results".to_owned())?);
            let exec = if f.get("parallel", true)? {
                Execution::Parallel
            } else {
                Execution::Sequential
            };
            let reference_seed = f.get("reference_seed", 0u64)?;
            f.finish()?;
            if seeds.is_empty() {
                return Err(config_err(sec.line, "seeds", "no seeds"));
            }
            (seeds, output, exec, reference_seed)
        }
        None => (vec![0], PathBuf::from("results"), Execution::Parallel, 0),
    };

    let mut algs = Vec::new();
    for sec in sections.iter().filter(|s| s.name == "algorithm") {
        let list = algorithms(sec, stream.n, exec)?;
        for a in &list {
            if matches!(a.kind, AlgorithmKind::Oracle { .. }) && stream.kind == StreamKind::Corpus {
                return Err(config_err(sec.line, &a.label, "oracle needs a synthetic stream"));
            }
            if algs.iter().any(|b: &AlgorithmSpec| b.label == a.label) {
                return Err(config_err(sec.line, &a.label, "duplicate algorithm label"));
            }
        }
        algs.extend(list);
    }
    if algs.is_empty() {
        return Err(config_err(0, "algorithm", "no [algorithm ...] section"));
    }
    Ok(ExperimentSpec {
        stream,
        algorithms: algs,
        seeds,
        output,
        exec,
        reference_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = "
# hard problem sweep
[stream]
kind = stochastic
p = 0.7
n = 1000

[run]
seeds = 0..10
output = out/hard

[algorithm spectral]
reservoir = 1000

[algorithm em]
alpha = 0.5, 0.6, 0.7, 0.8, 0.9
minibatch = 1
";

    #[test]
    fn sweep_expands() {
        let spec = parse_spec(SWEEP, &[]).unwrap();
        assert_eq!(spec.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(spec.stream.p, 0.7);
        assert_eq!(spec.algorithms.len(), 6);
        assert_eq!(spec.algorithms[0].label, "spectral-m1000");
        assert_eq!(spec.algorithms[3].label, "em-a0.7-b1");
        assert_eq!(spec.output, PathBuf::from("out/hard"));
    }

    #[test]
    fn overrides_win() {
        let spec = parse_spec(
            SWEEP,
            &["stream.n=50".into(), "run.seeds=3,4".into(), "algorithm.em.minibatch=100".into()],
        )
        .unwrap();
        assert_eq!(spec.stream.n, 50);
        assert_eq!(spec.seeds, vec![3, 4]);
        assert!(spec
            .algorithms
            .iter()
            .skip(1)
            .all(|a| matches!(a.kind, AlgorithmKind::Em { minibatch: 100, .. })));
        assert!(parse_spec(SWEEP, &["algorithm.oracle.tol=1".into()]).is_err());
    }

    #[test]
    fn empty_algorithm_list_is_an_error() {
        let err = parse_spec("[stream]\nn = 10\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("algorithm"));
    }

    #[test]
    fn errors_carry_line_and_field() {
        let text = "[stream]\nn = 10\np = lots\n[algorithm oracle]\n";
        match parse_spec(text, &[]) {
            Err(Error::Config { line, field, .. }) => assert_eq!((line, field.as_str()), (3, "p")),
            other => panic!("unexpected {other:?}"),
        }
        match parse_spec("[algorithm em]\nbeta = 1\n", &[]) {
            Err(Error::Config { line, field, .. }) => assert_eq!((line, field.as_str()), (2, "beta")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_spec("[algorithm em]\nalpha = 0.3\n", &[]).is_err());
        assert!(parse_spec("[algorithm svd]\n", &[]).is_err());
        assert!(parse_spec("n = 3\n", &[]).is_err());
        assert!(parse_spec("[stream]\nkind = corpus\n[algorithm oracle]\n", &[]).is_err());
        assert!(parse_spec("[algorithm oracle]\n[algorithm oracle]\n", &[]).is_err());
    }

    #[test]
    fn defaults() {
        let spec = parse_spec("[algorithm spectral]\n[algorithm oracle]\nrestarts = 5\n", &[]).unwrap();
        assert_eq!(spec.seeds, vec![0]);
        assert_eq!(spec.stream, StreamConfig::default());
        match &spec.algorithms[1].kind {
            AlgorithmKind::Oracle { power } => assert_eq!(power.restarts, 5),
            other => panic!("unexpected {other:?}"),
        }
        match &spec.algorithms[0].kind {
            AlgorithmKind::Spectral { reservoir, .. } => assert_eq!(*reservoir, 1000),
            other => panic!("unexpected {other:?}"),
        }
    }
}
