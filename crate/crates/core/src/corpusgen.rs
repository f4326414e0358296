//! Deterministic evaluation corpora: synthetic structured logs and
//! whole-block repetition scaling.
//!
//! Every line has the shape
//! `[YYYY-MM-DD HH:MM:SS] [LEVEL] (component) - message\n`. Per line the
//! generator draws, in this order: level, component, template, then each
//! placeholder left to right. All draws come from [`XorShift64Star`], so
//! output is a pure function of the [`LogGenSpec`].

use std::fmt::Write as _;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Checked-in default spec; see the file for the placeholder syntax.
pub const DEFAULT_SPEC_TEXT: &str = include_str!("../data/default_logspec.conf");

/// xorshift64* (shift triple 12/25/27, multiplier 0x2545F4914F6CDD1D),
/// seeded through one splitmix64 step so that small or zero seeds still
/// give a well-mixed nonzero state.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        XorShift64Star {
            state: if z == 0 { 0x9E37_79B9_7F4A_7C15 } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `0..n` by 128-bit multiply-high; `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Int { lo: u64, hi: u64 },
    Hex { digits: usize },
}

fn parse_template(template: &str) -> Result<Vec<Segment>> {
    let bad = |why: &str| Error::Config(format!("template {template:?}: {why}"));
    let mut segments = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            segments.push(Segment::Literal(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| bad("unterminated placeholder"))?
            + open;
        let body = &rest[open + 1..close];
        let (kind, arg) = body.split_once(':').ok_or_else(|| bad("placeholder needs kind:arg"))?;
        segments.push(match kind {
            "int" => {
                let (lo, hi) = arg.split_once('-').ok_or_else(|| bad("int needs LO-HI"))?;
                let lo: u64 = lo.trim().parse().map_err(|_| bad("bad int bound"))?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad("bad int bound"))?;
                if lo > hi || hi == u64::MAX {
                    return Err(bad("int range is empty or too wide"));
                }
                Segment::Int { lo, hi }
            }
            "hex" => {
                let digits: usize = arg.trim().parse().map_err(|_| bad("bad hex width"))?;
                if digits == 0 || digits > 16 {
                    return Err(bad("hex width must be 1..=16"));
                }
                Segment::Hex { digits }
            }
            other => return Err(bad(&format!("unknown placeholder kind {other:?}"))),
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        segments.push(Segment::Literal(rest.to_string()));
    }
    Ok(segments)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogGenSpec {
    pub seed: u64,
    pub line_count: usize,
    pub levels: Vec<String>,
    pub components: Vec<String>,
    pub templates: Vec<String>,
    pub start: NaiveDateTime,
    pub step_seconds: i64,
}

impl Default for LogGenSpec {
    fn default() -> Self {
        LogGenSpec::parse(DEFAULT_SPEC_TEXT).expect("checked-in default spec parses")
    }
}

impl LogGenSpec {
    /// Parses `key = value` lines; `#` starts a comment line. Keys not
    /// present keep their defaults; the first `template` line replaces the
    /// default template pool. Recognized keys: `seed`, `lines`, `start`,
    /// `step`, `levels`, `components`, `template`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = LogGenSpec {
            seed: 0,
            line_count: 0,
            levels: ["INFO", "WARN", "ERROR", "DEBUG"].map(String::from).to_vec(),
            components: Vec::new(),
            templates: Vec::new(),
            start: NaiveDateTime::parse_from_str("2024-01-01 00:00:00", TIMESTAMP_FORMAT)
                .unwrap(),
            step_seconds: 1,
        };
        spec.apply(text, true)?;
        Ok(spec)
    }

    /// Overlays a config text on top of this spec.
    pub fn merge(&mut self, text: &str) -> Result<()> {
        self.apply(text, false)
    }

    fn apply(&mut self, text: &str, fresh: bool) -> Result<()> {
        let mut templates_replaced = fresh;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} {value:?}", n + 1));
            match key {
                "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
                "lines" => self.line_count = value.parse().map_err(|_| bad("line count"))?,
                "start" => {
                    self.start = NaiveDateTime::parse_from_str(value, TIMESTAMP_FORMAT)
                        .map_err(|_| bad("start timestamp"))?
                }
                "step" => self.step_seconds = value.parse().map_err(|_| bad("step"))?,
                "levels" => self.levels = split_list(value),
                "components" => self.components = split_list(value),
                "template" => {
                    if !templates_replaced {
                        self.templates.clear();
                        templates_replaced = true;
                    }
                    self.templates.push(value.to_string());
                }
                other => {
                    return Err(Error::Config(format!("line {}: unknown key {other:?}", n + 1)))
                }
            }
        }
        Ok(())
    }

    /// Lazily renders the spec's lines.
    pub fn lines(&self) -> Result<LogLines<'_>> {
        if self.levels.is_empty() {
            return Err(Error::Config("level pool is empty".into()));
        }
        if self.components.is_empty() {
            return Err(Error::Config("component pool is empty".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("template pool is empty".into()));
        }
        if self.step_seconds < 0 {
            return Err(Error::Config("timestamp step must not be negative".into()));
        }
        let templates = self
            .templates
            .iter()
            .map(|t| parse_template(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(LogLines {
            spec: self,
            templates,
            rng: XorShift64Star::new(self.seed),
            index: 0,
        })
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Unbounded line iterator; `generate_logs` takes `line_count` of them.
pub struct LogLines<'a> {
    spec: &'a LogGenSpec,
    templates: Vec<Vec<Segment>>,
    rng: XorShift64Star,
    index: i64,
}

impl LogLines<'_> {
    fn pick<'s, T>(rng: &mut XorShift64Star, pool: &'s [T]) -> &'s T {
        &pool[rng.below(pool.len() as u64) as usize]
    }

    /// Appends the next line, newline included, to `out`.
    pub fn write_next(&mut self, out: &mut String) {
        let spec = self.spec;
        let ts = spec.start + Duration::seconds(self.index.saturating_mul(spec.step_seconds));
        self.index += 1;
        let level = Self::pick(&mut self.rng, &spec.levels);
        let component = Self::pick(&mut self.rng, &spec.components);
        let template = &self.templates[self.rng.below(self.templates.len() as u64) as usize];
        let _ = write!(out, "[{}] [{level}] ({component}) - ", ts.format(TIMESTAMP_FORMAT));
        for seg in template {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Int { lo, hi } => {
                    let v = lo + self.rng.below(hi - lo + 1);
                    let _ = write!(out, "{v}");
                }
                Segment::Hex { digits } => {
                    let v = self.rng.next_u64();
                    let _ = write!(out, "{:016x}", v);
                    out.truncate(out.len() - (16 - digits));
                }
            }
        }
        out.push('\n');
    }
}

pub fn generate_logs(spec: &LogGenSpec) -> Result<Vec<u8>> {
    let mut lines = spec.lines()?;
    let mut out = String::with_capacity(spec.line_count * 80);
    for _ in 0..spec.line_count {
        lines.write_next(&mut out);
    }
    Ok(out.into_bytes())
}

/// Generates whole lines from `spec` (ignoring its line count) until the
/// output holds at least `min_bytes`.
pub fn generate_logs_of_size(spec: &LogGenSpec, min_bytes: usize) -> Result<Vec<u8>> {
    let mut lines = spec.lines()?;
    let mut out = String::with_capacity(min_bytes + 128);
    while out.len() < min_bytes {
        lines.write_next(&mut out);
    }
    Ok(out.into_bytes())
}

/// Concatenates whole copies of `block` until the result holds at least
/// `target` bytes.
pub fn repeat_to_size(block: &[u8], target: usize) -> Result<Vec<u8>> {
    if block.is_empty() {
        return Err(Error::Config("cannot repeat an empty block".into()));
    }
    if target == 0 {
        return Err(Error::Config("repeat target must be at least 1 byte".into()));
    }
    Ok(block.repeat(target.div_ceil(block.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_spec() -> LogGenSpec {
        LogGenSpec::parse(
            "seed = 1\nlines = 2\nstart = 2024-01-01 00:00:00\nstep = 1\n\
             levels = INFO\ncomponents = core\ntemplate = started\n",
        )
        .unwrap()
    }

    fn line_matches_grammar(line: &str) -> bool {
        let b = line.as_bytes();
        if b.len() < 30 || b[0] != b'[' || b[20] != b']' || &b[21..23] != b" [" {
            return false;
        }
        let ts = &line[1..20];
        if NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT).is_err() {
            return false;
        }
        let rest = &line[23..];
        let Some((level, rest)) = rest.split_once("] (") else { return false };
        let Some((component, message)) = rest.split_once(") - ") else { return false };
        !level.is_empty() && !component.is_empty() && !message.is_empty() && line.ends_with('\n')
    }

    #[test]
    fn prng_reference_values() {
        let mut rng = XorShift64Star::new(0);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(got, [0x7bbcb40d550682d0, 0xde7fe413d00cc9fd, 0xb3c638353c668c91]);
        let mut rng = XorShift64Star::new(42);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(got, [0x31b0ece7c4f697a2, 0x9008a3b1cb686f03, 0x7c7173abd97be16f]);
        let mut rng = XorShift64Star::new(7);
        assert!((0..1000).all(|_| rng.below(6) < 6));
    }

    #[test]
    fn default_spec_first_lines() {
        let mut spec = LogGenSpec::default();
        spec.line_count = 2;
        assert_eq!(
            String::from_utf8(generate_logs(&spec).unwrap()).unwrap(),
            "[2024-01-01 00:00:00] [INFO] (api) - Connection pool at 18 of 64 connections\n\
             [2024-01-01 00:00:01] [DEBUG] (api) - Cache miss for key session:815\n"
        );
    }

    #[test]
    fn zero_lines_is_empty() {
        let mut spec = LogGenSpec::default();
        spec.line_count = 0;
        assert!(generate_logs(&spec).unwrap().is_empty());
    }

    #[test]
    fn constant_template_lines() {
        let out = generate_logs(&tiny_spec()).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "[2024-01-01 00:00:00] [INFO] (core) - started\n\
             [2024-01-01 00:00:01] [INFO] (core) - started\n"
        );
    }

    #[test]
    fn deterministic_and_well_formed() {
        let spec = LogGenSpec::default();
        let a = generate_logs(&spec).unwrap();
        assert_eq!(a, generate_logs(&spec).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), spec.line_count);
        for line in text.split_inclusive('\n') {
            assert!(line_matches_grammar(line), "{line:?}");
        }
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(generate_logs(&other).unwrap(), text.into_bytes());
    }

    #[test]
    fn timestamps_increase() {
        let spec = LogGenSpec::default();
        let text = String::from_utf8(generate_logs(&spec).unwrap()).unwrap();
        let stamps: Vec<NaiveDateTime> = text
            .lines()
            .map(|l| NaiveDateTime::parse_from_str(&l[1..20], TIMESTAMP_FORMAT).unwrap())
            .collect();
        assert!(stamps.windows(2).all(|w| w[1] - w[0] == Duration::seconds(1)));
    }

    #[test]
    fn default_spec_shape() {
        let spec = LogGenSpec::default();
        assert_eq!(spec.levels, vec!["INFO", "WARN", "ERROR", "DEBUG"]);
        assert_eq!(spec.templates.len(), 8);
        for t in &spec.templates {
            let slots = parse_template(t)
                .unwrap()
                .iter()
                .filter(|s| !matches!(s, Segment::Literal(_)))
                .count();
            assert!((1..=2).contains(&slots), "{t}");
        }
    }

    #[test]
    fn config_errors() {
        let mut spec = tiny_spec();
        spec.components.clear();
        assert!(matches!(generate_logs(&spec), Err(Error::Config(_))));
        let mut spec = tiny_spec();
        spec.templates = vec!["bad {int:5-1}".into()];
        assert!(generate_logs(&spec).is_err());
        spec.templates = vec!["bad {nope:1}".into()];
        assert!(generate_logs(&spec).is_err());
        spec.templates = vec!["bad {int:1-2".into()];
        assert!(generate_logs(&spec).is_err());
        assert!(LogGenSpec::parse("colour = blue").is_err());
        assert!(LogGenSpec::parse("seed = minus one").is_err());
    }

    #[test]
    fn merge_overrides() {
        let mut spec = LogGenSpec::default();
        spec.merge("seed = 9\ntemplate = only {hex:4}\n").unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.templates, vec!["only {hex:4}"]);
        assert_eq!(spec.components, LogGenSpec::default().components);
        let text = String::from_utf8(generate_logs(&spec).unwrap()).unwrap();
        assert!(text.lines().all(|l| {
            let id = l.rsplit(' ').next().unwrap();
            id.len() == 4 && id.chars().all(|c| c.is_ascii_hexdigit())
        }));
    }

    #[test]
    fn sized_generation() {
        let spec = LogGenSpec::default();
        let out = generate_logs_of_size(&spec, 10_000).unwrap();
        assert!(out.len() >= 10_000 && out.len() < 10_200);
        assert!(out.ends_with(b"\n"));
        let prefix = generate_logs(&spec).unwrap();
        assert!(prefix.starts_with(&out) || out.starts_with(&prefix));
    }

    #[test]
    fn repeat_examples() {
        assert_eq!(repeat_to_size(b"ab", 5).unwrap(), b"ababab");
        assert_eq!(repeat_to_size(b"x", 3).unwrap(), b"xxx");
        assert!(matches!(repeat_to_size(b"", 3), Err(Error::Config(_))));
        assert!(repeat_to_size(b"ab", 0).is_err());
        let block = vec![7u8; 1000];
        let target = 600 << 20;
        let n = repeat_to_size(&block, target).unwrap().len();
        assert!(n >= target && n < target + block.len());
    }

    proptest! {
        #[test]
        fn repeat_is_periodic(block in proptest::collection::vec(any::<u8>(), 1..64), target in 1usize..2000) {
            let out = repeat_to_size(&block, target).unwrap();
            prop_assert!(out.len() >= target && out.len() < target + block.len());
            prop_assert_eq!(out.len() % block.len(), 0);
            let p = block.len();
            prop_assert!(out[p..].iter().zip(&out).all(|(a, b)| a == b));
        }
    }
}
