//! The regular-expression dialect shared by schema `pattern`s, the JSLT
//! `test()` function and the random string generator.
//!
//! Matching goes through the `regex` crate (finite automata, no
//! backtracking). Generation walks the parsed syntax tree directly, picking
//! alternation branches and repetition counts uniformly, so it always
//! terminates. Constructs that the generator cannot honour (word
//! boundaries, byte classes outside ASCII) are rejected for both uses.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use regex_syntax::hir::{Class, Hir, HirKind, Look};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Upper bound on extra iterations for `*`, `+` and `{n,}`.
pub const DEFAULT_MAX_REPEAT: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("invalid pattern {source_text:?}: {message}")]
    Syntax { source_text: String, message: String },
    #[error("pattern {source_text:?} uses an unsupported construct: {construct}")]
    Unsupported { source_text: String, construct: String },
    #[error("pattern {source_text:?} cannot generate a string: {message}")]
    Unsatisfiable { source_text: String, message: String },
}

struct Inner {
    source: String,
    regex: Regex,
    hir: Hir,
}

/// A compiled pattern. Cheap to clone; equality is by source text.
#[derive(Clone)]
pub struct Pattern(Arc<Inner>);

impl Pattern {
    pub fn new(source: &str) -> Result<Self, PatternError> {
        let syntax_err = |message: String| PatternError::Syntax {
            source_text: source.to_owned(),
            message,
        };
        let hir = regex_syntax::ParserBuilder::new()
            .build()
            .parse(source)
            .map_err(|e| syntax_err(e.to_string()))?;
        check_dialect(&hir).map_err(|construct| PatternError::Unsupported {
            source_text: source.to_owned(),
            construct,
        })?;
        let regex = Regex::new(source).map_err(|e| syntax_err(e.to_string()))?;
        Ok(Pattern(Arc::new(Inner {
            source: source.to_owned(),
            regex,
            hir,
        })))
    }

    pub fn source(&self) -> &str {
        &self.0.source
    }

    /// True if the pattern matches anywhere in `text` (search semantics;
    /// use `^…$` for a full match).
    pub fn is_match(&self, text: &str) -> bool {
        self.0.regex.is_match(text)
    }

    /// Draws a random string that this pattern matches.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R, max_repeat: u32) -> Result<String, PatternError> {
        let mut out = String::new();
        emit(&self.0.hir, rng, max_repeat, &mut out).map_err(|message| PatternError::Unsatisfiable {
            source_text: self.0.source.clone(),
            message,
        })?;
        if !self.is_match(&out) {
            // only reachable with anchors placed mid-pattern, e.g. `a^b`
            return Err(PatternError::Unsatisfiable {
                source_text: self.0.source.clone(),
                message: format!("anchor placement rejects generated candidate {out:?}"),
            });
        }
        Ok(out)
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Pattern").field(&self.0.source).finish()
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.0.source == other.0.source
    }
}

impl Eq for Pattern {}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.source())
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Pattern::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Deterministic string for `source` given `seed`.
pub fn generate_from_pattern(source: &str, seed: u64) -> Result<String, PatternError> {
    let pattern = Pattern::new(source)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pattern.generate(&mut rng, DEFAULT_MAX_REPEAT)
}

fn check_dialect(hir: &Hir) -> Result<(), String> {
    match hir.kind() {
        HirKind::Empty | HirKind::Literal(_) => Ok(()),
        HirKind::Class(Class::Unicode(_)) => Ok(()),
        HirKind::Class(Class::Bytes(b)) => {
            if b.ranges().iter().all(|r| r.end() < 0x80) {
                Ok(())
            } else {
                Err("non-ASCII byte class".into())
            }
        }
        HirKind::Look(look) => match look {
            Look::Start | Look::End | Look::StartLF | Look::EndLF | Look::StartCRLF | Look::EndCRLF => Ok(()),
            other => Err(format!("assertion {other:?}")),
        },
        HirKind::Repetition(rep) => check_dialect(&rep.sub),
        HirKind::Capture(cap) => check_dialect(&cap.sub),
        HirKind::Concat(parts) | HirKind::Alternation(parts) => parts.iter().try_for_each(check_dialect),
    }
}

fn emit<R: Rng + ?Sized>(hir: &Hir, rng: &mut R, max_repeat: u32, out: &mut String) -> Result<(), String> {
    match hir.kind() {
        HirKind::Empty | HirKind::Look(_) => Ok(()),
        HirKind::Literal(lit) => {
            let s = std::str::from_utf8(&lit.0).map_err(|_| "literal is not UTF-8".to_string())?;
            out.push_str(s);
            Ok(())
        }
        HirKind::Class(Class::Unicode(class)) => {
            let ranges: Vec<(u32, u32)> = class
                .ranges()
                .iter()
                .map(|r| (r.start() as u32, r.end() as u32))
                .collect();
            out.push(pick_char(&ranges, rng)?);
            Ok(())
        }
        HirKind::Class(Class::Bytes(class)) => {
            let ranges: Vec<(u32, u32)> = class
                .ranges()
                .iter()
                .map(|r| (u32::from(r.start()), u32::from(r.end())))
                .collect();
            out.push(pick_char(&ranges, rng)?);
            Ok(())
        }
        HirKind::Repetition(rep) => {
            let max = rep.max.unwrap_or(rep.min.saturating_add(max_repeat));
            let count = rng.random_range(rep.min..=max);
            for _ in 0..count {
                emit(&rep.sub, rng, max_repeat, out)?;
            }
            Ok(())
        }
        HirKind::Capture(cap) => emit(&cap.sub, rng, max_repeat, out),
        HirKind::Concat(parts) => parts.iter().try_for_each(|p| emit(p, rng, max_repeat, out)),
        HirKind::Alternation(branches) => {
            let branch = &branches[rng.random_range(0..branches.len())];
            emit(branch, rng, max_repeat, out)
        }
    }
}

const PRINTABLE: (u32, u32) = (0x20, 0x7e);

/// Uniform choice from the class, restricted to printable ASCII whenever
/// the class has any printable member.
fn pick_char<R: Rng + ?Sized>(ranges: &[(u32, u32)], rng: &mut R) -> Result<char, String> {
    let printable: Vec<(u32, u32)> = ranges
        .iter()
        .filter_map(|&(lo, hi)| {
            let lo = lo.max(PRINTABLE.0);
            let hi = hi.min(PRINTABLE.1);
            (lo <= hi).then_some((lo, hi))
        })
        .collect();
    let pool = if printable.is_empty() { ranges } else { &printable[..] };
    let total: u64 = pool.iter().map(|&(lo, hi)| u64::from(hi - lo) + 1).sum();
    if total == 0 {
        return Err("empty character class".into());
    }
    let mut n = rng.random_range(0..total);
    for &(lo, hi) in pool {
        let size = u64::from(hi - lo) + 1;
        if n < size {
            let cp = lo + n as u32;
            return char::from_u32(cp).ok_or_else(|| format!("invalid code point {cp:#x}"));
        }
        n -= size;
    }
    unreachable!("index within total")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_language() {
        assert_eq!(generate_from_pattern("^a$", 1).unwrap(), "a");
        assert_eq!(generate_from_pattern("a{2,2}", 99).unwrap(), "aa");
    }

    #[test]
    fn user_id_pattern_generates_matching_strings() {
        let p = Pattern::new("^sdrn:[^:]+:user:[0-9]+$").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = p.generate(&mut rng, DEFAULT_MAX_REPEAT).unwrap();
            assert!(p.is_match(&s), "{s}");
            assert!(s.starts_with("sdrn:"));
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let src = "[a-z]{3,9}@(example|test)\\.(com|org)";
        assert_eq!(
            generate_from_pattern(src, 42).unwrap(),
            generate_from_pattern(src, 42).unwrap()
        );
    }

    #[test]
    fn backreference_is_an_error() {
        assert!(matches!(Pattern::new(r"(a)\1"), Err(PatternError::Syntax { .. })));
    }

    #[test]
    fn word_boundary_is_unsupported() {
        assert!(matches!(Pattern::new(r"\bfoo"), Err(PatternError::Unsupported { .. })));
    }

    #[test]
    fn empty_class_cannot_generate() {
        let p = Pattern::new(r"[^\x00-\x{10FFFF}]").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            p.generate(&mut rng, 4),
            Err(PatternError::Unsatisfiable { .. })
        ));
    }

    #[test]
    fn misplaced_anchor_is_reported() {
        let p = Pattern::new("a^b").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(p.generate(&mut rng, 4).is_err());
    }

    #[test]
    fn search_semantics() {
        let p = Pattern::new("^sdrn:[^:]+:user:").unwrap();
        assert!(p.is_match("sdrn:cp:user:42"));
        assert!(!p.is_match("bob"));
        assert!(Pattern::new("user").unwrap().is_match("a user id"));
    }
}
