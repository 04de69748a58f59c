//! Random strings matching a regular expression, by walking its HIR.

use rand::Rng;
use regex_syntax::hir::{Class, Hir, HirKind};

/// Unbounded repetitions (`*`, `+`, `{n,}`) add at most this many extra items.
const OPEN_REPEAT: u32 = 3;

const PRINTABLE: (u32, u32) = (0x20, 0x7e);

#[derive(Debug)]
pub struct RegexGen {
    hir: Hir,
    matcher: regex::Regex,
}

impl RegexGen {
    pub fn new(pattern: &str) -> Result<RegexGen, String> {
        let hir = regex_syntax::ParserBuilder::new()
            .build()
            .parse(pattern)
            .map_err(|e| e.to_string())?;
        let matcher = regex::Regex::new(pattern).map_err(|e| e.to_string())?;
        Ok(RegexGen { hir, matcher })
    }

    pub fn is_match(&self, s: &str) -> bool {
        self.matcher.is_match(s)
    }

    /// One walk of the HIR. May fail to match when the pattern uses
    /// assertions the walk ignores; callers verify with [`is_match`].
    ///
    /// [`is_match`]: RegexGen::is_match
    pub fn sample<R: Rng>(&self, rng: &mut R) -> String {
        let mut out = String::new();
        walk(&self.hir, rng, &mut out);
        out
    }
}

fn walk<R: Rng>(hir: &Hir, rng: &mut R, out: &mut String) {
    match hir.kind() {
        HirKind::Empty | HirKind::Look(_) => {}
        HirKind::Literal(lit) => out.push_str(&String::from_utf8_lossy(&lit.0)),
        HirKind::Class(class) => {
            if let Some(c) = pick_class(class, rng) {
                out.push(c);
            }
        }
        HirKind::Repetition(rep) => {
            let max = rep.max.unwrap_or(rep.min + OPEN_REPEAT).max(rep.min);
            let n = rng.gen_range(rep.min..=max);
            for _ in 0..n {
                walk(&rep.sub, rng, out);
            }
        }
        HirKind::Capture(cap) => walk(&cap.sub, rng, out),
        HirKind::Concat(items) => {
            for h in items {
                walk(h, rng, out);
            }
        }
        HirKind::Alternation(branches) => {
            let i = rng.gen_range(0..branches.len());
            walk(&branches[i], rng, out);
        }
    }
}

fn pick_class<R: Rng>(class: &Class, rng: &mut R) -> Option<char> {
    let ranges: Vec<(u32, u32)> = match class {
        Class::Unicode(c) => c.ranges().iter().map(|r| (r.start() as u32, r.end() as u32)).collect(),
        Class::Bytes(c) => c.ranges().iter().map(|r| (r.start() as u32, r.end() as u32)).collect(),
    };
    if ranges.is_empty() {
        return None;
    }
    // Prefer printable ASCII so generated values stay readable in plans.
    let printable: Vec<(u32, u32)> = ranges
        .iter()
        .filter_map(|&(a, b)| {
            let (lo, hi) = (a.max(PRINTABLE.0), b.min(PRINTABLE.1));
            (lo <= hi).then_some((lo, hi))
        })
        .collect();
    let pool = if printable.is_empty() { &ranges } else { &printable };
    let total: u64 = pool.iter().map(|(a, b)| (b - a + 1) as u64).sum();
    let mut k = rng.gen_range(0..total);
    for &(a, b) in pool {
        let size = (b - a + 1) as u64;
        if k < size {
            return char::from_u32(a + k as u32).or(Some('a'));
        }
        k -= size;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_match_common_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in ["^[a-z]{3}-[0-9]{2,4}$", "^(foo|bar)+x?$", r"^\d{4}-\d{2}-\d{2}$", "[^,]+", r"^\w+@\w+\.com$"] {
            let g = RegexGen::new(p).unwrap();
            for _ in 0..200 {
                let s = g.sample(&mut rng);
                assert!(g.is_match(&s), "{p} -> {s:?}");
            }
        }
    }

    #[test]
    fn invalid_pattern_is_an_error() {
        assert!(RegexGen::new("(unclosed").is_err());
    }
}
