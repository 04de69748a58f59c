use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A path into a JSON body, normalized to segments.
///
/// Parses RFC 6901 pointers (`/data/id`, optionally prefixed by `#`), bare
/// slash paths (`data/id`) and dotted paths (`data.id`). Displays as an
/// RFC 6901 pointer; the root pointer displays as the empty string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BodyPointer {
    segments: Vec<String>,
}

impl BodyPointer {
    pub fn root() -> BodyPointer {
        BodyPointer::default()
    }

    pub fn parse(text: &str) -> BodyPointer {
        let text = text.trim();
        let text = text.strip_prefix('#').unwrap_or(text);
        if text.is_empty() || text == "/" {
            return BodyPointer::root();
        }
        let segments = if let Some(rest) = text.strip_prefix('/') {
            rest.split('/').map(unescape).collect()
        } else if text.contains('/') {
            text.split('/').map(unescape).collect()
        } else {
            text.split('.').map(str::to_string).collect()
        };
        BodyPointer { segments }
    }

    pub fn from_segments<S: Into<String>>(segments: impl IntoIterator<Item = S>) -> BodyPointer {
        BodyPointer {
            segments: segments.into_iter().map(Into::into).collect(),
        }
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn child(&self, segment: impl Into<String>) -> BodyPointer {
        let mut segments = self.segments.clone();
        segments.push(segment.into());
        BodyPointer { segments }
    }

    /// `data.id` form, as used by REST-assured style extractors.
    pub fn dotted(&self) -> String {
        self.segments.join(".")
    }

    /// Identifier-safe rendering, e.g. `data_id`; `body` for the root.
    pub fn ident(&self) -> String {
        if self.segments.is_empty() {
            return "body".to_string();
        }
        self.segments
            .iter()
            .map(|s| {
                s.chars()
                    .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("_")
    }
}

fn unescape(seg: &str) -> String {
    seg.replace("~1", "/").replace("~0", "~")
}

impl fmt::Display for BodyPointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            write!(f, "/{}", seg.replace('~', "~0").replace('/', "~1"))?;
        }
        Ok(())
    }
}

impl Serialize for BodyPointer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BodyPointer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(BodyPointer::parse(&s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_syntaxes_normalize_to_the_same_segments() {
        let expected = BodyPointer::from_segments(["data", "id"]);
        for text in ["#/data/id", "/data/id", "data/id", "data.id"] {
            assert_eq!(BodyPointer::parse(text), expected, "{text}");
        }
        assert_eq!(expected.to_string(), "/data/id");
        assert_eq!(expected.dotted(), "data.id");
        assert_eq!(expected.ident(), "data_id");
    }

    #[test]
    fn escapes_round_trip() {
        let p = BodyPointer::from_segments(["a/b", "c~d"]);
        assert_eq!(p.to_string(), "/a~1b/c~0d");
        assert_eq!(BodyPointer::parse(&p.to_string()), p);
    }

    #[test]
    fn root_forms() {
        assert!(BodyPointer::parse("").is_root());
        assert!(BodyPointer::parse("#").is_root());
        assert!(BodyPointer::parse("/").is_root());
    }
}
