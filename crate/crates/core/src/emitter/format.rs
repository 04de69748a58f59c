use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use thiserror::Error;

use super::{BodyCheck, Expect, PlanStep, SuiteFile, TestPlan};
use crate::model::BodyPointer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    PlanYaml,
    Curl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::PlanYaml => "plan.yaml",
            OutputFormat::Curl => "curl.sh",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<OutputFormat, String> {
        match s {
            "plan-yaml" => Ok(OutputFormat::PlanYaml),
            "curl-script" => Ok(OutputFormat::Curl),
            other => Err(format!("unknown output format `{other}` (expected plan-yaml or curl-script)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot serialize plan: {0}")]
    Yaml(#[from] serde_yaml::Error),
}

fn indent(text: &str, prefix: &str) -> String {
    text.lines()
        .map(|l| if l.is_empty() { String::new() } else { format!("{prefix}{l}") })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Comment lines with `prefix`; characters that could end a comment early
/// are escaped.
fn comment(text: &str, prefix: &str) -> String {
    let safe: String = text
        .chars()
        .map(|c| match c {
            '\n' => "\n".to_string(),
            c if c.is_control() || matches!(c, '\u{2028}' | '\u{2029}' | '\u{feff}') => c.escape_unicode().to_string(),
            c => c.to_string(),
        })
        .collect();
    indent(&safe, prefix)
}

/// The suite as YAML, each test preceded by its summary as a comment.
pub fn render_plan_yaml(suite: &SuiteFile) -> Result<String, EmitError> {
    #[derive(serde::Serialize)]
    struct Header<'a> {
        suite: &'a super::SuiteHeader,
    }
    let mut out = serde_yaml::to_string(&Header { suite: &suite.suite })?;
    if suite.tests.is_empty() {
        out.push_str("tests: []\n");
        return Ok(out);
    }
    out.push_str("tests:\n");
    for t in &suite.tests {
        out.push('\n');
        out.push_str(&comment(&t.summary.render(), "  # "));
        out.push('\n');
        out.push_str(&indent(&serde_yaml::to_string(&[t])?, "  "));
        out.push('\n');
    }
    Ok(out)
}

fn single_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Double-quoted shell word in which only `${var}` for known variables is
/// interpolated.
fn double_quote(s: &str, vars: &BTreeSet<String>) -> String {
    let escaped: String = s
        .chars()
        .map(|c| match c {
            '\\' | '"' | '`' | '$' => format!("\\{c}"),
            c => c.to_string(),
        })
        .collect();
    let re = Regex::new(r"\\\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    let out = re.replace_all(&escaped, |c: &regex::Captures| {
        if vars.contains(&c[1]) {
            format!("${{{}}}", &c[1])
        } else {
            c[0].to_string()
        }
    });
    format!("\"{out}\"")
}

fn jq_path(pointer: &str) -> String {
    let segs: Vec<String> = BodyPointer::parse(pointer)
        .segments()
        .iter()
        .map(|s| match s.parse::<usize>() {
            Ok(i) => i.to_string(),
            Err(_) => serde_json::to_string(s).expect("string serializes"),
        })
        .collect();
    format!("[{}]", segs.join(","))
}

/// Quoted URL words; constant text is percent-encoded here, variables at
/// run time.
fn url_words(text: &str, encode: bool, vars: &BTreeSet<String>) -> String {
    let re = Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    let constant = |t: &str| {
        let t = if encode { encode_query_component(t) } else { t.to_string() };
        double_quote(&t, vars)
    };
    let mut out = String::new();
    let mut last = 0;
    for c in re.captures_iter(text) {
        let m = c.get(0).expect("group 0");
        if m.start() > last {
            out.push_str(&constant(&text[last..m.start()]));
        }
        if vars.contains(&c[1]) {
            out.push_str(&format!("\"$(urlenc \"${{{}}}\")\"", &c[1]));
        } else {
            out.push_str(&constant(m.as_str()));
        }
        last = m.end();
    }
    if last < text.len() {
        out.push_str(&constant(&text[last..]));
    }
    out
}

fn encode_query_component(raw: &str) -> String {
    url::form_urlencoded::byte_serialize(raw.as_bytes()).collect()
}

fn url_expr(step: &PlanStep, vars: &BTreeSet<String>) -> String {
    let mut out = String::from("\"${BASE_URL}\"");
    out.push_str(&url_words(&step.path, false, vars));
    for (i, q) in step.query.iter().enumerate() {
        out.push_str(if i == 0 { "'?'" } else { "'&'" });
        out.push_str(&url_words(&q.name, true, vars));
        out.push_str("'='");
        out.push_str(&url_words(&q.value, true, vars));
    }
    out
}

fn status_pattern(expect: &Expect) -> Option<String> {
    if let Some(s) = expect.status {
        return Some(s.to_string());
    }
    if expect.status_any_of.is_empty() {
        return None;
    }
    Some(
        expect
            .status_any_of
            .iter()
            .map(|e| match e.strip_suffix("xx") {
                Some(d) => format!("{d}??"),
                None => e.clone(),
            })
            .collect::<Vec<_>>()
            .join("|"),
    )
}

fn body_check_line(check: &BodyCheck) -> String {
    let expected = match check.kind.as_str() {
        "undefined" => "null",
        k => k,
    };
    format!(
        "  expect_type \"$name\" \"$body\" {} {}\n",
        single_quote(&jq_path(&check.pointer)),
        single_quote(expected)
    )
}

fn step_script(n: usize, step: &PlanStep, vars: &BTreeSet<String>) -> String {
    let mut s = String::new();
    if let Some(c) = &step.comment {
        s.push_str(&comment(c, "  # "));
        s.push('\n');
    }
    let mut args = vec![format!("-X {}", step.verb), url_expr(step, vars)];
    for h in &step.headers {
        args.push(format!("-H {}", double_quote(&format!("{}: {}", h.name, h.value), vars)));
    }
    if let Some(b) = &step.body {
        args.push(format!("-H {}", single_quote(&format!("Content-Type: {}", b.media_type))));
        let mut json = b.json.clone();
        for v in vars {
            json = json.replace(&format!("\"${{{v}}}\""), &format!("${{{v}_json}}"));
        }
        args.push(format!("--data-raw {}", double_quote(&json, &json_vars(vars))));
    }
    let _ = writeln!(s, "  call {}", args.join(" \\\n    "));
    if let Some(p) = status_pattern(&step.expect) {
        let _ = writeln!(
            s,
            "  case \"$status\" in {p}) ;; *) fail \"$name\" \"step {n} returned $status, expected {p}\" ;; esac"
        );
    }
    for c in &step.expect.body_checks {
        s.push_str(&body_check_line(c));
    }
    for e in &step.extract {
        let path = single_quote(&jq_path(&e.from));
        let _ = writeln!(s, "  {}=$(extract \"$body\" {path})", e.var);
        let _ = writeln!(s, "  {}_json=$(extract_json \"$body\" {path})", e.var);
    }
    s
}

fn json_vars(vars: &BTreeSet<String>) -> BTreeSet<String> {
    vars.iter().map(|v| format!("{v}_json")).chain(vars.iter().cloned()).collect()
}

fn test_script(t: &TestPlan) -> String {
    let mut vars: BTreeSet<String> = t.steps.iter().flat_map(|s| s.extract.iter().map(|e| e.var.clone())).collect();
    let mut s = String::new();
    s.push_str(&comment(&t.summary.render(), "# "));
    s.push('\n');
    let _ = writeln!(s, "{}() {{", t.name);
    let _ = writeln!(s, "  local name={}", single_quote(&t.name));
    if let Some(l) = &t.login {
        vars.insert(l.extract.var.clone());
        let _ = writeln!(
            s,
            "  call -X {} \"${{BASE_URL}}\"{} -H {} --data-raw {}",
            l.verb,
            double_quote(&l.path, &vars),
            single_quote(&format!("Content-Type: {}", l.content_type)),
            single_quote(&l.payload)
        );
        let _ = writeln!(
            s,
            "  local {}={}\"$(extract \"$body\" {})\"",
            l.extract.var,
            single_quote(l.extract.prefix.as_deref().unwrap_or("")),
            single_quote(&jq_path(&l.extract.from))
        );
    }
    for v in t.steps.iter().flat_map(|s| &s.extract) {
        let _ = writeln!(s, "  local {0} {0}_json", v.var);
    }
    for (i, step) in t.steps.iter().enumerate() {
        s.push_str(&step_script(i + 1, step, &vars));
    }
    s.push_str("}\n");
    s
}

const PRELUDE: &str = r#"set -u
BASE_URL="${BASE_URL:-http://localhost:8080}"
FAILURES=0
body=""
status=""

urlenc() {
  local LC_ALL=C s="$1" out="" c i
  for ((i = 0; i < ${#s}; i++)); do
    c=${s:i:1}
    case "$c" in
      [a-zA-Z0-9.~_-]) out+="$c" ;;
      *) out+=$(printf '%%%02X' "'$c") ;;
    esac
  done
  printf '%s' "$out"
}

call() {
  local out
  out=$(curl -sS --max-time 60 -w '\n%{http_code}' "$@") || out=$'\n000'
  status=${out##*$'\n'}
  body=${out%$'\n'*}
}

extract() { printf '%s' "$1" | jq -r --argjson p "$2" 'getpath($p) // empty' 2>/dev/null; }
extract_json() { printf '%s' "$1" | jq -c --argjson p "$2" 'getpath($p)' 2>/dev/null; }

fail() {
  echo "FAIL $1: $2"
  FAILURES=$((FAILURES + 1))
}

expect_type() {
  local t
  t=$(printf '%s' "$2" | jq -r --argjson p "$3" 'getpath($p) | type' 2>/dev/null)
  [ "$t" = "$4" ] || fail "$1" "$3 has type $t, expected $4"
}
"#;

/// A bash script replaying the suite with curl and jq.
pub fn render_curl(suite: &SuiteFile) -> String {
    let mut s = String::from("#!/usr/bin/env bash\n");
    let _ = writeln!(s, "# suite: {}", suite.suite.name);
    let _ = writeln!(s, "# {}", suite.suite.created_with);
    s.push_str(PRELUDE);
    for t in &suite.tests {
        s.push('\n');
        s.push_str(&test_script(t));
    }
    s.push('\n');
    for t in &suite.tests {
        let _ = writeln!(s, "{}", t.name);
    }
    s.push_str("echo \"$FAILURES failure(s)\"\n[ \"$FAILURES\" -eq 0 ]\n");
    s
}

/// Writes `<suite>.<ext>` into `dir` for each format.
pub fn emit_suite(dir: &Path, suite: &SuiteFile, formats: &[OutputFormat]) -> Result<Vec<PathBuf>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|source| EmitError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for f in formats {
        let path = dir.join(format!("{}.{}", suite.suite.name, f.extension()));
        let text = match f {
            OutputFormat::PlanYaml => render_plan_yaml(suite)?,
            OutputFormat::Curl => render_curl(suite),
        };
        std::fs::write(&path, text).map_err(|source| EmitError::Io { path: path.clone(), source })?;
        #[cfg(unix)]
        if *f == OutputFormat::Curl {
            use std::os::unix::fs::PermissionsExt;
            let _ = std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755));
        }
        written.push(path);
    }
    Ok(written)
}
