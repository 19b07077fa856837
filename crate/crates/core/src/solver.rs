//! External SMT solver invocation over SMT-LIB 2 text.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

/// Environment variable naming the solver executable.
pub const SOLVER_ENV: &str = "SHIFTCHECK_SOLVER";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver executable {0:?} not found")]
    SolverMissing(PathBuf),
    #[error("solver crashed: {0}")]
    SolverCrashed(String),
    #[error("cannot parse solver output: {0}")]
    ParseError(String),
    #[error("solver i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of one `check-sat`.
#[derive(Clone, Debug, PartialEq)]
pub enum SolverVerdict {
    /// Satisfiable, with the values reported by `get-value`.
    Sat(BTreeMap<String, BigRational>),
    Unsat,
    Unknown(String),
    Timeout,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl SolverConfig {
    /// z3 reading a script from standard input.
    pub fn z3(program: impl Into<PathBuf>) -> Self {
        SolverConfig {
            program: program.into(),
            args: vec!["-in".into(), "-smt2".into()],
            timeout: Duration::from_secs(20),
        }
    }

    /// Solver from `SHIFTCHECK_SOLVER`, falling back to `z3` on the path.
    pub fn from_env() -> Self {
        let program = std::env::var_os(SOLVER_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("z3"));
        SolverConfig::z3(program)
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    /// Resolves the executable against `PATH`.
    pub fn resolve(&self) -> Option<PathBuf> {
        resolve_program(&self.program)
    }

    /// Solves a script, killing the solver after the timeout.
    pub fn solve(&self, script: &str) -> Result<SolverVerdict, SolverError> {
        let program = self
            .resolve()
            .ok_or_else(|| SolverError::SolverMissing(self.program.clone()))?;
        let mut child = Command::new(&program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => SolverError::SolverMissing(program.clone()),
                _ => SolverError::Io(e),
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = script.to_string();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
            let _ = stdin.write_all(b"\n(exit)\n");
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });
        let deadline = Instant::now() + self.timeout;
        let status = loop {
            if let Some(st) = child.try_wait()? {
                break Some(st);
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(1));
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        let Some(status) = status else {
            return Ok(SolverVerdict::Timeout);
        };
        match parse_response(&out) {
            Ok(v) => Ok(v),
            Err(_) if !status.success() || out.trim().is_empty() => Err(SolverError::SolverCrashed(
                format!("exit {status}: {}{}", err.trim(), first_line(&out)),
            )),
            Err(e) => Err(e),
        }
    }
}

fn first_line(s: &str) -> String {
    s.lines().next().map(|l| format!(" ({l})")).unwrap_or_default()
}

fn resolve_program(p: &Path) -> Option<PathBuf> {
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(p))
        .find(|c| c.is_file())
}

/// Parses `sat`/`unsat`/`unknown` followed by an optional `get-value` answer.
pub fn parse_response(out: &str) -> Result<SolverVerdict, SolverError> {
    let mut lexer = Lexer::new(out);
    let first = lexer
        .next_sexp()
        .ok_or_else(|| SolverError::ParseError("empty solver output".into()))?;
    match first {
        Sexp::Atom(a) if a == "unsat" => Ok(SolverVerdict::Unsat),
        Sexp::Atom(a) if a == "unknown" => Ok(SolverVerdict::Unknown("solver returned unknown".into())),
        Sexp::Atom(a) if a == "timeout" => Ok(SolverVerdict::Timeout),
        Sexp::Atom(a) if a == "sat" => {
            let mut model = BTreeMap::new();
            if let Some(Sexp::List(items)) = lexer.next_sexp() {
                for item in items {
                    match item {
                        Sexp::List(kv) if kv.len() == 2 => {
                            let name = match &kv[0] {
                                Sexp::Atom(n) => n.clone(),
                                other => {
                                    return Err(SolverError::ParseError(format!(
                                        "bad model entry name {other:?}"
                                    )))
                                }
                            };
                            model.insert(name, rational_of(&kv[1])?);
                        }
                        other => {
                            return Err(SolverError::ParseError(format!("bad model entry {other:?}")))
                        }
                    }
                }
            }
            Ok(SolverVerdict::Sat(model))
        }
        other => Err(SolverError::ParseError(format!("unexpected solver response {other:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
}

impl<'a> Lexer<'a> {
    fn new(s: &'a str) -> Self {
        Lexer {
            chars: s.chars().peekable(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.chars.next();
            } else if c == ';' {
                while let Some(c) = self.chars.next() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_sexp(&mut self) -> Option<Sexp> {
        self.skip_ws();
        match self.chars.peek()? {
            '(' => {
                self.chars.next();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        None => return Some(Sexp::List(items)),
                        Some(')') => {
                            self.chars.next();
                            return Some(Sexp::List(items));
                        }
                        Some(_) => items.push(self.next_sexp()?),
                    }
                }
            }
            ')' => {
                self.chars.next();
                self.next_sexp()
            }
            '"' => {
                self.chars.next();
                let mut s = String::new();
                for c in self.chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                Some(Sexp::Atom(s))
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    self.chars.next();
                }
                Some(Sexp::Atom(s))
            }
        }
    }
}

fn rational_of(s: &Sexp) -> Result<BigRational, SolverError> {
    match s {
        Sexp::Atom(a) => parse_decimal(a),
        Sexp::List(items) => {
            let (op, args) = items
                .split_first()
                .ok_or_else(|| SolverError::ParseError("empty value".into()))?;
            let op = match op {
                Sexp::Atom(o) => o.as_str(),
                _ => return Err(SolverError::ParseError(format!("bad value {s:?}"))),
            };
            let vals = args.iter().map(rational_of).collect::<Result<Vec<_>, _>>()?;
            match (op, vals.as_slice()) {
                ("-", [x]) => Ok(-x.clone()),
                ("-", [x, rest @ ..]) => Ok(rest.iter().fold(x.clone(), |a, b| a - b)),
                ("+", xs) => Ok(xs.iter().fold(BigRational::from_integer(0.into()), |a, b| a + b)),
                ("*", xs) => Ok(xs.iter().fold(BigRational::from_integer(1.into()), |a, b| a * b)),
                ("/", [x, y]) if *y != BigRational::from_integer(0.into()) => Ok(x / y),
                _ => Err(SolverError::ParseError(format!("unsupported value {s:?}"))),
            }
        }
    }
}

fn parse_decimal(a: &str) -> Result<BigRational, SolverError> {
    let bad = || SolverError::ParseError(format!("bad numeral {a:?}"));
    let (int, frac) = match a.split_once('.') {
        Some((i, f)) => (i, f),
        None => (a, ""),
    };
    if int.is_empty() || !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(digits, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_z3_model() {
        let out = "sat\n((shift_0 1.0)\n (shift_1 (- (/ 1.0 3.0))))\n";
        match parse_response(out).unwrap() {
            SolverVerdict::Sat(m) => {
                assert_eq!(m["shift_0"], BigRational::from_integer(1.into()));
                assert_eq!(
                    m["shift_1"],
                    BigRational::new((-1).into(), 3.into())
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_unsat_with_trailing_error() {
        let out = "unsat\n(error \"line 9 column 10: model is not available\")\n";
        assert_eq!(parse_response(out).unwrap(), SolverVerdict::Unsat);
    }

    #[test]
    fn missing_solver_is_reported() {
        let cfg = SolverConfig::z3("/nonexistent/solver-binary");
        assert!(matches!(
            cfg.solve("(check-sat)"),
            Err(SolverError::SolverMissing(_))
        ));
    }
}
