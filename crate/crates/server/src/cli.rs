//! Command-line front end. Exit status: 0 success, 1 engine error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use classalg::{document, hierarchy, Error, Store};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ops::{self, Page};

#[derive(Debug, Parser)]
#[command(
    name = "classalg",
    version,
    about = "Class algebra engine: normalize, query and report over an ontology document"
)]
pub struct Cli {
    /// Ontology document to read (an empty store when omitted).
    #[arg(long, global = true)]
    pub file: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that the document loads and print its size.
    Load,
    /// Write the store to a document in canonical form.
    Save { out: PathBuf },
    /// Print the normal form of an expression.
    Normalize { expr: String },
    /// Extent, probability and belief interval of an expression.
    Query {
        expr: String,
        #[arg(long, default_value_t = 0)]
        cursor: usize,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Tightest conjunct and class memberships of a set of oids.
    Describe {
        #[arg(required = true)]
        oids: Vec<String>,
    },
    /// Logical and database implications between classes.
    Implications,
    /// Rules that hold in the data but not in the class intents.
    SuggestRules,
    /// Statistics of numeric attributes grouped by the values of `attr`.
    Summarize { attr: String },
    /// The class hierarchy as nodes and edges.
    Hierarchy,
    /// Defined classes with their normal forms and extent counts.
    Classes,
    /// Validate and apply probability constraints, writing back to --file.
    Constrain {
        #[arg(required = true)]
        constraints: Vec<String>,
        /// Validate only.
        #[arg(long)]
        dry_run: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            1
        }
    }
}

fn open(cli: &Cli) -> classalg::Result<Store> {
    match &cli.file {
        Some(p) => document::load(p),
        None => Ok(Store::new()),
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> classalg::Result<()> {
    let mut store = open(cli)?;
    let data = store.snapshot();
    let v = match &cli.command {
        Command::Load => ops::store_summary(&data),
        Command::Save { out: path } => {
            document::save(&data, path)?;
            json!({ "saved": path.display().to_string(), "revision": data.revision() })
        }
        Command::Normalize { expr } => json!({ "sdnf": ops::normalize(&data, expr)? }),
        Command::Query {
            expr,
            cursor,
            limit,
        } => to_json(ops::query(
            &data,
            expr,
            Page {
                cursor: *cursor,
                limit: *limit,
            },
        )?),
        Command::Describe { oids } => {
            to_json(ops::describe(&data, &ops::parse_oids(&oids.join(","))?)?)
        }
        Command::Implications => to_json(hierarchy::implication_report(&data)?),
        Command::SuggestRules => json!({ "rules": hierarchy::suggest_rules(&data)? }),
        Command::Summarize { attr } => {
            json!({ "attribute": attr, "groups": hierarchy::summarize(&data, attr)? })
        }
        Command::Hierarchy => to_json(hierarchy::build_hierarchy(&data)?),
        Command::Classes => json!({ "classes": ops::classes(&data)? }),
        Command::Constrain {
            constraints,
            dry_run,
        } => {
            let check = ops::validate(&data, constraints)?;
            if !check.valid {
                return Err(Error::ForbiddenConstraints(check.violations));
            }
            if *dry_run {
                to_json(check)
            } else {
                let report = ops::constrain(&mut store, constraints)?;
                if let Some(p) = &cli.file {
                    document::save(store.data(), p)?;
                }
                to_json(report)
            }
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(store, SocketAddr::new(*host, *port)))?;
            return Ok(());
        }
    };
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&v).expect("json value serializes"),
        Format::Table => render(&v),
    };
    writeln!(out, "{}", text.trim_end())?;
    Ok(())
}

fn to_json(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

// ---- table rendering ----

fn is_ratio(m: &serde_json::Map<String, Value>) -> bool {
    m.len() == 2 && m.contains_key("exact") && m.contains_key("value")
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Array(xs) => xs.iter().map(cell).collect::<Vec<_>>().join(" "),
        Value::Object(m) if is_ratio(m) => cell(&m["exact"]),
        Value::Object(m) => m
            .iter()
            .map(|(k, v)| format!("{k}={}", cell(v)))
            .collect::<Vec<_>>()
            .join(" "),
        other => other.to_string(),
    }
}

fn simple(v: &Value) -> bool {
    match v {
        Value::Array(xs) => xs.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(m) => is_ratio(m),
        _ => true,
    }
}

fn grid(rows: &[Value]) -> String {
    let mut cols: Vec<&str> = vec![];
    for r in rows {
        if let Value::Object(m) = r {
            for k in m.keys() {
                if !cols.contains(&k.as_str()) {
                    cols.push(k);
                }
            }
        }
    }
    if cols.is_empty() {
        return rows.iter().map(|r| cell(r) + "\n").collect();
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            cols.iter()
                .map(|c| r.get(*c).map(cell).unwrap_or_default())
                .collect()
        })
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(i, c)| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([c.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<String>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s + "\n"
    };
    let mut s = line(cols.iter().map(|c| c.to_string()).collect());
    s += &line(widths.iter().map(|w| "-".repeat(*w)).collect());
    for r in body {
        s += &line(r);
    }
    s
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}

/// Human-readable rendering of a report value.
pub fn render(v: &Value) -> String {
    match v {
        Value::Object(m) if !is_ratio(m) => {
            let width = m
                .iter()
                .filter(|(_, x)| simple(x))
                .map(|(k, _)| k.len())
                .max()
                .unwrap_or(0);
            let mut s = String::new();
            for (k, x) in m {
                if simple(x) {
                    s += format!("{k:<width$}  {}", cell(x)).trim_end();
                    s.push('\n');
                } else if x.as_array().is_some_and(|a| a.is_empty()) {
                    s += &format!("{k}: (none)\n");
                } else {
                    s += &format!("{k}:\n{}", indent(&render(x)));
                }
            }
            s
        }
        Value::Array(rows) => grid(rows),
        other => cell(other) + "\n",
    }
}
