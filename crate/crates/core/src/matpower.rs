//! MATPOWER case files: the `mpc.bus` and `mpc.branch` blocks only, and the
//! branch-weighted Laplacian of the in-service network.
//!
//! Columns read (1-based, as in the MATPOWER case format):
//! - bus: 1 `bus_i`, 2 `type`
//! - branch: 1 `fbus`, 2 `tbus`, 3 `r`, 4 `x`, 11 `status`
//!
//! Everything else in the file is ignored, including any unit conversion
//! code that follows the data blocks.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::network::{laplacian_from_graph, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Pq,
    Pv,
    Slack,
    Isolated,
}

impl BusType {
    pub fn code(self) -> u8 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Slack => 3,
            BusType::Isolated => 4,
        }
    }

    fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Slack),
            4 => Some(BusType::Isolated),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusRecord {
    pub id: i64,
    pub bus_type: BusType,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRecord {
    pub from: i64,
    pub to: i64,
    pub r: f64,
    pub x: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCase {
    pub name: String,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
}

impl PowerCase {
    pub fn slack_buses(&self) -> Vec<i64> {
        self.buses
            .iter()
            .filter(|b| b.bus_type == BusType::Slack)
            .map(|b| b.id)
            .collect()
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = &BranchRecord> {
        self.branches.iter().filter(|b| b.in_service)
    }

    /// Serializes back to a minimal case file; parsing the result yields
    /// the same records.
    pub fn to_case_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "function mpc = {}", self.name);
        let _ = writeln!(s, "mpc.bus = [");
        for b in &self.buses {
            let _ = writeln!(s, "\t{}\t{};", b.id, b.bus_type.code());
        }
        let _ = writeln!(s, "];");
        let _ = writeln!(s, "mpc.branch = [");
        for br in &self.branches {
            let _ = writeln!(
                s,
                "\t{}\t{}\t{:?}\t{:?}\t0\t0\t0\t0\t0\t0\t{};",
                br.from,
                br.to,
                br.r,
                br.x,
                u8::from(br.in_service)
            );
        }
        let _ = writeln!(s, "];");
        s
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Returns the text after `[` if `line` opens the block `mpc.<name>`.
fn block_opening<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix("mpc.")?;
    let rest = rest.strip_prefix(name)?;
    let rest = rest.trim_start().strip_prefix('=')?;
    rest.trim_start().strip_prefix('[')
}

struct Block {
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_row_tokens(segment: &str, line: usize) -> Result<Vec<f64>> {
    segment
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("unexpected token `{t}` inside a numeric block"),
            })
        })
        .collect()
}

fn read_blocks(text: &str) -> Result<(Option<String>, HashMap<&'static str, Block>)> {
    let mut name = None;
    let mut blocks: HashMap<&'static str, Block> = HashMap::new();
    let mut current: Option<(&'static str, Block)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        if let Some((_, block)) = current.as_mut() {
            let (body, closed) = match line.find(']') {
                Some(i) => (&line[..i], true),
                None => (line, false),
            };
            for segment in body.split(';') {
                let row = parse_row_tokens(segment, line_no)?;
                if !row.is_empty() {
                    block.rows.push((line_no, row));
                }
            }
            if closed {
                let (key, block) = current.take().expect("open block");
                blocks.insert(key, block);
            }
            continue;
        }
        let trimmed = line.trim();
        if name.is_none() {
            if let Some(rest) = trimmed.strip_prefix("function") {
                if let Some((_, n)) = rest.split_once('=') {
                    name = Some(n.trim().to_string());
                }
            }
        }
        for key in ["bus", "branch"] {
            if let Some(rest) = block_opening(trimmed, key) {
                let mut block = Block { rows: Vec::new() };
                let (body, closed) = match rest.find(']') {
                    Some(i) => (&rest[..i], true),
                    None => (rest, false),
                };
                for segment in body.split(';') {
                    let row = parse_row_tokens(segment, line_no)?;
                    if !row.is_empty() {
                        block.rows.push((line_no, row));
                    }
                }
                if closed {
                    blocks.insert(key, block);
                } else {
                    current = Some((key, block));
                }
            }
        }
    }
    if let Some((key, _)) = current {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("block `mpc.{key}` is not terminated by `];`"),
        });
    }
    Ok((name, blocks))
}

fn integer(v: f64, line: usize, what: &str) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{what} must be an integer, got {v}"),
        });
    }
    Ok(v as i64)
}

pub fn parse_case(text: &str) -> Result<PowerCase> {
    let (name, mut blocks) = read_blocks(text)?;
    let bus_block = blocks
        .remove("bus")
        .ok_or_else(|| Error::MissingSection("mpc.bus".into()))?;
    let branch_block = blocks
        .remove("branch")
        .ok_or_else(|| Error::MissingSection("mpc.branch".into()))?;

    let mut buses = Vec::with_capacity(bus_block.rows.len());
    let mut seen = HashMap::new();
    for (line, row) in bus_block.rows {
        if row.len() < 2 {
            return Err(Error::Parse {
                line,
                message: format!("bus row needs at least 2 columns, found {}", row.len()),
            });
        }
        let id = integer(row[0], line, "bus id")?;
        let code = integer(row[1], line, "bus type")?;
        let bus_type = BusType::from_code(code).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown bus type {code}"),
        })?;
        if seen.insert(id, line).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate bus id {id}"),
            });
        }
        buses.push(BusRecord { id, bus_type });
    }

    let mut branches = Vec::with_capacity(branch_block.rows.len());
    for (line, row) in branch_block.rows {
        if row.len() < 11 {
            return Err(Error::Parse {
                line,
                message: format!("branch row needs at least 11 columns, found {}", row.len()),
            });
        }
        let from = integer(row[0], line, "from bus")?;
        let to = integer(row[1], line, "to bus")?;
        for bus in [from, to] {
            if !seen.contains_key(&bus) {
                return Err(Error::UnknownBus { line, bus });
            }
        }
        if from == to {
            return Err(Error::InvalidBranch {
                from,
                to,
                reason: format!("self loop on line {line}"),
            });
        }
        let status = integer(row[10], line, "branch status")?;
        if status != 0 && status != 1 {
            return Err(Error::Parse {
                line,
                message: format!("branch status must be 0 or 1, got {status}"),
            });
        }
        branches.push(BranchRecord {
            from,
            to,
            r: row[2],
            x: row[3],
            in_service: status == 1,
        });
    }

    Ok(PowerCase {
        name: name.unwrap_or_else(|| "case".to_string()),
        buses,
        branches,
    })
}

pub fn read_case(path: &std::path::Path) -> Result<PowerCase> {
    parse_case(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// `1/|x|`, the DC power-flow susceptance.
    #[default]
    Dc,
    /// `|x|/(r² + x²)`, the magnitude of the series susceptance.
    MagnitudeY,
}

impl WeightMode {
    pub fn weight(self, r: f64, x: f64) -> f64 {
        match self {
            WeightMode::Dc => 1.0 / x.abs(),
            WeightMode::MagnitudeY => x.abs() / (r * r + x * x),
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dc" => Ok(WeightMode::Dc),
            "magnitude_y" | "magnitude-y" => Ok(WeightMode::MagnitudeY),
            _ => Err(Error::param("weight_mode", format!("expected dc or magnitude_y, got `{s}`"))),
        }
    }
}

/// Full Laplacian of a case.
#[derive(Debug, Clone)]
pub struct CaseLaplacian {
    pub laplacian: SymmetricMatrix,
    /// Row/column of the ground bus.
    pub slack_index: usize,
    /// Original bus id of each row, ascending.
    pub bus_ids: Vec<i64>,
}

/// Builds the Laplacian of the in-service network. Buses are indexed in
/// ascending id order. The ground bus is `slack_override` when given,
/// otherwise the unique slack bus of the case.
pub fn case_laplacian(case: &PowerCase, mode: WeightMode, slack_override: Option<i64>) -> Result<CaseLaplacian> {
    let ids: BTreeMap<i64, usize> = {
        let mut sorted: Vec<i64> = case.buses.iter().map(|b| b.id).collect();
        sorted.sort_unstable();
        sorted.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let slack = match slack_override {
        Some(id) => {
            if !ids.contains_key(&id) {
                return Err(Error::param("slack", format!("bus {id} is not in the case")));
            }
            id
        }
        None => match case.slack_buses().as_slice() {
            [one] => *one,
            [] => return Err(Error::InvalidInput("case has no slack bus; give one explicitly".into())),
            many => {
                return Err(Error::InvalidInput(format!(
                    "case has {} slack buses {many:?}; give one explicitly",
                    many.len()
                )))
            }
        },
    };

    let mut edges = Vec::new();
    for br in case.in_service_branches() {
        if br.x == 0.0 || !br.x.is_finite() || !br.r.is_finite() {
            return Err(Error::InvalidBranch {
                from: br.from,
                to: br.to,
                reason: format!("in-service branch needs finite nonzero x (r = {}, x = {})", br.r, br.x),
            });
        }
        edges.push((ids[&br.from], ids[&br.to], mode.weight(br.r, br.x)));
    }

    let components = components(ids.len(), &edges);
    if components.len() > 1 {
        let bus_ids: Vec<i64> = ids.keys().copied().collect();
        return Err(Error::Disconnected {
            components: components
                .into_iter()
                .map(|c| c.into_iter().map(|i| bus_ids[i]).collect())
                .collect(),
        });
    }

    let graph = WeightedGraph::new(ids.len(), edges)?;
    Ok(CaseLaplacian {
        laplacian: laplacian_from_graph(&graph),
        slack_index: ids[&slack],
        bus_ids: ids.keys().copied().collect(),
    })
}

// union-find over node indices, components listed by smallest member
fn components(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &(a, b, _) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}
