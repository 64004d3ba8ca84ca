//! Scenario files: a swept base noise `Q`, per-Bob multipliers and the CAD
//! masks to evaluate.
//!
//! ```toml
//! [scenario]
//! name = "three-bobs-one-bad"
//! links = [3.0, 1.0, 1.0]   # Bob i sees noise links[i]·Q; p = len(links)
//! qx = "Q"                  # or a fixed number in [0, 0.5]
//!
//! [grid]
//! start = 0.0
//! stop = 0.16
//! step = 0.002
//!
//! [masks]
//! list = ["000", "100", "110", "111", "best"]
//!
//! [validate]                # optional
//! q = [0.05, 0.1]
//! ```
//!
//! Masks are bit strings with Bob 1 leftmost; `"best"` asks for the
//! optimal mask at every grid point. Grid points are `start + k·step` up
//! to `stop`, rounded to 12 decimals, and every scaled noise
//! `links[i]·Q` must stay below 0.5.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Result, ScadError};
use crate::keyrate::CadMask;
use crate::noise::NoiseScenario;

pub const BEST_TOKEN: &str = "best";
const GRID_ROUND: f64 = 1e12;
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QxRule {
    /// `Q_X` follows the swept base noise.
    EqualToQ,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskChoice {
    Mask(CadMask),
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| ((self.start + k as f64 * self.step) * GRID_ROUND).round() / GRID_ROUND)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub links: Vec<f64>,
    pub qx: QxRule,
    pub grid: Grid,
    pub masks: Vec<MaskChoice>,
    pub validate_points: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    scenario: Spanned<RawScenario>,
    grid: Spanned<RawGrid>,
    masks: Spanned<RawMasks>,
    validate: Option<RawValidate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Spanned<String>,
    links: Spanned<Vec<Spanned<f64>>>,
    #[serde(default)]
    parties: Option<Spanned<usize>>,
    qx: Spanned<RawQx>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawQx {
    Value(f64),
    Rule(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    start: Spanned<f64>,
    stop: Spanned<f64>,
    step: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMasks {
    list: Spanned<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    q: Spanned<Vec<Spanned<f64>>>,
}

pub(crate) struct Diag<'a> {
    pub(crate) path: &'a Path,
    pub(crate) text: &'a str,
}

impl Diag<'_> {
    pub(crate) fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    pub(crate) fn err(&self, span: Range<usize>, msg: impl Into<String>) -> ScadError {
        ScadError::Config {
            path: self.path.to_path_buf(),
            line: self.line(span),
            msg: msg.into(),
        }
    }
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ScadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Parses scenario text; `path` only labels diagnostics.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let diag = Diag { path, text };
        let raw: RawSpec = toml::from_str(text).map_err(|e| ScadError::Config {
            path: PathBuf::from(path),
            line: e.span().map_or(0, |s| diag.line(s)),
            msg: e.message().trim().to_string(),
        })?;

        let sc = raw.scenario.get_ref();
        let name = sc.name.get_ref().trim().to_string();
        if name.is_empty() {
            return Err(diag.err(sc.name.span(), "scenario name is empty"));
        }
        let links: Vec<f64> = sc.links.get_ref().iter().map(|m| *m.get_ref()).collect();
        if !(2..=crate::bits::MAX_PARTIES).contains(&links.len()) {
            return Err(diag.err(
                sc.links.span(),
                format!(
                    "need between 2 and 16 link multipliers, got {}",
                    links.len()
                ),
            ));
        }
        for m in sc.links.get_ref() {
            if !(*m.get_ref() > 0.0 && m.get_ref().is_finite()) {
                return Err(diag.err(
                    m.span(),
                    format!("multiplier {} must be positive", m.get_ref()),
                ));
            }
        }
        if let Some(p) = &sc.parties {
            if *p.get_ref() != links.len() {
                return Err(diag.err(
                    p.span(),
                    format!(
                        "parties = {} but {} link multipliers given",
                        p.get_ref(),
                        links.len()
                    ),
                ));
            }
        }
        let qx = match sc.qx.get_ref() {
            RawQx::Rule(s) if s == "Q" => QxRule::EqualToQ,
            RawQx::Rule(s) => {
                return Err(diag.err(
                    sc.qx.span(),
                    format!("qx must be \"Q\" or a number, got {s:?}"),
                ))
            }
            RawQx::Value(v) if (0.0..=0.5).contains(v) => QxRule::Fixed(*v),
            RawQx::Value(v) => {
                return Err(diag.err(sc.qx.span(), format!("qx = {v} outside [0, 0.5]")))
            }
        };

        let g = raw.grid.get_ref();
        let grid = Grid {
            start: *g.start.get_ref(),
            stop: *g.stop.get_ref(),
            step: *g.step.get_ref(),
        };
        if !(grid.start >= 0.0 && grid.start.is_finite()) {
            return Err(diag.err(g.start.span(), "grid start must be >= 0"));
        }
        if !(grid.step > 0.0 && grid.step.is_finite()) {
            return Err(diag.err(g.step.span(), "grid step must be positive"));
        }
        if !(grid.stop >= grid.start && grid.stop.is_finite()) {
            return Err(diag.err(g.stop.span(), "grid stop is below start; grid is empty"));
        }
        if (grid.stop - grid.start) / grid.step > MAX_GRID_POINTS as f64 {
            return Err(diag.err(
                g.step.span(),
                format!("grid has more than {MAX_GRID_POINTS} points"),
            ));
        }
        let worst = links.iter().fold(0.0f64, |a, &m| a.max(m));
        let top = *grid.points().last().expect("nonempty grid");
        if worst * top >= 0.5 {
            return Err(diag.err(
                g.stop.span(),
                format!(
                    "largest link noise {worst}·{top} = {} is not below 0.5",
                    worst * top
                ),
            ));
        }

        let list = raw.masks.get_ref().list.get_ref();
        if list.is_empty() {
            return Err(diag.err(raw.masks.get_ref().list.span(), "mask list is empty"));
        }
        let mut masks = Vec::with_capacity(list.len());
        for m in list {
            let s = m.get_ref().trim();
            let choice = if s == BEST_TOKEN {
                MaskChoice::Best
            } else {
                MaskChoice::Mask(CadMask::parse(s, links.len()).map_err(|_| {
                    diag.err(
                        m.span(),
                        format!("mask {s:?} is not a {}-bit string or \"best\"", links.len()),
                    )
                })?)
            };
            if masks.contains(&choice) {
                return Err(diag.err(m.span(), format!("mask {s:?} listed twice")));
            }
            masks.push(choice);
        }

        let validate_points = match &raw.validate {
            None => None,
            Some(v) => {
                let mut pts = Vec::new();
                for q in v.q.get_ref() {
                    let x = *q.get_ref();
                    if !(x >= 0.0 && worst * x < 0.5) {
                        return Err(diag.err(
                            q.span(),
                            format!("validation point {x} gives link noise outside [0, 0.5)"),
                        ));
                    }
                    pts.push(x);
                }
                if pts.is_empty() {
                    return Err(diag.err(v.q.span(), "validation point list is empty"));
                }
                Some(pts)
            }
        };

        Ok(Self {
            name,
            links,
            qx,
            grid,
            masks,
            validate_points,
        })
    }

    pub fn parties(&self) -> usize {
        self.links.len()
    }

    /// Explicit masks in ascending order.
    pub fn explicit_masks(&self) -> Vec<CadMask> {
        let mut out: Vec<CadMask> = self
            .masks
            .iter()
            .filter_map(|m| match m {
                MaskChoice::Mask(c) => Some(*c),
                MaskChoice::Best => None,
            })
            .collect();
        out.sort();
        out
    }

    pub fn wants_best(&self) -> bool {
        self.masks.contains(&MaskChoice::Best)
    }

    pub fn scenario_at(&self, q: f64) -> Result<NoiseScenario> {
        let qx = match self.qx {
            QxRule::EqualToQ => q,
            QxRule::Fixed(v) => v,
        };
        NoiseScenario::new(self.links.iter().map(|m| m * q).collect(), qx)
    }

    /// Points checked by validation: the `[validate]` list, or the grid
    /// midpoint and stop.
    pub fn validation_points(&self) -> Vec<f64> {
        self.validate_points.clone().unwrap_or_else(|| {
            let pts = self.grid.points();
            let mut v = vec![pts[pts.len() / 2], pts[pts.len() - 1]];
            v.dedup();
            v
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[scenario]
name = "demo"
links = [3.0, 1.0, 1]
qx = "Q"

[grid]
start = 0.0
stop = 0.1
step = 0.01

[masks]
list = ["111", "100", "best"]
"#;

    fn parse(s: &str) -> Result<ScenarioSpec> {
        ScenarioSpec::parse(s, Path::new("demo.toml"))
    }

    fn line_of(e: ScadError) -> usize {
        match e {
            ScadError::Config { line, .. } => line,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn parses_and_derives() {
        let s = parse(GOOD).unwrap();
        assert_eq!(s.parties(), 3);
        assert_eq!(s.qx, QxRule::EqualToQ);
        assert!(s.wants_best());
        let m: Vec<String> = s.explicit_masks().iter().map(|m| m.to_string()).collect();
        assert_eq!(m, ["100", "111"]);
        let pts = s.grid.points();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[3], 0.03);
        assert_eq!(pts[10], 0.1);
        let sc = s.scenario_at(0.1).unwrap();
        assert!((sc.link_noise()[0] - 0.3).abs() < 1e-15);
        assert_eq!(sc.qx(), 0.1);
        assert_eq!(s.validation_points(), vec![0.05, 0.1]);
    }

    #[test]
    fn fixed_qx_and_validate_section() {
        let text = GOOD.replace("qx = \"Q\"", "qx = 0.02") + "\n[validate]\nq = [0.05]\n";
        let s = parse(&text).unwrap();
        assert_eq!(s.qx, QxRule::Fixed(0.02));
        assert_eq!(s.scenario_at(0.05).unwrap().qx(), 0.02);
        assert_eq!(s.validation_points(), vec![0.05]);
    }

    #[test]
    fn errors_point_at_the_offending_line() {
        let cases = [
            (
                GOOD.replace(r#"list = ["111", "100", "best"]"#, "list = []"),
                13,
            ),
            (GOOD.replace(r#""100""#, r#""10""#), 13),
            (GOOD.replace("stop = 0.1", "stop = 0.2"), 9),
            (GOOD.replace("step = 0.01", "step = 0"), 10),
            (
                GOOD.replace("links = [3.0, 1.0, 1]", "links = [3.0, -1.0, 1]"),
                4,
            ),
            (GOOD.replace("qx = \"Q\"", "qx = \"X\""), 5),
            (
                GOOD.replace("name = \"demo\"", "name = \"demo\"\ncolour = 1"),
                4,
            ),
            (GOOD.replace("[grid]", "[grid\n"), 7),
        ];
        for (text, line) in cases {
            let e = parse(&text).unwrap_err();
            let shown = e.to_string();
            assert!(shown.starts_with("demo.toml:"), "{shown}");
            assert_eq!(line_of(e), line, "{shown}");
        }
    }

    #[test]
    fn stop_below_start_and_duplicates() {
        assert!(parse(&GOOD.replace("start = 0.0", "start = 0.2")).is_err());
        assert!(parse(&GOOD.replace(r#""100""#, r#""111""#)).is_err());
        assert!(parse(&GOOD.replace("links = [3.0, 1.0, 1]", "links = [1.0]")).is_err());
        let e = parse(&GOOD.replace("qx = \"Q\"", "qx = \"Q\"\nparties = 2")).unwrap_err();
        assert_eq!(line_of(e), 6);
    }
}
