//! `socnav render`: static top-down SVG of a map and one trajectory log,
//! with the agent path graded by time and encounter intervals highlighted
//! per class.

use crate::config::{require, write_atomic, CliError};
use crate::io::{load_grid, load_log};
use clap::Args;
use serde::{Deserialize, Serialize};
use socnav_core::encounters::{analyze_log, Encounter, EncounterClass, EncounterParams};
use socnav_core::simcore::TrajectoryLog;
use socnav_core::world::{Cell, OccupancyGrid, Point};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RenderOpts {
    /// Map file (text occupancy grid).
    #[arg(long)]
    pub map: Option<String>,
    /// Trajectory log; omit for a map-only image.
    #[arg(long)]
    pub log: Option<String>,
    /// Output SVG path.
    #[arg(long)]
    pub out: Option<String>,
    /// Encounter protocol thresholds; config-file key only.
    #[arg(skip)]
    pub encounter: Option<EncounterParams>,
}

const SCALE: f64 = 100.0; // pixels per meter

fn class_color(class: EncounterClass) -> &'static str {
    match class {
        EncounterClass::FrontalApproach => "#e41a1c",
        EncounterClass::BlindCorner => "#984ea3",
        EncounterClass::Intersection => "#ff7f00",
        EncounterClass::PersonFollowing => "#4daf4a",
        EncounterClass::Other => "#999999",
    }
}

/// Linear blue-to-red grade over [0, 1].
fn time_color(frac: f64) -> String {
    let lerp = |a: f64, b: f64| (a + (b - a) * frac).round() as u8;
    format!("rgb({},{},{})", lerp(30.0, 220.0), lerp(80.0, 50.0), lerp(220.0, 40.0))
}

struct Canvas {
    svg: String,
    height_px: f64,
}

impl Canvas {
    fn x(&self, p: Point) -> f64 {
        p.x * SCALE
    }

    fn y(&self, p: Point) -> f64 {
        self.height_px - p.y * SCALE
    }

    fn polyline(&mut self, points: &[Point], style: &str) {
        let coords: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", self.x(*p), self.y(*p)))
            .collect();
        let _ = writeln!(self.svg, "<polyline points=\"{}\" fill=\"none\" {style}/>", coords.join(" "));
    }

    fn circle(&mut self, p: Point, r: f64, style: &str) {
        let _ = writeln!(
            self.svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" {style}/>",
            self.x(p),
            self.y(p)
        );
    }
}

fn render_svg(grid: &OccupancyGrid, log: Option<&TrajectoryLog>, encounters: &[Encounter]) -> String {
    let res = grid.resolution();
    let width_px = grid.width() as f64 * res * SCALE;
    let height_px = grid.height() as f64 * res * SCALE;
    let mut canvas = Canvas {
        svg: format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width_px:.0}\" height=\"{height_px:.0}\" viewBox=\"0 0 {width_px:.0} {height_px:.0}\">\n"
        ),
        height_px,
    };
    let _ = writeln!(
        canvas.svg,
        "<rect width=\"{width_px:.0}\" height=\"{height_px:.0}\" fill=\"white\"/>"
    );

    // obstacles, one rect per occupied cell
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            if grid.occupied(Cell::new(c, r)) {
                let _ = writeln!(
                    canvas.svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#333333\"/>",
                    c as f64 * res * SCALE,
                    height_px - (r + 1) as f64 * res * SCALE,
                    res * SCALE,
                    res * SCALE
                );
            }
        }
    }

    let Some(log) = log else {
        canvas.svg.push_str("</svg>\n");
        return canvas.svg;
    };

    let agent: Vec<Point> = log.records.iter().map(|rec| rec.agent.position()).collect();
    let n_peds = log.records[0].pedestrians.len();

    // pedestrian paths: dashed gray polylines plus one dot per pose
    for ped in 0..n_peds {
        let path: Vec<Point> = log
            .records
            .iter()
            .map(|rec| rec.pedestrians[ped].position())
            .collect();
        canvas.polyline(
            &path,
            "stroke=\"#888888\" stroke-width=\"2\" stroke-dasharray=\"6,4\"",
        );
        for p in &path {
            canvas.circle(*p, 1.5, "fill=\"#888888\" class=\"ped-pose\"");
        }
    }

    // encounter intervals: wide translucent overlays in the class color
    for enc in encounters {
        let span: Vec<Point> = agent[enc.t1 as usize..=enc.t2 as usize].to_vec();
        canvas.polyline(
            &span,
            &format!(
                "stroke=\"{}\" stroke-width=\"10\" stroke-opacity=\"0.35\" class=\"encounter\"",
                class_color(enc.class)
            ),
        );
    }

    // agent path: per-step segments graded from blue (start) to red (end)
    let t_end = (agent.len() - 1).max(1) as f64;
    for (i, pair) in agent.windows(2).enumerate() {
        canvas.polyline(
            &[pair[0], pair[1]],
            &format!("stroke=\"{}\" stroke-width=\"3\"", time_color(i as f64 / t_end)),
        );
    }
    for p in &agent {
        canvas.circle(*p, 1.5, "fill=\"#1e50dc\" class=\"agent-pose\"");
    }

    // goal marker
    let goal = log.episode.goal;
    canvas.circle(goal, 8.0, "fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"3\"");
    canvas.circle(goal, 2.0, "fill=\"#2ca02c\"");

    // legend for the classes present
    let mut seen: Vec<EncounterClass> = Vec::new();
    for enc in encounters {
        if !seen.contains(&enc.class) {
            seen.push(enc.class);
        }
    }
    seen.sort();
    for (i, class) in seen.iter().enumerate() {
        let _ = writeln!(
            canvas.svg,
            "<text x=\"8\" y=\"{:.0}\" font-size=\"14\" fill=\"{}\">{class}</text>",
            18 + 18 * i,
            class_color(*class)
        );
    }

    canvas.svg.push_str("</svg>\n");
    canvas.svg
}

pub fn run(opts: RenderOpts) -> Result<(), CliError> {
    let grid = load_grid(Path::new(&require(opts.map.clone(), "map")?))?;
    let out = require(opts.out.clone(), "out")?;
    let params = opts.encounter.unwrap_or_default();

    let (log, encounters) = match &opts.log {
        Some(path) => {
            let log = load_log(Path::new(path))?;
            let encounters = analyze_log(&log, &grid, params);
            (Some(log), encounters)
        }
        None => (None, Vec::new()),
    };

    let mut svg = render_svg(&grid, log.as_ref(), &encounters);
    // make the output self-describing; the output path itself does not
    // affect the image, so leave it out to keep renders byte-stable
    let mut described = serde_json::to_value(&opts).expect("options serialize");
    described.as_object_mut().unwrap().remove("out");
    let desc = format!("<desc>{described}</desc>\n");
    let insert_at = svg.find('\n').map_or(0, |i| i + 1);
    svg.insert_str(insert_at, &desc);

    write_atomic(Path::new(&out), &svg)?;
    println!("wrote {out}");
    Ok(())
}
