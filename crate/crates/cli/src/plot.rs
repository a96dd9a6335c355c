//! Static SVG comparison plot: posterior means against the observations
//! on top, effective sample size (as % of N) below.

use std::io;
use std::path::Path;

use driftrelax::filter::FilterRecord;
use thiserror::Error;

use crate::bench::ObservationSequence;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("record sequences have different lengths ({generic} vs {mcmc})")]
    MismatchedLengths { generic: usize, mcmc: usize },
    #[error("cannot write plot: {0}")]
    Io(#[from] io::Error),
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 660.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;

const GENERIC_COLOR: &str = "#1f77b4";
const MCMC_COLOR: &str = "#d62728";

struct Panel {
    top: f64,
    bottom: f64,
    y_min: f64,
    y_max: f64,
    x_max: f64,
}

impl Panel {
    fn x(&self, k: f64) -> f64 {
        MARGIN_LEFT + k / self.x_max * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        self.bottom - (v - self.y_min) / (self.y_max - self.y_min) * (self.bottom - self.top)
    }

    fn polyline(&self, points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
        let coords: Vec<String> = points
            .map(|(k, v)| format!("{:.2},{:.2}", self.x(k), self.y(v)))
            .collect();
        format!(
            "    <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    }

    fn frame(&self) -> String {
        format!(
            "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333\"/>\n",
            MARGIN_LEFT,
            self.top,
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            self.bottom - self.top
        )
    }

    fn y_tick(&self, v: f64, label: &str) -> String {
        let y = self.y(v);
        format!(
            "    <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#bbb\" stroke-dasharray=\"3,4\"/>\n    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT,
            MARGIN_LEFT - 6.0,
            y + 4.0
        )
    }

    fn x_tick(&self, k: usize) -> String {
        let x = self.x(k as f64);
        format!(
            "    <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n    <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{k}</text>\n",
            self.bottom,
            self.bottom + 5.0,
            self.bottom + 18.0
        )
    }
}

fn legend_entry(x: f64, y: f64, color: &str, label: &str) -> String {
    format!(
        "    <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{label}</text>\n",
        y - 4.0,
        x + 24.0,
        y - 4.0,
        x + 30.0,
        y
    )
}

/// Renders both panels as a standalone SVG document.
pub fn svg_string(
    generic: &[FilterRecord],
    mcmc: &[FilterRecord],
    observations: &ObservationSequence,
) -> Result<String, PlotError> {
    if generic.len() != mcmc.len() {
        return Err(PlotError::MismatchedLengths {
            generic: generic.len(),
            mcmc: mcmc.len(),
        });
    }
    let n_obs = observations.len().max(generic.len());
    let x_max = n_obs as f64 + 0.5;
    let n_generic = generic.first().map_or(0, |r| r.n_particles);
    let n_mcmc = mcmc.first().map_or(0, |r| r.n_particles);
    let generic_label = format!("generic PF (N={n_generic})");
    let mcmc_label = format!("PF with MCMC step (N={n_mcmc})");

    let mut svg = String::new();
    svg.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Panel 1: posterior means and observation markers.
    let p1 = Panel {
        top: 40.0,
        bottom: 300.0,
        y_min: -2.0,
        y_max: 2.0,
        x_max,
    };
    svg.push_str("  <g id=\"panel-estimates\">\n");
    svg.push_str(&format!(
        "    <text x=\"{MARGIN_LEFT}\" y=\"24\" font-size=\"14\" font-weight=\"bold\">Posterior mean of the state vs observations</text>\n"
    ));
    svg.push_str(&p1.frame());
    for v in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        svg.push_str(&p1.y_tick(v, &format!("{v}")));
    }
    for k in 1..=n_obs {
        svg.push_str(&p1.x_tick(k));
    }
    svg.push_str(&p1.polyline(
        generic.iter().map(|r| (r.k as f64, r.post_mean)),
        GENERIC_COLOR,
    ));
    svg.push_str(&p1.polyline(
        mcmc.iter().map(|r| (r.k as f64, r.post_mean)),
        MCMC_COLOR,
    ));
    for (i, (&t, &z)) in observations
        .times()
        .iter()
        .zip(observations.values())
        .enumerate()
    {
        let _ = i;
        svg.push_str(&format!(
            "    <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
            p1.x(t),
            p1.y(z)
        ));
    }
    svg.push_str(&legend_entry(MARGIN_LEFT + 10.0, 56.0, GENERIC_COLOR, &generic_label));
    svg.push_str(&legend_entry(MARGIN_LEFT + 10.0, 72.0, MCMC_COLOR, &mcmc_label));
    svg.push_str(&format!(
        "    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">observation index k</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        p1.bottom + 34.0
    ));
    svg.push_str("  </g>\n");

    // Panel 2: effective sample size as a percentage of N.
    let p2 = Panel {
        top: 390.0,
        bottom: 610.0,
        y_min: 0.0,
        y_max: 100.0,
        x_max,
    };
    svg.push_str("  <g id=\"panel-ess\">\n");
    svg.push_str(&format!(
        "    <text x=\"{MARGIN_LEFT}\" y=\"374\" font-size=\"14\" font-weight=\"bold\">Effective sample size (% of N)</text>\n"
    ));
    svg.push_str(&p2.frame());
    for v in [0.0, 25.0, 50.0, 75.0, 100.0] {
        svg.push_str(&p2.y_tick(v, &format!("{v}%")));
    }
    for k in 1..=n_obs {
        svg.push_str(&p2.x_tick(k));
    }
    svg.push_str(&p2.polyline(
        generic.iter().map(|r| (r.k as f64, r.ess_pct())),
        GENERIC_COLOR,
    ));
    svg.push_str(&p2.polyline(
        mcmc.iter().map(|r| (r.k as f64, r.ess_pct())),
        MCMC_COLOR,
    ));
    svg.push_str(&legend_entry(MARGIN_LEFT + 10.0, 406.0, GENERIC_COLOR, &generic_label));
    svg.push_str(&legend_entry(MARGIN_LEFT + 10.0, 422.0, MCMC_COLOR, &mcmc_label));
    svg.push_str(&format!(
        "    <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">observation index k</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        p2.bottom + 34.0
    ));
    svg.push_str("  </g>\n");

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes the two-panel comparison plot to `path`.
pub fn emit_plot(
    generic: &[FilterRecord],
    mcmc: &[FilterRecord],
    observations: &ObservationSequence,
    path: &Path,
) -> Result<(), PlotError> {
    let svg = svg_string(generic, mcmc, observations)?;
    std::fs::write(path, svg)?;
    Ok(())
}
