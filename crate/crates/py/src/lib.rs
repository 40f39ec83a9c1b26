//! Python bindings: gamestate deltas, the training objective pieces,
//! clustering, PCA and the staged pipeline.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use player_form::analytics;
use player_form::dataset;
use player_form::gamestate::{self, Bases, Count};
use player_form::ingest::Role;
use player_form::model;
use player_form::pipeline::{self, RunConfig};
use player_form::stats::{self, StatSpec};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, get_all, eq, skip_from_py_object, name = "GameState")]
#[derive(Clone, PartialEq)]
struct PyGameState {
    balls: u8,
    strikes: u8,
    /// Bit 0 first base, bit 1 second, bit 2 third.
    bases: u8,
    outs: u8,
    batting_score: u32,
    fielding_score: u32,
}

#[pymethods]
impl PyGameState {
    #[new]
    #[pyo3(signature = (balls=0, strikes=0, bases=0, outs=0, batting_score=0, fielding_score=0))]
    fn new(balls: u8, strikes: u8, bases: u8, outs: u8, batting_score: u32, fielding_score: u32) -> Self {
        PyGameState {
            balls,
            strikes,
            bases,
            outs,
            batting_score,
            fielding_score,
        }
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("GameState({})", self.inner()?))
    }
}

impl PyGameState {
    fn inner(&self) -> PyResult<gamestate::GameState> {
        let bases = Bases::from_bits(self.bases).ok_or_else(|| err(format!("bad bases bitmask {}", self.bases)))?;
        Ok(gamestate::GameState::new(
            Count::new(self.balls, self.strikes),
            bases,
            self.outs,
            self.batting_score,
            self.fielding_score,
        ))
    }

    fn from_inner(s: gamestate::GameState) -> Self {
        PyGameState {
            balls: s.count.balls,
            strikes: s.count.strikes,
            bases: s.bases.bits(),
            outs: s.outs,
            batting_score: s.batting_score,
            fielding_score: s.fielding_score,
        }
    }
}

#[pyclass(frozen, get_all, eq, skip_from_py_object, name = "Delta")]
#[derive(Clone, PartialEq)]
struct PyDelta {
    balls_after: u8,
    strikes_after: u8,
    bases_after: u8,
    outs_gained: u8,
    runs_scored: u8,
}

#[pymethods]
impl PyDelta {
    fn __str__(&self) -> PyResult<String> {
        Ok(self.inner()?.to_string())
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("Delta({})", self.inner()?))
    }

    fn ends_at_bat(&self) -> bool {
        self.balls_after == 0 && self.strikes_after == 0
    }
}

impl PyDelta {
    fn inner(&self) -> PyResult<gamestate::GamestateDelta> {
        let bases = Bases::from_bits(self.bases_after).ok_or_else(|| err("bad bases bitmask"))?;
        Ok(gamestate::GamestateDelta::new(
            Count::new(self.balls_after, self.strikes_after),
            bases,
            self.outs_gained,
            self.runs_scored,
        ))
    }

    fn from_inner(d: gamestate::GamestateDelta) -> Self {
        PyDelta {
            balls_after: d.count_after.balls,
            strikes_after: d.count_after.strikes,
            bases_after: d.bases_after.bits(),
            outs_gained: d.outs_gained,
            runs_scored: d.runs_scored,
        }
    }
}

#[pyfunction]
fn compute_delta(before: &PyGameState, after: &PyGameState, atbat_ended: bool) -> PyResult<PyDelta> {
    let d = gamestate::compute_delta(&before.inner()?, &after.inner()?, atbat_ended).map_err(err)?;
    Ok(PyDelta::from_inner(d))
}

#[pyfunction]
fn apply_delta(state: &PyGameState, delta: &PyDelta) -> PyResult<PyGameState> {
    let s = gamestate::apply_delta(&state.inner()?, &delta.inner()?).map_err(err)?;
    Ok(PyGameState::from_inner(s))
}

/// Token strings of the delta vocabulary, indexed by id.
#[pyfunction]
fn vocabulary() -> Vec<String> {
    gamestate::enumerate_legal_deltas().tokens()
}

#[pyfunction]
fn token_id(delta: &PyDelta) -> PyResult<Option<u32>> {
    Ok(gamestate::enumerate_legal_deltas().id(&delta.inner()?))
}

/// Contrastive loss of `z` with the default (2k, 2k+1) pairing.
#[pyfunction]
fn contrastive_loss(z: Vec<Vec<f64>>, tau: f64) -> PyResult<f64> {
    let p = dataset::pairing(z.len());
    Ok(model::contrastive_loss(&z, &p, tau).map_err(err)?.0)
}

#[pyfunction]
fn lr_schedule(step: u64, warmup: u64, base_lr: f64) -> f64 {
    model::lr_schedule(step, warmup, base_lr)
}

/// Ward merges as `(a, b, cost, size)` tuples; merged clusters get ids
/// `n + step`.
#[pyfunction]
fn ward_linkage(x: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize, f64, usize)>> {
    let d = analytics::ward_linkage(&x).map_err(err)?;
    Ok(d.merges.iter().map(|m| (m.a, m.b, m.cost, m.size)).collect())
}

#[pyfunction]
fn ward_cluster(x: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<usize>> {
    Ok(analytics::ward_cluster(&x, k).map_err(err)?.1)
}

/// `(ari, nmi)` of two labelings.
#[pyfunction]
fn agreement(a: Vec<usize>, b: Vec<usize>) -> PyResult<(f64, f64)> {
    if a.len() != b.len() {
        return Err(err("labelings differ in length"));
    }
    let g = analytics::agreement(&a, &b);
    Ok((g.ari, g.nmi))
}

/// `(mean, components, explained_variance)`.
#[pyfunction]
fn pca_fit(rows: Vec<Vec<f64>>, k: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let m = stats::pca_fit(&rows, k).map_err(err)?;
    Ok((m.mean, m.components, m.explained_variance))
}

#[pyfunction]
fn stat_feature_count(preset: &str) -> PyResult<usize> {
    match preset {
        "desk" => Ok(StatSpec::desk().total_len()),
        "paper" => Ok(StatSpec::paper().total_len()),
        _ => Err(err(format!("unknown preset {preset}"))),
    }
}

/// Run every pipeline stage into `out`; returns `(stage, status)` pairs.
#[pyfunction]
#[pyo3(signature = (out, seed=7, games=240, role="batter", k=16, steps=None))]
fn run_pipeline(
    py: Python<'_>,
    out: PathBuf,
    seed: u64,
    games: usize,
    role: &str,
    k: usize,
    steps: Option<usize>,
) -> PyResult<Vec<(String, String)>> {
    let mut rc = RunConfig::new(&out);
    rc.seed = seed;
    rc.games = games;
    rc.role = Role::parse(role).ok_or_else(|| err(format!("unknown role {role}")))?;
    rc.k = k;
    rc.steps = steps;
    let done = py.detach(|| pipeline::cmd_pipeline(&rc)).map_err(|e| err(format!("{e:#}")))?;
    Ok(done
        .into_iter()
        .map(|(s, st)| {
            let status = match st {
                pipeline::StageStatus::Ran => "ran",
                pipeline::StageStatus::UpToDate => "up to date",
            };
            (s.command().to_string(), status.to_string())
        })
        .collect())
}

#[pymodule]
fn player_form_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameState>()?;
    m.add_class::<PyDelta>()?;
    m.add_function(wrap_pyfunction!(compute_delta, m)?)?;
    m.add_function(wrap_pyfunction!(apply_delta, m)?)?;
    m.add_function(wrap_pyfunction!(vocabulary, m)?)?;
    m.add_function(wrap_pyfunction!(token_id, m)?)?;
    m.add_function(wrap_pyfunction!(contrastive_loss, m)?)?;
    m.add_function(wrap_pyfunction!(lr_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(ward_linkage, m)?)?;
    m.add_function(wrap_pyfunction!(ward_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(agreement, m)?)?;
    m.add_function(wrap_pyfunction!(pca_fit, m)?)?;
    m.add_function(wrap_pyfunction!(stat_feature_count, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
