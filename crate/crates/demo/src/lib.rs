//! Browser demo bindings. Three interactive operations are exposed to the
//! page: fit a synthetic 1-D dataset and explore deg/delta, run range
//! queries against the fitted index, and build/query a 2-D COUNT quad tree.
//! All responses are JSON strings; errors come back as `{"error": "..."}`.

mod engine;

use std::cell::RefCell;

use wasm_bindgen::prelude::*;

use engine::{OneDimState, TwoDimState};
use polyfit_core::{AggregateKind, ErrorSpec};

thread_local! {
    static ONE_DIM: RefCell<Option<OneDimState>> = const { RefCell::new(None) };
    static TWO_DIM: RefCell<Option<TwoDimState>> = const { RefCell::new(None) };
}

fn err_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| err_json(&e.to_string()))
}

fn parse_spec(mode: &str, eps: f64) -> Result<ErrorSpec, String> {
    match mode {
        "abs" => Ok(ErrorSpec::Abs(eps)),
        "rel" => Ok(ErrorSpec::Rel(eps)),
        other => Err(format!("unknown mode {other:?}")),
    }
}

/// Generate a synthetic dataset, build the 1-D index, and return the fit for
/// plotting. The built index stays resident for subsequent queries.
#[wasm_bindgen]
pub fn demo_build_1d(kind: &str, n: u32, seed: u32, agg: &str, deg: u32, delta: f64) -> String {
    let agg: AggregateKind = match agg.parse() {
        Ok(a) => a,
        Err(e) => return err_json(&e),
    };
    match engine::build_one_dim(kind, n as usize, seed as u64, agg, deg as usize, delta) {
        Ok((state, view)) => {
            ONE_DIM.with(|slot| *slot.borrow_mut() = Some(state));
            to_json(&view)
        }
        Err(e) => err_json(&e),
    }
}

/// Query the resident 1-D index over `[l, u]`.
#[wasm_bindgen]
pub fn demo_query_1d(l: f64, u: f64, mode: &str, eps: f64) -> String {
    let spec = match parse_spec(mode, eps) {
        Ok(s) => s,
        Err(e) => return err_json(&e),
    };
    ONE_DIM.with(|slot| match slot.borrow().as_ref() {
        None => err_json("no index built yet"),
        Some(state) => match engine::query_one_dim(state, l, u, spec) {
            Ok(view) => to_json(&view),
            Err(e) => err_json(&e),
        },
    })
}

/// Generate clustered 2-D points, build the COUNT quad tree, and return the
/// leaf layout for plotting. The index stays resident for queries.
#[wasm_bindgen]
pub fn demo_build_2d(n: u32, seed: u32, deg: u32, delta: f64) -> String {
    match engine::build_two_dim(n as usize, seed as u64, deg as usize, delta) {
        Ok((state, view)) => {
            TWO_DIM.with(|slot| *slot.borrow_mut() = Some(state));
            to_json(&view)
        }
        Err(e) => err_json(&e),
    }
}

/// COUNT the resident 2-D index over the rectangle `[l1,u1] x [l2,u2]`.
#[wasm_bindgen]
pub fn demo_query_2d(l1: f64, u1: f64, l2: f64, u2: f64, mode: &str, eps: f64) -> String {
    let spec = match parse_spec(mode, eps) {
        Ok(s) => s,
        Err(e) => return err_json(&e),
    };
    TWO_DIM.with(|slot| match slot.borrow().as_ref() {
        None => err_json("no index built yet"),
        Some(state) => match engine::query_two_dim(state, l1, u1, l2, u2, spec) {
            Ok(view) => to_json(&view),
            Err(e) => err_json(&e),
        },
    })
}
