//! Instance file format: one JSON object per line, streamable in step order.
//!
//! The first line is a header with the populations, the stability reward,
//! and the horizon length; each following line holds one step's restriction
//! lists and values. Output is canonical (UTF-8, keys sorted, integer
//! values only, entities with empty lists and zero values omitted), so a
//! saved horizon round-trips byte-identically.
//!
//! ```text
//! {"delta":2,"entities":["e1","e2"],"m":2,"n":2,"players":["p1","p2"],"tau":1}
//! {"allowed":{"e1":["p1","p2"],"e2":["p1"]},"t":1,"values":{"e1":{"p1":3},"e2":{"p1":1}}}
//! ```

use std::collections::BTreeMap;

use serde_json::{Map, Value as Json, json};
use thiserror::Error;

use crate::model::{EntityId, Horizon, Instance, ModelError, PlayerId, TimeStep, Value};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown {kind} name {name:?}")]
    UnknownName {
        line: usize,
        kind: &'static str,
        name: String,
    },
    #[error("expected {expected} step lines, found {found}")]
    StepCountMismatch { expected: usize, found: usize },
    #[error("file is empty; expected a header line")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn mj(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        message: message.into(),
    }
}

/// Serializes a horizon to the canonical line format.
pub fn save_horizon(horizon: &Horizon) -> String {
    let mut out = String::new();
    let header = json!({
        "n": horizon.player_count(),
        "m": horizon.entity_count(),
        "tau": horizon.tau(),
        "delta": horizon.delta(),
        "players": horizon.player_names(),
        "entities": horizon.entity_names(),
    });
    out.push_str(&header.to_string());
    out.push('\n');
    for inst in horizon.instances() {
        let mut allowed = Map::new();
        let mut values = Map::new();
        for e in horizon.entity_ids() {
            let players: Vec<Json> = inst
                .allowed_players(e)
                .map(|p| Json::String(horizon.player_names()[p.0 as usize].clone()))
                .collect();
            if players.is_empty() {
                continue;
            }
            let ename = horizon.entity_names()[e.0 as usize].clone();
            allowed.insert(ename.clone(), Json::Array(players));
            let mut vmap = Map::new();
            for p in inst.allowed_players(e) {
                let v = inst.value(e, p);
                if v > 0 {
                    vmap.insert(
                        horizon.player_names()[p.0 as usize].clone(),
                        Json::from(v),
                    );
                }
            }
            if !vmap.is_empty() {
                values.insert(ename, Json::Object(vmap));
            }
        }
        let step = json!({
            "t": inst.t(),
            "allowed": Json::Object(allowed),
            "values": Json::Object(values),
        });
        out.push_str(&step.to_string());
        out.push('\n');
    }
    out
}

fn get_u64(obj: &Map<String, Json>, key: &str, line: usize) -> Result<u64, FormatError> {
    obj.get(key)
        .and_then(Json::as_u64)
        .ok_or_else(|| mj(line, format!("missing or non-integer field {key:?}")))
}

fn get_names(obj: &Map<String, Json>, key: &str, line: usize) -> Result<Vec<String>, FormatError> {
    let arr = obj
        .get(key)
        .and_then(Json::as_array)
        .ok_or_else(|| mj(line, format!("missing or non-array field {key:?}")))?;
    arr.iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| mj(line, format!("non-string entry in {key:?}")))
        })
        .collect()
}

/// Parses a horizon from the line format, validating names, step numbering,
/// and value placement.
pub fn load_horizon(text: &str) -> Result<Horizon, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header_line) = lines.next().ok_or(FormatError::Empty)?;
    let header: Json =
        serde_json::from_str(header_line).map_err(|e| mj(1, e.to_string()))?;
    let header = header
        .as_object()
        .ok_or_else(|| mj(1, "header is not an object"))?;
    let n = get_u64(header, "n", 1)? as usize;
    let m = get_u64(header, "m", 1)? as usize;
    let tau = get_u64(header, "tau", 1)? as usize;
    let delta = get_u64(header, "delta", 1)?;
    let players = get_names(header, "players", 1)?;
    let entities = get_names(header, "entities", 1)?;
    if players.len() != n {
        return Err(mj(1, format!("n = {n} but {} player names", players.len())));
    }
    if entities.len() != m {
        return Err(mj(1, format!("m = {m} but {} entity names", entities.len())));
    }
    let player_ids: BTreeMap<&str, PlayerId> = players
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), PlayerId(i as u32)))
        .collect();
    let entity_ids: BTreeMap<&str, EntityId> = entities
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), EntityId(i as u32)))
        .collect();

    let mut instances = Vec::with_capacity(tau);
    let mut found = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        found += 1;
        if found > tau {
            return Err(FormatError::StepCountMismatch {
                expected: tau,
                found,
            });
        }
        let step: Json = serde_json::from_str(line).map_err(|e| mj(lineno, e.to_string()))?;
        let step = step
            .as_object()
            .ok_or_else(|| mj(lineno, "step is not an object"))?;
        let t = get_u64(step, "t", lineno)? as TimeStep;
        if t as usize != found {
            return Err(mj(lineno, format!("t = {t}, expected {found}")));
        }
        let mut allowed = BTreeMap::new();
        let allowed_obj = step
            .get("allowed")
            .and_then(Json::as_object)
            .ok_or_else(|| mj(lineno, "missing or non-object field \"allowed\""))?;
        for (ename, parr) in allowed_obj {
            let &e = entity_ids.get(ename.as_str()).ok_or_else(|| {
                FormatError::UnknownName {
                    line: lineno,
                    kind: "entity",
                    name: ename.clone(),
                }
            })?;
            let parr = parr
                .as_array()
                .ok_or_else(|| mj(lineno, format!("allowed[{ename:?}] is not an array")))?;
            let mut set = std::collections::BTreeSet::new();
            for pv in parr {
                let pname = pv
                    .as_str()
                    .ok_or_else(|| mj(lineno, format!("non-string player in allowed[{ename:?}]")))?;
                let &p = player_ids.get(pname).ok_or_else(|| FormatError::UnknownName {
                    line: lineno,
                    kind: "player",
                    name: pname.to_string(),
                })?;
                set.insert(p);
            }
            allowed.insert(e, set);
        }
        let mut values: BTreeMap<(EntityId, PlayerId), Value> = BTreeMap::new();
        let values_obj = step
            .get("values")
            .and_then(Json::as_object)
            .ok_or_else(|| mj(lineno, "missing or non-object field \"values\""))?;
        for (ename, vmap) in values_obj {
            let &e = entity_ids.get(ename.as_str()).ok_or_else(|| {
                FormatError::UnknownName {
                    line: lineno,
                    kind: "entity",
                    name: ename.clone(),
                }
            })?;
            let vmap = vmap
                .as_object()
                .ok_or_else(|| mj(lineno, format!("values[{ename:?}] is not an object")))?;
            for (pname, vv) in vmap {
                let &p = player_ids.get(pname.as_str()).ok_or_else(|| {
                    FormatError::UnknownName {
                        line: lineno,
                        kind: "player",
                        name: pname.clone(),
                    }
                })?;
                let v = vv.as_u64().ok_or_else(|| {
                    mj(
                        lineno,
                        format!("values[{ename:?}][{pname:?}] is not a non-negative integer"),
                    )
                })?;
                values.insert((e, p), v);
            }
        }
        instances.push(Instance::from_parts(t, allowed, values)?);
    }
    if found != tau {
        return Err(FormatError::StepCountMismatch {
            expected: tau,
            found,
        });
    }
    Ok(Horizon::new(players, entities, delta, instances)?)
}
