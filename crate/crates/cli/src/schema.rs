//! JSON Schema of the experiment config, printed by `gabmod schema`.

use serde_json::{json, Value};

fn exponent() -> Value {
    json!({
        "description": "exponent in (0, inf]; infinity is the string \"inf\"",
        "oneOf": [
            { "type": "number", "exclusiveMinimum": 0 },
            { "const": "inf" }
        ]
    })
}

fn uint_list() -> Value {
    json!({ "type": "array", "items": { "type": "integer", "minimum": 1 } })
}

fn signal() -> Value {
    json!({
        "type": "object",
        "required": ["kind"],
        "oneOf": [
            { "properties": { "kind": { "const": "gaussian" }, "width": { "type": "array", "items": { "type": "number" } } } },
            { "properties": { "kind": { "const": "hermite" }, "order": { "type": "array", "items": { "type": "integer", "minimum": 0 } }, "width": { "type": "array", "items": { "type": "number" } } }, "required": ["order"] },
            { "properties": { "kind": { "const": "delta" }, "at": { "type": "array", "items": { "type": "integer", "minimum": 0 } } } },
            { "properties": { "kind": { "const": "random" }, "seed": { "type": "integer", "minimum": 0 } }, "required": ["seed"] },
            { "properties": { "kind": { "const": "block" }, "radius": { "type": "array", "items": { "type": "integer", "minimum": 0 } } }, "required": ["radius"] }
        ]
    })
}

fn weight() -> Value {
    json!({
        "type": "object",
        "required": ["family", "params"],
        "description": "weight {\"family\": ..., \"params\": {...}}; composite families nest weights in their params",
        "oneOf": [
            { "properties": { "family": { "const": "constant" }, "params": { "type": "object", "required": ["c", "dim"] } } },
            { "properties": { "family": { "const": "polynomial" }, "params": { "type": "object", "required": ["s", "dim"] } } },
            { "properties": { "family": { "const": "exponential" }, "params": { "type": "object", "required": ["r", "s", "dim"] } } },
            { "properties": { "family": { "const": "anisotropic" }, "params": { "type": "object", "required": ["factors"] } } },
            { "properties": { "family": { "const": "product" }, "params": { "type": "object", "required": ["left", "right"] } } },
            { "properties": { "family": { "const": "reciprocal" }, "params": { "type": "object", "required": ["inner"] } } },
            { "properties": { "family": { "const": "sum" }, "params": { "type": "object", "required": ["left", "right"] } } }
        ]
    })
}

fn norm_fields() -> Value {
    json!({
        "p": { "type": "array", "items": { "$ref": "#/$defs/exponent" } },
        "sigma": { "description": "collapse order, 1-based axis indices", "type": "array", "items": { "type": "integer", "minimum": 1 } },
        "omega": { "$ref": "#/$defs/weight" }
    })
}

fn with(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn report() -> Value {
    let bound = json!({ "type": "number", "exclusiveMinimum": 0, "default": gabmod::modspace::DEFAULT_SPREAD_BOUND });
    let signals = json!({ "type": "integer", "minimum": 1 });
    let sig = json!({ "$ref": "#/$defs/signal" });
    json!({
        "type": "object",
        "required": ["type", "signals"],
        "oneOf": [
            { "properties": with(norm_fields(), json!({ "type": { "const": "window_independence" }, "signals": signals, "window1": sig, "window2": sig, "bound": bound })),
              "required": ["window1", "window2", "p"] },
            { "properties": { "type": { "const": "embedding" }, "signals": signals, "window": sig,
                "spec1": { "type": "object", "properties": norm_fields(), "required": ["p"] },
                "spec2": { "type": "object", "properties": norm_fields(), "required": ["p"] },
                "tol": { "type": "number", "default": 1e-10 }, "bound": bound },
              "required": ["window", "spec1", "spec2"] },
            { "properties": with(norm_fields(), json!({ "type": { "const": "gabor_equivalence" }, "signals": signals, "window": sig,
                "lattice": { "$ref": "#/$defs/lattice" }, "tight": { "type": "boolean", "default": false }, "bound": bound })),
              "required": ["window", "lattice", "p"] },
            { "properties": with(norm_fields(), json!({ "type": { "const": "wiener_equivalence" }, "signals": signals, "window1": sig, "window2": sig,
                "block": uint_list(), "bound": bound })),
              "required": ["window1", "window2", "block", "p"] },
            { "properties": { "type": { "const": "compact_support" }, "signals": signals, "support_radius": { "type": "integer", "minimum": 0 },
                "window": sig, "q": { "$ref": "#/$defs/exponent" }, "p_list": { "type": "array", "items": { "$ref": "#/$defs/exponent" } },
                "omega": { "$ref": "#/$defs/weight" }, "bound": bound },
              "required": ["support_radius", "window", "q", "p_list"] },
            { "properties": { "type": { "const": "local_bound" }, "signals": signals, "width": { "type": "array", "items": { "type": "number" } },
                "p": { "$ref": "#/$defs/exponent" }, "radius": { "type": "number", "exclusiveMinimum": 0 },
                "centers": { "type": "integer", "minimum": 1, "default": 16 }, "bound": bound },
              "required": ["p", "radius"] }
        ]
    })
}

fn experiment() -> Value {
    let common = json!({
        "grid": {
            "type": "object",
            "required": ["n"],
            "properties": {
                "n": uint_list(),
                "step": { "type": "array", "items": { "type": "number", "exclusiveMinimum": 0 }, "description": "defaults to 1 per axis" }
            }
        },
        "seed": { "type": "integer", "minimum": 0, "description": "required whenever the experiment draws random data; TOOL_SEED overrides it" },
        "output": { "type": "string", "description": "file name prefix inside --out; defaults to <index>-<kind>" },
        "format": { "enum": ["csv", "json", "both"], "default": "json" },
        "plot": { "type": "boolean", "default": false, "description": "SVG heatmap of log10|V|; norm and gabor-dual with d = 1 only" }
    });
    let sig = json!({ "$ref": "#/$defs/signal" });
    json!({
        "type": "object",
        "required": ["kind"],
        "properties": with(common, json!({ "kind": { "enum": crate::config::KINDS } })),
        "oneOf": [
            { "properties": with(norm_fields(), json!({
                "kind": { "const": "norm" },
                "measure": { "enum": ["modulation", "amalgam", "fourier_lebesgue", "lebesgue"] },
                "signal": sig, "window": sig,
                "q": { "$ref": "#/$defs/exponent" }, "amalgam_p": { "$ref": "#/$defs/exponent" },
                "x_anchor": { "type": "array", "items": { "type": "number" } } })),
              "required": ["grid", "measure", "signal"] },
            { "properties": {
                "kind": { "const": "gabor-dual" }, "window": sig, "lattice": { "$ref": "#/$defs/lattice" },
                "tol": { "type": "number", "default": 1e-12 }, "max_iter": { "type": "integer", "default": 2000 },
                "probes": { "type": "integer", "minimum": 0, "default": 20 },
                "reconstruction_tol": { "type": "number", "default": 1e-9 } },
              "required": ["grid", "window", "lattice"] },
            { "properties": {
                "kind": { "const": "conv-sweep" },
                "estimate": { "enum": ["semidiscrete", "dilation", "wiener"] },
                "count": { "type": "integer", "minimum": 0 },
                "domain": { "type": "object", "description": "sampling domain; omitted fields take their defaults" } },
              "required": ["estimate", "count", "seed"] },
            { "properties": { "kind": { "const": "report" }, "report": { "$ref": "#/$defs/report" } },
              "required": ["grid", "report", "seed"] },
            { "properties": { "kind": { "const": "verify-suite" }, "reports": { "type": "array", "minItems": 1, "items": { "$ref": "#/$defs/report" } } },
              "required": ["grid", "reports", "seed"] }
        ]
    })
}

/// The config schema (draft 2020-12).
pub fn config_schema() -> Value {
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "gabmod experiment config",
        "description": "one experiment object or a non-empty list of them",
        "oneOf": [
            { "$ref": "#/$defs/experiment" },
            { "type": "array", "minItems": 1, "items": { "$ref": "#/$defs/experiment" } }
        ],
        "$defs": {
            "exponent": exponent(),
            "signal": signal(),
            "weight": weight(),
            "lattice": {
                "type": "object",
                "required": ["a", "b"],
                "properties": { "a": uint_list(), "b": uint_list() },
                "description": "time and frequency steps per axis; each must divide N"
            },
            "report": report(),
            "experiment": experiment()
        }
    })
}
