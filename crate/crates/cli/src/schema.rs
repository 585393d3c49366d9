//! Column registry for every CSV the binary writes; `--schema` dumps it.

use serde_json::{json, Value};

type Columns = &'static [(&'static str, &'static str)];

const TABLES: &[(&str, &str, bool, Columns)] = &[
    (
        "capacity",
        "capacity",
        false,
        &[
            ("shape", "cube, ball or points"),
            ("d", "dimension"),
            ("points", "number of vertices of K"),
            ("capacity", "cap(K), total equilibrium mass"),
            ("residual", "max-norm residual of G_K e = 1"),
            ("g0", "Green function at the origin"),
        ],
    ),
    (
        "equilibrium",
        "capacity",
        true,
        &[
            ("weight", "equilibrium measure e_K(x); preceded by coordinates x0..x{d-1}"),
            ("normalized", "e_K(x) / cap(K)"),
        ],
    ),
    (
        "sample_summary",
        "sample",
        false,
        &[
            ("replica", "replica index"),
            ("trajectories", "number of trajectories hitting the window"),
            ("occupied", "vertices of I^u in the window"),
            ("vacant", "vertices of V^u in the window"),
            ("vacant_fraction", "vacant / window size"),
            ("noisy_vacant", "vertices of V^{u,eps} in the window"),
            ("traversed_edges", "edges of the interlacement graph in the window"),
            ("error_bound", "total-variation bound of the sampling mode (0 when exact)"),
            ("expected_vacant_fraction", "exp(-u / g(0))"),
        ],
    ),
    (
        "sites",
        "sample",
        true,
        &[
            ("occupied", "1 if the vertex is in I^u (replica 0); preceded by coordinates x0..x{d-1}"),
            ("noisy_occupied", "1 if the vertex is occupied after eps-noise"),
        ],
    ),
    (
        "trajectories",
        "sample",
        false,
        &[
            ("replica", "replica index"),
            ("index", "trajectory index within the replica"),
            ("mark", "Poisson mark in (0, u]; the trajectory belongs to I^v iff mark <= v"),
            ("anchor", "window index of the first entrance"),
            ("forward_len", "window vertices visited after the entrance"),
            ("reentries", "number of re-entries into the window"),
            ("backward_len", "window vertices visited before the entrance"),
            ("truncated_forward", "1 if the forward part was killed (truncated mode)"),
            ("truncated_backward", "1 if the backward part was killed (truncated mode)"),
        ],
    ),
    (
        "analysis",
        "analyze",
        false,
        &[
            ("replica", "replica index"),
            ("field", "analyzed field: vacant, occupied or noisy_vacant"),
            ("active", "number of active vertices"),
            ("components", "nearest-neighbor components"),
            ("max_size", "largest component size"),
            ("max_diameter", "largest l-infinity component diameter"),
            ("star_components", "components under *-adjacency"),
            ("crossing", "1 if B(c, L) is joined to the boundary of B(c, 2L)"),
            ("local_uniqueness", "1 if components of diameter >= L/10 in B(c, L) are joined in B(c, 2L)"),
            ("slab_components", "components after restricting to the slab of the given thickness"),
            ("filtered_sites", "active vertices in components of diameter >= the given bound"),
        ],
    ),
    (
        "renorm",
        "renorm-check",
        false,
        &[
            ("metric", "event or derived quantity"),
            ("successes", "replicas where the event holds (empty for derived quantities)"),
            ("replicas", "number of replicas"),
            ("estimate", "empirical frequency or computed value"),
            ("ci_low", "lower Clopper-Pearson bound"),
            ("ci_high", "upper Clopper-Pearson bound"),
        ],
    ),
    (
        "estimate",
        "estimate",
        false,
        &[
            ("parameter", "u_star_eps, u_star_star or u_bar"),
            ("eps", "noise strength"),
            ("size", "largest size L used"),
            ("sizes", "all sizes, separated by ';'"),
            ("value", "point estimate; empty when the estimator failed"),
            ("ci_low", "lower bound of the confidence interval"),
            ("ci_high", "upper bound of the confidence interval"),
            ("target_probability", "probability level defining the proxy"),
            ("replicas", "replicas per size"),
            ("protocol", "definition of the proxy"),
            ("failure", "reason the estimate is missing, else empty"),
        ],
    ),
    (
        "curves",
        "estimate",
        false,
        &[
            ("event", "crossing, connection or uniqueness"),
            ("size", "L"),
            ("eps", "noise strength"),
            ("u", "level"),
            ("successes", "replicas where the event holds"),
            ("replicas", "number of replicas"),
            ("probability", "successes / replicas"),
            ("ci_low", "lower Clopper-Pearson bound"),
            ("ci_high", "upper Clopper-Pearson bound"),
        ],
    ),
    (
        "resistance",
        "resistance",
        false,
        &[
            ("radius", "N"),
            ("median", "median effective resistance from the source to the boundary of B(0, N)"),
            ("lower_quartile", "0.25 quantile"),
            ("upper_quartile", "0.75 quantile"),
            ("infinite_fraction", "fraction of replicas with the source cut off"),
            ("lattice", "resistance of the full lattice ball with unit resistors (when requested)"),
        ],
    ),
    (
        "resistance_replicas",
        "resistance",
        false,
        &[
            ("replica", "replica index"),
            ("radius", "N"),
            ("resistance", "effective resistance; inf when cut off"),
        ],
    ),
];

pub fn columns(table: &str) -> &'static [(&'static str, &'static str)] {
    TABLES
        .iter()
        .find(|t| t.0 == table)
        .map(|t| t.3)
        .unwrap_or_else(|| panic!("no schema for table {table}"))
}

/// JSON description of every table.
pub fn dump() -> Value {
    let tables: Vec<Value> = TABLES
        .iter()
        .map(|(name, command, coords, cols)| {
            json!({
                "file": format!("{name}.csv"),
                "command": command,
                "leading_coordinate_columns": coords,
                "columns": cols.iter().map(|(c, d)| json!({"name": c, "description": d})).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "tables": tables,
        "manifest": "<command>.manifest.json: command, version, generator, seed, threads, config, config_sha256, replica_seeds, outputs, summary, elapsed_seconds",
        "exit_codes": {"0": "success", "2": "validation error", "3": "runtime failure"},
    })
}
