"""File formats: small CSVs for node-indexed arrays, JSON for everything
structured. Writers are byte-stable (sorted keys, shortest-roundtrip float
text) so identical runs produce identical files.
"""

import csv
import hashlib
import json

import numpy as np

from .estimation import NetModelEstimate
from .graphs import BetaParams, Graph, SbmParams
from .partial import ArdMatrix, SubgraphSample


def _sanitize(obj):
    """JSON-encodable copy: numpy scalars/arrays unwrapped, non-finite
    floats replaced by null."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def dump_json(payload, path):
    text = json.dumps(_sanitize(payload), indent=2, sort_keys=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def config_hash(config):
    """sha256 of the canonical JSON encoding of a config mapping."""
    text = json.dumps(_sanitize(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV formats


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        return header, list(reader)


def write_graph_csv(path, g):
    src, dst = g.edges()
    rows = list(zip(src.tolist(), dst.tolist()))
    _write_rows(path, ("src", "dst"), rows)


def read_graph_csv(path, n=None):
    """Edge list with 0-based ids. ``n`` must be given when trailing nodes
    are isolated (the file cannot witness them)."""
    header, rows = _read_rows(path)
    if header[:2] != ["src", "dst"]:
        raise ValueError(f"{path}: expected header src,dst")
    src = np.array([int(r[0]) for r in rows], dtype=np.int64)
    dst = np.array([int(r[1]) for r in rows], dtype=np.int64)
    if n is None:
        n = int(max(src.max(), dst.max())) + 1 if src.size else 0
    return Graph.from_edges(n, src, dst)


def _write_node_table(path, prefix, matrix, integer):
    matrix = np.asarray(matrix)
    header = ["node"] + [f"{prefix}{t + 1}" for t in range(matrix.shape[1])]
    fmt = (lambda v: int(v)) if integer else (lambda v: repr(float(v)))
    rows = [[i] + [fmt(v) for v in row] for i, row in enumerate(matrix)]
    _write_rows(path, header, rows)


def _read_node_table(path, dtype):
    header, rows = _read_rows(path)
    if header[0] != "node":
        raise ValueError(f"{path}: expected a node column first")
    order = np.argsort([int(r[0]) for r in rows])
    data = np.array([[r[c] for c in range(1, len(header))] for r in rows], dtype=dtype)
    return data[order]


def write_traits_csv(path, traits):
    _write_node_table(path, "trait_", traits, integer=True)


def read_traits_csv(path):
    return _read_node_table(path, np.int64)


def write_ard_csv(path, ard):
    _write_node_table(path, "X_", ard.counts, integer=True)


def read_ard_csv(path, traits):
    return ArdMatrix(_read_node_table(path, np.int64), traits)


def write_covariates_csv(path, covariates):
    _write_node_table(path, "x", covariates, integer=False)


def read_covariates_csv(path):
    return _read_node_table(path, np.float64)


def write_column_csv(path, name, values, integer=False):
    """Single node-indexed column, e.g. outcomes or an assignment."""
    _write_node_table(path, name, np.asarray(values).reshape(-1, 1), integer=integer)


def read_column_csv(path, integer=False):
    return _read_node_table(path, np.int64 if integer else np.float64)[:, 0]


# ---------------------------------------------------------------------------
# JSON formats


def write_sbm_json(path, params):
    dump_json(
        {
            "K": params.n_blocks,
            "P": params.probs,
            "memberships": params.memberships,
        },
        path,
    )


def read_sbm_json(path):
    d = load_json(path)
    params = SbmParams(np.asarray(d["P"], dtype=np.float64), np.asarray(d["memberships"]))
    if params.n_blocks != int(d["K"]):
        raise ValueError(f"{path}: K does not match the shape of P")
    return params


def write_subsample_json(path, sample):
    payload = {
        "kind": sample.kind,
        "n": sample.n,
        "nodes": sample.nodes,
        "edges": sample.edges,
        "boundary": sample.boundary,
    }
    if sample.propensities is not None:
        payload["propensities"] = sample.propensities
    dump_json(payload, path)


def read_subsample_json(path, propensity_fn=None):
    d = load_json(path)
    prop = d.get("propensities")
    return SubgraphSample(
        d["kind"],
        int(d["n"]),
        np.asarray(d["nodes"], dtype=np.int64),
        np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2),
        np.asarray(d["boundary"], dtype=np.int64).reshape(-1, 2),
        None if prop is None else np.asarray(prop, dtype=np.float64),
        propensity_fn,
    )


def estimate_payload(est):
    if est.kind == "sbm":
        payload = {
            "kind": "sbm",
            "K": est.n_blocks,
            "P": est.probs,
            "memberships": est.memberships,
        }
        if est.trait_rates is not None:
            payload["trait_rates"] = est.trait_rates
    else:
        payload = {"kind": "beta", "nu": est.nu}
    payload["diagnostics"] = est.diagnostics
    return payload


def write_estimate_json(path, est):
    dump_json(estimate_payload(est), path)


def read_estimate_json(path):
    d = load_json(path)
    if d["kind"] == "sbm":
        rates = d.get("trait_rates")
        return NetModelEstimate(
            "sbm",
            probs=np.asarray(d["P"], dtype=np.float64),
            memberships=np.asarray(d["memberships"], dtype=np.int64),
            diagnostics=d.get("diagnostics", {}),
            trait_rates=None if rates is None else np.asarray(rates, dtype=np.float64),
        )
    if d["kind"] == "beta":
        return NetModelEstimate(
            "beta",
            nu=np.asarray(d["nu"], dtype=np.float64),
            diagnostics=d.get("diagnostics", {}),
        )
    raise ValueError(f"{path}: unknown model kind {d['kind']!r}")


def write_fit_json(path, fit):
    dump_json(
        {
            "beta": fit.beta,
            "cov": fit.cov,
            "working_cov": fit.working_cov,
            "link": fit.link,
            "diagnostics": fit.diagnostics,
        },
        path,
    )


def write_gate_json(path, gate):
    dump_json({"estimate": gate.estimate, "se": gate.se, "method": gate.method}, path)


# ---------------------------------------------------------------------------
# result tables


def write_result_table(path, records, config, extra_meta=None):
    """Long-format results plus a JSON sidecar tying them to the config.

    Every row implicitly carries the sidecar's config hash; the hash is
    also embedded as a comment line so the CSV is self-identifying.
    """
    digest = config_hash(config)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_sha256={digest}\n")
        writer = csv.writer(fh)
        writer.writerow(("replication", "method", "metric", "value"))
        for rec in records:
            value = float(rec["value"])
            writer.writerow(
                (
                    int(rec["replication"]),
                    rec["method"],
                    rec["metric"],
                    repr(value) if np.isfinite(value) else "nan",
                )
            )
    meta = {"config_sha256": digest, "config": config, "n_records": len(records)}
    if extra_meta:
        meta.update(extra_meta)
    dump_json(meta, str(path) + ".meta.json")
    return digest


def read_result_table(path):
    """Records plus the embedded config hash (None for a bare CSV)."""
    digest = None
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("# config_sha256="):
            digest = first.strip().split("=", 1)[1]
        else:
            fh.seek(0)
        reader = csv.DictReader(fh)
        records = [
            {
                "replication": int(r["replication"]),
                "method": r["method"],
                "metric": r["metric"],
                "value": float(r["value"]),
            }
            for r in reader
        ]
    return records, digest
