"""Scenario-driven report assembly: certifications gate index emission.

Every index in the report carries an essential-spectrum assumption; a
refuted (or inconclusive) certification withholds the indices it gates
and is listed under "omitted".  Exit dispositions: 0 all requested
quantities emitted, 2 something was withheld.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import essential, indices, operators as ops, transfer, winding
from .exceptions import ChiralwalkError, NotFredholmError
from .walks import ChiralPair

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUTED = 2


def _chiral_report(pair, tol):
    gap_plus = essential.gap_at(pair.u, +1, tol.grid_n, tol.margin)
    gap_minus = essential.gap_at(pair.u, -1, tol.grid_n, tol.margin)
    fred = essential.is_fredholm_type(pair.u, tol.grid_n, tol.margin)
    dicho = essential.dichotomy_check(pair, tol.grid_n, tol.margin)
    report = {
        "chiral_certification": pair.certification.to_dict(),
        "certifications": {
            "gap_plus_one": gap_plus.to_dict(),
            "gap_minus_one": gap_minus.to_dict(),
            "fredholm_type": fred.to_dict(),
            "dichotomy": dicho.to_dict(),
        },
        "indices": {},
        "windings": None,
        "omitted": [],
    }
    one = ops.identity(pair.u.fiber_dim)
    if gap_minus.certified:
        try:
            ker = transfer.exact_kernel(pair.u + one, pair.gamma0, tol.rank_tol)
            report["indices"]["si_minus"] = ker.graded_signature
            report["indices"]["dim_ker_u_plus_one"] = ker.dimension
            report["diagnostics_minus"] = ker.to_dict()
        except ChiralwalkError as exc:  # borderline: certified gap, oracle still refuses
            report["omitted"].append(f"si_minus: {exc}")
    else:
        report["omitted"].append(f"si_minus: gap_at(-1) {gap_minus.status}")
    if gap_plus.certified:
        try:
            ker = transfer.exact_kernel(pair.u - one, pair.gamma0, tol.rank_tol)
            report["indices"]["si_plus"] = ker.graded_signature
            report["indices"]["dim_ker_u_minus_one"] = ker.dimension
            report["diagnostics_plus"] = ker.to_dict()
        except ChiralwalkError as exc:
            report["omitted"].append(f"si_plus: {exc}")
    else:
        report["omitted"].append(f"si_plus: gap_at(+1) {gap_plus.status}")
    have_both = "si_plus" in report["indices"] and "si_minus" in report["indices"]
    if have_both and gap_plus.certified and gap_minus.certified:
        report["indices"]["si_total"] = (
            report["indices"]["si_plus"] + report["indices"]["si_minus"]
        )
        try:
            record = winding.verify_index_theorem(pair, min(tol.grid_n, 2048), tol.rank_tol)
            report["windings"] = record.to_dict()
        except ChiralwalkError as exc:
            report["omitted"].append(f"winding comparison: {exc}")
    else:
        report["omitted"].append("winding comparison: needs both essential gaps")
    code = EXIT_OK if not report["omitted"] else EXIT_REFUTED
    return report, code


def _weighted_shift_report(u_op, tol):
    fred = essential.is_fredholm_type(u_op, tol.grid_n, tol.margin)
    winds = {}
    for side in (ops.LEFT, ops.RIGHT):
        res = winding.winding_det(u_op.symbol_at(side), tol.grid_n)
        winds[side] = res.to_dict()
    theorem = winding.verify_index_theorem_banded(u_op, tol.grid_n, tol.rank_tol)
    report = {
        "certifications": {"fredholm_type": fred.to_dict()},
        "winding": {
            "left": winds[ops.LEFT],
            "right": winds[ops.RIGHT],
            "value": winds[ops.RIGHT]["rounded"],
        },
        "index_theorem": theorem.to_dict(),
    }
    return report, EXIT_OK


def _custom_banded_report(f_op, tol):
    report = {"certifications": {}, "omitted": []}
    zs = ops.circle_grid(min(tol.grid_n, 4096))
    for side in (ops.LEFT, ops.RIGHT):
        dets = np.abs(np.linalg.det(f_op.symbol_at(side)(zs)))
        report["certifications"][f"symbol_invertible_{side}"] = {
            "min_abs_det": float(dets.min()) if dets.size else 0.0,
            "certified": bool(dets.size and dets.min() > tol.margin),
        }
    try:
        record = winding.verify_index_theorem_banded(f_op, tol.grid_n, tol.rank_tol)
    except (NotFredholmError, ChiralwalkError) as exc:
        report["omitted"].append(f"index: {exc}")
        return report, EXIT_REFUTED
    result = transfer.exact_index(f_op, tol.rank_tol)
    report["index"] = result.to_dict()
    report["index_theorem"] = record.to_dict()
    return report, EXIT_OK


def _generator_report(walk, gamma0, tol):
    report = {
        "conventions": {
            "regularized": walk.regularized,
            "eta": walk.eta,
            "walk_exp": walk.convention_exp,
            "walk_neg_exp": walk.convention_neg_exp,
        },
        "certifications": {"finite_dimensional": True},
    }
    idx = indices.full_index_report(walk.walk_exp, gamma0, rank_tol=tol.rank_tol)
    report["indices"] = idx.to_dict()
    report["indices"]["generator_index"] = indices.generator_index(
        walk.hamiltonian, gamma0, tol.rank_tol
    )
    return report, EXIT_OK


def _truncation_diagnostics(u_op, L):
    """Open-boundary compression snapshot; never index-grade, diagnostics only."""
    t = (u_op + ops.identity(u_op.fiber_dim)).truncate(max(L, u_op.band_radius))
    svals = np.linalg.svd(t.matrix, compute_uv=False)
    return {
        "window_halfwidth": t.window_halfwidth,
        "warn_bulk_clipped": bool(t.warn_bulk_clipped),
        "smallest_singular_values_u_plus_one": [float(s) for s in svals[-5:]],
    }


def run_index_report(scenario):
    """Build the model and produce its full report; returns (dict, exit_code)."""
    tol = scenario.tolerances
    model = scenario.build()
    if scenario.model == "split_step":
        body, code = _chiral_report(model, tol)
    elif scenario.model == "weighted_shift":
        body, code = _weighted_shift_report(model, tol)
    elif scenario.model == "custom_banded":
        body, code = _custom_banded_report(model, tol)
    else:
        walk, gamma0 = model
        body, code = _generator_report(walk, gamma0, tol)
    body["model"] = scenario.model
    body["tolerances"] = tol.to_dict()
    if scenario.seed is not None:
        body["seed"] = scenario.seed
    if scenario.truncation_L is not None and scenario.is_lattice():
        u_op = model.u if isinstance(model, ChiralPair) else model
        body["truncation_diagnostics"] = _truncation_diagnostics(u_op, scenario.truncation_L)
    return body, code


def lattice_operator(scenario):
    """The banded operator a lattice scenario ultimately describes."""
    model = scenario.build()
    if isinstance(model, ChiralPair):
        return model.u
    if isinstance(model, tuple):
        raise ChiralwalkError("finite-dimensional scenario has no lattice operator")
    return model


def spectrum_rows(scenario):
    """(side, theta, eigenvalue_re, eigenvalue_im) rows of the symbol spectrum."""
    if not scenario.is_lattice():
        raise ChiralwalkError("spectrum requires a lattice model")
    u_op = lattice_operator(scenario)
    rows = []
    for side, theta, ev in essential.symbol_eigenvalues(u_op, scenario.tolerances.grid_n):
        rows.append((side, theta, ev.real, ev.imag))
    return rows


def winding_report(scenario, side, grid_n=None):
    """The det-symbol winding of a lattice scenario on one side."""
    if not scenario.is_lattice():
        raise ChiralwalkError("winding requires a lattice model")
    u_op = lattice_operator(scenario)
    n = grid_n or scenario.tolerances.grid_n
    try:
        res = winding.winding_det(u_op.symbol_at(side), n)
    except ChiralwalkError as exc:
        return {
            "raw_phase": None,
            "rounded": None,
            "grid_n": n,
            "certified": False,
            "reason": str(exc),
        }, EXIT_REFUTED
    doc = res.to_dict()
    doc["certified"] = True
    doc["side"] = side
    return doc, EXIT_OK


SWEEP_COLUMNS = (
    "gap_plus_status",
    "gap_plus_value",
    "gap_minus_status",
    "gap_minus_value",
    "si_plus",
    "si_minus",
    "winding_left",
    "winding_right",
    "theorem_holds",
    "error",
)


def _sweep_cell(scenario):
    values = dict.fromkeys(SWEEP_COLUMNS, "")
    try:
        report, _ = run_index_report(scenario)
    except ChiralwalkError as exc:
        values["error"] = str(exc)
        return values
    except Exception as exc:  # noqa: BLE001 - a cell must never kill the sweep
        values["error"] = f"{type(exc).__name__}: {exc}"
        return values
    certs = report.get("certifications", {})
    if "gap_plus_one" in certs:
        values["gap_plus_status"] = certs["gap_plus_one"]["status"]
        values["gap_plus_value"] = certs["gap_plus_one"]["value"]
        values["gap_minus_status"] = certs["gap_minus_one"]["status"]
        values["gap_minus_value"] = certs["gap_minus_one"]["value"]
    idx = report.get("indices", {})
    for key in ("si_plus", "si_minus"):
        if key in idx and idx[key] is not None:
            values[key] = idx[key]
    winds = report.get("windings")
    if winds and winds.get("branches"):
        branch = winds["branches"][-1]
        values["winding_left"] = branch["winding_left"]
        values["winding_right"] = branch["winding_right"]
        values["theorem_holds"] = winds["holds"]
    elif "index_theorem" in report:
        branch = report["index_theorem"]["branches"][0]
        values["winding_left"] = branch["winding_left"]
        values["winding_right"] = branch["winding_right"]
        values["theorem_holds"] = report["index_theorem"]["holds"]
    return values


def run_sweep(spec, max_workers=None):
    """Evaluate every grid cell; rows come back in lexicographic axis order."""
    points = list(spec.grid_points())
    scenarios = [spec.scenario_at(p) for p in points]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        cells = list(pool.map(_sweep_cell, scenarios))
    header = [path for path, _ in spec.axes] + list(SWEEP_COLUMNS)
    rows = []
    for point, cell in zip(points, cells):
        row = list(spec.axis_values(point)) + [cell[c] for c in SWEEP_COLUMNS]
        rows.append(row)
    return header, rows
