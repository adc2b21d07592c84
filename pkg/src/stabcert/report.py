"""Merged analysis report: stationarity, case, general and QP certificates.

The report is a plain dict so it can be serialized, validated against the
shipped schema, and compared across runs.
"""
from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from . import qp
from .certificates import CATALOG, CODERIVATIVE_LABEL, FAILS, HOLDS, UNKNOWN, ConditionVerdict, stability_verdict
from .errors import IndeterminateError, MFCQError, NotStationaryError
from .model import DerivativeSnapshot, QpInstance, qp_snapshot
from .stationarity import Case, check_stationarity
from .tolerances import TolerancePolicy, resolve

REPORT_VERSION = 1


def _qp_conditions(instance: QpInstance, s: DerivativeSnapshot, case, policy):
    """Closed-form QP tests for the active case plus the determinant for display."""
    x_bar = s.x_bar
    out: list[ConditionVerdict] = []
    if case.case_tag is Case.INTERIOR:
        det, ok = qp.interior_test(instance.D, policy)
        out.append(ConditionVerdict("qp.interior_det", HOLDS if ok else FAILS))
        return out, {"matrix": "D", "det": det}, (True if ok else False)
    if case.case_tag is Case.BOUNDARY_POSITIVE:
        det, ok = qp.bordered_test_positive_lambda(instance, x_bar, case.lam, policy)
        out.append(ConditionVerdict("qp.bordered_det", HOLDS if ok else FAILS))
        return out, {"matrix": "bordered(D + lam A)", "det": det}, (True if ok else False)
    try:
        triple = qp.zero_lambda_conditions(instance.D, s.grad_x_F, policy)
    except IndeterminateError:
        triple = None
    nec = qp.zero_lambda_necessary_condition(instance.D, s.grad_x_F, policy)
    det = qp.bordered(instance.D, s.grad_x_F).det()
    if triple is not None:
        out += [
            ConditionVerdict("qp.zero_bordered_det", HOLDS if triple.bordered_nonsingular else FAILS),
            ConditionVerdict("qp.zero_no_ascent_direction",
                             HOLDS if triple.no_ascent_direction else FAILS, triple.ascent_witness),
            ConditionVerdict("qp.zero_kernel_orthogonal", HOLDS if triple.kernel_orthogonal else FAILS),
        ]
    out.append(ConditionVerdict("qp.zero_necessary", nec.status, nec.witness, nec.vacuous))
    if triple is not None and triple.all_hold:
        lip = True
    elif nec.holds is False:
        lip = False
    else:
        lip = None
    return out, {"matrix": "bordered(D)", "det": det}, lip


def _lip_label(flag):
    return {True: "yes", False: "no", None: UNKNOWN}[flag]


def analyze_snapshot(s: DerivativeSnapshot, policy: TolerancePolicy | None = None,
                     alpha: float | None = None, instance: QpInstance | None = None) -> dict:
    """Full analysis of a snapshot; raises on non-stationary or MFCQ-violating points."""
    policy = resolve(policy)
    check = check_stationarity(s, policy, alpha)
    if not check.mfcq_ok:
        raise MFCQError("active constraint with zero gradient (MFCQ fails)")
    if not check.is_stationary or check.case is None:
        raise NotStationaryError("x_bar is not a stationary point", check.residual)
    case = check.case
    general = stability_verdict(s, case, policy)
    notes = list(general.notes)
    conditions = list(general.conditions)
    lipschitz = general.lipschitz_like
    qp_block = None
    if instance is not None:
        qp_conds, qp_block, qp_lip = _qp_conditions(instance, s, case, policy)
        conditions += qp_conds
        qp_label = _lip_label(qp_lip)
        qp_block["lipschitz_like"] = qp_label
        qp_block["det_abs"] = abs(qp_block["det"])
        if qp_label != lipschitz:
            if UNKNOWN in (qp_label, lipschitz):
                lipschitz = qp_label if lipschitz == UNKNOWN else lipschitz
            else:
                notes.append("general and closed-form Lipschitz verdicts disagree")
                lipschitz = UNKNOWN
    return {
        "version": REPORT_VERSION,
        "n": s.n,
        "x_bar": s.x_bar.tolist(),
        "stationarity": {
            "residual": check.residual,
            "is_stationary": True,
            "mfcq": True,
        },
        "case": case.case_tag.value,
        "lambda": case.lam,
        "activity_residual": case.activity_residual,
        "conditions": [c.to_dict() for c in conditions],
        "qp": qp_block,
        "verdicts": {
            "lipschitz_like": lipschitz,
            "robinson_stable": general.robinson_stable,
            "strong_regular": general.strong_regular,
            "lipschitz_localization": general.localization,
            "coderivative": CODERIVATIVE_LABEL if lipschitz == "yes" else None,
        },
        "tolerance": {"tol": policy.tol, "feas_tol": policy.feas_tol,
                      "rank_rtol": policy.rank_rtol},
        "notes": notes,
    }


def analyze(instance: QpInstance, x_bar, policy: TolerancePolicy | None = None) -> dict:
    s = qp_snapshot(instance, x_bar)
    report = analyze_snapshot(s, policy, instance.alpha, instance)
    report["d"] = instance.param_dim
    return report


# -- serialization -----------------------------------------------------------

def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        return format(v, ".17g")
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def load_schema() -> dict:
    text = resources.files("stabcert").joinpath("report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def catalog() -> dict:
    return dict(CATALOG)
