"""JSON encoding of fitted models.

Floats are written by `json` with ``repr``, which round-trips exactly.
"""
import json
from typing import TextIO

import numpy as np

from arslack.ar import ArModel
from arslack.ars import ArsModel, ExtArsModel
from arslack.errors import SeriesFormatError
from arslack.optimizer import OptimResult
from arslack.regression import FitDiagnostics
from arslack.series import CompletedSeries, ObservedSeries

Model = ArModel | ArsModel | ExtArsModel


def _matrix(values) -> list[list[float]]:
    return np.asarray(values, dtype=float).tolist()


def model_to_dict(model: Model) -> dict:
    if isinstance(model, ArModel):
        return {
            "type": "ar",
            "p": model.order,
            "r": model.r,
            "h": model.step,
            "coeffs": _matrix(np.hstack(list(model.coeffs))),
            "intercept": None if model.intercept is None else _matrix(model.intercept),
            "residual_sum": model.residual_sum,
            "ridge": model.ridge,
        }

    observed = model.series.observed
    return {
        "type": "ars_int" if isinstance(model, ExtArsModel) else "ars",
        "r": model.r,
        "s_tilde": model.s_tilde,
        "h": model.step,
        "E" if isinstance(model, ExtArsModel) else "B": _matrix(model.B),
        "slack": _matrix(model.slack),
        "observed": _matrix(observed.states),
        "start_index": observed.start_index,
        "final_loss": model.final_loss,
        "ridge": model.ridge,
        "seed": model.seed,
        "converged": model.optim.converged,
        "iterations": model.optim.iterations,
        "restart_index": model.optim.restart_index,
        "message": model.optim.message,
        "condition_hint": model.diagnostics.condition_hint,
        "ridge_used": model.diagnostics.ridge_used,
        "underdetermined": model.diagnostics.underdetermined,
    }


def model_from_dict(data: dict) -> Model:
    try:
        kind = data["type"]

        if kind == "ar":
            p, r = data["p"], data["r"]
            coeffs = np.asarray(data["coeffs"], dtype=float).reshape(r, p * r)
            intercept = data.get("intercept")
            return ArModel(
                coeffs=np.stack([coeffs[:, k * r:(k + 1) * r] for k in range(p)]),
                step=data["h"],
                intercept=None if intercept is None else np.asarray(intercept, dtype=float),
                residual_sum=data.get("residual_sum", 0.0),
                ridge=data.get("ridge", 0.0),
            )

        if kind not in ("ars", "ars_int"):
            raise SeriesFormatError(f"unknown model type {kind!r}")

        r, s_tilde = data["r"], data["s_tilde"]
        observed = ObservedSeries(np.asarray(data["observed"], dtype=float).reshape(-1, r),
                                  step=data["h"],
                                  start_index=data.get("start_index", 0))
        slack = np.asarray(data["slack"], dtype=float).reshape(len(observed), s_tilde)
        optim = OptimResult(
            argmin=slack.ravel(),
            loss=data["final_loss"],
            iterations=data.get("iterations", 0),
            converged=data.get("converged", True),
            restart_index=data.get("restart_index", 0),
            message=data.get("message", ""),
        )
        diagnostics = FitDiagnostics(
            residual_sum=data["final_loss"],
            condition_hint=data.get("condition_hint", 0.0),
            ridge_used=data.get("ridge_used", data.get("ridge", 0.0)),
            underdetermined=data.get("underdetermined", False),
        )
        model_cls = ExtArsModel if kind == "ars_int" else ArsModel

        return model_cls(
            B=np.asarray(data["E" if kind == "ars_int" else "B"], dtype=float),
            series=CompletedSeries(observed, slack),
            final_loss=data["final_loss"],
            diagnostics=diagnostics,
            optim=optim,
            ridge=data.get("ridge", 0.0),
            seed=data.get("seed", 0),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SeriesFormatError(f"malformed model: {e}")


def dump_model(model: Model, fp: TextIO) -> None:
    json.dump(model_to_dict(model), fp, indent=1)
    fp.write("\n")


def load_model(fp: TextIO) -> Model:
    try:
        data = json.load(fp)
    except json.JSONDecodeError as e:
        raise SeriesFormatError(e.msg, line=e.lineno)

    return model_from_dict(data)
