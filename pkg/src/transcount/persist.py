"""Versioned JSON documents for fitted models.

Every real number is written with :meth:`float.hex`, so a save/load cycle
reproduces all parameters bit for bit.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping

import numpy as np

from .baselines import BaselineFit
from .data import ColumnEncoding
from .transition import FittedTransitionModel, TransitionSpec

SCHEMA = "transcount.model/1"


class PersistError(ValueError):
    """Unreadable or incompatible model document."""


def _hex(x) -> str:
    return float(x).hex()


def _unhex(s: str) -> float:
    return float.fromhex(s)


def _hex_array(a) -> Any:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _hex(a)
    return [_hex_array(v) for v in a]


def _unhex_array(obj) -> np.ndarray:
    def conv(o):
        return [conv(v) for v in o] if isinstance(o, list) else _unhex(o)

    return np.array(conv(obj), dtype=float)


def model_to_dict(model) -> dict[str, Any]:
    if not isinstance(model, (FittedTransitionModel, BaselineFit)):
        raise TypeError(f"cannot persist {type(model).__name__}")
    common = {
        "schema": SCHEMA,
        "column_names": list(model.column_names),
        "encoder_meta": [e.to_dict() for e in model.encoder_meta],
        "covariance": _hex_array(model.covariance),
        "loglik": _hex(model.loglik),
        "converged": bool(model.converged),
        "iterations": int(model.iterations),
    }
    if isinstance(model, FittedTransitionModel):
        return {
            **common,
            "kind": model.kind,
            "spec": model.spec.to_dict(),
            "M": model.M,
            "params": _hex_array(model.params),
            "lambda": _hex(model.lambda_used),
            "penalized_loglik": _hex(model.penalized_loglik),
            "separation_flags": [bool(f) for f in model.separation_flags],
            "grad_norm": _hex(model.grad_norm),
            "edf": _hex(model.edf),
            "history": [_hex(v) for v in model.history],
            "notes": list(model.notes),
        }
    return {
        **common,
        "kind": model.kind,
        "beta": _hex_array(model.beta),
        "gamma": None if model.gamma is None else _hex_array(model.gamma),
        "nu": None if model.nu is None else _hex(model.nu),
        "flags": list(model.flags),
        "part_logliks": [_hex(v) for v in model.part_logliks],
    }


def model_from_dict(doc: Mapping[str, Any]):
    if doc.get("schema") != SCHEMA:
        raise PersistError(f"unsupported schema {doc.get('schema')!r}; expected {SCHEMA!r}")
    try:
        meta = tuple(ColumnEncoding.from_dict(e) for e in doc["encoder_meta"])
        common = dict(
            column_names=tuple(doc["column_names"]),
            covariance=_unhex_array(doc["covariance"]),
            loglik=_unhex(doc["loglik"]),
            converged=bool(doc["converged"]),
            iterations=int(doc["iterations"]),
            encoder_meta=meta,
        )
        if doc["kind"].startswith("transition"):
            return FittedTransitionModel(
                spec=TransitionSpec.from_dict(doc["spec"]),
                M=int(doc["M"]),
                params=_unhex_array(doc["params"]),
                penalized_loglik=_unhex(doc["penalized_loglik"]),
                separation_flags=np.array(doc["separation_flags"], dtype=bool),
                grad_norm=_unhex(doc["grad_norm"]),
                edf=_unhex(doc["edf"]),
                history=tuple(_unhex(v) for v in doc["history"]),
                notes=tuple(doc["notes"]),
                **common,
            )
        return BaselineFit(
            kind=doc["kind"],
            beta=_unhex_array(doc["beta"]),
            gamma=None if doc["gamma"] is None else _unhex_array(doc["gamma"]),
            nu=None if doc["nu"] is None else _unhex(doc["nu"]),
            flags=tuple(doc["flags"]),
            part_logliks=tuple(_unhex(v) for v in doc["part_logliks"]),
            **common,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistError(f"malformed model document: {exc}") from exc


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n"


def save(model, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))


def load(path: str | os.PathLike):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PersistError(f"{path}: not a JSON document ({exc})") from exc
    return model_from_dict(doc)
