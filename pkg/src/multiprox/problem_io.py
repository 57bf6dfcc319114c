"""Problem files, trace files, and the certificate sidecar.

Problem files are JSON documents declaring the kernel structure and the
smooth components (quadratic components as (Q, b, c) triples, affine ones as
(b, c) pairs); only serializable component types are accepted here, while the
library API takes arbitrary callables.

A trace file is a CSV with one row per recorded iteration (columns: m, seed,
solver, k, normalized_gap_percent, objective, step_norm, online_constant)
plus a JSON sidecar holding the certificate report, the SHA-256 hashes of the
trace CSV and the problem file, and a replay block (iterates, multipliers,
curvature vectors) from which the invariant suite can be re-run.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .kernels import MaxKernel, NlpKernel, SeparableKernel, prox_from_dict
from .model import (CompositeProblem, SmoothMap, affine_component,
                    identity_components, quadratic_component)

PSD_TOLERANCE = 1e-8


@dataclass
class ComponentSpec:
    kind: str                      # "quadratic" | "affine"
    Q: np.ndarray | None
    b: np.ndarray
    c: float
    lipschitz: float | None = None

    def build(self):
        if self.kind == "quadratic":
            return quadratic_component(self.Q, self.b, self.c,
                                       lipschitz=self.lipschitz)
        return affine_component(self.b, self.c)

    def to_dict(self) -> dict:
        out = {"type": self.kind, "b": self.b.tolist(), "c": self.c}
        if self.kind == "quadratic":
            out["Q"] = self.Q.tolist()
            if self.lipschitz is not None:
                out["lipschitz"] = self.lipschitz
        return out


@dataclass
class ProblemSpec:
    """Declarative form of a composite problem, round-trippable to JSON."""

    kernel_structure: str          # "max" | "nlp" | "separable"
    kernel_params: dict
    components: list = field(default_factory=list)
    x0: np.ndarray = None
    xbar: np.ndarray | None = None

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemSpec":
        kern = doc.get("kernel")
        if not isinstance(kern, dict) or "structure" not in kern:
            raise ValueError("problem file needs a kernel declaration")
        structure = kern["structure"]
        if structure not in ("max", "nlp", "separable"):
            raise ValueError(f"unknown kernel structure {structure!r}")
        params = {k: v for k, v in kern.items() if k != "structure"}
        comps = [_component_from_dict(c) for c in doc.get("components", [])]
        if not comps:
            raise ValueError("problem file declares no smooth components")
        x0 = doc.get("x0")
        if x0 is None:
            raise ValueError("problem file needs an initial point x0")
        x0 = np.asarray(x0, dtype=float)
        xbar = doc.get("xbar")
        xbar = None if xbar is None else np.asarray(xbar, dtype=float)
        spec = cls(kernel_structure=structure, kernel_params=params,
                   components=comps, x0=x0, xbar=xbar)
        spec.validate()
        return spec

    def validate(self):
        n = self.x0.size
        for i, comp in enumerate(self.components):
            if comp.b.size != n:
                raise ValueError(f"component {i}: b has length {comp.b.size}, "
                                 f"expected {n}")
            if comp.kind == "quadratic":
                Q = comp.Q
                if Q.shape != (n, n):
                    raise ValueError(f"component {i}: Q has shape {Q.shape}")
                if not np.allclose(Q, Q.T, atol=1e-10, rtol=1e-10):
                    raise ValueError(f"component {i}: Q is not symmetric")
                smallest = float(np.linalg.eigvalsh(Q)[0])
                if smallest < -PSD_TOLERANCE:
                    raise ValueError(
                        f"component {i}: Q has eigenvalue {smallest:.3e}; "
                        "not positive semidefinite")
        if self.xbar is not None and self.xbar.size != n:
            raise ValueError("xbar dimension mismatch")

    def to_dict(self) -> dict:
        doc = {
            "kernel": {"structure": self.kernel_structure, **self.kernel_params},
            "components": [c.to_dict() for c in self.components],
            "x0": self.x0.tolist(),
        }
        if self.xbar is not None:
            doc["xbar"] = self.xbar.tolist()
        return doc

    # -- materialization ---------------------------------------------------

    def build(self) -> CompositeProblem:
        comps = [c.build() for c in self.components]
        n = self.x0.size
        if self.kernel_structure == "max":
            return CompositeProblem(SmoothMap(comps), MaxKernel(arity=len(comps)))
        if self.kernel_structure == "nlp":
            prox = prox_from_dict(self.kernel_params.get("prox", {"kind": "zero"}))
            tail = [] if prox.tag == "zero" else identity_components(n)
            smooth = SmoothMap(comps + tail)
            kernel = NlpKernel(n_constraints=len(comps) - 1, prox=prox,
                               tail_dim=len(tail))
            return CompositeProblem(smooth, kernel)
        prox = prox_from_dict(self.kernel_params.get("prox", {"kind": "zero"}))
        smooth = SmoothMap(comps + identity_components(n))
        return CompositeProblem(smooth, SeparableKernel(dim=n, prox=prox))


def _component_from_dict(doc: dict) -> ComponentSpec:
    kind = doc.get("type")
    if kind == "quadratic":
        return ComponentSpec(kind="quadratic",
                             Q=np.asarray(doc["Q"], dtype=float),
                             b=np.asarray(doc["b"], dtype=float),
                             c=float(doc["c"]),
                             lipschitz=doc.get("lipschitz"))
    if kind == "affine":
        return ComponentSpec(kind="affine", Q=None,
                             b=np.asarray(doc["b"], dtype=float),
                             c=float(doc["c"]))
    raise ValueError(f"unknown component type {kind!r}")


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"invalid JSON in {path}: {err}") from err
    return ProblemSpec.from_dict(doc)


def save_problem(path, spec: ProblemSpec) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=1)


def specs_equal(a: ProblemSpec, b: ProblemSpec) -> bool:
    """Field-level equality of two declarative problem forms."""
    if (a.kernel_structure != b.kernel_structure
            or a.kernel_params != b.kernel_params
            or len(a.components) != len(b.components)):
        return False
    if not np.array_equal(a.x0, b.x0):
        return False
    if (a.xbar is None) != (b.xbar is None):
        return False
    if a.xbar is not None and not np.array_equal(a.xbar, b.xbar):
        return False
    for ca, cb in zip(a.components, b.components):
        if ca.kind != cb.kind or ca.c != cb.c:
            return False
        if not np.array_equal(ca.b, cb.b):
            return False
        if ca.kind == "quadratic" and not np.array_equal(ca.Q, cb.Q):
            return False
        if ca.lipschitz != cb.lipschitz:
            return False
    return True


# --------------------------------------------------------------------------
# trace files
# --------------------------------------------------------------------------

TRACE_COLUMNS = ("m", "seed", "solver", "k", "normalized_gap_percent",
                 "objective", "step_norm", "online_constant")


def file_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_trace_csv(path, trace, *, solver: str, m="", seed="",
                    gaps=None) -> None:
    """One row per recorded iteration, schema ``TRACE_COLUMNS``."""
    weights = trace.curvature_weights()
    running = np.maximum.accumulate(weights) if weights.size else np.zeros(0)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for k, obj in enumerate(trace.objectives):
            writer.writerow({
                "m": m, "seed": seed, "solver": solver, "k": k,
                "normalized_gap_percent": "" if gaps is None else repr(float(gaps[k])),
                "objective": repr(float(obj)),
                "step_norm": "" if k == 0 else repr(float(trace.step_norms[k - 1])),
                "online_constant": "" if k == 0 else repr(float(running[min(k - 1, running.size - 1)])),
            })


def read_trace_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {reader.fieldnames}")
        return list(reader)


def write_sidecar(path, *, trace, problem_sha: str, trace_sha: str,
                  report=None, solver: str = "", xstar=None,
                  termination: str = "") -> None:
    doc = {
        "problem_sha256": problem_sha,
        "trace_sha256": trace_sha,
        "solver": solver,
        "termination": termination or trace.termination,
        "certificate_report": None if report is None else report.to_dict(),
        "replay": {
            "iterates": [np.asarray(x).tolist() for x in trace.iterates],
            "objectives": [float(g) for g in trace.objectives],
            "step_norms": [float(s) for s in trace.step_norms],
            "alphas": [np.asarray(a).tolist() for a in trace.alphas],
            "multipliers": [np.asarray(s.multiplier).tolist()
                            for s in trace.subsolutions],
            "xstar": None if xstar is None else np.asarray(xstar).tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def read_sidecar(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
