"""Text serialization for models.

Grammar (one record per line, '#' starts a comment):

    kind: discrete            kind: gaussian
    n: <int>                  n: <int>
    edge: v1 v2 ... ; theta: <real>
                              clique: v1 ... ; J: <k*k reals row-major> ; h: <k reals>

Records may appear in any order after the header. Duplicate edges or
cliques are rejected.
"""

from __future__ import annotations

import numpy as np

from .models import (
    CliqueTerm,
    DiscreteFactorModel,
    GaussianInfoModel,
    Hypergraph,
    ModelError,
)


class ModelFormatError(ModelError):
    """Malformed model text."""


def _split_fields(line: str) -> dict[str, str]:
    fields = {}
    for part in line.split(";"):
        if ":" not in part:
            raise ModelFormatError(f"expected 'key: value' in {part!r}")
        key, _, value = part.partition(":")
        fields[key.strip()] = value.strip()
    return fields


def parse_model_text(text: str):
    kind = None
    n = None
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            fields = _split_fields(line)
            if "kind" in fields:
                kind = fields["kind"]
                if kind not in ("discrete", "gaussian"):
                    raise ModelFormatError(f"unknown kind {kind!r}")
            elif "n" in fields:
                n = int(fields["n"])
            elif "edge" in fields:
                verts = tuple(int(v) for v in fields["edge"].split())
                records.append(("edge", verts, float(fields["theta"])))
            elif "clique" in fields:
                verts = tuple(int(v) for v in fields["clique"].split())
                k = len(verts)
                J = np.array([float(v) for v in fields["J"].split()])
                if J.size != k * k:
                    raise ModelFormatError(
                        f"clique {verts}: J has {J.size} entries, expected {k * k}"
                    )
                h = np.array([float(v) for v in fields["h"].split()])
                if h.size != k:
                    raise ModelFormatError(
                        f"clique {verts}: h has {h.size} entries, expected {k}"
                    )
                records.append(("clique", verts, J.reshape(k, k), h))
            else:
                raise ModelFormatError(f"unrecognized record {line!r}")
        except (ValueError, ModelError) as exc:
            raise ModelFormatError(f"line {lineno}: {exc}") from exc

    if kind is None or n is None:
        raise ModelFormatError("missing 'kind:' or 'n:' header")

    if kind == "discrete":
        coeffs = {}
        for rec in records:
            if rec[0] != "edge":
                raise ModelFormatError("clique record in a discrete model")
            _, verts, theta = rec
            key = tuple(sorted(verts))
            if key in coeffs:
                raise ModelFormatError(f"duplicate edge {key}")
            coeffs[key] = theta
        graph = Hypergraph(n, tuple(coeffs))
        return DiscreteFactorModel(graph, coeffs)

    terms = []
    seen = set()
    for rec in records:
        if rec[0] != "clique":
            raise ModelFormatError("edge record in a gaussian model")
        _, verts, J, h = rec
        key = tuple(sorted(verts))
        if key in seen:
            raise ModelFormatError(f"duplicate clique {key}")
        seen.add(key)
        terms.append(CliqueTerm(verts, J, h))
    return GaussianInfoModel.from_cliques(n, terms)


def model_to_text(model) -> str:
    lines = []
    if isinstance(model, DiscreteFactorModel):
        lines.append("kind: discrete")
        lines.append(f"n: {model.n}")
        for e in sorted(model.coefficients, key=lambda e: (len(e), e)):
            verts = " ".join(str(v) for v in e)
            lines.append(f"edge: {verts} ; theta: {model.coefficients[e]!r}")
    elif isinstance(model, GaussianInfoModel):
        lines.append("kind: gaussian")
        lines.append(f"n: {model.n}")
        for t in sorted(model.clique_terms, key=lambda t: (len(t.vertices), t.vertices)):
            verts = " ".join(str(v) for v in t.vertices)
            js = " ".join(repr(float(v)) for v in t.J.ravel())
            hs = " ".join(repr(float(v)) for v in t.h)
            lines.append(f"clique: {verts} ; J: {js} ; h: {hs}")
    else:
        raise ModelError(f"unsupported model type {type(model)!r}")
    return "\n".join(lines) + "\n"


def read_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_text(fh.read())


def write_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_text(model))
