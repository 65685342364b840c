"""Plain-text checkpoints of filter states.

Format (version 1)::

    skewar-filter-state v1
    kind skew                 # or gaussian
    x 25                      # field name and shape
    <25 values>
    P 25 25
    <25 lines of 25 values>   # row-major, one matrix row per line
    ...
    nu
    <value>

Fields for ``kind skew``: x, P, DeltaHat, V, Psi, nu. For ``kind gaussian``:
x, P, Psi, nu. An optional final field ``history <rows> <n_z>`` stores the
last measurements (oldest first) so a resumed run rebuilds its regressor.
Values are written with ``repr`` so a round trip is exact. Blank lines and
``#`` comments are ignored when reading.
"""

from __future__ import annotations

import numpy as np

from .baseline import GaussianFilterState
from .errors import ParameterError
from .identifier import FilterState
from .mvniw import MvniwParams

__all__ = ["HEADER", "dumps_state", "loads_state", "loads_checkpoint", "save_state", "load_state",
           "load_checkpoint"]

HEADER = "skewar-filter-state v1"

_FIELDS = {
    "skew": ("x", "P", "DeltaHat", "V", "Psi", "nu"),
    "gaussian": ("x", "P", "Psi", "nu"),
}


def _fmt(v):
    return repr(float(v))


def _emit(lines, name, value):
    a = np.asarray(value, dtype=float)
    lines.append(" ".join([name, *map(str, a.shape)]))
    if a.ndim == 0:
        lines.append(_fmt(a))
    elif a.ndim == 1:
        lines.append(" ".join(map(_fmt, a)))
    else:
        for row in a:
            lines.append(" ".join(map(_fmt, row)))


def dumps_state(state, history=None) -> str:
    if isinstance(state, FilterState):
        kind = "skew"
        values = {"x": state.x, "P": state.P, "DeltaHat": state.noise.DeltaHat, "V": state.noise.V,
                  "Psi": state.noise.Psi, "nu": state.noise.nu}
    elif isinstance(state, GaussianFilterState):
        kind = "gaussian"
        values = {"x": state.x, "P": state.P, "Psi": state.Psi, "nu": state.nu}
    else:
        raise TypeError(f"cannot serialize {type(state).__name__}")
    lines = [HEADER, f"kind {kind}"]
    for name in _FIELDS[kind]:
        _emit(lines, name, values[name])
    if history is not None:
        h = np.asarray(history, dtype=float).reshape(-1, state.n_z)
        _emit(lines, "history", h)
    return "\n".join(lines) + "\n"


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def loads_state(text: str):
    """Inverse of :func:`dumps_state`; validates the result and drops any history."""
    return loads_checkpoint(text)[0]


def loads_checkpoint(text: str):
    """``(state, history)``; ``history`` is None when the snapshot has none."""
    it = iter(_content_lines(text))

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise ParameterError(f"snapshot truncated: expected {what}") from None

    lineno, line = nxt("header")
    if line != HEADER:
        raise ParameterError(f"line {lineno}: unsupported snapshot header {line!r}")
    lineno, line = nxt("kind")
    parts = line.split()
    if len(parts) != 2 or parts[0] != "kind" or parts[1] not in _FIELDS:
        raise ParameterError(f"line {lineno}: expected 'kind skew' or 'kind gaussian'")
    kind = parts[1]
    values = {}
    names = list(_FIELDS[kind]) + ["history"]
    for name in names:
        if name == "history":
            nxt_line = next(it, None)
            if nxt_line is None:
                break
            lineno, line = nxt_line
        else:
            lineno, line = nxt(name)
        head = line.split()
        if head[0] != name:
            raise ParameterError(f"line {lineno}: expected field {name!r}, found {head[0]!r}")
        try:
            shape = tuple(int(s) for s in head[1:])
        except ValueError:
            raise ParameterError(f"line {lineno}: bad shape in {line!r}") from None
        n_rows = shape[0] if len(shape) == 2 else 1
        n_cols = shape[-1] if shape else 1
        rows = []
        for _ in range(n_rows):
            lineno, line = nxt(f"values of {name}")
            try:
                row = [float(s) for s in line.split()]
            except ValueError:
                raise ParameterError(f"line {lineno}: non-numeric value in {name}") from None
            if len(row) != n_cols:
                raise ParameterError(f"line {lineno}: {name} row has {len(row)} values, expected {n_cols}")
            rows.append(row)
        a = np.array(rows, dtype=float).reshape(shape)
        values[name] = a
    extra = next(it, None)
    if extra is not None:
        raise ParameterError(f"line {extra[0]}: unexpected content after the last field")
    if kind == "skew":
        noise = MvniwParams(values["DeltaHat"], values["V"], values["Psi"], float(values["nu"]))
        state = FilterState(values["x"], values["P"], noise)
    else:
        state = GaussianFilterState(values["x"], values["P"], values["Psi"], float(values["nu"]))
    history = values.get("history")
    if history is not None:
        history = history.reshape(-1, state.n_z) if history.size else np.zeros((0, state.n_z))
        if history.ndim != 2 or history.shape[1] != state.n_z:
            raise ParameterError(f"history must have {state.n_z} columns")
    return state, history


def save_state(state, path, history=None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_state(state, history))


def load_state(path):
    return load_checkpoint(path)[0]


def load_checkpoint(path):
    with open(path) as fh:
        return loads_checkpoint(fh.read())
