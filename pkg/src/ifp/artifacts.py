"""Reading and writing run artifacts: policies, reports and manifests.

All text is written with ``\\n`` line endings and ``repr`` float formatting,
which round-trips exactly and does not depend on the locale.
"""

import csv
import datetime as dt
import hashlib
import json
import platform
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import GridMismatch, SchemaError
from .solver import AssetGrid, Policy

POLICY_HEADER = ("state_index", "asset", "consumption")


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    return path


def write_json(path, obj):
    return write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sidecar_path(policy_csv):
    return Path(policy_csv).with_suffix(".json")


def policy_csv(policy):
    lines = [",".join(POLICY_HEADER)]
    g = policy.grid.points.tolist()
    for z in range(policy.n_states):
        lines += [f"{z},{a!r},{c!r}" for a, c in zip(g, policy.c[:, z].tolist())]
    return "\n".join(lines) + "\n"


def policy_sidecar(policy):
    return {
        "gamma": policy.gamma,
        "n_states": policy.n_states,
        "grid_points": len(policy.grid),
        "alpha": None if policy.alpha is None else policy.alpha.tolist(),
        "a_bar": None if policy.a_bar is None else policy.a_bar.tolist(),
        "iterations": len(policy.trace),
        "trace": list(map(float, policy.trace)),
    }


def write_policy(path, policy):
    """Write ``path`` (CSV) and its JSON sidecar; return both paths."""
    p = write_text(path, policy_csv(policy))
    return p, write_json(sidecar_path(path), policy_sidecar(policy))


def read_policy(path, spec=None):
    """Load a policy written by :func:`write_policy`.

    Raises
    ------
    SchemaError
        Malformed file (with the line number), or states that do not match
        ``spec``.
    """
    path = Path(path)
    rows = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != POLICY_HEADER:
                raise SchemaError(f"expected header {','.join(POLICY_HEADER)}", f"{path}:1")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise SchemaError("expected 3 columns", f"{path}:{lineno}")
                try:
                    z, a, c = int(row[0]), float(row[1]), float(row[2])
                except ValueError as err:
                    raise SchemaError(str(err), f"{path}:{lineno}") from err
                rows.setdefault(z, []).append((a, c))
    except OSError as err:
        raise SchemaError(f"cannot read policy: {err.strerror}", str(path)) from err
    states = sorted(rows)
    if states != list(range(len(states))):
        raise SchemaError("state indices must be 0..n-1", str(path))
    grids = [np.array([r[0] for r in rows[z]]) for z in states]
    if any(len(g) != len(grids[0]) or not np.array_equal(g, grids[0]) for g in grids):
        raise SchemaError("every state must share one asset grid", str(path))
    c = np.column_stack([np.array([r[1] for r in rows[z]]) for z in states])
    side = {}
    sp = sidecar_path(path)
    if sp.exists():
        try:
            side = json.loads(sp.read_text())
        except json.JSONDecodeError as err:
            raise SchemaError(f"invalid JSON: {err.msg}", f"{sp}:{err.lineno}") from err
    pol = Policy(AssetGrid(grids[0]), c,
                 alpha=None if side.get("alpha") is None else np.array(side["alpha"]),
                 a_bar=None if side.get("a_bar") is None else np.array(side["a_bar"]),
                 trace=side.get("trace", []), gamma=side.get("gamma"))
    if spec is not None:
        if pol.n_states != spec.n_states:
            raise GridMismatch(f"policy has {pol.n_states} states but the config defines {spec.n_states}")
        if pol.gamma is not None and pol.gamma != spec.gamma:
            raise GridMismatch(f"policy was solved with gamma={pol.gamma}, config has {spec.gamma}")
    return pol


def read_terminal_panel(path):
    """Asset column of a panel CSV (terminal or full; full panels keep the last date)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header == ["path", "state", "asset"]:
            return np.array([float(r[2]) for r in reader])
        if header == ["path", "t", "state", "asset"]:
            last = {}
            for r in reader:
                last[int(r[0])] = (int(r[1]), float(r[3]))
            tmax = max(t for t, _ in last.values())
            return np.array([a for t, a in last.values() if t == tmax])
    raise SchemaError("unrecognized panel header", f"{path}:1")


def versions():
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """What was run and what it produced.

    ``argv`` is enough to rerun the command; ``outputs`` maps every written
    file to its SHA-256 so a rerun can be checked byte for byte.
    """

    command: str
    argv: list
    config_path: str = None
    config_sha256: str = None
    seed: int = None
    threads: int = None
    backend: str = None
    versions: dict = field(default_factory=versions)
    started: str = field(default_factory=_now)
    finished: str = None
    outputs: dict = field(default_factory=dict)

    def add_output(self, name, path):
        """Record ``path`` under ``name`` (relative to the output directory)."""
        self.outputs[str(name)] = sha256(path)

    def finish(self):
        self.finished = _now()

    def to_dict(self):
        return asdict(self)

    def write(self, path):
        return write_json(path, self.to_dict())

    @classmethod
    def read(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except OSError as err:
            raise SchemaError(f"cannot read manifest: {err.strerror}", str(path)) from err
        except json.JSONDecodeError as err:
            raise SchemaError(f"invalid JSON: {err.msg}", f"{path}:{err.lineno}") from err
        try:
            return cls(**d)
        except TypeError as err:
            raise SchemaError(str(err), str(path)) from err
