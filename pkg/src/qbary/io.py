"""Sample CSV files, JSON-lines result records and key=value config files.

Sample files have one row per posterior draw. Columns are ``draw``, the mean
coordinates ``m{i}_{j}`` (component i, coordinate j), then for Gaussian draws
the upper-triangular covariance entries ``c{i}_{r}_{s}`` (r <= s) and finally
an optional ``log_density`` column.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bures import GaussianComponent
from .errors import ConfigError

SCHEMA_VERSION = 1

_MEAN = re.compile(r"^m(\d+)_(\d+)$")
_COV = re.compile(r"^c(\d+)_(\d+)_(\d+)$")


class SampleFormatError(ConfigError):
    """Malformed sample file; ``row`` is the 1-based data row, if known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}", "input")
        self.row = row


def _fmt(x) -> str:
    return repr(float(x))


def sample_header(K: int, d: int, gaussian: bool, with_density: bool = False) -> list[str]:
    cols = ["draw"] + [f"m{i}_{j}" for i in range(K) for j in range(d)]
    if gaussian:
        cols += [f"c{i}_{r}_{s}" for i in range(K) for r in range(d) for s in range(r, d)]
    if with_density:
        cols.append("log_density")
    return cols


def write_samples(path, samples, log_density=None):
    """Write draws (``(K, d)`` arrays or tuples of Gaussian components) as CSV."""
    samples = list(samples)
    if not samples:
        raise ConfigError("no samples to write", "n")
    first = samples[0]
    gaussian = isinstance(first[0], GaussianComponent)
    K = len(first)
    d = first[0].dim if gaussian else np.atleast_2d(np.asarray(first, dtype=float).reshape(K, -1)).shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(sample_header(K, d, gaussian, log_density is not None))
        for n, s in enumerate(samples):
            if gaussian:
                row = [c.mean[j] for c in s for j in range(d)]
                row += [c.covariance[r, s_] for c in s for r in range(d) for s_ in range(r, d)]
            else:
                row = list(np.asarray(s, dtype=float).reshape(-1))
            if log_density is not None:
                row.append(log_density[n])
            writer.writerow([n] + [_fmt(v) for v in row])


@dataclass
class SampleFile:
    samples: list
    K: int
    dim: int
    gaussian: bool
    log_density: list | None = None


def _parse_header(header):
    if not header or header[0] != "draw":
        raise SampleFormatError("header must start with 'draw'")
    means, covs, density = {}, {}, None
    for col, name in enumerate(header[1:], start=1):
        if (m := _MEAN.match(name)) is not None:
            means[(int(m[1]), int(m[2]))] = col
        elif (m := _COV.match(name)) is not None:
            covs[(int(m[1]), int(m[2]), int(m[3]))] = col
        elif name == "log_density":
            density = col
        else:
            raise SampleFormatError(f"unknown column {name!r}")
    if not means:
        raise SampleFormatError("no mean columns m{i}_{j}")
    K = 1 + max(i for i, _ in means)
    dims = {i: sorted(j for k, j in means if k == i) for i in range(K)}
    d = len(dims[0])
    for i, js in dims.items():
        if js != list(range(d)):
            raise SampleFormatError(f"component {i} has coordinates {js}, expected 0..{d - 1} (mixed dimensions)")
    if covs:
        expected = {(i, r, s) for i in range(K) for r in range(d) for s in range(r, d)}
        if set(covs) != expected:
            raise SampleFormatError("covariance columns do not cover every component's upper triangle")
    return K, d, means, covs, density


def read_samples(path) -> SampleFile:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SampleFormatError("empty sample file")
    K, d, means, covs, density = _parse_header(rows[0])
    width = len(rows[0])
    samples, dens = [], [] if density is not None else None
    for n, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != width:
            raise SampleFormatError(f"{len(row)} fields, expected {width}", n)
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as err:
            raise SampleFormatError(str(err), n) from None
        if not all(math.isfinite(v) for v in values):
            raise SampleFormatError("non-finite value", n)
        get = lambda col: values[col - 1]  # noqa: E731
        mu = np.array([[get(means[(i, j)]) for j in range(d)] for i in range(K)])
        if covs:
            comps = []
            for i in range(K):
                cov = np.empty((d, d))
                for r in range(d):
                    for s in range(r, d):
                        cov[r, s] = cov[s, r] = get(covs[(i, r, s)])
                if np.linalg.eigvalsh(cov).min() <= 0.0:
                    raise SampleFormatError(f"covariance of component {i} is not positive definite", n)
                comps.append(GaussianComponent.from_covariance(mu[i], cov))
            samples.append(tuple(comps))
        else:
            samples.append(mu)
        if dens is not None:
            dens.append(get(density))
    if not samples:
        raise SampleFormatError("sample file has no data rows")
    return SampleFile(samples, K, d, bool(covs), dens)


def estimate_to_json(estimate):
    """JSON form of an estimate; Gaussian components carry a true Cholesky factor."""
    if isinstance(estimate[0], GaussianComponent):
        return [
            {"mean": c.mean.tolist(), "covariance": c.covariance.tolist(), "cholesky": c.cholesky().tolist()}
            for c in estimate
        ]
    return np.asarray(estimate, dtype=float).tolist()


def estimate_from_json(data):
    if data and isinstance(data[0], dict):
        return tuple(GaussianComponent.from_covariance(c["mean"], c["covariance"]) for c in data)
    return np.asarray(data, dtype=float)


@dataclass
class ResultRecord:
    """One line of a result file. ``timing`` holds wall-clock values and is
    the only part that differs between otherwise identical runs."""

    kind: str
    config: dict
    metrics: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    estimate: list | None = None
    timing: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        for key, value in self.metrics.items():
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"metric {key!r} is not a finite number: {value!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "ResultRecord":
        data = json.loads(line)
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported result schema {data.get('schema')!r}", "schema")
        return cls(**data)

    def deterministic_view(self) -> dict:
        out = asdict(self)
        out.pop("timing")
        return out


def write_results(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_results(path) -> list[ResultRecord]:
    with open(path) as fh:
        return [ResultRecord.from_json(line) for line in fh if line.strip()]


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``[section]`` headers prefix keys as ``section.key``.

    A result file is also accepted, in which case its first record's config
    echo is returned so a run can be reproduced from its output.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        first = next(line for line in text.splitlines() if line.strip())
        return dict(ResultRecord.from_json(first).config)
    out, section = {}, ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value", None)
        key, value = (s.strip() for s in line.split("=", 1))
        out[f"{section}.{key}" if section else key] = value
    return out
