"""Fixture and random instance generators, and JSON file formats.

Instance files::

    {"schema_version": 1, "kind": "instance", "label": ..., "n": ..., "m": ...,
     "matrices": [[[...row...], ...], ...],   # m full n x n row-major arrays
     "b": [...], "blocks": null | [n_1, ...],
     "flags": {"traceless": bool, "orthonormal": bool},
     "meta": {...}}

Certificate files carry ``"kind": "certificate"`` with ``verdict``,
``payload``, ``verification``, ``duality_check`` and solver statistics.
Transform records carry ``"kind": "transform_record"``.

Floats are written by :mod:`json`, i.e. as shortest round-trip decimals.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidInput, MomentBodyError, SchemaError
from .moment_map import Instance, MomentMap
from .precondition import TransformRecord, whiten_map
from .spectral import exp1

SCHEMA_VERSION = 1
SYMMETRY_TOL = 1e-12

# -- generators -------------------------------------------------------------


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _random_symmetric(rng: np.random.Generator, shape) -> np.ndarray:
    G = rng.standard_normal(shape)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def random_normalized_map(n: int, m: int, rng: np.random.Generator) -> MomentMap:
    if n < 2 or not 1 <= m <= n * (n + 1) // 2 - 1:
        raise InvalidInput(f"need n >= 2 and 1 <= m <= n(n+1)/2 - 1, got n={n}, m={m}")
    raw = MomentMap(_random_symmetric(rng, (m, n, n)))
    pmap, _ = whiten_map(raw)
    return pmap


def gen_random(n: int, m: int, seed: int) -> Instance:
    """Preconditioned Gaussian map with ``b = A(exp1(S))`` for a Gaussian
    symmetric ``S``; ``b`` is interior by construction."""
    rng = _rng(seed)
    pmap = random_normalized_map(n, m, rng)
    X, _ = exp1(_random_symmetric(rng, (n, n)))
    b = pmap.flat @ X.ravel()
    meta = {"generator": "gen_random", "seed": int(seed), "rng": "PCG64"}
    return Instance(pmap, b, label=f"random-n{n}-m{m}-s{seed}", meta=meta)


def gen_infeasible(n: int, m: int, seed: int, margin: float) -> Instance:
    """``b = (1 + margin) A(v v^T)`` with ``v`` the top eigenvector of ``A(u)``
    for a random unit ``u``.

    ``margin > 0`` puts ``b`` strictly outside (checked: ``u.b > h(u)``),
    ``margin = 0`` on the boundary, ``-1 < margin < 0`` inside.
    """
    rng = _rng(seed)
    pmap = random_normalized_map(n, m, rng)
    u = rng.standard_normal(m)
    u /= np.linalg.norm(u)
    lam, V = np.linalg.eigh(pmap.adjoint(u))
    v = V[:, -1]
    b = (1.0 + margin) * (pmap.flat @ np.outer(v, v).ravel())
    if margin > 0 and not u @ b > lam[-1]:
        raise InvalidInput("generated point is not separated from the body")
    meta = {"generator": "gen_infeasible", "seed": int(seed), "rng": "PCG64",
            "margin": float(margin), "direction": u.tolist()}
    return Instance(pmap, b, label=f"infeasible-n{n}-m{m}-s{seed}", meta=meta)


def example_2_1_map() -> MomentMap:
    A1 = 0.5 * np.array([[1.0, 1, 0], [1, 0, 0], [0, 0, -1]])
    A2 = 0.5 * np.array([[-1.0, 1, 0], [1, 0, 0], [0, 0, 1]])
    return MomentMap(np.stack([A1, A2]), traceless=True, orthonormal=True)


def gen_example_2_1(b=(0.0, 0.0)) -> Instance:
    """Planar body: hull of an ellipse and the point (-1/2, 1/2)."""
    return Instance(example_2_1_map(), b, label="example-2.1", meta={"generator": "example_2_1"})


def example_2_2_map() -> MomentMap:
    J = np.array([[1.0, 0], [0, -1]])
    K = np.array([[0.0, 1], [1, 0]])
    Z = np.zeros((2, 2))
    mats = np.stack([
        np.block([[J, Z], [Z, J]]),
        np.block([[K, Z], [Z, Z]]),
        np.block([[Z, Z], [Z, K]]),
    ])
    return MomentMap(mats, blocks=(2, 2), traceless=True)


def gen_example_2_2(b=(0.0, 0.0, 0.0)) -> Instance:
    """Hull of two orthogonal unit circles in R^3, block structure (2, 2)."""
    return Instance(example_2_2_map(), b, label="example-2.2", meta={"generator": "example_2_2"})


def preconditioning_example_map() -> MomentMap:
    """Raw (uncentered, non-orthonormal) 3x3 pair used to illustrate whitening."""
    A1 = np.array([[6.0, 1, 0], [1, 2, 0], [0, 0, -2]])
    A2 = 0.5 * np.array([[-2.0, 1, 0], [1, 2, 0], [0, 0, 6]])
    return MomentMap(np.stack([A1, A2]))


def gen_interval(b: float = 0.0) -> Instance:
    """``n = 2, m = 1, A_1 = diag(1, -1)/sqrt(2)``: the body is ``[-1/sqrt2, 1/sqrt2]``."""
    A = np.diag([1.0, -1.0]) / np.sqrt(2.0)
    return Instance(MomentMap(A[None], blocks=(1, 1), traceless=True, orthonormal=True), [b],
                    label="interval", meta={"generator": "interval"})


def random_block_map(sizes, m: int, rng: np.random.Generator) -> MomentMap:
    """Random normalized block-diagonal map with the given block sizes."""
    n = sum(sizes)
    mats = np.zeros((m, n, n))
    start = 0
    for size in sizes:
        mats[:, start:start + size, start:start + size] = _random_symmetric(rng, (m, size, size))
        start += size
    pmap, _ = whiten_map(MomentMap(mats, blocks=tuple(sizes)))
    return pmap


# -- serialization ----------------------------------------------------------


def _dump(obj: dict, path) -> None:
    text = json.dumps(obj, indent=1, allow_nan=False, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    return obj


def _field(obj: dict, key: str, where: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{where}: missing field '{key}'")
    return obj[key]


def _array(value, shape, name: str, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: field '{name}' is not a numeric array") from exc
    if arr.shape != shape:
        raise SchemaError(f"{where}: field '{name}' has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{where}: field '{name}' has non-finite entries")
    return arr


def instance_to_dict(inst: Instance) -> dict:
    mp = inst.map
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "instance",
        "label": inst.label,
        "n": mp.n,
        "m": mp.m,
        "matrices": mp.mats.tolist(),
        "b": inst.b.tolist(),
        "blocks": list(mp.blocks) if mp.blocks is not None else None,
        "flags": {"traceless": mp.traceless, "orthonormal": mp.orthonormal},
        "meta": inst.meta,
    }


def instance_from_dict(obj: dict, where: str = "instance") -> Instance:
    version = _field(obj, "schema_version", where)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema_version {version!r}")
    if obj.get("kind", "instance") != "instance":
        raise SchemaError(f"{where}: expected kind 'instance', got {obj.get('kind')!r}")
    n, m = _field(obj, "n", where), _field(obj, "m", where)
    if not (isinstance(n, int) and isinstance(m, int) and n >= 1 and m >= 1):
        raise SchemaError(f"{where}: 'n' and 'm' must be positive integers")
    mats = _array(_field(obj, "matrices", where), (m, n, n), "matrices", where)
    asym = np.abs(mats - mats.transpose(0, 2, 1))
    if asym.max() > SYMMETRY_TOL:
        i, r, c = np.unravel_index(np.argmax(asym), asym.shape)
        raise SchemaError(
            f"{where}: matrices[{i}] is not symmetric at ({r},{c}) (difference {asym.max():.3e})"
        )
    b = _array(_field(obj, "b", where), (m,), "b", where)
    blocks = obj.get("blocks")
    flags = obj.get("flags") or {}
    if not isinstance(flags, dict):
        raise SchemaError(f"{where}: 'flags' must be an object")
    try:
        mp = MomentMap(
            mats,
            blocks=tuple(blocks) if blocks is not None else None,
            traceless=bool(flags.get("traceless", False)),
            orthonormal=bool(flags.get("orthonormal", False)),
        )
    except (MomentBodyError, TypeError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    meta = obj.get("meta") or {}
    return Instance(mp, b, label=str(obj.get("label", "")), meta=meta)


def write_instance(inst: Instance, path) -> None:
    _dump(instance_to_dict(inst), path)


def read_instance(path) -> Instance:
    return instance_from_dict(_load(path), where=str(path))


def write_record(record: TransformRecord, path) -> None:
    _dump({"schema_version": SCHEMA_VERSION, "kind": "transform_record", **record.to_dict()}, path)


def read_record(path) -> TransformRecord:
    obj = _load(path)
    if obj.get("kind") != "transform_record":
        raise SchemaError(f"{path}: expected kind 'transform_record'")
    try:
        return TransformRecord.from_dict(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


CERTIFICATE_VERDICTS = ("feasible", "infeasible", "not_interior", "indeterminate")


def certificate_to_dict(report, label: str = "") -> dict:
    """Serialize a :class:`~momentbody.oracle.MembershipReport`."""
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "certificate",
        "instance": label,
        "verdict": report.verdict,
        "payload": report.certificate,
        "verification": _plain(report.verification),
        "duality_check": report.duality_check,
        "quick_reject_reason": report.quick_reject_reason,
        "iterations": report.iterations,
        "timings": report.timings,
    }


def _plain(d: dict) -> dict:
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in d.items()}


def write_certificate(report, path, label: str = "") -> None:
    _dump(certificate_to_dict(report, label), path)


def read_certificate(path) -> dict:
    obj = _load(path)
    where = str(path)
    if obj.get("kind") != "certificate":
        raise SchemaError(f"{where}: expected kind 'certificate'")
    verdict = _field(obj, "verdict", where)
    if verdict not in CERTIFICATE_VERDICTS:
        raise SchemaError(f"{where}: unknown verdict {verdict!r}")
    payload = _field(obj, "payload", where)
    if verdict == "feasible":
        _field(payload, "X", where + ":payload")
    elif verdict == "infeasible":
        _field(payload, "u", where + ":payload")
    return obj
