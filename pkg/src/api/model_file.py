"""This module contains the JSON model-file reader and writer."""

from __future__ import annotations

import hashlib
import json
import numbers
import pathlib
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src.core.config import TargetKind, ToleranceConfig
from src.core.exceptions import DomainError, ModelFileError, StabilizerError
from src.core.matrix_core import canonical_phase, rank
from src.core.model import validate
from src.data.lindblad_model import FeedbackModel, LindbladModel, NoiseChannel
from src.data.parsed_model import ModelOptions, ParsedModel
from src.data.subspace_basis import ORTHONORMAL_TOL, SubspaceBasis
from src.data.target import SpaceDecomposition, TargetSpec
from src.utils.logger import logger

FORMAT_VERSION = "1.0"

_TOP_LEVEL_FIELDS = {"format_version", "dim", "hamiltonian", "noise", "measurement", "target", "options"}
_REQUIRED_FIELDS = {"format_version", "dim", "hamiltonian", "target"}
_NOISE_FIELDS = {"matrix", "rate"}
_TARGET_FIELDS = {"kind", "payload"}
_OPTION_FIELDS = {"tol", "coupling_scale", "seed"}
_SUBSYSTEM_FIELDS = {"factor_dims", "basis"}

# Pure-state payloads within this distance of unit norm are renormalized
_STATE_NORM_SLACK = 1e-6


def _check_fields(raw: Any, path: str, allowed: set, required: Optional[set] = None) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ModelFileError("expected an object", field=path)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ModelFileError(f"unknown field(s) {', '.join(unknown)}", field=path)
    missing = sorted((required if required is not None else allowed) - set(raw))
    if missing:
        raise ModelFileError(f"missing field(s) {', '.join(missing)}", field=path)
    return raw


def _real(raw: Any, path: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, numbers.Real) or not np.isfinite(raw):
        raise ModelFileError("expected a finite number", field=path)
    return float(raw)


def _complex(raw: Any, path: str) -> complex:
    if not isinstance(raw, list) or len(raw) != 2:
        raise ModelFileError("expected a [re, im] pair", field=path)
    return complex(_real(raw[0], f"{path}[0]"), _real(raw[1], f"{path}[1]"))


def _vector(raw: Any, dim: int, path: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != dim:
        raise ModelFileError(f"expected a list of {dim} complex entries", field=path)
    return np.array([_complex(entry, f"{path}[{i}]") for i, entry in enumerate(raw)], dtype=complex)


def decode_matrix(raw: Any, dim: int, path: str) -> np.ndarray:
    """Row-major nested list of [re, im] pairs to a ``dim x dim`` complex array."""
    if not isinstance(raw, list) or len(raw) != dim:
        raise ModelFileError(f"expected {dim} rows", field=path)
    return np.array([_vector(row, dim, f"{path}[{i}]") for i, row in enumerate(raw)], dtype=complex)


def encode_complex(value: complex) -> List[float]:
    return [float(np.real(value)), float(np.imag(value))]


def encode_vector(vector: np.ndarray) -> List[List[float]]:
    return [encode_complex(entry) for entry in np.asarray(vector).ravel()]


def encode_matrix(matrix: np.ndarray) -> List[List[List[float]]]:
    return [encode_vector(row) for row in np.asarray(matrix)]


def _count(raw: Any, path: str, minimum: int = 1) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < minimum:
        raise ModelFileError(f"expected an integer of at least {minimum}", field=path)
    return raw


def parse_target(raw: Any, dim: int, path: str = "target") -> TargetSpec:
    """
    Decode a ``{kind, payload}`` object.

    :param raw: Decoded JSON object.
    :param dim: Hilbert-space dimension of the model.
    :param path: Field path used in error messages.
    :return: Validated target.
    """
    raw = _check_fields(raw, path, _TARGET_FIELDS)
    try:
        kind = TargetKind(raw["kind"])
    except ValueError:
        choices = ", ".join(k.value for k in TargetKind)
        raise ModelFileError(f"unknown kind {raw['kind']!r}, expected one of {choices}", field=f"{path}.kind") from None
    payload_path = f"{path}.payload"
    payload = raw["payload"]

    try:
        if kind is TargetKind.PURE_STATE:
            state = _vector(payload, dim, payload_path)
            norm = np.linalg.norm(state)
            if abs(norm - 1.0) > _STATE_NORM_SLACK:
                raise ModelFileError(f"state is not normalized (norm {norm:.12g})", field=payload_path)
            return TargetSpec(kind, state if abs(norm - 1.0) <= ORTHONORMAL_TOL else state / norm)

        if kind is TargetKind.SUBSPACE:
            if not isinstance(payload, list) or not payload:
                raise ModelFileError("expected a non-empty list of vectors", field=payload_path)
            columns = np.column_stack([_vector(v, dim, f"{payload_path}[{i}]") for i, v in enumerate(payload)])
            if rank(columns) < columns.shape[1]:
                raise ModelFileError("subspace vectors are linearly dependent", field=payload_path)
            if np.linalg.norm(columns.conj().T @ columns - np.eye(columns.shape[1])) > ORTHONORMAL_TOL:
                columns = canonical_phase(np.linalg.qr(columns)[0])
            return TargetSpec(kind, SubspaceBasis(columns))

        payload = _check_fields(payload, payload_path, _SUBSYSTEM_FIELDS)
        dims = payload["factor_dims"]
        if not isinstance(dims, list) or len(dims) != 2:
            raise ModelFileError("expected [dim S, dim F]", field=f"{payload_path}.factor_dims")
        dims = tuple(_count(d, f"{payload_path}.factor_dims[{i}]") for i, d in enumerate(dims))
        vectors = payload["basis"]
        if not isinstance(vectors, list) or len(vectors) != dims[0] * dims[1]:
            raise ModelFileError(f"expected {dims[0] * dims[1]} basis vectors", field=f"{payload_path}.basis")
        frame = np.column_stack([_vector(v, dim, f"{payload_path}.basis[{i}]") for i, v in enumerate(vectors)])
        return TargetSpec(kind, SpaceDecomposition.from_factor_basis(SubspaceBasis(frame), dims))
    except ModelFileError:
        raise
    except StabilizerError as e:
        raise ModelFileError(str(e), field=payload_path) from e


def _parse_options(raw: Any) -> ModelOptions:
    raw = _check_fields(raw, "options", _OPTION_FIELDS, required=set())
    values = {}
    if "tol" in raw:
        values["tol"] = _real(raw["tol"], "options.tol")
    if "coupling_scale" in raw:
        values["coupling_scale"] = _real(raw["coupling_scale"], "options.coupling_scale")
    if "seed" in raw:
        values["seed"] = _count(raw["seed"], "options.seed", minimum=0)
    try:
        return ModelOptions(**values)
    except ValueError as e:
        raise ModelFileError(str(e), field="options") from e


def canonical_digest(raw: Any) -> str:
    """sha256 of the canonical (sorted, compact) JSON text of a decoded document."""
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def parse_model_text(text: str, tolerances: Optional[ToleranceConfig] = None) -> ParsedModel:
    """
    Parse and validate the JSON text of a model file.

    :raises ModelFileError: with a line/column for malformed JSON, a field path for schema violations and the
        residual for violated model invariants.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(e.msg, line=e.lineno, column=e.colno) from e
    raw = _check_fields(raw, "model", _TOP_LEVEL_FIELDS, required=_REQUIRED_FIELDS)
    if raw["format_version"] != FORMAT_VERSION:
        raise ModelFileError(
            f"unsupported version {raw['format_version']!r}, expected {FORMAT_VERSION}", field="format_version"
        )
    dim = _count(raw["dim"], "dim")
    hamiltonian = decode_matrix(raw["hamiltonian"], dim, "hamiltonian")

    noise_raw = raw.get("noise", [])
    if not isinstance(noise_raw, list):
        raise ModelFileError("expected a list", field="noise")
    noise = []
    for k, entry in enumerate(noise_raw):
        entry = _check_fields(entry, f"noise[{k}]", _NOISE_FIELDS)
        operator = decode_matrix(entry["matrix"], dim, f"noise[{k}].matrix")
        noise.append(NoiseChannel(operator, _real(entry["rate"], f"noise[{k}].rate")))

    measurement = raw.get("measurement")
    if measurement is not None and noise:
        raise ModelFileError("a model carries either a measurement or noise operators, not both", field="measurement")
    if measurement is not None:
        model: Union[LindbladModel, FeedbackModel] = FeedbackModel(
            hamiltonian, decode_matrix(measurement, dim, "measurement")
        )
    else:
        model = LindbladModel(hamiltonian, tuple(noise))

    violations = validate(model, tolerances)
    if violations:
        raise ModelFileError("; ".join(violations), field="model")
    target = parse_target(raw["target"], dim)
    options = _parse_options(raw.get("options", {}))
    parsed = ParsedModel(model, target, options, canonical_digest(raw), raw["format_version"])
    logger.debug("Parsed %s of dimension %d with a %s target", type(model).__name__, dim, target.kind.value)
    return parsed


def parse_model(path: Union[str, pathlib.Path], tolerances: Optional[ToleranceConfig] = None) -> ParsedModel:
    """
    Read a model file from disk.

    :param path: Path of the JSON file.
    :param tolerances: Thresholds for the invariant checks.
    :return: The model, its target, options and input digest.
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise ModelFileError(f"no such file {path}")
    return parse_model_text(path.read_text(encoding="utf-8"), tolerances)


def parse_target_file(path: Union[str, pathlib.Path], dim: int) -> TargetSpec:
    """Read a standalone ``{kind, payload}`` JSON file for a model of dimension ``dim``."""
    path = pathlib.Path(path)
    if not path.is_file():
        raise ModelFileError(f"no such file {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelFileError(e.msg, line=e.lineno, column=e.colno) from e
    return parse_target(raw, dim)


def encode_target(target: TargetSpec) -> Dict[str, Any]:
    if target.kind is TargetKind.PURE_STATE:
        payload: Any = encode_vector(target.payload)
    elif target.kind is TargetKind.SUBSPACE:
        payload = [encode_vector(column) for column in target.payload.vectors.T]
    else:
        payload = {
            "factor_dims": list(target.payload.factor_dims),
            "basis": [encode_vector(column) for column in target.payload.system.vectors.T],
        }
    return {"kind": target.kind.value, "payload": payload}


def model_document(
    model: Union[LindbladModel, FeedbackModel], target: TargetSpec, options: Optional[ModelOptions] = None
) -> Dict[str, Any]:
    """
    Encode a model, its target and options as a model-file document.

    :raises DomainError: for a feedback model with a nonzero feedback Hamiltonian, which the format cannot carry.
    """
    options = options or ModelOptions()
    document: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "dim": model.dim,
        "hamiltonian": encode_matrix(model.hamiltonian),
        "target": encode_target(target),
        "options": {"tol": options.tol, "coupling_scale": options.coupling_scale, "seed": options.seed},
    }
    if isinstance(model, FeedbackModel):
        if np.any(model.feedback != 0):
            raise DomainError("Model files carry no feedback Hamiltonian; emit the reduced closed loop instead")
        document["measurement"] = encode_matrix(model.measurement)
    else:
        document["noise"] = [{"matrix": encode_matrix(c.operator), "rate": c.rate} for c in model.noise]
    return document


def emit_model(
    model: Union[LindbladModel, FeedbackModel], target: TargetSpec, options: Optional[ModelOptions] = None
) -> str:
    return json.dumps(model_document(model, target, options), sort_keys=True, indent=2) + "\n"


def write_model(
    path: Union[str, pathlib.Path],
    model: Union[LindbladModel, FeedbackModel],
    target: TargetSpec,
    options: Optional[ModelOptions] = None,
) -> None:
    pathlib.Path(path).write_text(emit_model(model, target, options), encoding="utf-8")
    logger.info("Wrote model file %s", path)
