"""Extreme learning machines with closed-form leave-one-out regularization.

Four variants share one forward model ``scores = phi(X V + b) W``:

``elm``        ridge solve at a tiny stabilising lambda
``r-elm``      lambda picked by minimum PRESS, leverages from a Gram eigendecomposition
``hesselm``    Hessenberg factors of the Gram matrix, tiny lambda
``r-hesselm``  one Hessenberg factorisation reused for every candidate lambda

All solves branch on shape the same way: with ``m < N`` hidden units the
``m x m`` Gram ``H^T H`` is factored, otherwise the ``N x N`` Gram ``H H^T``
and the minimum-norm form ``W = H^T (H H^T + lam I)^{-1} T``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import linalg
from .errors import (
    DegenerateLeverageError,
    DimensionError,
    FormatVersionError,
    ModelFormatError,
    SingularMatrixError,
    TrainingError,
    ValidationError,
)

__all__ = [
    "VARIANTS",
    "ACTIVATIONS",
    "LAMBDA_FLOOR",
    "PATHS",
    "ElmModel",
    "PressSweepResult",
    "default_lambda_grid",
    "init_hidden",
    "hidden_output",
    "encode_targets",
    "ridge_weights",
    "hat_diagonal",
    "press_mse",
    "train",
    "predict",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]

VARIANTS = ("elm", "r-elm", "hesselm", "r-hesselm")
ACTIVATIONS = {"sigmoid": expit, "tanh": np.tanh}
PATHS = ("direct", "gram-eigen", "hessenberg")
LAMBDA_FLOOR = 1e-12
LEVERAGE_TOL = 1e-10
MODEL_FORMAT = "hesselm-model"
MODEL_FORMAT_VERSION = 1


def default_lambda_grid() -> np.ndarray:
    """``exp(-20), exp(-19), ..., exp(-1)``."""
    return np.exp(np.arange(-20, 0, dtype=np.float64))


def init_hidden(n_features: int, m: int, activation: str = "sigmoid", seed=None):
    """Random input layer: ``V`` (n_features x m) and ``b`` (m,), i.i.d. U[-1, 1]."""
    if activation not in ACTIVATIONS:
        raise ValidationError(f"unknown activation {activation!r}")
    if m < 1:
        raise ValidationError(f"hidden layer needs at least one neuron, got m={m}")
    if n_features < 1:
        raise ValidationError(f"need at least one input feature, got {n_features}")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, size=(n_features, m))
    b = rng.uniform(-1.0, 1.0, size=m)
    return v, b


def hidden_output(x, v, b, activation: str = "sigmoid") -> np.ndarray:
    x = linalg.as_matrix(x, "X")
    v = np.asarray(v, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.shape[1] != v.shape[0]:
        raise DimensionError(f"X has {x.shape[1]} features but input weights expect {v.shape[0]}")
    if b.shape != (v.shape[1],):
        raise DimensionError(f"bias has shape {b.shape}, expected ({v.shape[1]},)")
    try:
        phi = ACTIVATIONS[activation]
    except KeyError:
        raise ValidationError(f"unknown activation {activation!r}") from None
    return phi(x @ v + b)


def encode_targets(labels: Sequence, class_labels: Sequence) -> np.ndarray:
    """One-hot rows with +1 on the true class and -1 elsewhere."""
    index = {c: i for i, c in enumerate(class_labels)}
    t = -np.ones((len(labels), len(class_labels)))
    for row, label in enumerate(labels):
        try:
            t[row, index[label]] = 1.0
        except KeyError:
            raise ValidationError(f"label {label!r} is not one of {list(class_labels)}") from None
    return t


class _Smoother:
    """Ridge solves for one ``H`` at many lambdas.

    ``solve`` returns output weights, training residuals ``T - H W`` and the
    leverage complements ``1 - HAT_jj``. In the wide branch both residuals and
    complements carry an explicit factor of lambda (``T - HAT T = lam A`` with
    ``A = (H H^T + lam I)^{-1} T``) so they stay accurate as lambda shrinks.
    """

    def __init__(self, h: np.ndarray, path: str):
        if path not in PATHS:
            raise ValidationError(f"unknown solver path {path!r}; expected one of {PATHS}")
        self.h = h
        self.path = path
        n, m = h.shape
        self.wide = m >= n
        if path == "direct":
            return
        gram = h @ h.T if self.wide else h.T @ h
        gram = 0.5 * (gram + gram.T)
        if path == "gram-eigen":
            self.eig = linalg.gram_eigendecompose(gram)
            self.basis = self.eig.vectors if self.wide else h @ self.eig.vectors
        else:
            self.factors = linalg.hessenberg_decompose(gram)
            f = self.factors
            self.rotated = f.q.T if self.wide else f.q.T @ h.T

    def solve(self, lam: float, t: np.ndarray):
        h = self.h
        if self.path == "direct":
            return self._solve_direct(lam, t)
        if self.path == "gram-eigen":
            inv = 1.0 / (self.eig.values + lam)
            if np.any(~np.isfinite(inv)):
                raise SingularMatrixError("Gram matrix is singular at lambda=0")
            coef = inv[:, None] * (self.basis.T @ t)
            if self.wide:
                a = self.eig.vectors @ coef
                return h.T @ a, lam * a, lam * (self.basis ** 2 @ inv)
            w = self.eig.vectors @ coef
            return w, t - self.basis @ coef, 1.0 - (self.basis ** 2 @ inv)
        shifted = linalg.factor_shift(self.factors, lam)
        quad = shifted.quadratic_diag(self.rotated, rotated=True)
        if self.wide:
            a = shifted.solve(t)
            return h.T @ a, lam * a, lam * quad
        w = shifted.solve(h.T @ t)
        return w, t - h @ w, 1.0 - quad

    def _solve_direct(self, lam: float, t: np.ndarray):
        h = self.h
        if self.wide:
            k = h @ h.T
            k[np.diag_indices_from(k)] += lam
            k_inv = linalg.solve_symmetric(k, np.eye(k.shape[0]))
            a = k_inv @ t
            return h.T @ a, lam * a, lam * np.diag(k_inv).copy()
        g = h.T @ h
        g[np.diag_indices_from(g)] += lam
        g_inv = linalg.solve_symmetric(g, np.eye(g.shape[0]))
        w = linalg.ridge_solve_direct(h, t, lam)
        return w, t - h @ w, 1.0 - np.einsum("ij,ij->i", h @ g_inv, h)


def floor_lambda(h) -> float:
    """Shift used by the unregularized variants: ``1e-12`` times the Gram's largest diagonal entry.

    Scaling with the data keeps the smallest pivot of ``Gram + lam I`` a fixed
    factor above the tridiagonal pivot tolerance, so rank-deficient hidden
    layers still give a well-posed solve.
    """
    h = np.asarray(h, dtype=np.float64)
    axis = 1 if h.shape[1] >= h.shape[0] else 0
    return LAMBDA_FLOOR * max(1.0, float(np.max(np.sum(h * h, axis=axis))))


def _as_targets(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return t[:, None] if t.ndim == 1 else t


def _press(residuals: np.ndarray, complement: np.ndarray, lam: float) -> float:
    if np.any(complement <= LEVERAGE_TOL):
        j = int(np.argmin(complement))
        raise DegenerateLeverageError(
            f"leverage of sample {j} is {1.0 - complement[j]:.12g} at lambda={lam:g}; "
            "leave-one-out residual is undefined"
        )
    per_sample = np.sum(residuals ** 2, axis=1) / complement ** 2
    return float(np.mean(per_sample) / residuals.shape[1])


def ridge_weights(h, t, lam: float, path: str = "hessenberg") -> np.ndarray:
    """Output weights ``(H^T H + lam I)^{-1} H^T T`` computed along ``path``."""
    h = linalg.as_matrix(h, "H")
    return _Smoother(h, path).solve(lam, _as_targets(t))[0]


def hat_diagonal(h, lam: float, path: str = "hessenberg") -> np.ndarray:
    """Diagonal of the smoother ``H (H^T H + lam I)^{-1} H^T``."""
    h = linalg.as_matrix(h, "H")
    return 1.0 - _Smoother(h, path).solve(lam, np.zeros((h.shape[0], 1)))[2]


def press_mse(h, t, lam: float, path: str = "hessenberg") -> float:
    """Closed-form leave-one-out mean squared error of the ridge fit.

    For ``C`` outputs the per-sample residual norm is divided by
    ``1 - HAT_jj``, squared, averaged over samples and divided by ``C``.

    Raises
    ------
    DegenerateLeverageError
        If any ``HAT_jj >= 1 - 1e-10``.
    """
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    h = linalg.as_matrix(h, "H")
    t = _as_targets(t)
    if t.shape[0] != h.shape[0]:
        raise DimensionError(f"T has {t.shape[0]} rows, H has {h.shape[0]}")
    _, residuals, complement = _Smoother(h, path).solve(lam, t)
    return _press(residuals, complement, lam)


@dataclass(frozen=True)
class PressSweepResult:
    candidates: tuple[tuple[float, float], ...]
    best_lambda: float
    best_press: float
    excluded: tuple[float, ...] = ()


@dataclass(frozen=True)
class ElmModel:
    variant: str
    activation: str
    lam: float
    class_labels: tuple
    seed: int | None
    input_weights: np.ndarray
    biases: np.ndarray
    output_weights: np.ndarray
    extractor: dict | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        m = self.input_weights.shape[1]
        if m < 1 or len(self.class_labels) < 2:
            raise ValidationError("model needs m >= 1 hidden units and at least two classes")
        if self.biases.shape != (m,) or self.output_weights.shape != (m, len(self.class_labels)):
            raise DimensionError(
                f"inconsistent layer shapes: V {self.input_weights.shape}, b {self.biases.shape}, "
                f"W {self.output_weights.shape} for {len(self.class_labels)} classes"
            )

    @property
    def n_features(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.input_weights.shape[1]


def _sweep(smoother: _Smoother, t: np.ndarray, candidates) -> PressSweepResult:
    scored, excluded = [], []
    for lam in candidates:
        try:
            _, residuals, complement = smoother.solve(lam, t)
            scored.append((lam, _press(residuals, complement, lam)))
        except (DegenerateLeverageError, SingularMatrixError) as exc:
            warnings.warn(f"lambda={lam:g} excluded from the sweep: {exc}", stacklevel=3)
            excluded.append(lam)
    if not scored:
        raise TrainingError("every candidate lambda was excluded; PRESS is undefined for all of them")
    # ties go to the larger lambda
    best_lambda, best_press = min(scored, key=lambda item: (item[1], -item[0]))
    return PressSweepResult(tuple(scored), best_lambda, best_press, tuple(excluded))


def train(x, labels, variant: str = "r-hesselm", m: int = 50, activation: str = "sigmoid",
          lambda_candidates=None, seed=None, class_labels=None, extractor: dict | None = None):
    """Fit an ELM.

    Parameters
    ----------
    x : array_like, shape (N, n_features)
        Normalised feature rows.
    labels : sequence
        Class of every row.
    variant : {"elm", "r-elm", "hesselm", "r-hesselm"}
    m : int
        Hidden neurons.
    lambda_candidates : sequence of float, optional
        Grid searched by the regularized variants; defaults to
        ``exp(-20) ... exp(-1)``. A single value forces that lambda.
    seed : int, optional
        Seed of the random input layer.
    class_labels : sequence, optional
        Output column order; defaults to the sorted distinct labels.
    extractor : dict, optional
        Fitted feature-extractor parameters stored with the model.

    Returns
    -------
    model : ElmModel
    sweep : PressSweepResult or None
        PRESS per candidate for the regularized variants.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    x = linalg.as_matrix(x, "X")
    labels = list(labels)
    n = x.shape[0]
    if n != len(labels):
        raise DimensionError(f"X has {n} rows but {len(labels)} labels were given")
    if class_labels is None:
        class_labels = sorted(set(labels))
    class_labels = tuple(class_labels)
    if n < 2 or len(set(labels)) < 2:
        raise ValidationError("training needs at least two samples from at least two classes")
    if m >= n:
        warnings.warn(f"m={m} hidden units for N={n} samples; using the minimum-norm solve", stacklevel=2)

    v, b = init_hidden(x.shape[1], m, activation, seed)
    h = hidden_output(x, v, b, activation)
    t = encode_targets(labels, class_labels)

    sweep = None
    if variant in ("elm", "hesselm"):
        path = "direct" if variant == "elm" else "hessenberg"
        w = _Smoother(h, path).solve(floor_lambda(h), t)[0]
        lam = 0.0
    else:
        candidates = default_lambda_grid() if lambda_candidates is None else lambda_candidates
        candidates = [float(c) for c in np.atleast_1d(candidates)]
        if not candidates:
            raise ValidationError("regularized variants need at least one candidate lambda")
        if any(not (c >= 0 and math.isfinite(c)) for c in candidates):
            raise ValidationError("candidate lambdas must be finite and nonnegative")
        smoother = _Smoother(h, "gram-eigen" if variant == "r-elm" else "hessenberg")
        sweep = _sweep(smoother, t, candidates)
        lam = sweep.best_lambda
        if variant == "r-elm":
            w = linalg.ridge_solve_direct(h, t, lam)
        else:
            w = smoother.solve(lam, t)[0]

    metadata = {"n_train": n, "n_features": x.shape[1]}
    if sweep is not None:
        metadata["press"] = sweep.best_press
    model = ElmModel(
        variant=variant,
        activation=activation,
        lam=lam,
        class_labels=class_labels,
        seed=seed,
        input_weights=v,
        biases=b,
        output_weights=w,
        extractor=extractor,
        metadata=metadata,
    )
    return model, sweep


def predict(model: ElmModel, x):
    """Class of every row (argmax of the score columns, first class on ties) and the scores."""
    x = linalg.as_matrix(x, "X")
    if x.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {x.shape[1]}")
    scores = hidden_output(x, model.input_weights, model.biases, model.activation) @ model.output_weights
    winners = np.argmax(scores, axis=1)
    return [model.class_labels[i] for i in winners], scores


# persistence ---------------------------------------------------------------

def _encode(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return json.dumps(value)
        return format(value, ".17g")
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(item, (list, tuple, dict, np.ndarray)) for item in obj):
            return "[" + ", ".join(_encode(item) for item in obj) + "]"
        body = ",\n".join(inner + _encode(item, indent + 1) for item in obj)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + pad + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_model(model: ElmModel) -> str:
    """Versioned JSON text; every float is written with 17 significant digits."""
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "variant": model.variant,
        "activation": model.activation,
        "lambda": model.lam,
        "class_labels": [str(c) for c in model.class_labels],
        "seed": model.seed,
        "metadata": model.metadata,
        "extractor": model.extractor,
        "input_weights": model.input_weights,
        "biases": model.biases,
        "output_weights": model.output_weights,
    }
    return _encode(doc) + "\n"


def loads_model(text: str) -> ElmModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a model document")
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise ModelFormatError("model document has no format version")
    if version > MODEL_FORMAT_VERSION:
        raise FormatVersionError(
            f"model format version {version} is newer than supported version {MODEL_FORMAT_VERSION}"
        )
    try:
        return ElmModel(
            variant=doc["variant"],
            activation=doc["activation"],
            lam=float(doc["lambda"]),
            class_labels=tuple(doc["class_labels"]),
            seed=doc["seed"],
            input_weights=np.array(doc["input_weights"], dtype=np.float64, ndmin=2),
            biases=np.array(doc["biases"], dtype=np.float64),
            output_weights=np.array(doc["output_weights"], dtype=np.float64, ndmin=2),
            extractor=doc["extractor"],
            metadata=doc["metadata"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def save_model(model: ElmModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> ElmModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
