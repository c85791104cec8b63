"""Fit and predict for RVFL, RVFLwoDL, RKM and R2KM.

Multiclass problems are handled one-vs-all: targets are one-hot rows with
+1 for the true class and -1 elsewhere, and predictions decode by row argmax
with ties going to the lowest class index.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import CodecError, DegenerateLabelsError, DimensionError, ParameterError
from .kernels import Gaussian, Linear, combined_cross_gram, combined_gram, cross_gram, gram
from .numerics import EXTENDED, as_matrix, cholesky_with_jitter, solve_spd
from .random_features import Activation, RandomLayer, init_layer, transform


class ModelKind(str, enum.Enum):
    RVFL = "rvfl"
    RVFLWODL = "rvflwodl"
    RKM = "rkm"
    R2KM = "r2km"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown model kind {value!r}") from None


@dataclass(frozen=True)
class LabelCodec:
    class_ids: tuple

    def __post_init__(self):
        if len(set(self.class_ids)) != len(self.class_ids):
            raise CodecError("class ids must be distinct")
        if len(self.class_ids) < 2:
            raise CodecError("need at least two classes")

    @property
    def n_classes(self):
        return len(self.class_ids)

    def indices(self, labels):
        lookup = {c: i for i, c in enumerate(self.class_ids)}
        try:
            return np.array([lookup[lab] for lab in labels], dtype=np.int64)
        except KeyError as exc:
            raise CodecError(f"unknown label {exc.args[0]!r}") from None

    def encode(self, labels):
        idx = self.indices(labels)
        y = -np.ones((len(idx), self.n_classes))
        y[np.arange(len(idx)), idx] = 1.0
        return y

    def decode_indices(self, scores):
        return np.argmax(as_matrix(scores, "scores"), axis=1)

    def decode(self, scores):
        return [self.class_ids[i] for i in self.decode_indices(scores)]


def encode_labels(labels, codec):
    return codec.encode(labels)


def decode_scores(scores, codec):
    return codec.decode(scores)


def _check_positive(**params):
    for name, value in params.items():
        if not (np.isfinite(value) and value > 0):
            raise ParameterError(f"{name} must be positive, got {value}")


def _check_features(model_dim, x):
    x = as_matrix(x, "x")
    if x.shape[1] != model_dim:
        raise DimensionError(f"model expects {model_dim} features, got {x.shape[1]}")
    return x


class _Predictor:
    codec: LabelCodec | None

    def decision_function(self, x):  # pragma: no cover - overridden
        raise NotImplementedError

    def predict(self, x):
        """Decoded labels for classifiers, raw outputs (1-D if single target) for regressors."""
        scores = self.decision_function(x)
        if self.codec is None:
            return scores[:, 0] if scores.shape[1] == 1 else scores
        return self.codec.decode(scores)

    def predict_indices(self, x):
        if self.codec is None:
            raise CodecError("regression model has no class indices")
        return self.codec.decode_indices(self.decision_function(x))


# --------------------------------------------------------------------- RVFL


@dataclass(frozen=True, eq=False)
class RvflModel(_Predictor):
    layer: RandomLayer
    direct_link: bool
    output_weights: np.ndarray  # W2, (m + h_l, c) or (h_l, c)
    c_reg: float
    codec: LabelCodec | None = None

    def features(self, x):
        x = _check_features(self.layer.input_dim, x)
        h1 = transform(self.layer, x)
        return np.hstack([x, h1]) if self.direct_link else h1

    def decision_function(self, x):
        return self.features(x) @ self.output_weights


def fit_rvfl(
    x,
    y_encoded,
    c_reg,
    hidden_nodes,
    activation,
    seed,
    direct_link=True,
    codec=None,
    branch="auto",
    layer=None,
):
    """Ridge-solve the RVFL output weights.

    ``branch`` is ``"auto"`` (primal when the feature count is at most n,
    dual otherwise), ``"primal"`` or ``"dual"``. A prebuilt ``layer`` skips
    the random draw.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y_encoded, "y_encoded")
    if x.shape[0] == 0:
        raise ParameterError("empty training set")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, targets have {y.shape[0]}")
    _check_positive(C=c_reg)
    if layer is None:
        layer = init_layer(x.shape[1], int(hidden_nodes), activation, seed)
    h1 = transform(layer, x)
    h2 = np.hstack([x, h1]) if direct_link else h1
    n, p = h2.shape
    if branch == "auto":
        branch = "primal" if p <= n else "dual"
    if branch == "primal":
        w2 = solve_spd(h2.T @ h2 + np.eye(p) / c_reg, h2.T @ y)
    elif branch == "dual":
        w2 = h2.T @ solve_spd(h2 @ h2.T + np.eye(n) / c_reg, y)
    else:
        raise ParameterError(f"unknown branch {branch!r}")
    w2 = np.asarray(w2, dtype=np.float64)
    return RvflModel(layer, bool(direct_link), w2, float(c_reg), codec)


# ---------------------------------------------------------------------- RKM


@dataclass(frozen=True, eq=False)
class RkmModel(_Predictor):
    """Restricted kernel machine with the weights eliminated.

    ``hidden`` holds one column of hidden features per binary machine;
    ``labels`` the matching +-1 targets (real targets for regression).
    """

    x_train: np.ndarray
    labels: np.ndarray  # (n, q)
    hidden: np.ndarray  # (n, q)
    bias: np.ndarray  # (q,)
    gamma: float
    eta: float
    kernel: Linear | Gaussian
    codec: LabelCodec | None = None
    regression: bool = False

    def raw_scores(self, x):
        x = _check_features(self.x_train.shape[1], x)
        k = cross_gram(self.x_train, x, self.kernel)
        coef = self.hidden if self.regression else self.hidden * self.labels
        # accumulate in the dtype of the stored solution, report float64
        return np.asarray(k.T @ coef / self.gamma + self.bias, dtype=np.float64)

    def decision_function(self, x):
        s = self.raw_scores(x)
        if self.codec is not None and self.codec.n_classes == 2 and s.shape[1] == 1:
            # one binary machine, +1 meaning class index 0; ties stay with class 0
            return np.hstack([s, -s])
        return s

    def predict_signs(self, x):
        """Binary +-1 predictions with sign(0) mapped to +1."""
        return np.where(self.raw_scores(x) >= 0, 1.0, -1.0)


def _rkm_solve(k, targets, gamma, eta, max_steps=10):
    """Shared solve for ``((1/gamma) K + eta I) a + b 1 = t`` with ``1'a = 0``.

    Returns ``(a, b)`` with one column of ``a`` and one entry of ``b`` per
    target column. The bordered system is reduced through its Schur
    complement on a float64 Cholesky factor and refined in longdouble.
    """
    n = k.shape[0]
    system = k.astype(EXTENDED) / gamma + eta * np.eye(n, dtype=EXTENDED)
    factor, _ = cholesky_with_jitter(system.astype(np.float64))
    u = linalg.cho_solve(factor, np.ones(n), check_finite=False)
    denom = float(u.sum())
    if not (np.isfinite(denom) and denom > 0):
        raise DegenerateLabelsError("bordered RKM system is singular")

    t = targets.astype(EXTENDED)
    a = np.zeros_like(t)
    b = np.zeros(t.shape[1], dtype=EXTENDED)
    r_top, r_bottom = t, np.zeros_like(b)
    tol = 8 * np.finfo(EXTENDED).eps
    prev = np.inf
    for _ in range(max_steps):
        w = linalg.cho_solve(factor, r_top.astype(np.float64), check_finite=False)
        db = (w.sum(axis=0) - r_bottom.astype(np.float64)) / denom
        da = w - np.outer(u, db)
        a += da
        b += db
        r_top = t - system @ a - b
        r_bottom = -a.sum(axis=0)
        if not np.all(np.isfinite(a)):
            raise DegenerateLabelsError("bordered RKM system is singular")
        scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
        step = float(max(np.max(np.abs(da)), np.max(np.abs(db))))
        if step <= tol * scale or step > 0.5 * prev:
            break
        prev = step
    return a, b


def fit_rkm(x, y_labels, gamma, eta, kernel, codec=None):
    """Stationary point of the RKM objective for +-1 labels.

    ``y_labels`` is a +-1 vector (one machine) or an (n, q) +-1 matrix
    (q one-vs-all machines). Setting the derivatives in W, b and h_i to zero
    and eliminating W gives, per machine, the bordered system

        [(1/gamma) D K D + eta I   y] [h]   [1]
        [ y'                       0] [b] = [0],    D = diag(y).

    Since D^2 = I, ``D K D + gamma eta I = D (K + gamma eta I) D`` and all
    machines share one Cholesky factor.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y_labels, "y_labels")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, labels have {y.shape[0]}")
    if not np.all(np.abs(y) == 1.0):
        raise ParameterError("RKM classification labels must be +-1")
    _check_positive(gamma=gamma, eta=eta)
    k = gram(x, kernel)
    # with t = y the shared solve returns a = D h, so h = y * a
    a, b = _rkm_solve(k, y, gamma, eta)
    return RkmModel(x, y, y * a, b, float(gamma), float(eta), kernel, codec)


def fit_rkm_regression(x, targets, gamma, eta, kernel):
    """Least-squares form of the RKM for real targets.

    Solves ``((1/gamma) K + eta I) h + b 1 = y`` with ``1'h = 0``; the
    prediction is ``(1/gamma) sum_j h_j k(x_j, x) + b``.
    """
    x = as_matrix(x, "x")
    t = as_matrix(targets, "targets")
    if x.shape[0] != t.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, targets have {t.shape[0]}")
    _check_positive(gamma=gamma, eta=eta)
    h, b = _rkm_solve(gram(x, kernel), t, gamma, eta)
    return RkmModel(x, t, h, b, float(gamma), float(eta), kernel, None, regression=True)


def rkm_stationarity_residuals(model):
    """Max-abs residuals of the three stationarity conditions at the fit.

    Returns ``{"W": ..., "b": ..., "h": ...}``, evaluated in longdouble. W is
    represented by its kernel expansion ``W = sum_j phi(x_j) c_j`` with the
    coefficients ``c`` the model predicts with; the W residual is the feature
    space norm ``||gamma W - sum_i phi(x_i) y_i h_i||`` (per machine, max).
    """
    y = model.labels.astype(EXTENDED)
    h = model.hidden.astype(EXTENDED)
    k = gram(model.x_train, model.kernel).astype(EXTENDED)
    c = y * h / model.gamma
    d = model.gamma * c - y * h
    res_w = np.sqrt(np.maximum(np.einsum("ij,ik,kj->j", d, k, d), 0.0))
    f = k @ c + model.bias
    res_h = 1.0 - f * y - model.eta * h
    res_b = (y * h).sum(axis=0)
    return {
        "W": float(np.max(res_w)),
        "b": float(np.max(np.abs(res_b))),
        "h": float(np.max(np.abs(res_h))),
    }


# --------------------------------------------------------------------- R2KM


@dataclass(frozen=True, eq=False)
class R2kmModel(_Predictor):
    x_train: np.ndarray
    hidden: np.ndarray  # H, (n, c)
    eta: float
    lam: float
    sigma: float
    codec: LabelCodec | None = None

    def decision_function(self, x):
        x = _check_features(self.x_train.shape[1], x)
        k = combined_cross_gram(self.x_train, x, self.sigma)
        return np.asarray(k.T @ self.hidden / self.eta, dtype=np.float64)

    def train_scores(self):
        """``(1/eta)(Omega + Omega_hat) H``, the fitted outputs on the training set."""
        k = combined_gram(self.x_train, self.sigma)
        return np.asarray(k @ self.hidden / self.eta, dtype=np.float64)


def fit_r2km(x, y_encoded, eta, lam, sigma, codec=None):
    """Solve ``((1/eta)(Omega + Omega_hat) + lam I) H = Y``.

    Omega is the linear Gram and Omega_hat the Gaussian Gram of the training
    inputs.
    """
    x = as_matrix(x, "x")
    y = as_matrix(y_encoded, "y_encoded")
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows, targets have {y.shape[0]}")
    _check_positive(eta=eta, lam=lam, sigma=sigma)
    n = x.shape[0]
    system = combined_gram(x, sigma).astype(EXTENDED) / eta + lam * np.eye(n, dtype=EXTENDED)
    hidden = solve_spd(system, y)
    return R2kmModel(x, hidden, float(eta), float(lam), float(sigma), codec)


# ----------------------------------------------------------------- dispatch

PARAM_NAMES = {
    ModelKind.RVFL: ("C", "hidden_nodes", "activation"),
    ModelKind.RVFLWODL: ("C", "hidden_nodes", "activation"),
    ModelKind.RKM: ("gamma", "eta", "sigma"),
    ModelKind.R2KM: ("eta", "lam", "sigma"),
}


def fit_model(kind, x, target, params, codec=None, seed=0):
    """Fit any model kind from a parameter dict.

    ``target`` holds class labels (members of ``codec.class_ids``) for
    classification, or real values when ``codec`` is None.
    """
    kind = ModelKind.parse(kind)
    missing = [p for p in PARAM_NAMES[kind] if p not in params]
    if missing:
        raise ParameterError(f"{kind.value} needs parameters {missing}")
    if codec is None:
        y = as_matrix(np.asarray(target, dtype=np.float64), "target")
    else:
        y = codec.encode(target)

    if kind in (ModelKind.RVFL, ModelKind.RVFLWODL):
        return fit_rvfl(
            x,
            y,
            params["C"],
            params["hidden_nodes"],
            params["activation"],
            seed,
            direct_link=kind is ModelKind.RVFL,
            codec=codec,
        )
    if kind is ModelKind.R2KM:
        return fit_r2km(x, y, params["eta"], params["lam"], params["sigma"], codec)
    kernel = Gaussian(params["sigma"])
    if codec is None:
        return fit_rkm_regression(x, y, params["gamma"], params["eta"], kernel)
    if codec.n_classes == 2:
        y = y[:, :1]
    return fit_rkm(x, y, params["gamma"], params["eta"], kernel, codec)


def model_kind(model):
    if isinstance(model, RvflModel):
        return ModelKind.RVFL if model.direct_link else ModelKind.RVFLWODL
    if isinstance(model, RkmModel):
        return ModelKind.RKM
    if isinstance(model, R2kmModel):
        return ModelKind.R2KM
    raise TypeError(f"not a model: {type(model).__name__}")


# ------------------------------------------------------------ serialization

FORMAT_VERSION = 1


def _kernel_meta(kernel):
    if isinstance(kernel, Gaussian):
        return {"kind": "gaussian", "sigma": kernel.sigma}
    return {"kind": "linear"}


def _kernel_from_meta(meta):
    return Gaussian(meta["sigma"]) if meta["kind"] == "gaussian" else Linear()


def save_model(path, model, extra=None):
    """Write ``model`` to an ``.npz`` container with a JSON header.

    ``extra`` is an optional dict of named arrays stored alongside (for
    instance scaler statistics).
    """
    kind = model_kind(model)
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind.value,
        "class_ids": None
        if model.codec is None
        else [c.item() if isinstance(c, np.generic) else c for c in model.codec.class_ids],
    }
    arrays = {}
    if isinstance(model, RvflModel):
        meta.update(
            c_reg=model.c_reg,
            direct_link=model.direct_link,
            activation=int(model.layer.activation),
            seed=model.layer.seed,
        )
        arrays.update(
            weights=model.layer.weights,
            biases=model.layer.biases,
            output_weights=model.output_weights,
        )
    elif isinstance(model, RkmModel):
        meta.update(
            gamma=model.gamma,
            eta=model.eta,
            kernel=_kernel_meta(model.kernel),
            regression=model.regression,
        )
        arrays.update(
            x_train=model.x_train, labels=model.labels, hidden=model.hidden, bias=model.bias
        )
    else:
        meta.update(eta=model.eta, lam=model.lam, sigma=model.sigma)
        arrays.update(x_train=model.x_train, hidden=model.hidden)
    for name, value in (extra or {}).items():
        arrays[f"extra__{name}"] = np.asarray(value)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(model, extra)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    if meta.get("format_version") != FORMAT_VERSION:
        raise ParameterError(f"unsupported model format {meta.get('format_version')}")
    extra = {k[len("extra__"):]: v for k, v in arrays.items() if k.startswith("extra__")}
    codec = None if meta["class_ids"] is None else LabelCodec(tuple(meta["class_ids"]))
    kind = ModelKind.parse(meta["kind"])
    if kind in (ModelKind.RVFL, ModelKind.RVFLWODL):
        layer = RandomLayer(
            arrays["weights"], arrays["biases"], Activation(meta["activation"]), meta["seed"]
        )
        model = RvflModel(
            layer, meta["direct_link"], arrays["output_weights"], meta["c_reg"], codec
        )
    elif kind is ModelKind.RKM:
        model = RkmModel(
            arrays["x_train"],
            arrays["labels"],
            arrays["hidden"],
            arrays["bias"],
            meta["gamma"],
            meta["eta"],
            _kernel_from_meta(meta["kernel"]),
            codec,
            meta["regression"],
        )
    else:
        model = R2kmModel(
            arrays["x_train"], arrays["hidden"], meta["eta"], meta["lam"], meta["sigma"], codec
        )
    return model, extra
