"""Linear one-vs-rest SVM with calibrated probabilities, plus the DoA rule.

Each class machine minimizes mean hinge loss + lambda * ||w||^2 with a
deterministic full-batch projected subgradient descent: fixed iteration count,
decaying step, best-objective iterate kept.  No sample shuffling is involved,
so training on the same data twice yields byte-identical models.  (Mapping to
the liblinear convention: C = 1 / (2 * lambda * n).)

Decision values turn into probabilities through per-class Platt sigmoids, fit
on the training decision values by the standard Newton procedure, then
normalized to sum to one.

The direction-only baseline thresholds the strongest azimuth: left below
-alpha_th, right above +alpha_th, front in between (boundaries inclusive).
It never predicts "none".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .beamform import DoaResponse, argmax_doa
from .features import LABELS, DoaFeature
from .util import canonical_json, config_hash, write_text

CLASS_ORDER = LABELS  # (left, front, right, none)

MODEL_FORMAT = "earshot-svm"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Model file magic or version does not match this code."""


@dataclass
class Prediction:
    label: str
    scores: np.ndarray
    probs: np.ndarray


@dataclass
class SvmModel:
    weights: np.ndarray  # (classes, dim)
    biases: np.ndarray  # (classes,)
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    calib_a: np.ndarray
    calib_b: np.ndarray
    lam: float
    seed: int
    feature_dim: int
    config: dict
    class_order: tuple = CLASS_ORDER
    objective_history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "class_order": list(self.class_order),
            "weights": [[float(v) for v in row] for row in self.weights],
            "biases": [float(v) for v in self.biases],
            "scaler_mean": [float(v) for v in self.scaler_mean],
            "scaler_std": [float(v) for v in self.scaler_std],
            "calib_a": [float(v) for v in self.calib_a],
            "calib_b": [float(v) for v in self.calib_b],
            "lambda": float(self.lam),
            "seed": int(self.seed),
            "feature_dim": int(self.feature_dim),
            "config": self.config,
        }


def _standardize_fit(x: np.ndarray):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return mean, std


def _fit_linear_svm(x: np.ndarray, y: np.ndarray, lam: float, iters: int):
    """Full-batch subgradient descent on mean hinge + lam * ||w||^2.

    Returns the best iterate and the best-so-far objective trace, which is
    non-increasing by construction.
    """
    n, d = x.shape
    lam2 = 2.0 * lam
    radius = 1.0 / np.sqrt(lam2) if lam2 > 0 else np.inf
    w = np.zeros(d)
    b = 0.0

    def objective(wv, bv):
        margins = y * (x @ wv + bv)
        hinge = np.maximum(0.0, 1.0 - margins).mean()
        return hinge + lam * float(wv @ wv)

    best_obj = objective(w, b)
    best_w, best_b = w.copy(), b
    trace = [best_obj]
    for t in range(1, iters + 1):
        margins = y * (x @ w + b)
        active = margins < 1.0
        grad_w = lam2 * w - (y[active] @ x[active]) / n
        grad_b = -y[active].sum() / n
        step = 1.0 / (lam2 * (t + 2))
        w = w - step * grad_w
        b = b - step * grad_b
        norm = np.linalg.norm(w)
        if norm > radius:
            w *= radius / norm
        obj = objective(w, b)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
        trace.append(best_obj)
    return best_w, best_b, trace


def _fit_platt(scores: np.ndarray, positive: np.ndarray, max_iter: int = 100):
    """Platt's sigmoid fit: p = 1 / (1 + exp(a * s + b)), Newton with backtracking."""
    n1 = int(positive.sum())
    n0 = len(positive) - n1
    hi = (n1 + 1.0) / (n1 + 2.0)
    lo = 1.0 / (n0 + 2.0)
    target = np.where(positive, hi, lo)
    a, b = 0.0, np.log((n0 + 1.0) / (n1 + 1.0))

    def nll(av, bv):
        z = av * scores + bv
        # log(1 + exp(z)) evaluated stably on both tails
        softplus = np.where(z >= 0, z + np.log1p(np.exp(-z)), np.log1p(np.exp(z)))
        return float(np.sum(target * z + softplus - z))

    err = nll(a, b)
    for _ in range(max_iter):
        z = a * scores + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        d1 = target - p
        grad_a = float(np.dot(scores, d1))
        grad_b = float(d1.sum())
        if abs(grad_a) < 1e-10 and abs(grad_b) < 1e-10:
            break
        d2 = p * (1.0 - p)
        haa = float(np.dot(scores * scores, d2)) + 1e-12
        hbb = float(d2.sum()) + 1e-12
        hab = float(np.dot(scores, d2))
        det = haa * hbb - hab * hab
        da = -(hbb * grad_a - hab * grad_b) / det
        db = -(-hab * grad_a + haa * grad_b) / det
        step = 1.0
        while step >= 1e-10:
            new_err = nll(a + step * da, b + step * db)
            if new_err < err + 1e-12:
                a += step * da
                b += step * db
                err = new_err
                break
            step /= 2.0
        else:
            break
    return a, b


def train(samples, lam: float = 1.0, seed: int = 0, iters: int = 400,
          standardize: bool = True) -> SvmModel:
    """Fit the one-vs-rest machines and their calibration on labeled samples.

    The seed is recorded in the model for provenance; the solver itself is
    deterministic and does not consume randomness.
    """
    samples = list(samples)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if len(samples) < 2:
        raise ValueError("need at least 2 training samples")
    labels = {s.label for s in samples}
    if len(labels) < 2:
        raise ValueError("training data must contain at least 2 distinct labels")
    dims = {s.feature.flat.size for s in samples}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions in training data: {sorted(dims)}")

    x = np.stack([s.feature.flat for s in samples])
    if standardize:
        mean, std = _standardize_fit(x)
    else:
        mean = np.zeros(x.shape[1])
        std = np.ones(x.shape[1])
    z = (x - mean) / std

    n_classes = len(CLASS_ORDER)
    weights = np.zeros((n_classes, x.shape[1]))
    biases = np.zeros(n_classes)
    calib_a = np.zeros(n_classes)
    calib_b = np.zeros(n_classes)
    history = []
    for c, label in enumerate(CLASS_ORDER):
        y = np.where(np.array([s.label for s in samples]) == label, 1.0, -1.0)
        w, b, trace = _fit_linear_svm(z, y, lam, iters)
        weights[c] = w
        biases[c] = b
        history.append(trace)
        scores = z @ w + b
        calib_a[c], calib_b[c] = _fit_platt(scores, y > 0)

    config = samples[0].feature.config.to_dict()
    return SvmModel(
        weights=weights,
        biases=biases,
        scaler_mean=mean,
        scaler_std=std,
        calib_a=calib_a,
        calib_b=calib_b,
        lam=lam,
        seed=seed,
        feature_dim=x.shape[1],
        config=config,
        objective_history=history,
    )


def decision_values(model: SvmModel, flat: np.ndarray) -> np.ndarray:
    z = (np.asarray(flat, dtype=np.float64) - model.scaler_mean) / model.scaler_std
    return model.weights @ z + model.biases


def predict(model: SvmModel, feature) -> Prediction:
    """Classify one feature; ties in the probabilities go to the first class."""
    flat = feature.flat if isinstance(feature, DoaFeature) else np.asarray(feature)
    if flat.size != model.feature_dim:
        raise ValueError(f"feature has {flat.size} dims, model expects {model.feature_dim}")
    scores = decision_values(model, flat)
    z = model.calib_a * scores + model.calib_b
    raw = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
    total = raw.sum()
    probs = raw / total if total > 1e-300 else np.full(len(raw), 1.0 / len(raw))
    label = model.class_order[int(np.argmax(probs))]
    return Prediction(label=label, scores=scores, probs=probs)


def classify_azimuth(alpha_max: float, alpha_th: float = 50.0) -> str:
    """Threshold rule on the strongest direction; boundaries count as front."""
    if not 0.0 <= alpha_th <= 90.0:
        raise ValueError("alpha_th must lie in [0, 90]")
    if alpha_max < -alpha_th:
        return "left"
    if alpha_max > alpha_th:
        return "right"
    return "front"


def doa_baseline(response: DoaResponse, alpha_th: float = 50.0) -> str:
    """Classify a DoA response by thresholding its strongest azimuth."""
    return classify_azimuth(argmax_doa(response), alpha_th)


def save_model(model: SvmModel, path, extra: dict | None = None) -> None:
    """Serialize the model as canonical JSON, with optional provenance fields."""
    payload = model.to_dict()
    payload["config_hash"] = config_hash(payload["config"])
    payload.update(extra or {})
    write_text(path, canonical_json(payload) + "\n")


def load_model(path) -> SvmModel:
    with open(path) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not an {MODEL_FORMAT} model file")
    if payload.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: model version {payload.get('version')} unsupported "
            f"(this build reads version {MODEL_VERSION})"
        )
    return SvmModel(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        biases=np.asarray(payload["biases"], dtype=np.float64),
        scaler_mean=np.asarray(payload["scaler_mean"], dtype=np.float64),
        scaler_std=np.asarray(payload["scaler_std"], dtype=np.float64),
        calib_a=np.asarray(payload["calib_a"], dtype=np.float64),
        calib_b=np.asarray(payload["calib_b"], dtype=np.float64),
        lam=float(payload["lambda"]),
        seed=int(payload["seed"]),
        feature_dim=int(payload["feature_dim"]),
        config=payload["config"],
        class_order=tuple(payload["class_order"]),
    )
