"""RBF-kernel SVM: scaling, SMO training, one-vs-one voting, persistence.

The binary trainer is a Platt-style SMO made fully deterministic: the
examined point is the first KKT violator in index order, the partner is
the candidate with the largest exact dual-objective gain, and every
fallback scan runs in ascending index order. No randomness enters
training; the seed elsewhere only shuffles cross-validation folds.

On return from training every point satisfies the KKT conditions within
`tolerance`:

    alpha_i = 0      =>  y_i f(x_i) >= 1 - tol
    0 < alpha_i < C  =>  |y_i f(x_i) - 1| <= tol
    alpha_i = C      =>  y_i f(x_i) <= 1 + tol

and all duals lie in [0, C] exactly (clipping is part of the update).
"""

from __future__ import annotations

import json
import random
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ModelFormatError
from .features import FeatureTable

_STEP_EPS = 1e-12
_ETA_EPS = 1e-15


@dataclass(frozen=True)
class SvmHyperParams:
    c: float
    gamma: float
    tolerance: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not (0 < self.tolerance <= 1e-1):
            raise ValueError("tolerance must lie in (0, 1e-1]")
        if self.max_passes < 1:
            raise ValueError("max_passes must be positive")


@dataclass(frozen=True)
class FeatureScaler:
    """Per-dimension z-score parameters fitted on the training set."""

    means: np.ndarray
    std_devs: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.std_devs, dtype=np.float64)
        if means.ndim != 1 or means.shape != stds.shape:
            raise ValueError("means and std_devs must be 1-D and of equal length")
        if np.any(stds <= 0):
            raise ValueError("std_devs must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "std_devs", stds)


def fit_scaler(table: FeatureTable) -> FeatureScaler:
    """Fit per-dimension mean/std; zero-variance dimensions divide by 1."""
    if len(table) == 0:
        raise ValueError("cannot fit a scaler to an empty table")
    x = table.matrix()
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 0, stds, 1.0)
    return FeatureScaler(means=means, std_devs=stds)


def apply_scaler(scaler: FeatureScaler, v) -> np.ndarray:
    """Standardize a single vector or a (n, d) matrix."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1] != scaler.means.size:
        raise ValueError(f"expected {scaler.means.size} features, got {arr.shape[-1]}")
    return (arr - scaler.means) / scaler.std_devs


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise ValueError(f"kernel arguments must be equal-length vectors, got {xv.shape} and {yv.shape}")
    d = xv - yv
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(a, b, gamma: float) -> np.ndarray:
    """Kernel matrix K[i, j] = exp(-gamma * ||a_i - b_j||^2)."""
    am = np.atleast_2d(np.asarray(a, dtype=np.float64))
    bm = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if am.shape[1] != bm.shape[1]:
        raise ValueError("dimension mismatch between kernel arguments")
    sq = (
        np.sum(am * am, axis=1)[:, None]
        + np.sum(bm * bm, axis=1)[None, :]
        - 2.0 * (am @ bm.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@dataclass(frozen=True)
class BinarySvm:
    """One trained binary machine: f(x) = sum_i dual_i K(sv_i, x) + bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    hyperparams: SvmHyperParams
    support_indices: np.ndarray
    n_train: int

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        dual = np.asarray(self.dual_coefs, dtype=np.float64)
        idx = np.asarray(self.support_indices, dtype=np.intp)
        if sv.ndim != 2 or sv.shape[0] < 1:
            raise ValueError("a trained machine needs at least one support vector")
        if dual.shape != (sv.shape[0],) or idx.shape != (sv.shape[0],):
            raise ValueError("dual_coefs/support_indices must match the support vector count")
        if np.any(np.abs(dual) > self.hyperparams.c):
            raise ValueError("dual coefficients exceed the box constraint C")
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", dual)
        object.__setattr__(self, "support_indices", idx)

    def decision_values(self, x) -> np.ndarray:
        """Decision function for a (n, d) batch of scaled feature vectors."""
        xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
        k = rbf_gram(xm, self.support_vectors, self.hyperparams.gamma)
        return k @ self.dual_coefs + self.bias


def dual_objective(svm: BinarySvm) -> float:
    """W(alpha) = sum(alpha) - 1/2 d^T K d, computable from the SVs alone."""
    k = rbf_gram(svm.support_vectors, svm.support_vectors, svm.hyperparams.gamma)
    np.fill_diagonal(k, 1.0)
    d = svm.dual_coefs
    return float(np.sum(np.abs(d)) - 0.5 * d @ k @ d)


def _bound_eps(c: float) -> float:
    return 1e-10 * c


def _kkt_violations(alpha: np.ndarray, y: np.ndarray, e: np.ndarray, c: float) -> np.ndarray:
    """Per-point violation of the KKT conditions; margin m = y*f - 1 = y*E."""
    eps = _bound_eps(c)
    m = y * e
    at_lower = alpha <= eps
    at_upper = alpha >= c - eps
    return np.where(
        at_lower, np.maximum(0.0, -m), np.where(at_upper, np.maximum(0.0, m), np.abs(m))
    )


def _minimax_bias(alpha: np.ndarray, y: np.ndarray, u: np.ndarray, c: float) -> float:
    """Bias minimizing the worst KKT violation for fixed alphas.

    Platt's running bias can drift enough to show phantom violations no
    pair step can repair (Keerthi's critique); recentering on the
    feasible interval [max lower, min upper] of per-point bias bounds
    restores an honest convergence test. u = f(x) - bias.
    """
    eps = _bound_eps(c)
    at_lower = alpha <= eps
    at_upper = alpha >= c - eps
    interior = ~(at_lower | at_upper)
    pos = y > 0
    t = y - u  # bias putting the point exactly on its margin
    needs_ge = (pos & (at_lower | interior)) | (~pos & (at_upper | interior))
    needs_le = (pos & (at_upper | interior)) | (~pos & (at_lower | interior))
    lo = float(t[needs_ge].max()) if needs_ge.any() else -np.inf
    hi = float(t[needs_le].min()) if needs_le.any() else np.inf
    if not np.isfinite(lo):
        return hi if np.isfinite(hi) else 0.0
    if not np.isfinite(hi):
        return lo
    return 0.5 * (lo + hi)


def _smo(k: np.ndarray, y: np.ndarray, params: SvmHyperParams):
    """Sequential minimal optimization on a precomputed Gram matrix.

    Returns (alpha, bias, passes). Raises ConvergenceError if the pass
    budget is exhausted or no admissible step remains while violations
    persist.
    """
    n = y.size
    c = params.c
    tol = params.tolerance
    eps = _bound_eps(c)
    alpha = np.zeros(n)
    bias = 0.0
    err = -y.astype(np.float64)  # E_i = f(x_i) - y_i, f == 0 initially

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias, err
        if i1 == i2:
            return False
        a1o, a2o = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = err[i1], err[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1o + a2o - c), min(c, a1o + a2o)
        else:
            lo, hi = max(0.0, a2o - a1o), min(c, c + a2o - a1o)
        if hi - lo <= _STEP_EPS:
            return False
        k11, k12, k22 = k[i1, i1], k[i1, i2], k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > _ETA_EPS:
            a2 = a2o + y2 * (e1 - e2) / eta
            a2 = min(max(a2, lo), hi)
        else:
            # Non-positive curvature: the dual gain is linear or convex in
            # the step, so the maximum sits at an interval end.
            slope = y2 * (e1 - e2)
            gain_lo = slope * (lo - a2o) - 0.5 * eta * (lo - a2o) ** 2
            gain_hi = slope * (hi - a2o) - 0.5 * eta * (hi - a2o) ** 2
            if max(gain_lo, gain_hi) <= _STEP_EPS:
                return False
            a2 = lo if gain_lo >= gain_hi else hi
        if abs(a2 - a2o) < _STEP_EPS * (a2 + a2o + _STEP_EPS):
            return False
        a1 = a1o + s * (a2o - a2)
        a1 = min(max(a1, 0.0), c)  # box exact; arithmetic roundoff only
        d1, d2 = a1 - a1o, a2 - a2o
        b1 = bias - e1 - y1 * d1 * k11 - y2 * d2 * k12
        b2 = bias - e2 - y1 * d1 * k12 - y2 * d2 * k22
        if eps < a1 < c - eps:
            new_bias = b1
        elif eps < a2 < c - eps:
            new_bias = b2
        else:
            new_bias = 0.5 * (b1 + b2)
        err += y1 * d1 * k[i1] + y2 * d2 * k[i2] + (new_bias - bias)
        alpha[i1] = a1
        alpha[i2] = a2
        bias = new_bias
        return True

    def examine(i2: int) -> bool:
        r2 = y[i2] * err[i2]
        a2 = alpha[i2]
        if not ((r2 < -tol and a2 < c - eps) or (r2 > tol and a2 > eps)):
            return False
        interior = np.flatnonzero((alpha > eps) & (alpha < c - eps))
        if interior.size > 0:
            eta_vec = k[i2, i2] + k[interior, interior] - 2.0 * k[i2, interior]
            usable = eta_vec > _ETA_EPS
            gain = np.full(interior.size, -1.0)
            gain[usable] = (err[interior[usable]] - err[i2]) ** 2 / (2.0 * eta_vec[usable])
            best = interior[int(np.argmax(gain))]
            if gain.max() > 0 and take_step(best, i2):
                return True
            for j in interior:
                if j != best and take_step(int(j), i2):
                    return True
        for j in range(n):
            if take_step(j, i2):
                return True
        return False

    passes = 0
    examine_all = True
    stalled = 0
    while passes < params.max_passes:
        passes += 1
        if examine_all:
            targets = range(n)
        else:
            targets = np.flatnonzero((alpha > eps) & (alpha < c - eps))
        changed = 0
        for i2 in targets:
            if examine(int(i2)):
                changed += 1
        if examine_all:
            if changed == 0:
                # Recenter the bias and refresh the error cache before
                # trusting convergence.
                u = (alpha * y) @ k
                bias = _minimax_bias(alpha, y, u, c)
                err = u + bias - y
                worst = float(_kkt_violations(alpha, y, err, c).max()) if n else 0.0
                if worst <= tol:
                    return alpha, bias, passes
                stalled += 1
                if stalled >= 3:
                    raise ConvergenceError(
                        f"SMO stalled with max KKT violation {worst:.3e} > tolerance {tol:g}",
                        max_violation=worst,
                    )
            else:
                examine_all = False
                stalled = 0
        elif changed == 0:
            examine_all = True
    u = (alpha * y) @ k
    bias = _minimax_bias(alpha, y, u, c)
    err = u + bias - y
    worst = float(_kkt_violations(alpha, y, err, c).max())
    raise ConvergenceError(
        f"SMO did not converge within {params.max_passes} passes; "
        f"max KKT violation {worst:.3e} > tolerance {tol:g}",
        max_violation=worst,
    )


def train_binary(pos, neg, params: SvmHyperParams) -> BinarySvm:
    """Train one soft-margin binary machine on already scaled features.

    `pos` rows get label +1, `neg` rows -1.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise ValueError("both classes must be non-empty")
    if pos.shape[1] != neg.shape[1]:
        raise ValueError("positive and negative features disagree in dimension")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise ValueError("training features must be finite")
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    gram = rbf_gram(x, x, params.gamma)
    np.fill_diagonal(gram, 1.0)
    alpha, bias, _ = _smo(gram, y, params)
    sv = np.flatnonzero(alpha > _bound_eps(params.c))
    if sv.size == 0:  # unreachable at convergence with both labels present
        raise ConvergenceError("trainer produced no support vectors", max_violation=np.inf)
    return BinarySvm(
        support_vectors=x[sv].copy(),
        dual_coefs=alpha[sv] * y[sv],
        bias=float(bias),
        hyperparams=params,
        support_indices=sv,
        n_train=int(x.shape[0]),
    )


@dataclass(frozen=True)
class SvmModel:
    """One-vs-one multi-class model over the resolution classes."""

    classes: tuple[int, ...]
    scaler: FeatureScaler
    binaries: tuple[tuple[int, int, BinarySvm], ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.classes)
        if n < 2:
            raise ValueError("a multi-class model needs at least 2 classes")
        if tuple(sorted(self.classes)) != tuple(self.classes):
            raise ValueError("classes must be sorted ascending by side")
        if len(self.binaries) != n * (n - 1) // 2:
            raise ValueError(
                f"expected {n * (n - 1) // 2} binaries for {n} classes, got {len(self.binaries)}"
            )
        seen = set()
        for i, j, _ in self.binaries:
            if not (0 <= i < j < n):
                raise ValueError(f"bad class pair indices ({i}, {j})")
            seen.add((i, j))
        if len(seen) != len(self.binaries):
            raise ValueError("duplicate class pair among binaries")


def train_multiclass(table: FeatureTable, params: SvmHyperParams, metadata: dict | None = None) -> SvmModel:
    """Fit scaler + the 10 (for 5 classes) pairwise machines on a table."""
    classes = table.class_sides()
    if len(classes) < 2:
        raise ValueError("training table must contain at least 2 classes")
    scaler = fit_scaler(table)
    x = apply_scaler(scaler, table.matrix())
    labels = table.labels()
    binaries = []
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            pos = x[labels == classes[i]]
            neg = x[labels == classes[j]]
            binaries.append((i, j, train_binary(pos, neg, params)))
    return SvmModel(
        classes=tuple(classes),
        scaler=scaler,
        binaries=tuple(binaries),
        metadata=dict(metadata or {}),
    )


def _vote_scaled(model: SvmModel, x_scaled: np.ndarray):
    """Vote counts and winner-side |decision| mass per class for a batch."""
    n = x_scaled.shape[0]
    n_classes = len(model.classes)
    votes = np.zeros((n, n_classes), dtype=np.int64)
    weight = np.zeros((n, n_classes), dtype=np.float64)
    for i, j, svm in model.binaries:
        f = svm.decision_values(x_scaled)
        pos = f > 0
        votes[pos, i] += 1
        votes[~pos, j] += 1
        weight[pos, i] += np.abs(f[pos])
        weight[~pos, j] += np.abs(f[~pos])
    return votes, weight


def _select_class(model: SvmModel, votes: np.ndarray, weight: np.ndarray) -> int:
    # argmax votes; ties by summed |decision|, then the smaller side wins
    order = sorted(
        range(len(model.classes)),
        key=lambda k: (-votes[k], -weight[k], model.classes[k]),
    )
    return model.classes[order[0]]


def predict_batch(model: SvmModel, vectors) -> np.ndarray:
    """Predict the resolution class for each raw beta vector in a batch."""
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    xs = apply_scaler(model.scaler, x)
    votes, weight = _vote_scaled(model, xs)
    return np.array(
        [_select_class(model, votes[r], weight[r]) for r in range(x.shape[0])], dtype=np.int64
    )


def predict_multiclass(model: SvmModel, v) -> int:
    """One-vs-one majority vote for a single raw beta vector."""
    return int(predict_batch(model, np.asarray(v, dtype=np.float64)[None, :])[0])


def predict_with_votes(model: SvmModel, v):
    """Like predict_multiclass but also returns the per-class vote counts."""
    x = np.asarray(v, dtype=np.float64)[None, :]
    xs = apply_scaler(model.scaler, x)
    votes, weight = _vote_scaled(model, xs)
    side = _select_class(model, votes[0], weight[0])
    counts = {int(c): int(votes[0, k]) for k, c in enumerate(model.classes)}
    return side, counts


# ---------------------------------------------------------------------------
# Persistence: magic 'CSVM', u16 version, length-prefixed payload, CRC32.
# ---------------------------------------------------------------------------

_MAGIC = b"CSVM"
_FORMAT_VERSION = 1


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise ModelFormatError("model payload truncated")
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return vals

    def take_bytes(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise ModelFormatError("model payload truncated")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def take_f64(self, n: int) -> np.ndarray:
        raw = self.take_bytes(8 * n)
        return np.frombuffer(raw, dtype="<f8", count=n).astype(np.float64)


def _serialize_payload(model: SvmModel) -> bytes:
    out = bytearray()
    out += struct.pack("<H", len(model.classes))
    for side in model.classes:
        out += struct.pack("<I", side)
    dim = model.scaler.means.size
    out += struct.pack("<H", dim)
    out += model.scaler.means.astype("<f8").tobytes()
    out += model.scaler.std_devs.astype("<f8").tobytes()
    out += struct.pack("<H", len(model.binaries))
    for i, j, svm in model.binaries:
        hp = svm.hyperparams
        out += struct.pack("<HH", i, j)
        out += struct.pack("<dddI", hp.c, hp.gamma, hp.tolerance, hp.max_passes)
        n_sv = svm.support_vectors.shape[0]
        out += struct.pack("<II", n_sv, svm.n_train)
        out += svm.support_indices.astype("<u4").tobytes()
        out += svm.support_vectors.astype("<f8").tobytes()
        out += svm.dual_coefs.astype("<f8").tobytes()
        out += struct.pack("<d", svm.bias)
    meta = json.dumps(model.metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out += struct.pack("<I", len(meta))
    out += meta
    return bytes(out)


def save_model(model: SvmModel, path) -> None:
    """Write the versioned binary container with a trailing CRC32."""
    payload = _serialize_payload(model)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_model(path) -> SvmModel:
    """Read a model container back; bit-exact inverse of save_model."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file '{path}': {exc}")
    if len(blob) < 4 + 2 + 8 + 4:
        raise ModelFormatError(f"'{path}' too short to be a model file")
    if blob[:4] != _MAGIC:
        raise ModelFormatError(f"'{path}' has bad magic bytes (not a model file)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != _FORMAT_VERSION:
        raise ModelFormatError(f"'{path}' has unsupported format version {version}")
    (length,) = struct.unpack_from("<Q", blob, 6)
    if len(blob) != 4 + 2 + 8 + length + 4:
        raise ModelFormatError(f"'{path}' truncated or padded: bad payload length")
    payload = blob[14 : 14 + length]
    (crc,) = struct.unpack_from("<I", blob, 14 + length)
    if zlib.crc32(payload) != crc:
        raise ModelFormatError(f"'{path}' failed its checksum")
    r = _Reader(payload)
    (n_classes,) = r.take("<H")
    classes = tuple(int(r.take("<I")[0]) for _ in range(n_classes))
    (dim,) = r.take("<H")
    means = r.take_f64(dim)
    stds = r.take_f64(dim)
    (n_bin,) = r.take("<H")
    binaries = []
    for _ in range(n_bin):
        i, j = r.take("<HH")
        c, gamma, tolerance, max_passes = r.take("<dddI")
        n_sv, n_train = r.take("<II")
        idx = np.frombuffer(r.take_bytes(4 * n_sv), dtype="<u4").astype(np.intp)
        svs = r.take_f64(n_sv * dim).reshape(n_sv, dim)
        dual = r.take_f64(n_sv)
        (bias,) = r.take("<d")
        binaries.append(
            (
                int(i),
                int(j),
                BinarySvm(
                    support_vectors=svs,
                    dual_coefs=dual,
                    bias=float(bias),
                    hyperparams=SvmHyperParams(
                        c=c, gamma=gamma, tolerance=tolerance, max_passes=int(max_passes)
                    ),
                    support_indices=idx,
                    n_train=int(n_train),
                ),
            )
        )
    (meta_len,) = r.take("<I")
    try:
        metadata = json.loads(r.take_bytes(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"'{path}' carries unreadable metadata: {exc}")
    if r.off != len(payload):
        raise ModelFormatError(f"'{path}' has {len(payload) - r.off} trailing payload bytes")
    try:
        return SvmModel(
            classes=classes,
            scaler=FeatureScaler(means=means, std_devs=stds),
            binaries=tuple(binaries),
            metadata=metadata,
        )
    except ValueError as exc:
        raise ModelFormatError(f"'{path}' violates model invariants: {exc}")


def model_to_json(model: SvmModel) -> str:
    """Human-readable mirror of the model (one-way; not for reload)."""
    doc = {
        "classes": list(model.classes),
        "scaler": {
            "means": model.scaler.means.tolist(),
            "std_devs": model.scaler.std_devs.tolist(),
        },
        "binaries": [
            {
                "pair": [model.classes[i], model.classes[j]],
                "c": svm.hyperparams.c,
                "gamma": svm.hyperparams.gamma,
                "tolerance": svm.hyperparams.tolerance,
                "max_passes": svm.hyperparams.max_passes,
                "n_train": svm.n_train,
                "n_support_vectors": int(svm.support_vectors.shape[0]),
                "bias": svm.bias,
                "dual_coefs": svm.dual_coefs.tolist(),
                "support_indices": svm.support_indices.tolist(),
                "support_vectors": svm.support_vectors.tolist(),
            }
            for i, j, svm in model.binaries
        ],
        "metadata": model.metadata,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Grid search.
# ---------------------------------------------------------------------------

DEFAULT_C_GRID: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_GAMMA_GRID: tuple[float, ...] = (0.001, 0.01, 0.1, 1.0)


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Assign each record a fold id, class-balanced, shuffled by `seed`."""
    if folds < 2:
        raise ValueError("folds must be at least 2")
    rng = random.Random(seed)
    assignment = np.full(labels.size, -1, dtype=np.int64)
    for side in sorted(set(labels.tolist())):
        idx = [int(i) for i in np.flatnonzero(labels == side)]
        if len(idx) < folds:
            raise ValueError(f"class {side} has {len(idx)} records, fewer than {folds} folds")
        rng.shuffle(idx)
        for pos, record in enumerate(idx):
            assignment[record] = pos % folds
    return assignment


def grid_search(
    table: FeatureTable,
    c_grid=DEFAULT_C_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    folds: int = 3,
    seed: int = 0,
    tolerance: float = 1e-3,
    max_passes: int = 1000,
):
    """Stratified k-fold CV over the (C, gamma) grid.

    Returns (best SvmHyperParams, report). Ties go to the smaller C, then
    the smaller gamma, so the result never depends on grid enumeration
    order.
    """
    labels = table.labels()
    assignment = stratified_folds(labels, folds, seed)
    cells = []
    for c in c_grid:
        for gamma in gamma_grid:
            params = SvmHyperParams(c=float(c), gamma=float(gamma), tolerance=tolerance, max_passes=max_passes)
            correct = 0
            total = 0
            for fold in range(folds):
                train_idx = np.flatnonzero(assignment != fold)
                test_idx = np.flatnonzero(assignment == fold)
                model = train_multiclass(table.subset(train_idx), params)
                test = table.subset(test_idx)
                preds = predict_batch(model, test.matrix())
                correct += int(np.sum(preds == test.labels()))
                total += len(test)
            cells.append({"c": float(c), "gamma": float(gamma), "cv_accuracy": correct / total})
    best = min(cells, key=lambda d: (-d["cv_accuracy"], d["c"], d["gamma"]))
    report = sorted(cells, key=lambda d: (d["c"], d["gamma"]))
    params = SvmHyperParams(
        c=best["c"], gamma=best["gamma"], tolerance=tolerance, max_passes=max_passes
    )
    return params, report
