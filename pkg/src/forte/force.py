"""Grip-force estimation.

The regressor input is a 24-dimensional feature vector: the current
filtered 6-channel frame concatenated with its trailing means over 2.5, 5,
and 10 seconds (drift and stress-relaxation context). The model is an
epsilon-insensitive RBF-kernel support vector regressor trained by an
SMO-style maximal-violating-pair solver on the dual problem.

Evaluation uses trial-wise cross-validation: folds are assigned by whole
trials so no samples of a test trial ever appear in training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .signal import ChannelRing, batch_filter_trace
from .trace import read_trace

MEAN_WINDOWS = (2.5, 5.0, 10.0)
FEATURE_DIM = 6 * (1 + len(MEAN_WINDOWS))
FEATURE_TAG = "frame+means2.5/5/10"
MODEL_VERSION = 1


def build_feature(ring: ChannelRing, t: float | None = None) -> np.ndarray:
    """Current frame plus trailing means, as one 24-vector."""
    if ring.count == 0:
        raise ValueError("ring holds no samples")
    current = ring.last(1)[0]
    parts = [current] + [ring.window_mean(tau) for tau in MEAN_WINDOWS]
    return np.concatenate(parts)


def batch_features(filtered: np.ndarray, f_s: float,
                   indices: np.ndarray | None = None) -> np.ndarray:
    """Feature vectors at the given sample indices of a filtered trace.

    Trailing means shrink to the available history, matching the streaming
    warm-up behaviour of ChannelRing.window_mean.
    """
    filtered = np.asarray(filtered, dtype=np.float64)
    n = filtered.shape[0]
    if indices is None:
        indices = np.arange(n)
    indices = np.asarray(indices)
    csum = np.concatenate([np.zeros((1, filtered.shape[1])),
                           np.cumsum(filtered, axis=0)])
    blocks = [filtered[indices]]
    for tau in MEAN_WINDOWS:
        length = max(1, int(round(tau * f_s)))
        hi = indices + 1
        lo = np.maximum(0, hi - length)
        blocks.append((csum[hi] - csum[lo]) / (hi - lo)[:, None])
    return np.concatenate(blocks, axis=1)


@dataclass
class ForceTrial:
    trial_id: str
    features: np.ndarray   # (n, 24)
    force: np.ndarray      # (n,) newtons
    indentor: str = ""


@dataclass
class ForceModel:
    """Trained RBF kernel expansion: f(v) = bias + sum_j coef_j * k(v, sv_j)."""

    gamma: float
    C: float
    epsilon: float
    bias: float
    support_vectors: np.ndarray   # (n_sv, 24)
    coefficients: np.ndarray      # (n_sv,)
    feature_tag: str = FEATURE_TAG
    version: int = MODEL_VERSION

    def decision(self, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        d2 = (np.sum(v ** 2, axis=1)[:, None]
              + np.sum(self.support_vectors ** 2, axis=1)[None, :]
              - 2.0 * v @ self.support_vectors.T)
        k = np.exp(-self.gamma * np.maximum(d2, 0.0))
        return k @ self.coefficients + self.bias

    def predict(self, v: np.ndarray) -> np.ndarray:
        """Estimated grip force, clamped to be non-negative."""
        return np.maximum(self.decision(v), 0.0)

    def save(self, path: str | Path) -> None:
        payload = {
            "version": self.version,
            "feature_ordering_tag": self.feature_tag,
            "gamma": self.gamma,
            "C": self.C,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "n_sv": len(self.coefficients),
            "support_vectors": self.support_vectors.tolist(),
            "coefficients": self.coefficients.tolist(),
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> "ForceModel":
        payload = json.loads(Path(path).read_text())
        return cls(
            gamma=payload["gamma"], C=payload["C"], epsilon=payload["epsilon"],
            bias=payload["bias"],
            support_vectors=np.asarray(payload["support_vectors"], dtype=np.float64),
            coefficients=np.asarray(payload["coefficients"], dtype=np.float64),
            feature_tag=payload["feature_ordering_tag"],
            version=payload["version"],
        )


class SvrConvergenceError(RuntimeError):
    """Solver hit the iteration cap; carries the best model found so far."""

    def __init__(self, model: ForceModel, gap: float, iterations: int):
        super().__init__(f"SMO did not converge: KKT gap {gap:.3g} after {iterations} iters")
        self.model = model
        self.gap = gap
        self.iterations = iterations


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (np.sum(a ** 2, axis=1)[:, None] + np.sum(b ** 2, axis=1)[None, :]
          - 2.0 * a @ b.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


def default_gamma(x: np.ndarray) -> float:
    """1 / (dim * median pairwise squared distance), on a subsample."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        return 1.0 / d
    sub = x if n <= 512 else x[np.linspace(0, n - 1, 512).astype(int)]
    d2 = (np.sum(sub ** 2, axis=1)[:, None] + np.sum(sub ** 2, axis=1)[None, :]
          - 2.0 * sub @ sub.T)
    med = float(np.median(d2[np.triu_indices(len(sub), k=1)]))
    if med <= 0.0:
        return 1.0 / d
    return 1.0 / (d * med)


def train_svr(x: np.ndarray, y: np.ndarray, C: float = 10.0, epsilon: float = 0.01,
              gamma: float | None = None, tol: float = 1e-3,
              max_iter: int = 500_000) -> ForceModel:
    """Solve the epsilon-insensitive dual by maximal-violating-pair SMO.

    Iterates until the KKT gap (most-violating-pair criterion) drops below
    tol. Deterministic: the solution of the strictly convex dual is unique,
    so sample order only affects the path, not the returned expansion
    beyond the tolerance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite training data")
    if gamma is None:
        gamma = default_gamma(x)

    K = rbf_kernel(x, x, gamma)
    beta = np.zeros(n)            # alpha - alpha*
    alpha = np.zeros(2 * n)       # [alpha; alpha*]
    kb = np.zeros(n)              # K @ beta

    def finish(gap: float) -> tuple[ForceModel, float]:
        r = y - kb
        viol = np.concatenate([r - epsilon, r + epsilon])
        up = np.concatenate([alpha[:n] < C, alpha[n:] > 0])
        low = np.concatenate([alpha[:n] > 0, alpha[n:] < C])
        m_up = viol[up].max() if up.any() else 0.0
        m_low = viol[low].min() if low.any() else 0.0
        bias = 0.5 * (m_up + m_low)
        sv = np.abs(beta) > 1e-12
        return ForceModel(gamma=gamma, C=C, epsilon=epsilon, bias=float(bias),
                          support_vectors=x[sv].copy(),
                          coefficients=beta[sv].copy()), gap

    gap = np.inf
    for it in range(max_iter):
        r = y - kb
        viol = np.concatenate([r - epsilon, r + epsilon])
        up = np.concatenate([alpha[:n] < C, alpha[n:] > 0])
        low = np.concatenate([alpha[:n] > 0, alpha[n:] < C])
        vu = np.where(up, viol, -np.inf)
        vl = np.where(low, viol, np.inf)
        i = int(np.argmax(vu))
        j = int(np.argmin(vl))
        gap = vu[i] - vl[j]
        if gap <= tol:
            model, _ = finish(gap)
            return model
        pi, pj = i % n, j % n
        quad = K[pi, pi] + K[pj, pj] - 2.0 * K[pi, pj]
        lam = gap / max(quad, 1e-12)
        zi = 1.0 if i < n else -1.0
        zj = 1.0 if j < n else -1.0
        lam = min(lam,
                  (C - alpha[i]) if zi > 0 else alpha[i],
                  alpha[j] if zj > 0 else (C - alpha[j]))
        alpha[i] += zi * lam
        alpha[j] -= zj * lam
        beta[pi] += lam
        beta[pj] -= lam
        kb += lam * (K[:, pi] - K[:, pj])

    model, gap = finish(gap)
    raise SvrConvergenceError(model, float(gap), max_iter)


def kkt_residual(model: ForceModel, x: np.ndarray, y: np.ndarray) -> float:
    """Most-violating-pair gap of a model on its training set."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f = model.decision(x) - model.bias
    # Recover beta per training point: support vectors are verbatim copies
    # of training rows, so match them byte-for-byte.
    beta = np.zeros(len(y))
    sv_beta = {sv.tobytes(): c for sv, c in
               zip(model.support_vectors, model.coefficients)}
    for idx, row in enumerate(x):
        beta[idx] = sv_beta.get(np.ascontiguousarray(row).tobytes(), 0.0)
    r = y - f
    eps, C = model.epsilon, model.C
    viol = np.concatenate([r - eps, r + eps])
    ap = np.maximum(beta, 0.0)
    am = np.maximum(-beta, 0.0)
    up = np.concatenate([ap < C, am > 0])
    low = np.concatenate([ap > 0, am < C])
    return float(viol[up].max() - viol[low].min())


def train(trials: list[ForceTrial], C: float = 10.0, epsilon: float = 0.01,
          gamma: float | None = None, tol: float = 1e-3,
          max_iter: int = 500_000) -> ForceModel:
    """Train on the pooled samples of a set of trials."""
    if len(trials) < 1:
        raise ValueError("need at least one trial")
    x = np.concatenate([tr.features for tr in trials])
    y = np.concatenate([tr.force for tr in trials])
    return train_svr(x, y, C=C, epsilon=epsilon, gamma=gamma, tol=tol,
                     max_iter=max_iter)


def rmse(model: ForceModel, trials: list[ForceTrial]) -> float:
    x = np.concatenate([tr.features for tr in trials])
    y = np.concatenate([tr.force for tr in trials])
    err = model.predict(x) - y
    return float(np.sqrt(np.mean(err ** 2)))


@dataclass
class CvResult:
    fold_rmse: list[float]
    fold_trials: list[list[str]]
    pooled_sq_err: float
    pooled_count: int

    @property
    def mean_rmse(self) -> float:
        """Unweighted mean of per-fold RMSEs."""
        return float(np.mean(self.fold_rmse))

    @property
    def pooled_rmse(self) -> float:
        """Single RMSE over all held-out samples."""
        return float(np.sqrt(self.pooled_sq_err / self.pooled_count))


def cross_validate(trials: list[ForceTrial], folds: int = 10, seed: int = 0,
                   C: float = 10.0, epsilon: float = 0.01,
                   gamma: float | None = None, tol: float = 1e-3) -> CvResult:
    """Trial-wise k-fold cross-validation.

    Folds are whole trials; assignment is a seeded permutation of the
    sorted trial ids, so results are reproducible.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > len(trials):
        raise ValueError(f"{folds} folds but only {len(trials)} trials")
    by_id = {tr.trial_id: tr for tr in trials}
    if len(by_id) != len(trials):
        raise ValueError("duplicate trial ids")
    ids = sorted(by_id)
    order = np.random.default_rng(seed).permutation(len(ids))
    fold_ids = [sorted(ids[k] for k in chunk)
                for chunk in np.array_split(order, folds)]

    fold_rmse = []
    pooled_sq, pooled_n = 0.0, 0
    for held in fold_ids:
        held_set = set(held)
        train_trials = [by_id[i] for i in ids if i not in held_set]
        test_trials = [by_id[i] for i in held]
        assert not held_set & {tr.trial_id for tr in train_trials}
        model = train(train_trials, C=C, epsilon=epsilon, gamma=gamma, tol=tol)
        x = np.concatenate([tr.features for tr in test_trials])
        y = np.concatenate([tr.force for tr in test_trials])
        err = model.predict(x) - y
        fold_rmse.append(float(np.sqrt(np.mean(err ** 2))))
        pooled_sq += float(np.sum(err ** 2))
        pooled_n += len(y)
    return CvResult(fold_rmse, fold_ids, pooled_sq, pooled_n)


def load_trials(manifest_path: str | Path, config: PipelineConfig,
                sample_rate: float = 50.0,
                baseline_only: bool = False) -> list[ForceTrial]:
    """Load a training dataset: manifest CSV + directory of trace files.

    Manifest columns: trial_id,file,indentor. Traces must carry a force_n
    column. Samples are decimated to sample_rate before feature building;
    features use the filtered signals. With baseline_only=True only the
    current frame is kept (6-dim ablation baseline).
    """
    import csv as _csv

    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    trials = []
    with open(manifest_path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None or "trial_id" not in reader.fieldnames:
            raise ValueError(f"{manifest_path}: manifest needs trial_id,file,indentor columns")
        for row in reader:
            trace = read_trace(root / row["file"])
            if trace.force_n is None:
                raise ValueError(f"{row['file']}: no force_n column")
            filtered = batch_filter_trace(trace.channels, config)
            stride = max(1, int(round(trace.f_s / sample_rate)))
            idx = np.arange(0, len(trace), stride)
            feats = batch_features(filtered, trace.f_s, idx)
            if baseline_only:
                feats = feats[:, :6]
            trials.append(ForceTrial(
                trial_id=row["trial_id"], features=feats,
                force=trace.force_n[idx].astype(np.float64),
                indentor=row.get("indentor", ""),
            ))
    return trials
