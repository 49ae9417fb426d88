"""Per-category linear SVM training, hard-negative mining, and scoring.

The solver is dual coordinate descent on the L1-hinge SVM.  The bias rides
along as an augmented constant feature of value 1, so the optimized
objective is 0.5*(||w||^2 + b^2) + C * sum_i max(0, 1 - y_i*(w.x_i + b)),
and each dual variable stays in [0, C].
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateLabels, NonFiniteInput, SpaceMismatch
from .features import FeatureVector
from .seeding import derive_seed, make_rng

DEFAULT_C = 0.01
DEFAULT_TOL = 1e-4
DEFAULT_MAX_EPOCHS = 1000


@dataclass
class TrainSet:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) in {-1, +1}
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteInput("training features contain non-finite values")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.labels))]
        if len(self.ids) != len(self.labels):
            raise ValueError("one id per row required")
        if (self.labels > 0).all() or (self.labels < 0).all():
            raise DegenerateLabels("training set needs both classes")


@dataclass
class LinearModel:
    category: str
    weights: np.ndarray
    bias: float
    space_id: str
    train: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise NonFiniteInput("model weights must be finite")


def primal_objective(w_aug: np.ndarray, x_aug: np.ndarray, y: np.ndarray, C: float) -> float:
    margins = y * (x_aug @ w_aug)
    hinge = np.maximum(0.0, 1.0 - margins).sum()
    return 0.5 * float(w_aug @ w_aug) + C * float(hinge)


def _dual_coordinate_descent(
    x_aug: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float,
    max_epochs: int,
    seed: int,
):
    """Hinge-loss dual CD with seeded per-epoch shuffling.

    Returns (w_aug, alpha, epochs_run, converged).  Convergence is declared
    when the largest projected-gradient violation in an epoch drops below
    tol.
    """
    n = len(y)
    q_diag = np.einsum("ij,ij->i", x_aug, x_aug)
    alpha = np.zeros(n)
    w = np.zeros(x_aug.shape[1])
    rng = make_rng(seed)
    epochs = 0
    converged = False
    for epochs in range(1, max_epochs + 1):
        worst = 0.0
        for i in rng.permutation(n):
            g = y[i] * float(x_aug[i] @ w) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg == 0.0:
                continue
            worst = max(worst, abs(pg))
            if q_diag[i] <= 0.0:
                continue
            new_a = min(max(a - g / q_diag[i], 0.0), C)
            if new_a != a:
                w += (new_a - a) * y[i] * x_aug[i]
                alpha[i] = new_a
        if worst < tol:
            converged = True
            break
    return w, alpha, epochs, converged


def train_svm(
    data: TrainSet,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
    category: str = "",
    space_id: str = "",
) -> LinearModel:
    """Train one linear classifier; deterministic in the seed."""
    if C <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    x_aug = np.hstack([data.features, np.ones((len(data.labels), 1))])
    w_aug, _, epochs, converged = _dual_coordinate_descent(
        x_aug, data.labels, C, tol, max_epochs, seed
    )
    objective = primal_objective(w_aug, x_aug, data.labels, C)
    return LinearModel(
        category=category,
        weights=w_aug[:-1],
        bias=float(w_aug[-1]),
        space_id=space_id,
        train={
            "C": C,
            "tol": tol,
            "max_epochs": max_epochs,
            "epochs_run": epochs,
            "converged": converged,
            "seed": seed,
            "objective": objective,
            "n_pos": int((data.labels > 0).sum()),
            "n_neg": int((data.labels < 0).sum()),
        },
    )


def score(model: LinearModel, v: FeatureVector) -> float:
    """w.v + b; the vector must belong to the model's feature space."""
    if v.space_id != model.space_id:
        raise SpaceMismatch(f"vector space {v.space_id!r} != model space {model.space_id!r}")
    if len(v.values) != len(model.weights):
        raise SpaceMismatch(
            f"vector dim {len(v.values)} != model dim {len(model.weights)}"
        )
    return float(model.weights @ v.values) + model.bias


def mine_hard_negatives(
    model: LinearModel,
    base: TrainSet,
    candidates: dict[str, FeatureVector],
    rounds: int,
    cap_per_round: int,
    seed: int,
) -> LinearModel:
    """Grow the negative set with top-scoring false positives and retrain.

    ``candidates`` maps patch id to feature vector for every
    negative-eligible patch in the mining pool (the caller applies the
    overlap filter).  Each round scores the pool with the current model,
    appends up to ``cap_per_round`` unseen patches scoring above zero, and
    retrains from scratch with the same hyperparameters.  rounds=0 returns
    the input model untouched.  Per-round diagnostics are recorded under
    train["mining"].
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if rounds == 0:
        return model
    cfg = model.train
    C, tol, max_epochs = cfg["C"], cfg["tol"], cfg["max_epochs"]
    feats = base.features
    labels = base.labels
    ids = list(base.ids)
    seen = set(ids)
    history = []
    current = model
    for rnd in range(1, rounds + 1):
        scored = [
            (score(current, vec), pid)
            for pid, vec in candidates.items()
            if pid not in seen
        ]
        false_pos = sorted(
            ((s, pid) for s, pid in scored if s > 0.0), key=lambda t: (-t[0], t[1])
        )
        picked = false_pos[:cap_per_round]
        prev_w = np.append(current.weights, current.bias)
        if picked:
            add = np.stack([candidates[pid].values for _, pid in picked])
            feats = np.vstack([feats, add])
            labels = np.append(labels, -np.ones(len(picked)))
            ids.extend(pid for _, pid in picked)
            seen.update(pid for _, pid in picked)
        grown = TrainSet(feats, labels, ids)
        current = train_svm(
            grown,
            C=C,
            tol=tol,
            max_epochs=max_epochs,
            seed=derive_seed(seed, "mine", rnd),
            category=model.category,
            space_id=model.space_id,
        )
        x_aug = np.hstack([feats, np.ones((len(labels), 1))])
        history.append(
            {
                "round": rnd,
                "mined": len(picked),
                "pool_false_positives": len(false_pos),
                "objective": current.train["objective"],
                "objective_prev_weights": primal_objective(prev_w, x_aug, labels, C),
            }
        )
        if not picked:
            break
    current.train["mining"] = history
    return current


def save_model(path, model: LinearModel) -> None:
    payload = {
        "category": model.category,
        "space_id": model.space_id,
        "bias": model.bias,
        "weights": [float(w) for w in model.weights],
        "train": model.train,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_model(path) -> LinearModel:
    payload = json.loads(Path(path).read_text())
    return LinearModel(
        category=payload["category"],
        weights=np.asarray(payload["weights"], dtype=np.float64),
        bias=float(payload["bias"]),
        space_id=payload["space_id"],
        train=payload.get("train", {}),
    )
