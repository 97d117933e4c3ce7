"""Dense-to-sparse training path with snapshotting and model selection.

A run starts with one unpenalized warm step under the adaptive-moments
optimizer, then walks a geometric penalty schedule under momentum SGD.
Every optimizer step is followed by the hierarchical prox, so feature
elimination produces exact zeros; a feature that reaches zero is frozen
(its gradient and optimizer slots are masked), which makes the active
set monotone along the path.

Snapshots are taken at every step whose end shows fewer active features
than the previous record. In the static regime all snapshot objective
values are computed against the same full-feature affinity and feed the
post-hoc "fewest features within 90% of the best value" selection; the
dynamic regime re-anchors the affinity to the active set as it shrinks
and is therefore incompatible with that rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericError, UnsupportedRegimeError
from .gemini import GeminiSpec, gemini_value_and_grad
from .geometry import AffinityMatrix, AffinitySpec, pairwise_affinity
from .model import (
    OptimizerState,
    SkipConnectedModel,
    backward,
    config_digest,
    forward,
    init_model,
    logits_grad_from_tau,
    soft_assign,
)
from .prox import active_set, apply_prox, group_penalty

# MMD training defaults to smallish minibatches (more optimizer steps
# per epoch); Wasserstein stays full batch so OT solves reuse their
# warm-started potentials across epochs.
MMD_BATCH = 128
WASSERSTEIN_FULL_BATCH_LIMIT = 4096
WASSERSTEIN_MINIBATCH = 1024


@dataclass(frozen=True)
class PathConfig:
    clusters: int
    gemini: GeminiSpec = field(default_factory=GeminiSpec)
    lambda0: float = 1.0
    rho: float = 1.05
    f_thres: int = 1
    epochs_per_step: int = 100
    patience: int = 10
    improvement_rtol: float = 0.01
    batch_size: int | None = None  # None: family-dependent default, see _Trainer
    regime: str = "static"
    hierarchy: float = 10.0
    hidden: tuple[int, ...] = (100,)
    learning_rate: float = 1e-3
    skip_noise: float | None = None  # None: 1/sqrt(d)
    seed: int = 0
    max_steps: int = 10000

    def __post_init__(self):
        if self.clusters < 2:
            raise ConfigError("need at least two clusters")
        if self.rho <= 1.0:
            raise ConfigError("penalty growth factor must exceed 1")
        if self.lambda0 <= 0.0:
            raise ConfigError("starting penalty must be positive")
        if self.f_thres < 1:
            raise ConfigError("feature stop threshold must be at least 1")
        if self.regime not in ("static", "dynamic"):
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def lambda_at(self, t: int) -> float:
        """Penalty at the t-th penalized step (t = 0 is the first one)."""
        return self.lambda0 * self.rho**t

    def digest(self) -> str:
        doc = {k: getattr(self, k) for k in self.__dataclass_fields__}
        doc["gemini"] = {
            "family": self.gemini.family,
            "mode": self.gemini.mode,
            "ot": vars(self.gemini.ot),
            "empty_cluster_rel": self.gemini.empty_cluster_rel,
        }
        return config_digest(doc)


@dataclass
class PathSnapshot:
    step: int
    lam: float
    active: tuple[int, ...]
    model: SkipConnectedModel
    gemini: float
    epochs_used: int

    @property
    def n_active(self) -> int:
        return len(self.active)


@dataclass
class TraceRow:
    step: int
    lam: float
    epochs_used: int
    n_active: int
    gemini: float
    penalty: float
    objective: float


@dataclass
class SelectionReport:
    chosen: PathSnapshot
    best_gemini: float
    threshold: float
    rule: str
    candidates: list[PathSnapshot]


@dataclass
class PathResult:
    snapshots: list[PathSnapshot]
    trace: list[TraceRow]
    eliminations: dict[int, tuple[int, float]]  # feature -> (step, lambda)
    config: PathConfig
    feature_names: list[str]

    @property
    def final(self) -> PathSnapshot:
        return self.snapshots[-1]


def _affinity_for(X, spec: GeminiSpec, active) -> AffinityMatrix:
    name = "linear" if spec.family == "mmd" else "euclidean"
    return pairwise_affinity(X, AffinitySpec(spec.affinity_kind, name, active))


class _Trainer:
    """Owns the model, optimizer slots, dead-feature mask and the OT
    warm start for one path run."""

    def __init__(self, X, config: PathConfig, model: SkipConnectedModel, shuffle_rng):
        self.X = X
        self.n, self.d = X.shape
        self.config = config
        self.spec = config.gemini
        self.model = model
        self.shuffle_rng = shuffle_rng
        if config.batch_size is not None:
            self.batch_size = config.batch_size
        elif config.gemini.family == "mmd":
            self.batch_size = min(self.n, MMD_BATCH)
        else:
            self.batch_size = (
                self.n if self.n <= WASSERSTEIN_FULL_BATCH_LIMIT else WASSERSTEIN_MINIBATCH
            )
        self.full_batch = self.batch_size >= self.n
        self.dead = np.zeros(self.d, dtype=bool)
        self.affinity: AffinityMatrix | None = None
        self.warm = None  # OT potentials, reused only in full-batch mode

    # -- affinity bookkeeping -------------------------------------------------

    def refresh_affinity(self) -> None:
        """Match the affinity to the regime (and active set, if dynamic)."""
        if self.config.regime == "static":
            if self.affinity is None:
                self.affinity = _affinity_for(self.X, self.spec, None)
            return
        current = active_set(self.model)
        if self.affinity is None or self.affinity.active != current:
            self.affinity = _affinity_for(self.X, self.spec, current)
            self.warm = None

    # -- one optimizer step ---------------------------------------------------

    def _masked_columns(self, grads) -> None:
        if self.dead.any():
            grads[0][:, self.dead] = 0.0
            grads[-1][:, self.dead] = 0.0

    def _freeze_dead(self, optimizer: OptimizerState) -> None:
        """Zero optimizer slots of eliminated features so decaying
        momentum cannot push them off exact zero."""
        now_dead = np.ones(self.d, dtype=bool)
        now_dead[list(active_set(self.model))] = False
        new = now_dead & ~self.dead
        if new.any():
            for slot in optimizer.slots:
                slot[0][:, new] = 0.0
                slot[-1][:, new] = 0.0
            self.dead = now_dead

    def _train_batch(self, idx, lam, optimizer: OptimizerState) -> None:
        X = self.X if idx is None else self.X[idx]
        logits = forward(self.model, X)
        tau = soft_assign(logits)
        affinity = self.affinity if idx is None else self.affinity.submatrix(idx)
        warm = self.warm if idx is None else None
        _, grad_tau, warm_out = gemini_value_and_grad(tau, affinity, self.spec, warm=warm)
        if idx is None:
            self.warm = warm_out
        grad_logits = logits_grad_from_tau(tau, -grad_tau)  # descend -objective
        grads = backward(self.model, X, grad_logits)
        self._masked_columns(grads)
        optimizer.apply(self.model.parameters(), grads)
        apply_prox(self.model, optimizer.lr * lam)
        self._freeze_dead(optimizer)

    # -- full-set objective ---------------------------------------------------

    def evaluate(self, lam: float) -> tuple[float, float, float]:
        """(objective value, penalty, penalized objective) on the full set."""
        penalty = group_penalty(self.model.skip)
        if self.config.regime == "dynamic" and not active_set(self.model):
            return 0.0, penalty, -lam * penalty
        tau = soft_assign(forward(self.model, self.X))
        value, _, warm_out = gemini_value_and_grad(tau, self.affinity, self.spec, warm=self.warm)
        if self.full_batch:
            self.warm = warm_out
        return value, penalty, value - lam * penalty

    # -- one penalty step -----------------------------------------------------

    def run_step(self, lam: float, optimizer: OptimizerState) -> tuple[float, float, float, int]:
        cfg = self.config
        best = -np.inf
        stall = 0
        epochs = 0
        value = penalty = objective = None
        for _ in range(cfg.epochs_per_step):
            if not active_set(self.model):
                break
            self.refresh_affinity()
            if self.full_batch:
                self._train_batch(None, lam, optimizer)
            else:
                order = self.shuffle_rng.permutation(self.n)
                for start in range(0, self.n, self.batch_size):
                    self._train_batch(order[start : start + self.batch_size], lam, optimizer)
            epochs += 1
            value, penalty, objective = self.evaluate(lam)
            if not np.isfinite(best) or objective > best + cfg.improvement_rtol * abs(best):
                stall = 0
            else:
                stall += 1
            best = max(best, objective)
            if stall >= cfg.patience:
                break
        if value is None:  # step ended before any epoch ran
            self.refresh_affinity()
            value, penalty, objective = self.evaluate(lam)
        return value, penalty, objective, epochs


def train_at_lambda(model, X, affinity, lam, config: PathConfig, optimizer=None):
    """Train `model` in place at a fixed penalty level.

    Runs up to config.epochs_per_step epochs with the 1%-for-patience
    early stop on the full-set penalized objective. Returns
    (model, final objective, epochs used).
    """
    X = np.asarray(X, dtype=np.float64)
    trainer = _Trainer(X, config, model, np.random.default_rng(config.seed))
    trainer.affinity = affinity
    trainer.dead = np.ones(X.shape[1], dtype=bool)
    trainer.dead[list(active_set(model))] = False
    if optimizer is None:
        optimizer = OptimizerState.momentum_sgd(model.parameters(), config.learning_rate)
    _, _, objective, epochs = trainer.run_step(lam, optimizer)
    return model, objective, epochs


def fit_path(X, config: PathConfig, feature_names=None) -> PathResult:
    """Run the full dense-to-sparse path on an N x d sample matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ConfigError("training data must be a 2-D matrix")
    n, d = X.shape
    if not np.isfinite(X).all():
        raise NumericError("training data contains non-finite values")
    if not 0 < config.f_thres < d:
        raise ConfigError(f"feature stop threshold must lie in (0, {d}) for this data")
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(d)]

    master = np.random.SeedSequence(config.seed)
    init_seq, shuffle_seq = master.spawn(2)
    model = init_model(
        d,
        config.clusters,
        hidden=config.hidden,
        hierarchy=config.hierarchy,
        seed=init_seq,
        skip_noise=config.skip_noise,
        config_digest=config.digest(),
    )
    model.seed = config.seed
    trainer = _Trainer(X, config, model, np.random.default_rng(shuffle_seq))

    snapshots: list[PathSnapshot] = []
    trace: list[TraceRow] = []
    eliminations: dict[int, tuple[int, float]] = {}
    last_recorded = d + 1

    def record(step: int, lam: float, value, penalty, objective, epochs) -> tuple[int, ...]:
        nonlocal last_recorded
        current = active_set(model)
        trace.append(TraceRow(step, lam, epochs, len(current), value, penalty, objective))
        for j in range(d):
            if j not in current and j not in eliminations:
                eliminations[j] = (step, lam)
        if len(current) < last_recorded:
            snapshots.append(
                PathSnapshot(step, lam, current, model.copy(), value, epochs)
            )
            last_recorded = len(current)
        return current

    # warm start without penalty under adaptive moments
    optimizer = OptimizerState.adam(model.parameters(), config.learning_rate)
    value, penalty, objective, epochs = trainer.run_step(0.0, optimizer)
    current = record(0, 0.0, value, penalty, objective, epochs)

    step = 0
    while len(current) > config.f_thres:
        if step >= config.max_steps:
            raise NumericError(
                f"path did not reach {config.f_thres} features within "
                f"{config.max_steps} penalty steps (lambda={config.lambda_at(step - 1):.3e}, "
                f"{len(current)} still active)"
            )
        lam = config.lambda_at(step)
        step += 1
        optimizer = OptimizerState.momentum_sgd(model.parameters(), config.learning_rate)
        value, penalty, objective, epochs = trainer.run_step(lam, optimizer)
        if config.regime == "dynamic":
            trainer.refresh_affinity()
            value, penalty, objective = trainer.evaluate(lam)
        current = record(step, lam, value, penalty, objective, epochs)

    return PathResult(snapshots, trace, eliminations, config, list(feature_names))


def select_model(snapshots, regime: str = "static") -> SelectionReport:
    """Post-hoc choice: fewest active features among snapshots whose
    objective stays within 90% of the best one; ties break toward the
    larger penalty. Only meaningful in the static regime."""
    if regime != "static":
        raise UnsupportedRegimeError(
            "the 90% selection rule needs comparable objective values; "
            "dynamic-regime runs keep the final snapshot instead"
        )
    if not snapshots:
        raise ValueError("no snapshots to select from")
    best = max(s.gemini for s in snapshots)
    threshold = 0.9 * best
    candidates = [s for s in snapshots if s.gemini >= threshold]
    chosen = min(candidates, key=lambda s: (s.n_active, -s.lam))
    return SelectionReport(chosen, best, threshold, "gemini-90pct", candidates)


def final_report(snapshots) -> SelectionReport:
    """Dynamic-regime counterpart of select_model: the last snapshot at
    the feature stop, with the 90% rule disabled."""
    if not snapshots:
        raise ValueError("no snapshots to report")
    chosen = snapshots[-1]
    best = max(s.gemini for s in snapshots)
    return SelectionReport(chosen, best, float("nan"), "dynamic-final", [chosen])


def predict(snapshot_or_model, X):
    """Hard labels (argmax, ties to the lowest cluster) and tau."""
    model = getattr(snapshot_or_model, "model", snapshot_or_model)
    tau = soft_assign(forward(model, np.asarray(X, dtype=np.float64)))
    return tau.argmax(axis=1), tau
