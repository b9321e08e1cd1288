"""Scikit-learn style facade over training and solving.

``ConsistencySolver`` is a BaseEstimator: hyperparameters mirror the
constructor (so ``get_params``/``set_params``/``clone`` work), ``fit``
trains the network on (optionally auto-labeled) instances, and
``predict`` solves new instances with few-step sampling plus optional
gradient search.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .checkpoint import load_model, save_model
from .network import GnnConfig, Model
from .objectives import FeasibleSolution
from .solver import SamplerConfig, SearchConfig, SolveReport, solve
from .training import TrainConfig, train
from .validation import ensure_instances, ensure_labeled


class ConsistencySolver(BaseEstimator):
    """Learn to map noisy decision states to optimal solutions, then solve.

    Parameters split into three groups: network architecture (n_layers,
    hidden_dim, time_dim, norm), training (horizon/beta_* noise schedule,
    steps, batch_size, learning_rate, ...), and solving (sample_steps,
    search_steps, parallel_samples, use_two_opt, guidance weights).
    ``fit`` labels unlabeled instances with the exact oracles, so keep
    training instances within oracle size limits or pass solutions.
    """

    def __init__(
        self,
        kind: str = "tsp",
        n_layers: int = 4,
        hidden_dim: int = 64,
        time_dim: int = 32,
        norm: str = "entity",
        horizon: int = 1000,
        beta_start: float = 0.9999,
        beta_end: Optional[float] = None,
        steps: int = 2000,
        batch_size: int = 32,
        learning_rate: float = 2e-4,
        lr_final_frac: float = 1e-4,
        optimizer: str = "sgd",
        time_pair_alpha: float = 0.5,
        pair_rule: str = "ratio",
        grid_points: int = 8,
        stop_loss: Optional[float] = None,
        sample_steps: int = 1,
        search_steps: int = 0,
        parallel_samples: int = 1,
        use_two_opt: bool = False,
        alpha_noise: float = 0.2,
        consistency_weight: Optional[float] = None,
        objective_weight: Optional[float] = None,
        grad_lr: float = 1.0,
        penalty_beta: float = 2.0,
        seed: int = 0,
    ):
        self.kind = kind
        self.n_layers = n_layers
        self.hidden_dim = hidden_dim
        self.time_dim = time_dim
        self.norm = norm
        self.horizon = horizon
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_final_frac = lr_final_frac
        self.optimizer = optimizer
        self.time_pair_alpha = time_pair_alpha
        self.pair_rule = pair_rule
        self.grid_points = grid_points
        self.stop_loss = stop_loss
        self.sample_steps = sample_steps
        self.search_steps = search_steps
        self.parallel_samples = parallel_samples
        self.use_two_opt = use_two_opt
        self.alpha_noise = alpha_noise
        self.consistency_weight = consistency_weight
        self.objective_weight = objective_weight
        self.grad_lr = grad_lr
        self.penalty_beta = penalty_beta
        self.seed = seed

    def _gnn_config(self) -> GnnConfig:
        return GnnConfig(
            kind=self.kind,
            n_layers=self.n_layers,
            hidden_dim=self.hidden_dim,
            time_dim=self.time_dim,
            norm=self.norm,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr=self.learning_rate,
            lr_final_frac=self.lr_final_frac,
            time_pair_alpha=self.time_pair_alpha,
            optimizer=self.optimizer,
            pair_rule=self.pair_rule,
            grid_points=self.grid_points,
            horizon=self.horizon,
            beta_start=self.beta_start,
            beta_end=self.beta_end,
            seed=self.seed,
            stop_loss=self.stop_loss,
        )

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(steps=self.sample_steps, seed=self.seed)

    def _search_config(self) -> SearchConfig:
        return SearchConfig(
            steps=self.search_steps,
            alpha_noise=self.alpha_noise,
            consistency_weight=self.consistency_weight,
            objective_weight=self.objective_weight,
            grad_lr=self.grad_lr,
            penalty_beta=self.penalty_beta,
        )

    def fit(self, X, y: Optional[Sequence[FeasibleSolution]] = None, loss_log_path=None):
        """Train on instances (auto-labeled by the oracles) or labeled samples."""
        samples = ensure_labeled(X, y)
        if samples[0].instance.kind != self.kind:
            raise ValueError(
                f"estimator configured for {self.kind!r}, data is {samples[0].instance.kind!r}"
            )
        self.model_, self.history_ = train(
            samples, self._train_config(), self._gnn_config(), loss_log_path=loss_log_path
        )
        return self

    def _fitted_model(self) -> Model:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError(
                "this ConsistencySolver is not fitted yet; call fit() or load()"
            )
        return model

    def predict(self, X) -> List[FeasibleSolution]:
        """Solve each instance; returns one feasible solution per instance."""
        return [report.solution for report in self.predict_report(X)]

    def predict_report(
        self, X, references: Optional[Sequence[Optional[float]]] = None
    ) -> List[SolveReport]:
        """Solve each instance and return full reports (objective, drop, timing).

        ``references`` supplies optimal objectives for drop computation; when
        omitted, labels attached to X are used where present.
        """
        model = self._fitted_model()
        items = list(X)
        insts = ensure_instances(items, kind=self.kind)
        if references is None:
            references = [
                item.solution.objective
                if hasattr(item, "solution") and item.solution is not None
                else None
                for item in items
            ]
        references = list(references)
        if len(references) != len(insts):
            raise ValueError(f"{len(insts)} instances but {len(references)} references")
        sampler, search = self._sampler_config(), self._search_config()
        return [
            solve(
                model,
                inst,
                sampler_cfg=sampler,
                search_cfg=search,
                use_two_opt=self.use_two_opt,
                parallel_samples=self.parallel_samples,
                reference=ref,
            )
            for inst, ref in zip(insts, references)
        ]

    def score(self, X, y: Optional[Sequence[FeasibleSolution]] = None) -> float:
        """Negative mean relative drop vs references (higher is better).

        References come from y (solutions), or labels attached to X.
        """
        items = list(X)
        references: Optional[List[Optional[float]]] = None
        if y is not None:
            references = [sol.objective for sol in y]
        reports = self.predict_report(items, references)
        drops = [r.drop for r in reports]
        if any(d is None for d in drops):
            raise ValueError("scoring requires a reference objective for every instance")
        return -sum(drops) / len(drops)

    def save(self, path) -> None:
        """Serialize the fitted model (weights, schedule, config) to a file."""
        save_model(self._fitted_model(), path)

    @classmethod
    def load(cls, path) -> "ConsistencySolver":
        """Rebuild a fitted estimator from a checkpoint.

        Architecture and schedule parameters are restored from the file;
        solve-time parameters take their defaults and can be set_params'd.
        """
        model = load_model(path)
        est = cls(
            kind=model.config.kind,
            n_layers=model.config.n_layers,
            hidden_dim=model.config.hidden_dim,
            time_dim=model.config.time_dim,
            norm=model.config.norm,
            horizon=model.schedule.T,
        )
        est.model_ = model
        est.history_ = []
        return est
