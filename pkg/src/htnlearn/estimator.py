"""scikit-learn style front end for the whole learning pipeline."""
from __future__ import annotations

from typing import List, Optional, Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dfa import RPNI, primitive_only
from .hddl import DomainFile, Operator, ProblemFile
from .induction import (assemble_domain, default_tolerance, learn_action_model, learn_method_preconditions,
                        with_method_preconditions)
from .methods import DEFAULT_PATH_CAP, SynthesisContext, heuristic_learn
from .planning import Plan, PlannerLimits, PlanningLimitExceeded, accuracy, plan
from .sampling import SampleSet
from .validation import check_fraction, check_positive_int, check_sample_set

MODES = ("methods-only", "full")


class HTNDomainLearner(BaseEstimator):
    """Learns HTN methods (and, in ``full`` mode, operators) from a SampleSet.

    ``noise`` is the assumed observation noise rate: it sets the RPNI merge
    tolerance and, through ``default_tolerance``, the induction tolerance
    unless ``induction_tolerance`` is given.
    """

    def __init__(self, mode: str = "methods-only", noise: float = 0.0, induction_tolerance: Optional[float] = None,
                 tabu_budget: int = 1000, path_cap: int = DEFAULT_PATH_CAP, seed: int = 0):
        self.mode = mode
        self.noise = noise
        self.induction_tolerance = induction_tolerance
        self.tabu_budget = tabu_budget
        self.path_cap = path_cap
        self.seed = seed

    def _check_params(self) -> float:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        check_fraction(self.noise, "noise")
        check_positive_int(self.tabu_budget, "tabu_budget")
        check_positive_int(self.path_cap, "path_cap")
        if self.induction_tolerance is None:
            return default_tolerance(self.noise)
        return check_fraction(self.induction_tolerance, "induction_tolerance")

    def fit(self, X: SampleSet, y=None, known_operators: Optional[Sequence[Operator]] = None):
        check_sample_set(X)
        tol = self._check_params()
        if self.mode == "methods-only" and known_operators is None:
            raise ValueError("methods-only mode needs the known operators")
        rpni = RPNI(noise_tolerance=self.noise).fit(X)
        self.dfa_ = rpni.dfa_
        self.pta_size_ = rpni.pta_size_
        ctx = SynthesisContext(X, self.dfa_, path_cap=self.path_cap)
        methods = heuristic_learn(ctx)
        self.method_models_ = learn_method_preconditions(ctx, methods, tol)
        self.methods_ = with_method_preconditions(methods, self.method_models_)
        self.coverage_tests_ = ctx.counter.tests
        self.context_ = ctx
        if self.mode == "full":
            result = learn_action_model(primitive_only(self.dfa_), X, tol, budget=self.tabu_budget, seed=self.seed)
            self.operators_ = list(result.operators)
            self.action_fitness_ = result.fitness
        else:
            self.operators_ = list(known_operators)
        self.domain_: DomainFile = assemble_domain(X.signature, self.operators_, self.methods_.methods())
        return self

    def predict(self, X: Sequence[ProblemFile], limits: PlannerLimits = PlannerLimits()) -> List[Optional[Plan]]:
        check_is_fitted(self, "domain_")
        out = []
        for problem in X:
            try:
                out.append(plan(self.domain_, problem, limits))
            except PlanningLimitExceeded:
                out.append(None)
        return out

    def score(self, X: Sequence[ProblemFile], y: DomainFile = None, limits: PlannerLimits = PlannerLimits()) -> float:
        """Accuracy on problems ``X`` with ``y`` as the ground-truth domain."""
        check_is_fitted(self, "domain_")
        if y is None:
            raise ValueError("score needs the ground-truth domain as y")
        return accuracy(self.domain_, X, y, limits).accuracy
