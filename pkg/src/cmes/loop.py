"""Sequential constrained BO: model refits, acquisition maximization, trajectories."""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from . import gp
from .acquisition import cmes_score
from .baselines import Incumbent, ap_impute, ap_score, cei_score, random_candidate
from .constraint import ConstraintPosterior, default_classifier_params, empty_binary, fit_classifier, real_valued
from .space import Categorical, Continuous, Integer, SearchSpace, continuous_mask, decode, encode
from .thompson import sample_ystar, sobol_points

FEEDBACK_MODES = ("real_valued", "binary_observed", "binary_unobserved")
STRATEGIES = ("cmes", "cei", "ap", "random")


@dataclass(frozen=True)
class BOConfig:
    strategy: str = "cmes"
    feedback: str = "binary_unobserved"
    p: float = 0.9
    delta: float = 0.0
    n_ystar: int = 10
    n_discretization: int = 2000
    sampler: str = "joint"
    cmes_mode: Optional[str] = None
    noisy: bool = False
    clip_ystar: bool = True
    perc: float = 100.0
    n_candidates: int = 512
    n_refine: int = 5
    hyper_restarts: int = 5

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")

    @property
    def binary(self) -> bool:
        return self.feedback != "real_valued"

    @property
    def threshold(self) -> float:
        """delta for the constrained minimum: logit(p) under binary feedback."""
        return math.log(self.p / (1.0 - self.p)) if self.binary else self.delta

    @property
    def score_mode(self) -> str:
        if self.cmes_mode is not None:
            return self.cmes_mode
        return "binary" if self.binary else "real_valued"


@dataclass(frozen=True)
class Observation:
    x: tuple
    z_y: Optional[float]
    z_c: float
    iteration: int
    feasible: bool


@dataclass
class Trajectory:
    observations: list
    best_feasible: list
    config: dict = field(default_factory=dict)

    def final_best(self) -> Optional[float]:
        return self.best_feasible[-1] if self.best_feasible else None


@dataclass(frozen=True)
class BOState:
    space: SearchSpace
    config: BOConfig
    seed: int = 0
    observations: tuple = ()
    best_feasible: tuple = ()
    obj_post: Optional[gp.GpPosterior] = None
    con_post: Optional[ConstraintPosterior] = None
    obj_params: Optional[gp.KernelParams] = None
    con_params: Optional[gp.KernelParams] = None

    @property
    def incumbent(self) -> Incumbent:
        vals = [o.z_y for o in self.observations if o.feasible and o.z_y is not None]
        return Incumbent(min(vals) if vals else None)


def is_feasible(z_c, config: BOConfig) -> bool:
    if config.binary:
        return z_c == -1
    return z_c <= config.delta


def make_observation(x, z_y, z_c, iteration, config: BOConfig) -> Observation:
    feasible = is_feasible(z_c, config)
    if config.feedback == "binary_unobserved" and not feasible:
        z_y = None
    if config.feedback == "binary_unobserved" and feasible and z_y is None:
        raise ValueError("a feasible evaluation must report its objective")
    return Observation(tuple(x), None if z_y is None else float(z_y), float(z_c), iteration, feasible)


def initial_state(space: SearchSpace, config: BOConfig, seed: int = 0) -> BOState:
    return _refit(BOState(space, config, seed))


def _encoded(obs, space):
    if not obs:
        return np.zeros((0, space.encoded_dim))
    return np.vstack([encode(o.x, space) for o in obs])


def _refit(state: BOState) -> BOState:
    cfg = state.config
    if cfg.strategy == "random":
        return state
    space = state.space
    obs = state.observations
    dim = space.encoded_dim
    rng = np.random.default_rng([state.seed, len(obs), 7])
    X = _encoded(obs, space)

    if cfg.strategy == "ap":
        z = np.array([np.nan if o.z_y is None else o.z_y for o in obs], dtype=float)
        if np.all(np.isnan(z)):
            return dataclasses.replace(state, obj_post=None, con_post=None)
        zi = ap_impute(z, [o.feasible for o in obs], cfg.perc)
        post = gp.fit_gp(X, zi, rng, cfg.hyper_restarts, init=state.obj_params)
        return dataclasses.replace(state, obj_post=post, obj_params=post.params)

    has_y = np.array([o.z_y is not None for o in obs], dtype=bool)
    if has_y.any():
        zy = np.array([o.z_y for o in obs if o.z_y is not None], dtype=float)
        obj = gp.fit_gp(X[has_y], zy, rng, cfg.hyper_restarts, init=state.obj_params)
    else:
        obj = gp.empty_posterior(dim)

    zc = np.array([o.z_c for o in obs], dtype=float)
    if cfg.binary:
        if len(zc):
            con = fit_classifier(X, zc, init=state.con_params, rng=rng)
        else:
            con = empty_binary(default_classifier_params(dim))
        con_params = con.params
    else:
        cpost = gp.fit_gp(X, zc, rng, cfg.hyper_restarts, init=state.con_params) if len(zc) \
            else gp.empty_posterior(dim)
        con = real_valued(cpost)
        con_params = cpost.params
    return dataclasses.replace(state, obj_post=obj, con_post=con, obj_params=obj.params,
                               con_params=con_params)


def update(state: BOState, obs: Observation) -> BOState:
    """Append ``obs``, refresh incumbent/best-so-far and refit every model."""
    new = dataclasses.replace(state, observations=state.observations + (obs,),
                              best_feasible=state.best_feasible + (_next_best(state, obs),))
    return _refit(new)


def unit_to_space(U, space: SearchSpace) -> np.ndarray:
    """Map points of [0,1]^len(dims) to valid encodings (integers and levels snapped)."""
    U = np.atleast_2d(U)
    if all(isinstance(d, Continuous) for d in space.dims):
        return np.clip(U, 0.0, 1.0)
    rows = []
    for u in U:
        x = []
        for ui, d in zip(u, space.dims):
            if isinstance(d, Categorical):
                x.append(d.levels[min(int(ui * len(d.levels)), len(d.levels) - 1)])
            elif isinstance(d, Integer):
                x.append(int(min(max(np.floor(d.lo + ui * (d.hi - d.lo) + 0.5), d.lo), d.hi)))
            else:
                x.append(d.lo + ui * (d.hi - d.lo))
        rows.append(encode(x, space))
    return np.vstack(rows)


def _score_function(state: BOState, rng) -> Optional[Callable]:
    cfg = state.config
    if cfg.strategy == "ap":
        if state.obj_post is None:
            return None
        inc = float(np.min(state.obj_post.target_mean + state.obj_post.target_scale
                           * _train_targets(state.obj_post)))
        return lambda V: ap_score(V, state.obj_post, inc)
    if cfg.strategy == "cei":
        return lambda V: cei_score(V, state.obj_post, state.con_post, state.incumbent, cfg.threshold)
    # cmes
    space = state.space
    U = sobol_points(len(space.dims), cfg.n_discretization, shift_rng=rng)
    Xhat = unit_to_space(U, space)
    inc = state.incumbent
    observed = [o.z_y for o in state.observations if o.z_y is not None]
    clip = inc.value if (cfg.clip_ystar and inc.exists) else None
    span = float(np.ptp(observed)) if len(observed) > 1 else 1.0
    ystars = sample_ystar(cfg.sampler, state.obj_post, state.con_post, Xhat, cfg.threshold,
                          cfg.n_ystar, rng, clip_at=clip, clip_range=span)
    return lambda V: cmes_score(V, state.obj_post, state.con_post, ystars, cfg.threshold,
                                mode=cfg.score_mode, noisy=cfg.noisy)


def _train_targets(post: gp.GpPosterior) -> np.ndarray:
    # z = L p recovers the standardized training targets
    return post.chol_factor @ post.representer


def maximize_score(score, space: SearchSpace, rng, n_candidates=512, n_refine=5):
    """Sobol candidates, then bounded L-BFGS-B (finite-difference gradients) from the top few."""
    U = sobol_points(len(space.dims), n_candidates, shift_rng=rng)
    C = unit_to_space(U, space)
    vals = np.asarray(score(C), dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        return None, None
    vals = np.where(finite, vals, -np.inf)
    order = np.argsort(-vals, kind="stable")[:n_refine]
    best_v, best_x = vals[order[0]], C[order[0]]
    bounds = [(0.0, 1.0)] * space.encoded_dim

    def neg(v):
        s = float(np.asarray(score(v[None, :]))[0])
        return -s if np.isfinite(s) else 1e300

    for i in order:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(neg, C[i], method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 50, "eps": 1e-6})
        if np.isfinite(res.fun) and -res.fun > best_v:
            best_v, best_x = -res.fun, np.clip(res.x, 0.0, 1.0)
    return best_x, best_v


def propose(state: BOState, rng: np.random.Generator) -> tuple:
    """Next point to evaluate under ``state.config.strategy``."""
    cfg = state.config
    space = state.space
    if cfg.strategy == "random":
        return random_candidate(space, rng)
    score = _score_function(state, rng)
    if score is None:
        return random_candidate(space, rng)
    v, _ = maximize_score(score, space, rng, cfg.n_candidates, cfg.n_refine)
    if v is None:
        warnings.warn("all acquisition scores non-finite; proposing at random", RuntimeWarning)
        return random_candidate(space, rng)
    x = decode(v, space)
    seen = {tuple(encode(o.x, space)) for o in state.observations}
    enc = encode(x, space)
    mask = continuous_mask(space)
    if tuple(enc) in seen and mask.any():
        enc = enc.copy()
        enc[mask] = np.where(enc[mask] <= 1 - 1e-6, enc[mask] + 1e-6, enc[mask] - 1e-6)
        x = decode(enc, space)
    return x


def _evaluate(blackbox, x, config: BOConfig):
    try:
        z_y, z_c = blackbox(x)
    except Exception:
        if not config.binary:
            raise
        return None, 1.0
    return z_y, z_c


def run(blackbox, space: SearchSpace, config: BOConfig | str, budget: int, n_init: int = 5,
        seed: int = 0, callback=None) -> Trajectory:
    """Optimize ``blackbox``: ``n_init`` random points, then model-guided steps.

    The initial design depends only on ``seed``, so different strategies run
    with the same seed share it.
    """
    if isinstance(config, str):
        config = BOConfig(strategy=config)
    if budget < n_init:
        raise ValueError("budget must be at least n_init")
    init_rng = np.random.default_rng([seed, 0])
    rng = np.random.default_rng([seed, 1])
    state = BOState(space, config, seed)
    for it in range(budget):
        if it < n_init:
            x = random_candidate(space, init_rng)
        else:
            x = propose(state, rng)
        z_y, z_c = _evaluate(blackbox, x, config)
        obs = make_observation(x, z_y, z_c, it, config)
        if it + 1 < n_init or it + 1 == budget:
            # no model needed before the first guided step or after the last one
            state = dataclasses.replace(
                state, observations=state.observations + (obs,),
                best_feasible=state.best_feasible + (_next_best(state, obs),))
        else:
            state = update(state, obs)
        if callback is not None:
            callback(state)
    return Trajectory(list(state.observations), list(state.best_feasible),
                      {**dataclasses.asdict(config), "seed": seed, "budget": budget, "n_init": n_init})


def _next_best(state, obs):
    prev = state.best_feasible[-1] if state.best_feasible else None
    if obs.feasible and obs.z_y is not None:
        return obs.z_y if prev is None else min(prev, obs.z_y)
    return prev


def replay(trajectory: Trajectory) -> list:
    """Recompute best-feasible-so-far from the recorded observations."""
    out, best = [], None
    for o in trajectory.observations:
        if o.feasible and o.z_y is not None:
            best = o.z_y if best is None else min(best, o.z_y)
        out.append(best)
    return out
