"""Secure relay power allocation for a hybrid optical/acoustic underwater link.

Build the MDP from a config, solve it, and evaluate schemes::

    from uwsec import load_config, build_model, policy_iteration, Scheme, evaluate
    cfg = load_config()
    model = build_model(cfg)
    opa = Scheme.opa(policy_iteration(model, cfg.epsilon).policy)
    print(evaluate(opa, cfg, episodes=10_000))
"""
from ._accel import backend
from .config import ConfigError, SystemConfig, default_config, load_config
from .mdp import MdpModel, build_model, policy_iteration, value_iteration
from .policies import Scheme, make_scheme, select_action
from .simulate import EvalResult, evaluate, run_episode

__all__ = [
    "backend", "ConfigError", "SystemConfig", "default_config", "load_config",
    "MdpModel", "build_model", "policy_iteration", "value_iteration",
    "Scheme", "make_scheme", "select_action", "EvalResult", "evaluate", "run_episode",
]
