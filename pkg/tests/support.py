"""
Shared builders for the test suites
"""
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.models.observation import Dataset
from src.models.params import ModelParams
from src.services.likelihood import Design
from src.services.simulate import Scenario, generate

# left-censored at 1, interval (1, 2], right-censored at 2; no covariates
TOY_LAMBDA = (np.log(1.5), np.log(2.0))


def toy_dataset():
    return Dataset(
        left=[0.0, 1.0, 2.0],
        right=[1.0, 2.0, np.inf],
        delta=[(1, 0, 0), (0, 1, 0), (0, 0, 1)],
        covariates=np.zeros((3, 0))
    )


def toy_loglik(lam1, lam2):
    return (np.log(-np.expm1(-lam1)) - 2 * lam1) + (np.log(-np.expm1(-lam2)) - lam2)


def simulated(kind='const_hazard', n=100, seed=1, **kwargs):
    scenario = Scenario(kind=kind, n=n, seed=seed, **kwargs)
    return generate(scenario), scenario


def simulated_design(kind='const_hazard', n=100, seed=1, **kwargs):
    data, scenario = simulated(kind, n, seed, **kwargs)
    return Design.build(data, scenario.process())


def random_state(design, rng):
    """A valid state: positive jumps of modest total mass and positive coefficients"""
    lam = rng.uniform(0.2, 1.0, size=design.m) * 2.0 / design.m
    beta = rng.uniform(0.1, 1.0, size=design.p)
    return ModelParams(np.log(lam), beta)
