import numpy as np
import pytest

from gwbe_mimo.design_gwbe import gwbe_design, snap_inflated
from gwbe_mimo.netmodel import NetworkConfig, SinrTargets

FIG3_GAMMA = [[0.45, 0.38, 0.25, 0.19], [0.43, 0.38, 0.28, 0.20], [0.47, 0.43, 0.28, 0.13]]
FIG3_GAMMA_HAT = [[0.48, 0.40, 0.27, 0.21], [0.45, 0.40, 0.30, 0.22], [0.49, 0.45, 0.30, 0.15]]


@pytest.fixture
def fig3_cfg():
    return NetworkConfig.symmetric(3, 4, 3, own=1.0, cross=0.9)


@pytest.fixture
def fig3_targets(fig3_cfg):
    return snap_inflated(SinrTargets.from_cells(FIG3_GAMMA, FIG3_GAMMA_HAT), fig3_cfg)


@pytest.fixture
def fig3_report(fig3_cfg, fig3_targets):
    return gwbe_design(fig3_targets, fig3_cfg)


def random_book(rng, tau, n):
    Q = rng.standard_normal((tau, n))
    return Q / np.linalg.norm(Q, axis=0)
