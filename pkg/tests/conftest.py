"""Shared builders for the test suite."""

import numpy as np
import pytest

from irslink.channel import ChannelRealization
from irslink.numerics import RngStream, sample_cn01
from irslink.scenario import ScenarioConfig


def make_realization(seed, *, n=2, m=8, l=4, noise_w=1e-12, frame=1,
                     direct_scale=1e-2):
    """Dense random links with no geometry attached.

    Useful wherever a test needs a channel of arbitrary shape without paying
    for (or depending on) the geometric synthesis path.
    """
    rng = RngStream(seed, 9000 + frame)
    g = sample_cn01(rng, (m, l))
    v = sample_cn01(rng, (n, m))
    direct = sample_cn01(rng, (n, l)) * direct_scale
    return ChannelRealization(frame=frame, g=g, v=v, direct=direct,
                              noise_w=noise_w)


@pytest.fixture
def desk_cfg():
    # 4x4 surface keeps exhaustive comparisons and AO runs cheap
    return ScenarioConfig(irs_elements=16, bb_node_budget=100_000)


@pytest.fixture
def tiny_cfg():
    return ScenarioConfig(irs_elements=4, bs_antennas=4, users_per_cluster=2,
                          total_users=92 * 2, bb_node_budget=10_000)
