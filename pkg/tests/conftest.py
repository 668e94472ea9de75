import sys

import pytest

from polarbounds.channels import BmsChannel, bec_tree, build_tree, sigma_for_capacity


def truncate(tree, lam):
    """Same tree cut at depth ``lam`` (reuses the already computed densities)."""
    nodes = {k: v for k, v in tree.nodes.items() if len(k) <= lam}
    return type(tree)(tree.channel, lam, nodes, tree.bins, tree.grid_half_width)


@pytest.fixture(scope="session")
def half_capacity_sigma():
    return sigma_for_capacity(0.5)


@pytest.fixture(scope="session")
def deep_trees(half_capacity_sigma):
    """Depth-2 trees for the three reference channels."""
    return {
        "bec": bec_tree(0.4, 2),
        "bsc": build_tree(BmsChannel.bsc(0.11), 2),
        "biawgn": build_tree(BmsChannel.biawgn(half_capacity_sigma), 2),
    }


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
