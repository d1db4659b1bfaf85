"""Self-evaluation fixtures: four synthetic forums and a server for them."""

from .forums import (
    FIXTURE_FAMILIES,
    PASSWORD,
    USERNAME,
    ForumFixture,
    RolePlan,
    build_fixture,
    node_by_gt,
    nodes_by_gt_prefix,
    plan_accepts,
)
from .naive import run_naive_crawl
from .server import FixtureServer, ServerHit

__all__ = [
    "FIXTURE_FAMILIES",
    "PASSWORD",
    "USERNAME",
    "FixtureServer",
    "ForumFixture",
    "RolePlan",
    "ServerHit",
    "build_fixture",
    "node_by_gt",
    "nodes_by_gt_prefix",
    "plan_accepts",
    "run_naive_crawl",
]
