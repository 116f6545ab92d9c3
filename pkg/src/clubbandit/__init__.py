"""Online clustering of linear contextual bandits (CLUB) with baselines and an experiment harness."""

from clubbandit.baselines import (
    Clairvoyant,
    LinUCBInd,
    LinUCBOne,
    RandomPolicy,
    UCBInd,
    UCBOne,
    UCBV,
)
from clubbandit.club import ClubModel
from clubbandit.estimators import AlgoParams, ClusterState, NodeState, TheoreticalParams
from clubbandit.graph import BfsGraph, ForestGraph, GraphConfig, init_graph

__all__ = [
    "AlgoParams",
    "BfsGraph",
    "Clairvoyant",
    "ClubModel",
    "ClusterState",
    "ForestGraph",
    "GraphConfig",
    "LinUCBInd",
    "LinUCBOne",
    "NodeState",
    "RandomPolicy",
    "TheoreticalParams",
    "UCBInd",
    "UCBOne",
    "UCBV",
    "init_graph",
]
