"""Recursive QAOA for interference-aware wireless channel assignment."""

from .baselines import AnnealingSolver, ExhaustiveAssigner, GreedyAssigner, brute_force, greedy_assign, greedy_extend, simulated_annealing
from .ising import (
    EliminationRecord,
    Fix,
    IsingInstance,
    Merge,
    QuboInstance,
    back_substitute,
    fix_spin,
    ising_to_qubo,
    merge_pair,
    qubo_to_ising,
)
from .pipeline import HybridPipeline, PipelineConfig, run_pipeline
from .presolve import Presolver, PresolveConfig, presolve_pipeline
from .qaoa import OptimizerConfig, QaoaParams
from .rqaoa import RQAOASolver, RqaoaConfig, run_rqaoa
from .statevector import MixerKind, MixerSpec
from .wireless import (
    ChannelAssignmentInstance,
    HotspotParams,
    PenaltyConfig,
    auto_penalty,
    build_qubo,
    generate_demo,
    generate_hotspot,
    generate_random,
    objective_value,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealingSolver",
    "auto_penalty",
    "back_substitute",
    "brute_force",
    "build_qubo",
    "ChannelAssignmentInstance",
    "EliminationRecord",
    "ExhaustiveAssigner",
    "Fix",
    "fix_spin",
    "generate_demo",
    "generate_hotspot",
    "generate_random",
    "greedy_assign",
    "greedy_extend",
    "GreedyAssigner",
    "HotspotParams",
    "HybridPipeline",
    "ising_to_qubo",
    "IsingInstance",
    "Merge",
    "merge_pair",
    "MixerKind",
    "MixerSpec",
    "objective_value",
    "OptimizerConfig",
    "PenaltyConfig",
    "PipelineConfig",
    "presolve_pipeline",
    "PresolveConfig",
    "Presolver",
    "QaoaParams",
    "qubo_to_ising",
    "QuboInstance",
    "RqaoaConfig",
    "RQAOASolver",
    "run_pipeline",
    "run_rqaoa",
    "simulated_annealing",
]
