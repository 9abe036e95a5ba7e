"""Orchestration engine for task-driven tool forging.

Drives pluggable coding-agent backends through a four-stage workflow
(analysis, generation, execution, evaluation) over a filesystem workspace,
maintains a self-organizing hierarchical toolset, executes jobs locally
or via a batch scheduler, and scores/aggregates benchmark runs.
"""

__version__ = "0.1.0"
