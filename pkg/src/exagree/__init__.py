"""Stakeholder-aligned explanation models inside a Rashomon set.

Library layout:

- ``data``: tabular tasks, CSV ingestion, synthetic generator, splits
- ``models``: logistic / MLP reference predictors and masked composition
- ``rashomon``: mask sampling within a loss bound
- ``attribution``: permutation importance, gradient baselines, rankings
- ``dman``: differentiable mask-to-attribution surrogate
- ``diffsort``: monotonic differentiable bitonic sorting network
- ``saem``: multi-head mask optimization under ranking supervision
- ``metrics``: agreement / faithfulness / fairness metric suites
- ``elicitation``: preference DSL and pluggable language-model client
- ``runs``: on-disk run directories and manifests
- ``cli`` / ``service``: command line and HTTP front ends
"""

__version__ = "0.1.0"
