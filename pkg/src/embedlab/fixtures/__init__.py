"""Bundled per-dataset benchmark scores for the five studied model variants.

`model1.json` .. `model5.json` carry the published per-dataset scores for
the STS, retrieval, classification, and clustering tasks. The retrieval
averages of models 2 and 3 are reported inconsistently between the
summary table and the per-dataset appendix of the source results; the
`*_alt.json` files carry the alternate labeling with those two models'
retrieval rows swapped. Model 1 rows are consistent in both labelings.
"""

from importlib import resources


def fixture_path(name: str):
    """Filesystem path of a bundled fixture file, e.g. ``model1.json``."""
    return resources.files(__package__) / name
