"""qfab: a fault-tolerance workbench for quantum LDPC codes.

Submodules:
    gf2        bit-packed GF(2) linear algebra, group-algebra lifts
    codes      CSS code constructions and the built-in catalog
    distance   randomized distance upper-bound estimators
    circuits   noisy syndrome-extraction and experiment circuits
    simulator  detector error models, sampling, and error-rate statistics
    tableau    independent stabilizer simulator used as a cross-check oracle
    decoder    serial min-sum BP with localized post-processing and ensembling
    surgery    graph-based ancilla systems for logical measurements
    estimator  space and runtime accounting for full architectures
    cli        command-line entry points
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
