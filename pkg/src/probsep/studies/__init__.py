"""Case studies: executable models of oblivious algorithms, their
security claims, and (for the warm-up study) a machine-checked proof
outline.

Each study module exposes builders returning `Program` values plus a
`check_claims()` reporting the study's desk-scale security statements
as `Claim` records; `REGISTRY` maps the CLI names onto them.
"""

from .common import Claim, ConstraintViolation, InvalidDeleteReference
from . import heap, oram, sampler, shuffle, synthetic

REGISTRY = {
    "synthetic": synthetic.check_claims,
    "shuffle": shuffle.check_claims,
    "sampling": sampler.check_claims,
    "path-oram": oram.check_claims,
    "heap": heap.check_claims,
}

__all__ = [
    "Claim",
    "ConstraintViolation",
    "InvalidDeleteReference",
    "REGISTRY",
    "heap",
    "oram",
    "sampler",
    "shuffle",
    "synthetic",
]
