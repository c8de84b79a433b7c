"""Small shared types: prox results and single-valuedness certificates."""

from dataclasses import dataclass

import numpy as np

# Relative tie tolerance: two structurally distinct prox candidates whose
# objectives differ by at most EPS_TIE * (1 + |moreau|) count as tied.
EPS_TIE = 1e-10


class ProxNotSingleValued(RuntimeError):
    """A Clarke element or envelope gradient was requested at a point where
    the prox certificate does not guarantee single-valuedness."""


class DegenerateProxError(RuntimeError):
    """The prox point touches a face of the box constraint, so the subspace
    projector formula for the Clarke element does not apply."""


@dataclass(frozen=True)
class Certificate:
    """Uniqueness gap of a prox evaluation.

    ``gap`` is the objective difference (in Moreau-envelope units) between
    the best and the second-best structurally distinct candidate; the prox
    is reported single-valued when ``gap > tol``.
    """
    gap: float
    tol: float

    @classmethod
    def from_gap(cls, gap, moreau, eps=EPS_TIE):
        return cls(float(gap), eps * (1.0 + abs(float(moreau))))

    @property
    def single_valued(self):
        return self.gap > self.tol

    def __str__(self):
        if self.single_valued:
            return 'SingleValued(gap=%.3g)' % self.gap
        return 'PossiblyMultivalued(gap=%.3g)' % self.gap


@dataclass(frozen=True, eq=False)
class ProxResult:
    """A prox point, its Moreau envelope value and a certificate."""
    point: np.ndarray
    moreau: float
    certificate: Certificate

    @property
    def single_valued(self):
        return self.certificate.single_valued
