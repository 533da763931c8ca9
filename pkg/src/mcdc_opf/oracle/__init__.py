"""Independent checks of OPF results.

Nothing in this package may import the optimisation model
(``mcdc_opf.formulation.model``/``terms``) or the NLP solver; see
CONTRIBUTING.md.
"""

from .audit import AuditReport, DimensionMismatch, Residual, audit
from .embedding import equal_split_embedding

__all__ = ["AuditReport", "DimensionMismatch", "Residual", "audit", "equal_split_embedding"]
