"""Form understanding toolkit: label, interpret, repair and fill web forms.

The pipeline runs in stages: a DOM tree is ingested (``opal.dom``), fields
are labeled with nearby text nodes in three scopes (``opal.labeling``),
labels are annotated against gazetteers (``opal.annotation``), a rule
program classifies and repairs the form against a domain schema
(``opal.tl``, ``opal.interpretation``) and master queries are translated
into concrete fill plans (``opal.integration``).
"""

__version__ = "0.1.0"
