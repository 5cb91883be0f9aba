"""Historized data-warehouse engine.

Builds a warehouse as a materialized object view over a source schema,
historizes it at attribute, class, or environment level, derives star-shaped
data marts from it, and emits structure and refresh scripts.
"""

__version__ = "0.1.0"
